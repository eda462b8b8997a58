//! Discrete distributions with exact rational masses.

use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::formula::Domain;

/// Default denominator used when rounding discretized normal masses.
pub const DEFAULT_NORMAL_PRECISION: u64 = 1_000_000_000;

/// Minimum accepted rounding denominator for discretized normals.
pub const MIN_NORMAL_PRECISION: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DistributionError {
    #[error("uniform bounds are reversed: {lo} > {hi}")]
    EmptyRange { lo: i64, hi: i64 },
    #[error("standard deviation must be positive, got {0}")]
    InvalidSigma(BigRational),
    #[error("rounding denominator {0} is below the minimum of {MIN_NORMAL_PRECISION}")]
    InvalidPrecision(u64),
    #[error("probability mass for value {0} must be positive")]
    NonPositiveMass(BigInt),
    #[error("value {0} appears more than once")]
    DuplicateValue(BigInt),
    #[error("masses sum to {0}, expected exactly 1")]
    MassNotOne(BigRational),
    #[error("distribution has empty support")]
    EmptySupport,
}

/// A probability mass function over integers. Values are sorted ascending,
/// masses are strictly positive and sum to exactly one.
#[derive(Debug, Clone)]
pub struct Pmf {
    entries: Vec<(BigInt, BigRational)>,
    sampler: Sampler,
}

/// Integer weights used for exact sampling: value `i` is drawn with
/// probability `weights[i] / total`.
#[derive(Debug, Clone)]
enum Sampler {
    Integer { cumulative: Vec<u64>, total: u64 },
    Float { cumulative: Vec<f64> },
}

impl PartialEq for Pmf {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for Pmf {}

impl Hash for Pmf {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.entries.hash(state)
    }
}

impl Pmf {
    pub fn new(mut entries: Vec<(BigInt, BigRational)>) -> Result<Pmf, DistributionError> {
        if entries.is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DistributionError::DuplicateValue(w[0].0.clone()));
            }
        }
        if let Some((v, _)) = entries.iter().find(|(_, m)| !m.is_positive()) {
            return Err(DistributionError::NonPositiveMass(v.clone()));
        }
        let sum: BigRational = entries.iter().map(|(_, m)| m).sum();
        if !sum.is_one() {
            return Err(DistributionError::MassNotOne(sum));
        }
        let sampler = Sampler::build(&entries);
        Ok(Pmf { entries, sampler })
    }

    pub fn point(value: impl Into<BigInt>) -> Pmf {
        Pmf::new(vec![(value.into(), BigRational::one())]).expect("point mass is valid")
    }

    pub fn entries(&self) -> &[(BigInt, BigRational)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mass(&self, value: &BigInt) -> Option<&BigRational> {
        self.entries
            .binary_search_by(|(v, _)| v.cmp(value))
            .ok()
            .map(|i| &self.entries[i].1)
    }

    /// Smallest range containing the support, if it fits in `i64`.
    pub fn hull(&self) -> Option<Domain> {
        let lo = self.entries.first()?.0.to_i64()?;
        let hi = self.entries.last()?.0.to_i64()?;
        Domain::new(lo, hi)
    }

    /// Draws a value index.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.sampler {
            Sampler::Integer { cumulative, total } => {
                let x = rng.random_range(0..*total);
                cumulative.partition_point(|&c| c <= x)
            }
            Sampler::Float { cumulative } => {
                let x: f64 = rng.random();
                cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &BigInt {
        &self.entries[self.sample_index(rng)].0
    }
}

impl Sampler {
    fn build(entries: &[(BigInt, BigRational)]) -> Sampler {
        // Common denominator; fall back to floats when it overflows u64.
        let lcm = entries
            .iter()
            .fold(BigInt::one(), |acc, (_, m)| num_integer::Integer::lcm(&acc, m.denom()));
        if let Some(total) = lcm.to_u64() {
            let mut acc = 0u64;
            let cumulative = entries
                .iter()
                .map(|(_, m)| {
                    acc += (m.numer() * (&lcm / m.denom())).to_u64().unwrap();
                    acc
                })
                .collect();
            return Sampler::Integer { cumulative, total };
        }
        let mut acc = 0f64;
        let cumulative = entries
            .iter()
            .map(|(_, m)| {
                acc += m.to_f64().unwrap_or(0.0);
                acc
            })
            .collect();
        Sampler::Float { cumulative }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DistributionKind {
    Uniform { lo: i64, hi: i64 },
    /// Integer-discretized normal; `precision` is the rounding denominator.
    Normal { mean: BigRational, sd: BigRational, precision: u64 },
    Explicit,
}

/// A distribution as written in a model, together with its materialized
/// mass function. Downstream code only ever looks at [`Distribution::pmf`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Distribution {
    kind: DistributionKind,
    pmf: Pmf,
}

impl Distribution {
    pub fn uniform(lo: i64, hi: i64) -> Result<Distribution, DistributionError> {
        if lo > hi {
            return Err(DistributionError::EmptyRange { lo, hi });
        }
        let n = BigInt::from(hi) - BigInt::from(lo) + 1;
        let mass = BigRational::new(BigInt::one(), n);
        let entries = (lo..=hi).map(|v| (BigInt::from(v), mass.clone())).collect();
        Ok(Distribution { kind: DistributionKind::Uniform { lo, hi }, pmf: Pmf::new(entries)? })
    }

    pub fn normal(
        mean: BigRational,
        sd: BigRational,
        precision: u64,
    ) -> Result<Distribution, DistributionError> {
        let pmf = materialize_normal(&mean, &sd, precision)?;
        Ok(Distribution { kind: DistributionKind::Normal { mean, sd, precision }, pmf })
    }

    pub fn explicit(entries: Vec<(BigInt, BigRational)>) -> Result<Distribution, DistributionError> {
        Ok(Distribution { kind: DistributionKind::Explicit, pmf: Pmf::new(entries)? })
    }

    pub fn point(value: impl Into<BigInt>) -> Distribution {
        Distribution { kind: DistributionKind::Explicit, pmf: Pmf::point(value) }
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }
}

fn std_normal_interval(lo: f64, hi: f64) -> f64 {
    // P(lo < Z <= hi) for lo < hi, choosing the erf/erfc form that avoids
    // cancellation in the tails.
    use statrs::function::erf::{erf, erfc};
    let s = std::f64::consts::SQRT_2;
    if lo >= 0.0 {
        0.5 * (erfc(lo / s) - erfc(hi / s))
    } else if hi <= 0.0 {
        0.5 * (erfc(-hi / s) - erfc(-lo / s))
    } else {
        0.5 * (erf(hi / s) - erf(lo / s))
    }
}

/// Discretizes N(mean, sd²) onto the integers.
///
/// The support is the integers in `[⌈mean − 6·sd⌉, ⌊mean + 6·sd⌋]`. Each
/// integer `k` receives the normal mass of `(k − ½, k + ½]`, rounded to a
/// multiple of `1/precision`; zero-rounded values are dropped and the rest
/// renormalized so the masses sum to exactly one. Masses depend only on
/// `|k − mean|`, so the result is exactly symmetric around the mean.
pub fn materialize_normal(
    mean: &BigRational,
    sd: &BigRational,
    precision: u64,
) -> Result<Pmf, DistributionError> {
    if !sd.is_positive() {
        return Err(DistributionError::InvalidSigma(sd.clone()));
    }
    if precision < MIN_NORMAL_PRECISION {
        return Err(DistributionError::InvalidPrecision(precision));
    }
    let six = BigRational::from_integer(BigInt::from(6));
    let lo = (mean - &six * sd).ceil().to_integer();
    let hi = (mean + &six * sd).floor().to_integer();
    let sd_f = sd.to_f64().expect("finite sd");
    let scale = precision as f64;

    let mut weights = Vec::new();
    let mut k = lo;
    while k <= hi {
        let offset = (BigRational::from_integer(k.clone()) - mean).abs().to_f64().unwrap();
        let p = std_normal_interval((offset - 0.5) / sd_f, (offset + 0.5) / sd_f);
        let w = (p * scale).round();
        if w >= 1.0 {
            weights.push((k.clone(), BigInt::from(w as u64)));
        }
        k += 1;
    }
    let total: BigInt = weights.iter().map(|(_, w)| w).sum();
    if total.is_zero() {
        return Err(DistributionError::EmptySupport);
    }
    let entries = weights
        .into_iter()
        .map(|(k, w)| (k, BigRational::new(w, total.clone())))
        .collect();
    Pmf::new(entries)
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DistributionKind::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            DistributionKind::Normal { mean, sd, precision } => {
                write!(f, "normal_d({}, {}", fmt_rational(mean), fmt_rational(sd))?;
                if *precision != DEFAULT_NORMAL_PRECISION {
                    write!(f, ", {precision}")?;
                }
                f.write_str(")")
            }
            DistributionKind::Explicit => {
                f.write_str("pmf{")?;
                for (i, (v, m)) in self.pmf.entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}: {}", fmt_rational(m))?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Renders `r` as `n` or `n/d`.
pub fn fmt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn mass_of(pmf: &Pmf, v: i64) -> BigRational {
        pmf.mass(&BigInt::from(v)).cloned().unwrap_or_else(BigRational::zero)
    }

    #[test]
    fn uniform_masses() {
        let d = Distribution::uniform(5, 9).unwrap();
        assert_eq!(d.pmf().len(), 5);
        assert!(d.pmf().entries().iter().all(|(_, m)| *m == q(1, 5)));
        assert_eq!(
            Distribution::uniform(3, 2),
            Err(DistributionError::EmptyRange { lo: 3, hi: 2 })
        );
    }

    #[test]
    fn explicit_validation() {
        let ok = Distribution::explicit(vec![(1.into(), q(1, 3)), (4.into(), q(2, 3))]);
        assert!(ok.is_ok());
        let short = Distribution::explicit(vec![(1.into(), q(1, 3))]);
        assert!(matches!(short, Err(DistributionError::MassNotOne(_))));
        let zero = Distribution::explicit(vec![(1.into(), q(0, 1)), (2.into(), q(1, 1))]);
        assert!(matches!(zero, Err(DistributionError::NonPositiveMass(_))));
        let dup = Distribution::explicit(vec![(1.into(), q(1, 2)), (1.into(), q(1, 2))]);
        assert!(matches!(dup, Err(DistributionError::DuplicateValue(_))));
    }

    #[test]
    fn normal_is_symmetric() {
        let pmf = materialize_normal(&q(0, 1), &q(1, 1), DEFAULT_NORMAL_PRECISION).unwrap();
        for k in 0..=6 {
            assert_eq!(mass_of(&pmf, k), mass_of(&pmf, -k), "k = {k}");
        }
        let sum: BigRational = pmf.entries().iter().map(|(_, m)| m).sum();
        assert!(sum.is_one());
    }

    #[test]
    fn normal_mode_and_support() {
        let pmf = materialize_normal(&q(10, 1), &q(3, 1), DEFAULT_NORMAL_PRECISION).unwrap();
        let hull = pmf.hull().unwrap();
        assert!(hull.lo() >= -8 && hull.hi() <= 28);
        let argmax = pmf.entries().iter().max_by(|a, b| a.1.cmp(&b.1)).unwrap();
        assert_eq!(argmax.0, BigInt::from(10));
    }

    #[test]
    fn normal_center_mass() {
        // Oracle: P(-1/2 < Z <= 1/2) = erf(1/(2√2)) = 0.382924922548026...
        // computed independently with the Taylor series in `taylor_erf`.
        let expected = taylor_erf(0.5 / std::f64::consts::SQRT_2);
        assert!((expected - 0.3829249225480262).abs() < 1e-12);
        let pmf = materialize_normal(&q(0, 1), &q(1, 1), DEFAULT_NORMAL_PRECISION).unwrap();
        let m0 = mass_of(&pmf, 0).to_f64().unwrap();
        assert!((m0 - expected).abs() < 1e-3, "mass(0) = {m0}");
    }

    fn taylor_erf(x: f64) -> f64 {
        // erf(x) = 2/√π Σ (-1)^n x^(2n+1) / (n! (2n+1))
        let mut sum = 0.0;
        let mut term = x;
        for n in 0..60 {
            sum += term / (2 * n + 1) as f64;
            term *= -x * x / (n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn normal_errors() {
        assert!(matches!(
            materialize_normal(&q(0, 1), &q(0, 1), DEFAULT_NORMAL_PRECISION),
            Err(DistributionError::InvalidSigma(_))
        ));
        assert_eq!(
            materialize_normal(&q(0, 1), &q(1, 1), 1000),
            Err(DistributionError::InvalidPrecision(1000))
        );
    }

    #[test]
    fn wide_normal_is_symmetric_about_its_mean() {
        let pmf = materialize_normal(&q(1000, 1), &q(32, 1), DEFAULT_NORMAL_PRECISION).unwrap();
        let hull = pmf.hull().unwrap();
        assert!(hull.lo() >= 808 && hull.hi() <= 1192);
        assert_eq!(mass_of(&pmf, 990), mass_of(&pmf, 1010));
    }

    #[test]
    fn sampling_follows_masses() {
        use rand::SeedableRng;
        let d = Distribution::explicit(vec![(0.into(), q(1, 4)), (1.into(), q(3, 4))]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let ones = (0..40_000).filter(|_| d.pmf().sample(&mut rng) == &BigInt::one()).count();
        let frac = ones as f64 / 40_000.0;
        assert!((frac - 0.75).abs() < 0.01, "{frac}");
    }
}
