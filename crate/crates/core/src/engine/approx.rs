//! Monte-Carlo estimation with exact binomial confidence intervals.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::beta::inv_beta_reg;

use super::compile::Program;
use super::exec::Mode;
use super::trace::{check_inputs, run_trace, RngResolver};
use super::{AnalysisMode, EngineError, Outcome};
use crate::model::{SystemModel, UsageProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxOptions {
    pub samples: u64,
    /// Two-sided confidence level in (0, 1).
    pub confidence: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Results do not depend
    /// on this.
    pub workers: Option<usize>,
    pub mode: AnalysisMode,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        Self { samples: 10_000, confidence: 0.95, seed: 0, workers: None, mode: AnalysisMode::Coverage }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalResult {
    pub mode: AnalysisMode,
    /// Fraction of sampled traces that ended normally.
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub confidence: f64,
    pub samples: u64,
    pub successes: u64,
    pub seed: u64,
    /// Counts of non-normal outcomes.
    pub outcomes: BTreeMap<Outcome, u64>,
}

impl IntervalResult {
    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

/// Two-sided Clopper-Pearson interval for `k` successes in `n` trials.
///
/// ```
/// let (lo, hi) = covprob::engine::clopper_pearson(1, 1, 0.8);
/// assert!((lo - 0.1).abs() < 1e-12 && hi == 1.0);
/// ```
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n, "need 0 <= k <= n and n > 0");
    let alpha = 1.0 - confidence;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else if k == n {
        (alpha / 2.0).powf(1.0 / nf)
    } else {
        inv_beta_reg(kf, nf - kf + 1.0, alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else if k == 0 {
        1.0 - (alpha / 2.0).powf(1.0 / nf)
    } else {
        inv_beta_reg(kf + 1.0, nf - kf, 1.0 - alpha / 2.0)
    };
    (lo, hi)
}

#[derive(Default)]
struct Tally {
    successes: u64,
    outcomes: BTreeMap<Outcome, u64>,
    /// Earliest failing sample index and its error.
    fault: Option<(u64, EngineError)>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.successes += other.successes;
        for (o, c) in other.outcomes {
            *self.outcomes.entry(o).or_default() += c;
        }
        self.fault = match (self.fault, other.fault) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn rng_for(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

fn sample_all(prog: &Program, mode: Mode, opts: &ApproxOptions) -> Tally {
    (0..opts.samples)
        .into_par_iter()
        .fold(Tally::default, |mut t, i| {
            if t.fault.is_some() {
                return t;
            }
            match run_trace(prog, mode, &mut RngResolver(rng_for(opts.seed, i)), false) {
                Ok(tr) if tr.outcome == Outcome::Normal => t.successes += 1,
                Ok(tr) => *t.outcomes.entry(tr.outcome).or_default() += 1,
                Err(e) => t.fault = Some((i, e)),
            }
            t
        })
        .reduce(Tally::default, Tally::merge)
}

pub fn approx_coverage_with(
    model: &SystemModel,
    profile: &UsageProfile,
    opts: &ApproxOptions,
) -> Result<IntervalResult, EngineError> {
    if opts.samples == 0 {
        return Err(EngineError::InvalidArgument("at least one sample is required".into()));
    }
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(EngineError::InvalidArgument("confidence must lie strictly between 0 and 1".into()));
    }
    check_inputs(model, profile)?;
    let prog = Program::compile(model, profile)?;
    let mode: Mode = opts.mode.into();
    let tally = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| EngineError::InvalidArgument(e.to_string()))?
            .install(|| sample_all(&prog, mode, opts)),
        None => sample_all(&prog, mode, opts),
    };
    if let Some((i, err)) = tally.fault {
        // Replay the failing sample with events recorded.
        return Err(
            match run_trace(&prog, mode, &mut RngResolver(rng_for(opts.seed, i)), true) {
                Err(e) => e,
                Ok(_) => err,
            },
        );
    }
    let (lo, hi) = clopper_pearson(tally.successes, opts.samples, opts.confidence);
    Ok(IntervalResult {
        mode: opts.mode,
        estimate: tally.successes as f64 / opts.samples as f64,
        lo,
        hi,
        confidence: opts.confidence,
        samples: opts.samples,
        successes: tally.successes,
        seed: opts.seed,
        outcomes: tally.outcomes,
    })
}

/// Estimates the coverage probability from `samples` random traces.
/// Sample `i` draws from its own stream of a generator seeded with `seed`,
/// so results are reproducible and independent of scheduling.
pub fn approx_coverage(
    model: &SystemModel,
    profile: &UsageProfile,
    samples: u64,
    confidence: f64,
    seed: u64,
) -> Result<IntervalResult, EngineError> {
    approx_coverage_with(
        model,
        profile,
        &ApproxOptions { samples, confidence, seed, ..ApproxOptions::default() },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// P(X <= k) for X ~ Binomial(n, p), summed directly.
    fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
        let mut total = 0.0;
        let mut log_c = 0.0f64;
        for i in 0..=n {
            if i > 0 {
                log_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
            }
            if i <= k {
                total += (log_c + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp();
            }
        }
        total
    }

    /// Solves f(p) = target for a decreasing f by bisection.
    fn bisect(f: impl Fn(f64) -> f64, target: f64) -> f64 {
        let (mut a, mut b) = (1e-15, 1.0 - 1e-15);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(m) > target {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn matches_binomial_tail_inversion() {
        for &(k, n, c) in &[(3u64, 10u64, 0.8), (50, 100, 0.95), (1, 20, 0.9), (19, 20, 0.9)] {
            let a = 1.0 - c;
            let (lo, hi) = clopper_pearson(k, n, c);
            // lo: P(X >= k | lo) = a/2, i.e. 1 - cdf(k-1) = a/2.
            let lo_ref = bisect(|p| -(1.0 - binom_cdf(k - 1, n, p)), -a / 2.0);
            // hi: P(X <= k | hi) = a/2.
            let hi_ref = bisect(|p| binom_cdf(k, n, p), a / 2.0);
            assert!((lo - lo_ref).abs() < 1e-9, "lo {lo} vs {lo_ref}");
            assert!((hi - hi_ref).abs() < 1e-9, "hi {hi} vs {hi_ref}");
        }
    }

    #[test]
    fn degenerate_counts() {
        let (lo, hi) = clopper_pearson(1, 1, 0.8);
        assert!((lo - 0.1).abs() < 1e-15);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(0, 1, 0.8);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.9).abs() < 1e-15);
        // Published table value: n = 10, k = 0 at 95% gives upper 0.3085.
        let (_, hi) = clopper_pearson(0, 10, 0.95);
        assert!((hi - 0.3085).abs() < 1e-4);
    }
}
