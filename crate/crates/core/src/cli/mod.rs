//! The `covprob` command-line front end.
//!
//! Exit codes: 0 on success, 1 on diagnostics (unreadable or invalid input,
//! bad arguments, a coverage region that is not correct), 2 on analysis
//! faults (exceeded budgets, evaluation errors, profile contract
//! violations).

pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::Zero;
use serde_json::{json, Map, Value};

use crate::dsl::{
    export_qpp, parse_goals_for, parse_model_named, parse_profile_named, parse_qpp, print_model,
    print_profile, ParseError,
};
use crate::engine::{
    approx_coverage_with, call_probability_with, check_region, exact_with, expected_error_cost_with,
    mass_by_site, AnalysisMode, ApproxOptions, EngineError, ExactOptions, Site,
    DEFAULT_BRANCH_BUDGET,
};
use crate::formula::{Domain, Formula, Signature, VarType};
use crate::model::{
    static_pre_check, validate_model, Diagnostic, ServiceRef, Severity, SystemModel, UsageProfile,
};
use crate::proofs::region_for_model;
use report::{rational, rational_map, rational_text, Report};

/// Translates a model and profile into the flat probabilistic program
/// format: one function per service, each starting with its coverage
/// check, and a `main` function for the profile.
pub fn export_prob_program(model: &SystemModel, profile: &UsageProfile) -> String {
    export_qpp(model, profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Qpp,
}

#[derive(Parser, Debug)]
#[command(name = "covprob", version, about = "Coverage-probability analysis for service architectures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Inputs {
    /// Model file.
    #[arg(short = 'm', long = "model")]
    model: Option<PathBuf>,
    /// Usage profile file.
    #[arg(short = 'p', long = "profile")]
    profile: Option<PathBuf>,
    /// Exported probabilistic program; replaces --model and --profile.
    #[arg(long = "qpp", conflicts_with_all = ["model", "profile"])]
    qpp: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
struct Budget {
    /// Maximum number of enumeration steps and sample branches.
    #[arg(long, default_value_t = DEFAULT_BRANCH_BUDGET)]
    budget: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a model and profile.
    Check {
        #[command(flatten)]
        inputs: Inputs,
        /// Enumeration domains for the static precondition check.
        #[arg(long, value_parser = parse_domains)]
        domains: Option<Signature>,
    },
    /// Exact coverage probability.
    Exact {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        budget: Budget,
    },
    /// Exact correctness probability.
    Correctness {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        budget: Budget,
    },
    /// Monte-Carlo estimate with a confidence interval.
    Approx {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        /// Estimate the correctness probability instead.
        #[arg(long)]
        correctness: bool,
    },
    /// Coverage regions from proof goals, checked against the model.
    Regions {
        #[arg(short = 'm', long = "model")]
        model: PathBuf,
        /// Goal file; without it the declared regions are checked.
        #[arg(long)]
        goals: Option<PathBuf>,
        #[arg(long)]
        service: Option<String>,
        /// Enumeration domains, e.g. `load=-8..8,n=0..8`.
        #[arg(long, value_parser = parse_domains)]
        domains: Option<Signature>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Probability that a service is entered.
    Callprob {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        service: String,
        #[command(flatten)]
        budget: Budget,
    },
    /// Expected error cost.
    Cost {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        budget: Budget,
    },
    /// Print the model and profile in another format.
    Export {
        #[command(flatten)]
        inputs: Inputs,
    },
}

fn parse_domains(s: &str) -> Result<Signature, String> {
    let mut sig = Signature::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, range) = part.split_once('=').ok_or_else(|| format!("expected VAR=LO..HI, got `{part}`"))?;
        let (lo, hi) = range.split_once("..").ok_or_else(|| format!("expected LO..HI, got `{range}`"))?;
        let lo: i64 = lo.trim().parse().map_err(|e| format!("bad lower bound in `{part}`: {e}"))?;
        let hi: i64 = hi.trim().parse().map_err(|e| format!("bad upper bound in `{part}`: {e}"))?;
        let d = Domain::new(lo, hi).ok_or_else(|| format!("empty domain in `{part}`"))?;
        sig.declare(name.trim(), VarType::Int, d);
    }
    Ok(sig)
}

/// Why a command stopped early.
enum Stop {
    Diagnostics(String),
    Fault(Box<Report>, String),
}

fn read(path: &Path) -> Result<String, Stop> {
    std::fs::read_to_string(path).map_err(|e| Stop::Diagnostics(format!("cannot read {}: {e}", path.display())))
}

fn parse_err(e: ParseError) -> Stop {
    Stop::Diagnostics(format!("error: {e}"))
}

struct Loaded {
    model: SystemModel,
    profile: UsageProfile,
    model_name: String,
    profile_name: Option<String>,
}

fn load(inputs: &Inputs, need_profile: bool) -> Result<Loaded, Stop> {
    if let Some(q) = &inputs.qpp {
        let p = parse_qpp(&read(q)?).map_err(parse_err)?;
        let name = q.display().to_string();
        return Ok(Loaded { model: p.model, profile: p.profile, model_name: name.clone(), profile_name: Some(name) });
    }
    let Some(mp) = &inputs.model else {
        return Err(Stop::Diagnostics("error: --model or --qpp is required".into()));
    };
    let model = parse_model_named(&read(mp)?, &mp.display().to_string()).map_err(parse_err)?;
    let (profile, profile_name) = match &inputs.profile {
        Some(pp) => (
            parse_profile_named(&read(pp)?, &pp.display().to_string()).map_err(parse_err)?,
            Some(pp.display().to_string()),
        ),
        None if need_profile => return Err(Stop::Diagnostics("error: --profile is required".into())),
        None => (UsageProfile { name: "empty".into(), body: Vec::new() }, None),
    };
    Ok(Loaded { model, profile, model_name: mp.display().to_string(), profile_name })
}

/// Errors stop the command; warnings go to `err`.
fn validated(l: &Loaded, err: &mut dyn Write) -> Result<(), Stop> {
    let diags = validate_model(&l.model, &l.profile);
    let mut errors = String::new();
    for d in &diags {
        match d.severity {
            Severity::Error => errors.push_str(&format!("{d}\n")),
            Severity::Warning => {
                let _ = writeln!(err, "{d}");
            }
        }
    }
    if errors.is_empty() { Ok(()) } else { Err(Stop::Diagnostics(errors.trim_end().to_string())) }
}

const ASSUME_BEHAVIOR: &str =
    "service behavior models contain exactly the service calls and state updates of the implementations";
const ASSUME_REGIONS: &str = "coverage regions are taken as given; `regions` checks them on finite domains";
const ASSUME_RESULT: &str = "services return the final value of `result`, 0 if unassigned";

fn base(mode: &'static str, key: &'static str, l: &Loaded) -> Report {
    let mut r = Report::new(mode, key);
    r.model = Some(l.model_name.clone());
    r.profile = l.profile_name.clone();
    r.assumptions = vec![ASSUME_BEHAVIOR.into(), ASSUME_REGIONS.into(), ASSUME_RESULT.into()];
    r
}

fn engine_stop(mut rep: Report, e: EngineError) -> Stop {
    match e {
        EngineError::InvalidModel(m) | EngineError::InvalidArgument(m) => Stop::Diagnostics(format!("error: {m}")),
        EngineError::Fault(f) => {
            let text = report::fault_text(&f);
            rep.faults.push(report::fault(&f));
            Stop::Fault(Box::new(rep), text)
        }
        other => {
            let msg = other.to_string();
            rep.faults.push(json!({ "kind": fault_kind(&other), "message": msg }));
            Stop::Fault(Box::new(rep), format!("fault: {msg}\n"))
        }
    }
}

fn fault_kind(e: &EngineError) -> &'static str {
    match e {
        EngineError::BranchBudgetExceeded { .. } => "budget_exceeded",
        EngineError::Formula(_) => "formula",
        _ => "engine",
    }
}

/// Masses charged to every service, zero included, plus the profile if it
/// aborted.
fn site_masses(model: &SystemModel, by_site: &BTreeMap<Site, BigRational>) -> BTreeMap<String, BigRational> {
    let mut out: BTreeMap<String, BigRational> =
        model.services().map(|(r, _)| (r.to_string(), BigRational::zero())).collect();
    for (s, m) in by_site {
        *out.entry(s.to_string()).or_insert_with(BigRational::zero) += m;
    }
    out
}

struct Output {
    json: Value,
    text: String,
    code: i32,
}

fn emit(rep: &Report, text: String, code: i32) -> Output {
    Output { json: rep.to_json(), text, code }
}

fn exact_cmd(inputs: &Inputs, budget: u64, mode: AnalysisMode, err: &mut dyn Write) -> Result<Output, Stop> {
    let l = load(inputs, true)?;
    validated(&l, err)?;
    let (name, key, label) = match mode {
        AnalysisMode::Coverage => ("exact", "coverage_probability", "coverage probability"),
        AnalysisMode::Correctness => ("correctness", "correctness_probability", "correctness probability"),
    };
    let mut rep = base(name, key, &l);
    let opts = ExactOptions { budget, ..Default::default() };
    let r = match exact_with(&l.model, &l.profile, mode, &opts) {
        Ok(r) => r,
        Err(e) => return Err(engine_stop(rep, e)),
    };
    let masses = site_masses(&l.model, &mass_by_site(&r.outcomes));
    rep.result = rational(&r.probability);
    rep.per_service = rational_map(&masses);
    let mut text = format!("{label}: {}\n", rational_text(&r.probability));
    for (s, m) in masses.iter().filter(|(_, m)| !m.is_zero()) {
        text.push_str(&format!("  {s}: {}\n", rational_text(m)));
    }
    for o in r.outcomes.keys() {
        text.push_str(&format!("  outcome: {o}\n"));
    }
    text.push_str(&format!("traces: {}, enumeration steps: {}\n", r.traces, r.branches));
    Ok(emit(&rep, text, 0))
}

#[allow(clippy::too_many_arguments)]
fn approx_cmd(
    inputs: &Inputs,
    samples: u64,
    confidence: f64,
    seed: u64,
    workers: Option<usize>,
    correctness: bool,
    err: &mut dyn Write,
) -> Result<Output, Stop> {
    let l = load(inputs, true)?;
    validated(&l, err)?;
    let mut rep = base("approx", "interval", &l);
    rep.assumptions.push("two-sided Clopper-Pearson interval at the stated confidence".into());
    let mode = if correctness { AnalysisMode::Correctness } else { AnalysisMode::Coverage };
    let opts = ApproxOptions { samples, confidence, seed, workers, mode };
    let r = match approx_coverage_with(&l.model, &l.profile, &opts) {
        Ok(r) => r,
        Err(e) => return Err(engine_stop(rep, e)),
    };
    let mut counts: BTreeMap<String, u64> = l.model.services().map(|(r, _)| (r.to_string(), 0)).collect();
    for (o, c) in &r.outcomes {
        if let Some(s) = o.site() {
            *counts.entry(s.to_string()).or_default() += c;
        }
    }
    rep.result = json!({
        "quantity": match mode { AnalysisMode::Coverage => "coverage_probability", AnalysisMode::Correctness => "correctness_probability" },
        "estimate": r.estimate,
        "lo": r.lo,
        "hi": r.hi,
        "confidence": r.confidence,
        "samples": r.samples,
        "successes": r.successes,
        "seed": r.seed,
    });
    rep.per_service = counts.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let mut text = format!(
        "estimate: {:.6} ({} of {} samples)\n{}% interval: [{:.6}, {:.6}]\nseed: {}\n",
        r.estimate,
        r.successes,
        r.samples,
        r.confidence * 100.0,
        r.lo,
        r.hi,
        r.seed
    );
    for (s, c) in counts.iter().filter(|(_, c)| **c > 0) {
        text.push_str(&format!("  {s}: {c} failing samples\n"));
    }
    Ok(emit(&rep, text, 0))
}

fn service_ref(model: &SystemModel, s: &str) -> Result<ServiceRef, Stop> {
    let r = ServiceRef::parse(s).ok_or_else(|| Stop::Diagnostics(format!("error: `{s}` is not of the form Component.service")))?;
    if model.service(&r).is_none() {
        return Err(Stop::Diagnostics(format!("error: unknown service `{s}`")));
    }
    Ok(r)
}

fn callprob_cmd(inputs: &Inputs, service: &str, budget: u64, err: &mut dyn Write) -> Result<Output, Stop> {
    let l = load(inputs, true)?;
    validated(&l, err)?;
    let r = service_ref(&l.model, service)?;
    let mut rep = base("callprob", "call_probability", &l);
    let opts = ExactOptions { budget, ..Default::default() };
    let p = match call_probability_with(&l.model, &l.profile, &r, &opts) {
        Ok(p) => p,
        Err(e) => return Err(engine_stop(rep, e)),
    };
    rep.result = rational(&p);
    rep.per_service.insert(r.to_string(), rational(&p));
    Ok(emit(&rep, format!("probability that {r} is entered: {}\n", rational_text(&p)), 0))
}

fn cost_cmd(inputs: &Inputs, budget: u64, err: &mut dyn Write) -> Result<Output, Stop> {
    let l = load(inputs, true)?;
    validated(&l, err)?;
    let mut rep = base("cost", "expected_error_cost", &l);
    rep.assumptions.push("an abort in the profile itself costs 1".into());
    let opts = ExactOptions { budget, ..Default::default() };
    let r = exact_with(&l.model, &l.profile, AnalysisMode::Coverage, &opts);
    let total = expected_error_cost_with(&l.model, &l.profile, &opts);
    let (r, total) = match (r, total) {
        (Ok(r), Ok(t)) => (r, t),
        (Err(e), _) | (_, Err(e)) => return Err(engine_stop(rep, e)),
    };
    let mut contrib: BTreeMap<String, BigRational> =
        l.model.services().map(|(r, _)| (r.to_string(), BigRational::zero())).collect();
    for (site, m) in mass_by_site(&r.outcomes) {
        let cost = match &site {
            Site::Profile => BigRational::from_integer(1.into()),
            Site::Service(s) => l.model.service(s).map(|x| x.cost.clone()).unwrap_or_default(),
        };
        *contrib.entry(site.to_string()).or_insert_with(BigRational::zero) += m * cost;
    }
    rep.result = rational(&total);
    rep.per_service = rational_map(&contrib);
    let mut text = format!("expected error cost: {}\n", rational_text(&total));
    for (s, c) in contrib.iter().filter(|(_, c)| !c.is_zero()) {
        text.push_str(&format!("  {s}: {}\n", rational_text(c)));
    }
    Ok(emit(&rep, text, 0))
}

fn check_cmd(inputs: &Inputs, domains: Option<&Signature>) -> Result<Output, Stop> {
    let l = load(inputs, false)?;
    let mut diags: Vec<Diagnostic> = validate_model(&l.model, &l.profile);
    if !diags.iter().any(|d| d.severity == Severity::Error) && l.profile_name.is_some() {
        diags.extend(static_pre_check(&l.model, &l.profile, domains.unwrap_or(&Signature::new())));
    }
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    let mut rep = base("check", "diagnostics", &l);
    rep.assumptions = vec![ASSUME_BEHAVIOR.into()];
    rep.result = serde_json::to_value(&diags).unwrap_or(Value::Null);
    let mut text: String = diags.iter().map(|d| format!("{d}\n")).collect();
    text.push_str(&format!(
        "{} error(s), {} warning(s)\n",
        errors,
        diags.len() - errors
    ));
    Ok(emit(&rep, text, if errors > 0 { 1 } else { 0 }))
}

fn domains_json(vars: &[(String, Domain)]) -> Value {
    Value::Object(vars.iter().map(|(n, d)| (n.clone(), json!([d.lo(), d.hi()]))).collect::<Map<_, _>>())
}

fn regions_cmd(
    model_path: &Path,
    goals: Option<&Path>,
    service: Option<&str>,
    domains: Option<&Signature>,
) -> Result<Output, Stop> {
    let model = parse_model_named(&read(model_path)?, &model_path.display().to_string()).map_err(parse_err)?;
    let l = Loaded {
        model,
        profile: UsageProfile { name: "empty".into(), body: Vec::new() },
        model_name: model_path.display().to_string(),
        profile_name: None,
    };
    let diags = validate_model(&l.model, &l.profile);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        let text: String = diags.iter().map(|d| format!("{d}\n")).collect();
        return Err(Stop::Diagnostics(text.trim_end().to_string()));
    }
    let empty = Signature::new();
    let domains = domains.unwrap_or(&empty);
    let mut rep = base("regions", "regions", &l);
    rep.assumptions = vec![
        ASSUME_RESULT.into(),
        "parameters without a domain range over -8..8, state variables over their initial values".into(),
        "states outside the service precondition are the caller's error and cannot refute a region".into(),
    ];

    let mut targets: Vec<(ServiceRef, Formula, &'static str)> = Vec::new();
    match goals {
        Some(g) => {
            let text = read(g)?;
            let goals = parse_goals_for(&text, &l.model).map_err(parse_err)?;
            let r = match (service, &goals.service) {
                (Some(s), _) => service_ref(&l.model, s)?,
                (None, Some(r)) => service_ref(&l.model, &r.to_string())?,
                (None, None) => {
                    return Err(Stop::Diagnostics("error: the goal file names no service; pass --service".into()))
                }
            };
            let region = region_for_model(&goals, &l.model, &r).map_err(|e| {
                let mut rep = base("regions", "regions", &l);
                rep.faults.push(json!({ "kind": "formula", "message": e.to_string() }));
                Stop::Fault(Box::new(rep), format!("fault: {e}\n"))
            })?;
            targets.push((r, region, "goals"));
        }
        None => match service {
            Some(s) => {
                let r = service_ref(&l.model, s)?;
                let cov = l.model.service(&r).expect("checked").cov.clone();
                targets.push((r, cov, "declared"));
            }
            None => {
                for (r, s) in l.model.services() {
                    targets.push((r, s.cov.clone(), "declared"));
                }
            }
        },
    }

    let mut results = Vec::new();
    let mut text = String::new();
    let mut all_correct = true;
    for (r, region, source) in targets {
        let vars = match crate::engine::region_variables(&l.model, &r, domains) {
            Ok(v) => v,
            Err(e) => return Err(engine_stop(rep, e)),
        };
        let check = match check_region(&l.model, &r, &region, domains) {
            Ok(c) => c,
            Err(e) => return Err(engine_stop(rep, e)),
        };
        all_correct &= check.correct;
        let shown: Vec<String> = vars.iter().map(|(n, d)| format!("{n} in {}..{}", d.lo(), d.hi())).collect();
        text.push_str(&format!("{r}: {region}\n"));
        text.push_str(&format!(
            "  correct on declared domains: {}\n",
            if check.correct { "yes" } else { "no" }
        ));
        if let Some(cx) = &check.counterexample {
            text.push_str(&format!("  counterexample: {cx}\n"));
        }
        text.push_str(&format!("  domains: {}\n", shown.join(", ")));
        rep.per_service.insert(r.to_string(), json!(check.correct));
        results.push(json!({
            "service": r.to_string(),
            "source": source,
            "region": region.to_string(),
            "correct": check.correct,
            "counterexample": check.counterexample.as_ref().map(|s| s.to_string()),
            "checked_states": serde_json::to_value(check.checked).unwrap_or(Value::Null),
            "domains": domains_json(&vars),
        }));
    }
    rep.result = Value::Array(results);
    Ok(emit(&rep, text, if all_correct { 0 } else { 1 }))
}

fn export_cmd(inputs: &Inputs) -> Result<(String, i32), Stop> {
    let l = load(inputs, true)?;
    let diags = validate_model(&l.model, &l.profile);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        let text: String = diags.iter().map(|d| format!("{d}\n")).collect();
        return Err(Stop::Diagnostics(text.trim_end().to_string()));
    }
    match inputs.format.unwrap_or(Format::Qpp) {
        Format::Qpp => Ok((export_prob_program(&l.model, &l.profile), 0)),
        Format::Text => Ok((format!("{}\n{}", print_model(&l.model), print_profile(&l.profile)), 0)),
        Format::Json => Err(Stop::Diagnostics("error: export supports --format qpp or text".into())),
    }
}

fn write_output(out: &mut dyn Write, o: &Output, format: Format) {
    let _ = match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&o.json).unwrap_or_default()),
        _ => write!(out, "{}", o.text),
    };
}

/// Runs one command line. `args` includes the program name.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let (result, format) = match &cli.command {
        Command::Check { inputs, domains } => (check_cmd(inputs, domains.as_ref()), inputs.format.unwrap_or(Format::Text)),
        Command::Exact { inputs, budget } => {
            (exact_cmd(inputs, budget.budget, AnalysisMode::Coverage, err), inputs.format.unwrap_or(Format::Json))
        }
        Command::Correctness { inputs, budget } => {
            (exact_cmd(inputs, budget.budget, AnalysisMode::Correctness, err), inputs.format.unwrap_or(Format::Json))
        }
        Command::Approx { inputs, samples, confidence, seed, workers, correctness } => (
            approx_cmd(inputs, *samples, *confidence, *seed, *workers, *correctness, err),
            inputs.format.unwrap_or(Format::Json),
        ),
        Command::Regions { model, goals, service, domains, format } => (
            regions_cmd(model, goals.as_deref(), service.as_deref(), domains.as_ref()),
            format.unwrap_or(Format::Text),
        ),
        Command::Callprob { inputs, service, budget } => {
            (callprob_cmd(inputs, service, budget.budget, err), inputs.format.unwrap_or(Format::Json))
        }
        Command::Cost { inputs, budget } => (cost_cmd(inputs, budget.budget, err), inputs.format.unwrap_or(Format::Json)),
        Command::Export { inputs } => {
            return match export_cmd(inputs) {
                Ok((text, code)) => {
                    let _ = write!(out, "{text}");
                    code
                }
                Err(stop) => finish_stop(stop, Format::Text, out, err),
            };
        }
    };
    let format = if format == Format::Qpp { Format::Text } else { format };
    match result {
        Ok(o) => {
            write_output(out, &o, format);
            o.code
        }
        Err(stop) => finish_stop(stop, format, out, err),
    }
}

fn finish_stop(stop: Stop, format: Format, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match stop {
        Stop::Diagnostics(msg) => {
            let _ = writeln!(err, "{msg}");
            1
        }
        Stop::Fault(rep, text) => {
            let _ = write!(err, "{text}");
            if format == Format::Json {
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&rep.to_json()).unwrap_or_default());
            }
            2
        }
    }
}
