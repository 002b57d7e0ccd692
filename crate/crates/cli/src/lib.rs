//! Command implementations behind the `ssmax` binary. Each command returns
//! its standard output and exit code so it can be driven from tests.

pub mod batch;
pub mod report;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value as Json};
use thiserror::Error;

use ssmax_core::analysis::{c_correct_set, compute_mu_bruteforce, Analysis, AnalysisError};
use ssmax_core::dot;
use ssmax_core::metric::{
    check_bounded, check_monotonic, check_order_laws, check_utility, fixed_points, metric_from_json, CheckReport,
    MetricError, SharedMetric,
};
use ssmax_core::runtime::{Engine, RunOutcome, RuntimeError, Scenario};
use ssmax_core::scenario_file::{ScenarioError, ScenarioFile};
use ssmax_core::scenarios::{build_case, build_case_fixed_point, build_case_non_fixed_point, CaseId, ScenarioBuildError};
use ssmax_core::topology::{ProcessId, EXHAUSTIVE_LIMIT};

use report::{RunReport, EXIT_INVARIANT, EXIT_OK, EXIT_VALIDATION};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Scenario { path: PathBuf, source: ScenarioError },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Case(#[from] ScenarioBuildError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(RuntimeError::Invariant(_)) => EXIT_INVARIANT,
            _ => EXIT_VALIDATION,
        }
    }
}

/// Text for stdout plus the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

#[derive(Parser, Debug)]
#[command(name = "ssmax", version, about = "Simulate and analyze maximum-metric spanning trees under Byzantine faults")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one scenario file.
    Run {
        scenario: PathBuf,
        /// Write the execution trace (one JSON object per line).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the final configuration as a Graphviz graph.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Containment area, μ tables and ladder, without simulating.
    Analyze {
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run one of the impossibility constructions.
    Counterexample {
        /// single-valued, fixed-point or non-fixed-point
        case: String,
        /// Metric for the fixed-point and non-fixed-point cases (name or JSON table).
        #[arg(long)]
        metric: Option<String>,
        /// Weight `w` (JSON) for the non-fixed-point case.
        #[arg(long)]
        w: Option<String>,
        /// Weight `w′` (JSON) for the non-fixed-point case.
        #[arg(long)]
        w_prime: Option<String>,
        /// Write the case as a scenario file.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Boundedness, monotonicity, utility and fixed points of a metric.
    CheckMetric {
        /// `sp`, `flow:<mr>`, `reliability`, inline JSON, or a JSON file.
        metric: String,
        /// Samples drawn when the domain is not enumerable.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every scenario file in a directory several times.
    Batch {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[arg(long)]
        json: bool,
    },
}

pub fn execute(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Run { scenario, trace, dot, seed, max_steps, json } => {
            cmd_run(&scenario, RunFlags { trace, dot, seed, max_steps, json })
        }
        Command::Analyze { scenario, json } => cmd_analyze(&scenario, json),
        Command::Counterexample { case, metric, w, w_prime, emit } => {
            cmd_counterexample(&case, metric.as_deref(), w.as_deref(), w_prime.as_deref(), emit.as_deref())
        }
        Command::CheckMetric { metric, budget, seed } => cmd_check_metric(&metric, budget, seed),
        Command::Batch { dir, repetitions, seed_base, json } => batch::cmd_batch(&dir, repetitions, seed_base, json),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.into(), source })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = read(path)?;
    let wrap = |source| CliError::Scenario { path: path.into(), source };
    let file = ScenarioFile::parse(&text).map_err(wrap)?;
    let scenario = file.to_scenario().map_err(wrap)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Runs a validated scenario with its own or the default step budget.
pub fn simulate(scenario: &Scenario) -> Result<(RunOutcome, RunReport), CliError> {
    let mut engine = Engine::new(scenario)?;
    let outcome = match scenario.max_steps {
        Some(m) => engine.run(m)?,
        None => engine.run_default()?,
    };
    let report = RunReport::build(scenario, engine.analysis(), &outcome);
    Ok((outcome, report))
}

#[derive(Debug, Default, Clone)]
pub struct RunFlags {
    pub trace: Option<PathBuf>,
    pub dot: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_steps: Option<usize>,
    pub json: bool,
}

pub fn cmd_run(path: &Path, flags: RunFlags) -> Result<Output, CliError> {
    let mut scenario = load_scenario(path)?;
    if let Some(seed) = flags.seed {
        scenario.seed = seed;
    }
    if flags.max_steps.is_some() {
        scenario.max_steps = flags.max_steps;
        scenario.validate()?;
    }
    let (outcome, report) = simulate(&scenario)?;
    if let Some(p) = &flags.trace {
        let mut buf = Vec::new();
        outcome.trace.write_jsonl(&*scenario.metric, &mut buf).expect("in-memory write");
        write(p, &buf)?;
    }
    if let Some(p) = &flags.dot {
        let analysis = Analysis::new(&scenario.topology, &*scenario.metric, &scenario.byzantine)?;
        write(p, dot::render(&scenario.topology, &outcome.trace.final_config, analysis.area()).as_bytes())?;
    }
    let stdout = if flags.json { report.to_json() } else { report.to_text() };
    Ok(Output { stdout, code: report.exit_code() })
}

fn names(scenario: &Scenario, set: impl IntoIterator<Item = ProcessId>) -> Vec<String> {
    set.into_iter().map(|v| scenario.topology.name(v)).collect()
}

pub fn cmd_analyze(path: &Path, as_json: bool) -> Result<Output, CliError> {
    let scenario = load_scenario(path)?;
    let t = &scenario.topology;
    let ms = &*scenario.metric;
    let analysis = Analysis::new(t, ms, &scenario.byzantine)?;
    let mu = analysis.mu();
    let roots = mu.roots().to_vec();

    // The oracle is exponential; only consulted on small graphs.
    let oracle_agrees = if t.len() <= EXHAUSTIVE_LIMIT {
        let mut ok = true;
        for &x in &roots {
            ok &= compute_mu_bruteforce(t, ms, x)? == mu.column(x).expect("root column");
        }
        Some(ok)
    } else {
        None
    };

    let area: BTreeSet<ProcessId> = analysis.area().members.clone();
    let radius = area
        .iter()
        .filter_map(|&v| scenario.byzantine.iter().filter_map(|&b| t.distance(b, v).ok()).min())
        .max()
        .unwrap_or(0);
    let c_correct = c_correct_set(t, &scenario.byzantine, radius);
    let outside: Vec<ProcessId> = analysis.area().outside(t);

    let ladder = analysis.ladder();
    let mu_rows: Vec<Json> = t
        .processes()
        .map(|v| {
            let cols: serde_json::Map<String, Json> =
                roots.iter().map(|&x| (t.name(x), json!(mu.get(v, x).expect("cell").to_string()))).collect();
            json!({ "node": t.name(v), "mu": cols })
        })
        .collect();
    let rungs: Vec<Json> = (0..ladder.len())
        .map(|i| {
            json!({
                "value": ladder.values[i].to_string(),
                "P": names(&scenario, ladder.p_sets[i].iter().copied()),
                "V": names(&scenario, ladder.v_sets[i].iter().copied()),
                "I": names(&scenario, ladder.i_sets[i].iter().copied()),
            })
        })
        .collect();
    let doc = json!({
        "metric": ms.name(),
        "root": t.name(t.root()),
        "byzantine": names(&scenario, scenario.byzantine.iter().copied()),
        "containment_area": names(&scenario, area.iter().copied()),
        "outside_area": names(&scenario, outside.iter().copied()),
        "mu": mu_rows,
        "mu_oracle_agrees": oracle_agrees,
        "ladder": rungs,
        "c_radius": radius,
        "c_correct": names(&scenario, c_correct.iter().copied()),
    });
    if as_json {
        let stdout = serde_json::to_string_pretty(&doc).expect("json") + "\n";
        return Ok(Output { stdout, code: EXIT_OK });
    }

    let set = |xs: Vec<String>| format!("{{{}}}", xs.join(", "));
    let mut out = String::new();
    writeln!(out, "metric: {}", ms.name()).unwrap();
    writeln!(out, "byzantine: {}", set(names(&scenario, scenario.byzantine.iter().copied()))).unwrap();
    writeln!(out, "S_B: {}", set(names(&scenario, area.iter().copied()))).unwrap();
    writeln!(out, "mu:").unwrap();
    let header: Vec<String> = roots.iter().map(|&x| format!("{:>10}", format!("mu(.,{})", t.name(x)))).collect();
    writeln!(out, "  {:<6}{}", "node", header.join("")).unwrap();
    for v in t.processes() {
        let cells: Vec<String> = roots.iter().map(|&x| format!("{:>10}", mu.get(v, x).expect("cell").to_string())).collect();
        writeln!(out, "  {:<6}{}", t.name(v), cells.join("")).unwrap();
    }
    match oracle_agrees {
        Some(true) => writeln!(out, "mu matches the brute-force oracle").unwrap(),
        Some(false) => writeln!(out, "mu DISAGREES with the brute-force oracle").unwrap(),
        None => writeln!(out, "mu oracle skipped (n > {EXHAUSTIVE_LIMIT})").unwrap(),
    }
    writeln!(out, "ladder:").unwrap();
    for i in 0..ladder.len() {
        writeln!(
            out,
            "  m{i} = {}: P={} V={} I={}",
            ladder.values[i],
            set(names(&scenario, ladder.p_sets[i].iter().copied())),
            set(names(&scenario, ladder.v_sets[i].iter().copied())),
            set(names(&scenario, ladder.i_sets[i].iter().copied())),
        )
        .unwrap();
    }
    writeln!(
        out,
        "hop radius covering S_B: {radius}; {radius}-correct: {} ({} processes) vs outside S_B: {} ({} processes)",
        set(names(&scenario, c_correct.iter().copied())),
        c_correct.len(),
        set(names(&scenario, outside.iter().copied())),
        outside.len()
    )
    .unwrap();
    let code = if oracle_agrees == Some(false) { EXIT_INVARIANT } else { EXIT_OK };
    Ok(Output { stdout: out, code })
}

/// A metric given by name, inline JSON, or a path to a JSON file.
pub fn parse_metric_arg(arg: &str) -> Result<SharedMetric, CliError> {
    let path = Path::new(arg);
    let raw: Json = if path.is_file() {
        serde_json::from_str(&read(path)?).map_err(|e| CliError::Usage(format!("{arg}: {e}")))?
    } else if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| CliError::Usage(format!("metric JSON: {e}")))?
    } else {
        Json::String(arg.to_string())
    };
    Ok(metric_from_json(&raw)?)
}

pub fn cmd_counterexample(
    case: &str,
    metric: Option<&str>,
    w: Option<&str>,
    w_prime: Option<&str>,
    emit: Option<&Path>,
) -> Result<Output, CliError> {
    let id: CaseId = case.parse()?;
    let case = match (id, metric) {
        (_, None) if w.is_none() && w_prime.is_none() => build_case(id)?,
        (CaseId::SingleValued, _) => {
            return Err(CliError::Usage("the single-valued case takes no metric or weights".into()))
        }
        (CaseId::FixedPoint, Some(m)) => build_case_fixed_point(parse_metric_arg(m)?)?,
        (CaseId::NonFixedPoint, Some(m)) => {
            let ms = parse_metric_arg(m)?;
            let weight = |raw: Option<&str>, flag: &str| -> Result<_, CliError> {
                let raw = raw.ok_or_else(|| CliError::Usage(format!("--{flag} is required with --metric")))?;
                let j: Json = serde_json::from_str(raw).unwrap_or_else(|_| Json::String(raw.into()));
                Ok(ms.parse_weight(&j)?)
            };
            let (a, b) = (weight(w, "w")?, weight(w_prime, "w-prime")?);
            build_case_non_fixed_point(ms, a, b)?
        }
        _ => return Err(CliError::Usage("weights need --metric".into())),
    };
    if let Some(p) = emit {
        write(p, case.to_scenario_file().to_json_string().as_bytes())?;
    }
    let outcome = case.run()?;
    let s = &case.scenario;
    let set = |xs: Vec<String>| format!("{{{}}}", xs.join(", "));
    let covered = case.expected_disturbed.is_subset(&outcome.disturbed);
    let inside = case.expected_disturbed.is_subset(&outcome.area.members);
    let mut out = String::new();
    writeln!(out, "case: {} (metric {})", case.id, s.metric.name()).unwrap();
    writeln!(out, "S_B: {}", set(names(s, outcome.area.members.iter().copied()))).unwrap();
    writeln!(out, "expected disturbed: {}", set(names(s, case.expected_disturbed.iter().copied()))).unwrap();
    writeln!(out, "disturbed: {}", set(names(s, outcome.disturbed.iter().copied()))).unwrap();
    writeln!(out, "steps: {}", outcome.trace.steps.len()).unwrap();
    writeln!(out, "target configuration reached: {}", outcome.reached_target).unwrap();
    writeln!(out, "final states:").unwrap();
    for v in s.topology.processes() {
        let st = &outcome.trace.final_config[v];
        let prnt = st.prnt.map_or("⊥".to_string(), |p| s.topology.name(p));
        writeln!(out, "  {:<3} prnt={prnt} level={} dist={}", s.topology.name(v), st.level, st.dist).unwrap();
    }
    let ok = covered && inside;
    writeln!(out, "{}", if ok { "expected disturbance observed" } else { "expected disturbance NOT observed" }).unwrap();
    Ok(Output { stdout: out, code: if ok { EXIT_OK } else { EXIT_INVARIANT } })
}

fn verdict_line(out: &mut String, label: &str, r: Result<CheckReport, MetricError>) -> bool {
    match r {
        Ok(rep) => {
            writeln!(out, "{label}: {rep}").unwrap();
            rep.passed()
        }
        Err(e) => {
            writeln!(out, "{label}: n/a ({e})").unwrap();
            true
        }
    }
}

/// Exit 0 when the metric is bounded and monotonic, 1 otherwise.
pub fn cmd_check_metric(arg: &str, budget: usize, seed: u64) -> Result<Output, CliError> {
    let ms = parse_metric_arg(arg)?;
    let mut out = String::new();
    writeln!(out, "metric: {}", ms.name()).unwrap();
    let order = verdict_line(&mut out, "order", check_order_laws(&*ms, budget, seed));
    let bounded = verdict_line(&mut out, "bounded", check_bounded(&*ms, budget, seed));
    let monotonic = verdict_line(&mut out, "monotonic", check_monotonic(&*ms, budget, seed));
    verdict_line(&mut out, "utility", check_utility(&*ms, None, budget, seed));
    match fixed_points(&*ms) {
        Ok(fp) => {
            let fp: Vec<String> = fp.iter().map(|m| m.to_string()).collect();
            writeln!(out, "fixed points: {{{}}}", fp.join(", ")).unwrap();
        }
        Err(e) => writeln!(out, "fixed points: n/a ({e})").unwrap(),
    }
    let maximizable = order && bounded && monotonic;
    writeln!(out, "maximizable: {}", if maximizable { "yes" } else { "no" }).unwrap();
    Ok(Output { stdout: out, code: if maximizable { EXIT_OK } else { 1 } })
}
