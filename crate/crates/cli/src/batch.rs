//! Many runs over a directory of scenario files, spread over worker threads.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::report::{EXIT_BUDGET, EXIT_INVARIANT, EXIT_OK, EXIT_VALIDATION};
use crate::{load_scenario, simulate, CliError, Output};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub min: usize,
    pub median: usize,
    pub max: usize,
}

impl StepStats {
    fn of(mut xs: Vec<usize>) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        xs.sort_unstable();
        Some(StepStats { min: xs[0], median: xs[(xs.len() - 1) / 2], max: xs[xs.len() - 1] })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSummary {
    pub file: String,
    pub runs: usize,
    pub contained: usize,
    pub errors: Vec<String>,
    pub closure_violations: usize,
    /// Steps until containment, over contained runs.
    pub contained_at: Option<StepStats>,
    /// Steps simulated, over all completed runs.
    pub steps: Option<StepStats>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchReport {
    pub seed_base: u64,
    pub repetitions: usize,
    pub runs: usize,
    pub contained: usize,
    pub errors: usize,
    pub closure_violations: usize,
    pub files: Vec<FileSummary>,
}

impl BatchReport {
    pub fn exit_code(&self) -> i32 {
        if self.closure_violations > 0 {
            EXIT_INVARIANT
        } else if self.errors > 0 {
            EXIT_VALIDATION
        } else if self.contained < self.runs {
            EXIT_BUDGET
        } else {
            EXIT_OK
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let stats = |s: &Option<StepStats>| s.as_ref().map_or("-".into(), |s| format!("{}/{}/{}", s.min, s.median, s.max));
        writeln!(out, "seed base: {}, repetitions: {}", self.seed_base, self.repetitions).unwrap();
        for f in &self.files {
            writeln!(
                out,
                "{}: contained {}/{}, errors {}, closure violations {}, contained at (min/median/max) {}, steps {}",
                f.file,
                f.contained,
                f.runs,
                f.errors.len(),
                f.closure_violations,
                stats(&f.contained_at),
                stats(&f.steps)
            )
            .unwrap();
            for e in &f.errors {
                writeln!(out, "  error: {e}").unwrap();
            }
        }
        writeln!(
            out,
            "total: contained {}/{}, errors {}, closure violations {}",
            self.contained, self.runs, self.errors, self.closure_violations
        )
        .unwrap();
        out
    }
}

struct RunResult {
    contained_at: Option<usize>,
    steps: usize,
    closure_violations: usize,
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn one_run(path: &Path, seed: u64) -> Result<RunResult, CliError> {
    let mut scenario = load_scenario(path)?;
    scenario.seed = seed;
    let (outcome, report) = simulate(&scenario)?;
    Ok(RunResult {
        contained_at: outcome.verdict.first_contained_step,
        steps: outcome.trace.steps.len(),
        closure_violations: report.closure_violations.len(),
    })
}

/// Repetition `i` of every file uses seed `seed_base + i`. Results land in
/// fixed slots, so the report does not depend on thread scheduling.
pub fn run_batch(dir: &Path, repetitions: usize, seed_base: u64) -> Result<BatchReport, CliError> {
    if repetitions == 0 {
        return Err(CliError::Usage("repetitions must be at least 1".into()));
    }
    let files = scenario_files(dir)?;
    let jobs: Vec<(usize, u64)> =
        (0..files.len()).flat_map(|f| (0..repetitions).map(move |r| (f, seed_base.wrapping_add(r as u64)))).collect();
    let slots: Vec<Mutex<Option<Result<RunResult, String>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(f, seed)) = jobs.get(i) else { break };
                let result = one_run(&files[f], seed).map_err(|e| format!("seed {seed}: {e}"));
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut report = BatchReport {
        seed_base,
        repetitions,
        runs: 0,
        contained: 0,
        errors: 0,
        closure_violations: 0,
        files: Vec::new(),
    };
    let mut results = slots.into_iter().map(|m| m.into_inner().unwrap().expect("every job ran"));
    for path in &files {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let mut summary = FileSummary {
            file: name,
            runs: repetitions,
            contained: 0,
            errors: Vec::new(),
            closure_violations: 0,
            contained_at: None,
            steps: None,
        };
        let (mut at, mut steps) = (Vec::new(), Vec::new());
        for r in results.by_ref().take(repetitions) {
            match r {
                Ok(run) => {
                    summary.closure_violations += run.closure_violations;
                    steps.push(run.steps);
                    if let Some(c) = run.contained_at {
                        summary.contained += 1;
                        at.push(c);
                    }
                }
                Err(e) => summary.errors.push(e),
            }
        }
        summary.contained_at = StepStats::of(at);
        summary.steps = StepStats::of(steps);
        report.runs += summary.runs;
        report.contained += summary.contained;
        report.errors += summary.errors.len();
        report.closure_violations += summary.closure_violations;
        report.files.push(summary);
    }
    Ok(report)
}

pub fn cmd_batch(dir: &Path, repetitions: usize, seed_base: u64, as_json: bool) -> Result<Output, CliError> {
    let report = run_batch(dir, repetitions, seed_base)?;
    let stdout = if as_json { serde_json::to_string_pretty(&report).expect("json") + "\n" } else { report.to_text() };
    Ok(Output { stdout, code: report.exit_code() })
}
