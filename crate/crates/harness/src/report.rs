//! Suite aggregation and report emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use canesim_core::executor::{FailureReason, TrialResult};
use serde::{Deserialize, Serialize};

use crate::config::{Gate, ReferenceResult};
use crate::error::{HarnessError, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval; `[0, 1]` when there are no trials.
pub fn wilson_interval(successes: u32, trials: u32, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lower: 0.0, upper: 1.0 };
    }
    let n = f64::from(trials);
    let p = f64::from(successes) / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
    }
}

/// One finished trial with the seeds that reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub suite: String,
    pub index: u32,
    pub template: String,
    pub scenario_seed: u64,
    pub run_seed: u64,
    pub result: TrialResult,
}

impl TrialRecord {
    pub fn explained(&self) -> bool {
        self.result.success() || self.result.misclassified() || self.result.oracle_verified_unreachable()
    }
}

/// Failed trials by criterion. A trial can count under several.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureBreakdown {
    pub collision: u32,
    pub etiquette: u32,
    pub not_reached: u32,
    pub timeout: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub templates: Vec<String>,
    pub trials: u32,
    pub successes: u32,
    pub success_rate: f64,
    pub ci95: Interval,
    pub mean_steps: f64,
    pub mean_replans: f64,
    pub mean_simulated_time_s: f64,
    pub failures: FailureBreakdown,
    pub misclassified_failures: u32,
    pub unreachable_failures: u32,
    pub unexplained_failures: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceResult>,
}

impl SuiteReport {
    /// Folds records in the order given, which callers keep as trial order.
    pub fn aggregate(
        name: &str,
        templates: Vec<String>,
        records: &[TrialRecord],
        reference: Option<ReferenceResult>,
    ) -> Self {
        let trials = records.len() as u32;
        let mut successes = 0;
        let (mut steps, mut replans, mut time) = (0.0, 0.0, 0.0);
        let mut failures = FailureBreakdown::default();
        let (mut mis, mut unreach, mut unexplained) = (0, 0, 0);
        for rec in records {
            let r = &rec.result;
            steps += f64::from(r.steps_taken);
            replans += f64::from(r.replans);
            time += r.simulated_time_s;
            if r.success() {
                successes += 1;
                continue;
            }
            if r.collisions > 0 {
                failures.collision += 1;
            }
            if r.etiquette_violations > 0 {
                failures.etiquette += 1;
            }
            if r.failure == Some(FailureReason::Timeout) {
                failures.timeout += 1;
            } else if !r.reached {
                failures.not_reached += 1;
            }
            if r.misclassified() {
                mis += 1;
            } else if r.oracle_verified_unreachable() {
                unreach += 1;
            } else {
                unexplained += 1;
            }
        }
        let mean = |x: f64| if trials == 0 { 0.0 } else { x / f64::from(trials) };
        Self {
            name: name.to_string(),
            templates,
            trials,
            successes,
            success_rate: mean(f64::from(successes)),
            ci95: wilson_interval(successes, trials, Z95),
            mean_steps: mean(steps),
            mean_replans: mean(replans),
            mean_simulated_time_s: mean(time),
            failures,
            misclassified_failures: mis,
            unreachable_failures: unreach,
            unexplained_failures: unexplained,
            reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub trials: u32,
    pub successes: u32,
    pub success_rate: f64,
    pub ci95: Interval,
}

/// Everything determined by the config and master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub master_seed: u64,
    pub suites: Vec<SuiteReport>,
    pub overall: Overall,
}

impl ReportBody {
    pub fn new(master_seed: u64, suites: Vec<SuiteReport>) -> Self {
        let trials = suites.iter().map(|s| s.trials).sum();
        let successes = suites.iter().map(|s| s.successes).sum();
        Self {
            master_seed,
            overall: Overall {
                trials,
                successes,
                success_rate: if trials == 0 {
                    0.0
                } else {
                    f64::from(successes) / f64::from(trials)
                },
                ci95: wilson_interval(successes, trials, Z95),
            },
            suites,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report body serializes")
    }
}

/// Run metadata that legitimately changes between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub generated_at: String,
    pub version: String,
    pub parallelism: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub header: ReportHeader,
    pub body: ReportBody,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn summary_table(body: &ReportBody) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>6} {:>6} {:>7} {:>15} {:>7} {:>7} {:>8} {:>5} {:>5} {:>5} {:>5} {:>6}",
        "suite",
        "trials",
        "succ",
        "rate",
        "95% CI",
        "steps",
        "replan",
        "time_s",
        "coll",
        "etiq",
        "unrch",
        "tmout",
        "unexpl"
    );
    for s in &body.suites {
        let _ = writeln!(
            out,
            "{:<24} {:>6} {:>6} {:>7.3} {:>15} {:>7.2} {:>7.2} {:>8.2} {:>5} {:>5} {:>5} {:>5} {:>6}",
            s.name,
            s.trials,
            s.successes,
            s.success_rate,
            format!("[{:.3}, {:.3}]", s.ci95.lower, s.ci95.upper),
            s.mean_steps,
            s.mean_replans,
            s.mean_simulated_time_s,
            s.failures.collision,
            s.failures.etiquette,
            s.failures.not_reached,
            s.failures.timeout,
            s.unexplained_failures,
        );
    }
    let o = &body.overall;
    let _ = writeln!(
        out,
        "{:<24} {:>6} {:>6} {:>7.3} {:>15}",
        "pooled",
        o.trials,
        o.successes,
        o.success_rate,
        format!("[{:.3}, {:.3}]", o.ci95.lower, o.ci95.upper)
    );
    let refs: Vec<_> = body
        .suites
        .iter()
        .filter_map(|s| s.reference.as_ref().map(|r| (s, r)))
        .collect();
    if !refs.is_empty() {
        let _ = writeln!(out, "\nreported reference results (annotation only, not checked):");
        for (s, r) in refs {
            let _ = writeln!(
                out,
                "  {:<20} {}/{} ({:.0}%)  {}",
                s.name,
                r.successes,
                r.trials,
                100.0 * f64::from(r.successes) / f64::from(r.trials.max(1)),
                r.label
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateCheck {
    pub suite: String,
    pub passed: bool,
    pub detail: String,
}

pub fn check_gate(suite: &SuiteReport, gate: &Gate) -> GateCheck {
    let mut problems = Vec::new();
    if let Some(min) = gate.min_success_rate {
        if suite.success_rate < min {
            problems.push(format!("rate {:.3} < {min}", suite.success_rate));
        }
    }
    if let Some(max) = gate.max_success_rate {
        if suite.success_rate > max {
            problems.push(format!("rate {:.3} > {max}", suite.success_rate));
        }
    }
    if gate.explained_failures && suite.unexplained_failures > 0 {
        problems.push(format!("{} unexplained failures", suite.unexplained_failures));
    }
    GateCheck {
        suite: suite.name.clone(),
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("rate {:.3}", suite.success_rate)
        } else {
            problems.join("; ")
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitOptions {
    pub csv: bool,
    pub event_logs: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        Self {
            csv: true,
            event_logs: true,
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    suite: &'a str,
    index: u32,
    template: &'a str,
    scenario_seed: u64,
    run_seed: u64,
    success: bool,
    reached: bool,
    failure: &'a str,
    collisions: u32,
    etiquette_violations: u32,
    steps: u32,
    replans: u32,
    simulated_time_s: f64,
    misclassified: bool,
    verified_unreachable: bool,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// Writes `report.json`, `summary.txt` and, per `opts`, `trials.csv` and
/// one NDJSON event log per trial under `logs/<suite>/`.
pub fn emit_report(report: &RunReport, trials: &[TrialRecord], dir: &Path, opts: EmitOptions) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();

    let json = dir.join("report.json");
    write_file(&json, &report.to_json())?;
    written.push(json);

    let txt = dir.join("summary.txt");
    write_file(&txt, &summary_table(&report.body))?;
    written.push(txt);

    if opts.csv {
        let path = dir.join("trials.csv");
        let mut w = csv::Writer::from_path(&path)?;
        for t in trials {
            let r = &t.result;
            let failure = match r.failure {
                Some(FailureReason::NoTarget) => "no_target",
                Some(FailureReason::NoPath) => "no_path",
                Some(FailureReason::Timeout) => "timeout",
                None => "",
            };
            w.serialize(CsvRow {
                suite: &t.suite,
                index: t.index,
                template: &t.template,
                scenario_seed: t.scenario_seed,
                run_seed: t.run_seed,
                success: r.success(),
                reached: r.reached,
                failure,
                collisions: r.collisions,
                etiquette_violations: r.etiquette_violations,
                steps: r.steps_taken,
                replans: r.replans,
                simulated_time_s: r.simulated_time_s,
                misclassified: r.misclassified(),
                verified_unreachable: r.oracle_verified_unreachable(),
            })?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }

    if opts.event_logs {
        for t in trials {
            let sub = dir.join("logs").join(&t.suite);
            std::fs::create_dir_all(&sub).map_err(|e| HarnessError::io(&sub, e))?;
            let path = sub.join(format!("{:05}.ndjson", t.index));
            write_file(&path, &t.result.to_ndjson())?;
            written.push(path);
        }
    }
    Ok(written)
}
