//! Monte Carlo suite execution.

use std::path::Path;
use std::time::Instant;

use canesim_core::executor::run_trial;
use canesim_core::scenario::generate;
use rayon::prelude::*;

use crate::config::{ResolvedSuite, RunConfig};
use crate::error::{HarnessError, Result};
use crate::report::{ReportBody, ReportHeader, RunReport, SuiteReport, TrialRecord};
use crate::seeds::scenario_and_run_seeds;

pub fn run_one(suite: &ResolvedSuite, master_seed: u64, index: u32) -> Result<TrialRecord> {
    let template = suite.templates[index as usize % suite.templates.len()];
    let (scenario_seed, run_seed) = scenario_and_run_seeds(master_seed, &suite.name, u64::from(index));
    let scenario = generate(template, scenario_seed)?;
    let result = run_trial(&scenario, &suite.executor, &suite.sensor, &suite.matrix, run_seed)?;
    Ok(TrialRecord {
        suite: suite.name.clone(),
        index,
        template: template.to_string(),
        scenario_seed,
        run_seed,
        result,
    })
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Invalid(format!("thread pool: {e}")))
}

/// Runs every trial of `suite`. Results come back in trial order whatever
/// the thread count, so the aggregate is identical across parallelism.
pub fn run_suite(
    suite: &ResolvedSuite,
    master_seed: u64,
    parallelism: usize,
) -> Result<(SuiteReport, Vec<TrialRecord>)> {
    let records = pool(parallelism)?.install(|| {
        (0..suite.trials)
            .into_par_iter()
            .map(|i| run_one(suite, master_seed, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let templates = suite.templates.iter().map(ToString::to_string).collect();
    let report = SuiteReport::aggregate(&suite.name, templates, &records, suite.reference.clone());
    Ok((report, records))
}

pub struct RunOutcome {
    pub report: RunReport,
    pub suites: Vec<ResolvedSuite>,
    pub trials: Vec<TrialRecord>,
}

pub fn run_config(cfg: &RunConfig, base: &Path) -> Result<RunOutcome> {
    let started = Instant::now();
    let suites = cfg.resolve(base)?;
    let mut reports = Vec::with_capacity(suites.len());
    let mut trials = Vec::new();
    for s in &suites {
        let (r, recs) = run_suite(s, cfg.master_seed, cfg.parallelism)?;
        reports.push(r);
        trials.extend(recs);
    }
    let report = RunReport {
        header: ReportHeader {
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            version: env!("CARGO_PKG_VERSION").to_string(),
            parallelism: cfg.parallelism,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        body: ReportBody::new(cfg.master_seed, reports),
    };
    Ok(RunOutcome { report, suites, trials })
}
