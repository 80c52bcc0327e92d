use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use canesim_core::executor::{run_trial, ExecutorConfig};
use canesim_core::scenario::{generate, Scenario, SuiteTemplate};
use canesim_harness::config::{MatrixSpec, SensorSpec};
use canesim_harness::report::{check_gate, summary_table, EmitOptions};
use canesim_harness::{emit_report, run_config, RunConfig};
use canesim_interaction::backends::BackendSet;
use canesim_interaction::report::Detection;
use canesim_interaction::{OrchestratorConfig, Session};
use chrono::NaiveDateTime;
use clap::{Parser, Subcommand};

const DEFAULT_RUN: &str = include_str!("../../../configs/default_run.toml");

#[derive(Parser)]
#[command(name = "canesim", version, about = "Smart-cane navigation and interaction simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run evaluation suites and write reports.
    Run {
        /// Run config (TOML). The bundled default run is used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override every suite's trial count.
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long, short = 'j')]
        parallelism: Option<usize>,
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
        /// Skip per-trial event logs.
        #[arg(long)]
        no_logs: bool,
        /// Exit nonzero if any suite gate fails.
        #[arg(long)]
        gate: bool,
    },
    /// Generate scenario files.
    Gen {
        #[arg(long, short = 't')]
        template: SuiteTemplate,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, short = 'o', default_value = "scenarios")]
        out: PathBuf,
    },
    /// Run one scenario and print its event log as NDJSON.
    Replay {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sensor preset: default, noiseless, full-view, noiseless-full-view.
        #[arg(long, default_value = "default")]
        sensor: String,
        /// identity, uniform, calibrated, or a matrix file.
        #[arg(long, default_value = "calibrated")]
        matrix: String,
        /// Executor config (TOML).
        #[arg(long)]
        executor: Option<PathBuf>,
        #[arg(long)]
        p_err: Option<f64>,
        /// Write the log here instead of stdout.
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
    /// Feed a scripted transcript through the interaction pipeline with mock backends.
    Interact {
        /// One utterance per line; `-` reads stdin. Lines starting with `#` are skipped.
        script: PathBuf,
        /// Clock reading, e.g. 2024-03-20T09:30:00.
        #[arg(long)]
        now: Option<NaiveDateTime>,
        /// Simulated detections as label=metres pairs, e.g. chair=1.6,table=0.8.
        #[arg(long, default_value = "chair=1.6,table=0.8")]
        detections: String,
        /// Do not require the wake phrase first.
        #[arg(long)]
        awake: bool,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            trials,
            parallelism,
            out,
            no_logs,
            gate,
        } => {
            let (mut cfg, base) = match &config {
                Some(p) => (
                    RunConfig::load(p)?,
                    p.parent().map(Path::to_path_buf).unwrap_or_default(),
                ),
                None => (
                    RunConfig::parse(DEFAULT_RUN, Path::new("<default run>"))?,
                    PathBuf::from("."),
                ),
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(n) = trials {
                cfg.suites.iter_mut().for_each(|s| s.trials = n);
            }
            if let Some(j) = parallelism {
                cfg.parallelism = j;
            }
            cfg.validate()?;
            let outcome = run_config(&cfg, &base)?;
            print!("{}", summary_table(&outcome.report.body));
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("canesim-out"));
            let opts = EmitOptions {
                csv: true,
                event_logs: !no_logs,
            };
            emit_report(&outcome.report, &outcome.trials, &dir, opts)?;
            println!("reports written to {}", dir.display());

            let mut failed = false;
            for (suite, report) in outcome.suites.iter().zip(&outcome.report.body.suites) {
                if let Some(g) = &suite.gate {
                    let c = check_gate(report, g);
                    println!(
                        "gate {:<24} {} ({})",
                        c.suite,
                        if c.passed { "PASS" } else { "FAIL" },
                        c.detail
                    );
                    failed |= !c.passed;
                }
            }
            Ok(if gate && failed {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Gen {
            template,
            seed,
            count,
            out,
        } => {
            std::fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            for s in seed..seed + count {
                let scenario = generate(template, s)?;
                let path = out.join(format!("{template}-{s}.json"));
                scenario.save(&path)?;
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay {
            scenario,
            seed,
            sensor,
            matrix,
            executor,
            p_err,
            out,
        } => {
            let sc = Scenario::load(&scenario)?;
            let sensor = SensorSpec::Preset(sensor).resolve()?;
            let matrix = MatrixSpec(matrix).resolve(Path::new("."))?;
            let mut exec = match executor {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p).with_context(|| p.display().to_string())?)
                    .with_context(|| p.display().to_string())?,
                None => ExecutorConfig::default(),
            };
            if let Some(p) = p_err {
                exec.p_err = p;
            }
            let r = run_trial(&sc, &exec, &sensor, &matrix, seed)?;
            match out {
                Some(p) => std::fs::write(&p, r.to_ndjson()).with_context(|| p.display().to_string())?,
                None => print!("{}", r.to_ndjson()),
            }
            eprintln!(
                "success={} reached={} failure={:?} collisions={} etiquette={} steps={} replans={} time={}s",
                r.success(),
                r.reached,
                r.failure,
                r.collisions,
                r.etiquette_violations,
                r.steps_taken,
                r.replans,
                r.simulated_time_s
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Interact {
            script,
            now,
            detections,
            awake,
            transcript,
        } => {
            let text = if script.as_os_str() == "-" {
                let mut s = String::new();
                std::io::stdin().read_to_string(&mut s)?;
                s
            } else {
                std::fs::read_to_string(&script).with_context(|| script.display().to_string())?
            };
            let now = now.unwrap_or_else(|| chrono::Local::now().naive_local());
            let (backends, _) = BackendSet::mocks(parse_detections(&detections)?, now);
            let mut session = Session::new(backends, OrchestratorConfig::default());
            if awake {
                let phrase = session.wake_phrases[0].clone();
                session.hear(&phrase, now)?;
            }
            for line in text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
            {
                println!("> {line}");
                match session.hear(line, now)? {
                    None if session.is_awake() => println!("  (listening)"),
                    None => println!("  (ignored: no wake phrase)"),
                    Some(r) => {
                        let path: Vec<String> = r.mode_path.iter().map(|p| format!("{p:?}")).collect();
                        println!("  [{}] {}", path.join(" -> "), r.text);
                    }
                }
            }
            if let Some(p) = transcript {
                session
                    .transcript
                    .write_to(&p)
                    .with_context(|| p.display().to_string())?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_detections(spec: &str) -> anyhow::Result<Vec<Detection>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((label, dist)) = part.split_once('=') else {
            bail!("detection `{part}` is not label=metres");
        };
        let d: f64 = dist.trim().parse().with_context(|| format!("distance in `{part}`"))?;
        if d.is_nan() || d < 0.0 {
            bail!("distance in `{part}` must be non-negative");
        }
        out.push(Detection::new(label.trim(), d));
    }
    Ok(out)
}
