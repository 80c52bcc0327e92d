//! Run configuration, read from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use canesim_core::executor::ExecutorConfig;
use canesim_core::perception::SensorConfig;
use canesim_core::scenario::SuiteTemplate;
use canesim_core::social::ConfusionMatrix;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// TOML file holding an executor config; defaults apply when absent.
    #[serde(default)]
    pub executor_config: Option<PathBuf>,
    /// Default sensor for suites that do not set one.
    #[serde(default)]
    pub sensor: Option<SensorSpec>,
    /// Default confusion matrix for suites that do not set one.
    #[serde(default)]
    pub matrix: Option<MatrixSpec>,
    #[serde(default, rename = "suite")]
    pub suites: Vec<SuiteSpec>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub name: String,
    /// Trial `i` uses `templates[i % templates.len()]`.
    #[serde(deserialize_with = "templates_from_str", serialize_with = "templates_to_str")]
    pub templates: Vec<SuiteTemplate>,
    pub trials: u32,
    #[serde(default)]
    pub sensor: Option<SensorSpec>,
    #[serde(default)]
    pub matrix: Option<MatrixSpec>,
    /// Overrides the executor's compliance error rate.
    #[serde(default)]
    pub p_err: Option<f64>,
    #[serde(default)]
    pub gate: Option<Gate>,
    #[serde(default)]
    pub reference: Option<ReferenceResult>,
}

fn templates_from_str<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<SuiteTemplate>, D::Error> {
    Vec::<String>::deserialize(d)?
        .iter()
        .map(|s| SuiteTemplate::from_str(s).map_err(serde::de::Error::custom))
        .collect()
}

fn templates_to_str<S: serde::Serializer>(t: &[SuiteTemplate], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(t.iter().map(ToString::to_string))
}

/// A named preset (`default`, `noiseless`, `full-view`) or an inline table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SensorSpec {
    Preset(String),
    Inline(SensorConfig),
}

impl SensorSpec {
    pub fn resolve(&self) -> Result<SensorConfig> {
        let cfg = match self {
            SensorSpec::Preset(p) => match p.as_str() {
                "default" => SensorConfig::default(),
                "noiseless" => SensorConfig::noiseless(),
                "full-view" => SensorConfig::default().full_view(),
                "noiseless-full-view" => SensorConfig::noiseless().full_view(),
                other => return Err(HarnessError::Invalid(format!("unknown sensor preset `{other}`"))),
            },
            SensorSpec::Inline(c) => *c,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `identity`, `uniform`, `calibrated`, or a path to a matrix file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub String);

impl MatrixSpec {
    pub fn resolve(&self, base: &Path) -> Result<ConfusionMatrix> {
        Ok(match self.0.as_str() {
            "identity" => ConfusionMatrix::identity(),
            "uniform" => ConfusionMatrix::uniform(),
            "calibrated" => ConfusionMatrix::calibrated(),
            path => {
                let p = base.join(path);
                let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::io(&p, e))?;
                ConfusionMatrix::parse(&text).map_err(|e| HarnessError::Config {
                    path: p,
                    message: e.to_string(),
                })?
            }
        })
    }
}

/// Acceptance gate checked by `canesim run --gate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    #[serde(default)]
    pub min_success_rate: Option<f64>,
    #[serde(default)]
    pub max_success_rate: Option<f64>,
    /// Every failure must carry a misclassification or a verified
    /// unreachable goal in its log.
    #[serde(default)]
    pub explained_failures: bool,
}

/// Externally reported outcome printed next to the estimate. Never checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceResult {
    pub label: String,
    pub successes: u32,
    pub trials: u32,
}

/// A suite with every default and file reference filled in.
#[derive(Debug, Clone)]
pub struct ResolvedSuite {
    pub name: String,
    pub templates: Vec<SuiteTemplate>,
    pub trials: u32,
    pub sensor: SensorConfig,
    pub matrix: ConfusionMatrix,
    pub executor: ExecutorConfig,
    pub gate: Option<Gate>,
    pub reference: Option<ReferenceResult>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(HarnessError::Invalid("parallelism must be at least 1".into()));
        }
        let mut names = BTreeSet::new();
        for s in &self.suites {
            if !names.insert(s.name.as_str()) {
                return Err(HarnessError::Invalid(format!("duplicate suite name `{}`", s.name)));
            }
            if s.trials == 0 {
                return Err(HarnessError::Invalid(format!(
                    "suite `{}`: trials must be at least 1",
                    s.name
                )));
            }
            if s.templates.is_empty() {
                return Err(HarnessError::Invalid(format!("suite `{}`: no templates", s.name)));
            }
            if let Some(p) = s.p_err {
                if !(0.0..=1.0).contains(&p) {
                    return Err(HarnessError::Invalid(format!(
                        "suite `{}`: p_err {p} outside [0, 1]",
                        s.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fills defaults. Relative paths are taken from `base`, normally the
    /// directory holding the config file.
    pub fn resolve(&self, base: &Path) -> Result<Vec<ResolvedSuite>> {
        let executor = match &self.executor_config {
            Some(p) => {
                let p = base.join(p);
                let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::io(&p, e))?;
                toml::from_str::<ExecutorConfig>(&text).map_err(|e| HarnessError::Config {
                    path: p,
                    message: e.to_string(),
                })?
            }
            None => ExecutorConfig::default(),
        };
        let default_sensor = SensorSpec::Preset("default".into());
        let default_matrix = MatrixSpec("calibrated".into());
        self.suites
            .iter()
            .map(|s| {
                let mut exec = executor.clone();
                if let Some(p) = s.p_err {
                    exec.p_err = p;
                }
                Ok(ResolvedSuite {
                    name: s.name.clone(),
                    templates: s.templates.clone(),
                    trials: s.trials,
                    sensor: s
                        .sensor
                        .as_ref()
                        .or(self.sensor.as_ref())
                        .unwrap_or(&default_sensor)
                        .resolve()?,
                    matrix: s
                        .matrix
                        .as_ref()
                        .or(self.matrix.as_ref())
                        .unwrap_or(&default_matrix)
                        .resolve(base)?,
                    executor: exec,
                    gate: s.gate.clone(),
                    reference: s.reference.clone(),
                })
            })
            .collect()
    }
}
