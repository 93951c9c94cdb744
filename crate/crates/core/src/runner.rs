//! Orchestration across tasks: encoder lifecycle, per-task error capture,
//! optional parallelism.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierConfig;
use crate::encoders::{probe_determinism, Encoder, EncoderSpec, DEFAULT_TIMEOUT};
use crate::error::{Error, Result};
use crate::ingest::{load_task, LoadOptions};
use crate::tasks::{lookup, run_task, EvalResult, EvalSettings};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 1111;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Default,
    Prototyping,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Profile::Default),
            "prototyping" => Ok(Profile::Prototyping),
            other => Err(Error::InvalidArgument(format!(
                "unknown profile {other:?} (expected default or prototyping)"
            ))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Default => "default",
            Profile::Prototyping => "prototyping",
        })
    }
}

impl Profile {
    /// Evaluation settings for this profile, all random streams rooted at `seed`.
    pub fn settings(self, seed: u64) -> EvalSettings {
        let classifier = match self {
            Profile::Default => ClassifierConfig::default(),
            Profile::Prototyping => ClassifierConfig::prototyping(),
        };
        let mut settings = EvalSettings {
            classifier: ClassifierConfig { seed, ..classifier },
            ..EvalSettings::default()
        };
        settings.retrieval.seed = seed;
        settings.retrieval.tenacity = settings.classifier.tenacity;
        settings
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tasks: Vec<String>,
    pub encoder: EncoderSpec,
    pub data_dir: PathBuf,
    pub profile: Profile,
    pub seed: u64,
    /// Overrides the profile's settings when set.
    pub settings: Option<EvalSettings>,
    pub load: LoadOptions,
    /// Concurrent task runs; 1 runs tasks in order on one encoder instance.
    pub parallel: usize,
    pub fail_fast: bool,
    /// Record per-task wall times in the report (off by default so reports
    /// are byte-identical across runs).
    pub timings: bool,
    pub encoder_timeout: Duration,
}

impl RunConfig {
    pub fn new(tasks: Vec<String>, encoder: EncoderSpec, data_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            tasks,
            encoder,
            data_dir: data_dir.into(),
            profile: Profile::Default,
            seed: DEFAULT_SEED,
            settings: None,
            load: LoadOptions::default(),
            parallel: 1,
            fail_fast: false,
            timings: false,
            encoder_timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn effective_settings(&self) -> EvalSettings {
        self.settings
            .clone()
            .unwrap_or_else(|| self.profile.settings(self.seed))
    }
}

/// The parts of the configuration that determine the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub tasks: Vec<String>,
    pub encoder: EncoderSpec,
    pub data_dir: PathBuf,
    pub profile: Profile,
    pub seed: u64,
    pub lowercase: bool,
    pub settings: EvalSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<EvalResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_secs: Option<f64>,
}

impl TaskReport {
    pub fn succeeded(&self) -> bool {
        self.result.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub harness_version: String,
    pub config: ConfigEcho,
    pub tasks: Vec<TaskReport>,
}

impl RunReport {
    pub fn all_succeeded(&self) -> bool {
        self.tasks.iter().all(TaskReport::succeeded)
    }
}

/// Canonical task names for `names`, failing on the first unknown one.
pub fn resolve_tasks(names: &[String]) -> Result<Vec<&'static str>> {
    names
        .iter()
        .map(|n| lookup(n).map(|spec| spec.name))
        .collect()
}

fn chosen_l2(result: &EvalResult) -> Option<String> {
    match result {
        EvalResult::Classification(r) => Some(format!("{:?}", r.l2)),
        EvalResult::PairClassification(r) => Some(r.l2.to_string()),
        EvalResult::Relatedness(r) => Some(r.l2.to_string()),
        EvalResult::Sts(_) | EvalResult::CaptionRetrieval(_) => None,
    }
}

fn run_one(
    name: &str,
    encoder: &mut dyn Encoder,
    config: &RunConfig,
    settings: &EvalSettings,
) -> Result<EvalResult> {
    let data = load_task(name, &config.data_dir, config.load)?;
    data.validate()?;
    let sentences = data.all_sentences();
    encoder.prepare(&sentences)?;
    probe_determinism(encoder, &sentences)?;
    run_task(&data, encoder, settings)
}

fn report_task(
    name: &str,
    encoder: Result<&mut dyn Encoder>,
    config: &RunConfig,
    settings: &EvalSettings,
) -> TaskReport {
    let start = Instant::now();
    let outcome = encoder.and_then(|enc| run_one(name, enc, config, settings));
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(result) => match chosen_l2(result) {
            Some(l2) => log::info!("{name}: done in {secs:.2}s, l2 {l2}"),
            None => log::info!("{name}: done in {secs:.2}s"),
        },
        Err(e) => log::error!("{name}: failed after {secs:.2}s: {e}"),
    }
    let (result, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    TaskReport {
        task: name.to_string(),
        result,
        error,
        wall_secs: config.timings.then_some(secs),
    }
}

fn skipped(name: &str) -> TaskReport {
    TaskReport {
        task: name.to_string(),
        result: None,
        error: Some("skipped after an earlier task failed".into()),
        wall_secs: None,
    }
}

/// Runs every requested task. Task failures are recorded in the report;
/// only configuration problems (unknown task, encoder that cannot start)
/// return `Err`.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let names = resolve_tasks(&config.tasks)?;
    let settings = config.effective_settings();
    settings.classifier.validate()?;
    settings.retrieval.validate()?;
    if config.parallel == 0 {
        return Err(Error::InvalidArgument("parallel must be at least 1".into()));
    }

    let tasks = if config.parallel > 1 && names.len() > 1 {
        if !config.encoder.is_shareable() {
            return Err(Error::InvalidArgument(
                "a subprocess encoder cannot serve concurrent task runs; use --parallel 1".into(),
            ));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallel)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        let failed = AtomicBool::new(false);
        pool.install(|| {
            names
                .par_iter()
                .map(|name| {
                    if config.fail_fast && failed.load(Ordering::SeqCst) {
                        return skipped(name);
                    }
                    let mut encoder = config.encoder.instantiate(config.encoder_timeout);
                    let enc = encoder
                        .as_mut()
                        .map(|e| &mut **e as &mut dyn Encoder)
                        .map_err(|e| Error::Encoder(e.to_string()));
                    let report = report_task(name, enc, config, &settings);
                    if !report.succeeded() {
                        failed.store(true, Ordering::SeqCst);
                    }
                    report
                })
                .collect()
        })
    } else {
        let mut encoder = config.encoder.instantiate(config.encoder_timeout)?;
        let mut reports = Vec::with_capacity(names.len());
        let mut failed = false;
        for name in &names {
            if config.fail_fast && failed {
                reports.push(skipped(name));
                continue;
            }
            let report = report_task(name, Ok(encoder.as_mut()), config, &settings);
            failed |= !report.succeeded();
            reports.push(report);
        }
        reports
    };

    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        harness_version: env!("CARGO_PKG_VERSION").to_string(),
        config: ConfigEcho {
            tasks: names.iter().map(|s| s.to_string()).collect(),
            encoder: config.encoder.clone(),
            data_dir: config.data_dir.clone(),
            profile: config.profile,
            seed: config.seed,
            lowercase: config.load.lowercase,
            settings,
        },
        tasks,
    })
}
