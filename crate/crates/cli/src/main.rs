use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use embeval::encoders::{probe_determinism, probe_sentences, sentence_id, EncoderSpec};
use embeval::ingest::{load_task, LoadOptions};
use embeval::report::{render_json, render_markdown};
use embeval::runner::{run, Profile, RunConfig, DEFAULT_SEED};
use embeval::tasks::{lookup, task_names};

#[derive(Parser)]
#[command(name = "embeval", version)]
#[command(about = "Evaluate sentence encoders on transfer tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding one subdirectory per task
    #[arg(long, env = "EMBEVAL_DATA")]
    data: PathBuf,

    /// Lowercase all tokens after tokenization
    #[arg(long)]
    lowercase: bool,
}

impl DataArgs {
    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            lowercase: self.lowercase,
            ..LoadOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an encoder on a list of tasks
    Run {
        /// Comma-separated task names, e.g. MR,CR,SICK-R
        #[arg(long, value_delimiter = ',', required = true)]
        tasks: Vec<String>,

        /// bow:<vectors file>, precomputed:<vectors file> or subprocess:<command>
        #[arg(long)]
        encoder: String,

        #[command(flatten)]
        data: DataArgs,

        /// default or prototyping
        #[arg(long, default_value = "default")]
        profile: Profile,

        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,

        /// Sentences per encoder call
        #[arg(long, default_value_t = 128)]
        batch_size: usize,

        /// Folds for cross-validated protocols
        #[arg(long, default_value_t = 10)]
        kfold: usize,

        /// JSON report path
        #[arg(long)]
        out: PathBuf,

        /// Also write a markdown summary table
        #[arg(long)]
        markdown: Option<PathBuf>,

        /// Run up to N tasks concurrently (not with subprocess encoders)
        #[arg(long, default_value_t = 1)]
        parallel: usize,

        /// Skip remaining tasks after the first failure
        #[arg(long)]
        fail_fast: bool,

        /// Include per-task wall times in the JSON report
        #[arg(long)]
        timings: bool,

        /// Seconds to wait for each subprocess encoder reply
        #[arg(long, default_value_t = 120)]
        encoder_timeout: u64,
    },
    /// Load and check task data without running anything
    Validate {
        #[command(flatten)]
        data: DataArgs,

        /// Only these tasks (default: every task directory present)
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<String>,
    },
    /// Handshake with an encoder and check it is deterministic
    ProbeEncoder {
        #[arg(long)]
        encoder: String,

        #[arg(long, default_value_t = 120)]
        encoder_timeout: u64,
    },
    /// Write `<sentence id>\t<tokens>` for every distinct sentence of the
    /// given tasks, to build precomputed embedding files
    ExportSentences {
        #[arg(long, value_delimiter = ',', required = true)]
        tasks: Vec<String>,

        #[command(flatten)]
        data: DataArgs,

        #[arg(long)]
        out: PathBuf,
    },
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn validate(data: &DataArgs, tasks: &[String]) -> Result<bool> {
    let explicit = !tasks.is_empty();
    let names: Vec<String> = if explicit {
        tasks.to_vec()
    } else {
        task_names().into_iter().map(String::from).collect()
    };
    let mut ok = true;
    let mut checked = 0;
    for name in &names {
        let spec = lookup(name)?;
        if !explicit && !data.data.join(spec.name).is_dir() {
            continue;
        }
        checked += 1;
        match load_task(spec.name, &data.data, data.load_options()) {
            Ok(task) => println!("ok    {:<8} {} records", spec.name, task.n_records()),
            Err(e) => {
                ok = false;
                println!("FAIL  {:<8} {e}", spec.name);
            }
        }
    }
    if checked == 0 {
        bail!("no task directories found under {}", data.data.display());
    }
    Ok(ok)
}

fn probe(encoder: &str, timeout: Duration) -> Result<bool> {
    let spec = EncoderSpec::parse(encoder)?;
    let mut enc = spec.instantiate(timeout)?;
    let sentences = probe_sentences();
    enc.prepare(&sentences)?;
    println!("dim {}", enc.dim());
    let deterministic = probe_determinism(enc.as_mut(), &sentences)?;
    println!("deterministic {deterministic}");
    Ok(deterministic)
}

fn export_sentences(tasks: &[String], data: &DataArgs, out: &Path) -> Result<()> {
    let mut lines = BTreeSet::new();
    for name in tasks {
        let task = load_task(name, &data.data, data.load_options())?;
        for s in task.all_sentences() {
            lines.insert(format!("{}\t{}", sentence_id(&s), s.join(" ")));
        }
    }
    let mut text: String = lines.into_iter().collect::<Vec<_>>().join("\n");
    text.push('\n');
    write_file(out, &text)
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    match cli.command {
        Command::Run {
            tasks,
            encoder,
            data,
            profile,
            seed,
            batch_size,
            kfold,
            out,
            markdown,
            parallel,
            fail_fast,
            timings,
            encoder_timeout,
        } => {
            let mut config = RunConfig::new(tasks, EncoderSpec::parse(&encoder)?, &data.data);
            config.profile = profile;
            config.seed = seed;
            config.load = data.load_options();
            config.parallel = parallel;
            config.fail_fast = fail_fast;
            config.timings = timings;
            config.encoder_timeout = Duration::from_secs(encoder_timeout);
            let mut settings = profile.settings(seed);
            settings.encoder_batch_size = batch_size;
            settings.kfold = kfold;
            config.settings = Some(settings);

            let report = run(&config)?;
            write_file(&out, &render_json(&report))?;
            if let Some(md) = markdown {
                write_file(&md, &render_markdown(&report))?;
            }
            let failed: Vec<&str> = report
                .tasks
                .iter()
                .filter(|t| !t.succeeded())
                .map(|t| t.task.as_str())
                .collect();
            if failed.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                log::error!("failed tasks: {}", failed.join(", "));
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Validate { data, tasks } => Ok(if validate(&data, &tasks)? {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }),
        Command::ProbeEncoder {
            encoder,
            encoder_timeout,
        } => Ok(if probe(&encoder, Duration::from_secs(encoder_timeout))? {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }),
        Command::ExportSentences { tasks, data, out } => {
            export_sentences(&tasks, &data, &out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
