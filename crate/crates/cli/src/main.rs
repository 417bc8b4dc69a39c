//! `fairsub`: audit a classifier for subgroup discrimination.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fairsub::audit::{
    debug_samples, load_data, mine, render_report, run_audit, AuditConfig, AuditSettings, DataConfig,
    OracleConfig, ReportFormat,
};
use fairsub::mitigation::MitigationConfig;
use fairsub::rules::{IntervalMode, RuleSet};
use fairsub::sampler::Side;

#[derive(Parser)]
#[command(
    name = "fairsub",
    version,
    about = "Black-box subgroup discrimination auditing"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine frequent rule sets, score and rank them.
    Audit(AuditArgs),
    /// Audit, then mitigate the worst finding.
    Mitigate(AuditArgs),
    /// Print frequent rule sets with their support, without scoring.
    Rules(ConfigArgs),
    /// Print generated samples for one rule set as JSON lines.
    Sample(SampleArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file. Every field can also be given by the flags below.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Structured data (CSV with header).
    #[arg(long, conflicts_with = "text")]
    data: Option<PathBuf>,
    /// Schema for structured data.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Text data (TSV `label<TAB>text`).
    #[arg(long)]
    text: Option<PathBuf>,
    /// Lexicon for text data [default: $FAIRSUB_LEXICON, else built-in].
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Favorable label for text data.
    #[arg(long)]
    favorable_label: Option<String>,

    /// Built-in network weights file.
    #[arg(long, conflicts_with = "oracle_cmd")]
    model: Option<PathBuf>,
    /// External oracle command line, split on whitespace.
    #[arg(long)]
    oracle_cmd: Option<String>,
    /// Seconds to wait for an external oracle batch.
    #[arg(long)]
    oracle_timeout: Option<f64>,

    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum)]
    interval_mode: Option<Mode>,
    #[arg(long)]
    max_rules_per_set: Option<usize>,
    #[arg(long)]
    max_rules_per_feature: Option<usize>,
    /// Discrimination threshold on the fairness score.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Scoring threads (0 = all cores).
    #[arg(short, long)]
    jobs: Option<usize>,
    /// Seed for scoring, sampling and mitigation.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    sample_thr: Option<usize>,
    #[arg(long)]
    error_thr: Option<f64>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    max_samples: Option<usize>,
    #[arg(long)]
    int_step: Option<f64>,
    #[arg(long)]
    dec_step: Option<f64>,

    #[arg(long)]
    start_count: Option<usize>,
    #[arg(long)]
    max_fraction: Option<f64>,
    #[arg(long)]
    growth: Option<f64>,
    /// Largest tolerated held-out accuracy drop, as a fraction.
    #[arg(long)]
    accuracy_budget: Option<f64>,
    #[arg(long)]
    holdout_fraction: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Include per-phase wall-clock times in the report.
    #[arg(long)]
    timings: bool,
    /// Where to write a retrained network.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Where to write the dataset with counter samples appended.
    #[arg(long)]
    augmented_out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Rule set as JSON, e.g. '[{"kind":"categorical","feature":"gender","values":["male"]}]'.
    #[arg(long, conflicts_with = "index", required_unless_present = "index")]
    rule_set: Option<String>,
    /// 0-based position in the frequent rule set list printed by `rules`.
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, value_enum, default_value = "in-group")]
    side: SideArg,
    #[arg(short = 'n', long, default_value_t = 10)]
    count: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    SingleBin,
    Union,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    InGroup,
    Complement,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ConfigArgs {
    /// Config file (if any) with flags applied on top.
    fn build(&self, force_mitigation: bool) -> Result<AuditConfig> {
        let mut config = match &self.config {
            Some(path) => AuditConfig::from_file(path)?,
            None => AuditConfig {
                data: self
                    .data_from_flags()?
                    .context("no data given: use --config, --data or --text")?,
                oracle: self
                    .oracle_from_flags()?
                    .context("no model given: use --config, --model or --oracle-cmd")?,
                settings: AuditSettings::default(),
            },
        };
        if self.config.is_some() {
            if let Some(d) = self.data_from_flags()? {
                config.data = d;
            }
            if let Some(o) = self.oracle_from_flags()? {
                config.oracle = o;
            }
        }
        if let (Some(t), OracleConfig::Subprocess { timeout_secs, .. }) =
            (self.oracle_timeout, &mut config.oracle)
        {
            *timeout_secs = t;
        }
        if let (Some(l), DataConfig::Text { lexicon, .. }) = (&self.lexicon, &mut config.data) {
            *lexicon = Some(l.clone());
        }
        if let (Some(f), DataConfig::Text { favorable_label, .. }) = (&self.favorable_label, &mut config.data)
        {
            *favorable_label = f.clone();
        }

        let s = &mut config.settings;
        set(&mut s.theta, self.theta);
        set(&mut s.bins, self.bins);
        set(
            &mut s.interval_mode,
            self.interval_mode.map(|m| match m {
                Mode::SingleBin => IntervalMode::SingleBin,
                Mode::Union => IntervalMode::Union,
            }),
        );
        if self.max_rules_per_set.is_some() {
            s.max_rules_per_set = self.max_rules_per_set;
        }
        set(&mut s.max_rules_per_feature, self.max_rules_per_feature);
        set(&mut s.threshold, self.threshold);
        set(&mut s.top_k, self.top_k);
        set(&mut s.jobs, self.jobs);
        set(&mut s.scorer.sample_thr, self.sample_thr);
        set(&mut s.scorer.error_thr, self.error_thr);
        set(&mut s.scorer.z, self.z);
        set(&mut s.scorer.confidence, self.confidence);
        set(&mut s.scorer.max_samples, self.max_samples);
        set(&mut s.sampler.int_step, self.int_step);
        set(&mut s.sampler.dec_step, self.dec_step);

        let wants_mitigation = force_mitigation
            || [self.start_count, self.epochs, self.batch_size]
                .iter()
                .any(Option::is_some)
            || [
                self.max_fraction,
                self.growth,
                self.accuracy_budget,
                self.holdout_fraction,
                self.learning_rate,
            ]
            .iter()
            .any(Option::is_some);
        if wants_mitigation && s.mitigation.is_none() {
            s.mitigation = Some(MitigationConfig::default());
        }
        if let Some(m) = &mut s.mitigation {
            set(&mut m.start_count, self.start_count);
            set(&mut m.max_fraction, self.max_fraction);
            set(&mut m.growth, self.growth);
            set(&mut m.accuracy_drop_budget, self.accuracy_budget);
            set(&mut m.holdout_fraction, self.holdout_fraction);
            set(&mut m.trainer.epochs, self.epochs);
            set(&mut m.trainer.learning_rate, self.learning_rate);
            set(&mut m.trainer.batch_size, self.batch_size);
        }
        if let Some(seed) = self.seed {
            s.scorer.rng_seed = seed;
            s.sampler.rng_seed = seed;
            if let Some(m) = &mut s.mitigation {
                m.rng_seed = seed;
                m.trainer.rng_seed = seed;
            }
        }
        config.validate()?;
        Ok(config)
    }

    fn data_from_flags(&self) -> Result<Option<DataConfig>> {
        match (&self.data, &self.text) {
            (Some(path), None) => {
                let schema = self.schema.clone().context("--data needs --schema")?;
                Ok(Some(DataConfig::Structured {
                    path: path.clone(),
                    schema,
                }))
            }
            (None, Some(path)) => Ok(Some(DataConfig::Text {
                path: path.clone(),
                lexicon: self.lexicon.clone(),
                favorable_label: self
                    .favorable_label
                    .clone()
                    .context("--text needs --favorable-label")?,
            })),
            (None, None) => Ok(None),
            (Some(_), Some(_)) => bail!("--data and --text are exclusive"),
        }
    }

    fn oracle_from_flags(&self) -> Result<Option<OracleConfig>> {
        if let Some(path) = &self.model {
            return Ok(Some(OracleConfig::Mlp { path: path.clone() }));
        }
        if let Some(cmd) = &self.oracle_cmd {
            let command: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if command.is_empty() {
                bail!("--oracle-cmd is empty");
            }
            return Ok(Some(OracleConfig::Subprocess {
                command,
                timeout_secs: self.oracle_timeout.unwrap_or(60.0),
            }));
        }
        Ok(None)
    }
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn audit(args: &AuditArgs, force_mitigation: bool) -> Result<()> {
    let config = args.config.build(force_mitigation)?;
    let (mut run, data) = run_audit(&config)?;
    if let Some(t) = &run.report.timings {
        log::info!(
            "mining {:.3}s, scoring {:.3}s{}",
            t.mining_secs,
            t.scoring_secs,
            t.mitigation_secs
                .map(|m| format!(", mitigation {m:.3}s"))
                .unwrap_or_default()
        );
    }
    if !args.timings {
        run.report.timings = None;
    }
    let format = match args.format {
        Format::Json => ReportFormat::Json,
        Format::Markdown => ReportFormat::Markdown,
    };
    let mut out = writer(args.output.as_deref())?;
    out.write_all(render_report(&run.report, format)?.as_bytes())?;
    out.flush()?;

    if let Some(path) = &args.model_out {
        match &run.model {
            Some(model) => std::fs::write(path, model.to_json()? + "\n")
                .with_context(|| format!("cannot write {}", path.display()))?,
            None => log::warn!("no retrained model to write to {}", path.display()),
        }
    }
    if let Some(path) = &args.augmented_out {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        if !run.write_augmented(&data, BufWriter::new(file))? {
            log::warn!("no counter samples were produced; {} is empty", path.display());
        }
    }
    Ok(())
}

fn rules(args: &ConfigArgs) -> Result<()> {
    let config = args.build(false)?;
    let data = load_data(&config.data)?;
    let report = mine(&data, &config.settings)?;
    let mut out = writer(None)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

fn sample(args: &SampleArgs) -> Result<()> {
    let config = args.config.build(false)?;
    let data = load_data(&config.data)?;
    let rule_set: RuleSet = match (&args.rule_set, args.index) {
        (Some(json), _) => serde_json::from_str(json).context("--rule-set is not a valid rule set")?,
        (None, Some(i)) => {
            let mined = mine(&data, &config.settings)?;
            let n = mined.frequent.len();
            mined
                .frequent
                .into_iter()
                .nth(i)
                .with_context(|| format!("--index {i} is out of range ({n} frequent rule sets)"))?
                .rule_set
        }
        (None, None) => bail!("give --rule-set or --index"),
    };
    let side = match args.side {
        SideArg::InGroup => Side::InGroup,
        SideArg::Complement => Side::Complement,
    };
    let mut out = writer(args.output.as_deref())?;
    for line in debug_samples(&data, &rule_set, side, args.count, &config.settings)? {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Audit(a) => audit(a, false),
        Command::Mitigate(a) => audit(a, true),
        Command::Rules(c) => rules(c),
        Command::Sample(s) => sample(s),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
