use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stance_core::corpus::{corpus_stats, load_corpus, merge_corpora, Corpus};
use stance_core::error::{Error, Result};
use stance_core::metrics::{naive_baselines, render_confusion, render_report_jsonl, render_report_text};
use stance_core::pipeline::{self, corpus_family, CrossDirection, Profile, RunConfig};

// Writes to stdout, ignoring a closed pipe (e.g. `stance stats | head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser, Debug)]
#[command(name = "stance", version, about = "Headline/body stance detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit transforms, featurize, train and evaluate as configured.
    Run(RunArgs),
    /// Print corpus statistics.
    Stats(CorpusArgs),
    /// Print the always-discuss and always-disagree baselines for test corpora.
    Baselines(CorpusArgs),
    /// Train on one corpus family, evaluate on another.
    Cross {
        #[command(flatten)]
        run: RunArgs,
        /// fnc-arc or arc-fnc (any TRAIN-TEST pair of family names).
        #[arg(long)]
        direction: String,
    },
    /// Print a finished run's report.
    ExportReport {
        /// Run output directory containing report.json.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Take corpora from a run configuration.
    #[arg(long, conflicts_with_all = ["stances", "bodies"])]
    config: Option<PathBuf>,
    /// Stances CSV; repeat together with --bodies to merge several files.
    #[arg(long)]
    stances: Vec<PathBuf>,
    #[arg(long)]
    bodies: Vec<PathBuf>,
    /// Emit JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProfileArg {
    Desk,
    Full,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ReportFormat {
    Text,
    Jsonl,
    Json,
    Confusion,
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    match args.profile {
        Some(ProfileArg::Desk) => cfg.apply_profile(Profile::Desk),
        Some(ProfileArg::Full) => cfg.apply_profile(Profile::Full),
        None => {
            let p = cfg.profile;
            cfg.apply_profile(p);
        }
    }
    Ok(cfg)
}

fn print_run(outcome: &pipeline::RunOutcome) {
    let title = outcome.manifest.command.clone();
    out!("{}", render_report_text(&title, &outcome.report));
    out!("{}", render_confusion(&outcome.report.confusion));
    outln!("artifacts: {}", outcome.out_dir.display());
}

/// Named corpus groups: with a config, each family's train and test corpora
/// merged; otherwise the given files merged into one.
fn corpus_groups(args: &CorpusArgs, test_only: bool) -> Result<Vec<(String, Corpus)>> {
    if let Some(path) = &args.config {
        let cfg = RunConfig::load(path)?;
        let mut sources: Vec<(&String, &PathBuf, &PathBuf)> = Vec::new();
        if !test_only {
            sources.extend(cfg.train_names.iter().zip(&cfg.train_stances).zip(&cfg.train_bodies).map(|((n, s), b)| (n, s, b)));
        }
        sources.extend(cfg.test_names.iter().zip(&cfg.test_stances).zip(&cfg.test_bodies).map(|((n, s), b)| (n, s, b)));
        let mut groups: Vec<(String, Corpus)> = Vec::new();
        for (name, s, b) in sources {
            let c = load_corpus(name, s, b)?;
            let family = corpus_family(name).to_string();
            match groups.iter_mut().find(|g| g.0 == family) {
                Some(g) => g.1 = merge_corpora(&g.1, &c)?,
                None => groups.push((family, c)),
            }
        }
        if groups.is_empty() {
            return Err(Error::Config {
                field: "test_names".into(),
                message: "no corpora configured".into(),
            });
        }
        return Ok(groups);
    }
    if args.stances.is_empty() || args.stances.len() != args.bodies.len() {
        return Err(Error::Config {
            field: "stances".into(),
            message: "give --config, or matching --stances and --bodies files".into(),
        });
    }
    let mut merged: Option<Corpus> = None;
    for (i, (s, b)) in args.stances.iter().zip(&args.bodies).enumerate() {
        let c = load_corpus(&format!("input{i}"), s, b)?;
        merged = Some(match merged {
            None => c,
            Some(m) => merge_corpora(&m, &c)?,
        });
    }
    Ok(vec![("input".into(), merged.expect("at least one file"))])
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Format(e.to_string()))
}

fn cmd_stats(args: &CorpusArgs) -> Result<()> {
    for (name, c) in corpus_groups(args, false)? {
        let stats = corpus_stats(&c)?;
        if args.json {
            outln!("{{\"corpus\":{},\"stats\":{}}}", to_json(&name)?, to_json(&stats)?);
        } else {
            outln!("{name}");
            outln!("{stats}");
            let flagged = c.flagged_empty_bodies();
            if flagged > 0 {
                outln!("({flagged} pairs have empty bodies)");
            }
        }
    }
    Ok(())
}

fn cmd_baselines(args: &CorpusArgs) -> Result<()> {
    for (name, c) in corpus_groups(args, args.config.is_some())? {
        let b = naive_baselines(&c)?;
        for (kind, report) in [("always-discuss", &b.always_discuss), ("always-disagree", &b.always_disagree)] {
            let title = format!("{name} {kind}");
            if args.json {
                out!("{}", render_report_jsonl(&title, report));
            } else {
                out!("{}", render_report_text(&title, report));
            }
        }
    }
    Ok(())
}

fn cmd_export(run: &Path, format: ReportFormat) -> Result<()> {
    let report = pipeline::read_report(run)?;
    let title = run.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    match format {
        ReportFormat::Text => out!("{}", render_report_text(&title, &report)),
        ReportFormat::Jsonl => out!("{}", render_report_jsonl(&title, &report)),
        ReportFormat::Json => outln!("{}", to_json(&report)?),
        ReportFormat::Confusion => out!("{}", render_confusion(&report.confusion)),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            print_run(&pipeline::run(&cfg, None)?);
        }
        Command::Cross { run, direction } => {
            let cfg = load_config(&run)?;
            let direction: CrossDirection = direction.parse().map_err(|e: Error| Error::Config {
                field: "direction".into(),
                message: e.to_string(),
            })?;
            print_run(&pipeline::run(&cfg, Some(&direction))?);
        }
        Command::Stats(args) => cmd_stats(&args)?,
        Command::Baselines(args) => cmd_baselines(&args)?,
        Command::ExportReport { run, format } => cmd_export(&run, format)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(pipeline::exit_code(&e) as u8)
        }
    }
}
