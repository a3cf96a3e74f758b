//! `pileak`: batch entry points over app bundles, reports and fixtures.
//!
//! Exit status: 0 success, 1 analysis failure, 2 bad usage or input.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context as _};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use pileak_core::analysis::{Analysis, AnalysisError, Analyzer};
use pileak_core::fixture::{generate, FixtureSpec};
use pileak_core::gui::WidgetRegistry;
use pileak_core::pi::load_lexicon;
use pileak_core::report::{aggregate, emit_report, export_csv, read_reports, AppReport, ReportError};
use pileak_core::sourcesink::load_sinks;

#[derive(Parser)]
#[command(name = "pileak", version, about = "Find personal information flowing from app UI inputs into sinks")]
struct Cli {
    /// Raise log verbosity (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one app bundle and write its report.
    Analyze {
        #[arg(long, value_name = "DIR")]
        app: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Report path; stdout when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Analyze every bundle directory under a corpus directory.
    Corpus {
        #[arg(long, value_name = "DIR")]
        apps: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(short = 'j', long = "jobs", value_name = "N")]
        jobs: Option<usize>,
    },
    /// Fold a directory of reports into corpus statistics and CSV tables.
    Aggregate {
        #[arg(long, value_name = "DIR")]
        reports: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Generate synthetic bundles with ground truth.
    GenFixtures {
        #[arg(long)]
        seed: u64,
        /// JSON fixture spec; built-in defaults when absent. Its seed is
        /// replaced by --seed.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Number of bundles; each gets seed + k and its own subdirectory.
        #[arg(long)]
        count: Option<u64>,
    },
    /// Print one leak path from a report.
    Explain {
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        #[arg(long, value_name = "I")]
        leak: usize,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Sink registry; the shipped one when absent.
    #[arg(long, value_name = "FILE")]
    sinks: Option<PathBuf>,
    /// PI lexicon; the shipped one when absent.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Widget registry; the shipped one when absent.
    #[arg(long, value_name = "FILE")]
    widgets: Option<PathBuf>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 2, error: error.into() }
    }

    fn analysis(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 1, error: error.into() }
    }
}

type Outcome = Result<(), Failure>;

fn read_config_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)
}

impl ConfigArgs {
    fn analyzer(&self) -> Result<Analyzer, Failure> {
        let mut a = Analyzer::default();
        if let Some(p) = &self.sinks {
            a.sinks = load_sinks(&read_config_file(p)?)
                .with_context(|| p.display().to_string())
                .map_err(Failure::input)?;
        }
        if let Some(p) = &self.lexicon {
            a.lexicon = load_lexicon(&read_config_file(p)?)
                .with_context(|| p.display().to_string())
                .map_err(Failure::input)?;
        }
        if let Some(p) = &self.widgets {
            a.widgets = WidgetRegistry::parse(&read_config_file(p)?)
                .with_context(|| p.display().to_string())
                .map_err(Failure::input)?;
        }
        Ok(a)
    }
}

/// `SOURCE_DATE_EPOCH` when set, else the Unix epoch, so reports are
/// reproducible byte for byte.
fn analyzed_at() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn tally_line(name: &str, a: &Analysis) -> String {
    let t = a.sources.tally;
    format!(
        "{name}: findViewById sites {}, sources {}, unlabeled-id skips {}, unresolved-argument skips {}, unmatched ids {}, leaks {}",
        t.call_sites,
        t.sources,
        t.unlabeled_id_skips,
        t.unresolved_argument_skips,
        a.unmatched_ids.len(),
        a.leaks.len()
    )
}

fn analysis_failure(e: AnalysisError) -> Failure {
    // every analysis error stems from malformed bundle content
    Failure::input(e)
}

fn cmd_analyze(app: &Path, config: &ConfigArgs, out: Option<&Path>) -> Outcome {
    let analyzer = config.analyzer()?;
    let analysis = analyzer.analyze_dir(app).map_err(analysis_failure)?;
    eprintln!("{}", tally_line(&app.display().to_string(), &analysis));
    for u in &analysis.unmatched_ids {
        warn!("{}: id `{}` has no resource-table entry", u.layout_file.display(), u.id_name);
    }
    let json = emit_report(&analysis, &analyzed_at()).to_json();
    match out {
        Some(path) => write_file(path, json.as_bytes()),
        None => std::io::stdout()
            .write_all(json.as_bytes())
            .context("writing report to stdout")
            .map_err(Failure::analysis),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(Failure::analysis)?;
    }
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::analysis)
}

fn app_dirs(apps: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(apps)
        .with_context(|| format!("reading {}", apps.display()))
        .map_err(Failure::input)?;
    let mut dirs = Vec::new();
    for e in entries {
        let path = e.context("listing corpus").map_err(Failure::input)?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn cmd_corpus(apps: &Path, config: &ConfigArgs, out: &Path, jobs: Option<usize>) -> Outcome {
    let analyzer = config.analyzer()?;
    let dirs = app_dirs(apps)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(Failure::analysis)?;
    let stamp = analyzed_at();
    let results: Vec<Result<(String, String), AnalysisError>> = pool.install(|| {
        dirs.par_iter()
            .map(|dir| {
                let a = analyzer.analyze_dir(dir)?;
                Ok((tally_line(&dir.display().to_string(), &a), emit_report(&a, &stamp).to_json()))
            })
            .collect()
    });

    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(Failure::analysis)?;
    let mut worst = 0u8;
    let mut written = 0usize;
    for (dir, result) in dirs.iter().zip(results) {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match result {
            Ok((tally, json)) => {
                info!("{tally}");
                write_file(&out.join(format!("{name}.json")), json.as_bytes())?;
                written += 1;
            }
            Err(e) => {
                eprintln!("pileak: {}: {e}", dir.display());
                worst = worst.max(analysis_failure(e).code);
            }
        }
    }
    eprintln!("analyzed {written} of {} apps", dirs.len());
    match worst {
        0 => Ok(()),
        code => Err(Failure {
            code,
            error: anyhow!("{} of {} apps failed", dirs.len() - written, dirs.len()),
        }),
    }
}

fn report_failure(e: ReportError) -> Failure {
    match e {
        ReportError::Io { .. } | ReportError::Csv { .. } => Failure::analysis(e),
        ReportError::Json { .. } | ReportError::SchemaVersion(_) | ReportError::EmptyCorpus => Failure::input(e),
    }
}

fn cmd_aggregate(reports: &Path, out: &Path) -> Outcome {
    let reports = read_reports(reports).map_err(report_failure)?;
    let summary = aggregate(&reports).map_err(report_failure)?;
    write_file(&out.join("summary.json"), summary.to_json().as_bytes())?;
    export_csv(&summary, out).map_err(report_failure)?;
    eprintln!("aggregated {} reports, {} leaks", summary.apps, summary.total_leaks);
    Ok(())
}

fn cmd_gen_fixtures(seed: u64, spec: Option<&Path>, out: &Path, count: Option<u64>) -> Outcome {
    let base = match spec {
        Some(p) => FixtureSpec::from_json(&read_config_file(p)?)
            .with_context(|| p.display().to_string())
            .map_err(Failure::input)?,
        None => FixtureSpec::default(),
    };
    let jobs: Vec<(FixtureSpec, PathBuf)> = match count {
        None => vec![(FixtureSpec { seed, ..base }, out.to_path_buf())],
        Some(k) => (0..k)
            .map(|i| {
                let s = seed.wrapping_add(i);
                (FixtureSpec { seed: s, ..base.clone() }, out.join(format!("fixture_{s:06}")))
            })
            .collect(),
    };
    let planted: Vec<usize> = jobs
        .par_iter()
        .map(|(spec, dir)| generate(spec, dir).map(|gt| gt.leaks.len()))
        .collect::<Result<_, _>>()
        .map_err(|e| match e {
            pileak_core::fixture::FixtureError::InvalidSpec(_) => Failure::input(e),
            other => Failure::analysis(other),
        })?;
    eprintln!("generated {} bundles, {} planted flows", jobs.len(), planted.iter().sum::<usize>());
    Ok(())
}

fn cmd_explain(report: &Path, leak: usize) -> Outcome {
    let r = AppReport::read(report).map_err(report_failure)?;
    let l = r.leaks.get(leak).ok_or_else(|| {
        Failure::input(anyhow!(
            "leak index {leak} out of range: report has {} leaks",
            r.leaks.len()
        ))
    })?;
    let mut text = format!(
        "# {} -> {} ({} party, {} view `{}`)\nSOURCE\n",
        l.pi,
        l.category,
        match l.party {
            pileak_core::taint::Party::First => "first",
            pileak_core::taint::Party::Third => "third",
        },
        l.source_view_class,
        l.source_view_id.as_deref().unwrap_or("?"),
    );
    let last = l.path.len().saturating_sub(1);
    for (i, step) in l.path.iter().enumerate() {
        text.push_str(&step.jtac);
        text.push_str(if i == last { " SINK\n" } else { " =>\n" });
    }
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Analyze { app, config, out } => cmd_analyze(&app, &config, out.as_deref()),
        Command::Corpus { apps, config, out, jobs } => cmd_corpus(&apps, &config, &out, jobs),
        Command::Aggregate { reports, out } => cmd_aggregate(&reports, &out),
        Command::GenFixtures { seed, spec, out, count } => cmd_gen_fixtures(seed, spec.as_deref(), &out, count),
        Command::Explain { report, leak } => cmd_explain(&report, leak),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pileak: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
