use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use imovno::dataset::{feature_names, write_csv};
use imovno::harness::{
    ablate_components, ablate_noise, clean, emit_report, report_csv, report_json, reports_csv, run_cv, to_json,
    ExperimentReport, ReportFormat, RunConfig, DEFAULT_NOISE_FRACTIONS,
};
use imovno::overlap::KeepMode;
use imovno::posterior::posteriors;
use imovno::region::ThresholdMode;
use imovno::resample::balanced_dataset;
use imovno::{overlap_ratios, Dataset, LabelColumn, MinMaxScaler, Region};

#[derive(Parser, Debug)]
#[command(name = "imovno", version, about = "Overlap-aware cleaning, oversampling and pruned ensembles for imbalanced data")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalOpts {
    /// Input CSV with a header row.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Label column, by header name or zero-based index.
    #[arg(long, global = true)]
    label_col: Option<LabelColumn>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Min-max scale features, fitted on training data only.
    #[arg(long, global = true)]
    scale: bool,
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    threshold_mode: Option<ThresholdMode>,
    #[arg(long, global = true)]
    z_threshold: Option<f64>,
    #[arg(long, global = true)]
    sor_fallback_fraction: Option<f64>,
    #[arg(long, global = true)]
    sor_keep: Option<KeepMode>,
    #[arg(long, global = true)]
    omrp_k: Option<usize>,
    #[arg(long, global = true)]
    omrp_max_attempts_factor: Option<usize>,
    #[arg(long, global = true)]
    jaya_pop: Option<usize>,
    #[arg(long, global = true)]
    jaya_iters: Option<usize>,
    /// Share of noisy samples to remove, least confident first.
    #[arg(long, global = true)]
    noise_fraction: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tag every sample as core, overlapping or noisy.
    Partition,
    /// Write the dataset with noise and overlap removed.
    Clean,
    /// Write the cleaned dataset oversampled to equal class sizes.
    Balance,
    /// Repeated stratified cross-validation of the full pipeline.
    Run,
    /// Cross-validate once per noise-removal fraction on shared folds.
    AblateNoise {
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// Cross-validate without balancing, without pruning, and in full.
    AblateComponents,
    /// Summarise a saved JSON report, or convert it with --format csv.
    Report {
        input: PathBuf,
    },
}

impl GlobalOpts {
    fn run_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &self.data {
            c.data = Some(v.clone());
        }
        if let Some(v) = &self.label_col {
            c.label_column = v.clone();
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$($field).+ = v; })*
            };
        }
        set!(
            seed => seed,
            folds => folds,
            repeats => repeats,
            threshold_mode => threshold_mode,
            z_threshold => sor.z_threshold,
            sor_fallback_fraction => sor.fallback_fraction,
            sor_keep => sor.keep_mode,
            omrp_k => omrp.knn_k,
            omrp_max_attempts_factor => omrp.max_attempts_factor,
            jaya_pop => jaya.population,
            jaya_iters => jaya.iterations,
            noise_fraction => noise_remove_fraction,
        );
        if self.scale {
            c.scale = true;
        }
        c.validate()?;
        Ok(c)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load(config: &RunConfig) -> Result<(Dataset, Vec<String>)> {
    let path = config.data.as_ref().context("--data is required")?;
    let ds = config.load_dataset().with_context(|| format!("loading {}", path.display()))?;
    let names = feature_names(path, &config.label_column)?;
    let ds = if config.scale { MinMaxScaler::fit(&ds).transform(&ds) } else { ds };
    Ok((ds, names))
}

fn partition_cmd(opts: &GlobalOpts) -> Result<bool> {
    let config = opts.run_config()?;
    let (ds, _) = load(&config)?;
    let cleaned = clean(&ds, &config)?;
    let p = posteriors(&cleaned.model, &ds)?;
    let mut w = output(opts.out.as_deref())?;
    writeln!(w, "sample_index,label,tag,max_own_posterior")?;
    for i in 0..ds.n_samples() {
        let tag = cleaned.assignment.tags[i];
        writeln!(w, "{i},{},{},{:.6}", ds.class_names()[ds.label(i)], tag.as_str(), p.get(i, ds.label(i)))?;
    }
    w.flush()?;
    let a = &cleaned.assignment;
    info!(
        "core {}, overlapping {}, noisy {}",
        a.count(Region::Core),
        a.count(Region::Overlapping),
        a.count(Region::Noisy)
    );
    Ok(false)
}

fn clean_cmd(opts: &GlobalOpts) -> Result<bool> {
    let config = opts.run_config()?;
    let (ds, names) = load(&config)?;
    let cleaned = clean(&ds, &config)?;
    let kept = ds.subset(&cleaned.kept());
    write_csv(output(opts.out.as_deref())?, &kept, Some(&names), None)?;
    let before = overlap_ratios(&ds, config.overlap_k)?;
    match overlap_ratios(&kept, config.overlap_k) {
        Ok(after) => eprintln!(
            "kept {} of {} samples; overlap ratio {:.2}% -> {:.2}%",
            kept.n_samples(),
            ds.n_samples(),
            100.0 * before.dataset,
            100.0 * after.dataset
        ),
        Err(e) => eprintln!("kept {} of {} samples; overlap ratio after cleaning unavailable: {e}", kept.n_samples(), ds.n_samples()),
    }
    Ok(false)
}

fn balance_cmd(opts: &GlobalOpts) -> Result<bool> {
    let config = opts.run_config()?;
    let (ds, names) = load(&config)?;
    let cleaned = clean(&ds, &config)?;
    let b = balanced_dataset(&ds, &cleaned.base_sets, &config.omrp, config.seed)?;
    let provenance: Vec<&str> = b.origin.iter().map(|o| if o.is_some() { "original" } else { "synthetic" }).collect();
    write_csv(output(opts.out.as_deref())?, &b.dataset, Some(&names), Some(&provenance))?;
    for w in &b.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("class counts {:?} -> {:?}", b.plan.base_counts, b.dataset.class_counts());
    Ok(false)
}

fn write_report(report: &ExperimentReport, opts: &GlobalOpts) -> Result<()> {
    let format = opts.format.map_or(ReportFormat::Json, ReportFormat::from);
    match &opts.out {
        Some(p) => emit_report(report, p, format)?,
        None => match format {
            ReportFormat::Json => io::stdout().write_all(report_json(report)?.as_bytes())?,
            ReportFormat::Csv => report_csv(report, io::stdout().lock())?,
        },
    }
    Ok(())
}

fn write_reports(reports: &[ExperimentReport], opts: &GlobalOpts) -> Result<()> {
    let mut w = output(opts.out.as_deref())?;
    match opts.format.unwrap_or(Format::Json) {
        Format::Json => {
            to_json(reports, &mut w)?;
            writeln!(w)?;
        }
        Format::Csv => reports_csv(reports, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn summarise(r: &ExperimentReport) {
    let name = r.variant.as_deref().unwrap_or("run");
    let done = r.folds.iter().filter(|f| f.metrics.is_some()).count();
    eprintln!("{name}: {done}/{} folds{}", r.folds.len(), if r.partial { " (partial)" } else { "" });
    if let Some(a) = &r.aggregate {
        for m in ["accuracy", "precision", "recall", "f_score", "g_mean", "auc"] {
            if let Some(v) = a.get(m) {
                eprintln!("  {m:<10} {:.4} ± {:.4}", v.mean, v.std);
            }
        }
    }
    let o = &r.overlap_ratios;
    if let (Some(b), Some(a)) = (&o.before, &o.after) {
        eprintln!("  overlap    {:.2}% -> {:.2}%", 100.0 * b.dataset, 100.0 * a.dataset);
    }
}

fn run_cmd(opts: &GlobalOpts) -> Result<bool> {
    let config = opts.run_config()?;
    let (ds, _) = load(&RunConfig { scale: false, ..config.clone() })?;
    let report = run_cv(&ds, &config)?;
    write_report(&report, opts)?;
    summarise(&report);
    Ok(report.partial)
}

fn ablate_noise_cmd(opts: &GlobalOpts, fractions: Option<&[f64]>) -> Result<bool> {
    let config = opts.run_config()?;
    let (ds, _) = load(&RunConfig { scale: false, ..config.clone() })?;
    let reports = ablate_noise(&ds, &config, fractions.unwrap_or(&DEFAULT_NOISE_FRACTIONS))?;
    write_reports(&reports, opts)?;
    reports.iter().for_each(summarise);
    Ok(reports.iter().any(|r| r.partial))
}

fn ablate_components_cmd(opts: &GlobalOpts) -> Result<bool> {
    let config = opts.run_config()?;
    let (ds, _) = load(&RunConfig { scale: false, ..config.clone() })?;
    let reports = ablate_components(&ds, &config)?;
    write_reports(&reports, opts)?;
    reports.iter().for_each(summarise);
    Ok(reports.iter().any(|r| r.partial))
}

fn report_cmd(opts: &GlobalOpts, input: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", input.display()))?;
    let reports: Vec<ExperimentReport> = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    if reports.is_empty() {
        bail!("{} holds no reports", input.display());
    }
    reports.iter().for_each(summarise);
    if opts.format.is_some() || opts.out.is_some() {
        if reports.len() == 1 {
            write_report(&reports[0], opts)?;
        } else {
            write_reports(&reports, opts)?;
        }
    }
    Ok(reports.iter().any(|r| r.partial))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Partition => partition_cmd(&cli.opts),
        Command::Clean => clean_cmd(&cli.opts),
        Command::Balance => balance_cmd(&cli.opts),
        Command::Run => run_cmd(&cli.opts),
        Command::AblateNoise { fractions } => ablate_noise_cmd(&cli.opts, fractions.as_deref()),
        Command::AblateComponents => ablate_components_cmd(&cli.opts),
        Command::Report { input } => report_cmd(&cli.opts, input),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
