//! `genmetrics` command-line tool.
//!
//! Results go to stdout as JSON (or markdown for `report --format markdown`).
//! Failures print `{"error": {"code": ..., "message": ...}}` to stderr and exit
//! with 2 for bad input or 1 for internal/numerical failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use genmetrics::report::KidSettings;
use genmetrics::{
    features, fid, kid, normalize, precision_recall, read_features, read_header, render_report, run_pair,
    run_report, sample_gaussian, write_features, Error, ErrorKind, FeatureSet, FidMode, Format, GaussianSpec,
    MetricReport, PairOptions, PrConfig, ReportConfig,
};
use serde_json::json;

const THREADS_ENV: &str = "GENMETRICS_THREADS";

#[derive(Parser)]
#[command(name = "genmetrics", version, about = "FID, KID and precision/recall between feature sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an L2-normalized copy of a feature file.
    Normalize { input: PathBuf, output: PathBuf },
    /// Fréchet distance between two feature files.
    Fid {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Product)]
        fid_mode: ModeArg,
    },
    /// Kernel distance between two feature files.
    Kid {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        kid: KidArgs,
    },
    /// k-NN precision and recall of a source file against a target file.
    Pr {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        pr: PrArgs,
    },
    /// All metrics, for one pair or for a JSON report configuration.
    Report(ReportArgs),
    /// Sample a Gaussian feature file from a JSON spec.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Validate a feature file and print its shape and norm statistics.
    Inspect { path: PathBuf },
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// L2-normalize both sets first.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct KidArgs {
    /// Rows per subset [default: min(1000, counts)].
    #[arg(long)]
    kid_subset_size: Option<usize>,
    /// Number of subsets [default: 100].
    #[arg(long)]
    kid_subsets: Option<usize>,
    /// Subset sampling seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PrArgs {
    /// Neighbour rank defining each ball [default: 3].
    #[arg(long)]
    k: Option<usize>,
    /// Multiplier on the squared radius [default: 1].
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON report configuration; replaces --source/--target.
    #[arg(long, conflicts_with_all = ["source", "target"])]
    config: Option<PathBuf>,
    #[arg(long, requires = "target")]
    source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    #[arg(long)]
    normalize: bool,
    #[arg(long, value_enum)]
    fid_mode: Option<ModeArg>,
    #[command(flatten)]
    kid: KidArgs,
    #[command(flatten)]
    pr: PrArgs,
    /// Show FID and KID multiplied by 1000.
    #[arg(long = "scale-1000")]
    scale_1000: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Product,
    Elementwise,
}

impl From<ModeArg> for FidMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Product => FidMode::Product,
            ModeArg::Elementwise => FidMode::Elementwise,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Markdown,
}

impl KidArgs {
    fn apply(&self, mut base: KidSettings) -> KidSettings {
        if self.kid_subset_size.is_some() {
            base.subset_size = self.kid_subset_size;
        }
        if let Some(n) = self.kid_subsets {
            base.num_subsets = n;
        }
        if let Some(seed) = self.seed {
            base.seed = seed;
        }
        base
    }
}

impl PrArgs {
    fn apply(&self, mut base: PrConfig) -> PrConfig {
        if let Some(k) = self.k {
            base.k = k;
        }
        if let Some(q) = self.q {
            base.q = q;
        }
        base
    }
}

fn load_pair(args: &PairArgs) -> genmetrics::Result<(FeatureSet, FeatureSet)> {
    let (s, t) = rayon::join(|| read_features(&args.source), || read_features(&args.target));
    let (s, t) = (s?, t?);
    if args.normalize {
        Ok((normalize(&s)?, normalize(&t)?))
    } else {
        Ok((s, t))
    }
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON value serializes");
    s.push('\n');
    s
}

fn configure_threads() -> genmetrics::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {threads} worker threads: {e}")))
}

fn inspect(path: &Path) -> genmetrics::Result<serde_json::Value> {
    let (header, file_len) = read_header(path)?;
    let set = read_features(path)?;
    let norms = features::row_norms(&set);
    let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let unit = norms.iter().all(|n| (n - 1.0).abs() <= features::UNIT_NORM_TOLERANCE);
    Ok(json!({
        "path": path,
        "label": set.label(),
        "dtype_code": header.dtype_code,
        "count": set.count(),
        "dim": set.dim(),
        "file_bytes": file_len,
        "valid": true,
        "min_row_norm": min,
        "max_row_norm": max,
        "zero_norm_rows": norms.iter().filter(|&&n| n == 0.0).count(),
        "unit_normalized": unit,
    }))
}

fn report(args: &ReportArgs) -> genmetrics::Result<String> {
    let format = match args.format {
        FormatArg::Json => Format::Json,
        FormatArg::Markdown => Format::Markdown,
    };
    let report = if let Some(path) = &args.config {
        let mut cfg = ReportConfig::from_json_file(path)?;
        cfg.normalize |= args.normalize;
        cfg.scale_1000 |= args.scale_1000;
        if let Some(m) = args.fid_mode {
            cfg.fid_mode = m.into();
        }
        cfg.kid = args.kid.apply(cfg.kid);
        cfg.pr = args.pr.apply(cfg.pr);
        run_report(&cfg)?
    } else {
        let (Some(source), Some(target)) = (&args.source, &args.target) else {
            return Err(Error::InvalidConfig("report needs --config or --source and --target".into()));
        };
        let opts = PairOptions {
            normalize: args.normalize,
            fid_mode: args.fid_mode.map(Into::into).unwrap_or_default(),
            kid: args.kid.apply(KidSettings::default()),
            pr: args.pr.apply(PrConfig::default()),
        };
        let report = MetricReport {
            rows: vec![run_pair(source, target, &opts)?],
            normalized: args.normalize,
            scale_1000: args.scale_1000,
            groups: vec![],
        };
        report.validate()?;
        report
    };
    Ok(render_report(&report, format))
}

fn run(cli: Cli) -> genmetrics::Result<String> {
    configure_threads()?;
    match cli.command {
        Command::Normalize { input, output } => {
            let set = normalize(&read_features(&input)?)?;
            write_features(&set, &output)?;
            Ok(to_json(&json!({
                "input": input,
                "output": output,
                "count": set.count(),
                "dim": set.dim(),
            })))
        }
        Command::Fid { pair, fid_mode } => {
            let (s, t) = load_pair(&pair)?;
            let mode: FidMode = fid_mode.into();
            let value = fid(&s, &t, mode)?;
            Ok(to_json(&json!({
                "source": s.label(),
                "target": t.label(),
                "normalized": pair.normalize,
                "fid_mode": mode,
                "fid": value,
            })))
        }
        Command::Kid { pair, kid: args } => {
            let (s, t) = load_pair(&pair)?;
            let cfg = args.apply(KidSettings::default()).resolve(s.count(), t.count());
            let score = kid(&s, &t, &cfg)?;
            Ok(to_json(&json!({
                "source": s.label(),
                "target": t.label(),
                "normalized": pair.normalize,
                "subset_size": cfg.subset_size,
                "num_subsets": cfg.num_subsets,
                "seed": cfg.seed,
                "kid_mean": score.mean,
                "kid_stddev": score.stddev,
            })))
        }
        Command::Pr { pair, pr: args } => {
            let (s, t) = load_pair(&pair)?;
            let cfg = args.apply(PrConfig::default());
            let score = precision_recall(&s, &t, &cfg)?;
            Ok(to_json(&json!({
                "source": s.label(),
                "target": t.label(),
                "normalized": pair.normalize,
                "k": cfg.k,
                "q": cfg.q,
                "precision": score.precision,
                "recall": score.recall,
            })))
        }
        Command::Report(args) => report(&args),
        Command::Synth { config, output } => {
            let spec = GaussianSpec::from_json_file(&config)?;
            let set = sample_gaussian(&spec)?;
            write_features(&set, &output)?;
            Ok(to_json(&json!({
                "output": output,
                "label": set.label(),
                "count": set.count(),
                "dim": set.dim(),
            })))
        }
        Command::Inspect { path } => Ok(to_json(&inspect(&path)?)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = json!({ "error": { "code": e.code(), "message": e.to_string() } });
            eprintln!("{body}");
            match e.kind() {
                ErrorKind::Input => ExitCode::from(2),
                ErrorKind::Internal => ExitCode::from(1),
            }
        }
    }
}
