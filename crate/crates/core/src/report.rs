//! Metric tables for one or more source/target pairs.
//!
//! Rows can be computed from feature files or carry precomputed values. A
//! comparison group `[a, b]` pits row `b` against row `a`; for every metric on
//! which `b` is strictly better (lower FID/KID, higher precision/recall) both
//! cells of that metric are rendered bold-italic in markdown.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{normalize, read_features, FeatureSet};
use crate::kid::{self, KidConfig, DEFAULT_NUM_SUBSETS};
use crate::moments::{self, FidMode};
use crate::pnr::{self, PrConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub extractor: String,
    pub source: String,
    pub fid: f64,
    pub kid_mean: f64,
    #[serde(default)]
    pub kid_stddev: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
    #[serde(default)]
    pub normalized: bool,
    /// Render FID and KID multiplied by 1000. Stored values stay unscaled.
    #[serde(default)]
    pub scale_1000: bool,
    /// `[first, second]` row indices competing on the same extractor.
    #[serde(default)]
    pub groups: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Fid,
    Kid,
    Precision,
    Recall,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Fid, Metric::Kid, Metric::Precision, Metric::Recall];

    pub fn lower_is_better(self) -> bool {
        matches!(self, Metric::Fid | Metric::Kid)
    }

    pub fn value(self, row: &ReportRow) -> f64 {
        match self {
            Metric::Fid => row.fid,
            Metric::Kid => row.kid_mean,
            Metric::Precision => row.precision,
            Metric::Recall => row.recall,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::InvalidConfig(format!(
                "unknown format {other:?} (expected json or markdown)"
            ))),
        }
    }
}

impl MetricReport {
    pub fn validate(&self) -> Result<()> {
        for &[a, b] in &self.groups {
            if a >= self.rows.len() || b >= self.rows.len() || a == b {
                return Err(Error::InvalidConfig(format!(
                    "comparison group [{a}, {b}] is invalid for {} rows",
                    self.rows.len()
                )));
            }
        }
        for row in &self.rows {
            if Metric::ALL.iter().any(|m| !m.value(row).is_finite()) || !row.kid_stddev.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "row {}/{} has a non-finite metric",
                    row.extractor, row.source
                )));
            }
        }
        Ok(())
    }

    /// Whether the second row of `group` is strictly better on `metric`.
    pub fn second_is_better(&self, group: [usize; 2], metric: Metric) -> bool {
        let a = metric.value(&self.rows[group[0]]);
        let b = metric.value(&self.rows[group[1]]);
        if metric.lower_is_better() {
            b < a
        } else {
            b > a
        }
    }

    /// Per-row, per-metric emphasis flags (indexed as [`Metric::ALL`]).
    pub fn markers(&self) -> Vec<[bool; 4]> {
        let mut marks = vec![[false; 4]; self.rows.len()];
        for &group in &self.groups {
            if group.iter().any(|&i| i >= self.rows.len()) {
                continue;
            }
            for metric in Metric::ALL {
                if self.second_is_better(group, metric) {
                    marks[group[0]][metric.index()] = true;
                    marks[group[1]][metric.index()] = true;
                }
            }
        }
        marks
    }

    /// Value as rendered in markdown, before emphasis.
    pub fn display_value(&self, row: &ReportRow, metric: Metric) -> String {
        let scale = if self.scale_1000 { 1000.0 } else { 1.0 };
        match metric {
            Metric::Fid => format!("{:.3}", row.fid * scale),
            Metric::Kid => format!("{:.4}", row.kid_mean * scale),
            Metric::Precision => format!("{:.3}", row.precision),
            Metric::Recall => format!("{:.3}", row.recall),
        }
    }
}

fn escape_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Renders `report` as JSON (raw, unscaled values) or as a markdown table.
pub fn render_report(report: &MetricReport, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Markdown => render_markdown(report),
    }
}

fn render_markdown(report: &MetricReport) -> String {
    let star = if report.scale_1000 { "*" } else { "" };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "| Feature Extractor | Source Data | FID{star} ↓ | KID{star} ↓ | P ↑ | R ↑ |"
    );
    out.push_str("|:---|:---|---:|---:|---:|---:|\n");
    let marks = report.markers();
    for (row, mark) in report.rows.iter().zip(&marks) {
        let _ = write!(out, "| {} | {} |", escape_cell(&row.extractor), escape_cell(&row.source));
        for metric in Metric::ALL {
            let v = report.display_value(row, metric);
            if mark[metric.index()] {
                let _ = write!(out, " ***{v}*** |");
            } else {
                let _ = write!(out, " {v} |");
            }
        }
        out.push('\n');
    }
    out.push('\n');
    if report.normalized {
        out.push_str("Features were L2-normalized before scoring.\n");
    }
    if report.scale_1000 {
        out.push_str("\\* FID and KID are shown ×1000.\n");
    }
    if !report.groups.is_empty() {
        out.push_str(
            "***Bold italic***: within a comparison group, the second source scores strictly better.\n",
        );
    }
    out.push_str("↓ lower is better, ↑ higher is better; P = precision, R = recall.\n");
    out
}

/// KID settings before the subset size is resolved against the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KidSettings {
    /// `None` means `min(1000, source_count, target_count)`.
    #[serde(default)]
    pub subset_size: Option<usize>,
    #[serde(default = "default_num_subsets")]
    pub num_subsets: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_num_subsets() -> usize {
    DEFAULT_NUM_SUBSETS
}

impl Default for KidSettings {
    fn default() -> Self {
        KidSettings {
            subset_size: None,
            num_subsets: DEFAULT_NUM_SUBSETS,
            seed: 0,
        }
    }
}

impl KidSettings {
    pub fn resolve(&self, source_count: usize, target_count: usize) -> KidConfig {
        let base = KidConfig::for_counts(source_count, target_count);
        KidConfig {
            subset_size: self.subset_size.unwrap_or(base.subset_size),
            num_subsets: self.num_subsets,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairOptions {
    /// L2-normalize both sets before scoring.
    pub normalize: bool,
    pub fid_mode: FidMode,
    pub kid: KidSettings,
    pub pr: PrConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub fid: f64,
    pub kid_mean: f64,
    pub kid_stddev: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Computes all metrics for one source/target pair.
pub fn evaluate_pair(source: &FeatureSet, target: &FeatureSet, opts: &PairOptions) -> Result<PairMetrics> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: source.dim(),
            right: target.dim(),
        });
    }
    opts.pr.validate()?;
    let kid_cfg = opts.kid.resolve(source.count(), target.count());
    kid_cfg.validate(source.count(), target.count())?;

    let (source, target) = if opts.normalize {
        (normalize(source)?, normalize(target)?)
    } else {
        (source.clone(), target.clone())
    };
    let fid = moments::fid(&source, &target, opts.fid_mode)?;
    let kid = kid::kid(&source, &target, &kid_cfg)?;
    let pr = pnr::precision_recall(&source, &target, &opts.pr)?;
    Ok(PairMetrics {
        fid,
        kid_mean: kid.mean,
        kid_stddev: kid.stddev,
        precision: pr.precision,
        recall: pr.recall,
    })
}

/// Loads two feature files and scores them. The row's extractor column is the
/// target label and its source column the source label (file stems).
pub fn run_pair(source: &Path, target: &Path, opts: &PairOptions) -> Result<ReportRow> {
    let (s, t) = rayon::join(|| read_features(source), || read_features(target));
    let (s, t) = (s?, t?);
    let m = evaluate_pair(&s, &t, opts)?;
    Ok(row_from(t.label().to_string(), s.label().to_string(), m))
}

fn row_from(extractor: String, source: String, m: PairMetrics) -> ReportRow {
    ReportRow {
        extractor,
        source,
        fid: m.fid,
        kid_mean: m.kid_mean,
        kid_stddev: m.kid_stddev,
        precision: m.precision,
        recall: m.recall,
    }
}

/// One row of a report configuration: either feature files or stored values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    pub extractor: String,
    pub source: String,
    #[serde(default)]
    pub source_path: Option<PathBuf>,
    /// Falls back to the configuration's `target`.
    #[serde(default)]
    pub target_path: Option<PathBuf>,
    #[serde(default)]
    pub metrics: Option<PairMetrics>,
}

/// JSON configuration for the `report` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    #[serde(default)]
    pub target: Option<PathBuf>,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub scale_1000: bool,
    #[serde(default)]
    pub fid_mode: FidMode,
    #[serde(default)]
    pub kid: KidSettings,
    #[serde(default)]
    pub pr: PrConfig,
    pub rows: Vec<RowSpec>,
    #[serde(default)]
    pub groups: Vec<[usize; 2]>,
}

impl ReportConfig {
    /// Reads a configuration; relative paths resolve against its directory.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ReportConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(t) = cfg.target.as_mut() {
            resolve(t);
        }
        for row in &mut cfg.rows {
            if let Some(p) = row.source_path.as_mut() {
                resolve(p);
            }
            if let Some(p) = row.target_path.as_mut() {
                resolve(p);
            }
        }
        Ok(cfg)
    }

    pub fn pair_options(&self) -> PairOptions {
        PairOptions {
            normalize: self.normalize,
            fid_mode: self.fid_mode,
            kid: self.kid,
            pr: self.pr,
        }
    }
}

/// Evaluates every row of `cfg` (rows run concurrently) into a report.
pub fn run_report(cfg: &ReportConfig) -> Result<MetricReport> {
    let opts = cfg.pair_options();
    let rows = cfg
        .rows
        .par_iter()
        .map(|spec| {
            if let Some(m) = spec.metrics {
                return Ok(row_from(spec.extractor.clone(), spec.source.clone(), m));
            }
            let source = spec.source_path.as_ref().ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "row {}/{} has neither metrics nor source_path",
                    spec.extractor, spec.source
                ))
            })?;
            let target = spec.target_path.as_ref().or(cfg.target.as_ref()).ok_or_else(|| {
                Error::InvalidConfig(format!("row {}/{} has no target", spec.extractor, spec.source))
            })?;
            let mut row = run_pair(source, target, &opts)?;
            row.extractor = spec.extractor.clone();
            row.source = spec.source.clone();
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = MetricReport {
        rows,
        normalized: cfg.normalize,
        scale_1000: cfg.scale_1000,
        groups: cfg.groups.clone(),
    };
    report.validate()?;
    Ok(report)
}
