//! Repeated-run experiments over the synthetic datasets: per-point estimate
//! tables, binned profiles, band bias summaries and bias-order regressions.

mod order;
mod profile;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{reference_boundary_distance, GeneratorKind, GeneratorSpec, LabeledCloud};
use crate::error::{Error, Result};
use crate::estimators::{DensityEstimator, EstimateBundle};
use crate::kernel::{erf, KernelParams, RatioForm};
use crate::pointcloud::{AccumulatorSpec, PointCloud};
use crate::tuning::{tune_with_rule, TuningGrid, TuningRule};

pub use order::{bias_order_study, OrderRow, OrderStudyConfig, OrderStudyReport, SlopeFit};
pub use profile::{profile_by_position, profile_mode, radial_profile, ProfileBin};

/// Kernel truncation used by the harness; sums are exact to about `N * 1e-12 / pi^(m/2)`.
pub const DEFAULT_CUTOFF_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionChoice {
    Fixed(f64),
    /// Tuned on the first repeat's data and rounded to an integer.
    Auto,
}

impl std::str::FromStr for DimensionChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(DimensionChoice::Auto);
        }
        let m: f64 = s.trim().parse().map_err(|_| {
            Error::domain(format!("dimension must be a number or `auto`, got `{s}`"))
        })?;
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::domain(format!(
                "dimension must be positive, got {m}"
            )));
        }
        Ok(DimensionChoice::Fixed(m))
    }
}

/// Estimators reported by the harness; `True` is the analytic density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    True,
    Std,
    Bnd,
    Cut,
    Cut2,
}

impl Estimator {
    pub const ESTIMATES: [Estimator; 4] = [
        Estimator::Std,
        Estimator::Bnd,
        Estimator::Cut,
        Estimator::Cut2,
    ];
    pub const ALL: [Estimator; 5] = [
        Estimator::True,
        Estimator::Std,
        Estimator::Bnd,
        Estimator::Cut,
        Estimator::Cut2,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Estimator::True => "f_true",
            Estimator::Std => "f_std",
            Estimator::Bnd => "f_bnd",
            Estimator::Cut => "f_cut",
            Estimator::Cut2 => "f_cut2",
        }
    }
}

/// Named point sets for bias summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// Boundary distance at most `h/2`.
    Boundary,
    /// Boundary distance at least `3h`.
    Interior,
}

impl Band {
    pub fn contains(self, b: f64, h: f64) -> bool {
        match self {
            Band::Boundary => b <= 0.5 * h,
            Band::Interior => b >= 3.0 * h,
        }
    }
}

impl std::str::FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "boundary" => Ok(Band::Boundary),
            "interior" => Ok(Band::Interior),
            other => Err(Error::domain(format!("unknown band `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    pub h: f64,
    pub m: DimensionChoice,
    pub repeats: usize,
    pub bins: usize,
    pub output_dir: Option<PathBuf>,
    /// Replace negative estimates by zero in profiles only.
    pub clamp_negative: bool,
    pub cutoff_epsilon: f64,
    pub tuning_rule: TuningRule,
    #[serde(default)]
    pub ratio_form: RatioForm,
}

impl ExperimentConfig {
    pub fn new(generator: GeneratorSpec, h: f64, m: DimensionChoice) -> Self {
        Self {
            generator,
            h,
            m,
            repeats: 1,
            bins: 20,
            output_dir: None,
            clamp_negative: false,
            cutoff_epsilon: DEFAULT_CUTOFF_EPSILON,
            tuning_rule: TuningRule::Argmax,
            ratio_form: RatioForm::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.repeats == 0 {
            return Err(Error::domain("repeats must be at least 1"));
        }
        if self.bins < 2 {
            return Err(Error::domain(format!(
                "bins must be at least 2, got {}",
                self.bins
            )));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::domain(format!(
                "bandwidth must be positive, got {}",
                self.h
            )));
        }
        if let DimensionChoice::Fixed(m) = self.m {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::domain(format!(
                    "dimension must be positive, got {m}"
                )));
            }
        }
        AccumulatorSpec::truncated(self.cutoff_epsilon)?;
        Ok(())
    }

    /// Seed of repeat `r`.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.generator.seed.wrapping_add(r as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub repeat: usize,
    pub index: usize,
    pub x: Vec<f64>,
    pub f_true: f64,
    pub f_std: f64,
    pub f_bnd: f64,
    pub f_cut_h: f64,
    pub f_cut_2h: f64,
    pub f_cut2: f64,
    pub b_hat: f64,
    pub b_true: Option<f64>,
    pub eta: Vec<f64>,
}

impl PointRecord {
    pub fn value(&self, e: Estimator) -> f64 {
        match e {
            Estimator::True => self.f_true,
            Estimator::Std => self.f_std,
            Estimator::Bnd => self.f_bnd,
            Estimator::Cut => self.f_cut_h,
            Estimator::Cut2 => self.f_cut2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    /// Quantity binned along, e.g. `radius` or `x1`.
    pub axis: String,
    pub estimator: Estimator,
    pub bins: Vec<ProfileBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub estimator: Estimator,
    pub mean_value: f64,
    pub mean_true: f64,
    /// Mean of `estimate - truth`.
    pub mean_error: f64,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub band: Band,
    pub count: usize,
    pub stats: Vec<EstimatorStats>,
}

impl RegionSummary {
    pub fn stats_for(&self, e: Estimator) -> Option<&EstimatorStats> {
        self.stats.iter().find(|s| s.estimator == e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub m_used: f64,
    pub sample_counts: Vec<usize>,
    pub per_point: Vec<PointRecord>,
    pub profiles: Vec<Profile>,
    pub bias_summary: Vec<RegionSummary>,
}

impl ExperimentReport {
    pub fn profile(&self, e: Estimator) -> Option<&Profile> {
        self.profiles.iter().find(|p| p.estimator == e)
    }

    pub fn region(&self, band: Band) -> Option<&RegionSummary> {
        self.bias_summary.iter().find(|r| r.band == band)
    }

    /// Writes `per_point.csv` and `summary.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("per_point.csv");
        let json = dir.join("summary.json");
        write_file(&csv, |w| self.write_per_point_csv(w))?;
        write_file(&json, |w| {
            serde_json::to_writer_pretty(&mut *w, &self.summary())
                .map_err(std::io::Error::other)?;
            writeln!(w)
        })?;
        Ok((csv, json))
    }

    pub fn summary(&self) -> ExperimentSummary<'_> {
        ExperimentSummary {
            config: &self.config,
            seeds: &self.seeds,
            m_used: self.m_used,
            sample_counts: &self.sample_counts,
            profiles: &self.profiles,
            bias_summary: &self.bias_summary,
        }
    }

    pub fn write_per_point_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        let dim = self.per_point.first().map_or(0, |r| r.x.len());
        let mut header = vec!["repeat".to_string(), "index".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.extend(
            [
                "f_true", "f_std", "f_bnd", "f_cut", "f_cut_2h", "f_cut2", "b_hat", "b_true",
            ]
            .map(String::from),
        );
        header.extend((1..=dim).map(|i| format!("eta{i}")));
        writeln!(w, "{}", header.join(","))?;
        for r in &self.per_point {
            let mut row = vec![r.repeat.to_string(), r.index.to_string()];
            row.extend(r.x.iter().map(f64::to_string));
            row.extend(
                [
                    r.f_true, r.f_std, r.f_bnd, r.f_cut_h, r.f_cut_2h, r.f_cut2, r.b_hat,
                ]
                .map(fmt_value),
            );
            row.push(r.b_true.map(fmt_value).unwrap_or_default());
            row.extend(r.eta.iter().copied().map(fmt_value));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Report without the per-point table, for JSON output.
#[derive(Debug, Serialize)]
pub struct ExperimentSummary<'a> {
    pub config: &'a ExperimentConfig,
    pub seeds: &'a [u64],
    pub m_used: f64,
    pub sample_counts: &'a [usize],
    pub profiles: &'a [Profile],
    pub bias_summary: &'a [RegionSummary],
}

/// Writes `inf`, `-inf` and `nan` literally, other values in shortest form.
/// Per-query estimates as CSV: `x1..xn, f_std, f_bnd, f_cut, f_cut2, b_hat,
/// eta1..etan`, with `inf` marking interior points in `b_hat`.
pub fn write_estimates_csv(
    path: impl AsRef<Path>,
    queries: &PointCloud<f64>,
    bundles: &[EstimateBundle<f64>],
) -> Result<()> {
    if bundles.len() != queries.len() {
        return Err(Error::DimensionMismatch {
            expected: queries.len(),
            found: bundles.len(),
        });
    }
    let n = queries.dim();
    write_file(path.as_ref(), |w| {
        let mut header: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
        header.extend(["f_std", "f_bnd", "f_cut", "f_cut2", "b_hat"].map(String::from));
        header.extend((1..=n).map(|k| format!("eta{k}")));
        writeln!(w, "{}", header.join(","))?;
        for (x, b) in queries.points().zip(bundles) {
            let mut row: Vec<String> = x.iter().map(|&v| fmt_value(v)).collect();
            row.extend([b.f_std, b.f_bnd, b.f_cut_h, b.f_cut2, b.boundary.b_hat].map(fmt_value));
            row.extend(b.boundary.eta_hat.iter().map(|&v| fmt_value(v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })
}

pub(crate) fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        v.to_string()
    }
}

pub(crate) fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Coordinate that profiles are binned along.
pub fn profile_axis(kind: GeneratorKind) -> (&'static str, fn(&[f64]) -> f64) {
    fn planar_radius(x: &[f64]) -> f64 {
        x[0].hypot(x[1])
    }
    fn first(x: &[f64]) -> f64 {
        x[0]
    }
    fn angle(x: &[f64]) -> f64 {
        x[1].atan2(x[0])
    }
    match kind {
        GeneratorKind::HalfplaneGaussian | GeneratorKind::ExponentialHalfLine => ("x1", first),
        GeneratorKind::UnitCircle => ("angle", angle),
        _ => ("radius", planar_radius),
    }
}

/// Full estimator pipeline on one labeled cloud, queried at its own samples.
pub fn estimate_cloud(
    data: &LabeledCloud<f64>,
    h: f64,
    m: f64,
    cutoff_epsilon: f64,
    ratio_form: RatioForm,
) -> Result<Vec<EstimateBundle<f64>>> {
    let params = KernelParams::new(h, m)?;
    let est = DensityEstimator::new(
        &data.cloud,
        params,
        AccumulatorSpec::truncated(cutoff_epsilon)?,
    )?
    .with_ratio_form(ratio_form);
    est.estimate_all(&data.cloud)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut seeds = Vec::with_capacity(config.repeats);
    let mut sample_counts = Vec::with_capacity(config.repeats);
    let mut per_point = Vec::new();
    let mut m_used = match config.m {
        DimensionChoice::Fixed(m) => Some(m),
        DimensionChoice::Auto => None,
    };
    for repeat in 0..config.repeats {
        let seed = config.repeat_seed(repeat);
        let wrap = |e: Error| Error::Repeat {
            repeat,
            source: Box::new(e),
        };
        let data = config.generator.with_seed(seed).generate().map_err(wrap)?;
        let m = match m_used {
            Some(m) => m,
            None => {
                let t = tune_with_rule(&data.cloud, &TuningGrid::default(), config.tuning_rule)
                    .map_err(wrap)?;
                log::info!("tuned dimension {} (h* = {})", t.m_hat, t.h_star);
                *m_used.insert(t.rounded_dimension())
            }
        };
        let bundles = estimate_cloud(&data, config.h, m, config.cutoff_epsilon, config.ratio_form)
            .map_err(wrap)?;
        per_point.extend(records(repeat, &data, &bundles));
        seeds.push(seed);
        sample_counts.push(data.len());
        log::debug!("repeat {repeat}: seed {seed}, {} points", data.len());
    }
    let kind = config.generator.kind;
    let profiles = build_profiles(&per_point, kind, config.bins, config.clamp_negative)?;
    let bias_summary = summarize_bands(&per_point, kind, config.h);
    let report = ExperimentReport {
        config: config.clone(),
        seeds,
        m_used: m_used.unwrap_or(f64::NAN),
        sample_counts,
        per_point,
        profiles,
        bias_summary,
    };
    if let Some(dir) = &config.output_dir {
        report.save(dir)?;
    }
    Ok(report)
}

fn records<'a>(
    repeat: usize,
    data: &'a LabeledCloud<f64>,
    bundles: &'a [EstimateBundle<f64>],
) -> impl Iterator<Item = PointRecord> + 'a {
    bundles.iter().enumerate().map(move |(i, b)| PointRecord {
        repeat,
        index: i,
        x: data.cloud.point(i).to_vec(),
        f_true: data.true_density[i],
        f_std: b.f_std,
        f_bnd: b.f_bnd,
        f_cut_h: b.f_cut_h,
        f_cut_2h: b.f_cut_2h,
        f_cut2: b.f_cut2,
        b_hat: b.boundary.b_hat,
        b_true: data.boundary_distance_true.as_ref().map(|d| d[i]),
        eta: b.boundary.eta_hat.clone(),
    })
}

fn build_profiles(
    records: &[PointRecord],
    kind: GeneratorKind,
    bins: usize,
    clamp: bool,
) -> Result<Vec<Profile>> {
    let (axis, pos_fn) = profile_axis(kind);
    let positions: Vec<f64> = records.iter().map(|r| pos_fn(&r.x)).collect();
    Estimator::ALL
        .into_iter()
        .map(|e| {
            let values: Vec<f64> = records
                .iter()
                .map(|r| {
                    let v = r.value(e);
                    if clamp {
                        v.max(0.0)
                    } else {
                        v
                    }
                })
                .collect();
            Ok(Profile {
                axis: axis.to_string(),
                estimator: e,
                bins: profile_by_position(&positions, &values, bins)?,
            })
        })
        .collect()
}

/// Per-band error statistics over `records`; bands are omitted when no
/// boundary distance is available or no point falls inside.
pub fn summarize_bands(records: &[PointRecord], kind: GeneratorKind, h: f64) -> Vec<RegionSummary> {
    let dist: Vec<Option<f64>> = records
        .iter()
        .map(|r| reference_boundary_distance(kind, &r.x, r.b_true))
        .collect();
    [Band::Boundary, Band::Interior]
        .into_iter()
        .filter_map(|band| {
            let members: Vec<&PointRecord> = records
                .iter()
                .zip(&dist)
                .filter(|(_, d)| matches!(d, Some(b) if band.contains(*b, h)))
                .map(|(r, _)| r)
                .collect();
            summarize(&members).map(|stats| RegionSummary {
                band,
                count: members.len(),
                stats,
            })
        })
        .collect()
}

/// Error statistics of each estimator over a set of records.
pub fn summarize(records: &[&PointRecord]) -> Option<Vec<EstimatorStats>> {
    if records.is_empty() {
        return None;
    }
    let n = records.len() as f64;
    let mean_true = records.iter().map(|r| r.f_true).sum::<f64>() / n;
    Some(
        Estimator::ESTIMATES
            .into_iter()
            .map(|e| {
                let errs: Vec<f64> = records.iter().map(|r| r.value(e) - r.f_true).collect();
                EstimatorStats {
                    estimator: e,
                    mean_value: records.iter().map(|r| r.value(e)).sum::<f64>() / n,
                    mean_true,
                    mean_error: errs.iter().sum::<f64>() / n,
                    mean_abs_error: errs.iter().map(|v| v.abs()).sum::<f64>() / n,
                    max_abs_error: errs.iter().fold(0.0, |a, v| a.max(v.abs())),
                }
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDistanceRow {
    pub b_true: f64,
    pub b_hat: f64,
    pub erf_true: f64,
    pub erf_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDistanceReport {
    pub rows: Vec<BoundaryDistanceRow>,
    /// Pearson correlation of `erf(b_true/h)` with `erf(b_hat/h)`.
    pub correlation: f64,
}

/// True against recovered boundary distance, raw and through `erf(./h)`.
pub fn boundary_distance_report(report: &ExperimentReport) -> Result<BoundaryDistanceReport> {
    let h = report.config.h;
    let rows = report
        .per_point
        .iter()
        .map(|r| {
            let b_true = r.b_true.ok_or_else(|| {
                Error::MissingBoundaryDistance(report.config.generator.kind.to_string())
            })?;
            Ok(BoundaryDistanceRow {
                b_true,
                b_hat: r.b_hat,
                erf_true: erf(b_true / h),
                erf_hat: erf(r.b_hat / h),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.erf_true).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.erf_hat).collect();
    Ok(BoundaryDistanceReport {
        correlation: pearson(&xs, &ys),
        rows,
    })
}

pub(crate) fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}
