use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_file, Band, Estimator, DEFAULT_CUTOFF_EPSILON};
use crate::datasets::{reference_boundary_distance, true_density, GeneratorSpec};
use crate::error::{Error, Result};
use crate::estimators::DensityEstimator;
use crate::kernel::{KernelParams, RatioForm};
use crate::pointcloud::{AccumulatorSpec, PointCloud};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStudyConfig {
    pub generator: GeneratorSpec,
    pub h_list: Vec<f64>,
    pub m: f64,
    pub repeats: usize,
    /// Fixed query points per bandwidth, spread over the band.
    pub queries: usize,
    pub band: Band,
    pub cutoff_epsilon: f64,
    #[serde(default)]
    pub ratio_form: RatioForm,
    pub output_dir: Option<PathBuf>,
}

impl OrderStudyConfig {
    pub fn new(generator: GeneratorSpec, h_list: Vec<f64>, m: f64, repeats: usize) -> Self {
        Self {
            generator,
            h_list,
            m,
            repeats,
            queries: 32,
            band: Band::Boundary,
            cutoff_epsilon: DEFAULT_CUTOFF_EPSILON,
            ratio_form: RatioForm::default(),
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.h_list.len() < 3 {
            return Err(Error::domain(format!(
                "order study needs at least 3 bandwidths, got {}",
                self.h_list.len()
            )));
        }
        if let Some(h) = self.h_list.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(Error::domain(format!(
                "bandwidth must be positive, got {h}"
            )));
        }
        if !(self.m > 0.0) {
            return Err(Error::domain(format!(
                "dimension must be positive, got {}",
                self.m
            )));
        }
        if self.repeats == 0 || self.queries == 0 {
            return Err(Error::domain("repeats and queries must be at least 1"));
        }
        if !self.generator.kind.has_boundary_distance() {
            return Err(Error::MissingBoundaryDistance(
                self.generator.kind.to_string(),
            ));
        }
        AccumulatorSpec::truncated(self.cutoff_epsilon)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorBias {
    pub estimator: Estimator,
    /// Mean over queries of the absolute repeat-averaged error.
    pub mean_abs_bias: f64,
    /// Repeat- and query-averaged signed error.
    pub mean_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub h: f64,
    pub queries: usize,
    pub biases: Vec<EstimatorBias>,
}

impl OrderRow {
    pub fn bias(&self, e: Estimator) -> Option<&EstimatorBias> {
        self.biases.iter().find(|b| b.estimator == e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub estimator: Estimator,
    /// Least-squares slope of `log(bias)` on `log(h)`; `None` with fewer than
    /// two usable bandwidths.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub used: usize,
    /// Bandwidths dropped because their bias was not positive.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStudyReport {
    pub config: OrderStudyConfig,
    pub seeds: Vec<u64>,
    pub rows: Vec<OrderRow>,
    pub slopes: Vec<SlopeFit>,
}

impl OrderStudyReport {
    pub fn slope(&self, e: Estimator) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.estimator == e)
            .and_then(|s| s.slope)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("order_study.json");
        write_file(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, self).map_err(std::io::Error::other)
        })?;
        Ok(path)
    }
}

/// Repeated estimation at fixed band queries for each bandwidth, with a
/// log-log fit of bias against `h` per estimator.
///
/// Query positions come from one extra dataset (seed `seed + repeats`) so no
/// query coincides with a sample of the repeats. Each repeat's dataset is
/// shared by all bandwidths.
pub fn bias_order_study(config: &OrderStudyConfig) -> Result<OrderStudyReport> {
    config.validate()?;
    let kind = config.generator.kind;
    let source = config
        .generator
        .with_seed(config.generator.seed.wrapping_add(config.repeats as u64))
        .generate()?;
    let query_sets: Vec<PointCloud<f64>> = config
        .h_list
        .iter()
        .map(|&h| {
            select_queries(
                &source.cloud,
                source.boundary_distance_true.as_deref(),
                kind,
                config,
                h,
            )
        })
        .collect::<Result<_>>()?;

    let estimates = Estimator::ESTIMATES;
    // sums[h][query][estimator] of signed error over repeats
    let mut sums: Vec<Vec<[f64; 4]>> = query_sets.iter().map(|q| vec![[0.0; 4]; q.len()]).collect();
    let spec = AccumulatorSpec::truncated(config.cutoff_epsilon)?;
    let mut seeds = Vec::with_capacity(config.repeats);
    for repeat in 0..config.repeats {
        let seed = config.generator.seed.wrapping_add(repeat as u64);
        let wrap = |e: Error| Error::Repeat {
            repeat,
            source: Box::new(e),
        };
        let data = config.generator.with_seed(seed).generate().map_err(wrap)?;
        for ((&h, queries), acc) in config.h_list.iter().zip(&query_sets).zip(&mut sums) {
            let est = DensityEstimator::new(&data.cloud, KernelParams::new(h, config.m)?, spec)
                .map_err(wrap)?
                .with_ratio_form(config.ratio_form);
            let bundles = est.estimate_all(queries).map_err(wrap)?;
            for ((b, q), slot) in bundles.iter().zip(queries.points()).zip(acc.iter_mut()) {
                let f = true_density(kind, q);
                let vals = [b.f_std, b.f_bnd, b.f_cut_h, b.f_cut2];
                for (s, v) in slot.iter_mut().zip(vals) {
                    *s += v - f;
                }
            }
        }
        seeds.push(seed);
        log::debug!("order study repeat {repeat} done");
    }

    let reps = config.repeats as f64;
    let rows: Vec<OrderRow> = config
        .h_list
        .iter()
        .zip(&sums)
        .map(|(&h, acc)| {
            let nq = acc.len() as f64;
            OrderRow {
                h,
                queries: acc.len(),
                biases: estimates
                    .iter()
                    .enumerate()
                    .map(|(k, &e)| EstimatorBias {
                        estimator: e,
                        mean_abs_bias: acc.iter().map(|s| (s[k] / reps).abs()).sum::<f64>() / nq,
                        mean_bias: acc.iter().map(|s| s[k] / reps).sum::<f64>() / nq,
                    })
                    .collect(),
            }
        })
        .collect();

    let slopes = estimates
        .iter()
        .map(|&e| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|r| r.bias(e).map(|b| (r.h, b.mean_abs_bias)))
                .collect();
            fit_slope(e, &pts)
        })
        .collect();

    let report = OrderStudyReport {
        config: config.clone(),
        seeds,
        rows,
        slopes,
    };
    if let Some(dir) = &config.output_dir {
        report.save(dir)?;
    }
    Ok(report)
}

fn select_queries(
    cloud: &PointCloud<f64>,
    labels: Option<&[f64]>,
    kind: crate::datasets::GeneratorKind,
    config: &OrderStudyConfig,
    h: f64,
) -> Result<PointCloud<f64>> {
    let mut candidates: Vec<(f64, usize)> = cloud
        .points()
        .enumerate()
        .filter_map(|(i, p)| {
            reference_boundary_distance(kind, p, labels.map(|l| l[i]))
                .filter(|&b| config.band.contains(b, h))
                .map(|b| (b, i))
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::Empty(format!(
            "no query candidates in the {:?} band at h = {h}",
            config.band
        )));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let q = config.queries.min(candidates.len());
    let n = candidates.len();
    let mut picked: Vec<usize> = (0..q)
        .map(|k| candidates[(2 * k + 1) * n / (2 * q)].1)
        .collect();
    picked.dedup();
    let mut coords = Vec::with_capacity(picked.len() * cloud.dim());
    for i in picked {
        coords.extend_from_slice(cloud.point(i));
    }
    PointCloud::from_flat(coords, cloud.dim())
}

/// Least-squares slope of `log(bias)` on `log(h)`, skipping nonpositive biases.
pub fn fit_slope(estimator: Estimator, points: &[(f64, f64)]) -> SlopeFit {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, b)| *b > 0.0 && b.is_finite())
        .map(|&(h, b)| (h.ln(), b.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    if excluded > 0 {
        log::warn!(
            "{excluded} nonpositive bias values excluded from the {} fit",
            estimator.column()
        );
    }
    let n = usable.len() as f64;
    let (slope, intercept) = if usable.len() >= 2 {
        let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let s = sxy / sxx;
        (Some(s), Some(my - s * mx))
    } else {
        (None, None)
    };
    SlopeFit {
        estimator,
        slope,
        intercept,
        used: usable.len(),
        excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::GeneratorKind;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.02, 0.04, 0.08, 0.16]
            .iter()
            .map(|&h| (h, 3.0 * h * h))
            .collect();
        let fit = fit_slope(Estimator::Cut2, &pts);
        assert!((fit.slope.unwrap() - 2.0).abs() < 1e-12);
        assert!((fit.intercept.unwrap() - 3f64.ln()).abs() < 1e-12);
        assert_eq!((fit.used, fit.excluded), (4, 0));
    }

    #[test]
    fn nonpositive_biases_are_excluded() {
        let fit = fit_slope(
            Estimator::Cut,
            &[(0.1, 0.1), (0.2, 0.0), (0.4, 0.4), (0.8, -1.0)],
        );
        assert_eq!((fit.used, fit.excluded), (2, 2));
        assert!((fit.slope.unwrap() - 1.0).abs() < 1e-12);
        let none = fit_slope(Estimator::Cut, &[(0.1, 0.0), (0.2, 0.3)]);
        assert!(none.slope.is_none());
    }

    #[test]
    fn small_study_runs_and_is_deterministic() {
        let g = GeneratorSpec::proposals(GeneratorKind::ExponentialHalfLine, 4000, 3).unwrap();
        let mut c = OrderStudyConfig::new(g, vec![0.1, 0.2, 0.4], 1.0, 3);
        c.queries = 8;
        let a = bias_order_study(&c).unwrap();
        let b = bias_order_study(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3);
        assert_eq!(a.seeds, vec![3, 4, 5]);
        for r in &a.rows {
            assert_eq!(r.queries, 8);
            assert_eq!(r.biases.len(), 4);
        }
        // Standard KDE at the boundary loses about half the mass.
        let std_bias = a.rows[0].bias(Estimator::Std).unwrap().mean_bias;
        assert!(std_bias < -0.3, "{std_bias}");
    }

    #[test]
    fn validation() {
        let g = GeneratorSpec::proposals(GeneratorKind::ExponentialHalfLine, 100, 0).unwrap();
        assert!(OrderStudyConfig::new(g, vec![0.1, 0.2], 1.0, 2)
            .validate()
            .is_err());
        assert!(OrderStudyConfig::new(g, vec![0.1, 0.2, -0.3], 1.0, 2)
            .validate()
            .is_err());
        assert!(OrderStudyConfig::new(g, vec![0.1, 0.2, 0.3], 1.0, 0)
            .validate()
            .is_err());
        let circle = GeneratorSpec::proposals(GeneratorKind::UnitCircle, 100, 0).unwrap();
        assert!(matches!(
            OrderStudyConfig::new(circle, vec![0.1, 0.2, 0.3], 1.0, 2).validate(),
            Err(Error::MissingBoundaryDistance(_))
        ));
    }
}
