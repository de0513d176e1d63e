//! Joint intrinsic-dimension estimate and bandwidth choice from the log-log
//! slope of unnormalized kernel sums.
//!
//! For a well-resolved bandwidth, `S(h) = (1/N) sum_i exp(-|x - x_i|^2 / h^2)`
//! grows like `h^m`, so the forward difference of `log S` against `log h` over
//! a geometric grid `h_j = base^j` approximates `m`. The constant `pi^(-m/2)`
//! is left out because it does not change slopes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::{squared_distance, PointCloud};
use crate::scalar::Scalar;

/// Kernel arguments `t^2` beyond this contribute below `1e-17` and are dropped.
const NEGLIGIBLE_T2: f64 = 40.0;
const PLATEAU_TOLERANCE: f64 = 0.1;
/// Candidates for the persistent rule must reach this fraction of the peak.
const PERSISTENCE_FLOOR: f64 = 0.5;

/// How a dimension is read off the slope curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningRule {
    /// Largest slope on the grid.
    #[default]
    Argmax,
    /// Slope with the longest run of neighbours within 0.1 of it, among slopes
    /// of at least half the peak; ties go to the larger slope. Extrinsic
    /// curvature produces short bumps above the intrinsic dimension, which
    /// this rule skips.
    Persistent,
}

impl std::str::FromStr for TuningRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "argmax" => Ok(TuningRule::Argmax),
            "persistent" => Ok(TuningRule::Persistent),
            other => Err(Error::domain(format!("unknown tuning rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid<T> {
    pub base: T,
    pub j_min: i32,
    pub j_max: i32,
}

impl<T: Scalar> Default for TuningGrid<T> {
    fn default() -> Self {
        Self {
            base: T::lit(1.1),
            j_min: -20,
            j_max: 20,
        }
    }
}

impl<T: Scalar> TuningGrid<T> {
    pub fn new(base: T, j_min: i32, j_max: i32) -> Result<Self> {
        let grid = Self { base, j_min, j_max };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > T::one()) || !self.base.is_finite() {
            return Err(Error::domain(format!(
                "grid base must exceed 1, got {}",
                self.base
            )));
        }
        if self.j_min >= self.j_max {
            return Err(Error::domain(format!(
                "grid needs j_min < j_max, got {}..{}",
                self.j_min, self.j_max
            )));
        }
        Ok(())
    }

    pub fn bandwidths(&self) -> Vec<T> {
        (self.j_min..=self.j_max)
            .map(|j| self.base.powi(j))
            .collect()
    }
}

/// Where the kernel-sum curve is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum CurveSite<'a, T> {
    Point(&'a [T]),
    /// Average of the point-wise curves over every data point.
    CloudAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult<T> {
    pub rule: TuningRule,
    pub h_star: T,
    pub m_hat: T,
    pub bandwidths: Vec<T>,
    /// `dim(h_j)` for `j = j_min..j_max-1`; `None` where a sum vanished.
    pub dim_curve: Vec<Option<T>>,
    pub argmax: usize,
    /// Consecutive grid entries around the maximum within 0.1 of `m_hat`.
    pub plateau_width: usize,
}

impl<T: Scalar> TuningResult<T> {
    /// `m_hat` rounded to the nearest positive integer.
    pub fn rounded_dimension(&self) -> T {
        self.m_hat.round().max(T::one())
    }
}

/// `S(h_j)` for every grid bandwidth.
pub fn kernel_sum_curve<T: Scalar>(
    site: CurveSite<'_, T>,
    data: &PointCloud<T>,
    grid: &TuningGrid<T>,
) -> Result<Vec<T>> {
    grid.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("kernel sums need data".into()));
    }
    let inv_h2: Vec<T> = grid.bandwidths().iter().map(|&h| (h * h).recip()).collect();
    let n = T::from_usize_lossy(data.len());
    match site {
        CurveSite::Point(x) => {
            data.check_dim(x.len())?;
            let mut sums = vec![T::zero(); inv_h2.len()];
            for p in data.points() {
                add_pair(&mut sums, &inv_h2, squared_distance(x, p), T::one());
            }
            Ok(sums.into_iter().map(|s| s / n).collect())
        }
        CurveSite::CloudAverage => {
            // Each unordered pair counted twice plus the N self terms.
            let rows: Vec<Vec<T>> = (0..data.len())
                .into_par_iter()
                .map(|i| {
                    let mut sums = vec![T::zero(); inv_h2.len()];
                    let xi = data.point(i);
                    for k in (i + 1)..data.len() {
                        add_pair(
                            &mut sums,
                            &inv_h2,
                            squared_distance(xi, data.point(k)),
                            T::one(),
                        );
                    }
                    sums
                })
                .collect();
            let two = T::lit(2.0);
            let mut total = vec![n; inv_h2.len()];
            for row in rows {
                for (t, r) in total.iter_mut().zip(row) {
                    *t = *t + two * r;
                }
            }
            Ok(total.into_iter().map(|s| s / (n * n)).collect())
        }
    }
}

/// Adds `w exp(-d2/h_j^2)` for every bandwidth, widest first, stopping once
/// the terms are negligible.
#[inline]
fn add_pair<T: Scalar>(sums: &mut [T], inv_h2: &[T], d2: T, w: T) {
    let cut = T::lit(NEGLIGIBLE_T2);
    for (s, &ih2) in sums.iter_mut().zip(inv_h2).rev() {
        let t2 = d2 * ih2;
        if t2 > cut {
            break;
        }
        *s = *s + w * (-t2).exp();
    }
}

/// Forward log-difference quotients of `S` over the grid.
pub fn dimension_curve<T: Scalar>(sums: &[T], grid: &TuningGrid<T>) -> Result<Vec<Option<T>>> {
    let hs = grid.bandwidths();
    if sums.len() != hs.len() {
        return Err(Error::DimensionMismatch {
            expected: hs.len(),
            found: sums.len(),
        });
    }
    Ok(sums
        .windows(2)
        .zip(hs.windows(2))
        .map(|(s, h)| {
            if s[0] > T::zero() && s[1] > T::zero() && s[0].is_finite() && s[1].is_finite() {
                Some((s[1].ln() - s[0].ln()) / (h[1].ln() - h[0].ln()))
            } else {
                None
            }
        })
        .collect())
}

/// Whole-cloud tuning: `m_hat` is the largest slope on the grid and `h_star`
/// the bandwidth where it occurs.
pub fn tune<T: Scalar>(data: &PointCloud<T>, grid: &TuningGrid<T>) -> Result<TuningResult<T>> {
    tune_with_rule(data, grid, TuningRule::Argmax)
}

pub fn tune_with_rule<T: Scalar>(
    data: &PointCloud<T>,
    grid: &TuningGrid<T>,
    rule: TuningRule,
) -> Result<TuningResult<T>> {
    if data.len() < 10 {
        return Err(Error::domain(format!(
            "tuning needs at least 10 points, got {}",
            data.len()
        )));
    }
    let first = data.point(0);
    if data.points().all(|p| p == first) {
        return Err(Error::Degenerate("all points are identical".into()));
    }
    let sums = kernel_sum_curve(CurveSite::CloudAverage, data, grid)?;
    let dim_curve = dimension_curve(&sums, grid)?;
    let (argmax, m_hat) = select(&dim_curve, rule)
        .ok_or_else(|| Error::Degenerate("no resolved scale in the grid".into()))?;
    if !(m_hat > T::zero()) {
        return Err(Error::Degenerate(format!(
            "dimension curve peaks at {m_hat}"
        )));
    }
    let bandwidths = grid.bandwidths();
    let plateau_width = run_length(&dim_curve, argmax, T::lit(PLATEAU_TOLERANCE));
    Ok(TuningResult {
        rule,
        h_star: bandwidths[argmax],
        m_hat,
        bandwidths,
        dim_curve,
        argmax,
        plateau_width,
    })
}

fn select<T: Scalar>(dims: &[Option<T>], rule: TuningRule) -> Option<(usize, T)> {
    let defined = dims
        .iter()
        .enumerate()
        .filter_map(|(j, d)| d.map(|v| (j, v)));
    match rule {
        TuningRule::Argmax => defined.fold(None, |best: Option<(usize, T)>, (j, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((j, v)),
        }),
        TuningRule::Persistent => {
            let (_, peak) = select(dims, TuningRule::Argmax)?;
            let floor = T::lit(PERSISTENCE_FLOOR) * peak;
            defined
                .filter(|&(_, v)| v >= floor)
                .map(|(j, v)| (j, v, run_length(dims, j, T::lit(PLATEAU_TOLERANCE))))
                .fold(
                    None,
                    |best: Option<(usize, T, usize)>, (j, v, len)| match best {
                        Some((_, bv, bl)) if bl > len || (bl == len && bv >= v) => best,
                        _ => Some((j, v, len)),
                    },
                )
                .map(|(j, v, _)| (j, v))
        }
    }
}

/// Consecutive defined entries around `center` within `tol` of its value.
fn run_length<T: Scalar>(dims: &[Option<T>], center: usize, tol: T) -> usize {
    let Some(c) = dims[center] else { return 0 };
    let within = |j: usize| matches!(dims[j], Some(v) if (v - c).abs() <= tol);
    let mut lo = center;
    while lo > 0 && within(lo - 1) {
        lo -= 1;
    }
    let mut hi = center;
    while hi + 1 < dims.len() && within(hi + 1) {
        hi += 1;
    }
    hi - lo + 1
}
