//! Density estimators at a query point.
//!
//! The pipeline at each query `x`, for bandwidth `h`:
//!
//! 1. standard KDE `f = S(x) / (N h^m)` and boundary direction vector
//!    `mu = V(x) / (N h^(m+1))`, from one pass over the data;
//! 2. ratio `c = f / (sqrt(pi) |mu|)`, inverted into a boundary distance
//!    `b` by [`solve_boundary_distance`], and direction `eta = -mu / |mu|`;
//! 3. boundary-renormalized KDE `f / m0(b, h)`;
//! 4. cut-and-normalize KDEs at `h` and `2h`, which drop samples with
//!    `(X_i - x) . eta > b` and divide by the half-space moment;
//! 5. the extrapolated estimate `(2C f_h - f_2h) / (2C - 1)` with `C` from
//!    [`richardson_ratio`](crate::kernel::richardson_ratio), which cancels the order-`h` boundary bias.
//!
//! The boundary quantities estimated at `h` are reused for the `2h` cut.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    m0_unchecked, richardson_ratio_with, solve_boundary_distance, KernelParams, RatioForm,
    SolverOptions,
};
use crate::pointcloud::sums::{accumulate, accumulate_cut, map_queries};
use crate::pointcloud::{AccumulatorSpec, NeighborIndex, PointCloud, Stencil};
use crate::scalar::Scalar;

/// Below `DEGENERATE_MU * f / h` the direction vector is treated as zero.
const DEGENERATE_MU: f64 = 1e-14;

/// Distance and direction to the boundary estimated at one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryInfo<T> {
    /// Boundary direction estimator; points into the interior.
    pub mu: Vec<T>,
    pub mu_norm: T,
    /// Unit vector toward the boundary, all zeros when degenerate.
    pub eta_hat: Vec<T>,
    /// Estimated distance; `+inf` marks a point classified as interior.
    pub b_hat: T,
    pub c: T,
    pub degenerate_direction: bool,
    /// The ratio `c` fell below one and `b_hat` was clamped to zero.
    pub clamped: bool,
    /// Standard KDE at the same query and bandwidth.
    pub f_std: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBundle<T> {
    pub f_std: T,
    pub f_bnd: T,
    pub f_cut_h: T,
    pub f_cut_2h: T,
    /// Extrapolated estimate; may be negative.
    pub f_cut2: T,
    /// Extrapolation ratio `C`.
    pub ratio: T,
    pub boundary: BoundaryInfo<T>,
    pub params: KernelParams<T>,
}

/// Estimator bound to one data cloud and bandwidth.
///
/// Builds a neighbor grid once when truncation is enabled and evaluates every
/// estimator at arbitrary queries.
#[derive(Debug)]
pub struct DensityEstimator<'a, T> {
    index: NeighborIndex<'a, T>,
    stencil_h: Stencil<T>,
    stencil_2h: Stencil<T>,
    params: KernelParams<T>,
    spec: AccumulatorSpec<T>,
    solver: SolverOptions<T>,
    ratio_form: RatioForm,
    norm: T,
}

impl<'a, T: Scalar> DensityEstimator<'a, T> {
    pub fn new(
        data: &'a PointCloud<T>,
        params: KernelParams<T>,
        spec: AccumulatorSpec<T>,
    ) -> Result<Self> {
        spec.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("estimator needs at least one sample".into()));
        }
        let two = T::lit(2.0);
        let radius_h = spec.cutoff_radius(params.h());
        let index = NeighborIndex::for_radius(data, radius_h);
        let stencil_h = index.stencil(radius_h);
        let stencil_2h = index.stencil(spec.cutoff_radius(two * params.h()));
        Ok(Self {
            index,
            stencil_h,
            stencil_2h,
            params,
            spec,
            solver: SolverOptions::default(),
            ratio_form: RatioForm::default(),
            norm: params.normalization(),
        })
    }

    /// Exact sums, no truncation.
    pub fn exact(data: &'a PointCloud<T>, params: KernelParams<T>) -> Result<Self> {
        Self::new(data, params, AccumulatorSpec::default())
    }

    pub fn with_solver(mut self, solver: SolverOptions<T>) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_ratio_form(mut self, form: RatioForm) -> Self {
        self.ratio_form = form;
        self
    }

    pub fn params(&self) -> KernelParams<T> {
        self.params
    }

    pub fn data(&self) -> &'a PointCloud<T> {
        self.index.data()
    }

    fn sample_count(&self) -> T {
        T::from_usize_lossy(self.data().len())
    }

    fn check(&self, x: &[T]) -> Result<()> {
        self.data().check_dim(x.len())
    }

    fn inv_h2(&self, h: T) -> T {
        (h * h).recip()
    }

    /// `S(x) / (N h^m)`
    pub fn standard_kde(&self, x: &[T]) -> Result<T> {
        self.check(x)?;
        let h = self.params.h();
        let s = accumulate(&self.index, &self.stencil_h, x, self.inv_h2(h), None);
        Ok(self.norm * s / (self.sample_count() * self.params.volume_factor()))
    }

    /// `V(x) / (N h^(m+1))`
    pub fn bde(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.kde_and_bde(x)?.1)
    }

    fn kde_and_bde(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        self.check(x)?;
        let h = self.params.h();
        let mut v = vec![T::zero(); x.len()];
        let s = accumulate(
            &self.index,
            &self.stencil_h,
            x,
            self.inv_h2(h),
            Some(&mut v),
        );
        let denom = self.sample_count() * self.params.volume_factor();
        let f = self.norm * s / denom;
        let scale = self.norm / (denom * h);
        for vi in &mut v {
            *vi = *vi * scale;
        }
        Ok((f, v))
    }

    pub fn boundary_info(&self, x: &[T]) -> Result<BoundaryInfo<T>> {
        let (f_std, mu) = self.kde_and_bde(x)?;
        let h = self.params.h();
        let mu_norm = mu.iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(mu_norm >= T::lit(DEGENERATE_MU) * f_std / h) || mu_norm == T::zero() {
            return Ok(BoundaryInfo {
                eta_hat: vec![T::zero(); mu.len()],
                mu,
                mu_norm,
                b_hat: T::infinity(),
                c: T::infinity(),
                degenerate_direction: true,
                clamped: false,
                f_std,
            });
        }
        let c = f_std / (T::PI().sqrt() * mu_norm);
        let solved = solve_boundary_distance(c, h, self.solver)?;
        let eta_hat = mu.iter().map(|&v| -v / mu_norm).collect();
        Ok(BoundaryInfo {
            mu,
            mu_norm,
            eta_hat,
            b_hat: solved.b_hat,
            c,
            degenerate_direction: false,
            clamped: solved.clamped,
            f_std,
        })
    }

    /// `f_std / m0(b_hat, h)`
    pub fn boundary_normalized_kde(&self, info: &BoundaryInfo<T>) -> T {
        info.f_std / m0_unchecked(info.b_hat, self.params.h())
    }

    /// Cut-and-normalize estimate at bandwidth `h * scale` (scale 1 or 2).
    fn cut_at(&self, x: &[T], b_hat: T, eta_hat: &[T], doubled: bool) -> T {
        let two = T::lit(2.0);
        let (h, stencil) = if doubled {
            (two * self.params.h(), &self.stencil_2h)
        } else {
            (self.params.h(), &self.stencil_h)
        };
        let inv_h2 = self.inv_h2(h);
        let s = if b_hat.is_infinite() {
            accumulate(&self.index, stencil, x, inv_h2, None)
        } else {
            accumulate_cut(&self.index, stencil, x, inv_h2, eta_hat, b_hat)
        };
        let volume = h.powf(self.params.m());
        self.norm * s / (self.sample_count() * volume * m0_unchecked(b_hat, h))
    }

    /// Keeps samples with `(X_i - x) . eta_hat <= b_hat` and divides by the
    /// half-space moment `m0(b_hat, h)`. An infinite `b_hat` cuts nothing.
    pub fn cut_kde(&self, x: &[T], b_hat: T, eta_hat: &[T]) -> Result<T> {
        self.check(x)?;
        check_cut(b_hat, eta_hat, x.len())?;
        Ok(self.cut_at(x, b_hat, eta_hat, false))
    }

    pub fn second_order_kde(&self, x: &[T]) -> Result<EstimateBundle<T>> {
        let info = self.boundary_info(x)?;
        Ok(self.bundle_from(x, info))
    }

    fn bundle_from(&self, x: &[T], info: BoundaryInfo<T>) -> EstimateBundle<T> {
        let h = self.params.h();
        let f_bnd = self.boundary_normalized_kde(&info);
        let f_cut_h = self.cut_at(x, info.b_hat, &info.eta_hat, false);
        let f_cut_2h = self.cut_at(x, info.b_hat, &info.eta_hat, true);
        let ratio = richardson_ratio_with(info.b_hat, h, self.ratio_form).unwrap_or(T::infinity());
        let f_cut2 = extrapolate(f_cut_h, f_cut_2h, ratio);
        EstimateBundle {
            f_std: info.f_std,
            f_bnd,
            f_cut_h,
            f_cut_2h,
            f_cut2,
            ratio,
            boundary: info,
            params: self.params,
        }
    }

    /// Full pipeline at every query, in query order.
    pub fn estimate_all(&self, queries: &PointCloud<T>) -> Result<Vec<EstimateBundle<T>>> {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        self.data().check_dim(queries.dim())?;
        map_queries(queries, self.spec.parallel, |_, q| self.second_order_kde(q))
    }
}

/// `(2C f_h - f_2h) / (2C - 1)`, written so that `C = inf` gives `f_h`.
pub fn extrapolate<T: Scalar>(f_h: T, f_2h: T, ratio: T) -> T {
    let two = T::lit(2.0);
    f_h + (f_h - f_2h) / (two * ratio - T::one())
}

fn check_cut<T: Scalar>(b_hat: T, eta_hat: &[T], dim: usize) -> Result<()> {
    if eta_hat.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: eta_hat.len(),
        });
    }
    if !(b_hat >= T::zero()) {
        return Err(Error::domain(format!(
            "cut distance must be nonnegative, got {b_hat}"
        )));
    }
    let norm = eta_hat.iter().map(|&v| v * v).sum::<T>().sqrt();
    let tol = T::lit(1e-6).max(T::lit(100.0) * T::epsilon());
    if !((norm - T::one()).abs() <= tol) {
        return Err(Error::domain(format!(
            "cut direction must be a unit vector, norm {norm}"
        )));
    }
    Ok(())
}

/// Standard manifold KDE with the Gaussian kernel, exact sums.
pub fn standard_kde<T: Scalar>(
    x: &[T],
    data: &PointCloud<T>,
    params: &KernelParams<T>,
) -> Result<T> {
    DensityEstimator::exact(data, *params)?.standard_kde(x)
}

/// Boundary direction estimator, exact sums.
pub fn bde<T: Scalar>(x: &[T], data: &PointCloud<T>, params: &KernelParams<T>) -> Result<Vec<T>> {
    DensityEstimator::exact(data, *params)?.bde(x)
}

pub fn boundary_info<T: Scalar>(
    x: &[T],
    data: &PointCloud<T>,
    params: &KernelParams<T>,
) -> Result<BoundaryInfo<T>> {
    DensityEstimator::exact(data, *params)?.boundary_info(x)
}

/// `standard_kde / m0(b_hat, h)` using a previously computed [`BoundaryInfo`].
pub fn boundary_normalized_kde<T: Scalar>(
    x: &[T],
    data: &PointCloud<T>,
    params: &KernelParams<T>,
    info: &BoundaryInfo<T>,
) -> Result<T> {
    let f = standard_kde(x, data, params)?;
    if !(info.b_hat >= T::zero()) {
        return Err(Error::domain(format!(
            "boundary distance must be nonnegative, got {}",
            info.b_hat
        )));
    }
    Ok(f / m0_unchecked(info.b_hat, params.h()))
}

pub fn cut_kde<T: Scalar>(
    x: &[T],
    data: &PointCloud<T>,
    params: &KernelParams<T>,
    b_hat: T,
    eta_hat: &[T],
) -> Result<T> {
    DensityEstimator::exact(data, *params)?.cut_kde(x, b_hat, eta_hat)
}

pub fn second_order_kde<T: Scalar>(
    x: &[T],
    data: &PointCloud<T>,
    params: &KernelParams<T>,
) -> Result<EstimateBundle<T>> {
    DensityEstimator::exact(data, *params)?.second_order_kde(x)
}

/// Full pipeline at each query with exact sums.
pub fn estimate_all<T: Scalar>(
    queries: &PointCloud<T>,
    data: &PointCloud<T>,
    params: &KernelParams<T>,
) -> Result<Vec<EstimateBundle<T>>> {
    DensityEstimator::exact(data, *params)?.estimate_all(queries)
}
