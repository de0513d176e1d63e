//! Kernel sums `S(x) = sum_i K(|x - X_i|/h)` and
//! `V(x) = sum_i K(|x - X_i|/h) (X_i - x)`, accumulated in one pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{NeighborIndex, Stencil};
use super::PointCloud;
use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::scalar::Scalar;

const MAX_CUTOFF_EPSILON: f64 = 1e-3;

/// Truncation and threading options for pairwise accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccumulatorSpec<T> {
    /// Pairs whose unnormalized kernel value `exp(-t^2)` falls below this are
    /// skipped. Zero disables truncation.
    pub cutoff_epsilon: T,
    pub parallel: bool,
}

impl<T: Scalar> Default for AccumulatorSpec<T> {
    fn default() -> Self {
        Self {
            cutoff_epsilon: T::zero(),
            parallel: true,
        }
    }
}

impl<T: Scalar> AccumulatorSpec<T> {
    pub fn new(cutoff_epsilon: T, parallel: bool) -> Result<Self> {
        let spec = Self {
            cutoff_epsilon,
            parallel,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn truncated(cutoff_epsilon: T) -> Result<Self> {
        Self::new(cutoff_epsilon, true)
    }

    pub fn validate(&self) -> Result<()> {
        let eps = self.cutoff_epsilon;
        if !(eps >= T::zero() && eps <= T::lit(MAX_CUTOFF_EPSILON)) {
            return Err(Error::domain(format!(
                "cutoff epsilon must lie in [0, {MAX_CUTOFF_EPSILON}], got {eps}"
            )));
        }
        Ok(())
    }

    /// Distance beyond which pairs may be skipped: `h sqrt(ln(1/eps))`.
    pub fn cutoff_radius(&self, h: T) -> T {
        if self.cutoff_epsilon > T::zero() {
            h * (-self.cutoff_epsilon.ln()).sqrt()
        } else {
            T::infinity()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSums<T> {
    pub scalar: T,
    pub vector: Vec<T>,
}

/// Evaluates `S` and `V` at every query.
pub fn kernel_sums<T: Scalar>(
    queries: &PointCloud<T>,
    data: &PointCloud<T>,
    params: &KernelParams<T>,
    spec: &AccumulatorSpec<T>,
) -> Result<Vec<KernelSums<T>>> {
    spec.validate()?;
    data.check_dim(queries.dim())?;
    let radius = spec.cutoff_radius(params.h());
    let index = NeighborIndex::for_radius(data, radius);
    let stencil = index.stencil(radius);
    let norm = params.normalization();
    let inv_h2 = (params.h() * params.h()).recip();
    map_queries(queries, spec.parallel, |_, q| {
        let mut vector = vec![T::zero(); q.len()];
        let s = accumulate(&index, &stencil, q, inv_h2, Some(&mut vector));
        for v in &mut vector {
            *v = *v * norm;
        }
        Ok(KernelSums {
            scalar: s * norm,
            vector,
        })
    })
}

/// `sum exp(-d^2/h^2)` over the stencil, optionally adding the weighted
/// displacements into `vector`.
#[inline]
pub(crate) fn accumulate<T: Scalar>(
    index: &NeighborIndex<'_, T>,
    stencil: &Stencil<T>,
    query: &[T],
    inv_h2: T,
    vector: Option<&mut [T]>,
) -> T {
    let mut s = T::zero();
    match vector {
        Some(v) => index.for_each_within(stencil, query, |p, d2| {
            let w = (-d2 * inv_h2).exp();
            s = s + w;
            for ((acc, &pi), &qi) in v.iter_mut().zip(p).zip(query) {
                *acc = *acc + w * (pi - qi);
            }
        }),
        None => index.for_each_within(stencil, query, |_, d2| {
            s = s + (-d2 * inv_h2).exp();
        }),
    }
    s
}

/// Like [`accumulate`] but only over points with `(p - query) . direction <= offset`.
#[inline]
pub(crate) fn accumulate_cut<T: Scalar>(
    index: &NeighborIndex<'_, T>,
    stencil: &Stencil<T>,
    query: &[T],
    inv_h2: T,
    direction: &[T],
    offset: T,
) -> T {
    let mut s = T::zero();
    index.for_each_within(stencil, query, |p, d2| {
        let mut proj = T::zero();
        for ((&pi, &qi), &e) in p.iter().zip(query).zip(direction) {
            proj = proj + (pi - qi) * e;
        }
        if proj <= offset {
            s = s + (-d2 * inv_h2).exp();
        }
    });
    s
}

/// Applies `f` to every query, in parallel when asked. Results keep query
/// order; the first failure (lowest index) is reported with its index.
pub(crate) fn map_queries<T, R, F>(queries: &PointCloud<T>, parallel: bool, f: F) -> Result<Vec<R>>
where
    T: Scalar,
    R: Send,
    F: Fn(usize, &[T]) -> Result<R> + Sync,
{
    let wrap = |i: usize| {
        f(i, queries.point(i)).map_err(|e| Error::Query {
            index: i,
            source: Box::new(e),
        })
    };
    if parallel {
        (0..queries.len()).into_par_iter().map(wrap).collect()
    } else {
        (0..queries.len()).map(wrap).collect()
    }
}
