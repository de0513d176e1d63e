//! Point clouds, CSV persistence and pairwise kernel accumulation.

mod csv;
mod grid;
pub(crate) mod sums;

pub use self::csv::{load_csv, parse_csv, save_csv, write_csv};
pub use grid::{NeighborIndex, Stencil};
pub use sums::{kernel_sums, AccumulatorSpec, KernelSums};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `N` points in `R^n`, stored row-major. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    coords: Vec<T>,
    dim: usize,
}

impl<T: Scalar> PointCloud<T> {
    /// Builds a cloud from row-major coordinates. Requires at least one point
    /// and finite coordinates.
    pub fn from_flat(coords: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("ambient dimension must be at least 1"));
        }
        if coords.is_empty() {
            return Err(Error::Empty("point cloud has no points".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::domain(format!(
                "{} coordinates do not split into rows of {dim}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite coordinate in point {} (axis {})",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { coords, dim })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Empty("point cloud has no points".into()))?;
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(coords, dim)
    }

    /// A cloud with no points, usable only as a query set.
    pub fn empty(dim: usize) -> Self {
        Self {
            coords: Vec::new(),
            dim,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[T] {
        &self.coords
    }

    /// Applies `f` to every point, producing a cloud of dimension `dim`.
    pub fn map_points<F>(&self, dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[T], &mut [T]),
    {
        let mut coords = vec![T::zero(); self.len() * dim];
        for (src, dst) in self.points().zip(coords.chunks_exact_mut(dim)) {
            f(src, dst);
        }
        if coords.is_empty() {
            return Ok(Self::empty(dim));
        }
        Self::from_flat(coords, dim)
    }

    /// Translates every point by `shift`.
    pub fn translated(&self, shift: &[T]) -> Result<Self> {
        self.check_dim(shift.len())?;
        self.map_points(self.dim, |p, out| {
            for ((o, &a), &s) in out.iter_mut().zip(p).zip(shift) {
                *o = a + s;
            }
        })
    }

    /// Keeps the points selected by `keep`, in order.
    pub fn select(&self, mut keep: impl FnMut(usize, &[T]) -> bool) -> Self {
        let mut coords = Vec::new();
        for (i, p) in self.points().enumerate() {
            if keep(i, p) {
                coords.extend_from_slice(p);
            }
        }
        Self {
            coords,
            dim: self.dim,
        }
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> PointCloud<U> {
        PointCloud {
            coords: self.coords.iter().map(|&v| U::lit(v.as_f64())).collect(),
            dim: self.dim,
        }
    }
}

#[inline]
pub(crate) fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = y - x;
        acc = acc + d * d;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction() {
        let c = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.dim(), 2);
        assert_eq!(c.point(1), &[1.0, 0.0]);
        assert!(PointCloud::<f64>::from_flat(vec![], 2).is_err());
        assert!(PointCloud::from_flat(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(PointCloud::from_flat(vec![1.0, f64::NAN], 2).is_err());
        assert!(PointCloud::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert_eq!(PointCloud::<f64>::empty(3).len(), 0);
    }

    #[test]
    fn translate_and_select() {
        let c = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let t = c.translated(&[1.0, -1.0]).unwrap();
        assert_eq!(t.point(1), &[2.0, -1.0]);
        assert!(c.translated(&[1.0]).is_err());
        let s = c.select(|_, p| p[0] > 0.5);
        assert_eq!(s.len(), 1);
        let f: PointCloud<f32> = c.cast();
        assert_eq!(f.point(1), &[1.0f32, 0.0]);
    }
}
