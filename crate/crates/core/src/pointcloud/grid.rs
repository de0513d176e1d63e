//! Fixed-radius neighbor visits over a uniform cell grid.
//!
//! The grid is built once per data cloud with cells of side `radius / 2`, and a
//! [`Stencil`] lists the cell offsets that can hold points within a given
//! radius. Points inside each cell keep ascending index order and stencils are
//! enumerated lexicographically, so the visiting order for a query is fixed.
//! Clouds of ambient dimension above [`MAX_GRID_DIM`] fall back to a linear
//! scan, which is also used when no radius cutoff is requested.

use std::collections::HashMap;

use super::{squared_distance, PointCloud};
use crate::scalar::Scalar;

pub const MAX_GRID_DIM: usize = 4;
const CELLS_PER_RADIUS: f64 = 2.0;
/// Cell coordinates must stay exactly representable.
const MAX_CELL_COORD: f64 = 4.0e15;

type CellKey = [i64; MAX_GRID_DIM];

#[derive(Debug)]
struct CellGrid<T> {
    side: T,
    inv_side: T,
    coords: Vec<T>,
    cells: HashMap<CellKey, (usize, usize)>,
}

/// Offsets to visit for one search radius.
#[derive(Debug, Clone)]
pub struct Stencil<T> {
    radius2: T,
    offsets: Vec<CellKey>,
}

impl<T: Scalar> Stencil<T> {
    pub fn radius(&self) -> T {
        self.radius2.sqrt()
    }
}

#[derive(Debug)]
pub struct NeighborIndex<'a, T> {
    data: &'a PointCloud<T>,
    grid: Option<CellGrid<T>>,
}

impl<'a, T: Scalar> NeighborIndex<'a, T> {
    /// Linear scan over every point.
    pub fn brute(data: &'a PointCloud<T>) -> Self {
        Self { data, grid: None }
    }

    /// Grid sized for searches of radius `radius`. Infinite radii and
    /// high-dimensional clouds get a linear scan.
    pub fn for_radius(data: &'a PointCloud<T>, radius: T) -> Self {
        let grid = if radius.is_finite() && radius > T::zero() && data.dim() <= MAX_GRID_DIM {
            CellGrid::build(data, radius / T::lit(CELLS_PER_RADIUS))
        } else {
            None
        };
        Self { data, grid }
    }

    pub fn data(&self) -> &'a PointCloud<T> {
        self.data
    }

    pub fn uses_grid(&self) -> bool {
        self.grid.is_some()
    }

    pub fn stencil(&self, radius: T) -> Stencil<T> {
        let radius2 = radius * radius;
        let offsets = match &self.grid {
            Some(grid) if radius.is_finite() => grid.offsets(radius, self.data.dim()),
            _ => Vec::new(),
        };
        Stencil { radius2, offsets }
    }

    /// Calls `f(point, squared_distance)` for every point within the stencil
    /// radius of `query`, in a fixed order.
    #[inline]
    pub fn for_each_within<F>(&self, stencil: &Stencil<T>, query: &[T], mut f: F)
    where
        F: FnMut(&[T], T),
    {
        match &self.grid {
            Some(grid) if !stencil.offsets.is_empty() => {
                let dim = self.data.dim();
                let Some(center) = grid.key(query) else {
                    return self.scan(stencil, query, f);
                };
                let mut key = [0i64; MAX_GRID_DIM];
                for off in &stencil.offsets {
                    for a in 0..MAX_GRID_DIM {
                        key[a] = center[a] + off[a];
                    }
                    if let Some(&(start, end)) = grid.cells.get(&key) {
                        for p in grid.coords[start * dim..end * dim].chunks_exact(dim) {
                            let d2 = squared_distance(query, p);
                            if d2 <= stencil.radius2 {
                                f(p, d2);
                            }
                        }
                    }
                }
            }
            _ => self.scan(stencil, query, &mut f),
        }
    }

    fn scan<F: FnMut(&[T], T)>(&self, stencil: &Stencil<T>, query: &[T], mut f: F) {
        let unbounded = stencil.radius2.is_infinite();
        for p in self.data.points() {
            let d2 = squared_distance(query, p);
            if unbounded || d2 <= stencil.radius2 {
                f(p, d2);
            }
        }
    }
}

impl<T: Scalar> CellGrid<T> {
    fn build(data: &PointCloud<T>, side: T) -> Option<Self> {
        let inv_side = side.recip();
        if !inv_side.is_finite() {
            return None;
        }
        let partial = Self {
            side,
            inv_side,
            coords: Vec::new(),
            cells: HashMap::new(),
        };
        let mut keyed = Vec::with_capacity(data.len());
        for (i, p) in data.points().enumerate() {
            keyed.push((partial.key(p)?, i));
        }
        keyed.sort_unstable();

        let dim = data.dim();
        let mut coords = Vec::with_capacity(data.len() * dim);
        let mut cells = HashMap::new();
        let mut start = 0;
        for (pos, &(key, i)) in keyed.iter().enumerate() {
            coords.extend_from_slice(data.point(i));
            let last = pos + 1 == keyed.len() || keyed[pos + 1].0 != key;
            if last {
                cells.insert(key, (start, pos + 1));
                start = pos + 1;
            }
        }
        Some(Self {
            coords,
            cells,
            ..partial
        })
    }

    fn key(&self, p: &[T]) -> Option<CellKey> {
        let mut key = [0i64; MAX_GRID_DIM];
        for (k, &x) in key.iter_mut().zip(p) {
            let c = (x * self.inv_side).floor();
            if !(c.abs() <= T::lit(MAX_CELL_COORD)) {
                return None;
            }
            *k = c.to_i64()?;
        }
        Some(key)
    }

    fn offsets(&self, radius: T, dim: usize) -> Vec<CellKey> {
        let reach = (radius * self.inv_side).ceil().to_i64().unwrap_or(i64::MAX);
        let side2 = self.side * self.side;
        let radius2 = radius * radius;
        let width = (2 * reach + 1) as usize;
        let total = width.pow(dim as u32);
        let mut out = Vec::new();
        for flat in 0..total {
            let mut key = [0i64; MAX_GRID_DIM];
            let mut rem = flat;
            let mut gap2 = T::zero();
            for a in (0..dim).rev() {
                let o = (rem % width) as i64 - reach;
                rem /= width;
                key[a] = o;
                let g = T::lit((o.abs() - 1).max(0) as f64);
                gap2 = gap2 + g * g * side2;
            }
            if gap2 <= radius2 {
                out.push(key);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_cloud(n: usize, dim: usize, seed: u64) -> PointCloud<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        PointCloud::from_flat(coords, dim).unwrap()
    }

    fn collect(index: &NeighborIndex<f64>, radius: f64, q: &[f64]) -> Vec<Vec<f64>> {
        let st = index.stencil(radius);
        let mut out = Vec::new();
        index.for_each_within(&st, q, |p, _| out.push(p.to_vec()));
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    #[test]
    fn grid_matches_scan() {
        for dim in 1..=4 {
            let cloud = random_cloud(500, dim, dim as u64);
            let grid = NeighborIndex::for_radius(&cloud, 0.3);
            assert!(grid.uses_grid());
            let brute = NeighborIndex::brute(&cloud);
            for q in cloud.points().take(20) {
                for &r in &[0.1, 0.3, 0.6] {
                    assert_eq!(collect(&grid, r, q), collect(&brute, r, q));
                }
            }
            // query outside the data's bounding box
            let far = vec![5.0; dim];
            assert_eq!(collect(&grid, 0.3, &far), collect(&brute, 0.3, &far));
        }
    }

    #[test]
    fn high_dimension_scans() {
        let cloud = random_cloud(50, 6, 1);
        let idx = NeighborIndex::for_radius(&cloud, 0.5);
        assert!(!idx.uses_grid());
        let all = collect(&idx, f64::INFINITY, cloud.point(0));
        assert_eq!(all.len(), 50);
    }

    #[test]
    fn visiting_order_is_fixed() {
        let cloud = random_cloud(300, 2, 9);
        let idx = NeighborIndex::for_radius(&cloud, 0.4);
        let st = idx.stencil(0.4);
        let q = cloud.point(7);
        let mut a = Vec::new();
        let mut b = Vec::new();
        idx.for_each_within(&st, q, |p, _| a.push(p.to_vec()));
        idx.for_each_within(&st, q, |p, _| b.push(p.to_vec()));
        assert_eq!(a, b);
    }
}
