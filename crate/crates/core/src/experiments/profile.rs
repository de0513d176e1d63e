use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    pub center: f64,
    pub half_width: f64,
    /// `None` for an empty bin.
    pub mean: Option<f64>,
    pub count: usize,
}

/// Equal-width bins over the observed range of `radius_fn`, with the mean of
/// `values` in each.
pub fn radial_profile(
    points: &PointCloud<f64>,
    values: &[f64],
    bins: usize,
    radius_fn: impl Fn(&[f64]) -> f64,
) -> Result<Vec<ProfileBin>> {
    if values.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: values.len(),
        });
    }
    let radii: Vec<f64> = points.points().map(radius_fn).collect();
    profile_by_position(&radii, values, bins)
}

/// [`radial_profile`] with positions already evaluated.
pub fn profile_by_position(
    positions: &[f64],
    values: &[f64],
    bins: usize,
) -> Result<Vec<ProfileBin>> {
    if values.len() != positions.len() {
        return Err(Error::DimensionMismatch {
            expected: positions.len(),
            found: values.len(),
        });
    }
    if bins < 2 {
        return Err(Error::domain(format!(
            "profiles need at least 2 bins, got {bins}"
        )));
    }
    if positions.is_empty() {
        return Err(Error::Empty("profile needs at least one point".into()));
    }
    let (lo, hi) = positions
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| {
            (a.min(r), b.max(r))
        });
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain("profile positions must be finite"));
    }
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (&r, &v) in positions.iter().zip(values) {
        let k = (((r - lo) / width) as usize).min(bins - 1);
        sums[k] += v;
        counts[k] += 1;
    }
    Ok((0..bins)
        .map(|k| ProfileBin {
            center: lo + (k as f64 + 0.5) * width,
            half_width: 0.5 * width,
            mean: (counts[k] > 0).then(|| sums[k] / counts[k] as f64),
            count: counts[k],
        })
        .collect())
}

/// Center of the bin with the largest mean.
pub fn profile_mode(bins: &[ProfileBin]) -> Option<f64> {
    bins.iter()
        .filter_map(|b| b.mean.map(|m| (b.center, m)))
        .fold(None, |best: Option<(f64, f64)>, (c, m)| match best {
            Some((_, bm)) if bm >= m => best,
            _ => Some((c, m)),
        })
        .map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> PointCloud<f64> {
        PointCloud::from_flat((0..n).map(|i| i as f64 / (n - 1) as f64).collect(), 1).unwrap()
    }

    #[test]
    fn constant_values() {
        let p = line(101);
        let bins = radial_profile(&p, &[3.5; 101], 7, |x| x[0]).unwrap();
        assert_eq!(bins.len(), 7);
        assert!(bins.iter().all(|b| b.mean == Some(3.5)));
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 101);
    }

    #[test]
    fn identity_values_track_centers() {
        let p = line(1000);
        let v: Vec<f64> = p.points().map(|x| x[0]).collect();
        for b in radial_profile(&p, &v, 10, |x| x[0]).unwrap() {
            assert!((b.mean.unwrap() - b.center).abs() <= b.half_width);
        }
    }

    #[test]
    fn empty_bins_are_absent() {
        let pos = [0.0, 0.05, 1.0];
        let bins = profile_by_position(&pos, &[1.0, 2.0, 5.0], 4).unwrap();
        assert_eq!(bins[0].mean, Some(1.5));
        assert!(bins[1].mean.is_none() && bins[2].mean.is_none());
        assert_eq!(bins[3].mean, Some(5.0));
        assert_eq!(profile_mode(&bins), Some(bins[3].center));
    }

    #[test]
    fn errors_and_single_position() {
        assert!(profile_by_position(&[0.0], &[1.0, 2.0], 3).is_err());
        assert!(profile_by_position(&[0.0], &[1.0], 1).is_err());
        assert!(profile_by_position(&[], &[], 3).is_err());
        let same = profile_by_position(&[2.0, 2.0], &[1.0, 3.0], 3).unwrap();
        assert_eq!(same[0].mean, Some(2.0));
    }
}
