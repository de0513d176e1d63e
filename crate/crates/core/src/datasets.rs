//! Seedable synthetic datasets with exact density labels.
//!
//! Every generator draws from two independent ChaCha8 streams derived from
//! one 64-bit seed: stream 0 feeds proposals and stream 1 feeds acceptance
//! draws. Output is bit-identical for a given `(kind, count, seed)`.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::{write_csv, PointCloud};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Scalar;

const PROPOSAL_STREAM: u64 = 0;
const ACCEPTANCE_STREAM: u64 = 1;
const QUADRATURE_TOL: f64 = 1e-12;
/// Target-count sampling gives up after this many proposals per requested point.
const MAX_PROPOSALS_PER_POINT: usize = 10_000;
const HEMISPHERE_MAX_RADIUS: f64 = 7.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Density `(2/(3 pi))(2 - r^2)` on the unit disk.
    Disk,
    /// Standard Gaussian restricted to `x1 >= 0`.
    HalfplaneGaussian,
    /// Density `(1 - r^2)^(-1/2) / alpha` on the upper unit hemisphere over an
    /// oscillating planar region.
    HemisphereOscillating,
    /// Rate-one exponential on `[0, inf)`.
    ExponentialHalfLine,
    /// Uniform on the unit disk.
    UniformDisk,
    /// Uniform on the unit circle in the plane.
    UnitCircle,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 6] = [
        GeneratorKind::Disk,
        GeneratorKind::HalfplaneGaussian,
        GeneratorKind::HemisphereOscillating,
        GeneratorKind::ExponentialHalfLine,
        GeneratorKind::UniformDisk,
        GeneratorKind::UnitCircle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Disk => "disk",
            GeneratorKind::HalfplaneGaussian => "halfplane_gaussian",
            GeneratorKind::HemisphereOscillating => "hemisphere_oscillating",
            GeneratorKind::ExponentialHalfLine => "exponential_half_line",
            GeneratorKind::UniformDisk => "uniform_disk",
            GeneratorKind::UnitCircle => "unit_circle",
        }
    }

    /// Intrinsic dimension of the support.
    pub fn intrinsic_dim(self) -> usize {
        match self {
            GeneratorKind::ExponentialHalfLine | GeneratorKind::UnitCircle => 1,
            _ => 2,
        }
    }

    pub fn ambient_dim(self) -> usize {
        match self {
            GeneratorKind::ExponentialHalfLine => 1,
            GeneratorKind::HemisphereOscillating => 3,
            _ => 2,
        }
    }

    pub fn has_boundary_distance(self) -> bool {
        !matches!(
            self,
            GeneratorKind::HemisphereOscillating | GeneratorKind::UnitCircle
        )
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::domain(format!("unknown generator kind `{s}`")))
    }
}

/// Number of proposals to draw, or number of accepted points to reach.
/// Generators without a rejection step treat both as the output size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCount {
    Proposals(usize),
    Target(usize),
}

impl SampleCount {
    pub fn value(self) -> usize {
        match self {
            SampleCount::Proposals(n) | SampleCount::Target(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub count: SampleCount,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, count: SampleCount, seed: u64) -> Result<Self> {
        let spec = Self { kind, count, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn proposals(kind: GeneratorKind, n: usize, seed: u64) -> Result<Self> {
        Self::new(kind, SampleCount::Proposals(n), seed)
    }

    pub fn target(kind: GeneratorKind, n: usize, seed: u64) -> Result<Self> {
        Self::new(kind, SampleCount::Target(n), seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count.value() == 0 {
            return Err(Error::domain("sample count must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn generate(&self) -> Result<LabeledCloud<f64>> {
        self.validate()?;
        let (count, seed) = (self.count, self.seed);
        match self.kind {
            GeneratorKind::Disk => disk(count, seed),
            GeneratorKind::HalfplaneGaussian => halfplane_gaussian(count, seed),
            GeneratorKind::HemisphereOscillating => hemisphere(count, seed),
            GeneratorKind::ExponentialHalfLine => {
                Ok(sample_exponential_half_line(count.value(), seed))
            }
            GeneratorKind::UniformDisk => Ok(sample_uniform_disk(count.value(), seed)),
            GeneratorKind::UnitCircle => Ok(sample_unit_circle(count.value(), seed)),
        }
    }

    /// Analytic density at a point of the support.
    pub fn true_density(&self, x: &[f64]) -> f64 {
        true_density(self.kind, x)
    }
}

/// Analytic density of `kind` at a point of its support.
pub fn true_density(kind: GeneratorKind, x: &[f64]) -> f64 {
    let r2 = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
    match kind {
        GeneratorKind::Disk => disk_density(r2(x).sqrt()),
        GeneratorKind::HalfplaneGaussian => (-0.5 * r2(x)).exp() / PI,
        GeneratorKind::HemisphereOscillating => hemisphere_density(r2(x).sqrt()),
        GeneratorKind::ExponentialHalfLine => (-x[0]).exp(),
        GeneratorKind::UniformDisk => 1.0 / PI,
        GeneratorKind::UnitCircle => 0.5 / PI,
    }
}

/// Samples with their analytic density and, where known, the geodesic
/// distance to the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud<T> {
    pub cloud: PointCloud<T>,
    pub true_density: Vec<T>,
    pub boundary_distance_true: Option<Vec<T>>,
}

impl<T: Scalar> LabeledCloud<T> {
    pub fn new(
        cloud: PointCloud<T>,
        true_density: Vec<T>,
        boundary_distance_true: Option<Vec<T>>,
    ) -> Result<Self> {
        let n = cloud.len();
        if true_density.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: true_density.len(),
            });
        }
        if let Some(b) = &boundary_distance_true {
            if b.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: b.len(),
                });
            }
        }
        if let Some(bad) = true_density.iter().find(|f| !(**f > T::zero())) {
            return Err(Error::domain(format!(
                "true density must be positive, got {bad}"
            )));
        }
        Ok(Self {
            cloud,
            true_density,
            boundary_distance_true,
        })
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn cast<U: Scalar>(&self) -> LabeledCloud<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        LabeledCloud {
            cloud: self.cloud.cast(),
            true_density: conv(&self.true_density),
            boundary_distance_true: self.boundary_distance_true.as_deref().map(conv),
        }
    }

    /// Label rows: `true_density,boundary_distance_true`, the second field
    /// empty when unknown.
    pub fn write_labels(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# true_density,boundary_distance_true")?;
        for (i, f) in self.true_density.iter().enumerate() {
            match &self.boundary_distance_true {
                Some(b) => writeln!(w, "{f},{}", b[i])?,
                None => writeln!(w, "{f},")?,
            }
        }
        Ok(())
    }

    /// Writes `points.csv` and `labels.csv` into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let points = dir.join("points.csv");
        let labels = dir.join("labels.csv");
        write_file(&points, |w| write_csv(&self.cloud, w))?;
        write_file(&labels, |w| self.write_labels(w))?;
        Ok((points, labels))
    }

    /// Reads a pair written by [`LabeledCloud::save`].
    pub fn load(points: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self> {
        let cloud = crate::pointcloud::load_csv(points)?;
        let path = labels.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut dens = Vec::new();
        let mut dist = Vec::new();
        let mut any_missing = false;
        for (row, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |s: &str| {
                s.trim().parse::<T>().map_err(|_| Error::Parse {
                    row: row + 1,
                    message: format!("not a number: `{s}`"),
                })
            };
            let (f, b) = line.split_once(',').unwrap_or((line, ""));
            dens.push(parse(f)?);
            if b.trim().is_empty() {
                any_missing = true;
            } else {
                dist.push(parse(b)?);
            }
        }
        let dist = if any_missing {
            if !dist.is_empty() {
                return Err(Error::Parse {
                    row: 0,
                    message: "boundary distance given for some rows only".into(),
                });
            }
            None
        } else {
            Some(dist)
        };
        Self::new(cloud, dens, dist)
    }
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Proposal and acceptance streams for one seed.
pub fn rng_streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut proposals = ChaCha8Rng::seed_from_u64(seed);
    proposals.set_stream(PROPOSAL_STREAM);
    let mut acceptance = ChaCha8Rng::seed_from_u64(seed);
    acceptance.set_stream(ACCEPTANCE_STREAM);
    (proposals, acceptance)
}

/// Keeps each proposal `p` when a fresh uniform `xi` satisfies
/// `xi < ratio(p) / bound`.
pub fn rejection_sample<P, R: Rng + ?Sized>(
    proposals: impl IntoIterator<Item = P>,
    ratio: impl Fn(&P) -> f64,
    bound: f64,
    rng: &mut R,
) -> Result<Vec<P>> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::domain(format!(
            "rejection bound must be positive, got {bound}"
        )));
    }
    let mut kept = Vec::new();
    for p in proposals {
        if accept(ratio(&p), bound, rng)? {
            kept.push(p);
        }
    }
    Ok(kept)
}

fn accept<R: Rng + ?Sized>(ratio: f64, bound: f64, rng: &mut R) -> Result<bool> {
    if !(0.0..=bound * (1.0 + 1e-12)).contains(&ratio) {
        return Err(Error::BoundViolated { ratio, bound });
    }
    let xi: f64 = rng.random();
    Ok(xi * bound < ratio)
}

/// Runs `propose` until the proposal budget or target count is reached.
/// `propose` returns `None` for proposals outside the support, which count
/// against the budget but skip the acceptance draw.
fn sample_loop<P>(
    count: SampleCount,
    seed: u64,
    mut propose: impl FnMut(&mut ChaCha8Rng) -> Option<P>,
    ratio: impl Fn(&P) -> f64,
    bound: f64,
) -> Result<Vec<P>> {
    let (mut prop_rng, mut acc_rng) = rng_streams(seed);
    let mut kept = Vec::new();
    let mut step = |kept: &mut Vec<P>| -> Result<()> {
        if let Some(p) = propose(&mut prop_rng) {
            if accept(ratio(&p), bound, &mut acc_rng)? {
                kept.push(p);
            }
        }
        Ok(())
    };
    match count {
        SampleCount::Proposals(n) => {
            for _ in 0..n {
                step(&mut kept)?;
            }
        }
        SampleCount::Target(n) => {
            let budget = n.saturating_mul(MAX_PROPOSALS_PER_POINT);
            let mut used = 0usize;
            while kept.len() < n {
                if used == budget {
                    return Err(Error::Degenerate(format!(
                        "only {} of {n} points accepted after {budget} proposals",
                        kept.len()
                    )));
                }
                step(&mut kept)?;
                used += 1;
            }
        }
    }
    Ok(kept)
}

fn square_proposal(rng: &mut ChaCha8Rng) -> [f64; 2] {
    [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
}

fn disk_density(r: f64) -> f64 {
    2.0 / (3.0 * PI) * (2.0 - r * r)
}

const DISK_BOUND: f64 = 4.0 / 3.0;

fn disk(count: SampleCount, seed: u64) -> Result<LabeledCloud<f64>> {
    let pts = sample_loop(
        count,
        seed,
        |rng| {
            let p = square_proposal(rng);
            (p[0] * p[0] + p[1] * p[1] <= 1.0).then_some(p)
        },
        // f / f0 with f0 = 1/pi uniform on the disk.
        |p| PI * disk_density((p[0] * p[0] + p[1] * p[1]).sqrt()),
        DISK_BOUND,
    )?;
    let r: Vec<f64> = pts
        .iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
        .collect();
    LabeledCloud::new(
        PointCloud::from_rows(&pts)?,
        r.iter().map(|&r| disk_density(r)).collect(),
        Some(r.iter().map(|r| 1.0 - r).collect()),
    )
}

/// Disk density `(2/(3 pi))(2 - r^2)` from `n_proposals` uniform draws in the
/// square `[-1, 1]^2`.
pub fn sample_disk(n_proposals: usize, seed: u64) -> Result<LabeledCloud<f64>> {
    GeneratorSpec::proposals(GeneratorKind::Disk, n_proposals, seed)?.generate()
}

fn halfplane_gaussian(count: SampleCount, seed: u64) -> Result<LabeledCloud<f64>> {
    // The ratio is 2 on the half-plane and 0 off it, equal to the bound, so no
    // acceptance draws are needed beyond the support test.
    let pts = sample_loop(
        count,
        seed,
        |rng| {
            let p: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            (p[0] >= 0.0).then_some(p)
        },
        |_| 2.0,
        2.0,
    )?;
    let cloud = PointCloud::from_rows(&pts)?;
    LabeledCloud::new(
        cloud,
        pts.iter()
            .map(|p| true_density(GeneratorKind::HalfplaneGaussian, p))
            .collect(),
        Some(pts.iter().map(|p| p[0]).collect()),
    )
}

/// Standard Gaussian in the plane, keeping draws with `x1 >= 0`.
pub fn sample_halfplane_gaussian(n: usize, seed: u64) -> Result<LabeledCloud<f64>> {
    GeneratorSpec::proposals(GeneratorKind::HalfplaneGaussian, n, seed)?.generate()
}

/// Outer radius of the oscillating planar region at angle `theta`.
pub fn hemisphere_region_radius(theta: f64) -> f64 {
    (6.0 * (theta - PI / 12.0)).sin() / 8.0 + 0.75
}

fn hemisphere_alpha_with(limit: impl Fn(f64) -> f64) -> f64 {
    adaptive_simpson(
        |t| -0.5 * (1.0 - limit(t).powi(2)).ln(),
        0.0,
        2.0 * PI,
        QUADRATURE_TOL,
    )
}

/// Normalization of `(1 - r^2)^(-1/2)` over the hemisphere cap above the
/// oscillating region, about 2.81893.
pub fn hemisphere_alpha() -> f64 {
    hemisphere_alpha_with(hemisphere_region_radius)
}

fn region_area_with(limit: impl Fn(f64) -> f64) -> f64 {
    adaptive_simpson(|t| 0.5 * limit(t).powi(2), 0.0, 2.0 * PI, QUADRATURE_TOL)
}

/// Planar area of the oscillating region by quadrature; `73 pi / 128` exactly.
pub fn disk_initial_norm_check() -> f64 {
    region_area_with(hemisphere_region_radius)
}

fn hemisphere_density(r: f64) -> f64 {
    1.0 / ((1.0 - r * r).sqrt() * hemisphere_alpha_cached())
}

fn hemisphere_alpha_cached() -> f64 {
    static ALPHA: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *ALPHA.get_or_init(hemisphere_alpha)
}

fn hemisphere(count: SampleCount, seed: u64) -> Result<LabeledCloud<f64>> {
    let alpha = hemisphere_alpha_cached();
    let area = 73.0 * PI / 128.0;
    // Density on the sphere induced by uniform planar proposals.
    let q = |r: f64| (1.0 - r * r).sqrt() / area;
    let f = |r: f64| 1.0 / ((1.0 - r * r).sqrt() * alpha);
    let bound = f(HEMISPHERE_MAX_RADIUS) / q(HEMISPHERE_MAX_RADIUS);
    let pts = sample_loop(
        count,
        seed,
        |rng| {
            let p = square_proposal(rng);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            (r <= hemisphere_region_radius(p[1].atan2(p[0]))).then_some((p, r))
        },
        |&(_, r)| f(r) / q(r),
        bound,
    )?;
    let rows: Vec<[f64; 3]> = pts
        .iter()
        .map(|&([x, y], r)| [x, y, (1.0 - r * r).max(0.0).sqrt()])
        .collect();
    LabeledCloud::new(
        PointCloud::from_rows(&rows)?,
        pts.iter().map(|&(_, r)| f(r)).collect(),
        None,
    )
}

/// Hemisphere dataset from `n_proposals` uniform draws in `[-1, 1]^2`.
pub fn sample_hemisphere(n_proposals: usize, seed: u64) -> Result<LabeledCloud<f64>> {
    GeneratorSpec::proposals(GeneratorKind::HemisphereOscillating, n_proposals, seed)?.generate()
}

/// Geodesic distance on the unit sphere from `p` to the boundary curve of the
/// hemisphere dataset, by dense search over the curve parameter followed by
/// golden-section refinement.
pub fn hemisphere_boundary_distance(p: &[f64]) -> f64 {
    const COARSE: usize = 720;
    let angle = |phi: f64| {
        let r = hemisphere_region_radius(phi);
        let q = [r * phi.cos(), r * phi.sin(), (1.0 - r * r).sqrt()];
        (p[0] * q[0] + p[1] * q[1] + p[2] * q[2])
            .clamp(-1.0, 1.0)
            .acos()
    };
    let step = 2.0 * PI / COARSE as f64;
    let best = (0..COARSE)
        .map(|k| k as f64 * step)
        .min_by(|a, b| angle(*a).total_cmp(&angle(*b)))
        .unwrap_or(0.0);
    let (mut lo, mut hi) = (best - step, best + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if angle(a) < angle(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    angle(0.5 * (lo + hi))
}

/// Boundary distance used for band membership: the label when present,
/// otherwise a numerical geodesic distance where the geometry allows it.
pub fn reference_boundary_distance(
    kind: GeneratorKind,
    x: &[f64],
    label: Option<f64>,
) -> Option<f64> {
    label.or_else(|| {
        (kind == GeneratorKind::HemisphereOscillating).then(|| hemisphere_boundary_distance(x))
    })
}

/// `n` draws of the rate-one exponential, one coordinate each.
pub fn sample_exponential_half_line(n: usize, seed: u64) -> LabeledCloud<f64> {
    let (mut rng, _) = rng_streams(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.sample(Exp1)).collect();
    let dens = xs.iter().map(|x| (-x).exp()).collect();
    let cloud = PointCloud::from_flat(xs.clone(), 1).expect("finite samples");
    LabeledCloud {
        cloud,
        true_density: dens,
        boundary_distance_true: Some(xs),
    }
}

/// `n` uniform points on the unit disk.
pub fn sample_uniform_disk(n: usize, seed: u64) -> LabeledCloud<f64> {
    let (mut rng, _) = rng_streams(seed);
    let mut coords = Vec::with_capacity(2 * n);
    let mut dist = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.random::<f64>().sqrt();
        let t = rng.random_range(0.0..2.0 * PI);
        coords.extend_from_slice(&[r * t.cos(), r * t.sin()]);
        dist.push(1.0 - r);
    }
    LabeledCloud {
        cloud: PointCloud::from_flat(coords, 2).expect("finite samples"),
        true_density: vec![1.0 / PI; n],
        boundary_distance_true: Some(dist),
    }
}

/// `n` uniform points on the unit circle.
pub fn sample_unit_circle(n: usize, seed: u64) -> LabeledCloud<f64> {
    let (mut rng, _) = rng_streams(seed);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let t = rng.random_range(-PI..PI);
        coords.extend_from_slice(&[t.cos(), t.sin()]);
    }
    LabeledCloud {
        cloud: PointCloud::from_flat(coords, 2).expect("finite samples"),
        true_density: vec![0.5 / PI; n],
        boundary_distance_true: None,
    }
}

/// Closed-form CDF of the planar radius for the rejection-sampled generators.
pub fn radial_cdf(kind: GeneratorKind, r: f64) -> f64 {
    match kind {
        GeneratorKind::Disk => {
            let r = r.clamp(0.0, 1.0);
            4.0 / 3.0 * (r * r - r.powi(4) / 4.0)
        }
        GeneratorKind::HalfplaneGaussian => 1.0 - (-0.5 * r.max(0.0).powi(2)).exp(),
        GeneratorKind::HemisphereOscillating => {
            let r = r.max(0.0);
            hemisphere_alpha_with(|t| hemisphere_region_radius(t).min(r))
                / hemisphere_alpha_cached()
        }
        GeneratorKind::UniformDisk => r.clamp(0.0, 1.0).powi(2),
        GeneratorKind::ExponentialHalfLine => 1.0 - (-r.max(0.0)).exp(),
        GeneratorKind::UnitCircle => {
            if r >= 1.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radius(p: &[f64]) -> f64 {
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    /// Two-sided Kolmogorov statistic of `xs` against `cdf`.
    fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Critical value at significance 0.001 for large samples.
    fn ks_critical(n: usize) -> f64 {
        1.9495 / (n as f64).sqrt()
    }

    #[test]
    fn rejection_trivial_ratios() {
        let (_, mut rng) = rng_streams(3);
        let all = rejection_sample(0..1000, |_| 2.5, 2.5, &mut rng).unwrap();
        assert_eq!(all.len(), 1000);
        let none = rejection_sample(0..1000, |_| 0.0, 2.5, &mut rng).unwrap();
        assert!(none.is_empty());
        let err = rejection_sample(0..10, |&i| if i == 7 { 3.0 } else { 1.0 }, 2.5, &mut rng);
        assert!(matches!(err, Err(Error::BoundViolated { ratio, .. }) if ratio == 3.0));
        assert!(rejection_sample(0..1, |_| 1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn disk_acceptance_fraction() {
        let (_, mut rng) = rng_streams(11);
        let mut prop = rng_streams(12).0;
        let radii: Vec<f64> = (0..12_500).map(|_| prop.random::<f64>().sqrt()).collect();
        let kept =
            rejection_sample(radii, |r| PI * disk_density(*r), DISK_BOUND, &mut rng).unwrap();
        let frac = kept.len() as f64 / 12_500.0;
        assert!((frac - 0.75).abs() < 0.02, "{frac}");
    }

    #[test]
    fn disk_counts_and_labels() {
        let d = sample_disk(12_500, 7).unwrap();
        assert!((d.len() as f64 - 7363.0).abs() < 150.0, "{}", d.len());
        let b = d.boundary_distance_true.as_ref().unwrap();
        for (i, p) in d.cloud.points().enumerate() {
            let r = radius(p);
            assert!(r <= 1.0);
            assert!((b[i] - (1.0 - r)).abs() < 1e-15);
            assert!((d.true_density[i] - disk_density(r)).abs() < 1e-15);
        }
    }

    #[test]
    fn disk_radial_histogram_chi_square() {
        let d = sample_disk(12_500, 21).unwrap();
        let n = d.len() as f64;
        let bins = 10;
        let mut counts = vec![0usize; bins];
        for p in d.cloud.points() {
            counts[((radius(p) * bins as f64) as usize).min(bins - 1)] += 1;
        }
        for (k, &c) in counts.iter().enumerate() {
            let lo = k as f64 / bins as f64;
            let hi = (k + 1) as f64 / bins as f64;
            let p = radial_cdf(GeneratorKind::Disk, hi) - radial_cdf(GeneratorKind::Disk, lo);
            let sd = (n * p * (1.0 - p)).sqrt();
            assert!(
                (c as f64 - n * p).abs() < 3.0 * sd + 1.0,
                "bin {k}: {c} vs {}",
                n * p
            );
        }
    }

    #[test]
    fn halfplane_counts_and_moments() {
        let d = sample_halfplane_gaussian(20_000, 5).unwrap();
        assert!((d.len() as f64 - 10_000.0).abs() < 200.0);
        let n = d.len() as f64;
        assert!(d.cloud.points().all(|p| p[0] >= 0.0));
        let mean_y: f64 = d.cloud.points().map(|p| p[1]).sum::<f64>() / n;
        assert!(mean_y.abs() < 3.0 / n.sqrt());
        let p = d.cloud.point(0);
        let want = 2.0 / (2.0 * PI) * (-0.5 * (p[0] * p[0] + p[1] * p[1])).exp();
        assert!((d.true_density[0] - want).abs() < 1e-15);
    }

    #[test]
    fn alpha_and_region_area() {
        assert!((hemisphere_alpha() - 2.81893).abs() < 1e-4);
        assert!((disk_initial_norm_check() - 73.0 * PI / 128.0).abs() < 1e-10);
        let flat = hemisphere_alpha_with(|_| 0.75);
        assert!((flat - 2.0 * PI * (-0.5 * (1.0f64 - 9.0 / 16.0).ln())).abs() < 1e-10);
        assert!((flat - 2.597_087_3).abs() < 1e-6);
        let flat_area = region_area_with(|_| 0.75);
        assert!((flat_area - 2.0 * PI * 9.0 / 32.0).abs() < 1e-10);
    }

    #[test]
    fn hemisphere_geometry() {
        let d = sample_hemisphere(20_000, 9).unwrap();
        assert!(d.boundary_distance_true.is_none());
        assert_eq!(d.cloud.dim(), 3);
        for p in d.cloud.points() {
            let norm2: f64 = p.iter().map(|v| v * v).sum();
            assert!((norm2 - 1.0).abs() < 1e-12);
            assert!(p[2] >= 0.0);
            assert!(radius(p) <= hemisphere_region_radius(p[1].atan2(p[0])));
        }
    }

    #[test]
    fn hemisphere_boundary_distance_matches_meridian_on_axis() {
        // On the x-axis the boundary radius is stationary in the angle, so the
        // closest boundary point lies on the same meridian.
        for r in [0.0, 0.3, 0.6, 0.62] {
            let p = [r, 0.0, (1.0f64 - r * r).sqrt()];
            let want = (5.0f64 / 8.0).asin() - r.asin();
            assert!(
                (hemisphere_boundary_distance(&p) - want).abs() < 1e-9,
                "{r}"
            );
        }
        let q = [0.0, 0.0, 1.0];
        let nearest = (0..3600)
            .map(|k| hemisphere_region_radius(k as f64 * PI / 1800.0))
            .fold(f64::INFINITY, f64::min);
        assert!((hemisphere_boundary_distance(&q) - nearest.asin()).abs() < 1e-9);
        assert_eq!(
            reference_boundary_distance(GeneratorKind::Disk, &q, Some(0.5)),
            Some(0.5)
        );
        assert_eq!(
            reference_boundary_distance(GeneratorKind::UnitCircle, &q, None),
            None
        );
    }

    #[test]
    fn hemisphere_acceptance_matches_closed_form() {
        // Expected kept fraction of all proposals: (A/4) * (15/64) * alpha / A.
        let want = 0.25 * (15.0 / 64.0) * hemisphere_alpha();
        let d = sample_hemisphere(50_000, 1).unwrap();
        let frac = d.len() as f64 / 50_000.0;
        let sd = (want * (1.0 - want) / 50_000.0).sqrt();
        assert!((frac - want).abs() < 4.0 * sd, "{frac} vs {want}");
    }

    #[test]
    fn hemisphere_outer_band_enrichment() {
        // Mass in r in [0.8, 7/8] relative to uniform-planar sampling grows by
        // the band average of f/q over the region average of f/q.
        let band = |r: f64| (0.8..=HEMISPHERE_MAX_RADIUS).contains(&r);
        let d = sample_hemisphere(200_000, 4).unwrap();
        let frac_f = d.cloud.points().filter(|p| band(radius(p))).count() as f64 / d.len() as f64;
        let (mut prop, _) = rng_streams(99);
        let mut region = 0usize;
        let mut in_band = 0usize;
        for _ in 0..400_000 {
            let p = square_proposal(&mut prop);
            let r = radius(&p);
            if r <= hemisphere_region_radius(p[1].atan2(p[0])) {
                region += 1;
                in_band += band(r) as usize;
            }
        }
        let frac_q = in_band as f64 / region as f64;
        let mass = |lo: f64| {
            hemisphere_alpha_with(|t| hemisphere_region_radius(t).min(HEMISPHERE_MAX_RADIUS))
                - hemisphere_alpha_with(|t| hemisphere_region_radius(t).min(lo))
        };
        let area = |lo: f64| {
            region_area_with(|t| hemisphere_region_radius(t).min(HEMISPHERE_MAX_RADIUS))
                - region_area_with(|t| hemisphere_region_radius(t).min(lo))
        };
        let predicted = (mass(0.8) / hemisphere_alpha()) / (area(0.8) / disk_initial_norm_check());
        assert!(predicted > 1.5);
        assert!(
            (frac_f / frac_q / predicted - 1.0).abs() < 0.08,
            "{} vs {predicted}",
            frac_f / frac_q
        );
    }

    #[test]
    fn radial_ks_all_generators() {
        for (kind, count) in [
            (GeneratorKind::Disk, 12_500),
            (GeneratorKind::HalfplaneGaussian, 20_000),
            (GeneratorKind::HemisphereOscillating, 50_000),
            (GeneratorKind::UniformDisk, 5_000),
        ] {
            let d = GeneratorSpec::proposals(kind, count, 17)
                .unwrap()
                .generate()
                .unwrap();
            let r: Vec<f64> = d.cloud.points().map(radius).collect();
            let n = r.len();
            let ks = ks_statistic(r, |x| radial_cdf(kind, x));
            assert!(ks < ks_critical(n), "{kind}: {ks} vs {}", ks_critical(n));
        }
        let e = sample_exponential_half_line(20_000, 17);
        let ks = ks_statistic(e.cloud.as_flat().to_vec(), |x| {
            radial_cdf(GeneratorKind::ExponentialHalfLine, x)
        });
        assert!(ks < ks_critical(20_000));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        for kind in GeneratorKind::ALL {
            let spec = GeneratorSpec::proposals(kind, 3000, 42).unwrap();
            let a = spec.generate().unwrap();
            let b = spec.generate().unwrap();
            assert_eq!(a, b, "{kind}");
            let c = spec.with_seed(43).generate().unwrap();
            assert_ne!(a.cloud, c.cloud, "{kind}");
            assert_eq!(a.cloud.dim(), kind.ambient_dim());
            assert_eq!(
                a.boundary_distance_true.is_some(),
                kind.has_boundary_distance()
            );
        }
    }

    #[test]
    fn target_counts_are_exact() {
        for kind in GeneratorKind::ALL {
            let d = GeneratorSpec::target(kind, 1234, 8)
                .unwrap()
                .generate()
                .unwrap();
            assert_eq!(d.len(), 1234, "{kind}");
        }
        assert!(GeneratorSpec::target(GeneratorKind::Disk, 0, 1).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [GeneratorKind::Disk, GeneratorKind::HemisphereOscillating] {
            let d = GeneratorSpec::proposals(kind, 500, 2)
                .unwrap()
                .generate()
                .unwrap();
            let (p, l) = d.save(dir.path().join(kind.name())).unwrap();
            let back = LabeledCloud::<f64>::load(&p, &l).unwrap();
            assert_eq!(back, d);
        }
        let text =
            std::fs::read_to_string(dir.path().join("hemisphere_oscillating/labels.csv")).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn kind_parsing() {
        for kind in GeneratorKind::ALL {
            assert_eq!(kind.name().parse::<GeneratorKind>().unwrap(), kind);
        }
        assert_eq!(
            "halfplane-gaussian".parse::<GeneratorKind>().unwrap(),
            GeneratorKind::HalfplaneGaussian
        );
        assert!("torus".parse::<GeneratorKind>().is_err());
    }

    #[test]
    fn label_validation() {
        let c = PointCloud::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(LabeledCloud::new(c.clone(), vec![1.0], None).is_err());
        assert!(LabeledCloud::new(c.clone(), vec![1.0, 0.0], None).is_err());
        assert!(LabeledCloud::new(c.clone(), vec![1.0, 1.0], Some(vec![0.0])).is_err());
        let ok = LabeledCloud::new(c, vec![1.0, 0.5], Some(vec![0.0, 1.0])).unwrap();
        assert_eq!(ok.cast::<f32>().true_density, vec![1.0f32, 0.5]);
    }
}
