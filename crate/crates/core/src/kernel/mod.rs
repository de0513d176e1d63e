//! Gaussian kernel, its closed-form boundary moments and the boundary
//! distance solver.
//!
//! The kernel is `K(z) = pi^(-m/2) exp(-|z|^2)`, which integrates to one over
//! `R^m`. Because it factors across orthogonal directions, its integral over a
//! half-space cut at signed distance `b/h` is `(1 + erf(b/h)) / 2` in every
//! dimension, and the expected boundary direction vector has the closed form
//! used by [`bde_magnitude_model`].

mod erf;
mod solver;

pub use erf::{erf, erfc};
pub use solver::{distance_objective, solve_boundary_distance, DistanceSolveResult, SolverOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bandwidth `h` and intrinsic dimension `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams<T> {
    h: T,
    m: T,
}

impl<T: Scalar> KernelParams<T> {
    pub fn new(h: T, m: T) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::domain(format!(
                "bandwidth must be positive and finite, got {h}"
            )));
        }
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::domain(format!(
                "dimension must be positive and finite, got {m}"
            )));
        }
        Ok(Self { h, m })
    }

    #[inline]
    pub fn h(&self) -> T {
        self.h
    }

    #[inline]
    pub fn m(&self) -> T {
        self.m
    }

    /// Same dimension, bandwidth multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(self.h * factor, self.m)
    }

    /// `pi^(-m/2)`, the kernel value at the origin.
    #[inline]
    pub fn normalization(&self) -> T {
        T::PI().powf(-self.m / T::lit(2.0))
    }

    /// `h^m`
    #[inline]
    pub fn volume_factor(&self) -> T {
        self.h.powf(self.m)
    }
}

/// `pi^(-m/2) exp(-t^2)` for a distance ratio `t = |x - y| / h`.
pub fn gaussian_kernel<T: Scalar>(t: T, m: T) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(Error::domain(format!(
            "kernel argument must be nonnegative, got {t}"
        )));
    }
    if !(m > T::zero()) {
        return Err(Error::domain(format!(
            "dimension must be positive, got {m}"
        )));
    }
    Ok(T::PI().powf(-m / T::lit(2.0)) * (-t * t).exp())
}

/// Zeroth moment of the kernel over the half-space lying within distance `b`
/// of the query: `(1 + erf(b/h)) / 2`. An infinite `b` gives exactly one.
pub fn m0_boundary<T: Scalar>(b: T, h: T) -> Result<T> {
    check_distance(b)?;
    check_bandwidth(h)?;
    Ok(m0_unchecked(b, h))
}

#[inline]
pub(crate) fn m0_unchecked<T: Scalar>(b: T, h: T) -> T {
    if b.is_infinite() {
        return T::one();
    }
    T::lit(0.5) * (T::one() + erf(b / h))
}

/// Expected norm of the boundary direction vector at distance `b` from a
/// boundary, for local density `f`: `f / (2 sqrt(pi)) * exp(-b^2/h^2)`.
pub fn bde_magnitude_model<T: Scalar>(f: T, b: T, h: T) -> Result<T> {
    if !(f >= T::zero()) {
        return Err(Error::domain(format!(
            "density must be nonnegative, got {f}"
        )));
    }
    check_distance(b)?;
    check_bandwidth(h)?;
    let z = b / h;
    Ok(f / (T::lit(2.0) * T::PI().sqrt()) * (-z * z).exp())
}

/// Ratio of the order-`h` boundary bias coefficients at bandwidths `2h` and `h`:
///
/// ```text
/// C = (1 + erf(b/2h)) exp(-b^2/4h^2) / ((1 + erf(b/h)) exp(-b^2/h^2))
/// ```
///
/// evaluated in log space. `C(0) = 1`; `C` dips to about 0.936 near
/// `b/h = 0.24`, so `2C - 1 > 0.87` always; it is increasing past that point and
/// `C = inf` for an infinite `b`.
pub fn richardson_ratio<T: Scalar>(b: T, h: T) -> Result<T> {
    richardson_ratio_with(b, h, RatioForm::MomentProduct)
}

/// Form of the bias coefficient `g(z)`, `z = b/h`, whose ratio
/// `C = g(z/2) / g(z)` drives the extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioForm {
    /// `g = (1 + erf z) exp(-z^2)`, the form in [`richardson_ratio`].
    #[default]
    MomentProduct,
    /// `g = exp(-z^2) / (1 + erf z)`, first over zeroth half-space moment.
    /// This is the coefficient of the order-`h` bias of the cut estimator
    /// when the cut sits at the true distance; it gives `C >= 1`.
    MomentQuotient,
}

impl std::str::FromStr for RatioForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "moment_product" | "product" => Ok(RatioForm::MomentProduct),
            "moment_quotient" | "quotient" => Ok(RatioForm::MomentQuotient),
            other => Err(Error::domain(format!("unknown ratio form `{other}`"))),
        }
    }
}

pub fn richardson_ratio_with<T: Scalar>(b: T, h: T, form: RatioForm) -> Result<T> {
    check_distance(b)?;
    check_bandwidth(h)?;
    if b.is_infinite() {
        return Ok(T::infinity());
    }
    let z = b / h;
    let half = T::lit(0.5);
    let log_erf = (T::one() + erf(z * half)).ln() - (T::one() + erf(z)).ln();
    let log_c = match form {
        RatioForm::MomentProduct => log_erf,
        RatioForm::MomentQuotient => -log_erf,
    } + T::lit(0.75) * z * z;
    Ok(log_c.exp())
}

fn check_distance<T: Scalar>(b: T) -> Result<()> {
    if !(b >= T::zero()) {
        return Err(Error::domain(format!(
            "distance must be nonnegative, got {b}"
        )));
    }
    Ok(())
}

fn check_bandwidth<T: Scalar>(h: T) -> Result<()> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::domain(format!(
            "bandwidth must be positive and finite, got {h}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    #[test]
    fn quotient_ratio_cancels_cut_bias_coefficient() {
        // 2C h g(z) = 2h g(z/2) with g = exp(-z^2) / (1 + erf z).
        let g = |z: f64| (-z * z).exp() / (1.0 + erf(z));
        for z in [0.0, 0.1, 0.5, 1.0, 2.5] {
            let c = richardson_ratio_with(z * 0.3, 0.3, RatioForm::MomentQuotient).unwrap();
            assert!(
                (c * g(z) - g(z / 2.0)).abs() < 1e-14 * g(z / 2.0).max(1.0),
                "z = {z}"
            );
            assert!(c >= 1.0);
            let p = richardson_ratio_with(z * 0.3, 0.3, RatioForm::MomentProduct).unwrap();
            assert_eq!(p, richardson_ratio(z * 0.3, 0.3).unwrap());
        }
        assert_eq!(
            richardson_ratio_with(0.0, 1.0, RatioForm::MomentQuotient).unwrap(),
            1.0
        );
        assert!(
            richardson_ratio_with(f64::INFINITY, 1.0, RatioForm::MomentQuotient)
                .unwrap()
                .is_infinite()
        );
    }

    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kernel_values() {
        assert!((gaussian_kernel(0.0_f64, 2.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((gaussian_kernel(0.0_f64, 1.0).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!((gaussian_kernel(1.0_f64, 2.0).unwrap() - 0.11709966304863832).abs() < 1e-15);
        assert!(gaussian_kernel(-0.1_f64, 2.0).is_err());
        assert!(gaussian_kernel(0.1_f64, 0.0).is_err());
        let a = gaussian_kernel(0.3_f64, 2.0).unwrap();
        let b = gaussian_kernel(0.31_f64, 2.0).unwrap();
        assert!(b < a);
    }

    #[test]
    fn params_validation() {
        assert!(KernelParams::new(0.0, 2.0).is_err());
        assert!(KernelParams::new(0.1, -1.0).is_err());
        assert!(KernelParams::new(f64::NAN, 1.0).is_err());
        let p = KernelParams::new(0.5, 1.0).unwrap();
        assert!((p.normalization() - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert_eq!(p.scaled(2.0).unwrap().h(), 1.0);
    }

    #[test]
    fn boundary_moment() {
        assert_eq!(m0_boundary(0.0_f64, 0.2).unwrap(), 0.5);
        assert!((m0_boundary(100.0_f64 * 0.3, 0.3).unwrap() - 1.0).abs() < 1e-15);
        assert!((m0_boundary(0.7_f64, 0.7).unwrap() - 0.92135039647485743).abs() < 1e-14);
        assert_eq!(m0_boundary(f64::INFINITY, 0.1).unwrap(), 1.0);
        assert!(m0_boundary(-1e-3, 0.1).is_err());
    }

    #[test]
    fn magnitude_model() {
        assert!(
            (bde_magnitude_model(1.0_f64, 0.0, 1.0).unwrap() - 0.28209479177387814).abs() < 1e-15
        );
        assert_eq!(bde_magnitude_model(0.0_f64, 0.4, 0.2).unwrap(), 0.0);
        assert!(
            (bde_magnitude_model(1.0_f64, 1.0, 1.0).unwrap() - 0.10377687435514868).abs() < 1e-15
        );
        assert!(bde_magnitude_model(-1.0_f64, 0.0, 1.0).is_err());
    }

    #[test]
    fn richardson_ratio_values() {
        assert_eq!(richardson_ratio(0.0_f64, 0.1).unwrap(), 1.0);
        for &(z, want) in &[
            (0.5_f64, 1.012524579856959),
            (1.0, 1.7468371853452766),
            (2.0, 18.549201532027777),
            (3.0, 839.59393772118154),
        ] {
            let got = richardson_ratio(z * 0.25, 0.25).unwrap();
            assert!((got / want - 1.0).abs() < 1e-13, "C({z}) = {got}");
        }
        assert!(richardson_ratio(f64::INFINITY, 0.1).unwrap().is_infinite());
    }

    #[test]
    fn richardson_ratio_shape() {
        // Minimum 0.93611 at b/h = 0.236, back to one at b/h = 0.4779.
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let z = i as f64 * 0.01;
            let c = richardson_ratio(z, 1.0_f64).unwrap();
            assert!(c >= 0.9361, "C({z}) = {c}");
            assert!(2.0 * c - 1.0 > 0.87);
            if z <= 0.23 {
                assert!(c <= prev);
            } else if z >= 0.25 {
                assert!(c > prev);
            }
            if z >= 0.48 {
                assert!(c > 1.0);
            }
            prev = c;
        }
        assert!((richardson_ratio(0.236_f64, 1.0).unwrap() - 0.936111169025289).abs() < 1e-12);
    }
}
