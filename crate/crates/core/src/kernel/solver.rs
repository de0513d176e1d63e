//! Inversion of the KDE/BDE ratio into a boundary distance.
//!
//! For the Gaussian kernel the large-sample ratio `c = f / (sqrt(pi) |mu|)` at
//! distance `b` from the boundary is `(1 + erf(b/h)) exp(b^2/h^2)`. The solver
//! finds the root of `F(b) = (1 + erf(b/h)) exp(b^2/h^2) - c` on `b >= 0`.

use serde::{Deserialize, Serialize};

use super::erf;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Past this ratio `b/h` the exponential is formed from its logarithm.
const LOG_SPACE_RATIO: f64 = 25.0;
/// Ratios above `exp(LOG_FORM_THRESHOLD)` are solved on `ln F`.
const LOG_FORM_THRESHOLD: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSolveResult<T> {
    pub b_hat: T,
    pub iterations: usize,
    /// `|F(b_hat)| / max(1, c)`.
    pub residual: T,
    /// The ratio was below one, so no nonnegative root exists and `b_hat = 0`.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10).max(T::lit(64.0) * T::epsilon()),
            max_iter: 50,
        }
    }
}

/// Returns `(F(b), F'(b))` with
/// `F'(b) = 2/(sqrt(pi) h) + 2 (1 + erf(b/h)) exp(b^2/h^2) b / h^2`.
pub fn distance_objective<T: Scalar>(b: T, c: T, h: T) -> Result<(T, T)> {
    if !(b >= T::zero()) {
        return Err(Error::domain(format!(
            "distance must be nonnegative, got {b}"
        )));
    }
    if !(c >= T::zero()) {
        return Err(Error::domain(format!("ratio must be nonnegative, got {c}")));
    }
    if !(h > T::zero()) {
        return Err(Error::domain(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(objective(b, c, h))
}

fn objective<T: Scalar>(b: T, c: T, h: T) -> (T, T) {
    let z = b / h;
    let g = if z > T::lit(LOG_SPACE_RATIO) {
        ((T::one() + erf(z)).ln() + z * z).exp()
    } else {
        (T::one() + erf(z)) * (z * z).exp()
    };
    let two = T::lit(2.0);
    let value = g - c;
    let slope = two / (T::PI().sqrt() * h) + two * g * z / h;
    (value, slope)
}

/// Solves `F(b) = 0` by Newton's method from the lower bound
/// `b0 = h sqrt(max(0, ln(c/2)))`.
///
/// Ratios below one have no nonnegative root and are clamped to `b = 0`.
/// Iterates that would go negative are replaced by half the current iterate,
/// steps are capped at `5h`, and an overflowing iterate is pulled halfway back.
pub fn solve_boundary_distance<T: Scalar>(
    c: T,
    h: T,
    opts: SolverOptions<T>,
) -> Result<DistanceSolveResult<T>> {
    if !(c >= T::zero()) {
        return Err(Error::domain(format!("ratio must be nonnegative, got {c}")));
    }
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::domain(format!(
            "bandwidth must be positive and finite, got {h}"
        )));
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let scale = c.max(T::one());
    if c < T::one() {
        let (f0, _) = objective(T::zero(), c, h);
        return Ok(DistanceSolveResult {
            b_hat: T::zero(),
            iterations: 0,
            residual: f0.abs() / scale,
            clamped: true,
        });
    }
    if c.is_infinite() {
        return Ok(DistanceSolveResult {
            b_hat: T::infinity(),
            iterations: 0,
            residual: T::zero(),
            clamped: false,
        });
    }

    let half = T::lit(0.5);
    let log_c = c.ln();
    let log_form = log_c > T::lit(LOG_FORM_THRESHOLD);
    let eval = |b: T| {
        if log_form {
            log_objective(b, log_c, h)
        } else {
            objective(b, c, h)
        }
    };
    // |F| / max(1, c), which is |exp(G) - 1| in the log form.
    let scaled = |value: T| {
        if log_form {
            value.exp_m1().abs()
        } else {
            value.abs() / scale
        }
    };
    let max_step = T::lit(5.0) * h;
    let mut b = h * (c * half).ln().max(T::zero()).sqrt();
    let (mut value, mut slope) = eval(b);
    let mut iterations = 0;
    loop {
        let residual = scaled(value);
        if residual <= opts.tol {
            return Ok(DistanceSolveResult {
                b_hat: b,
                iterations,
                residual,
                clamped: false,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                last: b.as_f64(),
                residual: residual.as_f64(),
                iterations,
            });
        }
        iterations += 1;
        let mut step = value / slope;
        if step.abs() > max_step {
            step = max_step.copysign(step);
        }
        let mut next = b - step;
        if next < T::zero() {
            next = b * half;
        }
        let (mut next_value, mut next_slope) = eval(next);
        while !next_value.is_finite() && next > b {
            next = (b + next) * half;
            (next_value, next_slope) = eval(next);
        }
        if (next - b).abs() <= T::lit(4.0) * T::epsilon() * b.max(h) {
            // Step is below rounding: F is resolved as well as the precision allows.
            return Ok(DistanceSolveResult {
                b_hat: next,
                iterations,
                residual: scaled(next_value),
                clamped: false,
            });
        }
        b = next;
        value = next_value;
        slope = next_slope;
    }
}

/// `G(b) = ln(1 + erf(b/h)) + b^2/h^2 - ln c` and its derivative; same root
/// as `F`, without overflow.
fn log_objective<T: Scalar>(b: T, log_c: T, h: T) -> (T, T) {
    let z = b / h;
    let one_plus = T::one() + erf(z);
    let two = T::lit(2.0);
    let value = one_plus.ln() + z * z - log_c;
    let slope = (T::FRAC_2_SQRT_PI() * (-z * z).exp() / one_plus + two * z) / h;
    (value, slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forward(z: f64) -> f64 {
        (1.0 + erf(z)) * (z * z).exp()
    }

    #[test]
    fn objective_values() {
        let (f, fp) = distance_objective(0.0_f64, 1.0, 1.0).unwrap();
        assert_eq!(f, 0.0);
        assert!((fp - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-15);
        let (f, _) = distance_objective(1.0_f64, 0.0, 1.0).unwrap();
        assert!((f - 5.0089800807622835).abs() < 1e-13);
        assert!(distance_objective(-0.1_f64, 1.0, 1.0).is_err());
    }

    #[test]
    fn log_space_branch_is_continuous() {
        let h = 0.1_f64;
        let z = 25.5_f64;
        let direct = (1.0 + erf(z)) * (z * z).exp();
        let logged = objective(h * z, 0.0, h).0;
        assert!((logged / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_positive_on_grid() {
        for i in 0..=300 {
            let b = i as f64 * 0.01;
            for &c in &[0.0, 1.0, 10.0, 1e6] {
                let (_, fp) = distance_objective(b, c, 0.3).unwrap();
                assert!(fp > 0.0);
            }
        }
    }

    #[test]
    fn solves_known_cases() {
        let opts = SolverOptions::default();
        let r = solve_boundary_distance(1.0_f64, 0.2, opts).unwrap();
        assert_eq!(r.b_hat, 0.0);
        assert!(!r.clamped);

        let r = solve_boundary_distance(5.0089800807622835_f64, 1.0, opts).unwrap();
        assert!((r.b_hat - 1.0).abs() < 1e-10, "{r:?}");

        let r = solve_boundary_distance(0.7_f64, 1.0, opts).unwrap();
        assert_eq!(r.b_hat, 0.0);
        assert!(r.clamped);
    }

    #[test]
    fn round_trip_grid() {
        let opts = SolverOptions::default();
        for &h in &[0.05, 0.2, 1.0, 3.0] {
            for i in 0..=300 {
                let z = i as f64 * 0.01;
                let r = solve_boundary_distance(forward(z), h, opts).unwrap();
                assert!(
                    (r.b_hat - z * h).abs() <= 1e-8 * h,
                    "h = {h}, z = {z}: {r:?}"
                );
                assert!(r.residual <= opts.tol);
            }
        }
    }

    #[test]
    fn huge_ratios_converge() {
        let opts = SolverOptions::default();
        for &c in &[1e10, 1e100, 1e300, f64::MAX] {
            let r = solve_boundary_distance(c, 0.1, opts).unwrap();
            let z = r.b_hat / 0.1;
            let want = c.ln();
            let got = (1.0 + erf(z)).ln() + z * z;
            assert!((got - want).abs() / want < 1e-10, "c = {c}: {r:?}");
        }
        let r = solve_boundary_distance(f64::INFINITY, 0.1, opts).unwrap();
        assert!(r.b_hat.is_infinite());
    }

    #[test]
    fn rejects_bad_input() {
        let opts = SolverOptions::default();
        assert!(solve_boundary_distance(-1.0_f64, 0.1, opts).is_err());
        assert!(solve_boundary_distance(2.0_f64, 0.0, opts).is_err());
        assert!(solve_boundary_distance(f64::NAN, 0.1, opts).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let opts = SolverOptions {
            tol: 1e-12,
            max_iter: 1,
        };
        match solve_boundary_distance(3.0_f64, 0.1, opts) {
            Err(Error::NoConvergence { iterations, .. }) => assert_eq!(iterations, 1),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn single_precision_solver() {
        let r = solve_boundary_distance(5.00898_f32, 1.0, SolverOptions::default()).unwrap();
        assert!((r.b_hat - 1.0).abs() < 1e-4);
    }
}
