//! Improper integrals at a singular left endpoint via Hake's theorem.

use super::quadrature::adaptive_gk;
use super::{HKResult, HkError, IntegrationMode};

#[derive(Clone, Debug)]
pub struct HakeOptions {
    pub max_steps: u32,
    /// Minimum mesh index before convergence may be declared.
    pub min_steps: u32,
    /// Segment budget for the quadrature of each slice.
    pub slice_segments: usize,
}

impl Default for HakeOptions {
    fn default() -> Self {
        Self { max_steps: 40, min_steps: 4, slice_segments: 4000 }
    }
}

/// Aitken's delta-squared on three consecutive terms; falls back to the last
/// term when the second difference is lost in rounding.
fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let denom = d2 - d1;
    let scale = x0.abs().max(x1.abs()).max(x2.abs()).max(1e-300);
    if denom.abs() <= 1e3 * f64::EPSILON * scale {
        x2
    } else {
        x2 - d2 * d2 / denom
    }
}

/// `lim_{c -> a+} int_c^b f` on the mesh `c_j = a + (b - a) 2^-j`.
///
/// Each slice `[c_j, c_{j-1}]` is integrated adaptively and the partial
/// integrals `I_j` are extrapolated by Aitken's process, which is Richardson
/// extrapolation with the exponent of the geometric error read off the data.
/// Convergence is declared once two successive extrapolates agree within `tol`.
pub fn hake_limit_integrate<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    domain: (f64, f64),
    tol: f64,
    opts: &HakeOptions,
) -> Result<HKResult, HkError> {
    let (a, b) = domain;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(HkError::EmptyDomain { a, b });
    }
    if !(tol > 0.0) {
        return Err(HkError::InvalidSpec("tolerance must be positive".into()));
    }
    let len = b - a;
    let slice_tol = (tol * 1e-3).max(1e-15);
    let mut partials: Vec<f64> = Vec::new();
    let mut extrapolated: Vec<f64> = Vec::new();
    let mut quad_error = 0.0;
    let mut evaluations = 0u64;
    let mut running = 0.0;
    let mut upper = b;
    let mut last_change = f64::INFINITY;

    for j in 1..=opts.max_steps {
        let lower = a + len * 2f64.powi(-(j as i32));
        let q = adaptive_gk(f, lower, upper, slice_tol, 0.0, opts.slice_segments);
        evaluations += q.evaluations;
        if let Some(p) = q.bad_point {
            return Err(HkError::NonFinite { point: p });
        }
        quad_error += q.error;
        running += q.value;
        partials.push(running);
        upper = lower;

        let n = partials.len();
        if n >= 3 {
            extrapolated.push(aitken(partials[n - 3], partials[n - 2], partials[n - 1]));
        }
        let m = extrapolated.len();
        if m >= 3 {
            let c1 = (extrapolated[m - 1] - extrapolated[m - 2]).abs();
            let c2 = (extrapolated[m - 2] - extrapolated[m - 3]).abs();
            last_change = c1;
            if j >= opts.min_steps && c1.max(c2) + quad_error <= tol {
                return Ok(HKResult {
                    value: extrapolated[m - 1],
                    error_bound: c1.max(c2) + quad_error,
                    mode: IntegrationMode::HakeLimit,
                    evaluations,
                });
            }
        }
    }
    Err(HkError::NonConvergence { steps: opts.max_steps, last_change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn h(t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            2.0 * t * (PI / (t * t)).cos() + (2.0 * PI / t) * (PI / (t * t)).sin()
        }
    }

    #[test]
    fn oscillator_limit_is_minus_one() {
        // F(1) - lim_{t->0} t^2 cos(pi/t^2) = cos(pi) - 0
        let r = hake_limit_integrate(&h, (0.0, 1.0), 1e-6, &HakeOptions::default()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-6, "{}", r.value);
        assert!(r.error_bound <= 1e-6);
        assert_eq!(r.mode, IntegrationMode::HakeLimit);
    }

    #[test]
    fn inverse_sqrt() {
        let r = hake_limit_integrate(&|t: f64| 1.0 / t.sqrt(), (0.0, 1.0), 1e-9, &HakeOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn riemann_integrable_agrees_with_gauge_mode() {
        use crate::hk::{hk_integrate_1d, ConstantGauge, PartitionOptions};
        let f = |t: f64| (2.0 * t).cos() + 1.0;
        let hake = hake_limit_integrate(&f, (0.0, 1.5), 1e-9, &HakeOptions::default()).unwrap();
        let gauge = hk_integrate_1d(&f, (0.0, 1.5), &ConstantGauge(1e-3), 2, &PartitionOptions::default()).unwrap();
        assert!((hake.value - gauge.value).abs() <= hake.error_bound + gauge.error_bound + 1e-12);
    }

    #[test]
    fn divergent_integrand_fails() {
        let r = hake_limit_integrate(
            &|t: f64| 1.0 / t,
            (0.0, 1.0),
            1e-8,
            &HakeOptions { max_steps: 25, ..Default::default() },
        );
        assert!(matches!(r, Err(HkError::NonConvergence { .. })));
    }
}
