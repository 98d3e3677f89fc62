//! Henstock-Kurzweil integration in one and several dimensions.
//!
//! Three modes are offered and the mode that produced a value travels with it
//! in [`HKResult`]:
//!
//! * `gauge-riemann`: Riemann sums over gauge-fine partitions for a user gauge.
//!   The error bound is the difference between the last two refinements, a
//!   convergence estimate and not a certificate.
//! * `hake-limit`: for integrands singular at the left endpoint, integrals over
//!   `[c_j, b]` with `c_j` on a dyadic mesh, extrapolated as `c_j -> a`. The
//!   bound is again an estimate.
//! * `series-exact`: dyadic staircases summed term by term with a rigorous
//!   tail bound.

mod boxes;
pub mod corpus;
mod hake;
mod partition;
pub(crate) mod quadrature;
mod staircase;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boxes::{hk_integrate_box, AxisGauge, BoxGauge, BoxOptions, HyperBox};
pub use hake::{hake_limit_integrate, HakeOptions};
pub use partition::{
    cousin_partition, ConstantGauge, Gauge, PartitionOptions, ScaledGauge, TaggedCell, TaggedPartition,
};
pub use staircase::{StaircaseSpec, TailRule};

use partition::{visit_cells, NeumaierSum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HkError {
    #[error("empty or non-finite domain [{a}, {b}]")]
    EmptyDomain { a: f64, b: f64 },
    #[error("gauge is not strictly positive at {point} (value {value})")]
    GaugeNotPositive { point: f64, value: f64 },
    #[error("bisection depth {depth} exceeded near {point}: gauge decays faster than subdivision")]
    DepthExceeded { point: f64, depth: u32 },
    #[error("partition needs more than {cells} cells")]
    CellBudget { cells: u64 },
    #[error("integrand is not finite at tag {point}")]
    NonFinite { point: f64 },
    #[error("limit did not converge after {steps} steps (last change {last_change:e})")]
    NonConvergence { steps: u32, last_change: f64 },
    #[error("tail rule does not apply: {0}")]
    RuleInapplicable(String),
    #[error("series is not absolutely summable; the integral does not exist on this path")]
    NotAbsolutelySummable,
    #[error("dimension {d} exceeds the configured cap {cap}")]
    DimensionCap { d: usize, cap: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationMode {
    GaugeRiemann,
    HakeLimit,
    SeriesExact,
}

impl IntegrationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::GaugeRiemann => "gauge-riemann",
            Self::HakeLimit => "hake-limit",
            Self::SeriesExact => "series-exact",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HKResult {
    pub value: f64,
    pub error_bound: f64,
    pub mode: IntegrationMode,
    pub evaluations: u64,
}

impl HKResult {
    pub(crate) fn exact(value: f64) -> Self {
        Self { value, error_bound: 0.0, mode: IntegrationMode::SeriesExact, evaluations: 0 }
    }

    pub(crate) fn negated(self) -> Self {
        Self { value: -self.value, ..self }
    }

    /// `[value - error_bound, value + error_bound]`.
    pub fn enclosure(&self) -> crate::exact::Enclosure {
        crate::exact::Enclosure::around(self.value, self.error_bound)
    }
}

/// Anything that can report its integral over a real interval.
pub trait IntervalIntegral: Sync {
    fn integrate_over(&self, a: f64, b: f64) -> Result<HKResult, HkError>;
}

/// Riemann sum over the gauge-fine partition for `gauge * 2^-level`.
fn gauge_sum<F, G>(f: &F, gauge: &G, domain: (f64, f64), opts: &PartitionOptions) -> Result<(f64, u64), HkError>
where
    F: Fn(f64) -> f64 + ?Sized,
    G: Gauge + ?Sized,
{
    let mut acc = NeumaierSum::default();
    let mut evaluations = 0u64;
    visit_cells(gauge, domain.0, domain.1, opts, |cell| {
        let y = f(cell.tag);
        evaluations += 1;
        if !y.is_finite() {
            return Err(HkError::NonFinite { point: cell.tag });
        }
        acc.add(y * cell.length());
        Ok(())
    })?;
    Ok((acc.total(), evaluations))
}

/// Gauge-Riemann integral of `f` over `[a, b]`.
///
/// Level `l` uses the gauge `delta * 2^-l`; the value is the sum at the finest
/// level and the bound is its distance to the previous level.
pub fn hk_integrate_1d<F, G>(
    f: &F,
    domain: (f64, f64),
    gauge: &G,
    refine_levels: u32,
    opts: &PartitionOptions,
) -> Result<HKResult, HkError>
where
    F: Fn(f64) -> f64 + ?Sized,
    G: Gauge + ?Sized,
{
    let mut evaluations = 0;
    let mut previous = None;
    let mut value = 0.0;
    for level in 0..=refine_levels {
        let scaled = ScaledGauge { inner: gauge, factor: 2f64.powi(-(level as i32)) };
        let (s, n) = gauge_sum(f, &scaled, domain, opts)?;
        evaluations += n;
        if level < refine_levels {
            previous = Some(s);
        }
        value = s;
    }
    let error_bound = previous.map_or(0.0, |p: f64| (value - p).abs());
    Ok(HKResult { value, error_bound, mode: IntegrationMode::GaugeRiemann, evaluations })
}

/// Integral over a finite union of pairwise disjoint intervals, piece by piece.
pub fn hk_integrate_union<I: IntervalIntegral + ?Sized>(f: &I, pieces: &[(f64, f64)]) -> Result<HKResult, HkError> {
    let mut sorted = pieces.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in sorted.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(HkError::InvalidSpec(format!(
                "pieces [{}, {}] and [{}, {}] overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    let mut total = HKResult::exact(0.0);
    let mut mode = None;
    for &(a, b) in &sorted {
        let r = f.integrate_over(a, b)?;
        total.value += r.value;
        total.error_bound += r.error_bound;
        total.evaluations += r.evaluations;
        mode.get_or_insert(r.mode);
    }
    total.mode = mode.unwrap_or(IntegrationMode::SeriesExact);
    Ok(total)
}

/// A plain callable integrated by gauge-Riemann sums with a constant gauge.
pub struct RiemannIntegrand<F> {
    pub f: F,
    /// Cell count exponent: the gauge is `(b - a) / 2^cells_log2`.
    pub cells_log2: u32,
    pub refine_levels: u32,
}

impl<F: Fn(f64) -> f64 + Sync> RiemannIntegrand<F> {
    pub fn new(f: F) -> Self {
        Self { f, cells_log2: 14, refine_levels: 1 }
    }
}

impl<F: Fn(f64) -> f64 + Sync> IntervalIntegral for RiemannIntegrand<F> {
    fn integrate_over(&self, a: f64, b: f64) -> Result<HKResult, HkError> {
        if a == b {
            return Ok(HKResult { value: 0.0, error_bound: 0.0, mode: IntegrationMode::GaugeRiemann, evaluations: 0 });
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let gauge = ConstantGauge((hi - lo) * 2f64.powi(-(self.cells_log2 as i32)));
        let r = hk_integrate_1d(&self.f, (lo, hi), &gauge, self.refine_levels, &PartitionOptions::default())?;
        Ok(HKResult { value: sign * r.value, ..r })
    }
}

/// `max_r |HK int_{[-r, r]} f|` over the grid; a lower estimate of the
/// seminorm `sup_{r > 0}`.
pub fn hk_seminorm<I: IntervalIntegral + ?Sized>(f: &I, r_grid: &[f64]) -> Result<f64, HkError> {
    check_grid(r_grid)?;
    let mut best: f64 = 0.0;
    for &r in r_grid {
        best = best.max(f.integrate_over(-r, r)?.value.abs());
    }
    Ok(best)
}

/// Seminorm estimate in `d` dimensions over max-norm cubes `D(0, r)`.
pub fn hk_seminorm_box<F, G>(
    f: &F,
    d: usize,
    r_grid: &[f64],
    gauge: &G,
    refine_levels: u32,
    opts: &BoxOptions,
) -> Result<f64, HkError>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
    G: BoxGauge + ?Sized,
{
    check_grid(r_grid)?;
    let mut best: f64 = 0.0;
    for &r in r_grid {
        let cube = HyperBox::new(vec![-r; d], vec![r; d])?;
        let v = hk_integrate_box(f, &cube, gauge, refine_levels, opts)?.value;
        best = best.max(v.abs());
    }
    Ok(best)
}

fn check_grid(r_grid: &[f64]) -> Result<(), HkError> {
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0)) || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HkError::InvalidSpec("radius grid must be increasing and positive".into()));
    }
    Ok(())
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

    fn antiderivative(t: f64) -> f64 {
        t * t * (PI / (t * t)).cos()
    }

    #[test]
    fn antiderivative_differentiates_to_h() {
        for &t in &[0.13, 0.4, 0.77, 0.95] {
            let eps = 1e-6 * t;
            let fd = (antiderivative(t + eps) - antiderivative(t - eps)) / (2.0 * eps);
            assert!((fd - h(t)).abs() < 1e-4 * h(t).abs().max(1.0), "t={t}");
        }
    }

    #[test]
    fn constant_one_is_exact() {
        let r = hk_integrate_1d(&|_| 1.0, (0.0, 1.0), &ConstantGauge(0.5), 2, &PartitionOptions::default()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.error_bound, 0.0);
        assert_eq!(r.mode, IntegrationMode::GaugeRiemann);
    }

    #[test]
    fn linear_is_midpoint_exact() {
        let r =
            hk_integrate_1d(&|t| 2.0 * t, (0.0, 1.0), &ConstantGauge(0.1), 2, &PartitionOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oscillator_on_interval_away_from_zero() {
        let gauge = |t: f64| 4e-6 * t * t * t;
        let r = hk_integrate_1d(&h, (0.1, 1.0), &gauge, 1, &PartitionOptions::default()).unwrap();
        let exact = antiderivative(1.0) - antiderivative(0.1);
        assert!((r.value - exact).abs() < 1e-8, "{} vs {exact}", r.value);
        assert!(r.error_bound < 1e-7);
    }

    #[test]
    fn non_finite_value_reports_tag() {
        let err = hk_integrate_1d(
            &|t: f64| 1.0 / (t - 0.5),
            (0.0, 1.0),
            &ConstantGauge(1.0),
            0,
            &PartitionOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, HkError::NonFinite { point: 0.5 });
    }

    #[test]
    fn additivity_on_smooth_corpus() {
        let f = |t: f64| (3.0 * t).sin() + t * t;
        let g = ConstantGauge(1e-3);
        let o = PartitionOptions::default();
        let whole = hk_integrate_1d(&f, (0.0, 2.0), &g, 2, &o).unwrap();
        let left = hk_integrate_1d(&f, (0.0, 0.7), &g, 2, &o).unwrap();
        let right = hk_integrate_1d(&f, (0.7, 2.0), &g, 2, &o).unwrap();
        let slack = whole.error_bound + left.error_bound + right.error_bound;
        assert!((whole.value - left.value - right.value).abs() <= slack + 1e-12);
    }

    #[test]
    fn union_of_intervals() {
        let f = RiemannIntegrand::new(|t: f64| t);
        let r = hk_integrate_union(&f, &[(2.0, 3.0), (0.0, 1.0)]).unwrap();
        assert!((r.value - 3.0).abs() < 1e-9);
        assert!(hk_integrate_union(&f, &[(0.0, 1.0), (0.5, 2.0)]).is_err());
    }

    #[test]
    fn seminorm_of_indicator() {
        let f = RiemannIntegrand::new(|t: f64| if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 });
        let n = hk_seminorm(&f, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seminorm_of_zero() {
        let f = RiemannIntegrand::new(|_| 0.0);
        assert_eq!(hk_seminorm(&f, &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn seminorm_of_sinc_peaks_at_pi() {
        // sine integral by its power series: Si(x) = sum (-1)^n x^(2n+1) / ((2n+1)(2n+1)!)
        let si = |x: f64| {
            let mut term = x;
            let mut sum = 0.0;
            for n in 0..40 {
                let k = (2 * n + 1) as f64;
                sum += term / k;
                term *= -x * x / ((k + 1.0) * (k + 2.0));
            }
            sum
        };
        let sinc = RiemannIntegrand::new(|x: f64| if x == 0.0 { 1.0 } else { x.sin() / x });
        let grid = [1.0, 2.0, 3.0, PI, 4.0, 6.0, 8.0];
        let n = hk_seminorm(&sinc, &grid).unwrap();
        assert!((n - 2.0 * si(PI)).abs() < 1e-4);
        assert!((2.0 * si(PI) - 3.7038).abs() < 1e-4);
    }

    #[test]
    fn seminorm_rejects_bad_grid() {
        let f = RiemannIntegrand::new(|_| 1.0);
        assert!(hk_seminorm(&f, &[]).is_err());
        assert!(hk_seminorm(&f, &[2.0, 1.0]).is_err());
    }
}
