//! Gauge-Riemann sums on axis-aligned boxes of R^d.

use serde::{Deserialize, Serialize};

use super::partition::NeumaierSum;
use super::{HKResult, HkError, IntegrationMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl HyperBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, HkError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(HkError::InvalidSpec("box corners must share a positive dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(HkError::InvalidSpec("box needs lo < hi on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }
}

/// Gauge on R^d, possibly with a different radius per axis.
///
/// A plain closure `Fn(&[f64]) -> f64` is an isotropic gauge: the cell must sit
/// in the open max-norm ball of that radius around its tag.
pub trait BoxGauge: Sync {
    fn radius(&self, x: &[f64], axis: usize) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> BoxGauge for F {
    fn radius(&self, x: &[f64], _axis: usize) -> f64 {
        self(x)
    }
}

/// Anisotropic gauge: one radius per axis.
pub struct AxisGauge<F>(pub F);

impl<F: Fn(&[f64], usize) -> f64 + Sync> BoxGauge for AxisGauge<F> {
    fn radius(&self, x: &[f64], axis: usize) -> f64 {
        (self.0)(x, axis)
    }
}

#[derive(Clone, Debug)]
pub struct BoxOptions {
    pub dim_cap: usize,
    pub max_depth: u32,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self { dim_cap: 3, max_depth: 200 }
    }
}

struct Scaled<'a, G: ?Sized>(&'a G, f64);

impl<G: BoxGauge + ?Sized> BoxGauge for Scaled<'_, G> {
    fn radius(&self, x: &[f64], axis: usize) -> f64 {
        self.1 * self.0.radius(x, axis)
    }
}

/// Worst ratio `side_i / delta_i(tag)`; the cell is fine when it is at most 1.
fn fineness<G: BoxGauge + ?Sized>(gauge: &G, lo: &[f64], hi: &[f64], tag: &[f64]) -> Result<(f64, usize), HkError> {
    let mut worst = (0.0, 0);
    for axis in 0..lo.len() {
        let d = gauge.radius(tag, axis);
        if !(d > 0.0) || !d.is_finite() {
            return Err(HkError::GaugeNotPositive { point: tag[axis], value: d });
        }
        // midpoint tags: side <= delta also keeps the cell inside the open ball
        let ratio = (hi[axis] - lo[axis]) / d;
        if ratio > worst.0 {
            worst = (ratio, axis);
        }
    }
    Ok(worst)
}

fn box_sum<F, G>(f: &F, cube: &HyperBox, gauge: &G, opts: &BoxOptions) -> Result<(f64, u64), HkError>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
    G: BoxGauge + ?Sized,
{
    let d = cube.dim();
    let mut acc = NeumaierSum::default();
    let mut evaluations = 0u64;
    let mut stack = vec![(cube.lo.clone(), cube.hi.clone(), 0u32)];
    let mut tag = vec![0.0; d];
    while let Some((lo, hi, depth)) = stack.pop() {
        for i in 0..d {
            tag[i] = 0.5 * (lo[i] + hi[i]);
        }
        let (ratio, axis) = fineness(gauge, &lo, &hi, &tag)?;
        if ratio <= 1.0 {
            let y = f(&tag);
            evaluations += 1;
            if !y.is_finite() {
                return Err(HkError::NonFinite { point: tag[0] });
            }
            let vol: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
            acc.add(y * vol);
            continue;
        }
        if depth >= opts.max_depth {
            return Err(HkError::DepthExceeded { point: tag[axis], depth });
        }
        let mid = tag[axis];
        let mut left_hi = hi.clone();
        left_hi[axis] = mid;
        let mut right_lo = lo.clone();
        right_lo[axis] = mid;
        stack.push((right_lo, hi, depth + 1));
        stack.push((lo, left_hi, depth + 1));
    }
    Ok((acc.total(), evaluations))
}

/// Gauge-Riemann integral over a box with midpoint tags; cells are halved along
/// the axis that violates its gauge radius the most.
pub fn hk_integrate_box<F, G>(
    f: &F,
    cube: &HyperBox,
    gauge: &G,
    refine_levels: u32,
    opts: &BoxOptions,
) -> Result<HKResult, HkError>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
    G: BoxGauge + ?Sized,
{
    if cube.dim() > opts.dim_cap {
        return Err(HkError::DimensionCap { d: cube.dim(), cap: opts.dim_cap });
    }
    let mut evaluations = 0;
    let mut previous = None;
    let mut value = 0.0;
    for level in 0..=refine_levels {
        let scaled = Scaled(gauge, 2f64.powi(-(level as i32)));
        let (s, n) = box_sum(f, cube, &scaled, opts)?;
        evaluations += n;
        if level < refine_levels {
            previous = Some(s);
        }
        value = s;
    }
    let error_bound = previous.map_or(0.0, |p: f64| (value - p).abs());
    Ok(HKResult { value, error_bound, mode: IntegrationMode::GaugeRiemann, evaluations })
}
