//! Gauges and gauge-fine tagged partitions (Cousin's lemma by bisection).

use serde::Serialize;

use super::HkError;

/// A strictly positive calibration function on the domain.
pub trait Gauge: Sync {
    fn radius(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> Gauge for F {
    fn radius(&self, t: f64) -> f64 {
        self(t)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantGauge(pub f64);

impl Gauge for ConstantGauge {
    fn radius(&self, _t: f64) -> f64 {
        self.0
    }
}

/// `inner` shrunk by a constant factor; used for successive refinements.
pub struct ScaledGauge<'a, G: ?Sized> {
    pub inner: &'a G,
    pub factor: f64,
}

impl<G: Gauge + ?Sized> Gauge for ScaledGauge<'_, G> {
    fn radius(&self, t: f64) -> f64 {
        self.factor * self.inner.radius(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TaggedCell {
    pub lo: f64,
    pub hi: f64,
    pub tag: f64,
}

impl TaggedCell {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Calibration test: `0 < length <= delta(tag)` and the cell sits in the
    /// open ball `(tag - delta, tag + delta)`.
    pub fn is_fine<G: Gauge + ?Sized>(&self, gauge: &G) -> bool {
        let d = gauge.radius(self.tag);
        fine_with_radius(self.lo, self.hi, self.tag, d)
    }
}

fn fine_with_radius(lo: f64, hi: f64, tag: f64, delta: f64) -> bool {
    let len = hi - lo;
    len > 0.0 && (lo..=hi).contains(&tag) && len <= delta && tag - lo < delta && hi - tag < delta
}

#[derive(Clone, Debug, Serialize)]
pub struct TaggedPartition {
    pub domain: (f64, f64),
    pub cells: Vec<TaggedCell>,
}

impl TaggedPartition {
    pub fn is_gauge_fine<G: Gauge + ?Sized>(&self, gauge: &G) -> bool {
        self.cells.iter().all(|c| c.is_fine(gauge))
    }

    /// Cells are ordered, abut exactly, and cover the domain.
    pub fn covers_domain(&self) -> bool {
        let Some(first) = self.cells.first() else { return false };
        if first.lo != self.domain.0 || self.cells.last().unwrap().hi != self.domain.1 {
            return false;
        }
        self.cells.windows(2).all(|w| w[0].hi == w[1].lo)
    }

    pub fn riemann_sum<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = NeumaierSum::default();
        for c in &self.cells {
            acc.add(f(c.tag) * c.length());
        }
        acc.total()
    }
}

#[derive(Clone, Debug)]
pub struct PartitionOptions {
    /// Bisection depth after which construction gives up.
    pub max_depth: u32,
    /// Points that must be tags when a cell touches them.
    pub singularities: Vec<f64>,
    /// Cells per partition after which construction gives up.
    pub max_cells: u64,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self { max_depth: 60, singularities: Vec::new(), max_cells: 50_000_000 }
    }
}

impl PartitionOptions {
    fn candidate_tags(&self, lo: f64, hi: f64) -> [f64; 3] {
        let mid = 0.5 * (lo + hi);
        // an endpoint that is a declared singularity goes first after the midpoint
        let right_singular = self.singularities.iter().any(|&s| s == hi);
        let left_singular = self.singularities.iter().any(|&s| s == lo);
        if right_singular && !left_singular {
            [mid, hi, lo]
        } else {
            [mid, lo, hi]
        }
    }
}

/// Walks a gauge-fine partition of `[a, b]` left to right without storing it.
pub(crate) fn visit_cells<G, V>(gauge: &G, a: f64, b: f64, opts: &PartitionOptions, mut visit: V) -> Result<(), HkError>
where
    G: Gauge + ?Sized,
    V: FnMut(TaggedCell) -> Result<(), HkError>,
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(HkError::EmptyDomain { a, b });
    }
    let mut stack = vec![(a, b, 0u32)];
    let mut cells = 0u64;
    while let Some((lo, hi, depth)) = stack.pop() {
        let mut accepted = None;
        for tag in opts.candidate_tags(lo, hi) {
            let d = gauge.radius(tag);
            if !(d > 0.0) || !d.is_finite() {
                return Err(HkError::GaugeNotPositive { point: tag, value: d });
            }
            if fine_with_radius(lo, hi, tag, d) {
                accepted = Some(tag);
                break;
            }
        }
        match accepted {
            Some(tag) => {
                cells += 1;
                if cells > opts.max_cells {
                    return Err(HkError::CellBudget { cells: opts.max_cells });
                }
                visit(TaggedCell { lo, hi, tag })?
            }
            None => {
                let mid = 0.5 * (lo + hi);
                if depth >= opts.max_depth || mid <= lo || mid >= hi {
                    return Err(HkError::DepthExceeded { point: mid, depth });
                }
                stack.push((mid, hi, depth + 1));
                stack.push((lo, mid, depth + 1));
            }
        }
    }
    Ok(())
}

/// Builds a gauge-fine tagged partition of `[a, b]` by recursive bisection.
///
/// Each candidate cell first tries its midpoint as tag, then its endpoints
/// (a declared singular endpoint first). Cells that admit no tag are halved.
pub fn cousin_partition<G: Gauge + ?Sized>(
    gauge: &G,
    domain: (f64, f64),
    opts: &PartitionOptions,
) -> Result<TaggedPartition, HkError> {
    let mut cells = Vec::new();
    visit_cells(gauge, domain.0, domain.1, opts, |c| {
        cells.push(c);
        Ok(())
    })?;
    Ok(TaggedPartition { domain, cells })
}

/// Kahan-Babuska-Neumaier compensated summation.
#[derive(Default, Clone, Copy, Debug)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
