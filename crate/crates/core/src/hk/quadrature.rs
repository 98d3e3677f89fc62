//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature on a finite interval.
//!
//! Used for the slices of the Hake limit and for interval integrals of smooth
//! (or piecewise smooth) callables. Error estimates are the usual
//! Gauss/Kronrod difference and are heuristic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOutcome {
    pub value: f64,
    pub error: f64,
    pub evaluations: u64,
    /// First non-finite sample, if any.
    pub bad_point: Option<f64>,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn gk21<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, bad: &mut Option<f64>) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut check = |x: f64| {
        let y = f(x);
        if !y.is_finite() {
            if bad.is_none() {
                *bad = Some(x);
            }
            0.0
        } else {
            y
        }
    };
    let fc = check(c);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = check(c - dx) + check(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).abs();
    (value, err)
}

/// Integrates `f` over `[a, b]` until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |value|)` or `max_segments` is reached.
pub fn adaptive_gk<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> QuadOutcome {
    if a == b {
        return QuadOutcome { value: 0.0, error: 0.0, evaluations: 0, bad_point: None };
    }
    let mut bad = None;
    let (v, e) = gk21(f, a, b, &mut bad);
    let mut evaluations = 21u64;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total_v = v;
    let mut total_e = e;
    while heap.len() < max_segments {
        if bad.is_some() {
            break;
        }
        if total_e <= abs_tol.max(rel_tol * total_v.abs()) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval no longer splittable in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(f, worst.a, mid, &mut bad);
        let (v2, e2) = gk21(f, mid, worst.b, &mut bad);
        evaluations += 42;
        total_v += v1 + v2 - worst.value;
        total_e += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    QuadOutcome { value, error, evaluations, bad_point: bad }
}
