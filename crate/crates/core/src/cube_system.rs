//! The enumerated cube family `{B_k}`, the functionals `F_k`, and the measure
//! `mu = sum_k 2^-k chi_{B_k}(x) chi_{B_k}(y) dx dy`.
//!
//! Two enumerations are available:
//!
//! * [`EnumerationMode::Diagonal`] walks all `(level, rational center)` pairs
//!   by Cantor's diagonal pairing. Level `n` has radius `2^-n` in the max norm,
//!   and centers run through `Q^d` by a signed Calkin-Wilf enumeration. Cubes
//!   overlap.
//! * [`EnumerationMode::Geometric`] places one cube per index along the first
//!   axis, pairwise disjoint (they only share faces), with
//!   `volume(B_k) = 2^-kd`.
//!
//! All geometry is exact rational arithmetic.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{pow2, rat_int, serialize_rat, serialize_rat_vec, to_f64, Enclosure, Rational};
use crate::hk::{hk_integrate_box, BoxOptions, HkError, HyperBox, IntervalIntegral};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnumerationMode {
    Diagonal,
    Geometric,
}

impl std::str::FromStr for EnumerationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "diagonal" => Ok(Self::Diagonal),
            "geometric" => Ok(Self::Geometric),
            other => Err(format!("unknown enumeration mode '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cube {
    /// Enumeration position, starting at 1.
    #[serde(rename = "k")]
    pub index: usize,
    pub level: u32,
    #[serde(serialize_with = "serialize_rat_vec")]
    pub center: Vec<Rational>,
    /// Max-norm radius: half the edge length.
    #[serde(serialize_with = "serialize_rat")]
    pub radius: Rational,
}

impl Cube {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lo(&self, axis: usize) -> Rational {
        &self.center[axis] - &self.radius
    }

    pub fn hi(&self, axis: usize) -> Rational {
        &self.center[axis] + &self.radius
    }

    /// Closed-cube membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        let r = to_f64(&self.radius);
        x.len() == self.dim() && self.center.iter().zip(x).all(|(c, xi)| (xi - to_f64(c)).abs() <= r)
    }

    pub fn to_box(&self) -> HyperBox {
        let lo = (0..self.dim()).map(|a| to_f64(&self.lo(a))).collect();
        let hi = (0..self.dim()).map(|a| to_f64(&self.hi(a))).collect();
        HyperBox::new(lo, hi).expect("cube radius is positive")
    }
}

/// `(2r)^d`, exact.
pub fn cube_volume(c: &Cube) -> Rational {
    let edge = &c.radius * rat_int(2);
    let mut v = Rational::one();
    for _ in 0..c.dim() {
        v *= &edge;
    }
    v
}

/// Lebesgue measure of `c1 ∩ c2`, exact.
pub fn overlap_volume(c1: &Cube, c2: &Cube) -> Rational {
    assert_eq!(c1.dim(), c2.dim(), "cubes of different dimension");
    let mut v = Rational::one();
    for axis in 0..c1.dim() {
        let lo = c1.lo(axis).max(c2.lo(axis));
        let hi = c1.hi(axis).min(c2.hi(axis));
        if hi <= lo {
            return Rational::zero();
        }
        v *= hi - lo;
    }
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct CubeSystem {
    pub d: usize,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub mode: EnumerationMode,
    pub cubes: Vec<Cube>,
}

impl CubeSystem {
    /// Cube with 1-based index `k`.
    pub fn cube(&self, k: usize) -> &Cube {
        &self.cubes[k - 1]
    }

    /// Weight `2^-k`.
    pub fn weight(k: usize) -> Rational {
        pow2(-(k as i64))
    }

    pub fn weight_f64(k: usize) -> f64 {
        2f64.powi(-(k as i32))
    }

    pub fn volumes(&self) -> Vec<Rational> {
        self.cubes.iter().map(cube_volume).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("cube system serializes")
    }
}

/// Stern's diatomic sequence.
fn fusc(mut n: u64) -> u64 {
    // fusc(2m) = fusc(m), fusc(2m+1) = fusc(m) + fusc(m+1)
    let (mut a, mut b) = (1u64, 0u64);
    while n > 0 {
        if n & 1 == 1 {
            b += a;
        } else {
            a += b;
        }
        n >>= 1;
    }
    b
}

/// The `i`-th rational (1-based): `0, 1, -1, 1/2, -1/2, 2, -2, 1/3, ...`,
/// signs interleaved over the Calkin-Wilf sequence.
pub fn rational_at(i: u64) -> Rational {
    assert!(i >= 1);
    if i == 1 {
        return Rational::zero();
    }
    let j = i - 2;
    let m = j / 2 + 1;
    let q = Rational::new(BigInt::from(fusc(m)), BigInt::from(fusc(m + 1)));
    if j % 2 == 0 {
        q
    } else {
        -q
    }
}

/// Inverse of the Cantor pairing on nonnegative integers.
fn cantor_unpair(z: u64) -> (u64, u64) {
    let w = ((((8 * z + 1) as f64).sqrt() - 1.0) / 2.0).floor() as u64;
    // correct any floating-point slip
    let mut w = w;
    while w * (w + 1) / 2 > z {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= z {
        w += 1;
    }
    let t = w * (w + 1) / 2;
    let y = z - t;
    (w - y, y)
}

/// `(level n, rational index i)` for position `k` (both 1-based) along the
/// diagonals `n + i = const`, levels ascending within a diagonal.
pub fn diagonal_pair(k: u64) -> (u32, u64) {
    let (a, b) = cantor_unpair(k - 1);
    // cantor_unpair walks (w, 0), (w-1, 1), ...; reverse so levels ascend
    ((b + 1) as u32, a + 1)
}

/// Center in `Q^d` for rational index `i`.
fn center_at(i: u64, d: usize) -> Vec<Rational> {
    let mut idx = Vec::with_capacity(d);
    let mut rest = i - 1;
    for _ in 1..d {
        let (x, y) = cantor_unpair(rest);
        idx.push(x);
        rest = y;
    }
    idx.push(rest);
    idx.into_iter().map(|j| rational_at(j + 1)).collect()
}

pub fn enumerate_cubes(d: usize, k_max: usize, mode: EnumerationMode) -> CubeSystem {
    assert!(d >= 1, "dimension must be positive");
    let cubes = match mode {
        EnumerationMode::Diagonal => (1..=k_max)
            .map(|k| {
                let (level, i) = diagonal_pair(k as u64);
                Cube { index: k, level, center: center_at(i, d), radius: pow2(-(level as i64)) }
            })
            .collect(),
        EnumerationMode::Geometric => (1..=k_max)
            .map(|k| {
                let radius = pow2(-(k as i64) - 1);
                // B_k = [1 - 2^(1-k), 1 - 2^-k] x [0, 2^-k]^(d-1)
                let first = Rational::one() - pow2(1 - k as i64) + &radius;
                let mut center = vec![radius.clone(); d];
                center[0] = first;
                Cube { index: k, level: k as u32, center, radius }
            })
            .collect(),
    };
    CubeSystem { d, k_max, mode, cubes }
}

/// `Gamma(d/2)` for integer `d >= 1`.
fn gamma_half(d: usize) -> f64 {
    if d % 2 == 0 {
        (1..d / 2).map(|j| j as f64).product()
    } else {
        // Gamma(n + 1/2) = (2n)! sqrt(pi) / (4^n n!)
        let n = (d - 1) / 2;
        let mut g = std::f64::consts::PI.sqrt();
        for j in 0..n {
            g *= j as f64 + 0.5;
        }
        g
    }
}

/// The ball-volume constant `pi^(d/2) / (2^(d-1) d^(d/2+1) Gamma(d/2))`.
///
/// Equals 1 for `d = 1`. Geometric mode uses volumes `2^-kd` (this constant
/// set to 1) so everything stays rational; the constant is exposed for reports.
pub fn alpha_d(d: usize) -> f64 {
    let df = d as f64;
    std::f64::consts::PI.powf(df / 2.0) / (2f64.powi(d as i32 - 1) * df.powf(df / 2.0 + 1.0) * gamma_half(d))
}

/// Finite linear combination `sum c_i chi_{B_i}` of cube indicators.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IndicatorCombination {
    pub terms: Vec<(usize, Rational)>,
}

impl IndicatorCombination {
    pub fn single(k: usize) -> Self {
        Self { terms: vec![(k, Rational::one())] }
    }

    pub fn scaled(&self, s: &Rational) -> Self {
        Self { terms: self.terms.iter().map(|(k, c)| (*k, c * s)).collect() }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    pub fn eval(&self, system: &CubeSystem, x: &[f64]) -> f64 {
        self.terms.iter().filter(|(k, _)| system.cube(*k).contains(x)).map(|(_, c)| to_f64(c)).sum()
    }

    /// `max |c|` summed over overlapping supports: a crude sup-norm bound.
    pub fn sup_bound(&self) -> Rational {
        self.terms.iter().map(|(_, c)| c.abs()).fold(Rational::zero(), |a, b| a + b)
    }
}

/// Integrands accepted by the functionals `F_k`.
#[derive(Clone, Copy)]
pub enum Integrand<'a> {
    Indicators(&'a IndicatorCombination),
    /// Callable on `R^d` with an optional bound on `sup |f|`.
    Callable {
        f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
        sup: Option<f64>,
    },
    /// One-dimensional integrand with its own interval integrator.
    Interval {
        f: &'a dyn IntervalIntegral,
        sup: Option<f64>,
    },
}

impl Integrand<'_> {
    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            Integrand::Indicators(c) => Some(to_f64(&c.sup_bound())),
            Integrand::Callable { sup, .. } | Integrand::Interval { sup, .. } => *sup,
        }
    }
}

/// Exact `F_k` on the indicator algebra.
pub fn f_k_exact(f: &IndicatorCombination, k: usize, system: &CubeSystem) -> Rational {
    let bk = system.cube(k);
    f.terms.iter().map(|(i, c)| c * overlap_volume(bk, system.cube(*i))).fold(Rational::zero(), |a, b| a + b)
}

/// Options for `F_k` on callables.
#[derive(Clone, Debug)]
pub struct FkOptions {
    /// Constant gauge as a fraction of the cube edge.
    pub gauge_fraction: f64,
    pub refine_levels: u32,
}

impl Default for FkOptions {
    fn default() -> Self {
        Self { gauge_fraction: 1.0 / 64.0, refine_levels: 1 }
    }
}

/// `F_k(f) = int_{B_k} f` as an enclosure (a point for indicator combinations).
pub fn f_k(f: &Integrand<'_>, k: usize, system: &CubeSystem, opts: &FkOptions) -> Result<Enclosure, HkError> {
    if k == 0 || k > system.k_max {
        return Err(HkError::InvalidSpec(format!("cube index {k} outside 1..={}", system.k_max)));
    }
    match f {
        Integrand::Indicators(c) => Ok(Enclosure::point(to_f64(&f_k_exact(c, k, system)))),
        Integrand::Callable { f, .. } => {
            let cube = system.cube(k);
            let edge = 2.0 * to_f64(&cube.radius);
            let gauge = edge * opts.gauge_fraction;
            let r = hk_integrate_box(
                *f,
                &cube.to_box(),
                &move |_: &[f64]| gauge,
                opts.refine_levels,
                &BoxOptions::default(),
            )?;
            Ok(r.enclosure())
        }
        Integrand::Interval { f, .. } => {
            if system.d != 1 {
                return Err(HkError::InvalidSpec("interval integrands need d = 1".into()));
            }
            let cube = system.cube(k);
            let r = f.integrate_over(to_f64(&cube.lo(0)), to_f64(&cube.hi(0)))?;
            Ok(r.enclosure())
        }
    }
}

/// Radical-inverse (Halton) point `i` in `[0,1)^d`.
fn halton(i: u64, d: usize) -> Vec<f64> {
    const BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    (0..d)
        .map(|axis| {
            let b = BASES[axis % BASES.len()];
            let (mut n, mut f, mut x) = (i, 1.0, 0.0);
            while n > 0 {
                f /= b as f64;
                x += f * (n % b) as f64;
                n /= b;
            }
            x
        })
        .collect()
}

/// Largest sampled value of `f` on `B_k` over the center and a Halton set.
/// A lower estimate of the essential supremum; exact on piecewise-constant
/// integrands whose pieces the sample hits.
pub fn f_k_sup(f: &dyn Fn(&[f64]) -> f64, k: usize, system: &CubeSystem, samples: usize) -> f64 {
    let cube = system.cube(k);
    let lo: Vec<f64> = (0..system.d).map(|a| to_f64(&cube.lo(a))).collect();
    let edge = 2.0 * to_f64(&cube.radius);
    let center: Vec<f64> = cube.center.iter().map(to_f64).collect();
    let mut best = f(&center);
    let mut x = vec![0.0; system.d];
    for i in 1..=samples as u64 {
        let u = halton(i, system.d);
        for a in 0..system.d {
            x[a] = lo[a] + edge * u[a];
        }
        best = best.max(f(&x));
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct MuVolume {
    #[serde(serialize_with = "serialize_rat")]
    pub partial_sum: Rational,
    #[serde(serialize_with = "serialize_rat")]
    pub tail_bound: Rational,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "serialize_opt_rat")]
    pub closed_form: Option<Rational>,
}

fn serialize_opt_rat<S: serde::Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match q {
        Some(q) => serialize_rat(q, s),
        None => s.serialize_none(),
    }
}

impl MuVolume {
    pub fn enclosure(&self) -> Enclosure {
        Enclosure { lo: to_f64(&self.partial_sum), hi: to_f64(&(&self.partial_sum + &self.tail_bound)) }
    }

    /// `partial <= closed <= partial + tail`, exactly.
    pub fn brackets_closed_form(&self) -> Option<bool> {
        self.closed_form.as_ref().map(|c| &self.partial_sum <= c && c <= &(&self.partial_sum + &self.tail_bound))
    }
}

/// Total `mu`-volume `sum_k 2^-k volume(B_k)^2`: the truncated sum, a tail
/// bound, and in geometric mode the closed form `1 / (2^(2d+1) - 1)`.
pub fn mu_volume(system: &CubeSystem) -> MuVolume {
    let partial_sum = system
        .cubes
        .iter()
        .map(|c| {
            let v = cube_volume(c);
            CubeSystem::weight(c.index) * &v * &v
        })
        .fold(Rational::zero(), |a, b| a + b);
    let k = system.k_max as i64;
    let ratio_exp = 2 * system.d as i64 + 1;
    let (tail_bound, closed_form) = match system.mode {
        EnumerationMode::Geometric => {
            let denom = pow2(ratio_exp) - Rational::one();
            // sum_{j > K} 2^-(2d+1) j
            let tail = pow2(-ratio_exp * k) / &denom;
            (tail, Some(Rational::one() / denom))
        }
        // every cube has edge <= 1, so volume^2 <= 1
        EnumerationMode::Diagonal => (pow2(-k), None),
    };
    MuVolume { partial_sum, tail_bound, closed_form }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    #[test]
    fn geometric_d1_volumes() {
        let s = enumerate_cubes(1, 3, EnumerationMode::Geometric);
        assert_eq!(s.volumes(), vec![rat(1, 2), rat(1, 4), rat(1, 8)]);
        assert_eq!(cube_volume(s.cube(3)), rat(1, 8));
    }

    #[test]
    fn alpha_one_is_one() {
        assert!((alpha_d(1) - 1.0).abs() < 1e-15);
        // pi / (2 * 2^2 * Gamma(1)) = pi / 8
        assert!((alpha_d(2) - std::f64::consts::PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_d2_first_cube() {
        let s = enumerate_cubes(2, 1, EnumerationMode::Diagonal);
        let c = s.cube(1);
        assert_eq!(c.level, 1);
        assert_eq!(c.radius, rat(1, 2));
        assert_eq!(cube_volume(c), rat(1, 1));
    }

    #[test]
    fn diagonal_order_is_cantor() {
        let s = enumerate_cubes(1, 5, EnumerationMode::Diagonal);
        let pairs: Vec<(u32, Rational)> = s.cubes.iter().map(|c| (c.level, c.center[0].clone())).collect();
        assert_eq!(pairs, vec![(1, rat(0, 1)), (1, rat(1, 1)), (2, rat(0, 1)), (1, rat(-1, 1)), (2, rat(1, 1)),]);
        let again = enumerate_cubes(1, 5, EnumerationMode::Diagonal);
        assert_eq!(s.cubes, again.cubes);
    }

    #[test]
    fn rationals_enumerated_without_repeats() {
        let qs: Vec<Rational> = (1..=200).map(rational_at).collect();
        for i in 0..qs.len() {
            for j in 0..i {
                assert_ne!(qs[i], qs[j]);
            }
        }
        assert_eq!(qs[3], rat(1, 2));
        assert_eq!(qs[5], rat(2, 1));
    }

    #[test]
    fn overlap_cases() {
        let mk = |c: Rational, r: Rational| Cube { index: 1, level: 1, center: vec![c], radius: r };
        let a = mk(rat(1, 2), rat(1, 2));
        let b = mk(rat(1, 1), rat(1, 2));
        assert_eq!(overlap_volume(&a, &b), rat(1, 2));
        let far = mk(rat(5, 1), rat(1, 2));
        assert_eq!(overlap_volume(&a, &far), rat(0, 1));
        let inner = mk(rat(1, 2), rat(1, 8));
        assert_eq!(overlap_volume(&inner, &a), cube_volume(&inner));
    }

    #[test]
    fn geometric_cubes_are_disjoint() {
        for d in 1..=3 {
            let s = enumerate_cubes(d, 10, EnumerationMode::Geometric);
            for i in 1..=10 {
                for j in 1..=10 {
                    let o = overlap_volume(s.cube(i), s.cube(j));
                    if i == j {
                        assert_eq!(o, cube_volume(s.cube(i)));
                    } else {
                        assert!(o.is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn mu_volume_geometric_d1() {
        let s = enumerate_cubes(1, 3, EnumerationMode::Geometric);
        let m = mu_volume(&s);
        assert_eq!(m.partial_sum, rat(73, 512));
        assert_eq!(m.closed_form, Some(rat(1, 7)));
        assert_eq!(m.brackets_closed_form(), Some(true));
        // here the tail bound is the exact tail
        assert_eq!(&m.partial_sum + &m.tail_bound, rat(1, 7));
    }

    #[test]
    fn mu_volume_empty() {
        let s = enumerate_cubes(1, 0, EnumerationMode::Geometric);
        assert!(mu_volume(&s).partial_sum.is_zero());
    }

    #[test]
    fn f_k_on_indicators() {
        let s = enumerate_cubes(1, 4, EnumerationMode::Geometric);
        let chi2 = IndicatorCombination::single(2);
        assert_eq!(f_k_exact(&chi2, 2, &s), rat(1, 4));
        assert!(f_k_exact(&chi2, 3, &s).is_zero());
    }

    #[test]
    fn f_k_on_constant_callable() {
        let s = enumerate_cubes(1, 4, EnumerationMode::Geometric);
        let one = |_: &[f64]| 1.0;
        let e = f_k(&Integrand::Callable { f: &one, sup: Some(1.0) }, 2, &s, &FkOptions::default()).unwrap();
        assert!(e.contains(0.25));
        assert!((e.mid() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn f_k_index_checked() {
        let s = enumerate_cubes(1, 2, EnumerationMode::Geometric);
        let chi = IndicatorCombination::single(1);
        assert!(f_k(&Integrand::Indicators(&chi), 3, &s, &FkOptions::default()).is_err());
    }

    #[test]
    fn f_k_sup_cases() {
        let s = enumerate_cubes(1, 2, EnumerationMode::Diagonal);
        // B_1 = [-1/2, 1/2]
        assert_eq!(f_k_sup(&|_| 3.5, 1, &s, 64), 3.5);
        assert_eq!(f_k_sup(&|x| if x[0] > 0.0 { 1.0 } else { 0.0 }, 1, &s, 64), 1.0);
        let g = enumerate_cubes(1, 1, EnumerationMode::Geometric);
        // B_1 = [0, 1/2]; identity scaled to [0, 1]
        let m = f_k_sup(&|x| 2.0 * x[0], 1, &g, 1024);
        assert!(m >= 1.0 - 2f64.powi(-10));
    }

    #[test]
    fn json_shape() {
        let s = enumerate_cubes(1, 2, EnumerationMode::Geometric);
        let v = s.to_json();
        assert_eq!(v["K_max"], 2);
        assert_eq!(v["mode"], "geometric");
        assert_eq!(v["cubes"][1]["center"][0], "5/8");
        assert_eq!(v["cubes"][1]["radius"], "1/8");
    }
}
