//! The KS² inner product `<f, g> = sum_k 2^-k F_k(f) F_k(g)`, Gram matrices of
//! normalized cube indicators, a Gram-Schmidt orthonormal basis and Parseval
//! expansions.
//!
//! Every sum is truncated at `K_max`. The orthonormal basis is orthonormal for
//! the truncated form; in geometric mode that form agrees exactly with the full
//! one on the span of the first `K_max` indicators, because later cubes are
//! disjoint from earlier ones. In diagonal mode the difference is covered by
//! the tail bounds that travel with each quantity.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::cube_system::{
    f_k, f_k_exact, mu_volume, overlap_volume, CubeSystem, EnumerationMode, FkOptions, IndicatorCombination, Integrand,
};
use crate::exact::{pow2, to_f64, Enclosure, Rational, ScaledRational};
use crate::hk::{hk_seminorm, HKResult, HkError, IntervalIntegral};

pub const DEFAULT_K_MAX: usize = 16;

/// Pivots below this fraction of the diagonal entry are treated as rank loss.
pub const PIVOT_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `Y_k = 2^((k-1)/2) chi_{B_k} / volume(B_k)`.
    Paper,
    /// `Y_k = 2^(k/2) chi_{B_k} / volume(B_k)`.
    Corrected,
}

impl Normalization {
    /// `s_k^2` is `2^half_power(k)`.
    pub fn half_power(self, k: usize) -> i64 {
        match self {
            Normalization::Paper => k as i64 - 1,
            Normalization::Corrected => k as i64,
        }
    }

    pub fn scale_f64(self, k: usize) -> f64 {
        2f64.powf(self.half_power(k) as f64 / 2.0)
    }
}

impl std::str::FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(Self::Paper),
            "corrected" => Ok(Self::Corrected),
            other => Err(format!("unknown normalization '{other}'")),
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Ks2Error {
    #[error(transparent)]
    Integration(#[from] HkError),
    #[error("basis is rank deficient: only {kept} of {requested} directions survive pivoting")]
    RankDeficient { kept: usize, requested: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `sum_{k <= K} 2^-k ov(B_k, B_i) ov(B_k, B_j)`: the truncated form on raw
/// indicators.
fn indicator_form(system: &CubeSystem) -> Vec<Vec<Rational>> {
    let k_max = system.k_max;
    let ov: Vec<Vec<Rational>> =
        (1..=k_max).map(|k| (1..=k_max).map(|i| overlap_volume(system.cube(k), system.cube(i))).collect()).collect();
    let mut m = vec![vec![Rational::zero(); k_max]; k_max];
    for i in 0..k_max {
        for j in 0..=i {
            let mut s = Rational::zero();
            for (k, row) in ov.iter().enumerate() {
                if !row[i].is_zero() && !row[j].is_zero() {
                    s += CubeSystem::weight(k + 1) * &row[i] * &row[j];
                }
            }
            m[i][j] = s.clone();
            m[j][i] = s;
        }
    }
    m
}

/// Gram matrix of the normalized family `Y_k`.
#[derive(Clone, Debug, Serialize)]
pub struct GramEnclosure {
    pub normalization: Normalization,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub mode: EnumerationMode,
    /// Truncated sums `sum_{k <= K_max}`, exact.
    pub entries: Vec<Vec<ScaledRational>>,
    /// Entry `(i, j)` of the full form lies within `tail_factor * s_i s_j` of
    /// the truncated one; zero in geometric mode.
    #[serde(serialize_with = "crate::exact::serialize_rat")]
    pub tail_factor: Rational,
}

impl GramEnclosure {
    pub fn entry_f64(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j].to_f64()
    }

    pub fn enclosure(&self, i: usize, j: usize) -> Enclosure {
        let s = (self.normalization.scale_f64(i + 1) * self.normalization.scale_f64(j + 1)) * to_f64(&self.tail_factor);
        Enclosure { lo: self.entry_f64(i, j), hi: self.entry_f64(i, j) + s }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.k_max).all(|i| (0..i).all(|j| self.entries[i][j] == self.entries[j][i]))
    }

    pub fn max_offdiag(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.k_max {
            for j in 0..self.k_max {
                if i != j {
                    m = m.max(self.entry_f64(i, j).abs());
                }
            }
        }
        m
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("gram serializes")
    }
}

pub fn gram_matrix(system: &CubeSystem, normalization: Normalization) -> GramEnclosure {
    let m = indicator_form(system);
    let vols = system.volumes();
    let k_max = system.k_max;
    let mut entries = vec![vec![ScaledRational::zero(); k_max]; k_max];
    for i in 0..k_max {
        for j in 0..k_max {
            let base = &m[i][j] / (&vols[i] * &vols[j]);
            let hp = normalization.half_power(i + 1) + normalization.half_power(j + 1);
            entries[i][j] = ScaledRational::new(base, hp);
        }
    }
    let tail_factor = match system.mode {
        EnumerationMode::Geometric => Rational::zero(),
        // |ov(B_k, B_i)| <= volume(B_i), and sum_{k > K} 2^-k = 2^-K
        EnumerationMode::Diagonal => pow2(-(k_max as i64)),
    };
    GramEnclosure { normalization, k_max, mode: system.mode, entries, tail_factor }
}

/// Gram family check: are the `Y_k` orthonormal?
#[derive(Clone, Debug, Serialize)]
pub struct TheoremCheck {
    pub normalization: Normalization,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub mode: EnumerationMode,
    pub max_offdiag: f64,
    pub diag_values: Vec<String>,
    pub verdict_text: String,
    pub orthonormal: bool,
}

pub fn theorem_check(gram: &GramEnclosure) -> TheoremCheck {
    let one = ScaledRational::new(Rational::one(), 0);
    let diag: Vec<&ScaledRational> = (0..gram.k_max).map(|i| &gram.entries[i][i]).collect();
    let off_zero = (0..gram.k_max).all(|i| (0..gram.k_max).all(|j| i == j || gram.entries[i][j].is_zero()));
    let diag_one = diag.iter().all(|d| **d == one);
    let orthonormal = off_zero && diag_one && gram.tail_factor.is_zero();
    let verdict_text = if orthonormal {
        format!("orthonormal: Gram equals the identity exactly for k <= {}", gram.k_max)
    } else if off_zero {
        let distinct: std::collections::BTreeSet<String> = diag.iter().map(|d| d.to_string()).collect();
        format!(
            "orthogonal but not normalized: diagonal entries {{{}}} instead of 1",
            distinct.into_iter().collect::<Vec<_>>().join(", ")
        )
    } else {
        format!("not orthogonal: largest off-diagonal entry {:.6e}", gram.max_offdiag())
    };
    TheoremCheck {
        normalization: gram.normalization,
        k_max: gram.k_max,
        mode: gram.mode,
        max_offdiag: gram.max_offdiag(),
        diag_values: diag.iter().map(|d| d.to_string()).collect(),
        verdict_text,
        orthonormal,
    }
}

/// Orthonormal basis `e_j = sum_{i <= j} T_ji Y_i` over the surviving indices.
#[derive(Clone, Debug, Serialize)]
pub struct OrthoBasis {
    pub normalization: Normalization,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub mode: EnumerationMode,
    /// Cube indices (1-based) that carry a basis vector.
    pub kept: Vec<usize>,
    /// Cube indices dropped for small pivots.
    pub dropped: Vec<usize>,
    /// Row `j` expresses `e_j` in the `Y_i`, `i` over all `K_max` indices.
    pub change_of_basis: Vec<Vec<f64>>,
    /// Largest entrywise deviation of the basis Gram from the identity.
    pub certificate_residual: f64,
    #[serde(skip)]
    system: CubeSystem,
    /// `F_k(e_j) * sqrt(pivot_j)`, exact.
    #[serde(skip)]
    f_scaled: Vec<Vec<Rational>>,
    #[serde(skip)]
    inv_sqrt_pivot: Vec<f64>,
    /// Row `j` expresses `e_j` in the raw indicators `chi_{B_i}`.
    #[serde(skip)]
    indicator_coeffs: Vec<Vec<f64>>,
}

impl OrthoBasis {
    pub fn dim(&self) -> usize {
        self.kept.len()
    }

    pub fn system(&self) -> &CubeSystem {
        &self.system
    }

    /// `F_k(e_j)`, `k` 1-based.
    pub fn f_value(&self, j: usize, k: usize) -> f64 {
        to_f64(&self.f_scaled[j][k - 1]) * self.inv_sqrt_pivot[j]
    }

    /// `sup |e_j|`, bounded by the sum of absolute indicator coefficients.
    pub fn sup_bound(&self, j: usize) -> f64 {
        self.indicator_coeffs[j].iter().map(|c| c.abs()).sum()
    }

    pub fn indicator_coeffs(&self, j: usize) -> &[f64] {
        &self.indicator_coeffs[j]
    }

    /// `e_j` as an indicator combination with coefficients rounded to `f64`.
    pub fn element(&self, j: usize) -> IndicatorCombination {
        IndicatorCombination {
            terms: self.indicator_coeffs[j]
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, c)| (i + 1, Rational::from_float(*c).expect("finite coefficient")))
                .collect(),
        }
    }

    /// Pointwise value `e_j(x)`.
    pub fn eval(&self, j: usize, x: &[f64]) -> f64 {
        self.indicator_coeffs[j]
            .iter()
            .enumerate()
            .filter(|(i, c)| **c != 0.0 && self.system.cube(i + 1).contains(x))
            .map(|(_, c)| c)
            .sum()
    }

    /// Basis Gram recomputed from the stored `F_k(e_j)`.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut g = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..=a {
                let mut s = 0.0;
                for k in 1..=self.k_max {
                    s += CubeSystem::weight_f64(k) * self.f_value(a, k) * self.f_value(b, k);
                }
                g[a][b] = s;
                g[b][a] = s;
            }
        }
        g
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("basis serializes")
    }
}

/// Exact `LDL^T` of the truncated form with relative-pivot dropping, then
/// `e = D^-1/2 L^-1 (chi / volume)`.
pub fn gram_schmidt_onb(system: &CubeSystem, normalization: Normalization) -> Result<OrthoBasis, Ks2Error> {
    let k_max = system.k_max;
    let vols = system.volumes();
    let m = indicator_form(system);
    // form on chi_i / volume_i
    let r: Vec<Vec<Rational>> =
        (0..k_max).map(|i| (0..k_max).map(|j| &m[i][j] / (&vols[i] * &vols[j])).collect()).collect();

    // Row j of `inv` holds e_j * sqrt(D_j) in the chi_i / volume_i coordinates.
    // Gram-Schmidt in exact arithmetic: u_j = phi_j - sum_l <phi_j, u_l>/D_l u_l.
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut inv: Vec<Vec<Rational>> = Vec::new();
    let mut pivots: Vec<Rational> = Vec::new();
    // <phi_j, u_l> for kept l, expressed via r
    let inner_with = |coeffs: &[Rational], j: usize| -> Rational {
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| c * &r[i][j])
            .fold(Rational::zero(), |a, b| a + b)
    };
    for j in 0..k_max {
        let mut u = vec![Rational::zero(); k_max];
        u[j] = Rational::one();
        for (l, ul) in inv.iter().enumerate() {
            let proj = inner_with(ul, j) / &pivots[l];
            if proj.is_zero() {
                continue;
            }
            for i in 0..k_max {
                if !ul[i].is_zero() {
                    u[i] -= &proj * &ul[i];
                }
            }
        }
        let pivot = inner_with(&u, j);
        if to_f64(&pivot) < PIVOT_THRESHOLD * to_f64(&r[j][j]) {
            dropped.push(j + 1);
            continue;
        }
        kept.push(j + 1);
        inv.push(u);
        pivots.push(pivot);
    }
    if kept.is_empty() && k_max > 0 {
        return Err(Ks2Error::RankDeficient { kept: 0, requested: k_max });
    }

    let inv_sqrt_pivot: Vec<f64> = pivots.iter().map(|p| 1.0 / to_f64(p).sqrt()).collect();
    let ov: Vec<Vec<Rational>> =
        (1..=k_max).map(|k| (1..=k_max).map(|i| overlap_volume(system.cube(k), system.cube(i))).collect()).collect();
    let f_scaled: Vec<Vec<Rational>> = inv
        .iter()
        .map(|u| {
            (0..k_max)
                .map(|k| {
                    u.iter()
                        .enumerate()
                        .filter(|(i, c)| !c.is_zero() && !ov[k][*i].is_zero())
                        .map(|(i, c)| c * &ov[k][i] / &vols[i])
                        .fold(Rational::zero(), |a, b| a + b)
                })
                .collect()
        })
        .collect();
    let indicator_coeffs: Vec<Vec<f64>> = inv
        .iter()
        .zip(&inv_sqrt_pivot)
        .map(|(u, s)| u.iter().zip(&vols).map(|(c, v)| to_f64(&(c / v)) * s).collect())
        .collect();
    let change_of_basis: Vec<Vec<f64>> = inv
        .iter()
        .zip(&inv_sqrt_pivot)
        .map(|(u, s)| u.iter().enumerate().map(|(i, c)| to_f64(c) * s / normalization.scale_f64(i + 1)).collect())
        .collect();

    let mut basis = OrthoBasis {
        normalization,
        k_max,
        mode: system.mode,
        kept,
        dropped,
        change_of_basis,
        certificate_residual: 0.0,
        system: system.clone(),
        f_scaled,
        inv_sqrt_pivot,
        indicator_coeffs,
    };
    let g = basis.gram();
    let mut res: f64 = 0.0;
    for (a, row) in g.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            res = res.max((v - target).abs());
        }
    }
    basis.certificate_residual = res;
    Ok(basis)
}

/// Result of a truncated inner product.
#[derive(Clone, Debug, Serialize)]
pub struct InnerProduct {
    /// `sum_{k <= K_max}` at the centers of the `F_k` enclosures.
    pub value: f64,
    pub enclosure: Enclosure,
    /// Set on the indicator algebra.
    #[serde(skip)]
    pub exact: Option<Rational>,
    /// False when a sup bound was missing, so the enclosure omits the tail.
    pub tail_included: bool,
}

/// `sum_{k > K_max} 2^-k volume(B_k)^2`.
fn mu_tail(system: &CubeSystem) -> f64 {
    to_f64(&mu_volume(system).tail_bound)
}

/// Indicator combinations whose cubes all lie among the first `K_max` have no
/// tail in geometric mode: later cubes are disjoint from them.
fn tail_vanishes(f: &Integrand<'_>, system: &CubeSystem) -> bool {
    system.mode == EnumerationMode::Geometric
        && matches!(f, Integrand::Indicators(c) if c.terms.iter().all(|(k, _)| *k <= system.k_max))
}

pub fn f_values(f: &Integrand<'_>, system: &CubeSystem, opts: &FkOptions) -> Result<Vec<Enclosure>, Ks2Error> {
    (1..=system.k_max).map(|k| f_k(f, k, system, opts).map_err(Ks2Error::from)).collect()
}

pub fn ks2_inner(
    f: &Integrand<'_>,
    g: &Integrand<'_>,
    system: &CubeSystem,
    opts: &FkOptions,
) -> Result<InnerProduct, Ks2Error> {
    if let (Integrand::Indicators(a), Integrand::Indicators(b)) = (f, g) {
        let mut s = Rational::zero();
        for k in 1..=system.k_max {
            let fa = f_k_exact(a, k, system);
            if fa.is_zero() {
                continue;
            }
            s += CubeSystem::weight(k) * fa * f_k_exact(b, k, system);
        }
        let value = to_f64(&s);
        let tail = if tail_vanishes(f, system) || tail_vanishes(g, system) {
            0.0
        } else {
            to_f64(&a.sup_bound()) * to_f64(&b.sup_bound()) * mu_tail(system)
        };
        return Ok(InnerProduct {
            value,
            enclosure: Enclosure::around(value, tail),
            exact: Some(s),
            tail_included: true,
        });
    }
    let fv = f_values(f, system, opts)?;
    let gv = f_values(g, system, opts)?;
    let mut enc = Enclosure::point(0.0);
    let mut value = 0.0;
    for k in 0..system.k_max {
        let w = CubeSystem::weight_f64(k + 1);
        value += w * fv[k].mid() * gv[k].mid();
        enc = enc.add(&fv[k].mul(&gv[k]).scale(w));
    }
    let tail = match (f.sup_bound(), g.sup_bound()) {
        _ if tail_vanishes(f, system) || tail_vanishes(g, system) => Some(0.0),
        (Some(a), Some(b)) => Some(a * b * mu_tail(system)),
        _ => None,
    };
    Ok(InnerProduct { value, enclosure: enc.widen(tail.unwrap_or(0.0)), exact: None, tail_included: tail.is_some() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    BasisCombination,
    ExpandedCallable,
}

/// Coefficients over an [`OrthoBasis`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KS2Element {
    pub coeffs: Vec<f64>,
    pub tail_bound: f64,
    pub provenance: Provenance,
}

impl KS2Element {
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        Self { coeffs, tail_bound: 0.0, provenance: Provenance::BasisCombination }
    }

    pub fn basis_vector(j: usize, dim: usize) -> Self {
        let mut c = vec![0.0; dim];
        c[j] = 1.0;
        Self::from_coeffs(c)
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }
}

/// `c_j = <f, e_j>` for each basis vector.
pub fn expand(f: &Integrand<'_>, basis: &OrthoBasis, opts: &FkOptions) -> Result<KS2Element, Ks2Error> {
    let system = basis.system();
    let n = basis.dim();
    if let Integrand::Indicators(c) = f {
        // exact up to the final rounding
        let fk: Vec<Rational> = (1..=system.k_max).map(|k| f_k_exact(c, k, system)).collect();
        let coeffs = (0..n)
            .map(|j| {
                let s = fk
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(k, v)| CubeSystem::weight(k + 1) * v * &basis.f_scaled[j][k])
                    .fold(Rational::zero(), |a, b| a + b);
                to_f64(&s) * basis.inv_sqrt_pivot[j]
            })
            .collect();
        let tail = if tail_vanishes(f, system) {
            0.0
        } else {
            let sup = to_f64(&c.sup_bound());
            let t = mu_tail(system);
            (0..n).map(|j| (sup * basis.sup_bound(j) * t).powi(2)).sum::<f64>().sqrt()
        };
        return Ok(KS2Element { coeffs, tail_bound: tail, provenance: Provenance::BasisCombination });
    }
    let fv = f_values(f, system, opts)?;
    let geometric = system.mode == EnumerationMode::Geometric;
    let t = mu_tail(system);
    let mut coeffs = Vec::with_capacity(n);
    let mut radius_sq = 0.0;
    let mut tail_missing = false;
    for j in 0..n {
        let mut c = 0.0;
        let mut r = 0.0;
        for k in 1..=system.k_max {
            let w = CubeSystem::weight_f64(k) * basis.f_value(j, k);
            c += w * fv[k - 1].mid();
            r += w.abs() * fv[k - 1].radius();
        }
        if !geometric {
            match f.sup_bound() {
                Some(s) => r += s * basis.sup_bound(j) * t,
                None => tail_missing = true,
            }
        }
        coeffs.push(c);
        radius_sq += r * r;
    }
    let tail_bound = if tail_missing { f64::INFINITY } else { radius_sq.sqrt() };
    Ok(KS2Element { coeffs, tail_bound, provenance: Provenance::ExpandedCallable })
}

pub fn parseval_norm(f: &KS2Element) -> f64 {
    f.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Exact integrals of `chi_{[lo, hi]}`.
pub struct IntervalIndicator {
    pub lo: f64,
    pub hi: f64,
}

impl IntervalIntegral for IntervalIndicator {
    fn integrate_over(&self, a: f64, b: f64) -> Result<HKResult, HkError> {
        let (x, y, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        let len = (y.min(self.hi) - x.max(self.lo)).max(0.0);
        Ok(HKResult {
            value: sign * len,
            error_bound: 0.0,
            mode: crate::hk::IntegrationMode::SeriesExact,
            evaluations: 0,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub ks2_norm: f64,
    pub hk_seminorm: f64,
    pub ratio: f64,
    /// Slack granted for integration and truncation error.
    pub allowance: f64,
    pub tail_included: bool,
    pub passed: bool,
}

/// Compares `||f||_KS2` with the HK seminorm over the radius grid (`d = 1`).
pub fn embedding_check(
    f: &dyn IntervalIntegral,
    sup: Option<f64>,
    system: &CubeSystem,
    r_grid: &[f64],
) -> Result<EmbeddingReport, Ks2Error> {
    if system.d != 1 {
        return Err(Ks2Error::Dimension("embedding check runs in d = 1".into()));
    }
    let integrand = Integrand::Interval { f, sup };
    let ip = ks2_inner(&integrand, &integrand, system, &FkOptions::default())?;
    let ks2_norm = ip.value.max(0.0).sqrt();
    let hk = hk_seminorm(f, r_grid)?;
    // bound the error on the norm from the enclosure of its square
    let allowance =
        (ip.enclosure.hi.max(0.0).sqrt() - ks2_norm).max(ks2_norm - ip.enclosure.lo.max(0.0).sqrt()) + 1e-12;
    let ratio = if hk == 0.0 {
        if ks2_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ks2_norm / hk
    };
    Ok(EmbeddingReport {
        ks2_norm,
        hk_seminorm: hk,
        ratio,
        allowance,
        tail_included: ip.tail_included,
        passed: ks2_norm <= hk + allowance,
    })
}

/// `||chi_{B_k}||^2 = sum_{i} 2^-i ov(B_i, B_k)^2`, handy for checks.
pub fn indicator_norm_sq(system: &CubeSystem, k: usize) -> Rational {
    let c = IndicatorCombination::single(k);
    (1..=system.k_max)
        .map(|i| CubeSystem::weight(i) * f_k_exact(&c, i, system).pow(2))
        .fold(Rational::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube_system::{cube_volume, enumerate_cubes};
    use crate::exact::rat;
    use crate::hk::StaircaseSpec;

    fn geo(d: usize, k: usize) -> CubeSystem {
        enumerate_cubes(d, k, EnumerationMode::Geometric)
    }

    #[test]
    fn chi_b1_norm() {
        let s = geo(1, 8);
        let c = IndicatorCombination::single(1);
        let ip = ks2_inner(&Integrand::Indicators(&c), &Integrand::Indicators(&c), &s, &FkOptions::default()).unwrap();
        assert_eq!(ip.exact, Some(rat(1, 8)));
        assert_eq!(ip.enclosure.width(), 0.0);
    }

    #[test]
    fn one_against_one_matches_mu() {
        let s = geo(1, 3);
        let one = |_: &[f64]| 1.0;
        let f = Integrand::Callable { f: &one, sup: Some(1.0) };
        let ip = ks2_inner(&f, &f, &s, &FkOptions::default()).unwrap();
        assert!((ip.value - 73.0 / 512.0).abs() < 1e-15);
        assert!(ip.enclosure.contains(1.0 / 7.0));
    }

    #[test]
    fn disjoint_support_is_orthogonal() {
        let s = geo(1, 4);
        let a = IndicatorCombination::single(1);
        let b = IndicatorCombination::single(3);
        let ip = ks2_inner(&Integrand::Indicators(&a), &Integrand::Indicators(&b), &s, &FkOptions::default()).unwrap();
        assert_eq!(ip.exact, Some(rat(0, 1)));
    }

    #[test]
    fn paper_gram_has_half_diagonal() {
        let g = gram_matrix(&geo(1, 6), Normalization::Paper);
        for i in 0..6 {
            assert_eq!(g.entries[i][i], ScaledRational::new(rat(1, 2), 0));
        }
        assert_eq!(g.max_offdiag(), 0.0);
        let report = theorem_check(&g);
        assert!(!report.orthonormal);
        assert!(report.verdict_text.contains("1/2"));
    }

    #[test]
    fn corrected_gram_is_identity() {
        let g = gram_matrix(&geo(2, 6), Normalization::Corrected);
        assert!(theorem_check(&g).orthonormal);
    }

    #[test]
    fn diagonal_gram_overlaps() {
        let s = enumerate_cubes(1, 4, EnumerationMode::Diagonal);
        let g = gram_matrix(&s, Normalization::Corrected);
        assert!(g.is_symmetric());
        for i in 0..4 {
            assert!(g.entries[i][i].is_positive());
            for j in 0..4 {
                if i != j && overlap_volume(s.cube(i + 1), s.cube(j + 1)).is_positive() {
                    assert!(g.entries[i][j].is_positive());
                }
            }
        }
        assert!(g.entries[0][2].is_positive());
    }

    #[test]
    fn onb_geometric_identity_and_sqrt2() {
        let b = gram_schmidt_onb(&geo(1, 8), Normalization::Corrected).unwrap();
        let b2 = gram_schmidt_onb(&geo(1, 8), Normalization::Paper).unwrap();
        for j in 0..8 {
            for i in 0..8 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((b.change_of_basis[j][i] - t).abs() < 1e-14);
                assert!((b2.change_of_basis[j][i] - t * std::f64::consts::SQRT_2).abs() < 1e-14);
            }
        }
        assert!(b.certificate_residual < 1e-12);
    }

    #[test]
    fn onb_diagonal_certificate() {
        let s = enumerate_cubes(1, 4, EnumerationMode::Diagonal);
        let b = gram_schmidt_onb(&s, Normalization::Corrected).unwrap();
        assert!(b.certificate_residual < 1e-12, "{}", b.certificate_residual);
        // B_3 sits inside B_1, so e_3 carries a correction along Y_1
        assert!(b.change_of_basis[2][0].abs() > 1e-3);
        for j in 0..b.dim() {
            for i in (b.kept[j])..4 {
                assert_eq!(b.change_of_basis[j][i], 0.0);
            }
        }
    }

    #[test]
    fn onb_diagonal_larger() {
        for d in 1..=2 {
            let s = enumerate_cubes(d, 16, EnumerationMode::Diagonal);
            let b = gram_schmidt_onb(&s, Normalization::Corrected).unwrap();
            assert!(b.certificate_residual < 1e-12, "d={d}: {}", b.certificate_residual);
        }
    }

    #[test]
    fn expand_chi_b1() {
        let b = gram_schmidt_onb(&geo(1, 6), Normalization::Corrected).unwrap();
        let c = IndicatorCombination::single(1);
        let e = expand(&Integrand::Indicators(&c), &b, &FkOptions::default()).unwrap();
        assert!((e.coeffs[0] - 2f64.powf(-1.5)).abs() < 1e-15);
        assert!(e.coeffs[1..].iter().all(|c| *c == 0.0));
        assert!((parseval_norm(&e) - 0.353553390593).abs() < 1e-12);
        assert_eq!(e.tail_bound, 0.0);
    }

    #[test]
    fn expand_basis_vectors() {
        let s = enumerate_cubes(1, 6, EnumerationMode::Diagonal);
        let b = gram_schmidt_onb(&s, Normalization::Corrected).unwrap();
        let e1 = b.element(0);
        let c = expand(&Integrand::Indicators(&e1), &b, &FkOptions::default()).unwrap();
        assert!((c.coeffs[0] - 1.0).abs() < 1e-12);
        assert!(c.coeffs[1..].iter().all(|x| x.abs() < 1e-12));
        let combo = b.element(0).scaled(&rat(3, 1)).plus(&b.element(1).scaled(&rat(4, 1)));
        let c = expand(&Integrand::Indicators(&combo), &b, &FkOptions::default()).unwrap();
        assert!((c.coeffs[0] - 3.0).abs() < 1e-12 && (c.coeffs[1] - 4.0).abs() < 1e-12);
        assert!((parseval_norm(&KS2Element::from_coeffs(vec![3.0, 4.0])) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn parseval_zero() {
        assert_eq!(parseval_norm(&KS2Element::from_coeffs(vec![0.0; 5])), 0.0);
    }

    #[test]
    fn expand_callable_matches_inner() {
        let s = geo(1, 10);
        let b = gram_schmidt_onb(&s, Normalization::Corrected).unwrap();
        let f = |x: &[f64]| x[0] * x[0];
        let g = Integrand::Callable { f: &f, sup: Some(1.0) };
        let e = expand(&g, &b, &FkOptions::default()).unwrap();
        let ip = ks2_inner(&g, &g, &s, &FkOptions::default()).unwrap();
        assert!((parseval_norm(&e).powi(2) - ip.value).abs() < 1e-10);
    }

    #[test]
    fn embedding_indicator() {
        let s = geo(1, 16);
        let r = embedding_check(&IntervalIndicator { lo: 0.0, hi: 1.0 }, Some(1.0), &s, &[0.5, 1.0, 2.0]).unwrap();
        assert!(r.passed);
        assert!(r.ratio <= 1.0);
        assert!((r.hk_seminorm - 1.0).abs() < 1e-15);
        assert!((r.ks2_norm - (1.0f64 / 7.0).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn embedding_zero() {
        let s = geo(1, 8);
        let r = embedding_check(&IntervalIndicator { lo: 0.0, hi: 0.0 }, Some(0.0), &s, &[1.0]).unwrap();
        assert_eq!((r.ks2_norm, r.hk_seminorm, r.ratio), (0.0, 0.0, 0.0));
        assert!(r.passed);
    }

    #[test]
    fn embedding_staircase() {
        let s = geo(1, 16);
        let f = StaircaseSpec::alternating_harmonic(40);
        let r = embedding_check(&f, None, &s, &[0.25, 0.5, 1.0]).unwrap();
        assert!(r.passed && r.ks2_norm.is_finite());
        assert!(r.hk_seminorm >= std::f64::consts::LN_2 - 1e-9);
        assert!(!r.tail_included);
    }

    #[test]
    fn indicator_norms() {
        let s = geo(1, 5);
        assert_eq!(indicator_norm_sq(&s, 2), rat(1, 64));
        assert!(s.cubes.iter().all(|c| cube_volume(c) == overlap_volume(c, c)));
    }
}
