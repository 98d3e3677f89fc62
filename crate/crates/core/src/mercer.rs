//! Spectral decomposition of symmetric coefficient matrices and the RKHS
//! `H_K` built on the system `{sqrt(lambda_n) k_n}`.
//!
//! Eigenfunctions live in the orthonormal basis: `k_n = sum_j V[j][n] e_j`.
//! An [`RKHSElement`] stores coordinates `c_n` relative to
//! `sqrt(lambda_n) k_n`, so `||f||_K^2 = sum c_n^2` and, in KS² coordinates,
//! `f = sum_n c_n sqrt(lambda_n) k_n`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::ks2::{KS2Element, OrthoBasis, Provenance};
use crate::operators::{KernelCoefficients, OperatorError};

pub const DEFAULT_JACOBI_TOL: f64 = 1e-13;
pub const MAX_DIM: usize = 64;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MercerError {
    #[error("kernel matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix dimension {0} exceeds the supported maximum {MAX_DIM}")]
    TooLarge(usize),
    #[error("Jacobi iteration stalled after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NonConvergence { sweeps: usize, off: f64 },
    #[error("eigenvalue {value:e} at position {index} is negative; the RKHS is undefined")]
    NegativeEigenvalue { index: usize, value: f64 },
    #[error("elements belong to different eigen systems")]
    Mismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid decay model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenSystem {
    /// Nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i][n]` is coordinate `i` of `k_n`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub negatives_present: bool,
    /// Final off-diagonal Frobenius norm.
    pub off_norm: f64,
    pub sweeps: usize,
    #[serde(skip)]
    tag: u64,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, n: usize) -> Vec<f64> {
        self.eigenvectors.iter().map(|row| row[n]).collect()
    }

    /// Eigenvalues at or below this are treated as zero.
    pub fn zero_threshold(&self) -> f64 {
        let scale = self.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(1.0);
        DEFAULT_JACOBI_TOL * scale * self.dim().max(1) as f64
    }

    /// Indices with a strictly positive eigenvalue.
    pub fn positive_indices(&self) -> Vec<usize> {
        let z = self.zero_threshold();
        (0..self.dim()).filter(|&n| self.eigenvalues[n] > z).collect()
    }

    /// `max |V^T V - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|i| self.eigenvectors[i][a] * self.eigenvectors[i][b]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    fn require_nonnegative(&self) -> Result<(), MercerError> {
        if self.negatives_present {
            let index = self.eigenvalues.iter().position(|l| *l < -self.zero_threshold()).unwrap_or(0);
            return Err(MercerError::NegativeEigenvalue { index, value: self.eigenvalues[index] });
        }
        Ok(())
    }

    /// `k_n(x)` for every `n`, via pointwise values of the basis.
    pub fn eigenfunctions_at(&self, x: &[f64], basis: &OrthoBasis) -> Vec<f64> {
        let e: Vec<f64> = (0..basis.dim()).map(|j| basis.eval(j, x)).collect();
        (0..self.dim()).map(|n| (0..self.dim()).map(|j| self.eigenvectors[j][n] * e[j]).sum()).collect()
    }

    /// `sum_n lambda_n k_n(x) k_n(y)`.
    pub fn kernel_at(&self, x: &[f64], y: &[f64], basis: &OrthoBasis) -> f64 {
        let kx = self.eigenfunctions_at(x, basis);
        let ky = self.eigenfunctions_at(y, basis);
        (0..self.dim()).map(|n| self.eigenvalues[n] * kx[n] * ky[n]).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("eigen system serializes")
    }
}

fn fingerprint(values: &[f64], vectors: &[Vec<f64>]) -> u64 {
    let mut h = DefaultHasher::new();
    values.iter().chain(vectors.iter().flatten()).for_each(|v| v.to_bits().hash(&mut h));
    h.finish()
}

fn off_norm(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i][j] * a[i][j];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi until the off-diagonal norm is at most `tol * max(1, ||A||_F)`.
pub fn eigendecompose(k: &KernelCoefficients, tol: f64) -> Result<EigenSystem, MercerError> {
    if !k.symmetric {
        return Err(MercerError::NotSymmetric);
    }
    let n = k.dim();
    if n > MAX_DIM {
        return Err(MercerError::TooLarge(n));
    }
    let mut a = k.a.clone();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let target = tol * k.frobenius.max(1.0);
    let mut sweeps = 0;
    while off_norm(&a) > target {
        if sweeps == MAX_SWEEPS {
            return Err(MercerError::NonConvergence { sweeps, off: off_norm(&a) });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (arp, arq) = (a[r][p], a[r][q]);
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let (apr, aqr) = (a[p][r], a[q][r]);
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let off = off_norm(&a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let mut eigenvectors = vec![vec![0.0; n]; n];
    for (col, &src) in order.iter().enumerate() {
        let first = (0..n).find(|&i| v[i][src].abs() > 1e-12).unwrap_or(0);
        let sign = if v[first][src] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[i][col] = sign * v[i][src];
        }
    }
    let mut es = EigenSystem { eigenvalues, eigenvectors, negatives_present: false, off_norm: off, sweeps, tag: 0 };
    es.negatives_present = es.eigenvalues.iter().any(|l| *l < -es.zero_threshold().max(tol));
    es.tag = fingerprint(&es.eigenvalues, &es.eigenvectors);
    Ok(es)
}

/// `sum_{n < n_terms} lambda_n k_n k_n^T`.
pub fn mercer_reconstruct(e: &EigenSystem, n_terms: usize) -> Result<KernelCoefficients, MercerError> {
    let n = e.dim();
    if n_terms > n {
        return Err(MercerError::Dimension { expected: n, got: n_terms });
    }
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..n_terms).map(|t| e.eigenvalues[t] * e.eigenvectors[i][t] * e.eigenvectors[j][t]).sum();
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    Ok(KernelCoefficients::from_matrix(a)?)
}

/// Coordinates relative to `{sqrt(lambda_n) k_n}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RKHSElement {
    pub c: Vec<f64>,
    #[serde(skip)]
    tag: u64,
}

impl RKHSElement {
    /// Zeroes coordinates on vanishing eigenvalues.
    pub fn new(c: Vec<f64>, e: &EigenSystem) -> Result<Self, MercerError> {
        e.require_nonnegative()?;
        if c.len() != e.dim() {
            return Err(MercerError::Dimension { expected: e.dim(), got: c.len() });
        }
        let z = e.zero_threshold();
        let c = c.into_iter().zip(&e.eigenvalues).map(|(c, l)| if *l > z { c } else { 0.0 }).collect();
        Ok(Self { c, tag: e.tag })
    }

    pub fn norm(&self) -> f64 {
        self.c.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Pointwise value `sum_j (sum_n c_n sqrt(lambda_n) V[j][n]) e_j(x)`.
    pub fn eval(&self, e: &EigenSystem, x: &[f64], basis: &OrthoBasis) -> f64 {
        let f = iota(self, e);
        f.coeffs.iter().enumerate().map(|(j, c)| c * basis.eval(j, x)).sum()
    }
}

pub fn rkhs_inner(f: &RKHSElement, g: &RKHSElement) -> Result<f64, MercerError> {
    if f.tag != g.tag || f.c.len() != g.c.len() {
        return Err(MercerError::Mismatch);
    }
    Ok(f.c.iter().zip(&g.c).map(|(a, b)| a * b).sum())
}

/// The inclusion `H_K -> KS²`: coefficients `sum_n c_n sqrt(lambda_n) V[:, n]`.
pub fn iota(f: &RKHSElement, e: &EigenSystem) -> KS2Element {
    let n = e.dim();
    let coeffs = (0..n)
        .map(|j| (0..n).map(|t| f.c[t] * e.eigenvalues[t].max(0.0).sqrt() * e.eigenvectors[j][t]).sum())
        .collect();
    KS2Element { coeffs, tail_bound: 0.0, provenance: Provenance::BasisCombination }
}

#[derive(Clone, Debug, Serialize)]
pub struct PointEvaluator {
    pub element: RKHSElement,
    /// Set when `x` lies in none of the cubes.
    pub outside: bool,
}

/// `K(x, .)` with coordinates `sqrt(lambda_n) k_n(x)`.
pub fn point_evaluator(e: &EigenSystem, x: &[f64], basis: &OrthoBasis) -> Result<PointEvaluator, MercerError> {
    e.require_nonnegative()?;
    let outside = !basis.system().cubes.iter().any(|c| c.contains(x));
    let c = if outside {
        vec![0.0; e.dim()]
    } else {
        let k = e.eigenfunctions_at(x, basis);
        k.iter().zip(&e.eigenvalues).map(|(kn, l)| l.max(0.0).sqrt() * kn).collect()
    };
    Ok(PointEvaluator { element: RKHSElement::new(c, e)?, outside })
}

/// `|<f, K(x, .)>_K - f(x)|` with `f(x)` synthesized pointwise.
pub fn reproducing_residual(
    f: &RKHSElement,
    e: &EigenSystem,
    x: &[f64],
    basis: &OrthoBasis,
) -> Result<f64, MercerError> {
    let ev = point_evaluator(e, x, basis)?;
    Ok((rkhs_inner(f, &ev.element)? - f.eval(e, x, basis)).abs())
}

/// `sum_{n <= K} sum_j A[k][j] e_k(x) e_j(y)`: the kernel synthesized from its coefficients.
pub fn kernel_from_coefficients(a: &KernelCoefficients, x: &[f64], y: &[f64], basis: &OrthoBasis) -> f64 {
    let n = a.dim();
    let ex: Vec<f64> = (0..n).map(|j| basis.eval(j, x)).collect();
    let ey: Vec<f64> = (0..n).map(|j| basis.eval(j, y)).collect();
    (0..n).map(|k| ex[k] * (0..n).map(|j| a.a[k][j] * ey[j]).sum::<f64>()).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct PdReport {
    pub value: f64,
    pub passed: bool,
}

/// `sum_{i,j} w_i w_j K(x_i, x_j)` with `K` synthesized from all eigenpairs.
pub fn pd_check(
    e: &EigenSystem,
    points: &[Vec<f64>],
    weights: &[f64],
    basis: &OrthoBasis,
) -> Result<PdReport, MercerError> {
    if points.len() != weights.len() {
        return Err(MercerError::Dimension { expected: points.len(), got: weights.len() });
    }
    let feats: Vec<Vec<f64>> = points.iter().map(|x| e.eigenfunctions_at(x, basis)).collect();
    let mut value = 0.0;
    for (fi, wi) in feats.iter().zip(weights) {
        for (fj, wj) in feats.iter().zip(weights) {
            let k: f64 = (0..e.dim()).map(|n| e.eigenvalues[n] * fi[n] * fj[n]).sum();
            value += wi * wj * k;
        }
    }
    Ok(PdReport { value, passed: value >= -1e-10 })
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub kxy: f64,
    pub kxx: f64,
    pub kyy: f64,
    /// `|K(x,y)|^2 <= K(x,x) K(y,y)`.
    pub squared_form_holds: bool,
    /// `|K(x,y)| <= K(x,x) K(y,y)`.
    pub unsquared_form_holds: bool,
    pub squared_slack: f64,
    pub unsquared_slack: f64,
}

pub fn diag_domination_check(
    e: &EigenSystem,
    x: &[f64],
    y: &[f64],
    basis: &OrthoBasis,
) -> Result<DominationReport, MercerError> {
    e.require_nonnegative()?;
    let kxy = e.kernel_at(x, y, basis);
    let kxx = e.kernel_at(x, x, basis);
    let kyy = e.kernel_at(y, y, basis);
    let squared_slack = kxx * kyy - kxy * kxy;
    let unsquared_slack = kxx * kyy - kxy.abs();
    let tol = 1e-12 * (kxx * kyy).abs().max(1.0);
    Ok(DominationReport {
        kxy,
        kxx,
        kyy,
        squared_form_holds: squared_slack >= -tol,
        unsquared_form_holds: unsquared_slack >= -tol,
        squared_slack,
        unsquared_slack,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct JkImage {
    pub element: RKHSElement,
    /// Eigen-directions with vanishing eigenvalue whose coefficient was dropped.
    pub dropped: Vec<usize>,
}

/// `j_K`: the KS² coefficients of `f` along `k_n` become RKHS coordinates.
pub fn multiplier_jk(f: &KS2Element, e: &EigenSystem) -> Result<JkImage, MercerError> {
    e.require_nonnegative()?;
    let n = e.dim();
    if f.coeffs.len() != n {
        return Err(MercerError::Dimension { expected: n, got: f.coeffs.len() });
    }
    let a: Vec<f64> = (0..n).map(|t| (0..n).map(|j| e.eigenvectors[j][t] * f.coeffs[j]).sum()).collect();
    let positive = e.positive_indices();
    let dropped = (0..n).filter(|t| !positive.contains(t) && a[*t] != 0.0).collect();
    Ok(JkImage { element: RKHSElement::new(a, e)?, dropped })
}

/// Eigenvalue decay envelope `1 / (a 2^(n(2d+1))) <= lambda_n <= c^2 2^(-n(2d+1))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    pub d: usize,
    pub c: f64,
    pub a: f64,
}

impl DecayModel {
    pub fn new(d: usize, c: f64, a: f64) -> Result<Self, MercerError> {
        if d == 0 || !(c > 0.0) || !(a > 0.0) || !c.is_finite() || !a.is_finite() {
            return Err(MercerError::InvalidModel("need d >= 1, c > 0, a > 0".into()));
        }
        if a * c * c < 1.0 {
            return Err(MercerError::InvalidModel(format!(
                "a c^2 = {} < 1 leaves no admissible eigenvalues",
                a * c * c
            )));
        }
        Ok(Self { d, c, a })
    }

    fn rate(&self) -> i32 {
        2 * self.d as i32 + 1
    }

    /// `lambda_n = c^2 2^(-n(2d+1))`, `n = 1..=count`.
    pub fn eigenvalues(&self, count: usize) -> Vec<f64> {
        (1..=count).map(|n| self.c * self.c * 2f64.powi(-(n as i32) * self.rate())).collect()
    }

    pub fn admits(&self, lambdas: &[f64]) -> bool {
        lambdas.iter().enumerate().all(|(i, l)| {
            let p = 2f64.powi(-((i + 1) as i32) * self.rate());
            *l <= self.c * self.c * p * (1.0 + 1e-12) && *l >= p / self.a * (1.0 - 1e-12)
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IotaReport {
    pub sup_sqrt_lambda: f64,
    pub model_bound: f64,
    pub holds: bool,
}

/// `sup_n sqrt(lambda_n)` against `c 2^(-(2d+1)/2)`.
pub fn iota_norm_bound(e: &EigenSystem, model: &DecayModel) -> IotaReport {
    let sup = e.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.max(0.0).sqrt()));
    let bound = model.c * 2f64.powf(-(model.rate() as f64) / 2.0);
    IotaReport { sup_sqrt_lambda: sup, model_bound: bound, holds: sup <= bound * (1.0 + 1e-12) }
}

/// Named coefficient fixtures.
pub fn fixture(name: &str) -> Option<KernelCoefficients> {
    let m = |a: Vec<Vec<f64>>| KernelCoefficients::from_matrix(a).expect("square fixture");
    Some(match name {
        "diag-2-1" => KernelCoefficients::diagonal(&[2.0, 1.0]),
        "pair-3-1" => m(vec![vec![2.0, 1.0], vec![1.0, 2.0]]),
        "swap" => m(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
        "rank-one" => {
            let mut a = vec![vec![0.0; 4]; 4];
            a[0][0] = 1.0;
            m(a)
        }
        "decay" => KernelCoefficients::diagonal(&DecayModel { d: 1, c: 1.0, a: 1.0 }.eigenvalues(8)),
        _ => return None,
    })
}

pub fn fixture_names() -> &'static [&'static str] {
    &["diag-2-1", "pair-3-1", "swap", "rank-one", "decay"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube_system::{enumerate_cubes, EnumerationMode};
    use crate::ks2::{gram_schmidt_onb, Normalization};

    fn eig(name: &str) -> EigenSystem {
        eigendecompose(&fixture(name).unwrap(), DEFAULT_JACOBI_TOL).unwrap()
    }

    fn basis(k: usize) -> OrthoBasis {
        gram_schmidt_onb(&enumerate_cubes(1, k, EnumerationMode::Geometric), Normalization::Corrected).unwrap()
    }

    #[test]
    fn textbook_spectra() {
        let e = eig("diag-2-1");
        assert_eq!(e.eigenvalues, vec![2.0, 1.0]);
        assert_eq!(e.eigenvectors, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let e = eig("pair-3-1");
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14 && (e.eigenvalues[1] - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.vector(0)[0] - r).abs() < 1e-14 && (e.vector(0)[1] - r).abs() < 1e-14);
        assert!((e.vector(1)[0] - r).abs() < 1e-14 && (e.vector(1)[1] + r).abs() < 1e-14);
        let e = eig("swap");
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14 && (e.eigenvalues[1] + 1.0).abs() < 1e-14);
        assert!(e.negatives_present);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = KernelCoefficients::from_matrix(vec![vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(eigendecompose(&a, 1e-13), Err(MercerError::NotSymmetric));
    }

    #[test]
    fn reconstructions() {
        let e = eig("diag-2-1");
        assert_eq!(mercer_reconstruct(&e, 2).unwrap().a, vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        let one = mercer_reconstruct(&eig("pair-3-1"), 1).unwrap();
        for row in &one.a {
            for v in row {
                assert!((v - 1.5).abs() < 1e-14);
            }
        }
        assert_eq!(mercer_reconstruct(&e, 0).unwrap().frobenius, 0.0);
    }

    #[test]
    fn rkhs_inner_cases() {
        let e = eig("diag-2-1");
        let a = RKHSElement::new(vec![3.0, 4.0], &e).unwrap();
        assert_eq!(rkhs_inner(&a, &a).unwrap(), 25.0);
        let b = RKHSElement::new(vec![1.0, 0.0], &e).unwrap();
        let c = RKHSElement::new(vec![0.0, 1.0], &e).unwrap();
        assert_eq!(rkhs_inner(&b, &b).unwrap(), 1.0);
        assert_eq!(rkhs_inner(&b, &c).unwrap(), 0.0);
        let other = RKHSElement::new(vec![1.0, 0.0], &eig("pair-3-1")).unwrap();
        assert_eq!(rkhs_inner(&b, &other), Err(MercerError::Mismatch));
    }

    #[test]
    fn evaluator_rank_one() {
        let e = eig("rank-one");
        let b = basis(4);
        let ev = point_evaluator(&e, &[0.25], &b).unwrap();
        assert!((ev.element.c[0] - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(!ev.outside);
        let out = point_evaluator(&e, &[5.0], &b).unwrap();
        assert!(out.outside && out.element.c.iter().all(|c| *c == 0.0));
        let f = RKHSElement::new(vec![1.0, 0.0, 0.0, 0.0], &e).unwrap();
        assert!(reproducing_residual(&f, &e, &[0.25], &b).unwrap() <= 1e-12);
    }

    #[test]
    fn evaluator_refuses_negatives() {
        let e = eig("swap");
        assert!(matches!(point_evaluator(&e, &[0.25], &basis(2)), Err(MercerError::NegativeEigenvalue { .. })));
    }

    #[test]
    fn pd_violation_detected() {
        let e = eig("swap");
        let b = basis(2);
        let (x1, x2) = (vec![0.25], vec![0.6]);
        let w = [1.0 / b.eval(0, &x1), -1.0 / b.eval(1, &x2)];
        let r = pd_check(&e, &[x1, x2], &w, &b).unwrap();
        assert!(!r.passed && (r.value + 2.0).abs() < 1e-12);
        let z = pd_check(&eig("pair-3-1"), &[vec![0.1], vec![0.6]], &[0.0, 0.0], &b).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn domination_rank_one_equality() {
        let e = eig("rank-one");
        let b = basis(4);
        let r = diag_domination_check(&e, &[0.1], &[0.3], &b).unwrap();
        assert!(r.squared_form_holds && r.squared_slack.abs() < 1e-12);
    }

    #[test]
    fn jk_cases() {
        let e = eigendecompose(&KernelCoefficients::diagonal(&[0.25, 1.0 / 16.0]), 1e-13).unwrap();
        let img = multiplier_jk(&KS2Element::from_coeffs(vec![3.0, 4.0]), &e).unwrap();
        assert!((img.element.norm() - 5.0).abs() < 1e-15);
        let img = multiplier_jk(&KS2Element::from_coeffs(e.vector(0)), &e).unwrap();
        assert_eq!(img.element.c, vec![1.0, 0.0]);
        let deg = eigendecompose(&KernelCoefficients::diagonal(&[1.0, 0.0]), 1e-13).unwrap();
        let img = multiplier_jk(&KS2Element::from_coeffs(deg.vector(1)), &deg).unwrap();
        assert_eq!(img.element.norm(), 0.0);
        assert_eq!(img.dropped, vec![1]);
    }

    #[test]
    fn iota_bounds() {
        let model = DecayModel::new(1, 1.0, 1.0).unwrap();
        let e = eigendecompose(&KernelCoefficients::diagonal(&model.eigenvalues(6)), 1e-13).unwrap();
        let r = iota_norm_bound(&e, &model);
        assert!((r.sup_sqrt_lambda - 2f64.powf(-1.5)).abs() < 1e-15 && r.holds);
        let sat = DecayModel::new(1, 2f64.powf(1.5), 1.0).unwrap();
        let one = eigendecompose(&KernelCoefficients::diagonal(&[1.0]), 1e-13).unwrap();
        let r = iota_norm_bound(&one, &sat);
        assert!(r.holds && (r.sup_sqrt_lambda - r.model_bound).abs() < 1e-15);
        let zero = eigendecompose(&KernelCoefficients::zero(3), 1e-13).unwrap();
        assert_eq!(iota_norm_bound(&zero, &model).sup_sqrt_lambda, 0.0);
        assert!(model.admits(&model.eigenvalues(10)));
        assert!(DecayModel::new(1, 0.5, 1.0).is_err());
    }

    #[test]
    fn json_shape() {
        let v = eig("pair-3-1").to_json();
        for key in ["eigenvalues", "eigenvectors", "negatives_present"] {
            assert!(v.get(key).is_some());
        }
    }
}
