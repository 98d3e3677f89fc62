//! Kernels `K(x, y)` as coefficient matrices `A[k][j] = <K, e_k ⊗ e_j>` in the
//! tensor orthonormal basis, and the induced operator
//! `I_K f = <K(x, .), f>`, which acts on coefficients as `A f`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube_system::{CubeSystem, EnumerationMode, FkOptions, IndicatorCombination, Integrand};
use crate::exact::Enclosure;
use crate::hk::{hk_integrate_box, AxisGauge, BoxOptions, HkError, HyperBox};
use crate::ks2::{expand, KS2Element, Ks2Error, OrthoBasis};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("coefficient matrix must be square and non-empty")]
    NotSquare,
    #[error("matrix declared symmetric but entry ({0}, {1}) differs from its transpose")]
    Asymmetric(usize, usize),
    #[error("dimension mismatch: operator has {operator}, element has {element}")]
    Dimension { operator: usize, element: usize },
    #[error("unknown kernel '{0}'")]
    UnknownKernel(String),
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Integration(#[from] HkError),
    #[error(transparent)]
    Ks2(#[from] Ks2Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCoefficients {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub symmetric: bool,
    pub frobenius: f64,
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

impl KernelCoefficients {
    /// Stores `a`; the symmetric flag is set iff `a` equals its transpose exactly.
    pub fn from_matrix(a: Vec<Vec<f64>>) -> Result<Self, OperatorError> {
        let n = a.len();
        if n == 0 || a.iter().any(|r| r.len() != n) {
            return Err(OperatorError::NotSquare);
        }
        let symmetric = (0..n).all(|i| (0..i).all(|j| a[i][j] == a[j][i]));
        let frobenius = frobenius(&a);
        Ok(Self { a, symmetric, frobenius })
    }

    /// Like [`from_matrix`](Self::from_matrix) but fails unless `a` is symmetric.
    pub fn symmetric(a: Vec<Vec<f64>>) -> Result<Self, OperatorError> {
        let k = Self::from_matrix(a)?;
        if !k.symmetric {
            let n = k.dim();
            for i in 0..n {
                for j in 0..i {
                    if k.a[i][j] != k.a[j][i] {
                        return Err(OperatorError::Asymmetric(i, j));
                    }
                }
            }
        }
        Ok(k)
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut a = vec![vec![0.0; n]; n];
        for (i, v) in d.iter().enumerate() {
            a[i][i] = *v;
        }
        Self::from_matrix(a).expect("square")
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn zero(n: usize) -> Self {
        Self::diagonal(&vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim();
        Self::from_matrix((0..n).map(|i| (0..n).map(|j| self.a[j][i]).collect()).collect()).expect("square")
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Kernels that can be ingested into the tensor basis.
pub enum KernelInput<'a> {
    /// `sum_i f_i(x) g_i(y)` with both factors indicator combinations: exact.
    Tensor(&'a [(IndicatorCombination, IndicatorCombination)]),
    /// A pointwise kernel on `R^d x R^d`, called with the concatenation `(x, y)`.
    Callable { f: &'a (dyn Fn(&[f64]) -> f64 + Sync), sup: Option<f64>, symmetric: bool },
}

/// `F_{l,m}(K) = int_{B_l x B_m} K`, with the integrator's error bound.
pub fn tensor_functional(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    l: usize,
    m: usize,
    system: &CubeSystem,
    opts: &FkOptions,
) -> Result<Enclosure, HkError> {
    let (bl, bm) = (system.cube(l).to_box(), system.cube(m).to_box());
    let lo: Vec<f64> = bl.lo.iter().chain(&bm.lo).copied().collect();
    let hi: Vec<f64> = bl.hi.iter().chain(&bm.hi).copied().collect();
    let cube = HyperBox::new(lo, hi)?;
    let edges: Vec<f64> = cube.lo.iter().zip(&cube.hi).map(|(l, h)| (h - l) * opts.gauge_fraction).collect();
    let gauge = AxisGauge(move |_: &[f64], axis: usize| edges[axis]);
    let box_opts = BoxOptions { dim_cap: 2 * system.d.max(1), ..Default::default() };
    Ok(hk_integrate_box(f, &cube, &gauge, opts.refine_levels, &box_opts)?.enclosure())
}

/// All coefficients `<K, e_k ⊗ e_j>` as enclosures.
pub fn tensor_coeffs(
    kernel: &KernelInput<'_>,
    basis: &OrthoBasis,
    opts: &FkOptions,
) -> Result<Vec<Vec<Enclosure>>, OperatorError> {
    let n = basis.dim();
    match kernel {
        KernelInput::Tensor(terms) => {
            let mut out = vec![vec![Enclosure::point(0.0); n]; n];
            for (f, g) in terms.iter() {
                let cf = expand(&Integrand::Indicators(f), basis, opts)?;
                let cg = expand(&Integrand::Indicators(g), basis, opts)?;
                for k in 0..n {
                    for j in 0..n {
                        let radius = cf.tail_bound * cg.coeffs[j].abs()
                            + cg.tail_bound * cf.coeffs[k].abs()
                            + cf.tail_bound * cg.tail_bound;
                        out[k][j] = out[k][j].add(&Enclosure::around(cf.coeffs[k] * cg.coeffs[j], radius));
                    }
                }
            }
            Ok(out)
        }
        KernelInput::Callable { f, sup, symmetric } => {
            let system = basis.system();
            let kk = system.k_max;
            let mut fl = vec![vec![Enclosure::point(0.0); kk]; kk];
            for l in 1..=kk {
                for m in 1..=kk {
                    if *symmetric && m < l {
                        fl[l - 1][m - 1] = fl[m - 1][l - 1];
                    } else {
                        fl[l - 1][m - 1] = tensor_functional(*f, l, m, system, opts)?;
                    }
                }
            }
            // sum_{l,m} 2^-l-m F_{l,m}(K) F_l(e_k) F_m(e_j)
            let fe: Vec<Vec<f64>> =
                (0..n).map(|j| (1..=kk).map(|l| CubeSystem::weight_f64(l) * basis.f_value(j, l)).collect()).collect();
            let tail_scale = match (system.mode, sup) {
                (EnumerationMode::Geometric, _) => 0.0,
                (EnumerationMode::Diagonal, Some(s)) => s * 2f64.powi(1 - kk as i32),
                (EnumerationMode::Diagonal, None) => f64::INFINITY,
            };
            let mut out = vec![vec![Enclosure::point(0.0); n]; n];
            for k in 0..n {
                for j in 0..n {
                    let (mut v, mut r) = (0.0, 0.0);
                    for l in 0..kk {
                        if fe[k][l] == 0.0 {
                            continue;
                        }
                        for m in 0..kk {
                            let w = fe[k][l] * fe[j][m];
                            v += w * fl[l][m].mid();
                            r += w.abs() * fl[l][m].radius();
                        }
                    }
                    if tail_scale > 0.0 {
                        r += tail_scale * basis.sup_bound(k) * basis.sup_bound(j);
                    }
                    out[k][j] = Enclosure::around(v, r);
                }
            }
            if *symmetric {
                for k in 0..n {
                    for j in 0..k {
                        out[k][j] = out[j][k];
                    }
                }
            }
            Ok(out)
        }
    }
}

/// A single coefficient `<K, e_k ⊗ e_j>` (0-based basis indices).
pub fn tensor_coeff(
    kernel: &KernelInput<'_>,
    k: usize,
    j: usize,
    basis: &OrthoBasis,
    opts: &FkOptions,
) -> Result<Enclosure, OperatorError> {
    if k >= basis.dim() || j >= basis.dim() {
        return Err(OperatorError::Dimension { operator: basis.dim(), element: k.max(j) + 1 });
    }
    Ok(tensor_coeffs(kernel, basis, opts)?[k][j])
}

/// Ingests a kernel at the midpoints of its coefficient enclosures.
pub fn kernel_coefficients(
    kernel: &KernelInput<'_>,
    basis: &OrthoBasis,
    opts: &FkOptions,
) -> Result<(KernelCoefficients, f64), OperatorError> {
    let enc = tensor_coeffs(kernel, basis, opts)?;
    let a: Vec<Vec<f64>> = enc.iter().map(|r| r.iter().map(|e| e.mid()).collect()).collect();
    let radius = enc.iter().flatten().map(|e| e.radius()).fold(0.0, f64::max);
    Ok((KernelCoefficients::from_matrix(a)?, radius))
}

pub fn apply_operator(a: &KernelCoefficients, f: &KS2Element) -> Result<KS2Element, OperatorError> {
    if a.dim() != f.coeffs.len() {
        return Err(OperatorError::Dimension { operator: a.dim(), element: f.coeffs.len() });
    }
    Ok(KS2Element { coeffs: a.matvec(&f.coeffs), tail_bound: a.frobenius * f.tail_bound, provenance: f.provenance })
}

/// Unit vector with independent uniform coordinates, normalized.
pub fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return x.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Symmetric matrix with entries uniform in `[-1, 1]`.
pub fn random_symmetric<R: Rng>(n: usize, rng: &mut R) -> KernelCoefficients {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = rng.gen_range(-1.0..1.0);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    KernelCoefficients::from_matrix(a).expect("square")
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub max_ratio: f64,
    pub frobenius: f64,
    pub trials: usize,
    pub seed: u64,
    pub within_bound: bool,
}

/// Largest `||A f||` over `trials` random unit vectors.
pub fn operator_norm_bound(a: &KernelCoefficients, trials: usize, seed: u64) -> NormReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = a.dim();
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let x = random_unit(n, &mut rng);
        let y = a.matvec(&x);
        max_ratio = max_ratio.max(y.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    NormReport {
        max_ratio,
        frobenius: a.frobenius,
        trials,
        seed,
        within_bound: max_ratio <= a.frobenius * (1.0 + 1e-12),
    }
}

/// `|<A f, g> - <f, A g>|`.
pub fn self_adjointness_residual(a: &KernelCoefficients, f: &KS2Element, g: &KS2Element) -> Result<f64, OperatorError> {
    let af = apply_operator(a, f)?;
    let ag = apply_operator(a, g)?;
    Ok((af.inner(g) - f.inner(&ag)).abs())
}

/// For `m = 1..=K`, the Frobenius norm of `A` outside its leading `m x m` block.
pub fn compactness_profile(a: &KernelCoefficients) -> Vec<f64> {
    let n = a.dim();
    (1..=n)
        .map(|m| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i >= m || j >= m {
                        s += a.a[i][j] * a.a[i][j];
                    }
                }
            }
            s.sqrt()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Matrix,
    Diagonal,
    CallableName,
}

/// `{type, data, symmetric}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(rename = "type")]
    pub kind: KernelKind,
    pub data: serde_json::Value,
    #[serde(default)]
    pub symmetric: Option<bool>,
}

fn gaussian(z: &[f64]) -> f64 {
    let d = z.len() / 2;
    (-(0..d).map(|i| (z[i] - z[d + i]).powi(2)).sum::<f64>()).exp()
}

fn laplace(z: &[f64]) -> f64 {
    let d = z.len() / 2;
    (-(0..d).map(|i| (z[i] - z[d + i]).powi(2)).sum::<f64>().sqrt()).exp()
}

fn zero_kernel(_: &[f64]) -> f64 {
    0.0
}

/// Named pointwise kernels `(f, sup |f|)`.
pub fn named_kernel(name: &str) -> Option<(fn(&[f64]) -> f64, f64)> {
    match name {
        "gaussian" => Some((gaussian, 1.0)),
        "laplace" => Some((laplace, 1.0)),
        "zero" => Some((zero_kernel, 0.0)),
        _ => None,
    }
}

pub fn kernel_names() -> &'static [&'static str] {
    &["gaussian", "laplace", "zero"]
}

fn parse_matrix(v: &serde_json::Value) -> Result<Vec<Vec<f64>>, OperatorError> {
    serde_json::from_value(v.clone()).map_err(|e| OperatorError::InvalidSpec(format!("matrix data: {e}")))
}

/// Builds the coefficient matrix. Matrix and diagonal specs are taken as
/// already expressed in the basis; named callables are integrated against it.
pub fn ingest(
    spec: &KernelSpec,
    basis: Option<&OrthoBasis>,
    opts: &FkOptions,
) -> Result<KernelCoefficients, OperatorError> {
    let k = match spec.kind {
        KernelKind::Matrix => KernelCoefficients::from_matrix(parse_matrix(&spec.data)?)?,
        KernelKind::Diagonal => {
            let d: Vec<f64> = serde_json::from_value(spec.data.clone())
                .map_err(|e| OperatorError::InvalidSpec(format!("diagonal data: {e}")))?;
            if d.is_empty() {
                return Err(OperatorError::NotSquare);
            }
            KernelCoefficients::diagonal(&d)
        }
        KernelKind::CallableName => {
            let name =
                spec.data.as_str().ok_or_else(|| OperatorError::InvalidSpec("callable data must be a name".into()))?;
            let (f, sup) = named_kernel(name).ok_or_else(|| OperatorError::UnknownKernel(name.into()))?;
            let basis = basis.ok_or_else(|| OperatorError::InvalidSpec("callable kernels need a basis".into()))?;
            let input = KernelInput::Callable { f: &f, sup: Some(sup), symmetric: spec.symmetric.unwrap_or(true) };
            kernel_coefficients(&input, basis, opts)?.0
        }
    };
    if spec.symmetric == Some(true) && !k.symmetric {
        return KernelCoefficients::symmetric(k.a);
    }
    Ok(k)
}

/// `F_l(e_j)` table for oracles and reports, `[j][l-1]`.
pub fn basis_functionals(basis: &OrthoBasis) -> Vec<Vec<f64>> {
    (0..basis.dim()).map(|j| (1..=basis.k_max).map(|l| basis.f_value(j, l)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube_system::enumerate_cubes;
    use crate::ks2::{gram_schmidt_onb, Normalization};

    fn geo_basis(k: usize) -> OrthoBasis {
        gram_schmidt_onb(&enumerate_cubes(1, k, EnumerationMode::Geometric), Normalization::Corrected).unwrap()
    }

    #[test]
    fn e1_tensor_e1() {
        let b = geo_basis(4);
        let e1 = b.element(0);
        let terms = [(e1.clone(), e1)];
        let c = tensor_coeffs(&KernelInput::Tensor(&terms), &b, &FkOptions::default()).unwrap();
        for k in 0..4 {
            for j in 0..4 {
                let t = if k == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((c[k][j].mid() - t).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn chi_b1_rank_one() {
        let b = geo_basis(4);
        let chi = IndicatorCombination::single(1);
        let terms = [(chi.clone(), chi.clone())];
        let v = tensor_coeff(&KernelInput::Tensor(&terms), 0, 0, &b, &FkOptions::default()).unwrap();
        assert!((v.mid() - 0.125).abs() < 1e-15);
        // the callable path agrees; the integrand is constant on every cell
        let s = b.system().clone();
        let f = move |z: &[f64]| {
            let inside = |x: f64| s.cube(1).contains(&[x]);
            if inside(z[0]) && inside(z[1]) {
                1.0
            } else {
                0.0
            }
        };
        let c = tensor_coeff(
            &KernelInput::Callable { f: &f, sup: Some(1.0), symmetric: true },
            0,
            0,
            &b,
            &FkOptions::default(),
        )
        .unwrap();
        assert!((c.mid() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_all_zero() {
        let b = geo_basis(3);
        let (k, _) = kernel_coefficients(
            &KernelInput::Callable { f: &zero_kernel, sup: Some(0.0), symmetric: true },
            &b,
            &FkOptions::default(),
        )
        .unwrap();
        assert!(k.a.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn gaussian_ingestion_is_symmetric() {
        let b = geo_basis(4);
        let spec = KernelSpec { kind: KernelKind::CallableName, data: "gaussian".into(), symmetric: Some(true) };
        let k = ingest(&spec, Some(&b), &FkOptions::default()).unwrap();
        assert!(k.symmetric);
        assert!(k.a[0][0] > 0.0);
    }

    #[test]
    fn apply_identity_and_zero() {
        let f = KS2Element::from_coeffs(vec![1.0, -2.0, 0.5]);
        assert_eq!(apply_operator(&KernelCoefficients::identity(3), &f).unwrap().coeffs, f.coeffs);
        assert!(apply_operator(&KernelCoefficients::zero(3), &f).unwrap().coeffs.iter().all(|c| *c == 0.0));
        assert!(apply_operator(&KernelCoefficients::zero(2), &f).is_err());
    }

    #[test]
    fn norm_reports() {
        let r = operator_norm_bound(&KernelCoefficients::diagonal(&[2.0]), 5, 7);
        assert_eq!((r.max_ratio, r.frobenius), (2.0, 2.0));
        let r = operator_norm_bound(&KernelCoefficients::identity(4), 20, 7);
        assert!((r.max_ratio - 1.0).abs() < 1e-15 && (r.frobenius - 2.0).abs() < 1e-15);
        assert!(r.within_bound);
        assert_eq!(operator_norm_bound(&KernelCoefficients::zero(3), 5, 1).max_ratio, 0.0);
    }

    #[test]
    fn adjoint_residuals() {
        let a = KernelCoefficients::from_matrix(vec![vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(!a.symmetric);
        let f = KS2Element::from_coeffs(vec![1.0, 0.5]);
        let g = KS2Element::from_coeffs(vec![-0.25, 2.0]);
        let at = a.transpose();
        let diff: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| a.a[i][j] - at.a[i][j]).collect()).collect();
        let oracle = KernelCoefficients::from_matrix(diff).unwrap().matvec(&f.coeffs);
        let oracle = oracle.iter().zip(&g.coeffs).map(|(x, y)| x * y).sum::<f64>().abs();
        assert!((self_adjointness_residual(&a, &f, &g).unwrap() - oracle).abs() < 1e-15);
        let s = KernelCoefficients::symmetric(vec![vec![1.0, 3.0], vec![3.0, -2.0]]).unwrap();
        assert!(self_adjointness_residual(&s, &f, &g).unwrap() <= 1e-12);
        assert_eq!(self_adjointness_residual(&a, &f, &f).unwrap(), 0.0);
    }

    #[test]
    fn profiles() {
        let t = compactness_profile(&KernelCoefficients::identity(4));
        let want = [3f64.sqrt(), 2f64.sqrt(), 1.0, 0.0];
        for (a, b) in t.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut r1 = KernelCoefficients::zero(4);
        r1.a[0][0] = 5.0;
        assert_eq!(compactness_profile(&KernelCoefficients::from_matrix(r1.a).unwrap()), vec![0.0; 4]);
        assert_eq!(compactness_profile(&KernelCoefficients::zero(4)), vec![0.0; 4]);
    }

    #[test]
    fn spec_parsing() {
        let spec: KernelSpec =
            serde_json::from_str(r#"{"type":"matrix","data":[[1,2],[2,1]],"symmetric":true}"#).unwrap();
        assert!(ingest(&spec, None, &FkOptions::default()).unwrap().symmetric);
        let bad: KernelSpec =
            serde_json::from_str(r#"{"type":"matrix","data":[[1,2],[0,1]],"symmetric":true}"#).unwrap();
        assert!(matches!(ingest(&bad, None, &FkOptions::default()), Err(OperatorError::Asymmetric(1, 0))));
        let diag: KernelSpec = serde_json::from_str(r#"{"type":"diagonal","data":[2,1]}"#).unwrap();
        assert_eq!(ingest(&diag, None, &FkOptions::default()).unwrap().a, vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        let unknown = KernelSpec { kind: KernelKind::CallableName, data: "nope".into(), symmetric: None };
        assert!(matches!(ingest(&unknown, None, &FkOptions::default()), Err(OperatorError::UnknownKernel(_))));
    }
}
