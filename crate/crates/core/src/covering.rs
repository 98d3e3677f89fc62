//! Covering numbers of the embedding `H_K -> KS²` under the decay model
//! `lambda_n ~ 2^(-n(2d+1))`: the finite-rank upper bound, the determinant
//! lower bound, and small-dimensional empirical oracles.
//!
//! All logarithms are base 2.

use serde::Serialize;

use crate::mercer::{DecayModel, MercerError};

pub const MAX_ORACLE_DIM: usize = 6;
pub const MAX_ORACLE_COUNT: u64 = 10_000_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CoveringError {
    #[error("eps must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("invalid eps grid: {0}")]
    InvalidGrid(String),
    #[error("ellipsoid dimension {m} exceeds the oracle cap {MAX_ORACLE_DIM}")]
    DimensionCap { m: usize },
    #[error("lattice needs {0} points, above the oracle cap")]
    CountOverflow(u64),
    #[error("semi-axes must be positive and finite")]
    InvalidEllipsoid,
    #[error(transparent)]
    Model(#[from] MercerError),
}

fn check_eps(eps: f64) -> Result<(), CoveringError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(CoveringError::NonPositiveEps(eps))
    }
}

/// `(2d+1)/2`: half the per-index decay exponent.
fn half_rate(d: usize) -> f64 {
    (2 * d + 1) as f64 / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MSelection {
    pub m: u32,
    /// No `m >= 1` satisfies both inequalities; `m = 1` was returned.
    pub large_eps: bool,
}

/// Smallest-tie solution of `c 2^(-(m+1)(2d+1)/2) < eps/2 < c 2^(-m(2d+1)/2)`.
pub fn select_m(eps: f64, c: f64, d: usize) -> Result<MSelection, CoveringError> {
    check_eps(eps)?;
    // m r < T < (m + 1) r with T = log2(2c / eps); on a tie T = j r neither
    // inequality is strict and the smaller neighbour j - 1 is taken
    let t = (2.0 * c / eps).log2();
    let q = t / half_rate(d);
    let m = q.ceil() - 1.0;
    if m < 1.0 {
        Ok(MSelection { m: 1, large_eps: true })
    } else {
        Ok(MSelection { m: m as u32, large_eps: false })
    }
}

/// Norm bounds of the rank-`m` head and the tail of the embedding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiniteRankSplit {
    pub m: u32,
    pub rho_norm_bound: f64,
    pub tail_norm_bound: f64,
}

pub fn finite_rank_split(m: u32, c: f64, d: usize) -> FiniteRankSplit {
    let r = half_rate(d);
    FiniteRankSplit { m, rho_norm_bound: c * 2f64.powf(-r), tail_norm_bound: c * 2f64.powf(-(m as f64 + 1.0) * r) }
}

/// `m(eps) log2(1 + 4 c 2^(-(2d+1)/2) / eps)`.
pub fn upper_log_covering(eps: f64, c: f64, d: usize) -> Result<f64, CoveringError> {
    let sel = select_m(eps, c, d)?;
    let rho = finite_rank_split(sel.m, c, d).rho_norm_bound;
    Ok(sel.m as f64 * (1.0 + 4.0 * rho / eps).log2())
}

/// `phi_eps(m) = -m^2 (2d+1)/2 + m log2(1 / (sqrt(a) eps))`.
pub fn phi_eps(m: f64, eps: f64, a: f64, d: usize) -> f64 {
    -m * m * half_rate(d) + m * (1.0 / (a.sqrt() * eps)).log2()
}

/// `c0 = -log2(sqrt(a) eps) / (2d+1)`, the vertex of `phi_eps`.
pub fn critical_point(eps: f64, a: f64, d: usize) -> f64 {
    -(a.sqrt() * eps).log2() / (2 * d + 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerMode {
    Optimized,
    IntegerScan,
}

/// Determinant lower bound maximized over the rank, clamped at 0.
pub fn lower_log_covering(eps: f64, a: f64, d: usize, mode: LowerMode) -> Result<f64, CoveringError> {
    check_eps(eps)?;
    let c0 = critical_point(eps, a, d);
    let best = match mode {
        LowerMode::Optimized => {
            if c0 > 0.0 {
                phi_eps(c0, eps, a, d)
            } else {
                0.0
            }
        }
        LowerMode::IntegerScan => {
            [c0.floor(), c0.ceil()].into_iter().filter(|m| *m >= 1.0).map(|m| phi_eps(m, eps, a, d)).fold(0.0, f64::max)
        }
    };
    Ok(best.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ellipsoid {
    /// Nonincreasing.
    pub semi_axes: Vec<f64>,
}

impl Ellipsoid {
    pub fn new(mut semi_axes: Vec<f64>) -> Result<Self, CoveringError> {
        if semi_axes.is_empty() || semi_axes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(CoveringError::InvalidEllipsoid);
        }
        semi_axes.sort_by(|x, y| y.total_cmp(x));
        Ok(Self { semi_axes })
    }

    pub fn dim(&self) -> usize {
        self.semi_axes.len()
    }

    /// Euclidean distance from `z` to the solid ellipsoid.
    pub fn distance(&self, z: &[f64]) -> f64 {
        let a = &self.semi_axes;
        let q: f64 = z.iter().zip(a).map(|(zi, ai)| (zi / ai).powi(2)).sum();
        if q <= 1.0 {
            return 0.0;
        }
        // nearest boundary point y_i = a_i^2 z_i / (a_i^2 + t), with t > 0
        // fixed by sum (a_i z_i / (a_i^2 + t))^2 = 1
        let g = |t: f64| -> f64 { z.iter().zip(a).map(|(zi, ai)| (ai * zi / (ai * ai + t)).powi(2)).sum() };
        let mut lo = 0.0;
        let mut hi = z.iter().zip(a).map(|(zi, ai)| (ai * zi).powi(2)).sum::<f64>().sqrt();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = hi;
        z.iter()
            .zip(a)
            .map(|(zi, ai)| {
                let yi = ai * ai * zi / (ai * ai + t);
                (zi - yi).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// `max(1, prod(a_i) / eps^m)`.
pub fn volumetric_lower(e: &Ellipsoid, eps: f64) -> Result<f64, CoveringError> {
    check_eps(eps)?;
    let v: f64 = e.semi_axes.iter().map(|a| a / eps).product();
    Ok(v.max(1.0))
}

/// Centers of an `eps`-cover on the lattice `h Z^m`, `h = grid_factor eps / sqrt(m)`.
///
/// Every point of the ellipsoid lies within `h sqrt(m) / 2` of a lattice
/// point, so the lattice points at that distance from the ellipsoid give a
/// cover whenever `grid_factor <= 2`. An ellipsoid that fits inside a single
/// ball is covered by one.
pub fn greedy_cover_count(e: &Ellipsoid, eps: f64, grid_factor: f64) -> Result<u64, CoveringError> {
    check_eps(eps)?;
    let m = e.dim();
    if m > MAX_ORACLE_DIM {
        return Err(CoveringError::DimensionCap { m });
    }
    if !(grid_factor > 0.0 && grid_factor <= 2.0) {
        return Err(CoveringError::InvalidGrid(format!("grid factor {grid_factor} outside (0, 2]")));
    }
    if e.semi_axes[0] <= eps {
        return Ok(1);
    }
    let h = grid_factor * eps / (m as f64).sqrt();
    let reach = grid_factor * eps / 2.0;
    let extents: Vec<i64> = e.semi_axes.iter().map(|a| ((a + reach) / h).floor() as i64).collect();
    let total = extents.iter().try_fold(1u64, |acc, n| acc.checked_mul(2 * *n as u64 + 1));
    match total {
        Some(t) if t <= MAX_ORACLE_COUNT => {}
        Some(t) => return Err(CoveringError::CountOverflow(t)),
        None => return Err(CoveringError::CountOverflow(u64::MAX)),
    }
    let mut idx: Vec<i64> = extents.iter().map(|n| -n).collect();
    let mut z = vec![0.0; m];
    let mut count = 0u64;
    'outer: loop {
        for i in 0..m {
            z[i] = idx[i] as f64 * h;
        }
        if e.distance(&z) <= reach {
            count += 1;
        }
        for i in 0..m {
            if idx[i] < extents[i] {
                idx[i] += 1;
                continue 'outer;
            }
            idx[i] = -extents[i];
        }
        break;
    }
    Ok(count)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringRecord {
    pub eps: f64,
    pub m: u32,
    pub upper_log2: f64,
    pub lower_log2_opt: f64,
    pub lower_log2_int: f64,
    pub ratio_upper: f64,
    pub ratio_lower: f64,
    pub empirical_count: Option<u64>,
    pub volumetric_count: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringReport {
    pub model: DecayModel,
    pub records: Vec<CoveringRecord>,
    /// Grid points where `m = 1` was forced.
    pub large_eps: Vec<f64>,
    pub target_upper: f64,
    pub target_lower: f64,
    pub terminal_ratio_upper: f64,
    pub terminal_ratio_lower: f64,
    pub sandwich_holds: bool,
    /// Grid points below `2^-8` where `ratio_upper` increased.
    pub ratio_upper_increases: Vec<f64>,
}

/// Largest rank for which the empirical oracle runs inside a scan.
const SCAN_ORACLE_DIM: u32 = 3;

fn scan_record(model: &DecayModel, eps: f64) -> Result<(CoveringRecord, bool), CoveringError> {
    let sel = select_m(eps, model.c, model.d)?;
    let upper = upper_log_covering(eps, model.c, model.d)?;
    let lower_opt = lower_log_covering(eps, model.a, model.d, LowerMode::Optimized)?;
    let lower_int = lower_log_covering(eps, model.a, model.d, LowerMode::IntegerScan)?;
    let scale = (1.0 / eps).log2().powi(2);
    let (empirical, volumetric) = if sel.m <= SCAN_ORACLE_DIM {
        let axes: Vec<f64> = model.eigenvalues(sel.m as usize).iter().map(|l| l.sqrt()).collect();
        let e = Ellipsoid::new(axes)?;
        let vol = volumetric_lower(&e, eps)?;
        (greedy_cover_count(&e, eps, 1.0).ok(), Some(vol))
    } else {
        (None, None)
    };
    Ok((
        CoveringRecord {
            eps,
            m: sel.m,
            upper_log2: upper,
            lower_log2_opt: lower_opt,
            lower_log2_int: lower_int,
            ratio_upper: upper / scale,
            ratio_lower: lower_opt / scale,
            empirical_count: empirical,
            volumetric_count: volumetric,
        },
        sel.large_eps,
    ))
}

/// Bounds and ratios over a strictly decreasing grid in `(0, 1/4]`.
pub fn asymptotic_scan(model: &DecayModel, eps_grid: &[f64]) -> Result<CoveringReport, CoveringError> {
    let model = DecayModel::new(model.d, model.c, model.a)?;
    if eps_grid.is_empty() {
        return Err(CoveringError::InvalidGrid("empty grid".into()));
    }
    if eps_grid.iter().any(|e| !(*e > 0.0 && *e <= 0.25)) {
        return Err(CoveringError::InvalidGrid("grid points must lie in (0, 1/4]".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CoveringError::InvalidGrid("grid must be strictly decreasing".into()));
    }
    let mut records = Vec::with_capacity(eps_grid.len());
    let mut large_eps = Vec::new();
    for &eps in eps_grid {
        let (r, large) = scan_record(&model, eps)?;
        if large {
            large_eps.push(eps);
        }
        records.push(r);
    }
    let sandwich_holds = records.iter().all(|r| r.lower_log2_opt <= r.upper_log2 && r.lower_log2_int <= r.upper_log2);
    let threshold = 2f64.powi(-8);
    let ratio_upper_increases = records
        .windows(2)
        .filter(|w| w[0].eps <= threshold && w[1].ratio_upper > w[0].ratio_upper)
        .map(|w| w[1].eps)
        .collect();
    let last = records.last().expect("nonempty");
    let rate = (2 * model.d + 1) as f64;
    Ok(CoveringReport {
        model,
        terminal_ratio_upper: last.ratio_upper,
        terminal_ratio_lower: last.ratio_lower,
        records,
        large_eps,
        target_upper: 2.0 / rate,
        target_lower: 1.0 / (2.0 * rate),
        sandwich_holds,
        ratio_upper_increases,
    })
}

/// `2^-p` for `p = p_min..=p_max`.
pub fn dyadic_grid(p_min: i32, p_max: i32) -> Vec<f64> {
    (p_min..=p_max).map(|p| 2f64.powi(-p)).collect()
}
