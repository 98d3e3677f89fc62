//! Dyadic staircase functions and their series-exact integrals.
//!
//! A staircase takes the constant value `v_n` on the plateau
//! `(2^-n, 2^(1-n)]`, `n = 1, 2, ...`, and `0` at the origin. Its integral over
//! `[0, 1]` is the series `sum v_n 2^-n`, summed here with a tail bound chosen by
//! [`TailRule`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::partition::NeumaierSum;
use super::{HKResult, HkError, IntegrationMode, IntervalIntegral};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailRule {
    Alternating,
    Absolute,
}

#[derive(Clone)]
pub struct StaircaseSpec {
    plateau: Arc<dyn Fn(u32) -> f64 + Send + Sync>,
    /// Number of series terms summed explicitly.
    pub terms: u32,
    pub rule: TailRule,
}

impl fmt::Debug for StaircaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StaircaseSpec").field("terms", &self.terms).field("rule", &self.rule).finish_non_exhaustive()
    }
}

impl StaircaseSpec {
    pub fn new<F>(plateau: F, terms: u32, rule: TailRule) -> Self
    where
        F: Fn(u32) -> f64 + Send + Sync + 'static,
    {
        Self { plateau: Arc::new(plateau), terms, rule }
    }

    /// `v_n = (-1)^(n+1) 2^n / n`, whose integral over `[0,1]` is `ln 2`.
    pub fn alternating_harmonic(terms: u32) -> Self {
        Self::new(
            |n| {
                let s = if n % 2 == 1 { 1.0 } else { -1.0 };
                s * 2f64.powi(n as i32) / n as f64
            },
            terms,
            TailRule::Alternating,
        )
    }

    pub fn plateau_value(&self, n: u32) -> f64 {
        (self.plateau)(n)
    }

    /// Left breakpoint `2^-n` of plateau `n`.
    pub fn breakpoint(n: u32) -> f64 {
        2f64.powi(-(n as i32))
    }

    /// Contribution `v_n * 2^-n` of a full plateau.
    pub fn term(&self, n: u32) -> f64 {
        self.plateau_value(n) * Self::breakpoint(n)
    }

    /// Pointwise value; `x` outside `(0, 1]` maps to zero.
    pub fn eval(&self, x: f64) -> f64 {
        if !(x > 0.0 && x <= 1.0) {
            return 0.0;
        }
        // plateau n holds x in (2^-n, 2^(1-n)]
        let mut n = (-x.log2()).ceil().max(1.0) as u32;
        while n > 1 && x > Self::breakpoint(n - 1) {
            n -= 1;
        }
        while x <= Self::breakpoint(n) {
            n += 1;
        }
        self.plateau_value(n)
    }

    /// Series integral over `[0, 1]`.
    pub fn integrate(&self) -> Result<HKResult, HkError> {
        self.tail_from(1)
    }

    /// `sum_{n >= first} v_n 2^-n` with a tail bound from the declared rule.
    pub fn tail_from(&self, first: u32) -> Result<HKResult, HkError> {
        if self.terms == 0 {
            return Err(HkError::InvalidSpec("staircase needs at least one term".into()));
        }
        let n_terms = self.terms as usize;
        // one extra term feeds the omitted-term bound
        let terms: Vec<f64> = (0..=self.terms).map(|i| self.term(first + i)).collect();
        if let Some((i, _)) = terms.iter().enumerate().find(|(_, t)| !t.is_finite()) {
            return Err(HkError::NonFinite { point: Self::breakpoint(first + i as u32) });
        }
        let evaluations = terms.len() as u64;
        let (value, error_bound) = match self.rule {
            TailRule::Alternating => alternating_sum(&terms, first)?,
            TailRule::Absolute => absolute_sum(self, &terms[..n_terms], first)?,
        };
        Ok(HKResult { value, error_bound, mode: IntegrationMode::SeriesExact, evaluations })
    }

    fn integrate_interval(&self, lo: f64, hi: f64) -> Result<HKResult, HkError> {
        let lo = lo.max(0.0);
        let hi = hi.min(1.0);
        if hi <= lo {
            return Ok(HKResult::exact(0.0));
        }
        let mut acc = NeumaierSum::default();
        let mut evaluations = 0u64;
        let mut n = 1u32;
        loop {
            let left = Self::breakpoint(n);
            let right = 2.0 * left;
            if right <= lo {
                break;
            }
            // from here on every plateau lies inside [0, hi]: hand over to the series
            if lo == 0.0 && right <= hi {
                let tail = self.tail_from(n)?;
                acc.add(tail.value);
                return Ok(HKResult {
                    value: acc.total(),
                    error_bound: tail.error_bound,
                    mode: IntegrationMode::SeriesExact,
                    evaluations: evaluations + tail.evaluations,
                });
            }
            let overlap = (right.min(hi) - left.max(lo)).max(0.0);
            if overlap > 0.0 {
                acc.add(self.plateau_value(n) * overlap);
                evaluations += 1;
            }
            n += 1;
        }
        Ok(HKResult { value: acc.total(), error_bound: 0.0, mode: IntegrationMode::SeriesExact, evaluations })
    }
}

impl IntervalIntegral for StaircaseSpec {
    fn integrate_over(&self, a: f64, b: f64) -> Result<HKResult, HkError> {
        if a <= b {
            self.integrate_interval(a, b)
        } else {
            self.integrate_interval(b, a).map(|r| r.negated())
        }
    }
}

/// Leibniz enclosure plus Cohen-Rodriguez Villegas-Zagier acceleration.
///
/// The accelerated bound `2 a_0 / (3 + sqrt 8)^N` holds when the magnitudes form
/// a Hausdorff moment sequence; low-order difference checks screen for that and
/// the Leibniz half-width is used otherwise.
fn alternating_sum(terms: &[f64], first: u32) -> Result<(f64, f64), HkError> {
    let n = terms.len() - 1;
    for (i, w) in terms.windows(2).enumerate() {
        if w[0] == 0.0 || w[0].signum() == w[1].signum() {
            return Err(HkError::RuleInapplicable(format!("series is not alternating at term {}", first as usize + i)));
        }
        if w[1].abs() > w[0].abs() {
            return Err(HkError::RuleInapplicable(format!(
                "term magnitudes increase at term {}",
                first as usize + i + 1
            )));
        }
    }
    let sign = terms[0].signum();
    let mags: Vec<f64> = terms.iter().map(|t| t.abs()).collect();

    let mut partial = NeumaierSum::default();
    for t in &terms[..n] {
        partial.add(*t);
    }
    let s_n = partial.total();
    let omitted = mags[n];
    // the limit lies between S_N and S_{N+1}
    let leibniz_mid = s_n + 0.5 * terms[n];
    let leibniz_bound = 0.5 * omitted;

    if !looks_completely_monotone(&mags) {
        return Ok((leibniz_mid, leibniz_bound));
    }
    let accel = crvz(&mags[..n]);
    let rounding = 64.0 * n as f64 * f64::EPSILON * mags[0];
    let crvz_bound = 2.0 * mags[0] / (3.0 + 8f64.sqrt()).powi(n as i32) + rounding;
    if crvz_bound < leibniz_bound {
        Ok((sign * accel, crvz_bound))
    } else {
        Ok((leibniz_mid, leibniz_bound))
    }
}

fn looks_completely_monotone(mags: &[f64]) -> bool {
    // (-1)^j Delta^j a_k >= 0 for j <= 3
    let tol = 1e-12 * mags[0];
    let mut diff = mags.to_vec();
    for _ in 0..3 {
        if diff.len() < 2 {
            break;
        }
        diff = diff.windows(2).map(|w| w[0] - w[1]).collect();
        if diff.iter().any(|&d| d < -tol) {
            return false;
        }
    }
    true
}

/// Sums `sum_k (-1)^k a_k` from the first `a.len()` magnitudes.
pub(crate) fn crvz(a: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mut d = (3.0 + 8f64.sqrt()).powf(n);
    d = 0.5 * (d + 1.0 / d);
    let mut b = -1.0;
    let mut c = -d;
    let mut s = 0.0;
    for (k, ak) in a.iter().enumerate() {
        let kf = k as f64;
        c = b - c;
        s += c * ak;
        b *= (kf + n) * (kf - n) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

fn absolute_sum(spec: &StaircaseSpec, terms: &[f64], first: u32) -> Result<(f64, f64), HkError> {
    let n = terms.len() as u32;
    let ratio_at = |k: u32| {
        let a = spec.term(first + k).abs();
        let b = spec.term(first + k + 1).abs();
        if a == 0.0 {
            0.0
        } else {
            b / a
        }
    };
    // sup of consecutive ratios over [N, 16N], then a drift test toward 1
    let mut q: f64 = 0.0;
    for k in n..=16 * n {
        q = q.max(ratio_at(k));
    }
    let near = 1.0 - ratio_at(n);
    let far = 1.0 - ratio_at(16 * n);
    if !(q < 1.0) || (near > 0.0 && far < 0.5 * near) {
        return Err(HkError::NotAbsolutelySummable);
    }
    let mut acc = NeumaierSum::default();
    for t in terms {
        acc.add(*t);
    }
    let next = spec.term(first + n).abs();
    Ok((acc.total(), next / (1.0 - q)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_staircase_is_ln2() {
        let r = StaircaseSpec::alternating_harmonic(40).integrate().unwrap();
        assert!((r.value - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(r.error_bound <= 1.0 / 41.0);
        assert!(r.error_bound < 1e-11);
        assert_eq!(r.mode, IntegrationMode::SeriesExact);
    }

    #[test]
    fn constant_one_on_dyadic_plateaus() {
        let spec = StaircaseSpec::new(|_| 1.0, 60, TailRule::Absolute);
        let r = spec.integrate().unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.error_bound <= 2f64.powi(-58));
    }

    #[test]
    fn non_alternating_declared_alternating_fails() {
        let spec = StaircaseSpec::new(|n| 2f64.powi(n as i32) / n as f64, 30, TailRule::Alternating);
        assert!(matches!(spec.integrate(), Err(HkError::RuleInapplicable(_))));
    }

    #[test]
    fn harmonic_magnitudes_are_not_absolutely_summable() {
        let spec = StaircaseSpec::new(|n| 2f64.powi(n as i32) / n as f64, 30, TailRule::Absolute);
        assert!(matches!(spec.integrate(), Err(HkError::NotAbsolutelySummable)));
    }

    #[test]
    fn crvz_matches_known_sums() {
        // 1 - 1/3 + 1/5 - ... = pi/4
        let a: Vec<f64> = (0..30).map(|k| 1.0 / (2 * k + 1) as f64).collect();
        assert!((crvz(&a) - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn pointwise_plateaus() {
        let s = StaircaseSpec::alternating_harmonic(30);
        assert_eq!(s.eval(1.0), 2.0);
        assert_eq!(s.eval(0.75), 2.0);
        assert_eq!(s.eval(0.5), -2.0);
        assert_eq!(s.eval(0.3), -2.0);
        assert_eq!(s.eval(0.25), 8.0 / 3.0);
        assert_eq!(s.eval(0.0), 0.0);
    }

    #[test]
    fn interval_integrals_split_additively() {
        let s = StaircaseSpec::alternating_harmonic(40);
        let whole = s.integrate_over(0.0, 1.0).unwrap();
        let left = s.integrate_over(0.0, 0.3).unwrap();
        let right = s.integrate_over(0.3, 1.0).unwrap();
        assert!((whole.value - left.value - right.value).abs() < 1e-12);
        // (0.3, 1] meets plateau 1 fully and (0.3, 0.5] of plateau 2
        assert!((right.value - (1.0 - 2.0 * 0.2)).abs() < 1e-15);
        let beyond = s.integrate_over(-1.0, 4.0).unwrap();
        assert!((beyond.value - whole.value).abs() < 1e-15);
    }
}
