//! Named integrands and serializable integration requests.
//!
//! | name                | integrand                                           |
//! |---------------------|-----------------------------------------------------|
//! | `paper.h`           | `2t cos(pi/t^2) + (2pi/t) sin(pi/t^2)`, `h(0) = 0`   |
//! | `paper.Dh`          | `h` plus the indicator of the rationals             |
//! | `paper.staircase_f` | `(-1)^(n+1) 2^n / n` on `(2^-n, 2^(1-n)]`           |
//! | `const.one`         | `1`                                                 |
//! | `sinc`              | `sin(x)/x`, `sinc(0) = 1`                           |
//!
//! `paper.Dh` differs from `h` on a Lebesgue-null set, which the HK integral
//! ignores. Every floating-point sample is rational, so sampling would instead
//! see the perturbation everywhere; the registry integrates the a.e.-equivalent
//! representative `h` and records the perturbation as metadata.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    hake_limit_integrate, hk_integrate_1d, ConstantGauge, HKResult, HakeOptions, HkError, IntegrationMode,
    IntervalIntegral, PartitionOptions, StaircaseSpec,
};

pub fn paper_h(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        let phase = PI / (t * t);
        2.0 * t * phase.cos() + (2.0 * PI / t) * phase.sin()
    }
}

/// Antiderivative `t^2 cos(pi/t^2)` of [`paper_h`].
pub fn paper_h_antiderivative(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t * (PI / (t * t)).cos()
    }
}

pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

#[derive(Clone, Debug)]
pub enum CorpusKind {
    Pointwise {
        f: fn(f64) -> f64,
        /// Endpoint where the integrand is not Lebesgue integrable.
        singular_at: Option<f64>,
    },
    Staircase(StaircaseSpec),
}

#[derive(Clone, Debug)]
pub struct CorpusFunction {
    pub name: &'static str,
    pub kind: CorpusKind,
    pub default_domain: (f64, f64),
    /// Description of a null-set perturbation not visible to sampling.
    pub null_set_note: Option<&'static str>,
}

impl CorpusFunction {
    /// Pointwise value of the integrated representative.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            CorpusKind::Pointwise { f, .. } => f(x),
            CorpusKind::Staircase(s) => s.eval(x),
        }
    }

    pub fn default_mode(&self) -> IntegrationMode {
        match &self.kind {
            CorpusKind::Staircase(_) => IntegrationMode::SeriesExact,
            CorpusKind::Pointwise { singular_at: Some(_), .. } => IntegrationMode::HakeLimit,
            CorpusKind::Pointwise { .. } => IntegrationMode::GaugeRiemann,
        }
    }

    pub fn integrate(&self, domain: (f64, f64), mode: IntegrationMode, tol: f64) -> Result<HKResult, HkError> {
        match (&self.kind, mode) {
            (CorpusKind::Staircase(s), IntegrationMode::SeriesExact) => s.integrate_over(domain.0, domain.1),
            (CorpusKind::Staircase(_), m) => Err(HkError::InvalidSpec(format!(
                "{} is only integrable in series-exact mode, not {}",
                self.name,
                m.as_str()
            ))),
            (CorpusKind::Pointwise { .. }, IntegrationMode::SeriesExact) => {
                Err(HkError::InvalidSpec(format!("{} has no series representation", self.name)))
            }
            (CorpusKind::Pointwise { f, .. }, IntegrationMode::HakeLimit) => {
                hake_limit_integrate(f, domain, tol, &HakeOptions::default())
            }
            (CorpusKind::Pointwise { f, singular_at }, IntegrationMode::GaugeRiemann) => {
                let len = domain.1 - domain.0;
                let opts =
                    PartitionOptions { singularities: singular_at.iter().copied().collect(), ..Default::default() };
                // the cell tagged at the singularity contributes nothing, and the
                // integral over [s, s + c] is at most c^2 for the corpus integrands
                let singular_radius = (0.25 * tol.sqrt()).min(0.1 * len);
                // cells of size ~ kappa * t^3 track the local wavelength of pi/t^2
                // oscillation; with |h''| ~ 8 pi^3 / t^7 the midpoint errors sum to
                // at most (pi^3 / 3) kappa^2 log(len / c)
                let log_span = (len / singular_radius).ln().max(1.0);
                let kappa = (3.0 * tol / (PI.powi(3) * log_span)).sqrt().clamp(1e-7, 1e-2);
                match *singular_at {
                    Some(s) => {
                        let gauge = move |t: f64| {
                            if t == s {
                                singular_radius
                            } else {
                                kappa * (t - s).abs().powi(3)
                            }
                        };
                        hk_integrate_1d(f, domain, &gauge, 1, &opts)
                    }
                    None => hk_integrate_1d(f, domain, &ConstantGauge(len * kappa), 1, &opts),
                }
            }
        }
    }
}

impl IntervalIntegral for CorpusFunction {
    fn integrate_over(&self, a: f64, b: f64) -> Result<HKResult, HkError> {
        self.integrate((a, b), self.default_mode(), 1e-9)
    }
}

pub fn names() -> &'static [&'static str] {
    &["paper.h", "paper.Dh", "paper.staircase_f", "const.one", "sinc"]
}

pub fn lookup(name: &str) -> Option<CorpusFunction> {
    let f = match name {
        "paper.h" => CorpusFunction {
            name: "paper.h",
            kind: CorpusKind::Pointwise { f: paper_h, singular_at: Some(0.0) },
            default_domain: (0.0, 1.0),
            null_set_note: None,
        },
        "paper.Dh" => CorpusFunction {
            name: "paper.Dh",
            kind: CorpusKind::Pointwise { f: paper_h, singular_at: Some(0.0) },
            default_domain: (0.0, 1.0),
            null_set_note: Some(
                "h + indicator of the rationals; the perturbation lives on a null set and is not sampled",
            ),
        },
        "paper.staircase_f" => CorpusFunction {
            name: "paper.staircase_f",
            kind: CorpusKind::Staircase(StaircaseSpec::alternating_harmonic(40)),
            default_domain: (0.0, 1.0),
            null_set_note: None,
        },
        "const.one" => CorpusFunction {
            name: "const.one",
            kind: CorpusKind::Pointwise { f: |_| 1.0, singular_at: None },
            default_domain: (0.0, 1.0),
            null_set_note: None,
        },
        "sinc" => CorpusFunction {
            name: "sinc",
            kind: CorpusKind::Pointwise { f: sinc, singular_at: None },
            default_domain: (-PI, PI),
            null_set_note: None,
        },
        _ => return None,
    };
    Some(f)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IntegrationRequest {
    pub function: String,
    pub domain: Option<(f64, f64)>,
    pub mode: Option<IntegrationMode>,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IntegrationRecord {
    pub function: String,
    pub domain: (f64, f64),
    pub mode: IntegrationMode,
    pub tol: f64,
    pub value: f64,
    pub error_bound: f64,
    pub evaluations: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RequestError {
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error(transparent)]
    Integration(#[from] HkError),
}

pub fn run_request(req: &IntegrationRequest) -> Result<IntegrationRecord, RequestError> {
    let f = lookup(&req.function).ok_or_else(|| RequestError::UnknownFunction(req.function.clone()))?;
    let domain = req.domain.unwrap_or(f.default_domain);
    let mode = req.mode.unwrap_or_else(|| f.default_mode());
    let r = f.integrate(domain, mode, req.tol)?;
    Ok(IntegrationRecord {
        function: req.function.clone(),
        domain,
        mode: r.mode,
        tol: req.tol,
        value: r.value,
        error_bound: r.error_bound,
        evaluations: r.evaluations,
        note: f.null_set_note.map(str::to_owned),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(name: &str, mode: Option<IntegrationMode>, tol: f64) -> IntegrationRequest {
        IntegrationRequest { function: name.into(), domain: None, mode, tol }
    }

    #[test]
    fn h_and_dh_agree_exactly() {
        let a = run_request(&req("paper.h", Some(IntegrationMode::HakeLimit), 1e-6)).unwrap();
        let b = run_request(&req("paper.Dh", Some(IntegrationMode::HakeLimit), 1e-6)).unwrap();
        assert_eq!(a.value, b.value);
        assert!((a.value + 1.0).abs() < 1e-6);
        assert!(b.note.is_some());
    }

    #[test]
    fn staircase_default_mode_is_series() {
        let r = run_request(&req("paper.staircase_f", None, 1e-9)).unwrap();
        assert_eq!(r.mode, IntegrationMode::SeriesExact);
        assert!((r.value - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn const_one() {
        let r = run_request(&req("const.one", None, 1e-9)).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(run_request(&req("nope", None, 1e-6)), Err(RequestError::UnknownFunction(_))));
    }

    #[test]
    fn staircase_rejects_other_modes() {
        assert!(run_request(&req("paper.staircase_f", Some(IntegrationMode::HakeLimit), 1e-6)).is_err());
    }

    #[test]
    fn record_json_shape() {
        let r = run_request(&req("const.one", None, 1e-9)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["function", "domain", "mode", "tol", "value", "error_bound", "evaluations"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["mode"], "gauge-riemann");
    }
}
