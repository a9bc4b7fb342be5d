//! The retransmission channel `(L, A, U)`.
//!
//! `N = inf{n : A_n ≥ L}` and `T = Σ_{i<N} (A_i + U_i) + L`. An attempt with
//! `A_n = L` succeeds.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::dist::TailFunction;
use crate::error::{Error, Result};
use crate::special::ln_one_minus_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    UnboundedLBoundedA,
    ZeroTailL,
    MissingMean,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::UnboundedLBoundedA => "UNBOUNDED_L_BOUNDED_A",
            DiagnosticCode::ZeroTailL => "ZERO_TAIL_L",
            DiagnosticCode::MissingMean => "MISSING_MEAN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code.as_str(), self.message)
    }
}

/// What the caller intends to compute, which decides the checks `validate` runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Requirements {
    /// Tail asymptotics of `N` or `T` need `P[L > x] > 0` for every `x`.
    pub tail_analysis: bool,
    /// Anything involving `T` needs finite `E[A]` and `E[U]`.
    pub delay: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelModel {
    #[serde(rename = "L")]
    l: TailFunction,
    #[serde(rename = "A")]
    a: TailFunction,
    #[serde(rename = "U")]
    u: TailFunction,
}

/// One realized transfer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionOutcome {
    pub n_attempts: u64,
    pub total_time: f64,
    /// The attempt cap was hit; `n_attempts` and `total_time` are lower bounds.
    pub truncated: bool,
}

fn bounded_a_check(l: &TailFunction, a: &TailFunction) -> Option<Diagnostic> {
    let a_hi = a.support_hi()?;
    let ok = matches!(l.support_hi(), Some(l_hi) if l_hi <= a_hi);
    (!ok).then(|| Diagnostic {
        code: DiagnosticCode::UnboundedLBoundedA,
        message: format!(
            "A = {a} never exceeds {a_hi}, but L = {l} does with positive probability, so N is infinite"
        ),
    })
}

impl ChannelModel {
    /// Rejects models in which `N = ∞` with positive probability.
    pub fn new(l: TailFunction, a: TailFunction, u: TailFunction) -> Result<Self> {
        if let Some(d) = bounded_a_check(&l, &a) {
            return Err(Error::Validation(vec![d]));
        }
        Ok(Self { l, a, u })
    }

    /// Builds a model from the three distribution strings; a missing `U`
    /// means no off periods.
    pub fn from_strs(l: &str, a: &str, u: Option<&str>, base: Option<&Path>) -> Result<Self> {
        let parse = |s: &str| match base {
            Some(b) => TailFunction::parse_with_base(s, b),
            None => TailFunction::parse(s),
        };
        let u = match u {
            Some(s) => parse(s)?,
            None => TailFunction::deterministic(0.0)?,
        };
        Self::new(parse(l)?, parse(a)?, u)
    }

    /// Reads a model file of `L=`, `A=`, `U=` lines; `#` starts a comment.
    pub fn from_kv_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let (mut l, mut a, mut u) = (None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(raw, format!("line {}: expected `key=value`", i + 1))
            })?;
            let slot = match k.trim() {
                "L" => &mut l,
                "A" => &mut a,
                "U" => &mut u,
                other => {
                    return Err(Error::parse(
                        raw,
                        format!("line {}: unknown key `{other}` (expected L, A or U)", i + 1),
                    ))
                }
            };
            *slot = Some(v.trim().to_string());
        }
        let l = l.ok_or_else(|| Error::parse(text, "missing `L=` line"))?;
        let a = a.ok_or_else(|| Error::parse(text, "missing `A=` line"))?;
        Self::from_strs(&l, &a, u.as_deref(), base)
    }

    pub fn l(&self) -> &TailFunction {
        &self.l
    }

    pub fn a(&self) -> &TailFunction {
        &self.a
    }

    pub fn u(&self) -> &TailFunction {
        &self.u
    }

    /// `Ḡ(l) = P[A ≥ l]`, the chance that one attempt carries a unit of size `l`.
    pub fn success_prob(&self, l: f64) -> f64 {
        self.log_success_prob(l).exp()
    }

    pub fn log_success_prob(&self, l: f64) -> f64 {
        self.a.log_sf_inclusive(l)
    }

    /// `ln(1 − Ḡ(l))`.
    pub fn log_failure_prob(&self, l: f64) -> f64 {
        ln_one_minus_exp(self.log_success_prob(l))
    }

    /// `E[A] + E[U]`, when both exist.
    pub fn mean_cycle(&self) -> Option<f64> {
        Some(self.a.mean().finite()? + self.u.mean().finite()?)
    }

    pub fn validate(&self, req: Requirements) -> Result<()> {
        let mut diags: Vec<Diagnostic> = bounded_a_check(&self.l, &self.a).into_iter().collect();
        if req.tail_analysis {
            if let Some(hi) = self.l.support_hi() {
                diags.push(Diagnostic {
                    code: DiagnosticCode::ZeroTailL,
                    message: format!("P[L > x] = 0 for x >= {hi}; the tail of N is geometric"),
                });
            }
        }
        if req.delay {
            for (name, tf) in [("A", &self.a), ("U", &self.u)] {
                if tf.mean().finite().is_none() {
                    diags.push(Diagnostic {
                        code: DiagnosticCode::MissingMean,
                        message: format!("E[{name}] is infinite for {name} = {tf}"),
                    });
                }
            }
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(diags))
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L={}\nA={}\nU={}", self.l, self.a, self.u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(s: &str) -> TailFunction {
        TailFunction::parse(s).unwrap()
    }

    fn codes(r: Result<()>) -> Vec<DiagnosticCode> {
        match r {
            Ok(()) => vec![],
            Err(Error::Validation(d)) => d.into_iter().map(|d| d.code).collect(),
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn success_probabilities() {
        let m = ChannelModel::new(tf("exp(rate=1)"), tf("exp(rate=1)"), tf("exp(rate=1)")).unwrap();
        assert_eq!(m.success_prob(0.0), 1.0);
        let m = ChannelModel::new(tf("exp(rate=1)"), tf("pareto(a=2)"), tf("exp(rate=1)")).unwrap();
        assert!((m.success_prob(10.0) - 0.01).abs() < 1e-16);
        let m =
            ChannelModel::new(tf("det(value=3)"), tf("det(value=5)"), tf("det(value=0)")).unwrap();
        assert_eq!(m.success_prob(3.0), 1.0);
        assert_eq!(m.success_prob(7.0), 0.0);
        assert_eq!(m.success_prob(5.0), 1.0);
    }

    #[test]
    fn bounded_a_with_unbounded_l_is_rejected() {
        let err = ChannelModel::new(tf("exp(rate=1)"), tf("det(value=5)"), tf("exp(rate=1)"))
            .unwrap_err();
        assert!(err.to_string().contains("UNBOUNDED_L_BOUNDED_A"));
        assert!(
            ChannelModel::new(tf("det(value=6)"), tf("det(value=5)"), tf("det(value=0)")).is_err()
        );
    }

    #[test]
    fn validation_codes() {
        let ok =
            ChannelModel::new(tf("exp(rate=1)"), tf("exp(rate=1)"), tf("exp(rate=1)")).unwrap();
        let all = Requirements {
            tail_analysis: true,
            delay: true,
        };
        assert!(codes(ok.validate(all)).is_empty());

        let heavy_u =
            ChannelModel::new(tf("exp(rate=1)"), tf("exp(rate=1)"), tf("pareto(a=0.5)")).unwrap();
        assert_eq!(
            codes(heavy_u.validate(all)),
            vec![DiagnosticCode::MissingMean]
        );
        assert!(codes(heavy_u.validate(Requirements::default())).is_empty());

        let det_l =
            ChannelModel::new(tf("det(value=1)"), tf("exp(rate=1)"), tf("det(value=0)")).unwrap();
        assert_eq!(codes(det_l.validate(all)), vec![DiagnosticCode::ZeroTailL]);
        assert!(codes(det_l.validate(Requirements::default())).is_empty());
    }

    #[test]
    fn model_file() {
        let m = ChannelModel::from_kv_str(
            "# demo\nL = exp(rate=2)\nA=exp(rate=1)\nU=exp(rate=1) # off\n",
            None,
        )
        .unwrap();
        assert_eq!(m.l(), &tf("exp(rate=2)"));
        assert_eq!(m.to_string(), "L=exp(rate=2)\nA=exp(rate=1)\nU=exp(rate=1)");
        let e = ChannelModel::from_kv_str("L=exp(rate=2)\nB=exp(rate=1)", None).unwrap_err();
        assert!(e.to_string().contains("line 2"));
        let e = ChannelModel::from_kv_str("L=exp(rate=2)", None).unwrap_err();
        assert!(e.to_string().contains("A="));
        let m = ChannelModel::from_kv_str("L=exp(rate=2)\nA=exp(rate=1)", None).unwrap();
        assert_eq!(m.u(), &tf("det(value=0)"));
    }
}
