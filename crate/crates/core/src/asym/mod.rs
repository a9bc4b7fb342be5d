//! Regime classification of `Φ` and the asymptotic predictors for `N` and `T`.
//!
//! Predictions come with a [`PredictionKind`] saying on which scale they
//! converge. An `EXACT_ASYMPTOTIC` prediction of `ln P` may be compared as a
//! probability ratio; a `LOG_ASYMPTOTIC` one only as a ratio of logs; a
//! `DOUBLE_LOG_ASYMPTOTIC` one only through `ln(−ln P)`.

mod phi;

use std::fmt;

use serde::Serialize;

pub use phi::{phi_from_pair, tabulated_from_csv, PhiFromPair, PhiSpec};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tag")]
pub enum Regime {
    /// `Φ` regularly varying with index `α ≥ 0`.
    RegularlyVarying { alpha: f64 },
    /// `ln Φ` slowly varying and growing slower than `e^{√ln x}`.
    SlowlyVaryingLogPhiSub,
    /// `ln Φ = λ (ln x)^δ`, `δ > 1`.
    LogNormal { lambda: f64, delta: f64 },
    /// `ln Φ = e^{λ (ln x)^δ}`, `1/2 < δ < 1`.
    BetweenHalfOne { lambda: f64, delta: f64 },
    /// `ln Φ = x^β l(x)`.
    Weibull { beta: f64 },
    /// `ln ln Φ = x^γ`.
    NearlyExponential { gamma: f64 },
    /// `ln ln Φ = (ln x)^δ`, `δ > 1`: between the Weibull and nearly
    /// exponential regimes.
    NearlyExponentialBoundary { delta: f64 },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::RegularlyVarying { .. } => "RegularlyVarying",
            Regime::SlowlyVaryingLogPhiSub => "SlowlyVaryingLogPhi_Sub",
            Regime::LogNormal { .. } => "LogNormalRegime",
            Regime::BetweenHalfOne { .. } => "BetweenHalfOne",
            Regime::Weibull { .. } => "WeibullRegime",
            Regime::NearlyExponential { .. } => "NearlyExponential",
            Regime::NearlyExponentialBoundary { .. } => "NearlyExponentialBoundary",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::RegularlyVarying { alpha } => write!(f, "RegularlyVarying α={alpha}"),
            Regime::SlowlyVaryingLogPhiSub => write!(f, "SlowlyVaryingLogPhi_Sub"),
            Regime::LogNormal { lambda, delta } => {
                write!(f, "LogNormalRegime λ={lambda} δ={delta}")
            }
            Regime::BetweenHalfOne { lambda, delta } => {
                write!(f, "BetweenHalfOne λ={lambda} δ={delta}")
            }
            Regime::Weibull { beta } => write!(f, "WeibullRegime β={beta}"),
            Regime::NearlyExponential { gamma } => write!(f, "NearlyExponential γ={gamma}"),
            Regime::NearlyExponentialBoundary { delta } => {
                write!(f, "NearlyExponentialBoundary δ={delta}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeClass {
    pub regime: Regime,
    /// The result that governs the `N` prediction in this regime.
    pub governing: &'static str,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PredictionKind {
    ExactAsymptotic,
    LogAsymptotic,
    LogAsymptoticWithCorrection,
    DoubleLogAsymptotic,
}

impl PredictionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionKind::ExactAsymptotic => "EXACT_ASYMPTOTIC",
            PredictionKind::LogAsymptotic => "LOG_ASYMPTOTIC",
            PredictionKind::LogAsymptoticWithCorrection => "LOG_ASYMPTOTIC_WITH_CORRECTION",
            PredictionKind::DoubleLogAsymptotic => "DOUBLE_LOG_ASYMPTOTIC",
        }
    }

    /// The finest scale on which the prediction may be compared.
    pub fn scale(self) -> Scale {
        match self {
            PredictionKind::ExactAsymptotic => Scale::Probability,
            PredictionKind::LogAsymptotic | PredictionKind::LogAsymptoticWithCorrection => {
                Scale::Log
            }
            PredictionKind::DoubleLogAsymptotic => Scale::DoubleLog,
        }
    }
}

impl fmt::Display for PredictionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered from finest to coarsest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// `P / P̂`.
    Probability,
    /// `ln P / ln P̂`.
    Log,
    /// `ln(−ln P) / ln(−ln P̂)`.
    DoubleLog,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Probability => "prob_ratio",
            Scale::Log => "log_ratio",
            Scale::DoubleLog => "loglog_ratio",
        }
    }
}

/// A predicted `ln P`. For double-log predictions `log_p` can overflow to
/// `−∞`; `log_neg_log_p = ln(−ln P)` is always finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub log_p: f64,
    pub log_neg_log_p: f64,
    pub kind: PredictionKind,
}

impl Prediction {
    fn from_log_p(log_p: f64, kind: PredictionKind) -> Self {
        Self {
            log_p,
            log_neg_log_p: (-log_p).ln(),
            kind,
        }
    }

    fn from_double_log(log_neg_log_p: f64, kind: PredictionKind) -> Self {
        Self {
            log_p: -log_neg_log_p.exp(),
            log_neg_log_p,
            kind,
        }
    }

    /// Agreement of an observed `ln P` with this prediction on the scale
    /// allowed by its kind; 1 means perfect agreement.
    pub fn agreement(&self, observed_log_p: f64) -> f64 {
        self.agreement_unchecked(self.kind.scale(), observed_log_p)
    }

    /// Agreement on a requested scale, which may be coarser than the
    /// prediction's own but never finer.
    pub fn agreement_on(&self, scale: Scale, observed_log_p: f64) -> Result<f64> {
        if scale < self.kind.scale() {
            return Err(Error::ScaleMismatch(format!(
                "a {} prediction cannot be compared as {}; use {} or coarser",
                self.kind,
                scale.as_str(),
                self.kind.scale().as_str()
            )));
        }
        Ok(self.agreement_unchecked(scale, observed_log_p))
    }

    fn agreement_unchecked(&self, scale: Scale, observed_log_p: f64) -> f64 {
        match scale {
            Scale::Probability => (observed_log_p - self.log_p).exp(),
            Scale::Log => observed_log_p / self.log_p,
            Scale::DoubleLog => (-observed_log_p).ln() / self.log_neg_log_p,
        }
    }
}

const PROBE_K: std::ops::RangeInclusive<i32> = 4..=60;

/// Checks that `ln Φ` is non-decreasing on `x = 2^k` over the upper half of
/// `k = 4..60`; returns the first offending `k`.
pub fn monotonicity_probe(phi: &PhiSpec) -> std::result::Result<(), i32> {
    let vals: Vec<(i32, f64)> = PROBE_K
        .map(|k| (k, phi.ln_phi_at_log(k as f64 * std::f64::consts::LN_2)))
        .collect();
    let half = vals.len() / 2;
    for w in vals[half..].windows(2) {
        let (prev, next) = (w[0].1, w[1].1);
        if next.is_nan() || next < prev - 1e-12 * prev.abs().max(1.0) {
            return Err(w[1].0);
        }
    }
    Ok(())
}

static SLOWLY_VARYING: PhiSpec = PhiSpec::Power { alpha: 0.0 };

fn principal_factor(phi: &PhiSpec) -> Result<&PhiSpec> {
    match phi {
        PhiSpec::Product(fs) => {
            let mut main = fs
                .iter()
                .filter(|f| !matches!(f, PhiSpec::Const { .. } | PhiSpec::LogFactor { .. }));
            let log_exponent: f64 = fs
                .iter()
                .map(|f| match f {
                    PhiSpec::LogFactor { b } => *b,
                    _ => 0.0,
                })
                .sum();
            let flat = |f: Option<&PhiSpec>| {
                f.is_none_or(|f| matches!(f, PhiSpec::Power { alpha } if *alpha == 0.0))
            };
            match (main.next(), main.next()) {
                (f, None) if flat(f) => {
                    if log_exponent > 0.0 {
                        Ok(&SLOWLY_VARYING)
                    } else {
                        Err(Error::Unclassified(format!("`{phi}` does not grow")))
                    }
                }
                (Some(f), None) => principal_factor(f),
                _ => Err(Error::Unclassified(format!(
                    "`{phi}` combines several principal factors; only constants and (ln x)^b may accompany one"
                ))),
            }
        }
        other => Ok(other),
    }
}

const GOV_RV: &str = "regularly varying link: P[N>n] ~ Γ(α+1)/Φ(n)";
const GOV_RV0: &str = "slowly varying link: P[N>n] ~ 1/Φ(n)";
const GOV_SLOW: &str = "slowly varying log-link: ln P[N>n] ~ −ln Φ(n)";
const GOV_LOGNORMAL: &str = "lognormal-type link: second-order log correction";
const GOV_HALF_ONE: &str = "log-link between e^{√ln n} and e^{ln n}: double-log correction";
const GOV_WEIBULL: &str =
    "Weibull-type link: ln P[N>n] ~ −(β^{1/(β+1)}+β^{−β/(β+1)}) (ln Φ(n))^{1/(β+1)}";
const GOV_NEARLY: &str = "doubly exponential link: ln P[N>n] ~ −n / R⁻¹(ln n)";
const GOV_NEARLY_B: &str = "boundary between Weibull and nearly exponential: double-log expansion";

/// Structural classification of `Φ`.
pub fn classify(phi: &PhiSpec) -> Result<RegimeClass> {
    // analytic factors are eventually monotone by construction
    if phi.has_tabulated() {
        if let Err(k) = monotonicity_probe(phi) {
            return Err(Error::Unclassified(format!(
                "ln Φ decreases at x = 2^{k}; Φ must be eventually non-decreasing"
            )));
        }
    }
    let main = principal_factor(phi)?;
    let mut notes = Vec::new();
    let (regime, governing) = match *main {
        PhiSpec::Power { alpha } if alpha > 0.0 => (Regime::RegularlyVarying { alpha }, GOV_RV),
        PhiSpec::Power { .. } => (Regime::RegularlyVarying { alpha: 0.0 }, GOV_RV0),
        PhiSpec::LogPower { lambda, delta } => {
            if delta > 1.0 {
                (Regime::LogNormal { lambda, delta }, GOV_LOGNORMAL)
            } else if delta == 1.0 {
                notes.push("λ (ln x)^1 is the power x^λ".into());
                (Regime::RegularlyVarying { alpha: lambda }, GOV_RV)
            } else {
                notes.push("λ (ln x)^δ with δ < 1 grows slower than e^{√ln x}".into());
                (Regime::SlowlyVaryingLogPhiSub, GOV_SLOW)
            }
        }
        PhiSpec::ExpLogPower { lambda, delta } => {
            if delta == 0.5 || delta == 1.0 {
                return Err(Error::OnCriticalBoundary(format!(
                    "explogpower with δ = {delta} sits on a critical boundary where no asymptotics are available"
                )));
            } else if delta < 0.5 {
                (Regime::SlowlyVaryingLogPhiSub, GOV_SLOW)
            } else if delta < 1.0 {
                (Regime::BetweenHalfOne { lambda, delta }, GOV_HALF_ONE)
            } else if lambda == 1.0 {
                (Regime::NearlyExponentialBoundary { delta }, GOV_NEARLY_B)
            } else {
                return Err(Error::Unclassified(format!(
                    "explogpower with δ > 1 is only covered for λ = 1, got λ = {lambda}"
                )));
            }
        }
        PhiSpec::ExpRv { beta, .. } => (Regime::Weibull { beta }, GOV_WEIBULL),
        PhiSpec::ExpExpRv { gamma } => (Regime::NearlyExponential { gamma }, GOV_NEARLY),
        PhiSpec::Tabulated { .. } => {
            return Err(Error::Unclassified(
                "tabulated Φ has no structural form; use the numeric probes".into(),
            ))
        }
        PhiSpec::Const { .. } | PhiSpec::LogFactor { .. } | PhiSpec::Product(_) => {
            return Err(Error::Unclassified(format!(
                "`{phi}` has no principal factor"
            )))
        }
    };
    if matches!(phi, PhiSpec::Product(_)) && !matches!(regime, Regime::RegularlyVarying { .. }) {
        notes.push("constant and log-power factors treated as slowly varying corrections".into());
    }
    Ok(RegimeClass {
        regime,
        governing,
        notes,
    })
}

fn weibull_constant(beta: f64) -> f64 {
    beta.powf(1.0 / (beta + 1.0)) + beta.powf(-beta / (beta + 1.0))
}

/// Predicted `ln P[N > n]`, `n ≥ 2`.
pub fn predict_log_ccdf_n(class: &RegimeClass, phi: &PhiSpec, n: f64) -> Result<Prediction> {
    if !(n >= 2.0) {
        return Err(Error::Domain(format!("predictions need n >= 2, got {n}")));
    }
    let u = n.ln();
    let ln_phi = || phi.ln_phi_at_log(u);
    use PredictionKind::*;
    Ok(match class.regime {
        Regime::RegularlyVarying { alpha } if alpha > 0.0 => {
            Prediction::from_log_p(ln_gamma(alpha + 1.0) - ln_phi(), ExactAsymptotic)
        }
        Regime::RegularlyVarying { .. } => Prediction::from_log_p(-ln_phi(), ExactAsymptotic),
        Regime::SlowlyVaryingLogPhiSub => Prediction::from_log_p(-ln_phi(), LogAsymptotic),
        Regime::LogNormal { lambda, delta } => Prediction::from_log_p(
            -ln_phi() + lambda * delta * (delta - 1.0) * u.ln() * u.powf(delta - 1.0),
            LogAsymptoticWithCorrection,
        ),
        Regime::BetweenHalfOne { lambda, delta } => Prediction::from_double_log(
            ln_phi().ln() - delta * lambda * lambda * u.powf(2.0 * delta - 1.0),
            DoubleLogAsymptotic,
        ),
        Regime::Weibull { beta } => Prediction::from_log_p(
            -weibull_constant(beta) * ln_phi().powf(1.0 / (beta + 1.0)),
            LogAsymptotic,
        ),
        Regime::NearlyExponential { gamma } => {
            Prediction::from_double_log(u - u.ln() / gamma, LogAsymptotic)
        }
        Regime::NearlyExponentialBoundary { delta } => Prediction::from_double_log(
            u - u.powf(1.0 / delta) + u.powf(2.0 / delta - 1.0) / delta,
            DoubleLogAsymptotic,
        ),
    })
}

/// Predicted `ln P[T > t]` given `E[A + U] = mean_au`.
pub fn predict_log_ccdf_t(
    class: &RegimeClass,
    phi: &PhiSpec,
    t: f64,
    mean_au: f64,
) -> Result<Prediction> {
    if !(mean_au > 0.0 && mean_au.is_finite()) {
        return Err(Error::Domain(format!(
            "E[A+U] must be positive and finite, got {mean_au}"
        )));
    }
    if !(t >= 2.0) {
        return Err(Error::Domain(format!("predictions need t >= 2, got {t}")));
    }
    let ln_phi = phi.ln_phi_at_log(t.ln());
    match class.regime {
        Regime::RegularlyVarying { alpha } if alpha > 0.0 => Ok(Prediction::from_log_p(
            ln_gamma(alpha + 1.0) + alpha * mean_au.ln() - ln_phi,
            PredictionKind::ExactAsymptotic,
        )),
        Regime::SlowlyVaryingLogPhiSub => Ok(Prediction::from_log_p(
            -ln_phi,
            PredictionKind::LogAsymptotic,
        )),
        Regime::Weibull { beta } => Ok(Prediction::from_log_p(
            -weibull_constant(beta) * ln_phi.powf(1.0 / (beta + 1.0))
                / mean_au.powf(beta / (beta + 1.0)),
            PredictionKind::LogAsymptotic,
        )),
        other => Err(Error::UnsupportedRegime(format!(
            "no delay asymptotics are available for {other}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BalanceVerdict {
    TheoremApplies,
    /// `P[T > t] ≳ e^{−2 t^{exponent}}` may be heavier than the Weibull-regime
    /// delay prediction.
    BalanceViolated {
        exponent: f64,
    },
}

/// For `P[L > x] = e^{−x^ξ}`, `P[A > x] = e^{−x^ζ}` and a Weibull-regime `Φ`
/// of index `β`: the delay prediction needs `(1 − ζ) β < ξ` and `ξ > β/(β+1)`.
pub fn weibull_balance_check(xi: f64, zeta: f64, beta: f64) -> Result<BalanceVerdict> {
    if !(xi > 0.0 && zeta >= 0.0 && beta > 0.0) {
        return Err(Error::Domain(format!(
            "need ξ > 0, ζ ≥ 0, β > 0; got ξ={xi}, ζ={zeta}, β={beta}"
        )));
    }
    if (1.0 - zeta) * beta < xi && xi > beta / (beta + 1.0) {
        Ok(BalanceVerdict::TheoremApplies)
    } else {
        Ok(BalanceVerdict::BalanceViolated {
            exponent: xi / (xi + 1.0 - zeta),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Dominance {
    DominantlyVarying,
    NotDominant,
    Inconclusive,
}

impl Dominance {
    pub fn as_str(self) -> &'static str {
        match self {
            Dominance::DominantlyVarying => "DOMINANTLY_VARYING",
            Dominance::NotDominant => "NOT_DOMINANT",
            Dominance::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub verdict: Dominance,
    /// Range of `ln Φ(e x) − ln Φ(x)` over the upper half of the probe grid.
    pub min_log_ratio: f64,
    pub max_log_ratio: f64,
}

/// Evaluates `d(x) = ln Φ(e x) − ln Φ(x)` on `x = 2^k`, `k = 4..60`, and judges
/// the upper half: a flat sequence is bounded, a steadily rising one diverges.
pub fn dominance_probe(phi: &PhiSpec) -> DominanceReport {
    let d: Vec<f64> = PROBE_K
        .map(|k| {
            let u = k as f64 * std::f64::consts::LN_2;
            phi.ln_phi_at_log(u + 1.0) - phi.ln_phi_at_log(u)
        })
        .collect();
    let tail = &d[d.len() / 2..];
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let rising = tail.windows(2).all(|w| w[1] >= w[0] || w[1].is_nan());
    let verdict = if tail.iter().any(|v| v.is_nan()) {
        if rising {
            Dominance::NotDominant
        } else {
            Dominance::Inconclusive
        }
    } else if hi.is_finite() && hi - lo <= 0.05 * (1.0 + mean.abs()) {
        Dominance::DominantlyVarying
    } else if rising && (hi == f64::INFINITY || tail[tail.len() - 1] - tail[0] >= 1.0) {
        Dominance::NotDominant
    } else {
        Dominance::Inconclusive
    };
    DominanceReport {
        verdict,
        min_log_ratio: lo,
        max_log_ratio: hi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> PhiSpec {
        PhiSpec::parse(s).unwrap()
    }

    #[test]
    fn structural_classes() {
        assert_eq!(
            classify(&p("power(2)")).unwrap().regime,
            Regime::RegularlyVarying { alpha: 2.0 }
        );
        assert_eq!(
            classify(&p("logpower(lambda=1,delta=2)")).unwrap().regime,
            Regime::LogNormal {
                lambda: 1.0,
                delta: 2.0
            }
        );
        assert_eq!(
            classify(&p("explogpower(lambda=1,delta=0.7)"))
                .unwrap()
                .regime,
            Regime::BetweenHalfOne {
                lambda: 1.0,
                delta: 0.7
            }
        );
        assert_eq!(
            classify(&p("explogpower(lambda=1,delta=0.3)"))
                .unwrap()
                .regime,
            Regime::SlowlyVaryingLogPhiSub
        );
        assert_eq!(
            classify(&p("exprv(beta=1)")).unwrap().regime,
            Regime::Weibull { beta: 1.0 }
        );
        assert_eq!(
            classify(&p("expexprv(gamma=1)")).unwrap().regime,
            Regime::NearlyExponential { gamma: 1.0 }
        );
        assert_eq!(
            classify(&p("explogpower(lambda=1,delta=1.5)"))
                .unwrap()
                .regime,
            Regime::NearlyExponentialBoundary { delta: 1.5 }
        );
        assert_eq!(
            classify(&p("const(c=3)*logfactor(b=-2)*power(alpha=1.5)"))
                .unwrap()
                .regime,
            Regime::RegularlyVarying { alpha: 1.5 }
        );
    }

    #[test]
    fn critical_boundaries_and_unclassified() {
        for s in [
            "explogpower(lambda=1,delta=0.5)",
            "explogpower(lambda=2,delta=1)",
        ] {
            assert!(
                matches!(classify(&p(s)), Err(Error::OnCriticalBoundary(_))),
                "{s}"
            );
        }
        assert!(matches!(
            classify(&p("power(2)*exprv(beta=1)")),
            Err(Error::Unclassified(_))
        ));
        assert!(matches!(
            classify(&p("const(c=2)")),
            Err(Error::Unclassified(_))
        ));
        assert!(matches!(
            classify(&p("logfactor(b=-1)*power(alpha=0)")),
            Err(Error::Unclassified(_))
        ));
    }

    #[test]
    fn prediction_examples() {
        let rv = classify(&p("power(2)")).unwrap();
        let pr = predict_log_ccdf_n(&rv, &p("power(2)"), 1e6).unwrap();
        assert!((pr.log_p - (2f64.ln() - 2.0 * 1e6f64.ln())).abs() < 1e-12);
        assert_eq!(pr.kind, PredictionKind::ExactAsymptotic);

        let w = classify(&p("exprv(beta=1)")).unwrap();
        let pr = predict_log_ccdf_n(&w, &p("exprv(beta=1)"), 1e4).unwrap();
        assert!((pr.log_p + 200.0).abs() < 1e-9);
        assert_eq!(pr.kind, PredictionKind::LogAsymptotic);

        let ne = classify(&p("expexprv(gamma=1)")).unwrap();
        let n = 10f64.exp();
        let pr = predict_log_ccdf_n(&ne, &p("expexprv(gamma=1)"), n).unwrap();
        assert!((pr.log_p + n / 10.0).abs() < 1e-9);
    }

    #[test]
    fn delay_prediction_examples() {
        let phi = p("power(1.5)");
        let rv = classify(&phi).unwrap();
        let pr = predict_log_ccdf_t(&rv, &phi, 1e4, 2.0).unwrap();
        let want = ln_gamma(2.5) + 1.5 * 2f64.ln() - 1.5 * 1e4f64.ln();
        assert!((pr.log_p - want).abs() < 1e-12);

        let phi = p("exprv(beta=1)");
        let w = classify(&phi).unwrap();
        let t = predict_log_ccdf_t(&w, &phi, 1e4, 1.0).unwrap();
        let n = predict_log_ccdf_n(&w, &phi, 1e4).unwrap();
        assert!((t.log_p - n.log_p).abs() < 1e-9);
        assert!((t.log_p + 200.0).abs() < 1e-9);

        let phi = p("expexprv(gamma=1)");
        let ne = classify(&phi).unwrap();
        assert!(matches!(
            predict_log_ccdf_t(&ne, &phi, 1e4, 1.0),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn balance_examples() {
        assert_eq!(
            weibull_balance_check(1.0, 0.5, 1.0).unwrap(),
            BalanceVerdict::TheoremApplies
        );
        assert_eq!(
            weibull_balance_check(0.5, 0.5, 2.0).unwrap(),
            BalanceVerdict::BalanceViolated { exponent: 0.5 }
        );
        assert!(matches!(
            weibull_balance_check(0.4, 1.0, 3.0).unwrap(),
            BalanceVerdict::BalanceViolated { .. }
        ));
        assert!(weibull_balance_check(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dominance_examples() {
        let r = dominance_probe(&p("power(2)"));
        assert_eq!(r.verdict, Dominance::DominantlyVarying);
        assert!((r.min_log_ratio - 2.0).abs() < 1e-12 && (r.max_log_ratio - 2.0).abs() < 1e-12);
        assert_eq!(
            dominance_probe(&p("logpower(lambda=1,delta=2)")).verdict,
            Dominance::NotDominant
        );
        assert_eq!(
            dominance_probe(&p("exprv(beta=1)")).verdict,
            Dominance::NotDominant
        );

        // a noisy tabulated Φ: slope 2 with a deterministic wiggle
        let pts: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let u = i as f64 * 0.125;
                (u, 2.0 * u + if i % 3 == 0 { 1.5 } else { -0.7 })
            })
            .collect();
        let noisy = PhiSpec::tabulated("noisy", pts).unwrap();
        assert_eq!(dominance_probe(&noisy).verdict, Dominance::Inconclusive);
    }

    #[test]
    fn monotonicity_probe_flags_decreasing_phi() {
        let pts = vec![(0.0, 0.0), (10.0, 5.0), (20.0, 4.0)];
        let t = PhiSpec::tabulated("down", pts).unwrap();
        assert!(monotonicity_probe(&t).is_err());
        assert!(matches!(classify(&t), Err(Error::Unclassified(_))));
    }

    #[test]
    fn agreement_respects_scale() {
        let pr = Prediction::from_log_p(-10.0, PredictionKind::ExactAsymptotic);
        assert!((pr.agreement(-10.0 + 0.5f64.ln()) - 0.5).abs() < 1e-15);
        let pr = Prediction::from_log_p(-10.0, PredictionKind::LogAsymptotic);
        assert!((pr.agreement(-12.0) - 1.2).abs() < 1e-15);
        let pr = Prediction::from_double_log(3.0, PredictionKind::DoubleLogAsymptotic);
        assert!((pr.agreement(-(6f64.exp())) - 2.0).abs() < 1e-14);
        let pr = Prediction::from_log_p(-10.0, PredictionKind::LogAsymptotic);
        assert!(matches!(
            pr.agreement_on(Scale::Probability, -10.0),
            Err(Error::ScaleMismatch(_))
        ));
        assert!((pr.agreement_on(Scale::DoubleLog, -10.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn slowly_varying_log_phi_is_subexponential_in_every_power() {
        // ln(−ln P) / ln n must tend to zero
        for s in [
            "explogpower(lambda=1,delta=0.3)",
            "logpower(lambda=2,delta=0.8)",
        ] {
            let phi = p(s);
            let class = classify(&phi).unwrap();
            let ratio = |k: i32| {
                let n = 2f64.powi(k);
                (-predict_log_ccdf_n(&class, &phi, n).unwrap().log_p).ln() / n.ln()
            };
            let tail: Vec<f64> = (100..=1000).step_by(50).map(ratio).collect();
            assert!(tail.windows(2).all(|w| w[1] < w[0]), "{s}: {tail:?}");
            assert!(ratio(1000) < 0.02, "{s}: {}", ratio(1000));
        }
    }

    proptest! {
        #[test]
        fn exponential_case_identity(
            a in 0.1f64..10.0, b in -3.0f64..3.0, beta in 0.2f64..5.0, delta in 0.2f64..5.0,
            k in 3.0f64..30.0,
        ) {
            // Ḡ ~ e^{−βx}, F̄ ~ a x^b e^{−δx}
            let alpha = delta / beta;
            let phi = PhiSpec::Product(vec![
                PhiSpec::Const { c: beta.powf(b) / a },
                PhiSpec::LogFactor { b: -b },
                PhiSpec::Power { alpha },
            ]);
            let class = classify(&phi).unwrap();
            let n = 10f64.powf(k);
            let pred = predict_log_ccdf_n(&class, &phi, n).unwrap().log_p;
            let stated = a.ln() + ln_gamma(alpha + 1.0) - b * beta.ln() + b * n.ln().ln() - alpha * n.ln();
            prop_assert!((pred - stated).abs() <= 1e-10 * stated.abs().max(1.0));
        }

        #[test]
        fn gaussian_case_identity(
            sa in 0.2f64..5.0, sl in 0.2f64..5.0, k in 3.0f64..30.0,
        ) {
            let alpha = sa * sa / (sl * sl);
            let pi = std::f64::consts::PI;
            let phi = PhiSpec::Product(vec![
                PhiSpec::Const { c: alpha.sqrt() * pi.powf((1.0 - alpha) / 2.0) },
                PhiSpec::LogFactor { b: (1.0 - alpha) / 2.0 },
                PhiSpec::Power { alpha },
            ]);
            let class = classify(&phi).unwrap();
            let n = 10f64.powf(k);
            let pred = predict_log_ccdf_n(&class, &phi, n).unwrap().log_p;
            let stated = ln_gamma(alpha + 1.0) - 0.5 * alpha.ln()
                + 0.5 * (alpha - 1.0) * (pi * n.ln()).ln() - alpha * n.ln();
            prop_assert!((pred - stated).abs() <= 1e-10 * stated.abs().max(1.0));
        }
    }
}
