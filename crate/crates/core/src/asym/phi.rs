//! The link function `Φ` with `P[L > x]⁻¹ ≈ Φ(P[A > x]⁻¹)`.

use std::fmt;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::dist::parse::split_call;
use crate::dist::TailFunction;
use crate::error::{Error, Result};

/// Symbolic `Φ`. Every variant is described through `ln Φ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec {
    /// `x^α`.
    Power {
        alpha: f64,
    },
    /// `e^{λ (ln x)^δ}`.
    LogPower {
        lambda: f64,
        delta: f64,
    },
    /// `e^{x^β l(x)}` with `l(x) = c (ln x)^b`.
    ExpRv {
        beta: f64,
        c: f64,
        b: f64,
    },
    /// `ln Φ = e^{x^γ}`.
    ExpExpRv {
        gamma: f64,
    },
    /// `ln Φ = e^{λ (ln x)^δ}`.
    ExpLogPower {
        lambda: f64,
        delta: f64,
    },
    /// Constant factor `c`.
    Const {
        c: f64,
    },
    /// `(ln x)^b`.
    LogFactor {
        b: f64,
    },
    Product(Vec<PhiSpec>),
    /// `(ln x, ln Φ)` samples, linear in between, last slope beyond.
    Tabulated {
        source: String,
        points: Vec<(f64, f64)>,
    },
}

fn pos(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl PhiSpec {
    pub fn has_tabulated(&self) -> bool {
        match self {
            PhiSpec::Tabulated { .. } => true,
            PhiSpec::Product(fs) => fs.iter().any(PhiSpec::has_tabulated),
            _ => false,
        }
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", "must be nonnegative and finite"));
        }
        Ok(PhiSpec::Power { alpha })
    }

    pub fn log_power(lambda: f64, delta: f64) -> Result<Self> {
        Ok(PhiSpec::LogPower {
            lambda: pos("lambda", lambda)?,
            delta: pos("delta", delta)?,
        })
    }

    pub fn exp_rv(beta: f64) -> Result<Self> {
        Ok(PhiSpec::ExpRv {
            beta: pos("beta", beta)?,
            c: 1.0,
            b: 0.0,
        })
    }

    pub fn exp_exp_rv(gamma: f64) -> Result<Self> {
        Ok(PhiSpec::ExpExpRv {
            gamma: pos("gamma", gamma)?,
        })
    }

    pub fn exp_log_power(lambda: f64, delta: f64) -> Result<Self> {
        Ok(PhiSpec::ExpLogPower {
            lambda: pos("lambda", lambda)?,
            delta: pos("delta", delta)?,
        })
    }

    pub fn tabulated(source: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::param("table", "need at least two points"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::param("table", "ln x must be strictly increasing"));
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::param("table", "entries must be finite"));
        }
        Ok(PhiSpec::Tabulated {
            source: source.into(),
            points,
        })
    }

    /// `ln Φ(x)` for `x > 1`.
    pub fn ln_phi(&self, x: f64) -> f64 {
        self.ln_phi_at_log(x.ln())
    }

    /// `ln Φ(e^u)`; reaches arguments far beyond `f64`.
    pub fn ln_phi_at_log(&self, u: f64) -> f64 {
        match self {
            PhiSpec::Power { alpha } => alpha * u,
            PhiSpec::LogPower { lambda, delta } => lambda * u.powf(*delta),
            PhiSpec::ExpRv { beta, c, b } => (beta * u + b * u.ln()).exp() * c,
            PhiSpec::ExpExpRv { gamma } => (gamma * u).exp().exp(),
            PhiSpec::ExpLogPower { lambda, delta } => (lambda * u.powf(*delta)).exp(),
            PhiSpec::Const { c } => c.ln(),
            PhiSpec::LogFactor { b } => b * u.ln(),
            PhiSpec::Product(fs) => fs.iter().map(|f| f.ln_phi_at_log(u)).sum(),
            PhiSpec::Tabulated { points, .. } => {
                let n = points.len();
                let seg = if u <= points[0].0 {
                    0
                } else {
                    (points.partition_point(|p| p.0 <= u) - 1).min(n - 2)
                };
                let (a, b) = (points[seg], points[seg + 1]);
                a.1 + (u - a.0) * (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }

    /// Parses e.g. `power(2)`, `logpower(lambda=1,delta=2)` or a `*`-joined
    /// product such as `const(0.5)*logfactor(b=-1)*power(alpha=2)`.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_base(text, None)
    }

    pub fn parse_with_base(text: &str, base: Option<&Path>) -> Result<Self> {
        let parts: Vec<&str> = text.split('*').collect();
        if parts.len() > 1 {
            let fs = parts
                .iter()
                .map(|p| parse_factor(p, base))
                .collect::<Result<Vec<_>>>()?;
            return Ok(PhiSpec::Product(fs));
        }
        parse_factor(text, base)
    }
}

fn parse_factor(text: &str, base: Option<&Path>) -> Result<PhiSpec> {
    let (name, raw) = split_call(text)?;
    if name == "table" {
        let path = raw
            .first()
            .ok_or_else(|| Error::parse(text, "table needs a path"))?;
        let full = match base {
            Some(b) if Path::new(path).is_relative() => b.join(path),
            _ => Path::new(path).to_path_buf(),
        };
        let body = std::fs::read_to_string(&full)
            .map_err(|e| Error::parse(text, format!("cannot read `{}`: {e}", full.display())))?;
        return tabulated_from_csv(path, &body);
    }
    let keys: &[&str] = match name.as_str() {
        "power" => &["alpha"],
        "logpower" | "explogpower" => &["lambda", "delta"],
        "exprv" => &["beta", "c", "b"],
        "expexprv" => &["gamma"],
        "const" => &["c"],
        "logfactor" => &["b"],
        other => return Err(Error::parse(text, format!("unknown Φ form `{other}`"))),
    };
    // leading bare values bind to the keys in order
    let mut kv: Vec<(String, f64)> = Vec::new();
    let mut keyed = false;
    for (i, a) in raw.iter().enumerate() {
        let (k, v) = match a.split_once('=') {
            Some((k, v)) => {
                keyed = true;
                (k.trim().to_ascii_lowercase(), v.trim())
            }
            None if keyed => {
                return Err(Error::parse(
                    text,
                    format!("bare argument `{a}` after `key=value` arguments"),
                ))
            }
            None => match keys.get(i) {
                Some(k) => (k.to_string(), a.as_str()),
                None => return Err(Error::parse(text, format!("too many arguments at `{a}`"))),
            },
        };
        let v: f64 = v
            .parse()
            .map_err(|_| Error::parse(text, format!("field `{k}`: `{v}` is not a number")))?;
        if kv.iter().any(|(seen, _)| *seen == k) {
            return Err(Error::parse(text, format!("field `{k}` given twice")));
        }
        kv.push((k, v));
    }
    let get = |key: &str| -> Result<f64> {
        kv.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::parse(text, format!("missing field `{key}`")))
    };
    let opt = |key: &str, default: f64| {
        kv.iter()
            .find(|(k, _)| k == key)
            .map_or(default, |(_, v)| *v)
    };
    let allowed = keys;
    if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(Error::parse(text, format!("unknown field `{k}`")));
    }
    let spec = match name.as_str() {
        "power" => PhiSpec::power(get("alpha")?),
        "logpower" => PhiSpec::log_power(get("lambda")?, get("delta")?),
        "explogpower" => PhiSpec::exp_log_power(get("lambda")?, get("delta")?),
        "exprv" => pos("c", opt("c", 1.0)).and_then(|c| {
            Ok(PhiSpec::ExpRv {
                beta: pos("beta", get("beta")?)?,
                c,
                b: opt("b", 0.0),
            })
        }),
        "expexprv" => PhiSpec::exp_exp_rv(get("gamma")?),
        "const" => pos("c", get("c")?).map(|c| PhiSpec::Const { c }),
        _ => Ok(PhiSpec::LogFactor { b: get("b")? }),
    };
    spec.map_err(|e| match e {
        Error::InvalidParameter { name, reason } => {
            Error::parse(text, format!("field `{name}`: {reason}"))
        }
        other => other,
    })
}

/// Two-column CSV `x,ln_phi`.
pub fn tabulated_from_csv(source: &str, body: &str) -> Result<PhiSpec> {
    let mut points = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [x, l] => x.parse::<f64>().ok().zip(l.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((x, l)) if x > 0.0 => points.push((x.ln(), l)),
            None if points.is_empty() && i == 0 => continue,
            _ => {
                return Err(Error::parse(
                    source,
                    format!("line {}: expected `x,ln_phi` with x > 0", i + 1),
                ))
            }
        }
    }
    PhiSpec::tabulated(source, points)
}

fn num(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiSpec::Power { alpha } => write!(f, "power(alpha={})", num(*alpha)),
            PhiSpec::LogPower { lambda, delta } => {
                write!(f, "logpower(lambda={},delta={})", num(*lambda), num(*delta))
            }
            PhiSpec::ExpRv { beta, c, b } => {
                write!(f, "exprv(beta={}", num(*beta))?;
                if *c != 1.0 {
                    write!(f, ",c={}", num(*c))?;
                }
                if *b != 0.0 {
                    write!(f, ",b={}", num(*b))?;
                }
                write!(f, ")")
            }
            PhiSpec::ExpExpRv { gamma } => write!(f, "expexprv(gamma={})", num(*gamma)),
            PhiSpec::ExpLogPower { lambda, delta } => {
                write!(
                    f,
                    "explogpower(lambda={},delta={})",
                    num(*lambda),
                    num(*delta)
                )
            }
            PhiSpec::Const { c } => write!(f, "const(c={})", num(*c)),
            PhiSpec::LogFactor { b } => write!(f, "logfactor(b={})", num(*b)),
            PhiSpec::Product(fs) => {
                for (i, x) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
            PhiSpec::Tabulated { source, .. } => write!(f, "table({source})"),
        }
    }
}

impl Serialize for PhiSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `Φ` implied by a pair of tails: `Φ(y) = 1 / F̄(Ḡ⁻¹(1/y))`.
#[derive(Debug, Clone, Copy)]
pub struct PhiFromPair<'a> {
    l: &'a TailFunction,
    a: &'a TailFunction,
}

pub fn phi_from_pair<'a>(l: &'a TailFunction, a: &'a TailFunction) -> PhiFromPair<'a> {
    PhiFromPair { l, a }
}

impl PhiFromPair<'_> {
    /// `ln Φ(y)` for `y ≥ 1`.
    pub fn ln_phi(&self, y: f64) -> Result<f64> {
        if !(y >= 1.0) {
            return Err(Error::Domain(format!(
                "Φ(y) needs 1/y in (0, 1], got y = {y}"
            )));
        }
        Ok(self.ln_phi_at_log(y.ln()))
    }

    /// `ln Φ(e^u)` for `u ≥ 0`.
    pub fn ln_phi_at_log(&self, u: f64) -> f64 {
        let x = self.a.inv_log_ccdf(-u);
        -self.l.log_ccdf(x)
    }

    /// `ln Φ(2y) / ln Φ(y)`: tends to 1 for slowly varying `ln Φ`, to `2^β`
    /// for `ln Φ` regularly varying with index `β`.
    pub fn doubling_ratio(&self, y: f64) -> Result<f64> {
        Ok(self.ln_phi(2.0 * y)? / self.ln_phi(y)?)
    }

    /// `ln Φ(y) / ln y`: tends to `α` when `Φ` is regularly varying.
    pub fn log_index(&self, y: f64) -> Result<f64> {
        Ok(self.ln_phi(y)? / y.ln())
    }
}
