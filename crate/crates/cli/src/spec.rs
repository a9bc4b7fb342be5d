//! Experiment specifications: key/value text merged from a config file and
//! command-line overrides, resolved into typed values per command.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use retrans_core::asym::PhiSpec;
use retrans_core::mc::{Mode, SimConfig};
use retrans_core::{ChannelModel, TailFunction};

use crate::output::fmt_num;

pub const WORKERS_ENV: &str = "RETRANS_WORKERS";

/// Where a raw value came from, for diagnostics.
#[derive(Debug, Clone)]
enum Origin {
    File { path: PathBuf, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Default)]
pub struct RawSpec {
    values: BTreeMap<String, (String, Origin)>,
    base: Option<PathBuf>,
}

impl RawSpec {
    /// Reads a key/value config, or the spec embedded in an earlier output
    /// file (CSV `# spec:` lines or the `spec` object of a JSON output).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config `{}`", path.display()))?;
        let mut spec = RawSpec {
            base: path.parent().map(Path::to_path_buf),
            ..Default::default()
        };
        if text.trim_start().starts_with('{') {
            spec.load_json(path, &text)?;
        } else {
            spec.load_text(path, &text)?;
        }
        Ok(spec)
    }

    fn load_json(&mut self, path: &Path, text: &str) -> Result<()> {
        let v: serde_json::Value = serde_json::from_str(text)
            .with_context(|| format!("`{}` is not valid JSON", path.display()))?;
        let obj = v
            .get("spec")
            .and_then(|s| s.as_object())
            .ok_or_else(|| anyhow!("`{}` has no `spec` object", path.display()))?;
        for (k, val) in obj {
            let s = val
                .as_str()
                .ok_or_else(|| anyhow!("{}: spec field `{k}` must be a string", path.display()))?;
            let origin = Origin::File {
                path: path.to_path_buf(),
                line: 0,
            };
            self.values.insert(k.clone(), (s.to_string(), origin));
        }
        Ok(())
    }

    fn load_text(&mut self, path: &Path, text: &str) -> Result<()> {
        let embedded = text.lines().any(|l| l.starts_with(EMBED_PREFIX));
        for (i, line) in text.lines().enumerate() {
            let body = if embedded {
                match line.strip_prefix(EMBED_PREFIX) {
                    Some(b) => b,
                    None => continue,
                }
            } else {
                line
            };
            let body = body.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected `key=value`", path.display(), i + 1))?;
            let key = k.trim().to_string();
            let origin = Origin::File {
                path: path.to_path_buf(),
                line: i + 1,
            };
            if !is_key(&key) {
                bail!("{origin}: `{key}` is not a field name; expected `key=value`");
            }
            if let Some((_, prev)) = self.values.get(&key) {
                bail!("{origin}: field `{key}` already set at {prev}");
            }
            self.values.insert(key, (v.trim().to_string(), origin));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values
            .insert(key.to_string(), (value.into(), Origin::Flag));
    }
}

/// Line prefix under which output files embed their resolved spec.
pub const EMBED_PREFIX: &str = "# spec: ";

/// Resolves raw values into typed ones, recording the canonical form of
/// every value used (defaults included).
pub struct Resolver {
    raw: RawSpec,
    pub resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(raw: RawSpec) -> Self {
        Self {
            raw,
            resolved: BTreeMap::new(),
        }
    }

    fn take(&mut self, key: &str) -> Option<(String, Origin)> {
        self.raw.values.remove(key)
    }

    /// Parses an optional field, wrapping failures with the field name and
    /// where the value came from.
    fn parse_opt<T>(
        &mut self,
        key: &str,
        parse: impl FnOnce(&str) -> Result<T>,
        canonical: impl FnOnce(&T) -> String,
    ) -> Result<Option<T>> {
        let Some((text, origin)) = self.take(key) else {
            return Ok(None);
        };
        let v = parse(&text).with_context(|| format!("{origin}: field `{key}`"))?;
        self.resolved.insert(key.to_string(), canonical(&v));
        Ok(Some(v))
    }

    fn parse_or<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl FnOnce(&str) -> Result<T>,
        canonical: impl Fn(&T) -> String,
    ) -> Result<T> {
        match self.parse_opt(key, parse, &canonical)? {
            Some(v) => Ok(v),
            None => {
                self.resolved.insert(key.to_string(), canonical(&default));
                Ok(default)
            }
        }
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        self.parse_or(key, default, parse_f64, |v| fmt_num(*v))
    }

    pub fn f64_req(&mut self, key: &str) -> Result<f64> {
        self.parse_opt(key, parse_f64, |v| fmt_num(*v))?
            .ok_or_else(|| anyhow!("missing field `{key}`"))
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        self.parse_or(key, default, parse_u64, |v| v.to_string())
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        self.parse_or(key, default, parse_bool, |v| v.to_string())
    }

    pub fn choice_or(&mut self, key: &str, default: &str, allowed: &[&str]) -> Result<String> {
        let allowed_list = allowed.join(", ");
        self.parse_or(
            key,
            default.to_string(),
            |s| {
                let s = s.to_ascii_lowercase();
                if allowed.contains(&s.as_str()) {
                    Ok(s)
                } else {
                    bail!("`{s}` is not one of {allowed_list}")
                }
            },
            |v| v.clone(),
        )
    }

    fn dist(&mut self, key: &str) -> Result<Option<TailFunction>> {
        let base = self.raw.base.clone().unwrap_or_else(|| PathBuf::from("."));
        self.parse_opt(
            key,
            |s| Ok(TailFunction::parse_with_base(s, &base)?),
            |v| v.to_string(),
        )
    }

    /// `L`, `A` and optional `U` (default `det(value=0)`).
    pub fn model(&mut self) -> Result<ChannelModel> {
        let l = self
            .dist("L")?
            .ok_or_else(|| anyhow!("missing field `L`"))?;
        let a = self
            .dist("A")?
            .ok_or_else(|| anyhow!("missing field `A`"))?;
        let u = match self.dist("U")? {
            Some(u) => u,
            None => {
                let u = TailFunction::deterministic(0.0)?;
                self.resolved.insert("U".into(), u.to_string());
                u
            }
        };
        Ok(ChannelModel::new(l, a, u)?)
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw.values.contains_key(key)
    }

    pub fn phi(&mut self) -> Result<Option<PhiSpec>> {
        let base = self.raw.base.clone();
        self.parse_opt(
            "phi",
            |s| Ok(PhiSpec::parse_with_base(s, base.as_deref())?),
            |v| v.to_string(),
        )
    }

    pub fn grid(&mut self, key: &str, default: Grid) -> Result<Vec<f64>> {
        let g = self.parse_or(key, default, |s| s.parse::<Grid>(), |g| g.to_string())?;
        Ok(g.points())
    }

    /// Worker threads: the `workers` field, else `RETRANS_WORKERS`, else 1.
    pub fn workers(&mut self) -> Result<usize> {
        let default = match std::env::var(WORKERS_ENV) {
            Ok(v) => {
                parse_u64(&v).with_context(|| format!("environment variable {WORKERS_ENV}"))?
            }
            Err(_) => SimConfig::default().workers as u64,
        };
        let w = self.u64_or("workers", default)?;
        if w == 0 {
            bail!("field `workers` must be at least 1");
        }
        Ok(w as usize)
    }

    pub fn sim_config(&mut self) -> Result<SimConfig> {
        let d = SimConfig::default();
        let mode = self.parse_or(
            "mode",
            d.mode,
            |s| Ok(Mode::parse(s)?),
            |m| m.as_str().to_string(),
        )?;
        Ok(SimConfig {
            seed: self.u64_or("seed", d.seed)?,
            sessions: self.u64_or("sessions", d.sessions)?,
            workers: self.workers()?,
            max_attempts: self.u64_or("max_attempts", d.max_attempts)?,
            mode,
        })
    }

    /// Fails on any field the command did not use.
    pub fn finish(self, command: &str) -> Result<BTreeMap<String, String>> {
        if let Some((k, (_, origin))) = self.raw.values.iter().next() {
            bail!("{origin}: field `{k}` is not used by `{command}`");
        }
        Ok(self.resolved)
    }
}

fn is_key(k: &str) -> bool {
    let mut c = k.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| anyhow!("`{s}` is not a number"))
}

fn parse_u64(s: &str) -> Result<u64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    // accept 1e6-style integers
    match t.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => bail!("`{s}` is not a nonnegative integer"),
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("`{s}` is not true/false"),
    }
}

/// Evaluation points: `geom(lo,hi[,factor])` or an explicit list `a,b,c`.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Geometric { lo: f64, hi: f64, factor: f64 },
    List(Vec<f64>),
}

/// Default spacing of geometric grids, a quarter decade.
pub const QUARTER_DECADE: f64 = 1.778_279_410_038_922_8;

impl Grid {
    pub fn geometric(lo: f64, hi: f64) -> Self {
        Grid::Geometric {
            lo,
            hi,
            factor: QUARTER_DECADE,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Geometric { lo, hi, factor } => {
                let steps = ((hi / lo).ln() / factor.ln() + 1e-9).floor() as i32;
                (0..=steps).map(|k| lo * factor.powi(k)).collect()
            }
        }
    }
}

impl std::str::FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let g = if let Some(inner) = t.strip_prefix("geom(").and_then(|r| r.strip_suffix(')')) {
            let nums = inner
                .split(',')
                .map(parse_f64)
                .collect::<Result<Vec<_>>>()?;
            let (lo, hi, factor) = match nums[..] {
                [lo, hi] => (lo, hi, QUARTER_DECADE),
                [lo, hi, f] => (lo, hi, f),
                _ => bail!("expected `geom(lo,hi)` or `geom(lo,hi,factor)`"),
            };
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                bail!("geometric grid needs 0 < lo <= hi");
            }
            if !(factor > 1.0 && factor.is_finite()) {
                bail!("geometric factor must exceed 1");
            }
            Grid::Geometric { lo, hi, factor }
        } else {
            let v = t.split(',').map(parse_f64).collect::<Result<Vec<_>>>()?;
            Grid::List(v)
        };
        let pts = g.points();
        if pts.is_empty() {
            bail!("grid is empty");
        }
        if pts.windows(2).any(|w| w[1] <= w[0]) {
            bail!("grid must be strictly increasing");
        }
        Ok(g)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Geometric { lo, hi, factor } => {
                write!(
                    f,
                    "geom({},{},{})",
                    fmt_num(*lo),
                    fmt_num(*hi),
                    fmt_num(*factor)
                )
            }
            Grid::List(v) => {
                let parts: Vec<String> = v.iter().map(|&x| fmt_num(x)).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_covers_both_ends() {
        let g: Grid = "geom(1,1e6)".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 25);
        assert_eq!(p[0], 1.0);
        assert!((p[24] / 1e6 - 1.0).abs() < 1e-12);
        let round: Grid = g.to_string().parse().unwrap();
        assert_eq!(round, g);
    }

    #[test]
    fn grid_errors() {
        assert!("3,2".parse::<Grid>().is_err());
        assert!("geom(0,10)".parse::<Grid>().is_err());
        assert!("geom(1,10,1)".parse::<Grid>().is_err());
        assert!("1,x".parse::<Grid>().is_err());
        assert_eq!(
            "9, 99,999".parse::<Grid>().unwrap().points(),
            vec![9.0, 99.0, 999.0]
        );
    }

    #[test]
    fn integers_accept_exponent_form() {
        assert_eq!(parse_u64("1e6").unwrap(), 1_000_000);
        assert!(parse_u64("1.5").is_err());
        assert!(parse_u64("-1").is_err());
    }

    #[test]
    fn config_lines_report_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.cfg");
        std::fs::write(&p, "# model\nL=exp(rate=1)\nA exp(rate=1)\n").unwrap();
        let e = RawSpec::load(&p).unwrap_err().to_string();
        assert!(e.contains("exp.cfg:3"), "{e}");
        std::fs::write(&p, "L=exp(rate=1)\nL=exp(rate=2)\n").unwrap();
        assert!(RawSpec::load(&p)
            .unwrap_err()
            .to_string()
            .contains("already set"));
    }

    #[test]
    fn unknown_and_malformed_fields_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.cfg");
        std::fs::write(&p, "L=exp(rate=1)\nA=exp(rate=oops)\n").unwrap();
        let mut r = Resolver::new(RawSpec::load(&p).unwrap());
        let e = format!("{:#}", r.model().unwrap_err());
        assert!(
            e.contains("exp.cfg:2") && e.contains("`A`") && e.contains("rate"),
            "{e}"
        );

        let mut raw = RawSpec::default();
        raw.set("bogus", "1");
        let r = Resolver::new(raw);
        assert!(r
            .finish("compute-n")
            .unwrap_err()
            .to_string()
            .contains("`bogus` is not used"));
    }
}
