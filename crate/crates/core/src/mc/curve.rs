use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveKind {
    #[serde(rename = "N_CURVE")]
    N,
    #[serde(rename = "T_CURVE")]
    T,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::N => "N_CURVE",
            CurveKind::T => "T_CURVE",
        }
    }
}

/// Exceedance counts below this make the normal-approximation interval
/// unreliable.
pub const DEGENERATE_BELOW: u64 = 10;

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub arg: f64,
    /// `ln P[X > arg]`; `−∞` when nothing exceeded `arg`.
    pub log_p: f64,
    /// Half-width of the 95% interval on `log_p`.
    pub ci_halfwidth: f64,
    /// `None` for curves that are not built from samples.
    pub n_exceed: Option<u64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCurve {
    pub kind: CurveKind,
    /// `None` for curves that are not built from samples.
    pub sample_size: Option<u64>,
    pub points: Vec<CurvePoint>,
}

impl TailCurve {
    /// Empirical curve from exceedance counts `counts[i] = #{X > grid[i]}`.
    pub fn from_counts(kind: CurveKind, grid: &[f64], counts: &[u64], sample_size: u64) -> Self {
        let n = sample_size as f64;
        let points = grid
            .iter()
            .zip(counts)
            .map(|(&arg, &k)| {
                let (log_p, ci) = if k == 0 {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    let p = k as f64 / n;
                    // delta method: sd(ln p̂) = sqrt((1 − p) / k)
                    (p.ln(), Z95 * ((1.0 - p) / k as f64).sqrt())
                };
                CurvePoint {
                    arg,
                    log_p,
                    ci_halfwidth: ci,
                    n_exceed: Some(k),
                    degenerate: k < DEGENERATE_BELOW,
                }
            })
            .collect();
        Self {
            kind,
            sample_size: Some(sample_size),
            points,
        }
    }

    /// Curve of exact values, e.g. from the oracle, with their error bounds as
    /// half-widths.
    pub fn exact(kind: CurveKind, points: impl IntoIterator<Item = (f64, f64, f64)>) -> Self {
        Self {
            kind,
            sample_size: None,
            points: points
                .into_iter()
                .map(|(arg, log_p, err)| CurvePoint {
                    arg,
                    log_p,
                    ci_halfwidth: err,
                    n_exceed: None,
                    degenerate: false,
                })
                .collect(),
        }
    }

    /// CSV with header `arg,log_p,ci_halfwidth,n_exceed`; each `meta` pair
    /// becomes a leading `# key: value` line.
    pub fn to_csv(&self, meta: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in meta {
            for line in v.lines() {
                let _ = writeln!(s, "# {k}: {line}");
            }
        }
        s.push_str("arg,log_p,ci_halfwidth,n_exceed\n");
        for p in &self.points {
            let k = p.n_exceed.map_or(String::new(), |k| k.to_string());
            let _ = writeln!(s, "{},{},{},{}", p.arg, p.log_p, p.ci_halfwidth, k);
        }
        s
    }
}

/// Empirical ccdf of `samples` at each grid point.
pub fn empirical_ccdf(samples: &[f64], grid: &[f64], kind: CurveKind) -> Result<TailCurve> {
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("grid", "must be strictly increasing"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let counts: Vec<u64> = grid
        .iter()
        .map(|&g| (sorted.len() - sorted.partition_point(|&x| x <= g)) as u64)
        .collect();
    Ok(TailCurve::from_counts(
        kind,
        grid,
        &counts,
        samples.len() as u64,
    ))
}

/// Hill estimate of the tail index from the `k` largest of `samples`.
pub fn hill_estimator(samples: &[f64], k: usize) -> Result<f64> {
    if k < 2 || k >= samples.len() {
        return Err(Error::param(
            "k",
            format!("need 2 <= k < {} samples, got {k}", samples.len()),
        ));
    }
    if samples.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::param("samples", "must all be positive"));
    }
    let mut v = samples.to_vec();
    // descending order statistics X_(1) ≥ … ≥ X_(k+1)
    v.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = v[k];
    let sum: f64 = v[..k].iter().map(|x| (x / threshold).ln()).sum();
    if !(sum > 0.0) {
        return Err(Error::Domain(
            "top order statistics are all equal; tail index undefined".into(),
        ));
    }
    Ok(k as f64 / sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares slope of `log_p` against `ln(arg)` over `[arg_lo, arg_hi]`,
/// weighted by the inverse variance implied by each point's half-width.
/// Exact curves (some zero half-width) fall back to ordinary least squares
/// with the residual standard error.
pub fn loglog_slope(curve: &TailCurve, arg_lo: f64, arg_hi: f64) -> Result<SlopeFit> {
    let pts: Vec<&crate::mc::CurvePoint> = curve
        .points
        .iter()
        .filter(|p| p.arg >= arg_lo && p.arg <= arg_hi && p.arg > 0.0)
        .filter(|p| !p.degenerate && p.log_p.is_finite())
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints { found: pts.len() });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.arg.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.log_p).collect();
    let weighted = pts
        .iter()
        .all(|p| p.ci_halfwidth > 0.0 && p.ci_halfwidth.is_finite());
    let ws: Vec<f64> = if weighted {
        pts.iter().map(|p| (Z95 / p.ci_halfwidth).powi(2)).collect()
    } else {
        vec![1.0; pts.len()]
    };
    let sw: f64 = ws.iter().sum();
    let xm = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = ws
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(w, (x, y))| w * (x - xm) * (y - ym))
        .sum();
    let slope = sxy / sxx;
    let stderr = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - ym - slope * (x - xm)).powi(2))
            .sum();
        (rss / (pts.len() as f64 - 2.0) / sxx).sqrt()
    };
    Ok(SlopeFit {
        slope,
        stderr,
        points: pts.len(),
    })
}
