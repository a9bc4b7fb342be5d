//! Monte Carlo simulation of `(N, T)`, empirical tail curves and tail-index
//! estimators.
//!
//! Session `i` draws from [`crate::rng::session_rng`]`(seed, i)`, so results
//! depend on `(seed, sessions, mode)` only, never on the worker count.
//!
//! Within a session `T` is accumulated as `((A_1 + U_1) + (A_2 + U_2) + …) + L`,
//! each failed attempt contributing `A_i + U_i` before it is added.

mod curve;
pub mod gof;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use curve::{
    empirical_ccdf, hill_estimator, loglog_slope, CurveKind, CurvePoint, SlopeFit, TailCurve,
};

use crate::channel::{ChannelModel, SessionOutcome};
use crate::error::{Error, Result};
use crate::rng::session_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    /// Draw `A_1, A_2, …` until one covers `L`.
    NaiveLoop,
    /// Draw `N` from its geometric law given `L`, then the failed periods from
    /// `A` conditioned below `L`.
    GeometricShortcut,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::NaiveLoop => "naive",
            Mode::GeometricShortcut => "shortcut",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" | "naive_loop" => Ok(Mode::NaiveLoop),
            "shortcut" | "geometric_shortcut" => Ok(Mode::GeometricShortcut),
            other => Err(Error::parse(
                s,
                format!("unknown mode `{other}` (naive or shortcut)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    pub sessions: u64,
    pub workers: usize,
    /// Cap on attempts per session. In shortcut mode `N` itself is never
    /// capped; only the number of failed periods summed into `T` is.
    pub max_attempts: u64,
    pub mode: Mode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sessions: 10_000,
            workers: 1,
            max_attempts: 1_000_000_000,
            mode: Mode::GeometricShortcut,
        }
    }
}

impl SimConfig {
    pub(crate) fn check(&self) -> Result<()> {
        if self.sessions == 0 {
            return Err(Error::param("sessions", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::param("workers", "must be at least 1"));
        }
        if self.max_attempts == 0 {
            return Err(Error::param("max_attempts", "must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn run_in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn uniform_open0(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Draws of one naive session, for checking the accumulation order.
#[derive(Debug, Default)]
pub(crate) struct Trace {
    pub l: f64,
    pub failed: Vec<(f64, f64)>,
}

pub(crate) fn naive_session(
    model: &ChannelModel,
    rng: &mut ChaCha8Rng,
    max_attempts: u64,
    mut trace: Option<&mut Trace>,
) -> SessionOutcome {
    let l = model.l().sample(rng);
    let mut t = 0.0;
    let mut n = 0u64;
    if let Some(tr) = trace.as_deref_mut() {
        tr.l = l;
    }
    loop {
        n += 1;
        let a = model.a().sample(rng);
        if a >= l {
            return SessionOutcome {
                n_attempts: n,
                total_time: t + l,
                truncated: false,
            };
        }
        let u = model.u().sample(rng);
        t += a + u;
        if let Some(tr) = trace.as_deref_mut() {
            tr.failed.push((a, u));
        }
        if n >= max_attempts {
            return SessionOutcome {
                n_attempts: n,
                total_time: t + l,
                truncated: true,
            };
        }
    }
}

pub(crate) fn shortcut_session(
    model: &ChannelModel,
    rng: &mut ChaCha8Rng,
    max_attempts: u64,
) -> SessionOutcome {
    let l = model.l().sample(rng);
    let log_fail = model.log_failure_prob(l);
    if log_fail == f64::NEG_INFINITY {
        return SessionOutcome {
            n_attempts: 1,
            total_time: l,
            truncated: false,
        };
    }
    let w = uniform_open0(rng);
    // saturating float-to-int cast caps astronomically large N at u64::MAX
    let failures = (w.ln() / log_fail).floor() as u64;
    let n = failures.saturating_add(1);
    let summed = failures.min(max_attempts);
    let mut t = 0.0;
    for _ in 0..summed {
        let a = model.a().sample_below(rng, l);
        let u = model.u().sample(rng);
        t += a + u;
    }
    SessionOutcome {
        n_attempts: n,
        total_time: t + l,
        truncated: failures > max_attempts || n == u64::MAX,
    }
}

fn one_session(model: &ChannelModel, cfg: &SimConfig, i: u64) -> SessionOutcome {
    let mut rng = session_rng(cfg.seed, i);
    match cfg.mode {
        Mode::NaiveLoop => naive_session(model, &mut rng, cfg.max_attempts, None),
        Mode::GeometricShortcut => shortcut_session(model, &mut rng, cfg.max_attempts),
    }
}

/// All session outcomes, in session order.
pub fn simulate(model: &ChannelModel, cfg: &SimConfig) -> Result<Vec<SessionOutcome>> {
    cfg.check()?;
    run_in_pool(cfg.workers, || {
        (0..cfg.sessions)
            .into_par_iter()
            .map(|i| one_session(model, cfg, i))
            .collect()
    })
}

/// Exceedance counts of `N` and `T` on fixed grids, plus the largest values,
/// accumulated without storing every session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCounts {
    pub sessions: u64,
    pub n_grid: Vec<f64>,
    pub n_exceed: Vec<u64>,
    pub t_grid: Vec<f64>,
    pub t_exceed: Vec<u64>,
    pub truncated: u64,
    /// Largest observed `N` values, descending.
    pub top_n: Vec<f64>,
    /// Largest observed `T` values, descending.
    pub top_t: Vec<f64>,
}

impl TailCounts {
    pub fn n_curve(&self) -> TailCurve {
        TailCurve::from_counts(CurveKind::N, &self.n_grid, &self.n_exceed, self.sessions)
    }

    pub fn t_curve(&self) -> TailCurve {
        TailCurve::from_counts(CurveKind::T, &self.t_grid, &self.t_exceed, self.sessions)
    }
}

struct Partial {
    n_exceed: Vec<u64>,
    t_exceed: Vec<u64>,
    truncated: u64,
    top_n: Vec<f64>,
    top_t: Vec<f64>,
}

fn keep_top(mut v: Vec<f64>, k: usize) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(k);
    v
}

fn count_into(counts: &mut [u64], grid: &[f64], value: f64) {
    // grid points strictly below the value are exceeded
    let m = grid.partition_point(|&g| g < value);
    for c in &mut counts[..m] {
        *c += 1;
    }
}

const CHUNK: u64 = 1 << 16;

pub fn simulate_tail_counts(
    model: &ChannelModel,
    cfg: &SimConfig,
    n_grid: &[f64],
    t_grid: &[f64],
    keep: usize,
) -> Result<TailCounts> {
    tail_counts_with(cfg, n_grid, t_grid, keep, |i| one_session(model, cfg, i))
}

pub(crate) fn tail_counts_with(
    cfg: &SimConfig,
    n_grid: &[f64],
    t_grid: &[f64],
    keep: usize,
    session: impl Fn(u64) -> SessionOutcome + Sync,
) -> Result<TailCounts> {
    cfg.check()?;
    for (name, g) in [("n_grid", n_grid), ("t_grid", t_grid)] {
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(name, "must be strictly increasing"));
        }
    }
    let chunks = cfg.sessions.div_ceil(CHUNK);
    let merged = run_in_pool(cfg.workers, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(cfg.sessions);
                let mut p = Partial {
                    n_exceed: vec![0; n_grid.len()],
                    t_exceed: vec![0; t_grid.len()],
                    truncated: 0,
                    top_n: Vec::new(),
                    top_t: Vec::new(),
                };
                let mut ns = Vec::with_capacity((hi - lo) as usize);
                let mut ts = Vec::with_capacity((hi - lo) as usize);
                for i in lo..hi {
                    let o = session(i);
                    let n = o.n_attempts as f64;
                    count_into(&mut p.n_exceed, n_grid, n);
                    count_into(&mut p.t_exceed, t_grid, o.total_time);
                    p.truncated += o.truncated as u64;
                    ns.push(n);
                    ts.push(o.total_time);
                }
                p.top_n = keep_top(ns, keep);
                p.top_t = keep_top(ts, keep);
                p
            })
            .reduce_with(|mut a, b| {
                for (x, y) in a.n_exceed.iter_mut().zip(&b.n_exceed) {
                    *x += y;
                }
                for (x, y) in a.t_exceed.iter_mut().zip(&b.t_exceed) {
                    *x += y;
                }
                a.truncated += b.truncated;
                a.top_n.extend(b.top_n);
                a.top_n = keep_top(a.top_n, keep);
                a.top_t.extend(b.top_t);
                a.top_t = keep_top(a.top_t, keep);
                a
            })
            .expect("at least one chunk")
    })?;
    Ok(TailCounts {
        sessions: cfg.sessions,
        n_grid: n_grid.to_vec(),
        n_exceed: merged.n_exceed,
        t_grid: t_grid.to_vec(),
        t_exceed: merged.t_exceed,
        truncated: merged.truncated,
        top_n: merged.top_n,
        top_t: merged.top_t,
    })
}
