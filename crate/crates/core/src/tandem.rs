//! End-to-end retransmission over a random number of lossy hops.
//!
//! The hop count `L ≥ 1` has `P[L > k] = e^{−pk}`; each hop independently
//! loses the packet with probability `1 − e^{−q}`, and a loss restarts the
//! transfer from the sender.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::SessionOutcome;
use crate::error::{Error, Result};
use crate::mc::{run_in_pool, tail_counts_with, uniform_open0, Mode, SimConfig, TailCounts};
use crate::oracle::{ccdf_n_lattice_log, LatticeLaw, LogProb};
use crate::rng::session_rng;
use crate::special::{ln_gamma, ln_one_minus_exp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TandemModel {
    p: f64,
    q: f64,
    per_hop_time: f64,
}

impl TandemModel {
    /// `p = ∞` fixes a single hop; `q = 0` makes hops lossless.
    pub fn new(p: f64, q: f64, per_hop_time: f64) -> Result<Self> {
        if !(p > 0.0) {
            return Err(Error::param("p", "must be positive"));
        }
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::param("q", "must be nonnegative and finite"));
        }
        if !(per_hop_time >= 0.0 && per_hop_time.is_finite()) {
            return Err(Error::param(
                "per_hop_time",
                "must be nonnegative and finite",
            ));
        }
        Ok(Self { p, q, per_hop_time })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn per_hop_time(&self) -> f64 {
        self.per_hop_time
    }

    /// Tail exponent `p/q` of `N`.
    pub fn tail_index(&self) -> f64 {
        self.p / self.q
    }

    pub fn hops(&self) -> GeometricHops {
        GeometricHops { p: self.p }
    }

    /// `ln` of the end-to-end success probability over `k` hops.
    pub fn log_success(&self, k: u64) -> f64 {
        -self.q * k as f64
    }
}

/// Hop count with `P[L > k] = e^{−pk}` on `k = 0, 1, …`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricHops {
    p: f64,
}

impl LatticeLaw for GeometricHops {
    fn first(&self) -> u64 {
        1
    }

    fn log_pmf(&self, k: u64) -> f64 {
        match k {
            0 => f64::NEG_INFINITY,
            // written so that p = ∞ gives P[L = 1] = 1
            1 => (-(-self.p).exp()).ln_1p(),
            _ => -self.p * (k - 1) as f64 + ln_one_minus_exp(-self.p),
        }
    }

    fn log_tail(&self, k: u64) -> f64 {
        if k == 0 {
            0.0
        } else {
            -self.p * k as f64
        }
    }
}

/// `ln P[N > n]` by exact summation over the hop count.
pub fn ccdf_n_tandem(model: &TandemModel, n: u64) -> Result<LogProb> {
    if n == 0 {
        return Ok(LogProb::exact(0.0));
    }
    if model.q == 0.0 {
        return Ok(LogProb::exact(f64::NEG_INFINITY));
    }
    ccdf_n_lattice_log(&model.hops(), |k| model.log_success(k), n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub n: u64,
    /// `n^{p/q} P[N > n]`.
    pub scaled: f64,
    pub lower: f64,
    pub upper: f64,
    pub inside: bool,
}

/// Compares `n^{p/q} P[N > n]` with `[e^{−p}, e^{p}] · Γ(1 + p/q)`.
pub fn bound_check(model: &TandemModel, n: u64) -> Result<BoundCheck> {
    if model.q == 0.0 || model.p.is_infinite() {
        return Err(Error::param("p/q", "bounds need finite p and positive q"));
    }
    let r = model.tail_index();
    let v = ccdf_n_tandem(model, n)?.value;
    let scaled = (v + r * (n as f64).ln()).exp();
    let g = ln_gamma(1.0 + r);
    let lower = (g - model.p).exp();
    let upper = (g + model.p).exp();
    Ok(BoundCheck {
        n,
        scaled,
        lower,
        upper,
        inside: lower <= scaled && scaled <= upper,
    })
}

fn sample_hops(model: &TandemModel, rng: &mut ChaCha8Rng) -> u64 {
    let e = -uniform_open0(rng).ln();
    ((e / model.p).ceil() as u64).max(1)
}

fn naive_session(model: &TandemModel, rng: &mut ChaCha8Rng, max_attempts: u64) -> SessionOutcome {
    let l = sample_hops(model, rng);
    let keep = (-model.q).exp();
    let mut hops = 0u64;
    let mut n = 0u64;
    loop {
        n += 1;
        let mut reached = 0;
        let mut lost = false;
        while reached < l {
            reached += 1;
            if rng.gen::<f64>() >= keep {
                lost = true;
                break;
            }
        }
        hops += reached;
        if !lost || n >= max_attempts {
            return SessionOutcome {
                n_attempts: n,
                total_time: hops as f64 * model.per_hop_time,
                truncated: lost,
            };
        }
    }
}

fn shortcut_session(
    model: &TandemModel,
    rng: &mut ChaCha8Rng,
    max_attempts: u64,
) -> SessionOutcome {
    let l = sample_hops(model, rng);
    if model.q == 0.0 {
        return SessionOutcome {
            n_attempts: 1,
            total_time: l as f64 * model.per_hop_time,
            truncated: false,
        };
    }
    let log_fail = ln_one_minus_exp(model.log_success(l));
    let failures = (uniform_open0(rng).ln() / log_fail).floor() as u64;
    let n = failures.saturating_add(1);
    let summed = failures.min(max_attempts);
    // hop at which a failed attempt is lost: geometric conditioned on ≤ L
    let fail_mass = -(model.log_success(l)).exp_m1();
    let mut hops = l;
    for _ in 0..summed {
        let w: f64 = rng.gen();
        let j = (-(-w * fail_mass).ln_1p() / model.q).ceil() as u64;
        hops += j.clamp(1, l);
    }
    SessionOutcome {
        n_attempts: n,
        total_time: hops as f64 * model.per_hop_time,
        truncated: failures > max_attempts || n == u64::MAX,
    }
}

fn one_session(model: &TandemModel, cfg: &SimConfig, i: u64) -> SessionOutcome {
    let mut rng = session_rng(cfg.seed, i);
    match cfg.mode {
        Mode::NaiveLoop => naive_session(model, &mut rng, cfg.max_attempts),
        Mode::GeometricShortcut => shortcut_session(model, &mut rng, cfg.max_attempts),
    }
}

/// All session outcomes, in session order.
pub fn simulate_tandem(model: &TandemModel, cfg: &SimConfig) -> Result<Vec<SessionOutcome>> {
    cfg.check()?;
    run_in_pool(cfg.workers, || {
        (0..cfg.sessions)
            .into_par_iter()
            .map(|i| one_session(model, cfg, i))
            .collect()
    })
}

/// Streaming exceedance counts, as [`crate::mc::simulate_tail_counts`].
pub fn simulate_tandem_tail_counts(
    model: &TandemModel,
    cfg: &SimConfig,
    n_grid: &[f64],
    t_grid: &[f64],
    keep: usize,
) -> Result<TailCounts> {
    tail_counts_with(cfg, n_grid, t_grid, keep, |i| one_session(model, cfg, i))
}
