//! Exact evaluation of `ln P[N > n]`.
//!
//! Given `L`, attempts fail independently with probability `1 − Ḡ(L)`, so
//! `P[N > n] = E[(1 − Ḡ(L))^n]`. With `V = F̄(L)` uniform and `V = e^{−s}`,
//!
//! ```text
//! P[N > n] = ∫_0^∞ exp(h(s)) ds,   h(s) = −s + n ln(1 − Ḡ(F̄⁻¹(e^{−s}))).
//! ```
//!
//! The integrand is shifted by its peak value before integration, so results
//! like `e^{−2·10⁵}` are returned as ordinary logs.

use serde::Serialize;

use crate::channel::ChannelModel;
use crate::dist::Family;
use crate::error::{Error, Result};
use crate::quad;
use crate::special::{ln_gamma, ln_gamma_ratio, ln_one_minus_exp, log_sum_exp};

/// A natural-log probability with an estimated absolute error on the log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogProb {
    pub value: f64,
    pub abs_err_bound: f64,
}

impl LogProb {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            abs_err_bound: 0.0,
        }
    }

    pub fn prob(&self) -> f64 {
        self.value.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Integrand evaluations allowed before giving up with `NonConverged`.
    pub max_evals: usize,
    /// Stop widening once a panel adds less than this fraction of the total.
    pub panel_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            max_evals: 1_000_000,
            panel_tol: 1e-12,
        }
    }
}

/// The exponent `h(s)` for a fixed model and `n`.
struct Exponent<'a> {
    model: &'a ChannelModel,
    n: f64,
    evals: usize,
}

impl Exponent<'_> {
    fn h(&mut self, s: f64) -> f64 {
        self.evals += 1;
        if s < 0.0 {
            return f64::NEG_INFINITY;
        }
        let x = self.model.l().inv_log_ccdf(-s);
        let fail = self.model.log_failure_prob(x);
        let v = if fail == 0.0 { -s } else { -s + self.n * fail };
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Location and height of the peak of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub s: f64,
    pub h: f64,
}

const SCAN_LO: f64 = 1e-12;
const SCAN_STEP: f64 = 1.189_207_115_002_721; // 2^{1/4}

fn scan_peak(e: &mut Exponent<'_>) -> (Peak, f64, f64) {
    let mut best = Peak {
        s: 0.0,
        h: e.h(0.0),
    };
    let mut prev = 0.0;
    let mut bracket = (0.0, SCAN_LO);
    let mut s = SCAN_LO;
    loop {
        let h = e.h(s);
        if h > best.h {
            best = Peak { s, h };
            bracket = (prev, s * SCAN_STEP);
        }
        // h(s) ≤ −s, so nothing beyond can compete with the best value
        if -s < best.h - 60.0 || !s.is_finite() {
            break;
        }
        prev = s;
        s *= SCAN_STEP;
    }
    (best, bracket.0, bracket.1)
}

fn golden_max(e: &mut Exponent<'_>, mut a: f64, mut b: f64, start: Peak) -> Peak {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut best = start;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let mut hc = e.h(c);
    let mut hd = e.h(d);
    for _ in 0..200 {
        if (b - a) <= 1e-13 * b.abs().max(1e-300) {
            break;
        }
        if hc >= hd {
            b = d;
            d = c;
            hd = hc;
            c = b - R * (b - a);
            hc = e.h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + R * (b - a);
            hd = e.h(d);
        }
    }
    for (s, h) in [(c, hc), (d, hd)] {
        if h > best.h {
            best = Peak { s, h };
        }
    }
    best
}

fn locate_peak(e: &mut Exponent<'_>) -> Peak {
    let (coarse, a, b) = scan_peak(e);
    if coarse.h == f64::NEG_INFINITY {
        return coarse;
    }
    golden_max(e, a, b, coarse)
}

/// `ln P[N > n]` for a validated model and real `n ≥ 0`.
pub fn ccdf_n_quadrature(model: &ChannelModel, n: f64) -> Result<LogProb> {
    ccdf_n_quadrature_with(model, n, QuadratureOptions::default())
}

pub fn ccdf_n_quadrature_with(
    model: &ChannelModel,
    n: f64,
    opts: QuadratureOptions,
) -> Result<LogProb> {
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::Domain(format!(
            "n must be finite and nonnegative, got {n}"
        )));
    }
    if n == 0.0 {
        return Ok(LogProb::exact(0.0));
    }
    if let Family::Deterministic { .. } = model.l().family() {
        let l0 = model.l().inv_log_ccdf(0.0);
        return Ok(LogProb::exact(n * model.log_failure_prob(l0)));
    }
    let mut e = Exponent { model, n, evals: 0 };
    let peak = locate_peak(&mut e);
    if peak.h == f64::NEG_INFINITY {
        return Ok(LogProb::exact(f64::NEG_INFINITY));
    }
    let width = initial_width(&mut e, peak);
    let mut total = 0.0;
    let mut err = 0.0;

    // right of the peak
    let mut a = peak.s;
    let mut w = width;
    loop {
        let b = a + w;
        let (v, de) = panel(&mut e, peak.h, a, b, total, opts)?;
        total += v;
        err += de;
        a = b;
        w *= 2.0;
        // ∫_a^∞ e^{h − h*} ≤ e^{−a − h*}
        let tail_bound = (-a - peak.h).exp();
        if v <= opts.panel_tol * total && tail_bound <= opts.panel_tol * total {
            err += tail_bound;
            break;
        }
        if !a.is_finite() {
            break;
        }
    }
    // left of the peak
    let mut b = peak.s;
    let mut w = width;
    while b > 0.0 {
        let a = (b - w).max(0.0);
        let (v, de) = panel(&mut e, peak.h, a, b, total, opts)?;
        total += v;
        err += de;
        b = a;
        w *= 2.0;
        if v <= opts.panel_tol * total && b > 0.0 {
            // h is non-decreasing up to the peak, so the rest is below b·e^{h(b)−h*}
            let rest = b * (e.h(b) - peak.h).exp();
            if rest <= opts.panel_tol * total {
                err += rest;
                break;
            }
        }
    }
    if e.evals > opts.max_evals {
        return Err(Error::NonConverged {
            budget: opts.max_evals,
        });
    }
    let value = (peak.h + total.ln()).min(0.0);
    Ok(LogProb {
        value,
        abs_err_bound: err / total,
    })
}

/// Distance from the peak at which `h` has dropped by about one unit.
fn initial_width(e: &mut Exponent<'_>, peak: Peak) -> f64 {
    let mut w = (peak.s * 1e-6).max(1e-9);
    for _ in 0..200 {
        let right = e.h(peak.s + w);
        let left = if peak.s > w {
            e.h(peak.s - w)
        } else {
            f64::NEG_INFINITY
        };
        if peak.h - right.max(left) >= 1.0 {
            break;
        }
        w *= 2.0;
    }
    w
}

fn panel(
    e: &mut Exponent<'_>,
    shift: f64,
    a: f64,
    b: f64,
    total: f64,
    opts: QuadratureOptions,
) -> Result<(f64, f64)> {
    let remaining = opts.max_evals.saturating_sub(e.evals);
    let abs_tol = 1e-3 * opts.panel_tol * total;
    // h itself carries rounding error of order ε·|h*|, so no tighter relative
    // accuracy is attainable on e^{h − h*}
    let rel_tol = 1e-12f64.max(32.0 * f64::EPSILON * shift.abs());
    let mut inner = |s: f64| (e.h(s) - shift).exp();
    match quad::integrate(&mut inner, a, b, abs_tol, rel_tol, remaining) {
        Ok(r) => Ok((r.value, r.error)),
        Err(_) => Err(Error::NonConverged {
            budget: opts.max_evals,
        }),
    }
}

/// Peak of `h` and any other local maximum within `margin` of it on a
/// refinement grid; a non-empty `secondary` means the unimodality assumption
/// behind the peak search failed for this model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnimodalityReport {
    pub peak: Peak,
    pub secondary: Vec<Peak>,
}

pub fn unimodality_probe(model: &ChannelModel, n: f64, margin: f64) -> UnimodalityReport {
    let mut e = Exponent { model, n, evals: 0 };
    let peak = locate_peak(&mut e);
    let hi = (peak.s * 1e3).max(-peak.h + 100.0);
    let lo = (peak.s * 1e-6).max(SCAN_LO);
    let k = 4000;
    let ratio = (hi / lo).powf(1.0 / k as f64);
    let grid: Vec<(f64, f64)> = (0..=k)
        .map(|i| {
            let s = lo * ratio.powi(i);
            (s, e.h(s))
        })
        .collect();
    let secondary = grid
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1)
        .map(|w| Peak {
            s: w[1].0,
            h: w[1].1,
        })
        .filter(|p| p.h > peak.h - margin && (p.s / peak.s).ln().abs() > 2.0 * ratio.ln())
        .collect();
    UnimodalityReport { peak, secondary }
}

/// `ln(α B(α, n+1)) = ln E[(1 − V^{1/α})^n]`, exact when `F̄ = Ḡ^α`.
pub fn ccdf_n_power_closed_form(alpha: f64, n: f64) -> Result<LogProb> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if !(n >= 0.0) {
        return Err(Error::Domain(format!("n must be nonnegative, got {n}")));
    }
    if n == 0.0 {
        return Ok(LogProb::exact(0.0));
    }
    let v = alpha.ln() + ln_gamma(alpha) - ln_gamma_ratio(n + 1.0, alpha);
    Ok(LogProb::exact(v.min(0.0)))
}

/// A law on the positive integers, given in log form.
pub trait LatticeLaw {
    /// Smallest atom.
    fn first(&self) -> u64;
    /// `ln P[L = k]`.
    fn log_pmf(&self, k: u64) -> f64;
    /// `ln P[L > k]`.
    fn log_tail(&self, k: u64) -> f64;
}

/// A finitely supported lattice law.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePmf {
    atoms: Vec<(u64, f64)>,
    log_tails: Vec<f64>,
}

impl FinitePmf {
    pub fn new(mut atoms: Vec<(u64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::param("pmf", "needs at least one atom"));
        }
        if atoms.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) {
            return Err(Error::param("pmf", "probabilities must lie in [0, 1]"));
        }
        atoms.sort_by_key(|&(k, _)| k);
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("pmf", "repeated atom"));
        }
        let sum: f64 = atoms.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::param("pmf", format!("must sum to 1, sums to {sum}")));
        }
        let mut log_tails = vec![f64::NEG_INFINITY; atoms.len()];
        let mut acc = 0.0f64;
        for i in (0..atoms.len()).rev() {
            log_tails[i] = acc.ln();
            acc += atoms[i].1;
        }
        Ok(Self { atoms, log_tails })
    }
}

impl LatticeLaw for FinitePmf {
    fn first(&self) -> u64 {
        self.atoms[0].0
    }

    fn log_pmf(&self, k: u64) -> f64 {
        match self.atoms.binary_search_by_key(&k, |&(j, _)| j) {
            Ok(i) => self.atoms[i].1.ln(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn log_tail(&self, k: u64) -> f64 {
        let i = self.atoms.partition_point(|&(j, _)| j <= k);
        if i == 0 {
            0.0
        } else {
            self.log_tails[i - 1]
        }
    }
}

const LATTICE_MAX_TERMS: u64 = 100_000_000;

/// `ln Σ_k P[L = k] (1 − ρ(k))^n`, with `log_rho(k) = ln ρ(k)`.
///
/// Terms are generated from the first atom upward until the remaining mass
/// `P[L > k]` is below `1e−15` of the running sum, then added in descending
/// order.
pub fn ccdf_n_lattice_log<L: LatticeLaw + ?Sized>(
    law: &L,
    log_rho: impl Fn(u64) -> f64,
    n: f64,
) -> Result<LogProb> {
    if n == 0.0 {
        return Ok(LogProb::exact(0.0));
    }
    let cut = 1e-15f64.ln();
    let mut terms = Vec::new();
    let mut running = f64::NEG_INFINITY;
    let mut k = law.first();
    loop {
        let lp = law.log_pmf(k);
        if lp > f64::NEG_INFINITY {
            let t = lp + n * ln_one_minus_exp(log_rho(k));
            if t > f64::NEG_INFINITY {
                terms.push(t);
                running = log_sum_exp(&[running, t]);
            }
        }
        let tail = law.log_tail(k);
        if tail == f64::NEG_INFINITY || (running > f64::NEG_INFINITY && tail < running + cut) {
            break;
        }
        k += 1;
        if k - law.first() > LATTICE_MAX_TERMS {
            return Err(Error::NonConverged {
                budget: LATTICE_MAX_TERMS as usize,
            });
        }
    }
    terms.sort_by(|a, b| b.total_cmp(a));
    let value = log_sum_exp(&terms).min(0.0);
    Ok(LogProb {
        value,
        abs_err_bound: 1e-15 + terms.len() as f64 * f64::EPSILON,
    })
}

/// [`ccdf_n_lattice_log`] for an explicit pmf and success probabilities.
pub fn ccdf_n_lattice(
    pmf: &[(u64, f64)],
    success_prob: impl Fn(u64) -> f64,
    n: f64,
) -> Result<LogProb> {
    let law = FinitePmf::new(pmf.to_vec())?;
    for &(k, _) in pmf {
        let r = success_prob(k);
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::Domain(format!(
                "success probability at {k} is {r}, outside (0, 1]"
            )));
        }
    }
    ccdf_n_lattice_log(&law, |k| success_prob(k).ln(), n)
}
