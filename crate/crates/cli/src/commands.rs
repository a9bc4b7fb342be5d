//! The five subcommands. Each resolves its fields, computes, and returns a
//! report plus the list of point-level failures that set exit code 1.

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use retrans_core::asym::{
    classify as classify_phi, dominance_probe, phi_from_pair, predict_log_ccdf_n,
    predict_log_ccdf_t, Prediction, RegimeClass, Scale,
};
use retrans_core::channel::Requirements;
use retrans_core::mc::{simulate_tail_counts, SimConfig, TailCounts, TailCurve};
use retrans_core::oracle::ccdf_n_quadrature;
use retrans_core::tandem::{bound_check, ccdf_n_tandem, simulate_tandem_tail_counts, TandemModel};
use retrans_core::{ChannelModel, Error};
use serde_json::json;

use crate::output::{fmt_num, Cell, LogBase, Report, Table};
use crate::spec::{Grid, Resolver};

pub struct Outcome {
    pub report: Report,
    /// Human-readable reasons for a nonzero exit (NONCONVERGED, TRUNCATION).
    pub failures: Vec<String>,
}

fn default_grid() -> Grid {
    Grid::geometric(1.0, 1e6)
}

/// `P[N > x] = P[N > ⌊x⌋]`, so non-integer grid points are floored.
fn lattice_point(arg: f64) -> Result<f64> {
    if !(arg >= 0.0 && arg.is_finite()) {
        bail!("grid values must be nonnegative and finite, got {arg}");
    }
    Ok(arg.floor())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| anyhow!("cannot start worker pool: {e}"))
}

/// Oracle values on the grid, in grid order; `Err` entries are
/// non-converged points.
fn oracle_curve(
    model: &ChannelModel,
    grid: &[f64],
    workers: usize,
) -> Result<Vec<std::result::Result<(f64, f64), Error>>> {
    let points = grid
        .iter()
        .map(|&x| lattice_point(x))
        .collect::<Result<Vec<_>>>()?;
    let vals = pool(workers)?.install(|| {
        points
            .par_iter()
            .map(|&n| ccdf_n_quadrature(model, n).map(|lp| (lp.value, lp.abs_err_bound)))
            .collect::<Vec<_>>()
    });
    vals.into_iter()
        .map(|v| match v {
            Err(e @ Error::NonConverged { .. }) => Ok(Err(e)),
            other => Ok(Ok(other?)),
        })
        .collect()
}

fn truncation_check(counts: &TailCounts, allowed: u64, failures: &mut Vec<String>) {
    if counts.truncated > allowed {
        failures.push(format!(
            "TRUNCATION: {} sessions hit max_attempts (allowed {allowed})",
            counts.truncated
        ));
    }
}

pub fn compute_n(mut r: Resolver) -> Result<Outcome> {
    let model = r.model()?;
    let grid = r.grid("grid", default_grid())?;
    let workers = r.workers()?;
    let b = LogBase {
        base10: r.bool_or("base10", false)?,
    };
    let spec = r.finish("compute-n")?;
    model.validate(Requirements::default())?;

    let mut t = Table::new(&["arg", &b.col("log_p"), "ci_halfwidth", "n_exceed", "status"]);
    let mut failures = Vec::new();
    for (&arg, v) in grid.iter().zip(oracle_curve(&model, &grid, workers)?) {
        match v {
            Ok((lp, err)) => t.push(vec![
                arg.into(),
                b.val(lp).into(),
                b.val(err).into(),
                Cell::Empty,
                "OK".into(),
            ]),
            Err(e) => {
                failures.push(format!("n={arg}: {e}"));
                t.push(vec![
                    arg.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    "NONCONVERGED".into(),
                ]);
            }
        }
    }
    let mut report = Report::new("compute-n", spec);
    report.meta("kind", "N_CURVE");
    report.tables.push(("n".into(), t));
    Ok(Outcome { report, failures })
}

fn curve_table(curve: &TailCurve, b: LogBase) -> Table {
    let mut t = Table::new(&["arg", &b.col("log_p"), "ci_halfwidth", "n_exceed"]);
    for p in &curve.points {
        t.push(vec![
            p.arg.into(),
            b.val(p.log_p).into(),
            b.val(p.ci_halfwidth).into(),
            p.n_exceed.into(),
        ]);
    }
    t
}

pub fn simulate(mut r: Resolver) -> Result<Outcome> {
    let model = r.model()?;
    let n_grid = r.grid("grid", default_grid())?;
    let t_grid = r.grid("t_grid", default_grid())?;
    let cfg = r.sim_config()?;
    let allowed = r.u64_or("max_truncated", 0)?;
    let b = LogBase {
        base10: r.bool_or("base10", false)?,
    };
    let spec = r.finish("simulate")?;

    let counts = simulate_tail_counts(&model, &cfg, &n_grid, &t_grid, 0)?;
    let mut failures = Vec::new();
    truncation_check(&counts, allowed, &mut failures);
    let mut report = Report::new("simulate", spec);
    report.meta("sessions", counts.sessions);
    report.meta("truncated", counts.truncated);
    report
        .tables
        .push(("n".into(), curve_table(&counts.n_curve(), b)));
    report
        .tables
        .push(("t".into(), curve_table(&counts.t_curve(), b)));
    Ok(Outcome { report, failures })
}

pub fn classify(mut r: Resolver) -> Result<Outcome> {
    let phi = r.phi()?;
    let model = if r.has("L") || r.has("A") {
        Some(r.model()?)
    } else {
        None
    };
    let spec = r.finish("classify")?;
    if phi.is_none() && model.is_none() {
        bail!("classify needs `phi`, or a model `L` and `A` for numeric probes");
    }

    let mut report = Report::new("classify", spec);
    report.text_report = true;
    if let Some(phi) = &phi {
        let class = classify_phi(phi)?;
        report.meta("regime", class.regime);
        report.meta("regime_name", class.regime.name());
        report.meta("governing", class.governing);
        for n in &class.notes {
            report.meta("note", n);
        }
        let kind = predict_log_ccdf_n(&class, phi, 1e6)?.kind;
        report.meta("prediction_kind", kind);
        report.meta("scale", kind.scale().as_str());
        let dom = dominance_probe(phi);
        report.meta("dominance", dom.verdict.as_str());
        report.meta("dominance_log_ratio_min", fmt_num(dom.min_log_ratio));
        report.meta("dominance_log_ratio_max", fmt_num(dom.max_log_ratio));
        report.extra.insert("class".into(), json!(class));
        report.extra.insert("dominance".into(), json!(dom));
    }
    if let Some(model) = &model {
        match model.validate(Requirements {
            tail_analysis: true,
            delay: false,
        }) {
            Ok(()) => report.meta("model_check", "OK"),
            Err(e) => report.meta("model_check", e),
        }
        let pair = phi_from_pair(model.l(), model.a());
        let mut t = Table::new(&["y", "ln_phi", "doubling_ratio", "log_index"]);
        for k in 1..=8 {
            let y = 10f64.powi(k);
            t.push(vec![
                y.into(),
                pair.ln_phi(y).ok().into(),
                pair.doubling_ratio(y).ok().into(),
                pair.log_index(y).ok().into(),
            ]);
        }
        report.tables.push(("probes".into(), t));
    }
    Ok(Outcome {
        report,
        failures: Vec::new(),
    })
}

fn parse_scale(s: &str) -> Option<Scale> {
    match s {
        "prob_ratio" => Some(Scale::Probability),
        "log_ratio" => Some(Scale::Log),
        "loglog_ratio" => Some(Scale::DoubleLog),
        _ => None,
    }
}

struct Observed {
    arg: f64,
    log_p: Option<f64>,
    ci: Option<f64>,
    status: &'static str,
}

pub fn compare(mut r: Resolver) -> Result<Outcome> {
    let phi = r.phi()?.ok_or_else(|| anyhow!("missing field `phi`"))?;
    let model = r.model()?;
    let curve = r.choice_or("curve", "n", &["n", "t"])?;
    let source = r.choice_or("source", "oracle", &["oracle", "mc"])?;
    let scale_req = r.choice_or(
        "scale",
        "auto",
        &["auto", "prob_ratio", "log_ratio", "loglog_ratio"],
    )?;
    let grid = r.grid("grid", Grid::geometric(10.0, 1e6))?;
    let (cfg, allowed, workers) = if source == "mc" {
        let cfg = r.sim_config()?;
        (Some(cfg), r.u64_or("max_truncated", 0)?, cfg.workers)
    } else {
        (None, 0, r.workers()?)
    };
    let b = LogBase {
        base10: r.bool_or("base10", false)?,
    };
    let spec = r.finish("compare")?;
    if curve == "t" && source == "oracle" {
        bail!("there is no oracle for T; use source=mc");
    }
    model.validate(Requirements {
        tail_analysis: true,
        delay: curve == "t",
    })?;

    let mut failures = Vec::new();
    let observed = observe(
        &model,
        &grid,
        &curve,
        cfg.as_ref(),
        workers,
        allowed,
        &mut failures,
    )?;

    let class = match classify_phi(&phi) {
        Ok(c) => Some(c),
        Err(Error::Unclassified(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mean_au = model.mean_cycle();
    let predict = |class: &RegimeClass, x: f64| -> retrans_core::Result<Prediction> {
        if curve == "n" {
            predict_log_ccdf_n(class, &phi, x)
        } else {
            let m = mean_au.ok_or_else(|| Error::Domain("E[A+U] is infinite".into()))?;
            predict_log_ccdf_t(class, &phi, x, m)
        }
    };

    let mut t = Table::new(&[
        "arg",
        &b.col("observed_log_p"),
        "observed_ci",
        &b.col("predicted_log_p"),
        "kind",
        "scale",
        "agreement",
        "trend",
        "status",
    ]);
    let mut last_gap: Option<f64> = None;
    for o in &observed {
        let pred = match &class {
            Some(c) => predict(c, o.arg),
            None => Err(Error::UnsupportedRegime(String::new())),
        };
        let pred = match pred {
            Ok(p) => p,
            Err(e) => {
                let status = match e {
                    Error::Domain(_) => "OUT_OF_RANGE",
                    _ => "UNSUPPORTED",
                };
                t.push(vec![
                    o.arg.into(),
                    o.log_p.map(|v| b.val(v)).into(),
                    o.ci.map(|v| b.val(v)).into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    status.into(),
                ]);
                continue;
            }
        };
        let scale = match parse_scale(&scale_req) {
            Some(s) => s,
            None => pred.kind.scale(),
        };
        let agreement = match o.log_p {
            Some(lp) => Some(pred.agreement_on(scale, lp)?),
            None => None,
        };
        let trend = match (agreement, last_gap) {
            (Some(a), Some(prev)) if (a - 1.0).abs().is_finite() => {
                let gap = (a - 1.0).abs();
                Some(if gap < prev {
                    "toward"
                } else if gap > prev {
                    "away"
                } else {
                    "flat"
                })
            }
            _ => None,
        };
        if let Some(a) = agreement.filter(|a| a.is_finite()) {
            last_gap = Some((a - 1.0).abs());
        }
        t.push(vec![
            o.arg.into(),
            o.log_p.map(|v| b.val(v)).into(),
            o.ci.map(|v| b.val(v)).into(),
            b.val(pred.log_p).into(),
            pred.kind.as_str().into(),
            scale.as_str().into(),
            agreement.into(),
            trend.into(),
            o.status.into(),
        ]);
    }
    let mut report = Report::new("compare", spec);
    if let Some(c) = &class {
        report.meta("regime", c.regime);
        report.meta("governing", c.governing);
    } else {
        report.meta("regime", "UNCLASSIFIED");
    }
    report.tables.push((curve.clone(), t));
    Ok(Outcome { report, failures })
}

fn observe(
    model: &ChannelModel,
    grid: &[f64],
    curve: &str,
    cfg: Option<&SimConfig>,
    workers: usize,
    allowed: u64,
    failures: &mut Vec<String>,
) -> Result<Vec<Observed>> {
    match cfg {
        None => Ok(grid
            .iter()
            .zip(oracle_curve(model, grid, workers)?)
            .map(|(&arg, v)| match v {
                Ok((lp, err)) => Observed {
                    arg,
                    log_p: Some(lp),
                    ci: Some(err),
                    status: "OK",
                },
                Err(e) => {
                    failures.push(format!("n={arg}: {e}"));
                    Observed {
                        arg,
                        log_p: None,
                        ci: None,
                        status: "NONCONVERGED",
                    }
                }
            })
            .collect()),
        Some(cfg) => {
            let (ng, tg): (&[f64], &[f64]) = if curve == "n" {
                (grid, &[])
            } else {
                (&[], grid)
            };
            let counts = simulate_tail_counts(model, cfg, ng, tg, 0)?;
            truncation_check(&counts, allowed, failures);
            let c = if curve == "n" {
                counts.n_curve()
            } else {
                counts.t_curve()
            };
            Ok(c.points
                .iter()
                .map(|p| Observed {
                    arg: p.arg,
                    log_p: Some(p.log_p),
                    ci: Some(p.ci_halfwidth),
                    status: if p.degenerate { "DEGENERATE" } else { "OK" },
                })
                .collect())
        }
    }
}

pub fn tandem(mut r: Resolver) -> Result<Outcome> {
    let p = r.f64_req("p")?;
    let q = r.f64_req("q")?;
    let hop = r.f64_or("per_hop_time", 1.0)?;
    let grid = r.grid("grid", default_grid())?;
    let sim = r.bool_or("simulate", false)?;
    let (cfg, allowed) = if sim {
        (Some(r.sim_config()?), r.u64_or("max_truncated", 0)?)
    } else {
        (None, 0)
    };
    let b = LogBase {
        base10: r.bool_or("base10", false)?,
    };
    let spec = r.finish("tandem")?;
    let model = TandemModel::new(p, q, hop)?;

    let mut failures = Vec::new();
    let mc = match &cfg {
        Some(cfg) => {
            let counts = simulate_tandem_tail_counts(&model, cfg, &grid, &[], 0)?;
            truncation_check(&counts, allowed, &mut failures);
            Some(counts.n_curve())
        }
        None => None,
    };
    let mut header = vec![
        "arg".to_string(),
        b.col("log_p"),
        "lower".into(),
        "scaled".into(),
        "upper".into(),
        "in_bracket".into(),
    ];
    if mc.is_some() {
        header.extend([
            b.col("mc_log_p"),
            "mc_ci".into(),
            "mc_n_exceed".into(),
            "mc_covers".into(),
        ]);
    }
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for (i, &arg) in grid.iter().enumerate() {
        let n = lattice_point(arg)? as u64;
        let lp = ccdf_n_tandem(&model, n)?.value;
        let bc = bound_check(&model, n).ok();
        let mut row = vec![
            arg.into(),
            b.val(lp).into(),
            bc.map(|c| c.lower).into(),
            bc.map(|c| c.scaled).into(),
            bc.map(|c| c.upper).into(),
            bc.map(|c| c.inside).into(),
        ];
        if let Some(curve) = &mc {
            let pt = &curve.points[i];
            let covers = (pt.log_p - lp).abs() <= pt.ci_halfwidth;
            row.extend([
                b.val(pt.log_p).into(),
                b.val(pt.ci_halfwidth).into(),
                pt.n_exceed.into(),
                covers.into(),
            ]);
        }
        t.push(row);
    }
    let mut report = Report::new("tandem", spec);
    report.meta("exponent", fmt_num(model.tail_index()));
    report.tables.push(("n".into(), t));
    Ok(Outcome { report, failures })
}
