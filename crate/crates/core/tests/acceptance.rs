//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::Instant;

use retrans_core::asym::{classify, predict_log_ccdf_n, predict_log_ccdf_t, PhiSpec};
use retrans_core::dist::Table;
use retrans_core::mc::gof::{
    ks_critical_1pct, ks_one_sample, ks_two_sample, ks_two_sample_critical_1pct,
};
use retrans_core::mc::{loglog_slope, simulate, simulate_tail_counts, Mode, SimConfig, TailCounts};
use retrans_core::oracle::{ccdf_n_power_closed_form, ccdf_n_quadrature};
use retrans_core::special::ln_gamma;
use retrans_core::tandem::{bound_check, ccdf_n_tandem, simulate_tandem_tail_counts, TandemModel};
use retrans_core::{ChannelModel, TailFunction};

struct Outcome {
    pass: bool,
    detail: String,
}

fn model(l: &str, a: &str, u: &str) -> ChannelModel {
    ChannelModel::from_strs(l, a, Some(u), None).expect("valid model")
}

fn quad(m: &ChannelModel, n: f64) -> f64 {
    ccdf_n_quadrature(m, n).expect("quadrature converges").value
}

/// Rounded points of the geometric grid `10^{k/4}`, deduplicated.
fn quarter_decades(lo: i32, hi: i32, integer: bool) -> Vec<f64> {
    let mut g: Vec<f64> = (lo..=hi)
        .map(|k| 10f64.powf(k as f64 / 4.0))
        .map(|x| if integer { x.round() } else { x })
        .collect();
    g.dedup();
    g
}

fn exact_power_law() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ratios = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        let m = model(&format!("exp(rate={alpha})"), "exp(rate=1)", "det(0)");
        for n in [10.0, 1e3, 1e6] {
            let q = quad(&m, n);
            let c = ccdf_n_power_closed_form(alpha, n).unwrap().value;
            worst = worst.max((q - c).abs() / c.abs());
            if n == 1e6 {
                ratios.push((q + alpha * n.ln() - ln_gamma(alpha + 1.0)).exp());
            }
        }
    }
    let in_band = ratios.iter().all(|r| (0.99..=1.01).contains(r));
    Outcome {
        pass: worst <= 1e-6 && in_band,
        detail: format!("max rel err {worst:.2e}; n^α P/Γ(α+1) at 1e6 = {ratios:.5?}"),
    }
}

fn gaussian_case() -> Outcome {
    let m = model(
        "halfnormal(sigma=1)",
        &format!("halfnormal(sigma={})", 2f64.sqrt()),
        "det(0)",
    );
    let alpha = 2.0f64;
    let pi = std::f64::consts::PI;
    let phi = PhiSpec::parse(&format!(
        "const(c={})*logfactor(b={})*power(alpha={alpha})",
        alpha.sqrt() * pi.powf((1.0 - alpha) / 2.0),
        (1.0 - alpha) / 2.0
    ))
    .unwrap();
    let class = classify(&phi).unwrap();
    let ratio = |n: f64| {
        predict_log_ccdf_n(&class, &phi, n)
            .unwrap()
            .agreement(quad(&m, n))
    };
    let (r4, r8) = (ratio(1e4), ratio(1e8));
    Outcome {
        pass: (0.75..=1.33).contains(&r8) && (r8 - 1.0).abs() < (r4 - 1.0).abs(),
        detail: format!("ratio {r4:.4} at 1e4, {r8:.4} at 1e8"),
    }
}

fn lognormal_correction() -> Outcome {
    let m = model("lognormaltype(lambda=1,delta=2)", "pareto(a=1)", "det(0)");
    let n = 1e10f64;
    let u = n.ln();
    let c = (-quad(&m, n) - u * u) / (u.ln() * u);
    Outcome {
        pass: (-2.5..=-1.5).contains(&c),
        detail: format!("correction coefficient {c:.4} (target -2 ± 25%)"),
    }
}

fn weibull_regime() -> Outcome {
    let m = model("exp(rate=1,shift=1)", "pareto(a=1)", "det(0)");
    let r = |n: f64| -quad(&m, n) / n.sqrt();
    let (r6, r10) = (r(1e6), r(1e10));
    Outcome {
        pass: (1.7..=2.3).contains(&r10) && (r10 - 2.0).abs() < (r6 - 2.0).abs(),
        detail: format!("-ln P/√n = {r6:.4} at 1e6, {r10:.4} at 1e10"),
    }
}

fn nearly_exponential() -> Outcome {
    let m = model("doubleexp(gamma=1)", "pareto(a=1)", "det(0)");
    let n = 1e6f64;
    let r = -quad(&m, n) * n.ln() / n;
    Outcome {
        pass: (0.8..=1.25).contains(&r),
        detail: format!("-ln P · ln n / n = {r:.4} at 1e6 (band [0.8, 1.25])"),
    }
}

fn tandem_bounds() -> Outcome {
    let t = TandemModel::new(1.5, 1.0, 1.0).unwrap();
    let checks: Vec<_> = [1_000, 10_000, 100_000]
        .map(|n| bound_check(&t, n).unwrap())
        .into();
    let grid: Vec<f64> = (0..=6).map(|i| 2f64.powi(i)).collect();
    let cfg = SimConfig {
        seed: 6,
        sessions: 1_000_000,
        ..Default::default()
    };
    let counts = simulate_tandem_tail_counts(&t, &cfg, &grid, &[], 0).unwrap();
    let misses: Vec<f64> = counts
        .n_curve()
        .points
        .iter()
        .filter(|p| {
            let exact = ccdf_n_tandem(&t, p.arg as u64).unwrap().value;
            (p.log_p - exact).abs() > p.ci_halfwidth
        })
        .map(|p| p.arg)
        .collect();
    Outcome {
        pass: checks.iter().all(|c| c.inside) && misses.is_empty(),
        detail: format!(
            "n^1.5 P = {:.4?} in [{:.4}, {:.4}]; MC misses at {misses:?}",
            checks.iter().map(|c| c.scaled).collect::<Vec<_>>(),
            checks[0].lower,
            checks[0].upper
        ),
    }
}

fn alpha_15_model() -> ChannelModel {
    model("exp(rate=1.5)", "exp(rate=1)", "exp(rate=1)")
}

fn alpha_15_counts() -> TailCounts {
    let cfg = SimConfig {
        seed: 7,
        sessions: 10_000_000,
        ..Default::default()
    };
    simulate_tail_counts(
        &alpha_15_model(),
        &cfg,
        &quarter_decades(0, 40, true),
        &quarter_decades(0, 40, false),
        0,
    )
    .unwrap()
}

fn mc_oracle_coherence(counts: &TailCounts) -> Outcome {
    let m = alpha_15_model();
    let mut used = 0;
    let mut misses = Vec::new();
    for p in counts.n_curve().points {
        if p.n_exceed.unwrap_or(0) < 100 {
            continue;
        }
        used += 1;
        let exact = quad(&m, p.arg);
        if (p.log_p - exact).abs() > p.ci_halfwidth {
            misses.push((p.arg, (p.log_p - exact) / p.ci_halfwidth));
        }
    }
    Outcome {
        pass: used >= 3 && misses.is_empty(),
        detail: format!("{used} grid points; misses (n, err/ci) {misses:.2?}"),
    }
}

fn delay_asymptotics(counts: &TailCounts) -> Outcome {
    let curve = counts.t_curve();
    let Some(top) = curve
        .points
        .iter()
        .rfind(|p| p.n_exceed.unwrap_or(0) >= 200)
    else {
        return Outcome {
            pass: false,
            detail: "no grid point with 200 exceedances".into(),
        };
    };
    let phi = PhiSpec::power(1.5).unwrap();
    let class = classify(&phi).unwrap();
    let mean = alpha_15_model().mean_cycle().unwrap();
    let ratio = predict_log_ccdf_t(&class, &phi, top.arg, mean)
        .unwrap()
        .agreement(top.log_p);
    let slope = loglog_slope(&curve, top.arg / 100.0, top.arg);
    let slope_ok = matches!(&slope, Ok(f) if (-1.7..=-1.3).contains(&f.slope));
    Outcome {
        pass: (0.6..=1.6).contains(&ratio) && slope_ok,
        detail: format!(
            "t = {:.1}: ratio {ratio:.4}; slope {}",
            top.arg,
            match slope {
                Ok(f) => format!("{:.4} ± {:.4}", f.slope, f.stderr),
                Err(e) => e.to_string(),
            }
        ),
    }
}

fn weibull_balance() -> Outcome {
    let m = model("weibull(shape=0.5)", "weibull(shape=0.5)", "det(0)");
    let cfg = SimConfig {
        seed: 9,
        sessions: 1_000_000,
        ..Default::default()
    };
    let counts = simulate_tail_counts(&m, &cfg, &[1.0], &quarter_decades(0, 60, false), 0).unwrap();
    let mut used = 0;
    let mut worst: f64 = 0.0;
    for p in counts.t_curve().points {
        if p.n_exceed.unwrap_or(0) < 100 {
            continue;
        }
        used += 1;
        worst = worst.max(-p.log_p / p.arg.sqrt());
    }
    Outcome {
        pass: used > 0 && worst <= 2.5,
        detail: format!("{used} grid points; max -ln P/√t = {worst:.4}"),
    }
}

fn dist_catalog() -> Vec<TailFunction> {
    let table = Table::new("t", vec![(0.0, 0.0), (1.0, -0.3), (2.5, -2.0), (4.0, -7.0)]).unwrap();
    let mut c: Vec<TailFunction> = [
        "exp(rate=1.3)",
        "weibull(shape=0.5,scale=2)",
        "weibull(shape=2)",
        "pareto(a=1.5)",
        "halfnormal(sigma=1.5)",
        "powerlogexp(a=2,b=1.5,delta=0.7)",
        "lognormaltype(lambda=1,delta=2)",
        "doubleexp(gamma=1)",
        "exp(rate=1,shift=1)",
    ]
    .iter()
    .map(|s| TailFunction::parse(s).unwrap())
    .collect();
    c.push(TailFunction::tabulated(table));
    c
}

fn property_suites() -> Outcome {
    let mut failures = Vec::new();

    // dist: text and quantile round trips, sampler KS
    for (i, tf) in dist_catalog().into_iter().enumerate() {
        // in-memory tables have no file to re-read
        let textual = !matches!(tf.family(), retrans_core::dist::Family::Tabulated(_));
        if textual && TailFunction::parse(&tf.to_string()).ok().as_ref() != Some(&tf) {
            failures.push(format!("display round trip {tf}"));
        }
        for l in [-0.01, -1.0, -10.0, -100.0] {
            let x = tf.inv_log_ccdf(l);
            let back = tf.log_ccdf(x);
            if x.is_finite() && (back - l).abs() > 1e-8 * l.abs() {
                failures.push(format!("quantile round trip {tf} at {l}: {back}"));
            }
        }
        let mut rng = retrans_core::rng::session_rng(100 + i as u64, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| tf.sample(&mut rng)).collect();
        let d = ks_one_sample(&xs, |x| 1.0 - tf.ccdf(x));
        if d > ks_critical_1pct(xs.len()) {
            failures.push(format!("KS {tf}: {d:.5}"));
        }
    }

    // oracle: monotone in n, heavier than every exponential
    let m = alpha_15_model();
    let sub: Vec<f64> = (10..=30)
        .map(|k| 2f64.powi(k))
        .map(|n| 0.01 * n + quad(&m, n))
        .collect();
    if !sub.windows(2).all(|w| w[1] > w[0]) {
        failures.push("0.01 n + ln P[N>n] not increasing".into());
    }
    for (l, a) in [
        ("halfnormal(sigma=1)", "halfnormal(sigma=1.5)"),
        ("lognormaltype(lambda=1,delta=2)", "pareto(a=1)"),
        ("doubleexp(gamma=1)", "pareto(a=1)"),
        ("weibull(shape=0.5)", "weibull(shape=0.5)"),
    ] {
        let m = model(l, a, "det(0)");
        let vals: Vec<f64> = quarter_decades(0, 40, false)
            .iter()
            .map(|&n| quad(&m, n))
            .collect();
        if !vals.windows(2).all(|w| w[1] <= w[0]) {
            failures.push(format!("ccdf not monotone for L={l}, A={a}"));
        }
    }

    // asym: both corollaries as algebraic identities
    for (a, b, beta, delta) in [
        (1.0, 0.0, 1.0, 2.0),
        (2.5, -1.5, 0.7, 1.1),
        (0.3, 2.0, 3.0, 0.4),
    ] {
        let alpha: f64 = delta / beta;
        let phi = PhiSpec::Product(vec![
            PhiSpec::Const {
                c: f64::powf(beta, b) / a,
            },
            PhiSpec::LogFactor { b: -b },
            PhiSpec::Power { alpha },
        ]);
        let class = classify(&phi).unwrap();
        for n in [1e3, 1e9, 1e20] {
            let pred = predict_log_ccdf_n(&class, &phi, n).unwrap().log_p;
            let stated = f64::ln(a) + ln_gamma(alpha + 1.0) - b * f64::ln(beta) + b * n.ln().ln()
                - alpha * n.ln();
            if (pred - stated).abs() > 1e-10 * stated.abs() {
                failures.push(format!("exponential case a={a} b={b} n={n}"));
            }
        }
    }
    for (sa, sl) in [(1.0, 1.0), (2f64.sqrt(), 1.0), (0.5, 2.0)] {
        let alpha: f64 = sa * sa / (sl * sl);
        let pi = std::f64::consts::PI;
        let phi = PhiSpec::Product(vec![
            PhiSpec::Const {
                c: alpha.sqrt() * pi.powf((1.0 - alpha) / 2.0),
            },
            PhiSpec::LogFactor {
                b: (1.0 - alpha) / 2.0,
            },
            PhiSpec::Power { alpha },
        ]);
        let class = classify(&phi).unwrap();
        for n in [1e3, 1e9, 1e20] {
            let pred = predict_log_ccdf_n(&class, &phi, n).unwrap().log_p;
            let stated = ln_gamma(alpha + 1.0) - 0.5 * alpha.ln()
                + 0.5 * (alpha - 1.0) * (pi * n.ln()).ln()
                - alpha * n.ln();
            if (pred - stated).abs() > 1e-10 * stated.abs() {
                failures.push(format!("Gaussian case σA={sa} σL={sl} n={n}"));
            }
        }
    }

    // mc: mode equivalence and reproducibility
    let m = model("weibull(shape=2)", "exp(rate=1)", "exp(rate=2)");
    let run = |mode, seed, workers| {
        let cfg = SimConfig {
            seed,
            sessions: 100_000,
            workers,
            mode,
            ..Default::default()
        };
        simulate(&m, &cfg).unwrap()
    };
    let naive = run(Mode::NaiveLoop, 1, 1);
    let short = run(Mode::GeometricShortcut, 2, 1);
    let crit = ks_two_sample_critical_1pct(naive.len(), short.len());
    let ns = |v: &[retrans_core::SessionOutcome]| {
        v.iter().map(|o| o.n_attempts as f64).collect::<Vec<_>>()
    };
    let ts =
        |v: &[retrans_core::SessionOutcome]| v.iter().map(|o| o.total_time).collect::<Vec<_>>();
    let dn = ks_two_sample(&ns(&naive), &ns(&short));
    let dt = ks_two_sample(&ts(&naive), &ts(&short));
    if dn > crit || dt > crit {
        failures.push(format!("mode KS: N {dn:.5}, T {dt:.5}, critical {crit:.5}"));
    }
    if run(Mode::GeometricShortcut, 2, 1) != short || run(Mode::GeometricShortcut, 2, 3) != short {
        failures.push("same seed gave different sessions".into());
    }

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "dist, oracle, asym and mc suites clean".into()
        } else {
            failures.join("; ")
        },
    }
}

fn main() {
    let mut all_pass = true;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        all_pass &= o.pass;
        println!(
            "{} [{id}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "exact power law", &mut exact_power_law);
    report(2, "Gaussian case", &mut gaussian_case);
    report(3, "lognormal correction", &mut lognormal_correction);
    report(4, "Weibull regime", &mut weibull_regime);
    report(5, "nearly exponential", &mut nearly_exponential);
    report(6, "tandem lattice bounds", &mut tandem_bounds);
    let counts = alpha_15_counts();
    report(7, "MC/oracle coherence", &mut || {
        mc_oracle_coherence(&counts)
    });
    report(8, "delay asymptotics", &mut || delay_asymptotics(&counts));
    report(9, "Weibull balance", &mut weibull_balance);
    report(10, "property suites", &mut property_suites);
    if !all_pass {
        std::process::exit(1);
    }
}
