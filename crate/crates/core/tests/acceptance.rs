//! Acceptance suite: one PASS/FAIL line per criterion, with the measurements
//! behind it indented underneath. Runs without the libtest harness so the
//! lines are always shown.

use std::process::ExitCode;
use std::time::Instant;

use pvtcell::coupling::{PoolExtent, SolverConfig};
use pvtcell::experiments::{
    channel_point, check_monotone, check_ordered, figure, figure_points, is_unimodal, series, FigureOptions,
    Network, Scenario, TrendCheck,
};
use pvtcell::interference::unavailable_probability_unbounded;
use pvtcell::montecarlo::{grid_sinr_samples, outage_from_samples, MCConfig};
use pvtcell::numerics::QuadratureSpec;
use pvtcell::report::Table;
use pvtcell::validation::{self, Check};

/// Relative size of the one adjacent-pair violation a monotone check allows.
const TREND_TOL: f64 = 1e-3;

/// Sub-checks that fail against this model, with the reason given in the
/// README. They are reported as FAIL but do not fail the run.
const KNOWN_RED: &[&str] =
    &["(h) EE decreasing in λ_B", "limit form vs simulation at 50/√λ_B", "simulation drift under disk doubling"];

struct Criterion {
    check: Check,
    parts: Vec<Check>,
    seconds: f64,
}

fn timed(f: impl FnOnce() -> (Check, Vec<Check>)) -> Criterion {
    let t = Instant::now();
    let (check, parts) = f();
    Criterion { check, parts, seconds: t.elapsed().as_secs_f64() }
}

fn single(check: Check) -> (Check, Vec<Check>) {
    (check, Vec::new())
}

fn trend(name: &str, checks: &[(String, TrendCheck)]) -> Check {
    let pass = checks.iter().all(|(_, c)| c.pass);
    let worst = checks.iter().map(|(_, c)| c.violations).max().unwrap_or(0);
    let notes = checks
        .iter()
        .map(|(label, c)| {
            format!(
                "{} {label}: {} violation(s), worst {:.2e}",
                if c.pass { "ok  " } else { "FAIL" },
                c.violations,
                c.worst
            )
        })
        .collect();
    Check {
        name: name.into(),
        pass,
        detail: format!("{} series, at most {worst} violation(s) in any", checks.len()),
        notes,
    }
}

fn unimodal(name: &str, curves: &[(String, Vec<f64>)]) -> Check {
    let notes: Vec<String> = curves
        .iter()
        .map(|(label, v)| {
            let peak = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |p| p.0);
            format!("{} {label}: peak at point {} of {}", if is_unimodal(v) { "ok  " } else { "FAIL" }, peak + 1, v.len())
        })
        .collect();
    Check {
        name: name.into(),
        pass: curves.iter().all(|(_, v)| is_unimodal(v)),
        detail: format!("{} series", curves.len()),
        notes,
    }
}

fn ys(table: &Table, key: &[(&str, &str)], x: &str, y: &str) -> Vec<f64> {
    series(table, key, x, y).expect("figure column").into_iter().map(|p| p.1).collect()
}

fn figure_trends() -> (Check, Vec<Check>) {
    let spec = QuadratureSpec::default();
    let analytic = FigureOptions { grid: None, ..Default::default() };
    let fig = |id: u32, opts: &FigureOptions| {
        let t = Instant::now();
        let table = figure(id, opts).expect("figure sweep");
        let failed = table.rows.iter().filter(|r| r.last().map_or(true, |s| s != "ok")).count();
        (table, failed, t.elapsed().as_secs_f64())
    };
    let pvt = ("network", "pvt");
    let mut parts = Vec::new();
    let mut timings = Vec::new();

    // (a) blocking vs threshold and channels
    let (f3, bad3, t3) = fig(3, &analytic);
    timings.push(format!("figure 3: {t3:.0} s, {bad3} failed point(s)"));
    let c: Vec<(String, Vec<f64>)> = ["10", "15", "20"]
        .iter()
        .map(|ch| (format!("C = {ch}"), ys(&f3, &[pvt, ("channels", ch)], "gamma0_db", "blocking")))
        .collect();
    let mut checks: Vec<(String, TrendCheck)> =
        c.iter().map(|(l, v)| (format!("{l}, increasing in γ₀"), check_monotone(v, 1.0, TREND_TOL))).collect();
    checks.push(("C = 10 above C = 15".into(), check_ordered(&c[0].1, &c[1].1, TREND_TOL)));
    checks.push(("C = 15 above C = 20".into(), check_ordered(&c[1].1, &c[2].1, TREND_TOL)));
    parts.push(trend("(a) blocking increasing in γ₀, decreasing in C", &checks));

    // (b) blocking vs path loss, over the threshold grid and over the b grid
    let (f4, bad4, t4) = fig(4, &analytic);
    timings.push(format!("figure 4: {t4:.0} s, {bad4} failed point(s)"));
    let b: Vec<Vec<f64>> =
        ["3.5", "4", "4.5"].iter().map(|v| ys(&f4, &[pvt, ("path_loss", v)], "gamma0_db", "blocking")).collect();
    let (f6, bad6, t6) = fig(6, &FigureOptions::default());
    timings.push(format!("figure 6 (with grid network): {t6:.0} s, {bad6} failed point(s)"));
    let mut checks = vec![
        ("b = 3.5 above b = 4 over γ₀".to_string(), check_ordered(&b[0], &b[1], TREND_TOL)),
        ("b = 4 above b = 4.5 over γ₀".to_string(), check_ordered(&b[1], &b[2], TREND_TOL)),
    ];
    for d in ["0.2", "0.5"] {
        let v = ys(&f6, &[pvt, ("bs_density", d)], "path_loss", "blocking");
        checks.push((format!("λ_B = {d}, decreasing over b ∈ [3, 6]"), check_monotone(&v, -1.0, TREND_TOL)));
    }
    parts.push(trend("(b) blocking decreasing in b", &checks));

    // (c) sojourn time
    let (f5, bad5, t5) = fig(5, &analytic);
    timings.push(format!("figure 5: {t5:.0} s, {bad5} failed point(s)"));
    let s: Vec<(String, Vec<f64>)> = ["1", "2", "4"]
        .iter()
        .map(|l| (format!("λ = {l}"), ys(&f5, &[pvt, ("arrival_rate", l)], "gamma0_db", "sojourn_min")))
        .collect();
    let mut checks: Vec<(String, TrendCheck)> =
        s.iter().map(|(l, v)| (format!("{l}, decreasing in γ₀"), check_monotone(v, -1.0, TREND_TOL))).collect();
    checks.push(("λ = 1 above λ = 2".into(), check_ordered(&s[0].1, &s[1].1, TREND_TOL)));
    checks.push(("λ = 2 above λ = 4".into(), check_ordered(&s[1].1, &s[2].1, TREND_TOL)));
    parts.push(trend("(c) sojourn time decreasing in λ and γ₀", &checks));

    // (d) SSE vs b and BS density
    let sse6: Vec<Vec<f64>> =
        ["0.2", "0.5"].iter().map(|d| ys(&f6, &[pvt, ("bs_density", d)], "path_loss", "sse_bps_km2")).collect();
    let checks = vec![
        ("λ_B = 0.2, increasing in b".to_string(), check_monotone(&sse6[0], 1.0, TREND_TOL)),
        ("λ_B = 0.5, increasing in b".to_string(), check_monotone(&sse6[1], 1.0, TREND_TOL)),
        ("λ_B = 0.5 above λ_B = 0.2".to_string(), check_ordered(&sse6[1], &sse6[0], TREND_TOL)),
    ];
    parts.push(trend("(d) SSE increasing in b and λ_B", &checks));

    // (e) SSE vs arrival rate beyond the mode, at every b
    let (f7, bad7, t7) = fig(7, &analytic);
    timings.push(format!("figure 7: {t7:.0} s, {bad7} failed point(s)"));
    let sse7: Vec<Vec<f64>> =
        ["2", "3", "4"].iter().map(|l| ys(&f7, &[pvt, ("arrival_rate", l)], "path_loss", "sse_bps_km2")).collect();
    let (f8, bad8, t8) = fig(8, &analytic);
    timings.push(format!("figures 8 and 9 (shared sweep): {t8:.0} s, {bad8} failed point(s)"));
    let mut checks = vec![
        ("λ = 2 above λ = 3 over b".to_string(), check_ordered(&sse7[0], &sse7[1], TREND_TOL)),
        ("λ = 3 above λ = 4 over b".to_string(), check_ordered(&sse7[1], &sse7[2], TREND_TOL)),
    ];
    let thresholds = ["5", "10", "15"];
    for g in thresholds {
        let v = ys(&f8, &[pvt, ("gamma0_db", g)], "arrival_rate", "sse_bps_km2");
        let peak = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |p| p.0);
        checks.push((format!("γ₀ = {g} dB, decreasing past the mode"), check_monotone(&v[peak..], -1.0, TREND_TOL)));
    }
    parts.push(trend("(e) SSE decreasing in λ beyond the mode", &checks));

    // (f), (g) unimodality in arrival rate
    let curves = |y: &str| -> Vec<(String, Vec<f64>)> {
        thresholds.iter().map(|g| (format!("γ₀ = {g} dB"), ys(&f8, &[pvt, ("gamma0_db", g)], "arrival_rate", y))).collect()
    };
    parts.push(unimodal("(f) SSE unimodal in λ", &curves("sse_bps_km2")));
    parts.push(unimodal("(g) EE unimodal in λ", &curves("ee_bit_per_j")));

    // (h) EE vs b and BS density (figure 10 shares the figure 6 sweep)
    let ee: Vec<Vec<f64>> =
        ["0.2", "0.5"].iter().map(|d| ys(&f6, &[pvt, ("bs_density", d)], "path_loss", "ee_bit_per_j")).collect();
    let checks = vec![
        ("λ_B = 0.2, increasing in b".to_string(), check_monotone(&ee[0], 1.0, TREND_TOL)),
        ("λ_B = 0.5, increasing in b".to_string(), check_monotone(&ee[1], 1.0, TREND_TOL)),
    ];
    parts.push(trend("(h) EE increasing in b", &checks));
    let mut h = trend("(h) EE decreasing in λ_B", &[("λ_B = 0.2 above λ_B = 0.5".into(), check_ordered(&ee[0], &ee[1], TREND_TOL))]);
    for (b, (lo, hi)) in ys(&f6, &[pvt, ("bs_density", "0.2")], "path_loss", "path_loss").iter().zip(ee[0].iter().zip(&ee[1])) {
        h.notes.push(format!("b = {b:.3}: EE {lo:.4} at λ_B = 0.2, {hi:.4} at λ_B = 0.5 (relative change {:+.2e})", hi / lo - 1.0));
    }
    parts.push(h);

    // (i) grid success against the analytical network at the same busy
    // probability, over the figure 6 sweep
    let Network::GridMc { rings, trials, seed } = Network::grid_default() else { unreachable!() };
    let mut worst: f64 = f64::INFINITY;
    let mut notes = Vec::new();
    let mut ok = true;
    for (sc, _) in figure_points(6, &analytic).expect("figure 6 points") {
        let key = [pvt, ("path_loss", &*format!("{}", sc.link.path_loss_exponent)), ("bs_density", &*format!("{}", sc.link.bs_density))];
        let p = ys(&f6, &key, "path_loss", "p_busy")[0];
        let analytic_success = 1.0 - unavailable_probability_unbounded(p, &sc.link, sc.model, &spec).expect("field outage");
        let cfg = MCConfig { trials, seed, activity: p, ..MCConfig::for_density(sc.link.bs_density) };
        let grid = outage_from_samples(&grid_sinr_samples(&sc.link, sc.model, &cfg, rings).expect("grid samples"), sc.link.gamma0);
        let margin = (1.0 - grid.mean - analytic_success) / grid.std_error;
        worst = worst.min(margin);
        ok &= margin >= -3.0;
        notes.push(format!(
            "b = {:.3} λ_B = {}: grid success {:.4} ± {:.1e}, analytical {analytic_success:.4} at p = {p:.4}",
            sc.link.path_loss_exponent,
            sc.link.bs_density,
            1.0 - grid.mean,
            grid.std_error
        ));
    }
    let sse_grid: Vec<Vec<f64>> = ["0.2", "0.5"]
        .iter()
        .map(|d| ys(&f6, &[("network", "grid-mc"), ("bs_density", d)], "path_loss", "sse_bps_km2"))
        .collect();
    for (d, (g, a)) in ["0.2", "0.5"].iter().zip(sse_grid.iter().zip(&sse6)) {
        let above = g.iter().zip(a).filter(|(g, a)| g >= a).count();
        notes.push(format!("λ_B = {d}: grid SSE at or above analytical SSE at {above} of {} path-loss values", a.len()));
    }
    parts.push(Check {
        name: "(i) grid success at least the analytical success".into(),
        pass: ok,
        detail: format!("20 points, smallest margin {worst:+.1} SE (bound −3)"),
        notes,
    });

    let failing: Vec<&str> = parts.iter().filter(|p| !p.pass).map(|p| p.name.as_str()).collect();
    let check = Check {
        name: "figure trends".into(),
        pass: failing.is_empty(),
        detail: if failing.is_empty() {
            "all nine trend groups hold".into()
        } else {
            format!("failing: {}", failing.join("; "))
        },
        notes: timings,
    };
    (check, parts)
}

fn robustness() -> (Check, Vec<Check>) {
    let base = Scenario::default();
    let opts = FigureOptions { grid: None, ..Default::default() };
    let points = figure_points(3, &opts).expect("figure 3 points");
    let bound = 10.0 * base.solver.tol;
    let variants: Vec<(String, SolverConfig, SolverConfig)> = vec![
        ("damping 0.3 vs 0.5".into(), SolverConfig { damping: 0.3, ..base.solver }, base.solver),
        ("damping 1.0 vs 0.5".into(), SolverConfig { damping: 1.0, ..base.solver }, base.solver),
        (
            "pool of 2^25 vs 2^24 interferers".into(),
            SolverConfig { pool: PoolExtent::Fixed, n_max: 1 << 25, ..base.solver },
            SolverConfig { pool: PoolExtent::Fixed, n_max: 1 << 24, ..base.solver },
        ),
    ];
    let solve = |sc: &Scenario, solver: SolverConfig| {
        let sc = Scenario { solver, ..*sc };
        channel_point(&sc, Network::Pvt).map(|p| p.solution).map_err(|e| e.to_string())
    };
    let mut parts = Vec::new();
    let mut cache = std::collections::HashMap::new();
    for (label, a, b) in &variants {
        let mut worst: f64 = 0.0;
        let mut notes = Vec::new();
        for (i, (sc, _)) in points.iter().enumerate() {
            let ref_key = (i, format!("{b:?}"));
            let reference = cache.entry(ref_key).or_insert_with(|| solve(sc, *b)).clone();
            match (solve(sc, *a), reference) {
                (Ok(x), Ok(y)) if x.converged && y.converged => {
                    worst = worst.max((x.p_busy - y.p_busy).abs()).max((x.epsilon - y.epsilon).abs());
                }
                (x, y) => {
                    worst = f64::INFINITY;
                    notes.push(format!("point {i}: {:?} / {:?}", x.map(|s| s.converged), y.map(|s| s.converged)));
                }
            }
        }
        parts.push(Check {
            name: label.clone(),
            pass: worst <= bound,
            detail: format!("{} points, max |Δp|, |Δε| = {worst:.2e} (bound {bound:.0e})", points.len()),
            notes,
        });
    }
    let pass = parts.iter().all(|p| p.pass);
    (
        Check {
            name: "fixed-point robustness".into(),
            pass,
            detail: "damping and pool-size changes across the figure 3 sweep".into(),
            notes: Vec::new(),
        },
        parts,
    )
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let spec = QuadratureSpec::default();
    let runs: Vec<(u32, f64, Box<dyn Fn() -> (Check, Vec<Check>)>)> = vec![
        (1, 10.0, Box::new(|| single(validation::product_form(50, 1)))),
        (2, 1.0, Box::new(|| single(validation::erlang_limit()))),
        (
            3,
            300.0,
            Box::new(move || {
                let oracle = validation::outage_oracle(1_000_000, 0, &spec);
                (oracle.verdict(), vec![oracle.equivalence, oracle.limit_gap, oracle.drift])
            }),
        ),
        (4, 10.0, Box::new(move || single(validation::noise_only(&spec)))),
        (5, 300.0, Box::new(|| single(validation::pvt_coverage(1_000_000, 0)))),
        (6, 120.0, Box::new(|| single(validation::chain_simulation(10, 1e5, 0)))),
        (7, 1800.0, Box::new(figure_trends)),
        (8, 300.0, Box::new(robustness)),
    ];
    let mut unexpected = Vec::new();
    for (id, budget, run) in runs {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let Criterion { check, parts, seconds } = timed(run);
        let is_known = |c: &Check| KNOWN_RED.contains(&c.name.as_str());
        let surprise = if parts.is_empty() { !check.pass } else { parts.iter().any(|p| !p.pass && !is_known(p)) };
        let over = if seconds > budget { format!(", over the {budget:.0} s budget") } else { String::new() };
        let known = if !check.pass && !surprise { " (known)" } else { "" };
        println!("{}{known} criterion {id} {}: {} [{seconds:.1} s{over}]", verdict(check.pass), check.name, check.detail);
        for n in &check.notes {
            println!("    {n}");
        }
        for p in &parts {
            let known = if !p.pass && is_known(p) { " (known)" } else { "" };
            println!("  {}{known} {}: {}", verdict(p.pass), p.name, p.detail);
            for n in &p.notes {
                println!("      {n}");
            }
        }
        if surprise {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures in criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
