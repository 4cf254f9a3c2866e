//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints its own PASS/FAIL line; exits non-zero if any
//! criterion fails.

use std::collections::HashMap;
use std::time::Instant;

use mcmarket::feasibility::{verify_certificate, TIME_TOL};
use mcmarket::fixtures;
use mcmarket::insider::{
    is_determined, is_determined_lp, predictable_bounds, BridgeCompensator, Prefix, PosteriorOptions,
};
use mcmarket::model::{validate_model, AssetConfig, IntensityOverride, MarketModel, ModelConfig};
use mcmarket::nflvr::{arbitrage_strategy, flvr_scan, FlvrReport, ScanOptions, Variant};
use mcmarket::noarb::{drift_system, na_solve, verify_martingale_measure};
use mcmarket::scenario::{
    dim_chain, enumerate_scenarios, prob_closed_form, prob_quadrature, scenario_prob, Scenario,
};
use mcmarket::simulate::{mc_expectations, replicate, simulate_path, simulate_with_rng, McEstimate, PathRecord, Start};
use rand::Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn build(cfg: &ModelConfig) -> MarketModel {
    validate_model(cfg).unwrap().model
}

fn simulate_many(m: &MarketModel, n: usize, seed: u64) -> Vec<PathRecord> {
    replicate(n, seed, |_, rng| simulate_with_rng(m, &Start::Model, rng).unwrap())
}

/// Up-moves of the cyclic embedding, `e -> e + 1 mod 3`.
fn kh_up_times(p: &PathRecord) -> Vec<f64> {
    p.states
        .windows(2)
        .zip(&p.jump_times)
        .filter(|(w, _)| w[1] == (w[0] + 1) % 3)
        .map(|(_, &t)| t)
        .collect()
}

fn kh_last_down(p: &PathRecord) -> f64 {
    p.states
        .windows(2)
        .zip(&p.jump_times)
        .filter(|(w, _)| w[1] != (w[0] + 1) % 3)
        .map(|(_, &t)| t)
        .next_back()
        .unwrap_or(0.0)
}

fn c1_compensated_counts() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, m) in [("twostate", fixtures::twostate()), ("kh", fixtures::kh())] {
        let pairs: Vec<(usize, usize)> = (0..m.n_states())
            .flat_map(|e| m.reachable(e).into_iter().map(move |k| (e, k)))
            .collect();
        let start = Instant::now();
        let est = mc_expectations(&m, &Start::Model, 100_000, 11, |p| {
            Ok(pairs.iter().map(|&(e, k)| p.compensated_count(&m, e, k)).collect())
        })
        .unwrap();
        let secs = start.elapsed().as_secs_f64();
        let worst = est.iter().map(|e| e.z_score(0.0).abs()).fold(0.0, f64::max);
        let ok = est.iter().all(|e| e.within(0.0, 3.0)) && secs < 30.0;
        pass &= ok;
        lines.push(format!("{name}: {} pairs, max |z| = {worst:.2}, {secs:.1}s", pairs.len()));
    }
    outcome(pass, lines.join("; "))
}

fn c2_measure_change() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, m) in [("twostate", fixtures::twostate()), ("kh", fixtures::kh())] {
        let over = na_solve(&m).unwrap().intensities.expect("fixture admits a martingale measure");
        let rep = verify_martingale_measure(&m, &over, &Start::Model, 100_000, 21).unwrap();
        pass &= rep.pass;
        lines.push(format!(
            "{name}: E[Z]={:.4} (SE {:.4}), z(S)={:.2}",
            rep.density.mean, rep.density.std_error, rep.assets[0].z_score
        ));
    }
    // Swapping the kh rates keeps equivalence but breaks the drift condition.
    let m = fixtures::kh();
    let broken = IntensityOverride::new(vec![
        vec![0.0, 1.1, 1.0],
        vec![1.0, 0.0, 1.1],
        vec![1.1, 1.0, 0.0],
    ])
    .unwrap();
    let rep = verify_martingale_measure(&m, &broken, &Start::Model, 100_000, 21).unwrap();
    let flagged = rep.density_pass && !rep.assets[0].pass && rep.assets[0].z_score.abs() > 3.0;
    pass &= flagged;
    lines.push(format!("broken kh override: z(S)={:.1} flagged={flagged}", rep.assets[0].z_score));
    outcome(pass, lines.join("; "))
}

fn c3_kh_witness() -> Outcome {
    let m = fixtures::kh();
    let sol = na_solve(&m).unwrap();
    let over = sol.intensities.unwrap();
    let residual = |rates: &dyn Fn(usize, usize) -> f64| -> f64 {
        (0..3)
            .map(|e| {
                let s: f64 = m.reachable(e).iter().map(|&f| m.gamma(0, e, f) * rates(e, f)).sum();
                (s + m.mu(0, e)).abs()
            })
            .fold(0.0, f64::max)
    };
    let r_witness = residual(&|e, f| over.rate(e, f));
    let r_point = residual(&|e, f| if f == (e + 1) % 3 { 1.0 } else { 1.1 });
    let pass = r_witness <= 1e-9 && r_point <= 1e-15;
    outcome(
        pass,
        format!("witness residual {r_witness:.1e}, (1, 1.1) residual {r_point:.1e}"),
    )
}

fn distinct_rate_model() -> MarketModel {
    let n = 5;
    let totals = [1.0, 2.5, 4.0, 5.5, 7.0];
    let mut lambda = vec![vec![0.0; n]; n];
    for (e, row) in lambda.iter_mut().enumerate() {
        for (f, x) in row.iter_mut().enumerate() {
            if f != e {
                *x = totals[e] / (n - 1) as f64;
            }
        }
    }
    build(&ModelConfig {
        states: (1..=n).map(|i| i.to_string()).collect(),
        lambda,
        r: vec![0.0; n],
        horizon: 1.0,
        initial_state: None,
        assets: vec![AssetConfig {
            name: "S".into(),
            s0: 1.0,
            mu: vec![0.0; n],
            beta: vec![vec![0.1; n]; n],
        }],
    })
}

fn c4_scenario_probabilities() -> Outcome {
    let mut lines = Vec::new();
    let m = distinct_rate_model();
    let mut max_diff: f64 = 0.0;
    let mut compared = 0;
    for h in enumerate_scenarios(&m, 0, 4) {
        if let Some(cf) = prob_closed_form(&m, &h, 1.0).unwrap() {
            let (q, _) = prob_quadrature(&m, &h, 1.0).unwrap();
            max_diff = max_diff.max((cf - q).abs());
            compared += 1;
        }
    }
    let mut pass = max_diff <= 1e-8 && compared > 0;
    lines.push(format!("closed form vs quadrature on {compared} scenarios: max diff {max_diff:.1e}"));

    for (name, m, n_max) in [("twostate", fixtures::twostate(), 4), ("kh", fixtures::kh(), 3)] {
        let n_paths = 100_000;
        let paths = simulate_many(&m, n_paths, 41);
        let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
        for p in &paths {
            *freq.entry(p.states.clone()).or_default() += 1;
        }
        let scenarios = enumerate_scenarios(&m, m.initial_state(), n_max);
        let mut worst: f64 = 0.0;
        let mut all_ok = true;
        let mut total = 0.0;
        for h in &scenarios {
            let pi = scenario_prob(&m, h, m.horizon()).unwrap().value;
            total += pi;
            let hits = *freq.get(h.states()).unwrap_or(&0) as f64 / n_paths as f64;
            let se = (pi * (1.0 - pi) / n_paths as f64).sqrt();
            let z = if se > 0.0 { (hits - pi) / se } else { 0.0 };
            worst = worst.max(z.abs());
            all_ok &= z.abs() <= 3.0;
        }
        let tail: Vec<f64> = paths
            .iter()
            .map(|p| if p.n_jumps() > n_max { 1.0 } else { 0.0 })
            .collect();
        let tail = McEstimate::from_samples(&tail);
        let sum_ok = tail.within(1.0 - total, 3.0);
        pass &= all_ok && sum_ok;
        lines.push(format!(
            "{name} n<={n_max}: max |z| {worst:.2}, sum Pi {total:.5} + tail {:.5} (z {:.2})",
            tail.mean,
            tail.z_score(1.0 - total)
        ));
    }
    outcome(pass, lines.join("; "))
}

fn c5_dim_chains() -> Outcome {
    let mut pass = true;
    let mut counts = Vec::new();
    let kh = fixtures::kh();
    let two = fixtures::twostate();
    let mut n_kh = 0;
    for h in enumerate_scenarios(&kh, 0, 6) {
        let c = dim_chain(&kh, &h).unwrap();
        pass &= c.iter().all(|&d| d == 0);
        n_kh += 1;
    }
    counts.push(format!("kh: {n_kh} chains all zero"));
    let mut n_two = 0;
    for h in enumerate_scenarios(&two, 0, 6) {
        let c = dim_chain(&two, &h).unwrap();
        let mut expected = vec![1; h.n()];
        expected.push(0);
        pass &= c == expected;
        n_two += 1;
    }
    counts.push(format!("twostate: {n_two} chains of the form (1, ..., 1, 0)"));
    outcome(pass, counts.join("; "))
}

fn random_model<R: Rng>(rng: &mut R) -> MarketModel {
    let n = rng.random_range(2..=4);
    let m = rng.random_range(1..=3);
    let mut lambda = vec![vec![0.0; n]; n];
    for e in 0..n {
        for f in 0..n {
            if f != e && rng.random::<f64>() < 0.8 {
                lambda[e][f] = rng.random_range(0.5..2.0);
            }
        }
        if lambda[e].iter().all(|x| *x == 0.0) {
            lambda[e][(e + 1) % n] = 1.0;
        }
    }
    // Small integer drifts make coincident directions (and dimension drops) common.
    let assets = (0..m)
        .map(|i| AssetConfig {
            name: format!("S{i}"),
            s0: 1.0,
            mu: (0..n).map(|_| rng.random_range(-2..=2) as f64 * 0.1).collect(),
            beta: (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(-0.3..0.3)).collect())
                .collect(),
        })
        .collect();
    build(&ModelConfig {
        states: (0..n).map(|i| format!("s{i}")).collect(),
        lambda,
        r: vec![0.0; n],
        horizon: 1.0,
        initial_state: None,
        assets,
    })
}

fn c6_rank_vs_lp() -> Outcome {
    let mut rng = mcmarket::simulate::path_rng(61, 0);
    let mut instances = 0;
    let mut disagreements = 0;
    let mut determined = 0;
    let mut unreachable = 0;
    while instances < 1000 {
        let m = random_model(&mut rng);
        let n = rng.random_range(1..=5);
        let mut states = vec![m.initial_state()];
        for _ in 0..n {
            let next = m.reachable(*states.last().unwrap());
            states.push(next[rng.random_range(0..next.len())]);
        }
        let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        times.sort_by(f64::total_cmp);
        let Ok(path) = PathRecord::from_parts(&m, states.clone(), times) else {
            continue;
        };
        let h = Scenario::new(states).unwrap();
        let mut ell = path.terminal_log_prices().to_vec();
        if rng.random::<f64>() < 0.2 {
            for l in ell.iter_mut() {
                *l += rng.random_range(-0.05..0.05);
            }
        }
        let k = rng.random_range(1..=n);
        let prefix = Prefix::at_jump(&path, k - 1).unwrap();
        let rank = is_determined(&m, &h, k, &ell, prefix.remaining(), &prefix.log_prices).unwrap();
        let lp = is_determined_lp(&m, &h, k, &ell, prefix.remaining(), &prefix.log_prices).unwrap();
        let rank_view = rank.reachable.then_some(rank.determined);
        if rank_view != lp {
            disagreements += 1;
        }
        determined += usize::from(rank_view == Some(true));
        unreachable += usize::from(rank_view.is_none());
        instances += 1;
    }
    outcome(
        disagreements == 0,
        format!("{instances} instances, {disagreements} disagreements ({determined} determined, {unreachable} unreachable)"),
    )
}

fn c7_bracketing() -> Outcome {
    let m = fixtures::twostate();
    let paths = simulate_many(&m, 10_000, 71);
    let mut jumps = 0;
    let mut determined = 0;
    let mut violations = 0;
    for p in &paths {
        let h = Scenario::new(p.states.clone()).unwrap();
        let ell = p.terminal_log_prices();
        for k in 1..=p.n_jumps() {
            let prefix = Prefix::at_jump(p, k - 1).unwrap();
            let t = p.jump_times[k - 1];
            let ok = match predictable_bounds(&m, &prefix, &h, ell).unwrap() {
                None => false,
                Some(b) => {
                    determined += usize::from(b.determined);
                    b.lower - 1e-9 <= t && t <= b.upper + 1e-9 && (!b.determined || (b.upper - t).abs() <= 1e-9)
                }
            };
            jumps += 1;
            violations += usize::from(!ok);
        }
    }
    outcome(
        violations == 0,
        format!("{} paths, {jumps} jumps ({determined} determined), {violations} violations", paths.len()),
    )
}

fn c8_bridge_compensator() -> Outcome {
    let m = fixtures::kh();
    let horizon = m.horizon();
    let target = 100_000;
    let mut accepted: HashMap<usize, Vec<Vec<f64>>> = HashMap::new();
    let mut batch = 0u64;
    while (1..=3).any(|n| accepted.get(&n).map_or(0, |v| v.len()) < target) {
        for p in simulate_many(&m, 500_000, 8_000 + batch) {
            let ups = kh_up_times(&p);
            let slot = accepted.entry(ups.len()).or_default();
            if (1..=3).contains(&ups.len()) && slot.len() < target {
                slot.push(ups);
            }
        }
        batch += 1;
    }
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for n in 1..=3 {
        let bridge = BridgeCompensator::new(1.0, 1.0, horizon, n, 0).unwrap();
        for t in [0.25, 0.5, 0.75] {
            let xs: Vec<f64> = accepted[&n].iter().map(|ups| bridge.integrated(n, ups, t).unwrap()).collect();
            let est = McEstimate::from_samples(&xs);
            let expected = n as f64 * t / horizon;
            worst = worst.max(est.z_score(expected).abs());
            pass &= est.within(expected, 3.0);
        }
    }
    outcome(pass, format!("n in 1..=3, t in (.25, .5, .75), {target} conditioned paths each: max |z| {worst:.2}"))
}

fn scan(m: &MarketModel, p: &PathRecord, seed: u64) -> FlvrReport {
    let opts = ScanOptions {
        posterior: PosteriorOptions {
            seed,
            ..PosteriorOptions::default()
        },
    };
    flvr_scan(m, p, p.terminal_log_prices(), &opts).unwrap()
}

fn certificates_ok(m: &MarketModel, r: &FlvrReport) -> bool {
    let (n, strict) = r.verify_certificates(m).unwrap();
    n == strict
}

fn c9_flvr_time() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;

    let kh = fixtures::kh();
    let paths = simulate_many(&kh, 300, 91);
    let mut oracle_ok = 0;
    let mut last_jump_cases = 0;
    let mut last_jump_ok = 0;
    let mut certs_ok = true;
    for (i, p) in paths.iter().enumerate() {
        let r = scan(&kh, p, i as u64);
        let expected = kh_last_down(p);
        oracle_ok += usize::from((r.tau_flvr - expected).abs() <= TIME_TOL);
        let last = p.jump_times.last().copied().unwrap_or(0.0);
        if expected == last {
            last_jump_cases += 1;
            last_jump_ok += usize::from((r.tau_flvr - last).abs() <= TIME_TOL);
        }
        certs_ok &= certificates_ok(&kh, &r);
    }
    pass &= oracle_ok == paths.len() && last_jump_ok == last_jump_cases && certs_ok;
    lines.push(format!(
        "kh: tau = last down-jump on {oracle_ok}/{}; = last jump on {last_jump_ok}/{last_jump_cases} paths ending on a down-jump",
        paths.len()
    ));

    let two = fixtures::twostate();
    let paths = simulate_many(&two, 100, 92);
    let mut ambiguous = 0;
    let mut feasible = 0;
    let mut feasible_ok = 0;
    for (i, p) in paths.iter().enumerate() {
        let r = scan(&two, p, i as u64);
        certs_ok &= certificates_ok(&two, &r);
        if r.steps.first().is_some_and(|s| s.posterior.supported().count() >= 2) {
            ambiguous += 1;
            if r.steps.iter().all(|s| s.check.all_feasible()) {
                feasible += 1;
                feasible_ok += usize::from(r.tau_flvr == r.horizon);
            }
        }
    }
    pass &= feasible_ok == feasible && certs_ok;
    lines.push(format!(
        "twostate: {ambiguous}/{} ambiguous, {feasible} with all systems feasible, {feasible_ok} of those at T",
        paths.len()
    ));

    let sym = fixtures::kh_symmetric();
    let paths = simulate_many(&sym, 100, 93);
    let mut at_t = 0;
    for (i, p) in paths.iter().enumerate() {
        let r = scan(&sym, p, i as u64);
        certs_ok &= certificates_ok(&sym, &r);
        at_t += usize::from(r.tau_flvr == r.horizon && r.no_arbitrage());
    }
    pass &= at_t == paths.len() && certs_ok;
    lines.push(format!("kh_symmetric: tau = T on {at_t}/{}; certificates strict: {certs_ok}", paths.len()));
    outcome(pass, lines.join("; "))
}

fn c10_strategies() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, m, seed) in [("kh", fixtures::kh(), 101), ("twostate_pinned", fixtures::twostate_pinned(), 102)] {
        let paths = simulate_many(&m, 100, seed);
        let mut windows = 0;
        let mut positive = 0;
        for (i, p) in paths.iter().enumerate() {
            let r = scan(&m, p, i as u64);
            if let Some((w, xi)) = r.drift_window() {
                windows += 1;
                let run = arbitrage_strategy(&m, &r, &w, &xi, Variant::Inaccessible, 200, i as u64).unwrap();
                positive += usize::from(run.fraction_positive == 1.0 && run.floor > 0.0);
            }
        }
        pass &= windows > 0 && positive == windows;
        lines.push(format!("{name}: inaccessible P&L > 0 on all draws in {positive}/{windows} windows"));
    }

    let m = fixtures::twostate_pinned();
    let eps = [1e-2, 5e-3, 2.5e-3];
    let mut tested = 0;
    let mut monotone = 0;
    let mut skipped = 0;
    for (i, p) in simulate_many(&m, 200, 103).iter().enumerate() {
        let r = scan(&m, p, i as u64);
        let Some((w, xi)) = r.homogeneous_window() else { continue };
        let sys = drift_system(&m, w.prefix.state(), &w.targets, true).unwrap();
        assert!(verify_certificate(&sys, &xi).unwrap());
        if w.predictable_time.unwrap() - eps[0] <= w.prefix.time {
            skipped += 1;
            continue;
        }
        let floors: Vec<f64> = eps
            .iter()
            .map(|&e| {
                arbitrage_strategy(&m, &r, &w, &xi, Variant::Accessible { eps: Some(e) }, 200, i as u64)
                    .unwrap()
                    .floor
            })
            .collect();
        let d1 = floors[1] - floors[0];
        let d2 = floors[2] - floors[1];
        tested += 1;
        monotone += usize::from(d1 > 0.0 && d2 > 0.0 && (d1 - 2.0 * d2).abs() <= 1e-12);
    }
    pass &= tested > 0 && monotone == tested;
    lines.push(format!(
        "accessible floors rise linearly as eps shrinks on {monotone}/{tested} windows ({skipped} too short)"
    ));
    outcome(pass, lines.join("; "))
}

fn main() {
    // Quick sanity that simulation is deterministic before spending minutes on it.
    let m = fixtures::kh();
    assert_eq!(simulate_path(&m, &Start::Model, 5).unwrap(), simulate_path(&m, &Start::Model, 5).unwrap());

    let criteria: [Criterion; 10] = [
        ("compensated counts are martingales", c1_compensated_counts),
        ("measure change", c2_measure_change),
        ("kh drift condition", c3_kh_witness),
        ("scenario probabilities", c4_scenario_probabilities),
        ("dimension chains", c5_dim_chains),
        ("rank test vs LP test", c6_rank_vs_lp),
        ("jump-time bracketing", c7_bracketing),
        ("bridge compensator", c8_bridge_compensator),
        ("FLVR time", c9_flvr_time),
        ("arbitrage strategies", c10_strategies),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {}: {name} [{:.1}s] {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
