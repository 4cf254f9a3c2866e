//! Simulates the kh market and checks that compensated jump counts have
//! mean zero.

use mcmarket::fixtures;
use mcmarket::simulate::{mc_expectations, simulate_path, Start};

fn main() -> mcmarket::Result<()> {
    let m = fixtures::kh();
    let p = simulate_path(&m, &Start::Model, 7)?;
    println!("path with {} jumps", p.n_jumps());
    for (k, t) in p.jump_times.iter().enumerate() {
        println!(
            "  t={t:.4}  {} -> {}  L={:.5}",
            m.label(p.states[k]),
            m.label(p.states[k + 1]),
            p.log_prices_after_jump(k + 1)[0]
        );
    }
    println!("  terminal L_T = {:.5}", p.terminal_log_prices()[0]);

    let pairs: Vec<(usize, usize)> = (0..m.n_states())
        .flat_map(|e| m.reachable(e).into_iter().map(move |f| (e, f)))
        .collect();
    let est = mc_expectations(&m, &Start::Model, 50_000, 1, |p| {
        Ok(pairs.iter().map(|&(e, f)| p.compensated_count(&m, e, f)).collect())
    })?;
    for ((e, f), x) in pairs.iter().zip(&est) {
        println!(
            "E[N^{e}{f}_T - compensator] = {:+.5} +- {:.5}",
            x.mean, x.std_error
        );
    }
    Ok(())
}
