//! The insider's posterior over the remaining scenario at each jump.

use mcmarket::fixtures;
use mcmarket::insider::{posterior_scenario_weights, PosteriorOptions, Prefix};
use mcmarket::simulate::PathRecord;

fn main() -> mcmarket::Result<()> {
    let cases = [
        ("kh", fixtures::kh(), vec![0, 1, 2, 1], vec![0.2, 0.45, 0.8]),
        ("twostate", fixtures::twostate(), vec![0, 1, 0], vec![0.3, 0.55]),
    ];
    for (name, m, states, times) in cases {
        let p = PathRecord::from_parts(&m, states, times)?;
        let ell = p.terminal_log_prices();
        println!("{name}, L_T = {:.5}", ell[0]);
        for j in 0..=p.n_jumps() {
            let prefix = Prefix::at_jump(&p, j)?;
            let post = posterior_scenario_weights(&m, &prefix, ell, &PosteriorOptions::default())?;
            println!("  after {j} jumps ({:?}, dim {}):", post.mode, post.dim);
            for e in post.supported() {
                println!("    {:<12} {:.4} +- {:.4}", e.continuation.labels(&m), e.weight, e.std_error);
            }
        }
    }
    Ok(())
}
