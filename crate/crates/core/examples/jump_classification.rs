//! Classifies each jump of a path as determined by the terminal price or
//! not, and lists the scenarios whose k-th jump is determined.

use mcmarket::fixtures;
use mcmarket::insider::{classify, dk_sets, Prefix};
use mcmarket::scenario::Scenario;
use mcmarket::simulate::PathRecord;

fn main() -> mcmarket::Result<()> {
    let m = fixtures::twostate();
    let p = PathRecord::from_parts(&m, vec![0, 1, 0], vec![0.25, 0.7])?;
    let h = Scenario::new(p.states.clone())?;
    let ell = p.terminal_log_prices();
    for k in 1..=p.n_jumps() {
        let prefix = Prefix::at_jump(&p, k - 1)?;
        let c = classify(&m, &prefix, &h, ell)?;
        let b = c.bounds.unwrap();
        println!(
            "jump {k} at {:.3}: {:?}, bounds [{:.4}, {:.4}], dims {} -> {}, LP agrees: {}",
            p.jump_times[k - 1],
            c.mode,
            b.lower,
            b.upper,
            c.dim_before,
            c.dim_after,
            c.lp_agrees
        );
    }

    let d = dk_sets(&m, 0, 2, 4, None)?;
    let members: Vec<String> = d.members.iter().map(|h| h.labels(&m)).collect();
    println!("scenarios with a determined 2nd jump (n <= 4): {}", members.join(" "));
    Ok(())
}
