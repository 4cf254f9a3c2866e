//! The insider compensator of the next jump: predictable atoms plus an
//! absolutely continuous part.

use mcmarket::fixtures;
use mcmarket::insider::{insider_compensator_mixture, MixtureOptions, Prefix};
use mcmarket::simulate::PathRecord;

fn main() -> mcmarket::Result<()> {
    let cases = [
        ("twostate_pinned", fixtures::twostate_pinned(), vec![0, 1, 0], vec![0.3, 0.6], 1),
        ("kh", fixtures::kh(), vec![0, 1, 0], vec![0.3, 0.6], 0),
    ];
    for (name, m, states, times, j) in cases {
        let p = PathRecord::from_parts(&m, states, times)?;
        let prefix = Prefix::at_jump(&p, j)?;
        let mix = insider_compensator_mixture(&m, &prefix, p.terminal_log_prices(), &MixtureOptions::default())?;
        println!("{name}, next jump after t={:.2}:", mix.start);
        for a in &mix.accessible {
            println!("  atom at {:.4}: mass {:.4}, hazard {:.4}", a.time, a.mass, a.hazard);
        }
        let ac = &mix.inaccessible;
        println!("  continuous part: mass {:.4}", ac.mass);
        for i in (0..ac.density.len()).step_by(10) {
            println!(
                "    [{:.3}, {:.3}) density {:.3} intensity {:.3}",
                ac.edges[i],
                ac.edges[i + 1],
                ac.density[i],
                ac.intensity[i]
            );
        }
        println!("  no further jump: {:.4}", mix.no_jump_mass);
    }
    Ok(())
}
