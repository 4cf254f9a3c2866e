//! Checks both no-arbitrage conditions at every jump of a path and reports
//! the first time they fail.

use mcmarket::fixtures;
use mcmarket::nflvr::{flvr_scan, ScanOptions};
use mcmarket::simulate::PathRecord;

fn main() -> mcmarket::Result<()> {
    let cases = [
        ("kh", fixtures::kh(), vec![0, 1, 0, 1], vec![0.2, 0.5, 0.8]),
        ("kh_symmetric", fixtures::kh_symmetric(), vec![0, 1, 0, 1], vec![0.2, 0.5, 0.8]),
        ("twostate_pinned", fixtures::twostate_pinned(), vec![0, 1, 0], vec![0.3, 0.6]),
    ];
    for (name, m, states, times) in cases {
        let p = PathRecord::from_parts(&m, states, times)?;
        let r = flvr_scan(&m, &p, p.terminal_log_prices(), &ScanOptions::default())?;
        println!("{name}:");
        for s in &r.steps {
            let acc: Vec<String> = s
                .check
                .condition2
                .iter()
                .map(|c| format!("{:.3}:{:?}", c.time, c.solution.status))
                .collect();
            println!(
                "  step {} at {:.2}: inaccessible {:?} -> {:?}; accessible [{}]",
                s.k,
                s.prefix.time,
                s.sets.inaccessible,
                s.check.condition1.status,
                acc.join(", ")
            );
        }
        println!(
            "  tau' = {:?}, tau'' = {:?}, tau_FLVR = {}",
            r.tau_prime, r.tau_second, r.tau_flvr
        );
    }
    Ok(())
}
