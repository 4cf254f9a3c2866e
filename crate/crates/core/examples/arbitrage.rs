//! Trades the certificate of a failed condition and reports the P&L
//! over the insider's conditional law.

use mcmarket::fixtures;
use mcmarket::nflvr::{arbitrage_strategy, flvr_scan, ScanOptions, Variant};
use mcmarket::simulate::PathRecord;

fn main() -> mcmarket::Result<()> {
    let m = fixtures::kh();
    let p = PathRecord::from_parts(&m, vec![0, 2, 0, 1], vec![0.1, 0.4, 0.7])?;
    let r = flvr_scan(&m, &p, p.terminal_log_prices(), &ScanOptions::default())?;
    if let Some((w, xi)) = r.drift_window() {
        let run = arbitrage_strategy(&m, &r, &w, &xi, Variant::Inaccessible, 1000, 1)?;
        println!(
            "kh, enter at {:.2} with xi = {:?}: floor {:.5}, mean {:.5}, positive {:.3}",
            run.entry, run.xi, run.floor, run.mean, run.fraction_positive
        );
    }

    let m = fixtures::twostate_pinned();
    let p = PathRecord::from_parts(&m, vec![0, 1, 0], vec![0.3, 0.6])?;
    let r = flvr_scan(&m, &p, p.terminal_log_prices(), &ScanOptions::default())?;
    if let Some((w, xi)) = r.homogeneous_window() {
        for eps in [1e-2, 5e-3, 2.5e-3] {
            let run = arbitrage_strategy(&m, &r, &w, &xi, Variant::Accessible { eps: Some(eps) }, 1000, 1)?;
            println!(
                "twostate_pinned, predictable jump at {:.3}, eps {eps}: floor {:.5}, traded {}",
                w.predictable_time.unwrap(),
                run.floor,
                run.traded
            );
        }
    }
    Ok(())
}
