//! Insider intensities of the up and down counts in kh once the terminal
//! counts are known.

use mcmarket::fixtures::KH_MU;
use mcmarket::insider::{insider_compensator_kh, solve_counts, BridgeCompensator};

fn main() -> mcmarket::Result<()> {
    let (bp, bm) = (1.1f64.ln(), 0.9f64.ln());
    let ell = 2.0 * bp + bm + KH_MU;
    let counts = solve_counts(bp, bm, ell - KH_MU, 32, 1e-9);
    println!("terminal counts consistent with L_T = {ell:.5}: {:?} (unique: {})", counts.solutions, counts.unique);
    let (n_plus, n_minus) = counts.solutions[0];

    let ups = [0.3, 0.6];
    let downs = [0.45];
    for t in [0.1, 0.4, 0.5, 0.7, 0.9] {
        let before = (
            ups.iter().filter(|&&s| s < t).count(),
            downs.iter().filter(|&&s| s < t).count(),
        );
        let i = insider_compensator_kh(1.0, 1.0, 1.0, t, before, (n_plus, n_minus))?;
        println!("t={t:.1}: lambda+ = {:.4}, lambda- = {:.4}", i.plus, i.minus);
    }

    let bridge = BridgeCompensator::new(1.0, 1.0, 1.0, n_plus, n_minus)?;
    for t in [0.25, 0.5, 0.75, 0.95] {
        println!("integrated up-compensator at {t}: {:.4}", bridge.integrated(n_plus, &ups, t)?);
    }
    Ok(())
}
