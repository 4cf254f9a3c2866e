//! Prior probabilities of jump scenarios, with the route used for each.

use mcmarket::fixtures;
use mcmarket::scenario::{prob_quadrature, scenario_table};

fn main() -> mcmarket::Result<()> {
    let mut cfg = fixtures::twostate_config();
    cfg.lambda[1][0] = 2.5;
    let m = mcmarket::model::validate_model(&cfg)?.model;
    let tab = scenario_table(&m, 0, 5, 1.0)?;
    println!("{:<14} {:>12} {:>12} route", "scenario", "Pi", "quadrature");
    for (h, p) in &tab.entries {
        let (q, _) = prob_quadrature(&m, h, 1.0)?;
        println!("{:<14} {:>12.4e} {:>12.4e} {:?}", h.labels(&m), p.value, q, p.route);
    }
    println!("tail P(N_T > 5) = {:.3e}", tab.tail);
    Ok(())
}
