//! Support of the terminal log-price along a scenario and how its
//! dimension shrinks as jumps are revealed.

use mcmarket::fixtures;
use mcmarket::scenario::{dim_chain, enumerate_scenarios, support_hull};

fn main() -> mcmarket::Result<()> {
    for (name, m) in [("twostate", fixtures::twostate()), ("kh", fixtures::kh())] {
        println!("{name}:");
        for h in enumerate_scenarios(&m, 0, 3) {
            let hull = support_hull(&m, &h, m.horizon(), &m.initial_log_prices())?;
            let vertices: Vec<String> = hull.vertices.iter().map(|v| format!("{:.4}", v[0])).collect();
            println!(
                "  {:<10} dim chain {:?}  vertices [{}]",
                h.labels(&m),
                dim_chain(&m, &h)?,
                vertices.join(", ")
            );
        }
    }
    Ok(())
}
