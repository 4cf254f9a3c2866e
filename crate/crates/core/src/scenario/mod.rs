//! Scenarios `h = (n; e_0, ..., e_n)`: the sequence of visited states
//! without the jump times.

pub(crate) mod conditional;
mod prob;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use conditional::{conditional_law_sample, ConditionalSample};
pub use prob::{
    prob_closed_form, prob_quadrature, scenario_prob, scenario_table, ProbRoute, ScenarioProb,
    ScenarioTable,
};

use crate::error::{Error, Result};
use crate::feasibility::affine_dim;
use crate::model::MarketModel;

pub const DEFAULT_NMAX: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scenario {
    states: Vec<usize>,
}

impl Scenario {
    pub fn new(states: Vec<usize>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("a scenario needs at least one state".into()));
        }
        if let Some(w) = states.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "scenario repeats state {} consecutively",
                w[0]
            )));
        }
        Ok(Self { states })
    }

    pub fn single(e: usize) -> Self {
        Self { states: vec![e] }
    }

    /// Parses `"a,b,c"` (state labels) against `model`.
    pub fn parse(model: &MarketModel, text: &str) -> Result<Self> {
        let states = text
            .split(',')
            .map(|s| model.state_index(s.trim()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(states)
    }

    /// Number of transitions.
    pub fn n(&self) -> usize {
        self.states.len() - 1
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn start(&self) -> usize {
        self.states[0]
    }

    pub fn end(&self) -> usize {
        *self.states.last().unwrap()
    }

    /// `h_(k) = (k; e_0, ..., e_k)`.
    pub fn prefix(&self, k: usize) -> Scenario {
        Scenario {
            states: self.states[..=k.min(self.n())].to_vec(),
        }
    }

    /// `h^(k) = (n - k; e_k, ..., e_n)`.
    pub fn suffix(&self, k: usize) -> Scenario {
        Scenario {
            states: self.states[k.min(self.n())..].to_vec(),
        }
    }

    /// `h v h~`, defined when `h~` starts where `h` ends.
    pub fn concat(&self, other: &Scenario) -> Result<Scenario> {
        if other.start() != self.end() {
            return Err(Error::InvalidArgument(format!(
                "cannot join a scenario ending in {} with one starting in {}",
                self.end(),
                other.start()
            )));
        }
        let mut states = self.states.clone();
        states.extend_from_slice(&other.states[1..]);
        Ok(Scenario { states })
    }

    pub fn is_admissible(&self, model: &MarketModel) -> bool {
        self.states.iter().all(|&e| e < model.n_states())
            && self.states.windows(2).all(|w| model.rate(w[0], w[1]) > 0.0)
    }

    pub fn ensure_admissible(&self, model: &MarketModel) -> Result<()> {
        if self.is_admissible(model) {
            Ok(())
        } else {
            Err(Error::Inadmissible(self.to_string()))
        }
    }

    /// `beta^{0:n}`: sum of the log-jumps along the scenario.
    pub fn cumulative_jump(&self, model: &MarketModel) -> Vec<f64> {
        let mut acc = vec![0.0; model.n_assets()];
        for w in self.states.windows(2) {
            for (a, b) in acc.iter_mut().zip(model.jump(w[0], w[1])) {
                *a += b;
            }
        }
        acc
    }

    /// Number of `e -> f` transitions.
    pub fn transitions(&self, e: usize, f: usize) -> usize {
        self.states.windows(2).filter(|w| w[0] == e && w[1] == f).count()
    }

    pub fn labels(&self, model: &MarketModel) -> String {
        self.states
            .iter()
            .map(|&e| model.label(e))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.states.iter().map(|e| e.to_string()).collect();
        write!(f, "({}; {})", self.n(), s.join(","))
    }
}

/// Every admissible `h` from `e0` with at most `n_max` transitions, by
/// length and then lexicographically.
pub fn enumerate_scenarios(model: &MarketModel, e0: usize, n_max: usize) -> Vec<Scenario> {
    let mut out = vec![Scenario::single(e0)];
    let mut level = vec![Scenario::single(e0)];
    for _ in 0..n_max {
        let mut next = Vec::new();
        for h in &level {
            for f in model.reachable(h.end()) {
                let mut states = h.states.clone();
                states.push(f);
                next.push(Scenario { states });
            }
        }
        if next.is_empty() {
            break;
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// `A_T(h)`: convex hull of `L_0 + beta^{0:n} + (mu - r)^{e_i} T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportHull {
    /// One vertex per distinct visited state, in order of first visit.
    pub vertices: Vec<Vec<f64>>,
    pub dim: usize,
    pub horizon: f64,
    pub base: Vec<f64>,
}

impl SupportHull {
    /// Support is a single point (all visited states share one drift).
    pub fn is_point_mass(&self) -> bool {
        self.dim == 0
    }

    pub fn contains(&self, ell: &[f64]) -> Result<bool> {
        crate::feasibility::hull_member(&self.vertices, ell)
    }
}

pub fn support_hull(model: &MarketModel, h: &Scenario, horizon: f64, base: &[f64]) -> Result<SupportHull> {
    h.ensure_admissible(model)?;
    if base.len() != model.n_assets() {
        return Err(Error::dims("base log-prices", model.n_assets(), base.len()));
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be >= 0, got {horizon}")));
    }
    let jump = h.cumulative_jump(model);
    let mut seen = Vec::new();
    let mut vertices = Vec::new();
    for &e in h.states() {
        if seen.contains(&e) {
            continue;
        }
        seen.push(e);
        let d = model.excess_drift(e);
        vertices.push(
            (0..model.n_assets())
                .map(|i| base[i] + jump[i] + d[i] * horizon)
                .collect::<Vec<f64>>(),
        );
    }
    let dim = if horizon > 0.0 { affine_dim(&vertices)? } else { 0 };
    Ok(SupportHull {
        vertices,
        dim,
        horizon,
        base: base.to_vec(),
    })
}

/// `D(h^(k))`: affine dimension of the drifts visited from step `k` on.
pub fn suffix_dim(model: &MarketModel, h: &Scenario, k: usize) -> Result<usize> {
    let drifts: Vec<Vec<f64>> = h.states()[k..].iter().map(|&e| model.excess_drift(e)).collect();
    affine_dim(&drifts)
}

/// `D(h), D(h^(1)), ..., D(h^(n))`.
pub fn dim_chain(model: &MarketModel, h: &Scenario) -> Result<Vec<usize>> {
    h.ensure_admissible(model)?;
    (0..=h.n()).map(|k| suffix_dim(model, h, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn algebra() {
        let h = Scenario::new(vec![0, 1, 0, 2]).unwrap();
        for k in 0..=h.n() {
            assert_eq!(h.prefix(k).concat(&h.suffix(k)).unwrap(), h);
        }
        assert_eq!(h.suffix(1).n(), 2);
        assert!(Scenario::new(vec![0, 0]).is_err());
        assert!(h.concat(&Scenario::single(1)).is_err());
        assert_eq!(h.to_string(), "(3; 0,1,0,2)");
    }

    #[test]
    fn enumeration_counts() {
        let m = fixtures::twostate();
        let hs = enumerate_scenarios(&m, 0, 2);
        let got: Vec<Vec<usize>> = hs.iter().map(|h| h.states().to_vec()).collect();
        assert_eq!(got, vec![vec![0], vec![0, 1], vec![0, 1, 0]]);
        assert_eq!(enumerate_scenarios(&m, 0, 0).len(), 1);
        assert_eq!(enumerate_scenarios(&fixtures::kh(), 0, 2).len(), 7);
    }

    #[test]
    fn supports() {
        let m = fixtures::twostate();
        let l0 = m.initial_log_prices();
        let s = support_hull(&m, &Scenario::single(0), 1.0, &l0).unwrap();
        assert_eq!(s.vertices, vec![vec![-0.5]]);
        assert!(s.is_point_mass());

        let h = Scenario::new(vec![0, 1]).unwrap();
        let s = support_hull(&m, &h, 1.0, &l0).unwrap();
        assert_eq!(s.dim, 1);
        assert!((s.vertices[0][0] - (1.1f64.ln() - 0.5)).abs() < 1e-15);
        assert!((s.vertices[1][0] - (1.1f64.ln() + 0.5)).abs() < 1e-15);

        let k = fixtures::kh();
        let h = Scenario::new(vec![0, 1, 2, 0, 2]).unwrap();
        let s = support_hull(&k, &h, 1.0, &[0.0]).unwrap();
        assert_eq!(s.dim, 0);
        assert!(s.vertices.iter().all(|v| (v[0] - s.vertices[0][0]).abs() < 1e-15));
    }

    #[test]
    fn dimension_chains() {
        let m = fixtures::twostate();
        let h = Scenario::new(vec![0, 1, 0, 1]).unwrap();
        assert_eq!(dim_chain(&m, &h).unwrap(), vec![1, 1, 1, 0]);
        assert_eq!(dim_chain(&m, &Scenario::single(1)).unwrap(), vec![0]);
        let k = fixtures::kh();
        let h = Scenario::new(vec![0, 2, 1, 0]).unwrap();
        assert_eq!(dim_chain(&k, &h).unwrap(), vec![0, 0, 0, 0]);
    }
}
