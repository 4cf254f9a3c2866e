//! No-arbitrage for the ordinary agent: martingale intensities per state,
//! the density process of the measure change, and its Monte Carlo check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{solve_strict_scaled, FeasibilitySolution, LinearSystem};
use crate::model::{check_equivalent, IntensityOverride, MarketModel};
use crate::simulate::{mc_expectations, McEstimate, PathRecord, Start};

/// Matrix `Gamma^{e,A}` (columns `gamma^{.ef}` for `f` in `targets`) and the
/// right-hand side `r^e 1 - mu^e`.
pub fn drift_system(model: &MarketModel, e: usize, targets: &[usize], homogeneous: bool) -> Result<LinearSystem> {
    let cols: Vec<Vec<f64>> = targets.iter().map(|&f| model.relative_jump(e, f)).collect();
    let b = if homogeneous {
        vec![0.0; model.n_assets()]
    } else {
        model.excess_drift(e).iter().map(|d| -d).collect()
    };
    LinearSystem::from_columns(model.n_assets(), &cols, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateOutcome {
    pub state: String,
    pub successors: Vec<String>,
    pub solution: FeasibilitySolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaSolution {
    pub states: Vec<StateOutcome>,
    /// Martingale intensities, when every state is feasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensities: Option<IntensityOverride>,
}

impl NaSolution {
    pub fn is_feasible(&self) -> bool {
        self.intensities.is_some()
    }
}

/// Solves `Gamma^e lambda~^e = r^e 1 - mu^e`, `lambda~^e > 0`, for every state.
///
/// Unknowns are measured in units of the model's own intensities, so the
/// returned point is the solution furthest from the boundary relative to
/// `lambda^{ef}`; in particular it is `lambda` itself when the model is
/// already risk-neutral.
pub fn na_solve(model: &MarketModel) -> Result<NaSolution> {
    let n = model.n_states();
    let mut states = Vec::with_capacity(n);
    let mut rates = vec![vec![0.0; n]; n];
    let mut all_ok = true;
    for e in 0..n {
        let succ = model.reachable(e);
        let sys = drift_system(model, e, &succ, false)?;
        let reference: Vec<f64> = succ.iter().map(|&f| model.rate(e, f)).collect();
        let sol = solve_strict_scaled(&sys, &reference)?;
        match &sol.witness {
            Some(w) if sol.is_feasible() => {
                for (&f, &x) in succ.iter().zip(w) {
                    rates[e][f] = x;
                }
            }
            _ => all_ok = false,
        }
        states.push(StateOutcome {
            state: model.label(e).to_string(),
            successors: succ.iter().map(|&f| model.label(f).to_string()).collect(),
            solution: sol,
        });
    }
    let intensities = if all_ok {
        let over = IntensityOverride::new(rates)?;
        debug_assert!(check_equivalent(model, &over)?);
        Some(over)
    } else {
        None
    };
    Ok(NaSolution { states, intensities })
}

/// `log Z` of the measure change along one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPath {
    /// `0, tau_1, ..., tau_n, T`.
    pub times: Vec<f64>,
    /// `log Z` at each of `times` (after the jump, for jump times).
    pub log_z: Vec<f64>,
    /// `lambda^e - lambda~^e` of the state occupied after each knot.
    slopes: Vec<f64>,
}

impl DensityPath {
    pub fn terminal(&self) -> f64 {
        self.log_z.last().unwrap().exp()
    }

    pub fn log_terminal(&self) -> f64 {
        *self.log_z.last().unwrap()
    }

    /// `log Z_t`; right-continuous at jump times.
    pub fn log_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t).max(1) - 1;
        let k = k.min(self.slopes.len() - 1);
        self.log_z[k] + self.slopes[k] * (t - self.times[k])
    }

    pub fn at(&self, t: f64) -> f64 {
        self.log_at(t).exp()
    }
}

fn ensure_equivalent(model: &MarketModel, over: &IntensityOverride) -> Result<()> {
    if check_equivalent(model, over)? {
        Ok(())
    } else {
        Err(Error::NotEquivalent)
    }
}

/// Exact density process from the event times of `path`.
pub fn density_along_path(model: &MarketModel, over: &IntensityOverride, path: &PathRecord) -> Result<DensityPath> {
    ensure_equivalent(model, over)?;
    let mut times = vec![0.0];
    let mut log_z = vec![0.0];
    let mut slopes = Vec::with_capacity(path.states.len());
    let mut acc = 0.0;
    let mut t0 = 0.0;
    for (j, &e) in path.states.iter().enumerate() {
        let slope = model.total_rate(e) - over.total_rate(e);
        slopes.push(slope);
        let t1 = if j < path.n_jumps() {
            path.jump_times[j]
        } else {
            path.horizon
        };
        acc += slope * (t1 - t0);
        if j < path.n_jumps() {
            let f = path.states[j + 1];
            acc += (over.rate(e, f) / model.rate(e, f)).ln();
        }
        times.push(t1);
        log_z.push(acc);
        t0 = t1;
    }
    slopes.push(*slopes.last().unwrap());
    Ok(DensityPath { times, log_z, slopes })
}

/// `log Z_T` only.
pub fn log_density_terminal(model: &MarketModel, over: &IntensityOverride, path: &PathRecord) -> f64 {
    let mut acc = 0.0;
    for k in 0..path.n_jumps() {
        let (e, f) = (path.states[k], path.states[k + 1]);
        acc += (over.rate(e, f) / model.rate(e, f)).ln();
    }
    for e in 0..model.n_states() {
        let d = model.total_rate(e) - over.total_rate(e);
        if d != 0.0 {
            acc += d * path.occupation(e, path.horizon);
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetCheck {
    pub asset: String,
    pub s0: f64,
    /// Estimate of `E_P[Z_T S~_T]`.
    pub estimate: McEstimate,
    pub z_score: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub n_paths: usize,
    pub seed: u64,
    /// Pass band in standard errors.
    pub band: f64,
    /// Estimate of `E_P[Z_T]`.
    pub density: McEstimate,
    pub density_pass: bool,
    pub assets: Vec<AssetCheck>,
    pub pass: bool,
}

pub const MC_BAND: f64 = 3.0;

/// Checks `E_P[Z_T] = 1` and `E_P[Z_T S~^i_T] = S^i_0` by simulation under P.
pub fn verify_martingale_measure(
    model: &MarketModel,
    over: &IntensityOverride,
    start: &Start,
    n_paths: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    ensure_equivalent(model, over)?;
    let est = mc_expectations(model, start, n_paths, seed, |p| {
        let z = log_density_terminal(model, over, p).exp();
        let mut out = Vec::with_capacity(1 + model.n_assets());
        out.push(z);
        out.extend(p.terminal_log_prices().iter().map(|l| z * l.exp()));
        Ok(out)
    })?;
    let density = est[0];
    let density_pass = density.within(1.0, MC_BAND);
    let assets: Vec<AssetCheck> = model
        .assets()
        .iter()
        .zip(&est[1..])
        .map(|(a, e)| AssetCheck {
            asset: a.name().to_string(),
            s0: a.s0(),
            estimate: *e,
            z_score: e.z_score(a.s0()),
            pass: e.within(a.s0(), MC_BAND),
        })
        .collect();
    let pass = density_pass && assets.iter().all(|a| a.pass);
    Ok(MartingaleReport {
        n_paths,
        seed,
        band: MC_BAND,
        density,
        density_pass,
        assets,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::validate_model;
    use crate::simulate::simulate_path;

    #[test]
    fn kh_solution_satisfies_drift_condition() {
        let m = fixtures::kh();
        let sol = na_solve(&m).unwrap();
        let over = sol.intensities.unwrap();
        for e in 0..3 {
            let s: f64 = (0..3)
                .filter(|&f| f != e)
                .map(|f| m.gamma(0, e, f) * over.rate(e, f))
                .sum();
            assert!((s + m.mu(0, e)).abs() < 1e-12);
        }
        assert!((over.rate(0, 1) - 1.0).abs() < 1e-12);
        assert!((over.rate(0, 2) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn lone_state_with_drift_is_infeasible() {
        let raw = crate::model::ModelConfig {
            states: vec!["a".into()],
            lambda: vec![vec![0.0]],
            r: vec![0.01],
            horizon: 1.0,
            initial_state: None,
            assets: vec![crate::model::AssetConfig {
                name: "S".into(),
                s0: 1.0,
                mu: vec![0.02],
                beta: vec![],
            }],
        };
        let m = validate_model(&raw).unwrap().model;
        let sol = na_solve(&m).unwrap();
        assert!(!sol.is_feasible());
        assert!(sol.states[0].solution.certificate.is_some());
    }

    #[test]
    fn twostate_is_feasible() {
        assert!(na_solve(&fixtures::twostate()).unwrap().is_feasible());
    }

    #[test]
    fn identity_density_is_one() {
        let m = fixtures::twostate();
        let id = IntensityOverride::identity(&m);
        let p = simulate_path(&m, &Start::Model, 3).unwrap();
        let d = density_along_path(&m, &id, &p).unwrap();
        assert!(d.log_z.iter().all(|z| *z == 0.0));
        assert_eq!(d.at(0.4), 1.0);
    }

    #[test]
    fn density_closed_forms() {
        let m = fixtures::twostate();
        let over = IntensityOverride::new(vec![vec![0.0, 2.5], vec![0.4, 0.0]]).unwrap();
        let still = PathRecord::from_parts(&m, vec![0], vec![]).unwrap();
        let z = density_along_path(&m, &over, &still).unwrap().terminal();
        assert!((z - (1.0f64 - 2.5).exp()).abs() < 1e-14);

        let one = PathRecord::from_parts(&m, vec![0, 1], vec![0.3]).unwrap();
        let d = density_along_path(&m, &over, &one).unwrap();
        let expected = 2.5 * ((1.0 - 2.5) * 0.3 + (1.0 - 0.4) * 0.7f64).exp();
        assert!((d.terminal() - expected).abs() < 1e-13);
        assert!((d.log_terminal() - log_density_terminal(&m, &over, &one)).abs() < 1e-14);
        // just before the jump
        assert!((d.log_at(0.3 - 1e-12) - (1.0 - 2.5) * 0.3).abs() < 1e-9);
    }

    #[test]
    fn non_equivalent_override_rejected() {
        let m = fixtures::twostate();
        let over = IntensityOverride::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let p = simulate_path(&m, &Start::Model, 3).unwrap();
        assert!(matches!(density_along_path(&m, &over, &p), Err(Error::NotEquivalent)));
    }
}
