//! No free lunch with vanishing risk for the insider: reachable sets after
//! each jump, the two feasibility conditions, and the first time a free
//! lunch window opens.

mod strategy;

use serde::{Deserialize, Serialize};

pub use strategy::{arbitrage_strategy, default_eps, ArbitrageRun, TradingWindow, Variant};

use crate::error::{Error, Result};
use crate::feasibility::{solve_strict, solve_strict_scaled, verify_certificate, FeasibilitySolution, TIME_TOL};
use crate::insider::{continuation_bounds, posterior_scenario_weights, Posterior, PosteriorOptions, Prefix};
use crate::model::{IntensityOverride, MarketModel, ModelConfig};
use crate::noarb::{drift_system, na_solve};
use crate::scenario::{suffix_dim, Scenario};
use crate::simulate::PathRecord;

/// States the next jump may reach at one predictable time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibleSet {
    pub time: f64,
    pub targets: Vec<usize>,
    /// Posterior weight of the scenarios jumping at `time`.
    pub weight: f64,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilitySets {
    pub k: usize,
    pub state: usize,
    /// `tau_{k-1}`.
    pub time: f64,
    /// Targets of a totally inaccessible next jump.
    pub inaccessible: Vec<usize>,
    /// Targets of accessible next jumps, one entry per predictable time.
    pub accessible: Vec<AccessibleSet>,
    pub threshold: f64,
    pub n_max: usize,
}

/// Builds the sets from the posterior-supported continuations.
pub fn reachability_sets(model: &MarketModel, prefix: &Prefix, ell: &[f64], posterior: &Posterior) -> Result<ReachabilitySets> {
    if posterior.state != prefix.state() || (posterior.time - prefix.time).abs() > TIME_TOL {
        return Err(Error::InconsistentPrefix("posterior was computed for another prefix".into()));
    }
    let mut inaccessible = Vec::new();
    let mut timed = Vec::new();
    let mut any = false;
    for entry in posterior.supported() {
        any = true;
        let c = &entry.continuation;
        if c.n() == 0 {
            continue;
        }
        let f = c.states()[1];
        let drop = suffix_dim(model, c, 0)? == suffix_dim(model, c, 1)? + 1;
        let bound = if drop {
            continuation_bounds(model, prefix, c, ell)?
        } else {
            None
        };
        match bound {
            Some(b) => timed.push((b.upper, (f, entry.weight, entry.scenario.clone()))),
            None => inaccessible.push(f),
        }
    }
    if !any {
        return Err(Error::ZeroPosteriorSupport);
    }
    inaccessible.sort_unstable();
    inaccessible.dedup();
    let accessible = crate::insider::group_times(timed)
        .into_iter()
        .map(|(time, items)| {
            let mut targets: Vec<usize> = items.iter().map(|i| i.0).collect();
            targets.sort_unstable();
            targets.dedup();
            AccessibleSet {
                time,
                targets,
                weight: items.iter().map(|i| i.1).sum(),
                scenarios: items.into_iter().map(|i| i.2).collect(),
            }
        })
        .collect();
    Ok(ReachabilitySets {
        k: prefix.n_jumps() + 1,
        state: prefix.state(),
        time: prefix.time,
        inaccessible,
        accessible,
        threshold: posterior.threshold,
        n_max: posterior.n_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictableCheck {
    pub time: f64,
    pub targets: Vec<usize>,
    pub solution: FeasibilitySolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCheck {
    /// Drift condition over the inaccessible targets.
    pub condition1: FeasibilitySolution,
    /// Homogeneous condition per predictable time.
    pub condition2: Vec<PredictableCheck>,
}

impl StepCheck {
    pub fn all_feasible(&self) -> bool {
        self.condition1.is_feasible() && self.condition2.iter().all(|c| c.solution.is_feasible())
    }
}

pub fn check_nflvr_step(model: &MarketModel, e: usize, sets: &ReachabilitySets) -> Result<StepCheck> {
    if sets.state != e {
        return Err(Error::InvalidArgument(format!(
            "sets were built in state {}, not {e}",
            sets.state
        )));
    }
    let condition1 = solve_strict(&drift_system(model, e, &sets.inaccessible, false)?)?;
    let condition2 = sets
        .accessible
        .iter()
        .map(|a| {
            Ok(PredictableCheck {
                time: a.time,
                targets: a.targets.clone(),
                solution: solve_strict(&drift_system(model, e, &a.targets, true)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StepCheck { condition1, condition2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub k: usize,
    pub prefix: Prefix,
    pub posterior: Posterior,
    pub sets: ReachabilitySets,
    pub check: StepCheck,
    /// `tau_k` on the scanned path, `None` after the last jump.
    pub next_jump: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub posterior: PosteriorOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlvrReport {
    pub model: ModelConfig,
    pub path: PathRecord,
    pub ell: Vec<f64>,
    pub options: ScanOptions,
    pub steps: Vec<StepReport>,
    /// First `tau_{k-1}` where the drift condition fails.
    pub tau_prime: Option<f64>,
    /// First predictable time, reached on the path, where the homogeneous
    /// condition fails.
    pub tau_second: Option<f64>,
    pub tau_flvr: f64,
    pub horizon: f64,
}

impl FlvrReport {
    pub fn no_arbitrage(&self) -> bool {
        self.tau_prime.is_none() && self.tau_second.is_none()
    }

    /// Jump index and step where `tau_prime` is attained.
    pub fn drift_failure(&self) -> Option<&StepReport> {
        self.steps.iter().find(|s| !s.check.condition1.is_feasible())
    }

    /// Step and predictable check where `tau_second` is attained.
    pub fn homogeneous_failure(&self) -> Option<(&StepReport, &PredictableCheck)> {
        let t = self.tau_second?;
        self.steps.iter().find_map(|s| {
            s.check
                .condition2
                .iter()
                .find(|c| !c.solution.is_feasible() && (c.time - t).abs() <= TIME_TOL)
                .map(|c| (s, c))
        })
    }

    /// Re-checks every certificate against its system; returns how many
    /// were checked and how many are strict.
    pub fn verify_certificates(&self, model: &MarketModel) -> Result<(usize, usize)> {
        let (mut n, mut strict) = (0, 0);
        for s in &self.steps {
            let e = s.sets.state;
            let mut todo = vec![(drift_system(model, e, &s.sets.inaccessible, false)?, &s.check.condition1)];
            for c in &s.check.condition2 {
                todo.push((drift_system(model, e, &c.targets, true)?, &c.solution));
            }
            for (sys, sol) in todo {
                if let Some(cert) = &sol.certificate {
                    n += 1;
                    if verify_certificate(&sys, &cert.xi)? {
                        strict += 1;
                    }
                }
            }
        }
        Ok((n, strict))
    }

    /// Martingale intensities assembled from the drift-condition witnesses
    /// along the path; states not met on the path take the ordinary
    /// solution. `None` unless every check passed and every state's
    /// witness covers all of its successors.
    pub fn assembled_intensities(&self, model: &MarketModel) -> Result<Option<IntensityOverride>> {
        if !self.no_arbitrage() {
            return Ok(None);
        }
        let n = model.n_states();
        let mut rates: Vec<Option<Vec<f64>>> = vec![None; n];
        for s in &self.steps {
            let e = s.sets.state;
            if rates[e].is_some() {
                continue;
            }
            if s.sets.inaccessible != model.reachable(e) {
                return Ok(None);
            }
            // same system, re-solved close to the P-rates so that Z stays well-behaved
            let sys = drift_system(model, e, &s.sets.inaccessible, false)?;
            let reference: Vec<f64> = s.sets.inaccessible.iter().map(|&f| model.rate(e, f)).collect();
            let sol = solve_strict_scaled(&sys, &reference)?;
            let Some(w) = sol.witness.filter(|_| s.check.condition1.is_feasible()) else {
                return Ok(None);
            };
            let mut row = vec![0.0; n];
            for (&f, &x) in s.sets.inaccessible.iter().zip(&w) {
                row[f] = x;
            }
            rates[e] = Some(row);
        }
        let fallback = na_solve(model)?;
        let mut out = Vec::with_capacity(n);
        for (e, r) in rates.into_iter().enumerate() {
            match r {
                Some(row) => out.push(row),
                None => match &fallback.intensities {
                    Some(o) => out.push(o.rates()[e].clone()),
                    None => return Ok(None),
                },
            }
        }
        Ok(Some(IntensityOverride::new(out)?))
    }
}

/// Walks `k = 1, ..., N_T + 1` along `path`.
///
/// A predictable time enters `tau''` only if the path reaches it, i.e. it
/// is not later than the actual next jump (or `T`).
pub fn flvr_scan(model: &MarketModel, path: &PathRecord, ell: &[f64], opts: &ScanOptions) -> Result<FlvrReport> {
    let terminal = path.terminal_log_prices();
    if ell.len() != terminal.len() {
        return Err(Error::dims("ell", terminal.len(), ell.len()));
    }
    if ell.iter().zip(terminal).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(Error::InconsistentPrefix(format!(
            "ell {ell:?} differs from the path's terminal log-prices {terminal:?}"
        )));
    }
    let horizon = path.horizon;
    let mut steps = Vec::new();
    let mut tau_prime: Option<f64> = None;
    let mut tau_second: Option<f64> = None;
    for k in 1..=path.n_jumps() + 1 {
        let prefix = Prefix::at_jump(path, k - 1)?;
        let remaining_true = path.n_jumps() - (k - 1);
        let popts = PosteriorOptions {
            n_max: opts.posterior.n_max.max(remaining_true),
            seed: opts.posterior.seed.wrapping_add(k as u64),
            ..opts.posterior
        };
        let posterior = posterior_scenario_weights(model, &prefix, ell, &popts)?;
        let sets = reachability_sets(model, &prefix, ell, &posterior)?;
        let check = check_nflvr_step(model, prefix.state(), &sets)?;
        let next_jump = (k <= path.n_jumps()).then(|| path.tau(k));
        if tau_prime.is_none() && !check.condition1.is_feasible() {
            tau_prime = Some(prefix.time);
        }
        let reach = next_jump.unwrap_or(horizon);
        for c in &check.condition2 {
            if !c.solution.is_feasible() && c.time <= reach + TIME_TOL {
                tau_second = Some(tau_second.map_or(c.time, |t: f64| t.min(c.time)));
            }
        }
        steps.push(StepReport {
            k,
            prefix,
            posterior,
            sets,
            check,
            next_jump,
        });
    }
    let tau_flvr = tau_prime.unwrap_or(horizon).min(tau_second.unwrap_or(horizon)).min(horizon);
    Ok(FlvrReport {
        model: model.to_config(),
        path: path.clone(),
        ell: ell.to_vec(),
        options: *opts,
        steps,
        tau_prime,
        tau_second,
        tau_flvr,
        horizon,
    })
}
