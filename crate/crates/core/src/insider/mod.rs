//! The insider knows the terminal discounted log-prices `ell = L_T` from
//! time zero. This module decides which jump times that knowledge pins
//! down, brackets the others, and builds posterior scenario weights and
//! compensators in the enlarged filtration.

mod compensator;
mod fiber;
mod posterior;

use serde::{Deserialize, Serialize};

pub use compensator::{
    insider_compensator_kh, insider_compensator_mixture, sample_continuations, solve_counts, AccessibleAtom,
    BridgeCompensator, BridgeIntensity, CompensatorMixture, ContinuationDraw, CountSolutions, InaccessiblePart,
    MixtureOptions, INTENSITY_CAP,
};
pub use fiber::FiberSampler;
pub use posterior::{
    posterior_scenario_weights, Posterior, PosteriorEntry, PosteriorMode, PosteriorOptions, POSTERIOR_THRESHOLD,
};

use crate::error::{Error, Result};
use crate::feasibility::{time_bounds, HoldingTimeSystem, TimeBounds, TIME_TOL};
use crate::model::MarketModel;
use crate::scenario::{enumerate_scenarios, suffix_dim, support_hull, Scenario};
use crate::simulate::PathRecord;

/// Tolerance for matching `ell` to a point-mass support.
pub const ATOM_TOL: f64 = 1e-9;

/// What the insider has seen at `time`: the path so far plus `L_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prefix {
    pub horizon: f64,
    pub time: f64,
    pub states: Vec<usize>,
    pub jump_times: Vec<f64>,
    pub log_prices: Vec<f64>,
}

impl Prefix {
    /// Nothing observed yet.
    pub fn start(model: &MarketModel) -> Self {
        Self {
            horizon: model.horizon(),
            time: 0.0,
            states: vec![model.initial_state()],
            jump_times: Vec::new(),
            log_prices: model.initial_log_prices(),
        }
    }

    /// Information right after jump `j` of `path` (`j = 0` is time zero).
    pub fn at_jump(path: &PathRecord, j: usize) -> Result<Self> {
        if j > path.n_jumps() {
            return Err(Error::InvalidArgument(format!(
                "path has {} jumps, asked for jump {j}",
                path.n_jumps()
            )));
        }
        Ok(Self {
            horizon: path.horizon,
            time: path.tau(j),
            states: path.states[..=j].to_vec(),
            jump_times: path.jump_times[..j].to_vec(),
            log_prices: path.log_prices[j].clone(),
        })
    }

    /// Information strictly before `s`.
    pub fn at_time(model: &MarketModel, path: &PathRecord, s: f64) -> Result<Self> {
        if !(0.0..=path.horizon).contains(&s) {
            return Err(Error::InvalidArgument(format!("time {s} outside [0, T]")));
        }
        let j = path.jumps_before(s);
        let mut p = Self::at_jump(path, j)?;
        let d = model.excess_drift(path.states[j]);
        for (l, mu) in p.log_prices.iter_mut().zip(d) {
            *l += mu * (s - p.time);
        }
        p.time = s;
        Ok(p)
    }

    pub fn state(&self) -> usize {
        *self.states.last().unwrap()
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn remaining(&self) -> f64 {
        self.horizon - self.time
    }

    pub fn observed(&self) -> Scenario {
        Scenario::new(self.states.clone()).expect("prefix states are consecutive-distinct")
    }

    /// `h^(j)` if `h` starts with the observed states, `j` jumps seen.
    pub fn continuation_of(&self, h: &Scenario) -> Result<Scenario> {
        let j = self.n_jumps();
        if h.n() < j || h.states()[..=j] != self.states[..] {
            return Err(Error::InconsistentPrefix(format!(
                "scenario {h} does not extend the observed states {:?}",
                self.states
            )));
        }
        Ok(h.suffix(j))
    }
}

/// Holding-time system of continuation `c` over `horizon`, from `base`.
pub fn residual_system(model: &MarketModel, c: &Scenario, ell: &[f64], horizon: f64, base: &[f64]) -> HoldingTimeSystem {
    let jump = c.cumulative_jump(model);
    HoldingTimeSystem {
        drifts: c.states().iter().map(|&e| model.excess_drift(e)).collect(),
        target: (0..ell.len()).map(|i| ell[i] - base[i] - jump[i]).collect(),
        horizon,
    }
}

fn check_ell(model: &MarketModel, ell: &[f64]) -> Result<()> {
    if ell.len() != model.n_assets() {
        return Err(Error::dims("ell", model.n_assets(), ell.len()));
    }
    if ell.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ell".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Determination {
    pub determined: bool,
    pub reachable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub dim_before: usize,
    pub dim_after: usize,
}

/// Rank test: is the `k`-th holding time of `h` fixed by `ell`?
///
/// `horizon` and `base` are the time left and the log-prices right after
/// jump `k - 1` (for `k = 1`: `T` and `L_0`).
pub fn is_determined(
    model: &MarketModel,
    h: &Scenario,
    k: usize,
    ell: &[f64],
    horizon: f64,
    base: &[f64],
) -> Result<Determination> {
    check_ell(model, ell)?;
    if k == 0 || k > h.n() {
        return Err(Error::InvalidArgument(format!(
            "jump index {k} outside 1..={}",
            h.n()
        )));
    }
    let s = h.suffix(k - 1);
    let dim_before = suffix_dim(model, h, k - 1)?;
    let dim_after = suffix_dim(model, h, k)?;
    let hull = support_hull(model, &s, horizon, base)?;
    if !hull.contains(ell)? {
        return Ok(Determination {
            determined: false,
            reachable: false,
            reason: Some("unreachable".into()),
            dim_before,
            dim_after,
        });
    }
    Ok(Determination {
        determined: dim_before == dim_after + 1,
        reachable: true,
        reason: None,
        dim_before,
        dim_after,
    })
}

/// LP test of the same question: `Some(lo == hi)`, or `None` when the
/// residual system has no solution.
pub fn is_determined_lp(
    model: &MarketModel,
    h: &Scenario,
    k: usize,
    ell: &[f64],
    horizon: f64,
    base: &[f64],
) -> Result<Option<bool>> {
    check_ell(model, ell)?;
    if k == 0 || k > h.n() {
        return Err(Error::InvalidArgument(format!(
            "jump index {k} outside 1..={}",
            h.n()
        )));
    }
    let sys = residual_system(model, &h.suffix(k - 1), ell, horizon, base);
    Ok(match time_bounds(&sys)? {
        TimeBounds::Empty => None,
        tb => Some(tb.is_determined()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpBounds {
    pub lower: f64,
    pub upper: f64,
    pub slack: f64,
    pub determined: bool,
}

/// Bounds on the next jump time of continuation `c` (which starts in the
/// prefix's current state); `None` if `ell` is out of reach along `c`.
pub fn continuation_bounds(model: &MarketModel, prefix: &Prefix, c: &Scenario, ell: &[f64]) -> Result<Option<JumpBounds>> {
    check_ell(model, ell)?;
    if c.start() != prefix.state() {
        return Err(Error::InconsistentPrefix(format!(
            "continuation {c} does not start in the current state {}",
            prefix.state()
        )));
    }
    if c.n() == 0 {
        return Err(Error::InvalidArgument(format!("continuation {c} has no further jump")));
    }
    let sys = residual_system(model, c, ell, prefix.remaining(), &prefix.log_prices);
    Ok(match time_bounds(&sys)? {
        TimeBounds::Empty => None,
        TimeBounds::Bounds { lo, hi, slack } => Some(JumpBounds {
            lower: prefix.time + lo,
            upper: prefix.time + hi,
            slack,
            determined: hi - lo <= TIME_TOL,
        }),
    })
}

/// `(tau_k lower, tau_k upper)` for scenario `h` given the prefix up to
/// `tau_{k-1}`.
pub fn predictable_bounds(model: &MarketModel, prefix: &Prefix, h: &Scenario, ell: &[f64]) -> Result<Option<JumpBounds>> {
    let c = prefix.continuation_of(h)?;
    continuation_bounds(model, prefix, &c, ell)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMode {
    Determined,
    Undetermined,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpClassification {
    pub k: usize,
    pub scenario: Scenario,
    pub suffix_index: usize,
    pub mode: JumpMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<JumpBounds>,
    pub dim_before: usize,
    pub dim_after: usize,
    /// Whether the LP bounds agree with the rank test.
    pub lp_agrees: bool,
}

/// Classifies jump `k = prefix.n_jumps() + 1` of `h`.
pub fn classify(model: &MarketModel, prefix: &Prefix, h: &Scenario, ell: &[f64]) -> Result<JumpClassification> {
    let c = prefix.continuation_of(h)?;
    let k = prefix.n_jumps() + 1;
    if c.n() == 0 {
        return Err(Error::InvalidArgument(format!("scenario {h} has no jump {k}")));
    }
    let det = is_determined(model, h, k, ell, prefix.remaining(), &prefix.log_prices)?;
    let bounds = continuation_bounds(model, prefix, &c, ell)?;
    let mode = match (det.reachable, det.determined) {
        (false, _) => JumpMode::Unreachable,
        (true, true) => JumpMode::Determined,
        (true, false) => JumpMode::Undetermined,
    };
    let lp_agrees = match (&bounds, mode) {
        (None, JumpMode::Unreachable) => true,
        (Some(b), JumpMode::Determined) => b.determined,
        (Some(b), JumpMode::Undetermined) => !b.determined,
        _ => false,
    };
    Ok(JumpClassification {
        k,
        scenario: h.clone(),
        suffix_index: k - 1,
        mode,
        bounds,
        dim_before: det.dim_before,
        dim_after: det.dim_after,
        lp_agrees,
    })
}

/// Scenarios sharing one predictable time for jump `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub time: f64,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DkSet {
    pub k: usize,
    pub n_max: usize,
    /// Enumerated scenarios with `n >= k` whose dimension drops at step `k`.
    pub members: Vec<Scenario>,
    pub complement: Vec<Scenario>,
    /// Distinct predictable times, when evaluated against a prefix and `ell`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representatives: Option<Vec<Representative>>,
}

/// Groups `(time, item)` pairs whose times agree within `TIME_TOL`.
pub(crate) fn group_times<T>(mut items: Vec<(f64, T)>) -> Vec<(f64, Vec<T>)> {
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, Vec<T>)> = Vec::new();
    for (t, x) in items {
        match out.last_mut() {
            Some((t0, xs)) if (t - *t0).abs() <= TIME_TOL => xs.push(x),
            _ => out.push((t, vec![x])),
        }
    }
    out
}

pub fn dk_sets(
    model: &MarketModel,
    e0: usize,
    k: usize,
    n_max: usize,
    context: Option<(&Prefix, &[f64])>,
) -> Result<DkSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("jump index starts at 1".into()));
    }
    let mut members = Vec::new();
    let mut complement = Vec::new();
    for h in enumerate_scenarios(model, e0, n_max) {
        if h.n() < k {
            continue;
        }
        if suffix_dim(model, &h, k - 1)? == suffix_dim(model, &h, k)? + 1 {
            members.push(h);
        } else {
            complement.push(h);
        }
    }
    let representatives = match context {
        None => None,
        Some((prefix, ell)) => {
            if prefix.n_jumps() + 1 != k {
                return Err(Error::InconsistentPrefix(format!(
                    "prefix has {} jumps, jump {k} needs {}",
                    prefix.n_jumps(),
                    k - 1
                )));
            }
            let mut timed = Vec::new();
            for h in &members {
                let Ok(c) = prefix.continuation_of(h) else { continue };
                if let Some(b) = continuation_bounds(model, prefix, &c, ell)? {
                    timed.push((b.upper, h.clone()));
                }
            }
            Some(
                group_times(timed)
                    .into_iter()
                    .map(|(time, scenarios)| Representative { time, scenarios })
                    .collect(),
            )
        }
    };
    Ok(DkSet {
        k,
        n_max,
        members,
        complement,
        representatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn kh_never_determines() {
        let m = fixtures::kh();
        let h = Scenario::new(vec![0, 1, 2, 1]).unwrap();
        let ell = [h.cumulative_jump(&m)[0] + 0.01];
        let path = PathRecord::from_parts(&m, h.states().to_vec(), vec![0.2, 0.5, 0.7]).unwrap();
        for k in 1..=3 {
            let pre = Prefix::at_jump(&path, k - 1).unwrap();
            let d = is_determined(&m, &h, k, &ell, pre.remaining(), &pre.log_prices).unwrap();
            assert!(d.reachable && !d.determined);
        }
        let d = is_determined(&m, &h, 1, &[ell[0] + 0.5], 1.0, &[0.0]).unwrap();
        assert_eq!(d.reason.as_deref(), Some("unreachable"));
    }

    #[test]
    fn twostate_one_jump_is_determined() {
        let m = fixtures::twostate();
        let h = Scenario::new(vec![0, 1]).unwrap();
        let dt0 = 0.37;
        let ell = [1.1f64.ln() - 0.5 * dt0 + 0.5 * (1.0 - dt0)];
        assert!(is_determined(&m, &h, 1, &ell, 1.0, &[0.0]).unwrap().determined);
        assert_eq!(is_determined_lp(&m, &h, 1, &ell, 1.0, &[0.0]).unwrap(), Some(true));

        let path = PathRecord::from_parts(&m, vec![0, 1], vec![dt0]).unwrap();
        let b = predictable_bounds(&m, &Prefix::at_jump(&path, 0).unwrap(), &h, &ell).unwrap().unwrap();
        assert!((b.lower - dt0).abs() < 1e-12 && (b.upper - dt0).abs() < 1e-12);
    }

    #[test]
    fn last_jump_known_given_prefix() {
        let m = fixtures::twostate();
        let path = PathRecord::from_parts(&m, vec![0, 1, 0, 1], vec![0.2, 0.5, 0.81]).unwrap();
        let ell = path.terminal_log_prices().to_vec();
        let h = Scenario::new(path.states.clone()).unwrap();
        let pre = Prefix::at_jump(&path, 2).unwrap();
        let c = classify(&m, &pre, &h, &ell).unwrap();
        assert_eq!(c.mode, JumpMode::Determined);
        assert!(c.lp_agrees);
        assert!((c.bounds.unwrap().upper - 0.81).abs() < 1e-12);

        let pre = Prefix::at_jump(&path, 1).unwrap();
        let c = classify(&m, &pre, &h, &ell).unwrap();
        assert_eq!(c.mode, JumpMode::Undetermined);
        let b = c.bounds.unwrap();
        assert!(b.lower <= 0.5 && 0.5 <= b.upper);
    }

    #[test]
    fn inconsistent_prefix_rejected() {
        let m = fixtures::twostate();
        let path = PathRecord::from_parts(&m, vec![0, 1], vec![0.2]).unwrap();
        let pre = Prefix::at_jump(&path, 1).unwrap();
        let h = Scenario::new(vec![1, 0]).unwrap();
        assert!(matches!(
            predictable_bounds(&m, &pre, &h, &[0.0]),
            Err(Error::InconsistentPrefix(_))
        ));
    }

    #[test]
    fn dk_membership() {
        let k = fixtures::kh();
        for j in 1..=4 {
            assert!(dk_sets(&k, 0, j, 5, None).unwrap().members.is_empty());
        }
        let m = fixtures::twostate();
        let d = dk_sets(&m, 0, 3, 6, None).unwrap();
        assert_eq!(d.members.len(), 1);
        assert_eq!(d.members[0].n(), 3);
        assert_eq!(d.complement.len(), 3);
    }

    #[test]
    fn representatives_group_equal_times() {
        let m = fixtures::twostate();
        let path = PathRecord::from_parts(&m, vec![0, 1], vec![0.4]).unwrap();
        let ell = path.terminal_log_prices().to_vec();
        let pre = Prefix::at_jump(&path, 0).unwrap();
        let d = dk_sets(&m, 0, 1, 4, Some((&pre, &ell))).unwrap();
        let reps = d.representatives.unwrap();
        assert_eq!(reps.len(), 1);
        assert!((reps[0].time - 0.4).abs() < 1e-12);
    }
}
