//! Insider compensators: the closed-form bridge for the up/down Poisson
//! model, and the accessible/inaccessible mixture of the next jump in
//! general models.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fiber::{FiberSampler, BURN_IN, THIN};
use super::posterior::{posterior_scenario_weights, Posterior, PosteriorMode, PosteriorOptions};
use super::{continuation_bounds, group_times, Prefix};
use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::scenario::{conditional_law_sample, suffix_dim, Scenario};
use crate::simulate::{path_rng, replicate};

/// Intensities above this are reported as saturated.
pub const INTENSITY_CAP: f64 = 1e12;

/// Non-negative solutions `(n+, n-)` of `n+ beta+ + n- beta- = target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSolutions {
    pub solutions: Vec<(usize, usize)>,
    pub unique: bool,
}

pub fn solve_counts(beta_plus: f64, beta_minus: f64, target: f64, n_max: usize, tol: f64) -> CountSolutions {
    let mut solutions = Vec::new();
    for np in 0..=n_max {
        for nm in 0..=(n_max - np) {
            if (np as f64 * beta_plus + nm as f64 * beta_minus - target).abs() <= tol {
                solutions.push((np, nm));
            }
        }
    }
    let unique = solutions.len() == 1;
    CountSolutions { solutions, unique }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeIntensity {
    pub plus: f64,
    pub minus: f64,
    pub saturated: bool,
}

/// Up/down Poisson model with the terminal counts revealed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeCompensator {
    /// Ordinary intensities; the insider intensity does not depend on them.
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub horizon: f64,
    pub n_plus: usize,
    pub n_minus: usize,
}

impl BridgeCompensator {
    pub fn new(lambda_plus: f64, lambda_minus: f64, horizon: f64, n_plus: usize, n_minus: usize) -> Result<Self> {
        if !(lambda_plus > 0.0 && lambda_minus > 0.0) {
            return Err(Error::InvalidArgument("intensities must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        Ok(Self {
            lambda_plus,
            lambda_minus,
            horizon,
            n_plus,
            n_minus,
        })
    }

    /// `(N_T - N_{t-}) / (T - t)` for both counters.
    pub fn intensity(&self, t: f64, plus_before: usize, minus_before: usize) -> Result<BridgeIntensity> {
        if !(t >= 0.0 && t < self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "time {t} must lie in [0, {})",
                self.horizon
            )));
        }
        if plus_before > self.n_plus || minus_before > self.n_minus {
            return Err(Error::InvalidArgument(format!(
                "observed counts ({plus_before}, {minus_before}) exceed the terminal counts ({}, {})",
                self.n_plus, self.n_minus
            )));
        }
        let left = self.horizon - t;
        let raw = |rem: usize| rem as f64 / left;
        let (p, m) = (raw(self.n_plus - plus_before), raw(self.n_minus - minus_before));
        let saturated = p > INTENSITY_CAP || m > INTENSITY_CAP;
        Ok(BridgeIntensity {
            plus: p.min(INTENSITY_CAP),
            minus: m.min(INTENSITY_CAP),
            saturated,
        })
    }

    /// `int_0^t (n - N_s) / (T - s) ds` for one counter with sorted jump
    /// times `jumps` and terminal count `n`.
    pub fn integrated(&self, n: usize, jumps: &[f64], t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "time {t} must lie in [0, {})",
                self.horizon
            )));
        }
        if jumps.len() > n {
            return Err(Error::InvalidArgument(format!(
                "{} jumps recorded, terminal count {n}",
                jumps.len()
            )));
        }
        let tt = self.horizon;
        let mut acc = 0.0;
        let mut a = 0.0;
        for (j, &s) in jumps.iter().chain(std::iter::once(&f64::INFINITY)).enumerate() {
            let b = s.min(t);
            if b > a {
                acc += (n - j) as f64 * ((tt - a) / (tt - b)).ln();
            }
            if s >= t {
                break;
            }
            a = s;
        }
        Ok(acc)
    }
}

/// Insider intensities at `t` given the counts seen strictly before `t`.
pub fn insider_compensator_kh(
    lambda_plus: f64,
    lambda_minus: f64,
    horizon: f64,
    t: f64,
    before: (usize, usize),
    terminal: (usize, usize),
) -> Result<BridgeIntensity> {
    BridgeCompensator::new(lambda_plus, lambda_minus, horizon, terminal.0, terminal.1)?.intensity(t, before.0, before.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureOptions {
    pub posterior: PosteriorOptions,
    /// Bins on `(tau_{k-1}, T]`.
    pub grid: usize,
    /// Next-jump samples per inaccessible continuation.
    pub n_time_samples: usize,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self {
            posterior: PosteriorOptions::default(),
            grid: 50,
            n_time_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibleAtom {
    pub time: f64,
    /// Conditional probability that the next jump happens at `time`.
    pub mass: f64,
    /// Jump of the compensator at `time`: `mass / P(no jump before time)`.
    pub hazard: f64,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InaccessiblePart {
    /// Bin edges, `grid + 1` values from `tau_{k-1}` to `T`.
    pub edges: Vec<f64>,
    /// Law density of the next jump time per bin.
    pub density: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Compensator intensity per bin (density over survival at the bin midpoint).
    pub intensity: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatorMixture {
    pub k: usize,
    pub start: f64,
    pub horizon: f64,
    pub accessible: Vec<AccessibleAtom>,
    pub inaccessible: InaccessiblePart,
    /// Posterior probability of no further jump.
    pub no_jump_mass: f64,
    pub total_mass: f64,
    pub posterior: Posterior,
}

fn seed_for(seed: u64, idx: usize) -> u64 {
    seed ^ (idx as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Holding-time draws of continuation `c` conditioned on reaching `ell`.
fn continuation_draws(
    model: &MarketModel,
    prefix: &Prefix,
    ell: &[f64],
    mode: PosteriorMode,
    c: &Scenario,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    match mode {
        PosteriorMode::Atomic => Ok(conditional_law_sample(model, c, prefix.remaining(), &prefix.log_prices, n, seed)?.holding_times),
        PosteriorMode::Continuous => {
            let sampler = FiberSampler::new(model, c, ell, prefix.remaining(), &prefix.log_prices)?.ok_or_else(|| {
                Error::Numerical(format!("continuation {c} has no interior point given ell"))
            })?;
            sampler.run(n, seed, BURN_IN, THIN)
        }
    }
}

fn is_accessible(model: &MarketModel, c: &Scenario) -> Result<bool> {
    Ok(c.n() >= 1 && suffix_dim(model, c, 0)? == suffix_dim(model, c, 1)? + 1)
}

/// Law and compensator of `tau_k`, `k = prefix.n_jumps() + 1`, for the insider.
pub fn insider_compensator_mixture(
    model: &MarketModel,
    prefix: &Prefix,
    ell: &[f64],
    opts: &MixtureOptions,
) -> Result<CompensatorMixture> {
    if opts.grid == 0 || opts.n_time_samples < 2 {
        return Err(Error::InvalidArgument("grid and sample counts must be positive".into()));
    }
    let posterior = posterior_scenario_weights(model, prefix, ell, &opts.posterior)?;
    let start = prefix.time;
    let horizon = prefix.horizon;
    let width = (horizon - start) / opts.grid as f64;
    let edges: Vec<f64> = (0..=opts.grid).map(|i| start + i as f64 * width).collect();
    let mut density = vec![0.0; opts.grid];
    let mut var = vec![0.0; opts.grid];
    let mut timed = Vec::new();
    let mut no_jump = 0.0;
    let mut inacc_mass = 0.0;
    for (idx, entry) in posterior.entries.iter().enumerate() {
        let c = &entry.continuation;
        let w = entry.weight;
        if w <= 0.0 {
            continue;
        }
        if c.n() == 0 {
            no_jump += w;
            continue;
        }
        if is_accessible(model, c)? {
            if let Some(b) = continuation_bounds(model, prefix, c, ell)? {
                timed.push((b.upper, (w, entry.scenario.clone())));
                continue;
            }
        }
        inacc_mass += w;
        let n = opts.n_time_samples;
        let draws = continuation_draws(model, prefix, ell, posterior.mode, c, n, seed_for(opts.posterior.seed, idx))?;
        let mut counts = vec![0usize; opts.grid];
        for dt in &draws {
            let b = ((dt[0] / width) as usize).min(opts.grid - 1);
            counts[b] += 1;
        }
        for (b, &cnt) in counts.iter().enumerate() {
            let p = cnt as f64 / n as f64;
            density[b] += w * p / width;
            var[b] += w * w * p * (1.0 - p) / n as f64 / (width * width);
        }
    }

    let groups = group_times(timed);
    let mut accessible: Vec<AccessibleAtom> = groups
        .into_iter()
        .map(|(time, items)| AccessibleAtom {
            time,
            mass: items.iter().map(|i| i.0).sum(),
            hazard: 0.0,
            scenarios: items.into_iter().map(|i| i.1).collect(),
        })
        .collect();

    // survival just before t
    let survival = |t: f64, atoms: &[AccessibleAtom]| -> f64 {
        let a: f64 = atoms.iter().filter(|x| x.time < t).map(|x| x.mass).sum();
        let mut d = 0.0;
        for b in 0..opts.grid {
            let (lo, hi) = (edges[b], edges[b + 1]);
            if hi <= t {
                d += density[b] * width;
            } else if lo < t {
                d += density[b] * (t - lo);
            }
        }
        (1.0 - a - d).max(0.0)
    };
    let snapshot = accessible.clone();
    for atom in accessible.iter_mut() {
        let s = survival(atom.time, &snapshot);
        atom.hazard = if s > 0.0 { atom.mass / s } else { f64::INFINITY };
    }
    let intensity = (0..opts.grid)
        .map(|b| {
            let s = survival(0.5 * (edges[b] + edges[b + 1]), &snapshot);
            if s > 0.0 {
                density[b] / s
            } else {
                0.0
            }
        })
        .collect();
    let acc_mass: f64 = accessible.iter().map(|a| a.mass).sum();
    Ok(CompensatorMixture {
        k: prefix.n_jumps() + 1,
        start,
        horizon,
        accessible,
        inaccessible: InaccessiblePart {
            edges,
            density,
            std_error: var.iter().map(|v| v.sqrt()).collect(),
            intensity,
            mass: inacc_mass,
        },
        no_jump_mass: no_jump,
        total_mass: acc_mass + inacc_mass,
        posterior,
    })
}

/// One conditioned continuation: the scenario from the current state and
/// its holding times (summing to the time left).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationDraw {
    pub continuation: Scenario,
    pub holding_times: Vec<f64>,
}

impl ContinuationDraw {
    /// Absolute time of the next jump, if any.
    pub fn next_jump(&self, prefix: &Prefix) -> Option<f64> {
        (self.continuation.n() >= 1).then(|| prefix.time + self.holding_times[0])
    }

    pub fn next_state(&self) -> Option<usize> {
        self.continuation.states().get(1).copied()
    }
}

/// Continuations drawn from the insider's conditional law: scenario from
/// the posterior (supported entries only), then holding times given it.
pub fn sample_continuations(
    model: &MarketModel,
    prefix: &Prefix,
    ell: &[f64],
    posterior: &Posterior,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<ContinuationDraw>> {
    let support: Vec<(usize, f64)> = posterior
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.weight >= posterior.threshold)
        .map(|(i, e)| (i, e.weight))
        .collect();
    let total: f64 = support.iter().map(|s| s.1).sum();
    if support.is_empty() || !(total > 0.0) {
        return Err(Error::ZeroPosteriorSupport);
    }
    let picks = replicate(n_paths, seed, |_, rng| {
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (j, &(_, w)) in support.iter().enumerate() {
            acc += w;
            if u < acc {
                return j;
            }
        }
        support.len() - 1
    });
    let mut counts = vec![0usize; support.len()];
    for &j in &picks {
        counts[j] += 1;
    }
    let mut pools = Vec::with_capacity(support.len());
    for (j, &(i, _)) in support.iter().enumerate() {
        let c = &posterior.entries[i].continuation;
        let sub = path_rng(seed, u64::MAX - j as u64).random::<u64>();
        pools.push(continuation_draws(model, prefix, ell, posterior.mode, c, counts[j], sub)?.into_iter());
    }
    Ok(picks
        .into_iter()
        .map(|j| ContinuationDraw {
            continuation: posterior.entries[support[j].0].continuation.clone(),
            holding_times: pools[j].next().expect("pool sized by the pick counts"),
        })
        .collect())
}
