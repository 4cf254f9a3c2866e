//! Posterior law of the remaining scenario given the prefix and `ell`.

use serde::{Deserialize, Serialize};

use super::{check_ell, Prefix, ATOM_TOL};
use crate::error::{Error, Result};
use crate::feasibility::affine_basis;
use crate::model::MarketModel;
use crate::scenario::{conditional_law_sample, enumerate_scenarios, scenario_prob, support_hull, Scenario, DEFAULT_NMAX};

/// Weights below this are treated as zero when building reachable sets.
pub const POSTERIOR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorOptions {
    /// Maximum number of remaining jumps enumerated.
    pub n_max: usize,
    /// Conditional-law samples per candidate (continuous case only).
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_NMAX,
            n_samples: 4000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorMode {
    /// `ell` sits on point-mass supports; weights are exact.
    Atomic,
    /// Weights combine `Pi` with density estimates at `ell`.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEntry {
    /// Remaining part, starting in the current state.
    pub continuation: Scenario,
    /// Observed states followed by the continuation.
    pub scenario: Scenario,
    pub prior: f64,
    pub weight: f64,
    pub std_error: f64,
    /// Affine dimension of the continuation's support.
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub time: f64,
    pub state: usize,
    pub mode: PosteriorMode,
    /// Common support dimension of the candidates.
    pub dim: usize,
    pub n_max: usize,
    pub threshold: f64,
    /// Prior mass of continuations with more than `n_max` jumps.
    pub tail_prior: f64,
    pub entries: Vec<PosteriorEntry>,
}

impl Posterior {
    /// Entries with weight at or above the threshold.
    pub fn supported(&self) -> impl Iterator<Item = &PosteriorEntry> {
        self.entries.iter().filter(|e| e.weight >= self.threshold)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn weight_of(&self, h: &Scenario) -> f64 {
        self.entries
            .iter()
            .find(|e| &e.scenario == h || &e.continuation == h)
            .map_or(0.0, |e| e.weight)
    }
}

struct Candidate {
    idx: usize,
    c: Scenario,
    prior: f64,
    dim: usize,
    vertex: Vec<f64>,
}

fn seed_for(seed: u64, idx: usize) -> u64 {
    seed.wrapping_add((idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Box-kernel density at `target` of points in `coords`, with
/// Freedman-Diaconis widths per coordinate. Returns `(density, se)`.
fn box_density(coords: &[Vec<f64>], target: &[f64]) -> (f64, f64) {
    let n = coords.len();
    let d = target.len();
    let scale = (n as f64).powf(-1.0 / 3.0);
    let mut widths = Vec::with_capacity(d);
    for j in 0..d {
        let mut col: Vec<f64> = coords.iter().map(|y| y[j]).collect();
        col.sort_by(f64::total_cmp);
        let iqr = quantile(&col, 0.75) - quantile(&col, 0.25);
        let spread = if iqr > 0.0 { iqr } else { col[n - 1] - col[0] };
        widths.push((2.0 * spread * scale).max(1e-12));
    }
    let count = coords
        .iter()
        .filter(|y| (0..d).all(|j| (y[j] - target[j]).abs() <= 0.5 * widths[j]))
        .count() as f64;
    let vol: f64 = widths.iter().product();
    let denom = n as f64 * vol;
    (count / denom, count.sqrt() / denom)
}

/// `P(H_T = h | L_T = ell, F_{s-})` over continuations from the prefix.
pub fn posterior_scenario_weights(
    model: &MarketModel,
    prefix: &Prefix,
    ell: &[f64],
    opts: &PosteriorOptions,
) -> Result<Posterior> {
    check_ell(model, ell)?;
    let e = prefix.state();
    let t = prefix.remaining();
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "prefix time {} is past the horizon {}",
            prefix.time, prefix.horizon
        )));
    }
    let observed = prefix.observed();
    let base = &prefix.log_prices;

    let mut prior_total = 0.0;
    let mut candidates = Vec::new();
    for (idx, c) in enumerate_scenarios(model, e, opts.n_max).into_iter().enumerate() {
        let prior = scenario_prob(model, &c, t)?.value;
        prior_total += prior;
        let hull = support_hull(model, &c, t, base)?;
        let inside = if hull.dim == 0 {
            (0..ell.len()).all(|i| (hull.vertices[0][i] - ell[i]).abs() <= ATOM_TOL)
        } else {
            hull.contains(ell)?
        };
        if inside && prior > 0.0 {
            candidates.push(Candidate {
                idx,
                c,
                prior,
                dim: hull.dim,
                vertex: hull.vertices[0].clone(),
            });
        }
    }
    let Some(dim) = candidates.iter().map(|c| c.dim).min() else {
        return Err(Error::ZeroPosteriorSupport);
    };
    candidates.retain(|c| c.dim == dim);

    let mode = if dim == 0 {
        PosteriorMode::Atomic
    } else {
        PosteriorMode::Continuous
    };
    let mut raw: Vec<(f64, f64)> = Vec::with_capacity(candidates.len());
    match mode {
        PosteriorMode::Atomic => raw.extend(candidates.iter().map(|c| (c.prior, 0.0))),
        PosteriorMode::Continuous => {
            if opts.n_samples < 2 {
                return Err(Error::InvalidArgument(
                    "continuous posterior needs at least two samples per candidate".into(),
                ));
            }
            for cand in &candidates {
                let hull = support_hull(model, &cand.c, t, base)?;
                let basis = affine_basis(&hull.vertices)?;
                let sample = conditional_law_sample(model, &cand.c, t, base, opts.n_samples, seed_for(opts.seed, cand.idx))?;
                let project = |l: &[f64]| -> Vec<f64> {
                    basis
                        .iter()
                        .map(|u| u.iter().zip(l).zip(&cand.vertex).map(|((a, x), v)| a * (x - v)).sum())
                        .collect()
                };
                let coords: Vec<Vec<f64>> = sample.ells.iter().map(|l| project(l)).collect();
                let (f, se) = box_density(&coords, &project(ell));
                raw.push((cand.prior * f, cand.prior * se));
            }
        }
    }
    let z: f64 = raw.iter().map(|r| r.0).sum();
    if !(z > 0.0) {
        return Err(Error::ZeroPosteriorSupport);
    }
    let entries = candidates
        .into_iter()
        .zip(raw)
        .map(|(cand, (w, se))| {
            let scenario = observed.concat(&cand.c).expect("continuation starts in the current state");
            PosteriorEntry {
                continuation: cand.c,
                scenario,
                prior: cand.prior,
                weight: w / z,
                std_error: se / z,
                dim: cand.dim,
            }
        })
        .collect();
    Ok(Posterior {
        time: prefix.time,
        state: e,
        mode,
        dim,
        n_max: opts.n_max,
        threshold: POSTERIOR_THRESHOLD,
        tail_prior: (1.0 - prior_total).max(0.0),
        entries,
    })
}
