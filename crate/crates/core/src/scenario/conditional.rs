//! Samples from the law of the holding times given `H_T = h`.
//!
//! Conditioned on the scenario, `(Delta t_0, ..., Delta t_n)` has density
//! proportional to `exp(-sum_i a_i Delta t_i)` on the simplex
//! `{Delta t >= 0, sum Delta t = T}`. Proposals are uniform on the simplex
//! and accepted with probability `exp(-sum_i (a_i - a_min) Delta t_i)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::simulate::replicate;

/// Proposals allowed per requested sample before giving up.
const MAX_PROPOSALS_PER_SAMPLE: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSample {
    pub holding_times: Vec<Vec<f64>>,
    /// Terminal log-prices of each sample.
    pub ells: Vec<Vec<f64>>,
    pub proposals: usize,
    pub acceptance_rate: f64,
}

pub(crate) fn uniform_simplex<R: Rng + ?Sized>(n_parts: usize, total: f64, rng: &mut R) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..n_parts - 1).map(|_| rng.random::<f64>() * total).collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n_parts);
    let mut prev = 0.0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(total - prev);
    out
}

pub(crate) fn terminal_from_holding(model: &MarketModel, h: &Scenario, base: &[f64], dt: &[f64]) -> Vec<f64> {
    let mut l: Vec<f64> = base
        .iter()
        .zip(h.cumulative_jump(model))
        .map(|(a, b)| a + b)
        .collect();
    for (&e, &d) in h.states().iter().zip(dt) {
        for (li, mu) in l.iter_mut().zip(model.excess_drift(e)) {
            *li += mu * d;
        }
    }
    l
}

pub fn conditional_law_sample(
    model: &MarketModel,
    h: &Scenario,
    horizon: f64,
    base: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<ConditionalSample> {
    h.ensure_admissible(model)?;
    if base.len() != model.n_assets() {
        return Err(Error::dims("base log-prices", model.n_assets(), base.len()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be >= 0, got {horizon}")));
    }
    let a: Vec<f64> = h.states().iter().map(|&e| model.total_rate(e)).collect();
    let a_min = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let parts = h.n() + 1;
    let draws = replicate(n_samples, seed, |_, rng| {
        let mut tries = 0usize;
        loop {
            tries += 1;
            let dt = uniform_simplex(parts, horizon, rng);
            let log_acc: f64 = -a.iter().zip(&dt).map(|(ai, d)| (ai - a_min) * d).sum::<f64>();
            if log_acc >= 0.0 || rng.random::<f64>() < log_acc.exp() {
                return Some((dt, tries));
            }
            if tries >= MAX_PROPOSALS_PER_SAMPLE {
                return None;
            }
        }
    });
    let mut holding_times = Vec::with_capacity(n_samples);
    let mut proposals = 0;
    for d in draws {
        let Some((dt, tries)) = d else {
            return Err(Error::Numerical(format!(
                "conditional sampler for {h} rejected {MAX_PROPOSALS_PER_SAMPLE} proposals in a row"
            )));
        };
        proposals += tries;
        holding_times.push(dt);
    }
    let ells = holding_times
        .iter()
        .map(|dt| terminal_from_holding(model, h, base, dt))
        .collect();
    Ok(ConditionalSample {
        holding_times,
        ells,
        proposals,
        acceptance_rate: if proposals > 0 {
            n_samples as f64 / proposals as f64
        } else {
            1.0
        },
    })
}
