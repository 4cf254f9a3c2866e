//! Exact path simulation of the chain and the discounted log-prices, plus a
//! reproducible parallel Monte Carlo harness.
//!
//! Path `i` of a run seeded with `seed` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so results do not depend
//! on the thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IntensityOverride, MarketModel};

/// One trajectory on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub horizon: f64,
    /// Visited states `e_0, ..., e_n`.
    pub states: Vec<usize>,
    /// Jump times `tau_1 < ... < tau_n`, all in `(0, T]`.
    pub jump_times: Vec<f64>,
    /// Discounted log-prices at time 0, right after each jump, and at `T`
    /// (`n + 2` rows of length `m`).
    pub log_prices: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// The model's configured initial state.
    Model,
    State(usize),
    /// Initial distribution over states.
    Law(Vec<f64>),
}

pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

impl PathRecord {
    /// Rebuilds the log-price path of a given state sequence and jump times.
    pub fn from_parts(model: &MarketModel, states: Vec<usize>, jump_times: Vec<f64>) -> Result<Self> {
        Self::from_parts_at(model, states, jump_times, &model.initial_log_prices())
    }

    pub fn from_parts_at(
        model: &MarketModel,
        states: Vec<usize>,
        jump_times: Vec<f64>,
        l0: &[f64],
    ) -> Result<Self> {
        let t_end = model.horizon();
        if states.is_empty() {
            return Err(Error::InvalidArgument("path without initial state".into()));
        }
        if jump_times.len() + 1 != states.len() {
            return Err(Error::dims("jump times", states.len() - 1, jump_times.len()));
        }
        if l0.len() != model.n_assets() {
            return Err(Error::dims("initial log-prices", model.n_assets(), l0.len()));
        }
        if let Some(&e) = states.iter().find(|&&e| e >= model.n_states()) {
            return Err(Error::dims("state index", model.n_states(), e));
        }
        let mut prev = 0.0;
        for (k, &t) in jump_times.iter().enumerate() {
            if !(t > prev && t <= t_end) {
                return Err(Error::InvalidArgument(format!(
                    "jump time {t} at index {k} is not increasing within (0, T]"
                )));
            }
            let (e, f) = (states[k], states[k + 1]);
            if model.rate(e, f) <= 0.0 || e == f {
                return Err(Error::InvalidArgument(format!(
                    "transition {} -> {} has zero intensity",
                    model.label(e),
                    model.label(f)
                )));
            }
            prev = t;
        }
        let mut log_prices = Vec::with_capacity(states.len() + 1);
        let mut l = l0.to_vec();
        log_prices.push(l.clone());
        let mut t0 = 0.0;
        for (k, &t) in jump_times.iter().enumerate() {
            let (e, f) = (states[k], states[k + 1]);
            let d = model.excess_drift(e);
            let b = model.jump(e, f);
            for i in 0..l.len() {
                l[i] += d[i] * (t - t0) + b[i];
            }
            log_prices.push(l.clone());
            t0 = t;
        }
        let d = model.excess_drift(*states.last().unwrap());
        for i in 0..l.len() {
            l[i] += d[i] * (t_end - t0);
        }
        log_prices.push(l);
        Ok(Self {
            horizon: t_end,
            states,
            jump_times,
            log_prices,
        })
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn initial_state(&self) -> usize {
        self.states[0]
    }

    pub fn final_state(&self) -> usize {
        *self.states.last().unwrap()
    }

    pub fn initial_log_prices(&self) -> &[f64] {
        &self.log_prices[0]
    }

    pub fn terminal_log_prices(&self) -> &[f64] {
        self.log_prices.last().unwrap()
    }

    /// Log-prices right after jump `k` (`k = 0` is time zero).
    pub fn log_prices_after_jump(&self, k: usize) -> &[f64] {
        &self.log_prices[k]
    }

    /// Time of jump `k`, with `tau_0 = 0`.
    pub fn tau(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.jump_times[k - 1]
        }
    }

    /// `Delta t_0, ..., Delta t_n`, the last one running to `T`.
    pub fn holding_times(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.states.len());
        let mut prev = 0.0;
        for &t in &self.jump_times {
            out.push(t - prev);
            prev = t;
        }
        out.push(self.horizon - prev);
        out
    }

    /// Number of jumps at or before `t`.
    pub fn jumps_by(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    /// Number of jumps strictly before `t`.
    pub fn jumps_before(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s < t)
    }

    /// `Y_t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        self.states[self.jumps_by(t)]
    }

    /// `N^{ek}_t`.
    pub fn count(&self, e: usize, k: usize, t: f64) -> usize {
        let n = self.jumps_by(t);
        (0..n)
            .filter(|&j| self.states[j] == e && self.states[j + 1] == k)
            .count()
    }

    /// `int_0^t 1{Y_s = e} ds`.
    pub fn occupation(&self, e: usize, t: f64) -> f64 {
        let t = t.min(self.horizon);
        let mut total = 0.0;
        let mut start = 0.0;
        for (j, &s) in self.states.iter().enumerate() {
            let end = if j < self.jump_times.len() {
                self.jump_times[j].min(t)
            } else {
                t
            };
            if s == e && end > start {
                total += end - start;
            }
            start = end;
            if start >= t {
                break;
            }
        }
        total
    }

    /// `L_t`, exact piecewise-linear interpolation.
    pub fn log_price_at(&self, model: &MarketModel, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, self.horizon);
        let k = self.jumps_by(t);
        let base = &self.log_prices[k];
        let d = model.excess_drift(self.states[k]);
        let dt = t - self.tau(k);
        base.iter().zip(&d).map(|(l, mu)| l + mu * dt).collect()
    }

    /// `N^{ek}_T - lambda^{ek} int_0^T 1{Y_s = e} ds`.
    pub fn compensated_count(&self, model: &MarketModel, e: usize, k: usize) -> f64 {
        self.count(e, k, self.horizon) as f64 - model.rate(e, k) * self.occupation(e, self.horizon)
    }
}

fn pick_initial<R: Rng + ?Sized>(model: &MarketModel, start: &Start, rng: &mut R) -> Result<usize> {
    match start {
        Start::Model => Ok(model.initial_state()),
        Start::State(e) => {
            if *e >= model.n_states() {
                Err(Error::dims("initial state index", model.n_states(), *e))
            } else {
                Ok(*e)
            }
        }
        Start::Law(p) => {
            if p.len() != model.n_states() {
                return Err(Error::dims("initial law", model.n_states(), p.len()));
            }
            let total: f64 = p.iter().sum();
            if p.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument("initial law is not a probability vector".into()));
            }
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            for (e, &w) in p.iter().enumerate() {
                acc += w;
                if u < acc {
                    return Ok(e);
                }
            }
            Ok(p.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        }
    }
}

/// Gillespie simulation on `rng`.
pub fn simulate_with_rng<R: Rng + ?Sized>(model: &MarketModel, start: &Start, rng: &mut R) -> Result<PathRecord> {
    let e0 = pick_initial(model, start, rng)?;
    let t_end = model.horizon();
    let mut states = vec![e0];
    let mut times = Vec::new();
    let mut t = 0.0;
    let mut e = e0;
    loop {
        let rate = model.total_rate(e);
        if rate <= 0.0 {
            break;
        }
        let u: f64 = rng.random();
        t += -(-u).ln_1p() / rate;
        if t > t_end {
            break;
        }
        let v = rng.random::<f64>() * rate;
        let mut acc = 0.0;
        let mut next = None;
        for k in 0..model.n_states() {
            let r = model.rate(e, k);
            if r > 0.0 {
                acc += r;
                next = Some(k);
                if v < acc {
                    break;
                }
            }
        }
        e = next.expect("positive total rate has a successor");
        states.push(e);
        times.push(t);
    }
    PathRecord::from_parts(model, states, times)
}

/// Deterministic path for `(model, start, seed)`.
pub fn simulate_path(model: &MarketModel, start: &Start, seed: u64) -> Result<PathRecord> {
    simulate_with_rng(model, start, &mut path_rng(seed, 0))
}

/// Path simulated with the override intensities in place of the model's.
pub fn simulate_under(
    model: &MarketModel,
    over: &IntensityOverride,
    start: &Start,
    seed: u64,
) -> Result<PathRecord> {
    simulate_path(&model.under(over)?, start, seed)
}

/// Runs `f(i, rng_i)` for `i in 0..n` in parallel, results in index order.
pub fn replicate<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| f(i, &mut path_rng(seed, i as u64)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    /// `|mean - target| <= k * SE`, with a float-level allowance when `SE = 0`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        let diff = (self.mean - target).abs();
        diff <= k * self.std_error || diff <= 1e-12 * target.abs().max(1.0)
    }

    /// Deviation from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff.abs() <= 1e-12 * target.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    }
}

/// Simulates `n_paths` paths in parallel and applies `f` to each.
///
/// The first failing path (by index) aborts the run.
pub fn mc_map<T, F>(model: &MarketModel, start: &Start, n_paths: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&PathRecord) -> Result<T> + Sync,
{
    let results = replicate(n_paths, seed, |_, rng| {
        simulate_with_rng(model, start, rng).and_then(|p| f(&p))
    });
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| match e {
                Error::Functional { .. } => e,
                other => Error::Functional {
                    index,
                    message: other.to_string(),
                },
            })
        })
        .collect()
}

pub fn mc_expectation<F>(model: &MarketModel, start: &Start, n_paths: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&PathRecord) -> Result<f64> + Sync,
{
    if n_paths < 2 {
        return Err(Error::InvalidArgument("at least two paths are required".into()));
    }
    let xs = mc_map(model, start, n_paths, seed, f)?;
    Ok(McEstimate::from_samples(&xs))
}

/// Vector-valued version of [`mc_expectation`]; every call of `f` must
/// return the same number of components.
pub fn mc_expectations<F>(
    model: &MarketModel,
    start: &Start,
    n_paths: usize,
    seed: u64,
    f: F,
) -> Result<Vec<McEstimate>>
where
    F: Fn(&PathRecord) -> Result<Vec<f64>> + Sync,
{
    if n_paths < 2 {
        return Err(Error::InvalidArgument("at least two paths are required".into()));
    }
    let rows = mc_map(model, start, n_paths, seed, f)?;
    let width = rows[0].len();
    if let Some((index, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(Error::Functional {
            index,
            message: format!("expected {width} components, got {}", r.len()),
        });
    }
    Ok((0..width)
        .map(|c| {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            McEstimate::from_samples(&col)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn absorbing_start_never_jumps() {
        let mut cfg = fixtures::twostate_config();
        cfg.lambda[0][1] = 0.0;
        cfg.assets[0].beta[0][1] = 0.0;
        let m = crate::model::validate_model(&cfg).unwrap().model;
        let p = simulate_path(&m, &Start::State(0), 7).unwrap();
        assert_eq!(p.n_jumps(), 0);
        let expected = m.initial_log_prices()[0] + m.excess_drift(0)[0] * m.horizon();
        assert!((p.terminal_log_prices()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = fixtures::twostate();
        assert_eq!(
            simulate_path(&m, &Start::Model, 11).unwrap(),
            simulate_path(&m, &Start::Model, 11).unwrap()
        );
        let id = IntensityOverride::identity(&m);
        assert_eq!(
            simulate_under(&m, &id, &Start::Model, 11).unwrap(),
            simulate_path(&m, &Start::Model, 11).unwrap()
        );
    }

    #[test]
    fn path_invariants() {
        let m = fixtures::kh();
        for seed in 0..50 {
            let p = simulate_path(&m, &Start::Model, seed).unwrap();
            for k in 0..p.n_jumps() {
                let (e, f) = (p.states[k], p.states[k + 1]);
                assert_ne!(e, f);
                assert!(m.rate(e, f) > 0.0);
                let pre = p.log_prices[k][0] + m.excess_drift(e)[0] * (p.tau(k + 1) - p.tau(k));
                assert!((p.log_prices[k + 1][0] - pre - m.beta(0, e, f)).abs() < 1e-12);
            }
            let total: f64 = (0..m.n_states()).map(|e| p.occupation(e, m.horizon())).sum();
            assert!((total - m.horizon()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_functional_has_zero_error() {
        let m = fixtures::twostate();
        let est = mc_expectation(&m, &Start::Model, 100, 1, |_| Ok(1.0)).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn failing_functional_reports_index() {
        let m = fixtures::twostate();
        let err = mc_expectation(&m, &Start::Model, 50, 1, |p| {
            if p.n_jumps() >= 3 {
                Err(Error::InvalidArgument("too many".into()))
            } else {
                Ok(0.0)
            }
        })
        .unwrap_err();
        let Error::Functional { index, .. } = err else { panic!("{err}") };
        let first = (0..50)
            .find(|&i| {
                simulate_with_rng(&m, &Start::Model, &mut path_rng(1, i as u64))
                    .unwrap()
                    .n_jumps()
                    >= 3
            })
            .unwrap();
        assert_eq!(index, first as usize);
    }
}
