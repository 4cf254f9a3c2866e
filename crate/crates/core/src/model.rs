//! Market model: a finite-state economy `Y` driving `m` risky assets.
//!
//! The chain jumps `e -> k` at rate `lambda[e][k]`. While in state `e` the
//! log-price of asset `i` grows at `mu[i][e]`, the bank account at `r[e]`,
//! and a transition `e -> k` multiplies the price by `exp(beta[i][e][k])`.
//! Everything downstream works with discounted log-prices
//! `L^i = log(S^i / S^0)`, whose drift in state `e` is `mu[i][e] - r[e]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw, user-facing model description (the JSON config schema).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub states: Vec<String>,
    /// Row-major `n x n` intensities; the diagonal is ignored.
    pub lambda: Vec<Vec<f64>>,
    #[serde(default)]
    pub r: Vec<f64>,
    pub horizon: f64,
    /// Starting state label; defaults to the first state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<String>,
    #[serde(default)]
    pub assets: Vec<AssetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetConfig {
    pub name: String,
    pub s0: f64,
    pub mu: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Asset {
    name: String,
    s0: f64,
    mu: Vec<f64>,
    beta: Vec<Vec<f64>>,
    gamma: Vec<Vec<f64>>,
}

impl Asset {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }
}

/// Validated, immutable market model.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    states: Vec<String>,
    lambda: Vec<Vec<f64>>,
    total: Vec<f64>,
    r: Vec<f64>,
    assets: Vec<Asset>,
    horizon: f64,
    initial_state: usize,
}

/// A validated model plus non-fatal findings (e.g. jump sizes given for
/// transitions that can never happen).
#[derive(Debug, Clone)]
pub struct Validated {
    pub model: MarketModel,
    pub warnings: Vec<String>,
}

fn check_finite(what: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn check_square(what: &str, m: &[Vec<f64>], n: usize) -> Result<()> {
    if m.len() != n {
        return Err(Error::dims(what, n, m.len()));
    }
    for row in m {
        if row.len() != n {
            return Err(Error::dims(what, n, row.len()));
        }
        check_finite(what, row)?;
    }
    Ok(())
}

pub fn validate_model(raw: &ModelConfig) -> Result<Validated> {
    let n = raw.states.len();
    if n == 0 {
        return Err(Error::InvalidModel("at least one state is required".into()));
    }
    for (i, s) in raw.states.iter().enumerate() {
        if raw.states[..i].contains(s) {
            return Err(Error::InvalidModel(format!("duplicate state label {s:?}")));
        }
    }
    check_square("lambda", &raw.lambda, n)?;
    let mut lambda = raw.lambda.clone();
    for e in 0..n {
        lambda[e][e] = 0.0;
        for k in 0..n {
            if lambda[e][k] < 0.0 {
                return Err(Error::NegativeIntensity {
                    from: raw.states[e].clone(),
                    to: raw.states[k].clone(),
                    value: lambda[e][k],
                });
            }
        }
    }
    let total = lambda.iter().map(|row| row.iter().sum()).collect();

    let r = if raw.r.is_empty() {
        vec![0.0; n]
    } else {
        if raw.r.len() != n {
            return Err(Error::dims("r", n, raw.r.len()));
        }
        check_finite("r", &raw.r)?;
        raw.r.clone()
    };

    if !(raw.horizon.is_finite() && raw.horizon > 0.0) {
        return Err(Error::NonPositiveHorizon(raw.horizon));
    }

    let mut warnings = Vec::new();
    let mut assets = Vec::with_capacity(raw.assets.len());
    for a in &raw.assets {
        if !(a.s0.is_finite() && a.s0 > 0.0) {
            return Err(Error::NonPositivePrice {
                asset: a.name.clone(),
                value: a.s0,
            });
        }
        if a.mu.len() != n {
            return Err(Error::dims(format!("mu of asset {}", a.name), n, a.mu.len()));
        }
        check_finite("mu", &a.mu)?;
        let beta = if a.beta.is_empty() {
            vec![vec![0.0; n]; n]
        } else {
            check_square(&format!("beta of asset {}", a.name), &a.beta, n)?;
            a.beta.clone()
        };
        for e in 0..n {
            for k in 0..n {
                if beta[e][k] != 0.0 && lambda[e][k] == 0.0 {
                    warnings.push(format!(
                        "asset {}: beta {} -> {} = {} is unused (intensity is zero)",
                        a.name, raw.states[e], raw.states[k], beta[e][k]
                    ));
                }
            }
        }
        let gamma = beta
            .iter()
            .map(|row| row.iter().map(|b| b.exp_m1()).collect())
            .collect();
        assets.push(Asset {
            name: a.name.clone(),
            s0: a.s0,
            mu: a.mu.clone(),
            beta,
            gamma,
        });
    }

    let initial_state = match &raw.initial_state {
        None => 0,
        Some(label) => raw
            .states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::UnknownState(label.clone()))?,
    };

    Ok(Validated {
        model: MarketModel {
            states: raw.states.clone(),
            lambda,
            total,
            r,
            assets,
            horizon: raw.horizon,
            initial_state,
        },
        warnings,
    })
}

impl MarketModel {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn label(&self, e: usize) -> &str {
        &self.states[e]
    }

    pub fn state_index(&self, label: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub fn assets(&self) -> &[Asset] {
        &self.assets
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn rate(&self, e: usize, k: usize) -> f64 {
        self.lambda[e][k]
    }

    pub fn rates(&self) -> &[Vec<f64>] {
        &self.lambda
    }

    /// Total jump rate out of `e`.
    pub fn total_rate(&self, e: usize) -> f64 {
        self.total[e]
    }

    pub fn short_rate(&self, e: usize) -> f64 {
        self.r[e]
    }

    pub fn mu(&self, asset: usize, e: usize) -> f64 {
        self.assets[asset].mu[e]
    }

    pub fn beta(&self, asset: usize, e: usize, k: usize) -> f64 {
        self.assets[asset].beta[e][k]
    }

    pub fn gamma(&self, asset: usize, e: usize, k: usize) -> f64 {
        self.assets[asset].gamma[e][k]
    }

    /// States directly reachable from `e`, in index order.
    pub fn reachable(&self, e: usize) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&k| k != e && self.lambda[e][k] > 0.0)
            .collect()
    }

    /// Drift of the discounted log-prices in state `e`: `mu^{ie} - r^e`.
    pub fn excess_drift(&self, e: usize) -> Vec<f64> {
        self.assets.iter().map(|a| a.mu[e] - self.r[e]).collect()
    }

    /// Jump of the log-prices on `e -> k`.
    pub fn jump(&self, e: usize, k: usize) -> Vec<f64> {
        self.assets.iter().map(|a| a.beta[e][k]).collect()
    }

    /// Relative price jumps on `e -> k`: `exp(beta) - 1`.
    pub fn relative_jump(&self, e: usize, k: usize) -> Vec<f64> {
        self.assets.iter().map(|a| a.gamma[e][k]).collect()
    }

    /// Initial discounted log-prices `log S^i_0`.
    pub fn initial_log_prices(&self) -> Vec<f64> {
        self.assets.iter().map(|a| a.s0.ln()).collect()
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<MarketModel> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        Ok(MarketModel {
            horizon,
            ..self.clone()
        })
    }

    pub fn with_initial_state(&self, e: usize) -> Result<MarketModel> {
        if e >= self.n_states() {
            return Err(Error::dims("initial state index", self.n_states(), e));
        }
        Ok(MarketModel {
            initial_state: e,
            ..self.clone()
        })
    }

    /// The same market with the chain running at the override intensities.
    pub fn under(&self, over: &IntensityOverride) -> Result<MarketModel> {
        if !check_equivalent(self, over)? {
            return Err(Error::NotEquivalent);
        }
        Ok(MarketModel {
            lambda: over.rates.clone(),
            total: over.rates.iter().map(|row| row.iter().sum()).collect(),
            ..self.clone()
        })
    }

    /// Normalized configuration: zero diagonal, explicit rates, start state
    /// and jump matrices.
    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            states: self.states.clone(),
            lambda: self.lambda.clone(),
            r: self.r.clone(),
            horizon: self.horizon,
            initial_state: Some(self.states[self.initial_state].clone()),
            assets: self
                .assets
                .iter()
                .map(|a| AssetConfig {
                    name: a.name.clone(),
                    s0: a.s0,
                    mu: a.mu.clone(),
                    beta: a.beta.clone(),
                })
                .collect(),
        }
    }

    /// Transition matrix `P_t` of the chain.
    ///
    /// Scaling and squaring around a uniformization series: the step is
    /// halved until `q t <= 1/2` (with `q` the largest total rate), the
    /// Poisson-weighted series of the uniformized kernel is summed until the
    /// remaining weight falls below 1e-17, and the result is squared back.
    /// Every term is non-negative.
    pub fn transition_matrix(&self, t: f64) -> Result<Vec<Vec<f64>>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
        }
        let n = self.n_states();
        let identity: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let q = self.total.iter().cloned().fold(0.0, f64::max);
        if q == 0.0 || t == 0.0 {
            return Ok(identity);
        }
        let mut squarings = 0u32;
        let mut step = t;
        while q * step > 0.5 {
            step *= 0.5;
            squarings += 1;
        }
        let kernel: Vec<Vec<f64>> = (0..n)
            .map(|e| {
                (0..n)
                    .map(|k| {
                        if e == k {
                            1.0 - self.total[e] / q
                        } else {
                            self.lambda[e][k] / q
                        }
                    })
                    .collect()
            })
            .collect();
        let qt = q * step;
        let mut weight = (-qt).exp();
        let mut remaining = 1.0 - weight;
        let mut power = identity.clone();
        let mut p: Vec<Vec<f64>> = power
            .iter()
            .map(|row| row.iter().map(|x| x * weight).collect())
            .collect();
        let mut j = 0u32;
        while remaining > 1e-17 && j < 200 {
            j += 1;
            power = mat_mul(&power, &kernel);
            weight *= qt / f64::from(j);
            remaining -= weight;
            for (prow, krow) in p.iter_mut().zip(&power) {
                for (x, y) in prow.iter_mut().zip(krow) {
                    *x += weight * y;
                }
            }
            if weight < 1e-20 {
                break;
            }
        }
        for _ in 0..squarings {
            p = mat_mul(&p, &p);
        }
        Ok(p)
    }
}

pub(crate) fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let p = b.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for (k, aik) in a[i].iter().enumerate() {
            if *aik == 0.0 {
                continue;
            }
            for j in 0..p {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// Alternative intensity matrix for a change of measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityOverride {
    rates: Vec<Vec<f64>>,
}

impl IntensityOverride {
    pub fn new(mut rates: Vec<Vec<f64>>) -> Result<Self> {
        let n = rates.len();
        check_square("override intensities", &rates, n)?;
        for e in 0..n {
            rates[e][e] = 0.0;
            if let Some(&v) = rates[e].iter().find(|v| **v < 0.0) {
                return Err(Error::NegativeIntensity {
                    from: e.to_string(),
                    to: "?".into(),
                    value: v,
                });
            }
        }
        Ok(Self { rates })
    }

    pub fn identity(model: &MarketModel) -> Self {
        Self {
            rates: model.rates().to_vec(),
        }
    }

    pub fn rates(&self) -> &[Vec<f64>] {
        &self.rates
    }

    pub fn rate(&self, e: usize, k: usize) -> f64 {
        self.rates[e][k]
    }

    pub fn total_rate(&self, e: usize) -> f64 {
        self.rates[e].iter().sum()
    }
}

/// Off-diagonal sign patterns agree.
pub fn equivalent_rates(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::dims("intensity matrices", a.len(), b.len()));
    }
    for (e, (ra, rb)) in a.iter().zip(b).enumerate() {
        if ra.len() != rb.len() {
            return Err(Error::dims("intensity matrix row", ra.len(), rb.len()));
        }
        for k in 0..ra.len() {
            if k != e && (ra[k] > 0.0) != (rb[k] > 0.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn check_equivalent(model: &MarketModel, over: &IntensityOverride) -> Result<bool> {
    equivalent_rates(model.rates(), over.rates())
}
