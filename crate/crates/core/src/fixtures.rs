//! Built-in test models.
//!
//! * `kh`: one stock whose log-price is `L_0 + mu t + beta_+ N^+ + beta_- N^-`
//!   for two independent Poisson processes, embedded in a 3-state cycle
//!   (`1 -> 2 -> 3 -> 1` are up-moves, the reverse ones down-moves).
//! * `kh_symmetric`: the same with `beta_- = -beta_+`, so the terminal
//!   price only reveals `n^+ - n^-`.
//! * `twostate`: a two-regime economy with opposite drifts and jumps.
//! * `twostate_pinned`: two regimes with large jumps and small drifts, so
//!   that the terminal price pins down the number of jumps.

use crate::model::{validate_model, AssetConfig, MarketModel, ModelConfig};

pub const KH_LAMBDA: f64 = 1.0;
pub const KH_MU: f64 = 0.01;

/// The cyclic embedding with the given up/down rates and log-jumps.
pub fn kh_with(lambda_plus: f64, lambda_minus: f64, beta_plus: f64, beta_minus: f64, mu: f64, horizon: f64) -> ModelConfig {
    let (p, m) = (lambda_plus, lambda_minus);
    let (bp, bm) = (beta_plus, beta_minus);
    ModelConfig {
        states: vec!["1".into(), "2".into(), "3".into()],
        lambda: vec![vec![0.0, p, m], vec![m, 0.0, p], vec![p, m, 0.0]],
        r: vec![0.0; 3],
        horizon,
        initial_state: None,
        assets: vec![AssetConfig {
            name: "S".into(),
            s0: 1.0,
            mu: vec![mu; 3],
            beta: vec![vec![0.0, bp, bm], vec![bm, 0.0, bp], vec![bp, bm, 0.0]],
        }],
    }
}

pub fn kh_config() -> ModelConfig {
    kh_with(KH_LAMBDA, KH_LAMBDA, 1.1f64.ln(), 0.9f64.ln(), KH_MU, 1.0)
}

pub fn kh_symmetric_config() -> ModelConfig {
    kh_with(KH_LAMBDA, KH_LAMBDA, 1.1f64.ln(), -(1.1f64.ln()), KH_MU, 1.0)
}

pub fn twostate_config() -> ModelConfig {
    ModelConfig {
        states: vec!["1".into(), "2".into()],
        lambda: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        r: vec![0.0, 0.0],
        horizon: 1.0,
        initial_state: None,
        assets: vec![AssetConfig {
            name: "S".into(),
            s0: 1.0,
            mu: vec![-0.5, 0.5],
            beta: vec![vec![0.0, 1.1f64.ln()], vec![0.9f64.ln(), 0.0]],
        }],
    }
}

pub fn twostate_pinned_config() -> ModelConfig {
    ModelConfig {
        assets: vec![AssetConfig {
            name: "S".into(),
            s0: 1.0,
            mu: vec![-0.05, 0.05],
            beta: vec![vec![0.0, 1.5f64.ln()], vec![0.5f64.ln(), 0.0]],
        }],
        ..twostate_config()
    }
}

fn build(cfg: ModelConfig) -> MarketModel {
    validate_model(&cfg).expect("fixture is valid").model
}

pub fn kh() -> MarketModel {
    build(kh_config())
}

pub fn kh_symmetric() -> MarketModel {
    build(kh_symmetric_config())
}

pub fn twostate() -> MarketModel {
    build(twostate_config())
}

pub fn twostate_pinned() -> MarketModel {
    build(twostate_pinned_config())
}

/// `(file stem, config)` for every fixture.
pub fn all() -> Vec<(&'static str, ModelConfig)> {
    vec![
        ("kh", kh_config()),
        ("kh_symmetric", kh_symmetric_config()),
        ("twostate", twostate_config()),
        ("twostate_pinned", twostate_pinned_config()),
    ]
}

pub fn by_name(name: &str) -> Option<ModelConfig> {
    all().into_iter().find(|(n, _)| *n == name).map(|(_, c)| c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_validate_cleanly() {
        for (name, cfg) in all() {
            let v = validate_model(&cfg).unwrap();
            assert!(v.warnings.is_empty(), "{name}: {:?}", v.warnings);
        }
    }

    #[test]
    fn kh_relative_jumps() {
        let m = kh();
        assert!((m.gamma(0, 0, 1) - 0.1).abs() < 1e-15);
        assert!((m.gamma(0, 0, 2) + 0.1).abs() < 1e-15);
        assert!((m.gamma(0, 2, 0) - 0.1).abs() < 1e-15);
        assert!((m.gamma(0, 1, 0) + 0.1).abs() < 1e-15);
    }
}
