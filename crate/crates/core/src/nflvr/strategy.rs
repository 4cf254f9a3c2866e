//! Trading on a failed condition: the certificate `xi` is held as constant
//! value weights (continuously rebalanced against the bank), so over a
//! window without jumps the discounted gain is `xi . (mu - r)^e dt` and a
//! jump `e -> f` adds `xi . gamma^{ef}`.

use serde::{Deserialize, Serialize};

use super::{FlvrReport, StepReport};
use crate::error::{Error, Result};
use crate::feasibility::{verify_certificate, TIME_TOL};
use crate::insider::{sample_continuations, Prefix};
use crate::model::MarketModel;
use crate::noarb::drift_system;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// Drift condition failed at `tau_{k-1}`.
    Inaccessible,
    /// Homogeneous condition failed at a predictable time; enter `eps` before it.
    Accessible { eps: Option<f64> },
}

/// Where and on which targets the certificate applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingWindow {
    pub k: usize,
    pub prefix: Prefix,
    pub targets: Vec<usize>,
    /// Predictable time of the accessible variant.
    pub predictable_time: Option<f64>,
    /// Earliest predictable time after `tau_{k-1}`; the inaccessible
    /// variant exits before it.
    pub first_predictable: Option<f64>,
}

impl TradingWindow {
    pub fn from_drift_failure(step: &StepReport) -> Self {
        Self {
            k: step.k,
            prefix: step.prefix.clone(),
            targets: step.sets.inaccessible.clone(),
            predictable_time: None,
            first_predictable: step.sets.accessible.iter().map(|a| a.time).reduce(f64::min),
        }
    }

    pub fn from_homogeneous_failure(step: &StepReport, time: f64, targets: &[usize]) -> Self {
        Self {
            k: step.k,
            prefix: step.prefix.clone(),
            targets: targets.to_vec(),
            predictable_time: Some(time),
            first_predictable: step.sets.accessible.iter().map(|a| a.time).reduce(f64::min),
        }
    }
}

/// `min(0.01 (tau'' - tau_{k-1}), (T - tau_{k-1}) / 10)`.
pub fn default_eps(window: &TradingWindow) -> Option<f64> {
    let p = window.predictable_time?;
    Some((0.01 * (p - window.prefix.time)).min(window.prefix.remaining() / 10.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageRun {
    pub variant: Variant,
    pub k: usize,
    pub state: usize,
    pub xi: Vec<f64>,
    pub entry: f64,
    /// `xi . (mu - r)^e`.
    pub drift_rate: f64,
    /// `(f, xi . gamma^{ef})` per target.
    pub jump_gains: Vec<(usize, f64)>,
    pub eps: Option<f64>,
    pub n_paths: usize,
    pub seed: u64,
    /// Paths on which a position was opened.
    pub traded: usize,
    pub pnl: Vec<f64>,
    pub floor: f64,
    pub mean: f64,
    pub fraction_positive: f64,
}

/// Simulates the strategy on continuations drawn from the insider's
/// conditional law at `tau_{k-1}`.
pub fn arbitrage_strategy(
    model: &MarketModel,
    report: &FlvrReport,
    window: &TradingWindow,
    xi: &[f64],
    variant: Variant,
    n_paths: usize,
    seed: u64,
) -> Result<ArbitrageRun> {
    let step = report
        .steps
        .iter()
        .find(|s| s.k == window.k)
        .ok_or_else(|| Error::InvalidArgument(format!("report has no step {}", window.k)))?;
    let e = window.prefix.state();
    let homogeneous = match variant {
        Variant::Inaccessible => false,
        Variant::Accessible { .. } => true,
    };
    if homogeneous != window.predictable_time.is_some() {
        return Err(Error::InvalidArgument("variant does not match the trading window".into()));
    }
    let sys = drift_system(model, e, &window.targets, homogeneous)?;
    verify_certificate(&sys, xi)?;

    let drift: Vec<f64> = model.excess_drift(e);
    let drift_rate: f64 = xi.iter().zip(&drift).map(|(a, b)| a * b).sum();
    let gain = |f: usize| -> f64 { xi.iter().zip(model.relative_jump(e, f)).map(|(a, b)| a * b).sum() };
    let jump_gains: Vec<(usize, f64)> = model.reachable(e).into_iter().map(|f| (f, gain(f))).collect();

    let draws = sample_continuations(model, &window.prefix, &report.ell, &step.posterior, n_paths, seed)?;
    let t0 = window.prefix.time;
    let horizon = window.prefix.horizon;
    let (entry, eps) = match variant {
        Variant::Inaccessible => (t0, None),
        Variant::Accessible { eps } => {
            let p = window.predictable_time.unwrap();
            let eps = match eps {
                Some(v) => v,
                None => default_eps(window).unwrap(),
            };
            if !(eps > 0.0 && p - eps > t0) {
                return Err(Error::InvalidArgument(format!(
                    "eps {eps} must be positive and leave the entry after {t0}"
                )));
            }
            (p - eps, Some(eps))
        }
    };
    let mut traded = 0;
    let pnl: Vec<f64> = draws
        .iter()
        .map(|d| {
            let jump = d.next_jump(&window.prefix);
            let f = d.next_state();
            match variant {
                Variant::Inaccessible => {
                    traded += 1;
                    let cap = window.first_predictable.unwrap_or(horizon).min(horizon);
                    match (jump, f) {
                        (Some(t), Some(f)) if t < cap - TIME_TOL => drift_rate * (t - entry) + gain(f),
                        _ => drift_rate * (cap - entry),
                    }
                }
                Variant::Accessible { .. } => {
                    let p = window.predictable_time.unwrap();
                    match (jump, f) {
                        (Some(t), _) if t < entry => 0.0,
                        (Some(t), Some(f)) if t <= p + TIME_TOL => {
                            traded += 1;
                            drift_rate * (t.min(p) - entry) + gain(f)
                        }
                        _ => {
                            traded += 1;
                            drift_rate * (p - entry)
                        }
                    }
                }
            }
        })
        .collect();
    let floor = pnl.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = pnl.iter().sum::<f64>() / pnl.len().max(1) as f64;
    let fraction_positive = pnl.iter().filter(|v| **v > 0.0).count() as f64 / pnl.len().max(1) as f64;
    Ok(ArbitrageRun {
        variant,
        k: window.k,
        state: e,
        xi: xi.to_vec(),
        entry,
        drift_rate,
        jump_gains,
        eps,
        n_paths,
        seed,
        traded,
        pnl,
        floor,
        mean,
        fraction_positive,
    })
}

impl FlvrReport {
    /// Window and certificate behind `tau'`, if any.
    pub fn drift_window(&self) -> Option<(TradingWindow, Vec<f64>)> {
        let s = self.drift_failure()?;
        let xi = s.check.condition1.certificate.as_ref()?.xi.clone();
        Some((TradingWindow::from_drift_failure(s), xi))
    }

    /// Window and certificate behind `tau''`, if any.
    pub fn homogeneous_window(&self) -> Option<(TradingWindow, Vec<f64>)> {
        let (s, c) = self.homogeneous_failure()?;
        let xi = c.solution.certificate.as_ref()?.xi.clone();
        Some((TradingWindow::from_homogeneous_failure(s, c.time, &c.targets), xi))
    }
}
