//! `Pi_{e_0,t}(h)`: probability that the chain follows `h` exactly on `[0, t]`.
//!
//! With `a_i` the total rate of `e_i` and `c = prod lambda^{e_i e_{i+1}}`,
//! `Pi = c * P(S_{n-1} <= t < S_n)` for the partial sums `S_k` of
//! independent `Exp(a_i)` holding times. Two routes are provided: the
//! divided-difference form `c * sum_i e^{-a_i t} / prod_{j != i}(a_j - a_i)`
//! for distinct rates, and the convolution recursion
//! `F_n(s) = e^{-a_n s}`,
//! `F_k(s) = lambda_k int_0^s e^{-a_k u} F_{k+1}(s - u) du`
//! integrated numerically on a Chebyshev grid.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{enumerate_scenarios, Scenario};
use crate::error::{Error, Result};
use crate::model::MarketModel;

/// Divided differences are used only when every pair of rates is at least
/// this far apart on the time scale of the horizon.
const SEPARATION: f64 = 1.0;
const QUAD_TOL: f64 = 1e-12;
const MIN_NODES: usize = 16;
const MAX_NODES: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbRoute {
    Exact,
    ClosedForm,
    Quadrature,
    Inadmissible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioProb {
    pub value: f64,
    pub route: ProbRoute,
    /// Absolute error estimate of the numerical route (0 otherwise).
    pub error: f64,
}

impl ScenarioProb {
    pub fn is_admissible(&self) -> bool {
        self.route != ProbRoute::Inadmissible
    }
}

fn rates_along(model: &MarketModel, h: &Scenario) -> (Vec<f64>, f64) {
    let a: Vec<f64> = h.states().iter().map(|&e| model.total_rate(e)).collect();
    let c = h.states().windows(2).map(|w| model.rate(w[0], w[1])).product();
    (a, c)
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")))
    }
}

/// Divided-difference formula; `None` unless all total rates along `h`
/// are pairwise distinct.
pub fn prob_closed_form(model: &MarketModel, h: &Scenario, t: f64) -> Result<Option<f64>> {
    check_time(t)?;
    if !h.is_admissible(model) {
        return Ok(Some(0.0));
    }
    let (a, c) = rates_along(model, h);
    for i in 0..a.len() {
        for j in 0..i {
            if a[i] == a[j] {
                return Ok(None);
            }
        }
    }
    let mut sum = 0.0;
    for i in 0..a.len() {
        let mut denom = 1.0;
        for j in 0..a.len() {
            if j != i {
                denom *= a[j] - a[i];
            }
        }
        sum += (-a[i] * t).exp() / denom;
    }
    Ok(Some((c * sum).max(0.0)))
}

/// Convolution recursion with adaptive node doubling. Returns value and
/// error estimate.
pub fn prob_quadrature(model: &MarketModel, h: &Scenario, t: f64) -> Result<(f64, f64)> {
    check_time(t)?;
    if !h.is_admissible(model) {
        return Ok((0.0, 0.0));
    }
    let (a, _) = rates_along(model, h);
    let lam: Vec<f64> = h.states().windows(2).map(|w| model.rate(w[0], w[1])).collect();
    if h.n() == 0 {
        return Ok(((-a[0] * t).exp(), 0.0));
    }
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut prev = recursion(&a, &lam, t, MIN_NODES);
    let mut n = MIN_NODES * 2;
    while n <= MAX_NODES {
        let cur = recursion(&a, &lam, t, n);
        let err = (cur - prev).abs();
        if err <= QUAD_TOL {
            return Ok((cur.max(0.0), err));
        }
        prev = cur;
        n *= 2;
    }
    Err(Error::Numerical(format!(
        "scenario probability quadrature did not converge for {h}"
    )))
}

/// Pi with route selection: exact for `n = 0`, divided differences when the
/// rates are well separated, quadrature otherwise.
pub fn scenario_prob(model: &MarketModel, h: &Scenario, t: f64) -> Result<ScenarioProb> {
    check_time(t)?;
    if !h.is_admissible(model) {
        return Ok(ScenarioProb {
            value: 0.0,
            route: ProbRoute::Inadmissible,
            error: 0.0,
        });
    }
    if h.n() == 0 {
        return Ok(ScenarioProb {
            value: (-model.total_rate(h.start()) * t).exp(),
            route: ProbRoute::Exact,
            error: 0.0,
        });
    }
    let (a, c) = rates_along(model, h);
    if a.iter().all(|x| *x == a[0]) {
        // Gamma density: c t^n e^{-a t} / n!
        let n = h.n();
        let log_fact: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
        let value = c * (n as f64 * t.ln() - a[0] * t - log_fact).exp();
        return Ok(ScenarioProb {
            value: if t > 0.0 { value } else { 0.0 },
            route: ProbRoute::Exact,
            error: 0.0,
        });
    }
    let separated = (0..a.len()).all(|i| (0..i).all(|j| (a[i] - a[j]).abs() * t >= SEPARATION));
    if separated {
        if let Some(v) = prob_closed_form(model, h, t)? {
            return Ok(ScenarioProb {
                value: v,
                route: ProbRoute::ClosedForm,
                error: 0.0,
            });
        }
    }
    let (value, error) = prob_quadrature(model, h, t)?;
    Ok(ScenarioProb {
        value,
        route: ProbRoute::Quadrature,
        error,
    })
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Chebyshev nodes on `[0, 1]` with Gauss-Legendre rules on each `[0, s_i]`,
/// and the barycentric interpolation matrix for the shifted points
/// `s_i - u_iq`. Everything scales linearly with the horizon.
struct Rule {
    nodes: Vec<f64>,
    /// `u_iq` on the unit interval, row-major by node.
    offsets: Vec<f64>,
    weights: Vec<f64>,
    /// `((N + 1) * N) x (N + 1)` interpolation matrix.
    interp: Vec<f64>,
}

impl Rule {
    fn new(nn: usize) -> Self {
        let nodes: Vec<f64> = (0..=nn)
            .map(|j| 0.5 * (1.0 - (PI * j as f64 / nn as f64).cos()))
            .collect();
        let bary: Vec<f64> = (0..=nn)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == nn {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let (gx, gw) = gauss_legendre(nn);
        let mut offsets = Vec::with_capacity((nn + 1) * nn);
        let mut interp = Vec::with_capacity((nn + 1) * nn * (nn + 1));
        for &s in &nodes {
            for &x in &gx {
                let u = 0.5 * s * (1.0 + x);
                offsets.push(u);
                interp.extend(barycentric_row(&nodes, &bary, s - u));
            }
        }
        Self {
            nodes,
            offsets,
            weights: gw,
            interp,
        }
    }
}

fn barycentric_row(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&n| n == x) {
        let mut row = vec![0.0; nodes.len()];
        row[j] = 1.0;
        return row;
    }
    let c: Vec<f64> = nodes.iter().zip(bary).map(|(n, b)| b / (x - n)).collect();
    let den: f64 = c.iter().sum();
    c.into_iter().map(|v| v / den).collect()
}

fn rule(nn: usize) -> &'static Rule {
    static RULES: [OnceLock<Rule>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let idx = (nn / MIN_NODES).trailing_zeros() as usize;
    RULES[idx].get_or_init(|| Rule::new(nn))
}

/// `F_0(t)` from the recursion evaluated on `N + 1` Chebyshev points.
fn recursion(a: &[f64], lam: &[f64], t: f64, nn: usize) -> f64 {
    let r = rule(nn);
    let n = a.len() - 1;
    let q = nn;
    let mut f: Vec<f64> = r.nodes.iter().map(|&s| (-a[n] * s * t).exp()).collect();
    let mut g = vec![0.0; nn + 1];
    for k in (0..n).rev() {
        for (i, &s) in r.nodes.iter().enumerate() {
            if s == 0.0 {
                g[i] = 0.0;
                continue;
            }
            let mut integral = 0.0;
            for j in 0..q {
                let row = (i * q + j) * (nn + 1);
                let fv: f64 = r.interp[row..row + nn + 1]
                    .iter()
                    .zip(&f)
                    .map(|(c, v)| c * v)
                    .sum();
                integral += r.weights[j] * (-a[k] * r.offsets[i * q + j] * t).exp() * fv;
            }
            g[i] = lam[k] * 0.5 * s * t * integral;
        }
        std::mem::swap(&mut f, &mut g);
    }
    f[nn]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTable {
    pub start: usize,
    pub horizon: f64,
    pub n_max: usize,
    pub entries: Vec<(Scenario, ScenarioProb)>,
    /// `1 - sum Pi`, i.e. `P(N_T > n_max)` up to rounding.
    pub tail: f64,
}

pub fn scenario_table(model: &MarketModel, e0: usize, n_max: usize, t: f64) -> Result<ScenarioTable> {
    let entries = enumerate_scenarios(model, e0, n_max)
        .into_iter()
        .map(|h| scenario_prob(model, &h, t).map(|p| (h, p)))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = entries.iter().map(|(_, p)| p.value).sum();
    Ok(ScenarioTable {
        start: e0,
        horizon: t,
        n_max,
        entries,
        tail: 1.0 - total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_jumps_is_exact() {
        let m = fixtures::kh();
        let p = scenario_prob(&m, &Scenario::single(0), 0.7).unwrap();
        assert_eq!(p.value, (-2.0f64 * 0.7).exp());
        assert_eq!(p.route, ProbRoute::Exact);
    }

    #[test]
    fn equal_rates_one_jump() {
        let m = fixtures::twostate();
        let h = Scenario::new(vec![0, 1]).unwrap();
        let p = scenario_prob(&m, &h, 1.3).unwrap();
        assert_eq!(p.route, ProbRoute::Exact);
        assert!((p.value - 1.3 * (-1.3f64).exp()).abs() < 1e-15);
        assert!(prob_closed_form(&m, &h, 1.3).unwrap().is_none());
    }

    #[test]
    fn equal_rates_match_quadrature() {
        let m = fixtures::kh();
        for h in enumerate_scenarios(&m, 0, 5) {
            let p = scenario_prob(&m, &h, 0.8).unwrap();
            let (q, _) = prob_quadrature(&m, &h, 0.8).unwrap();
            assert_eq!(p.route, ProbRoute::Exact);
            assert!((p.value - q).abs() < 1e-12, "{h}");
        }
    }

    #[test]
    fn distinct_rates_one_jump() {
        let mut cfg = fixtures::twostate_config();
        cfg.lambda[1][0] = 4.0;
        let m = crate::model::validate_model(&cfg).unwrap().model;
        let h = Scenario::new(vec![0, 1]).unwrap();
        let expected = ((-4.0f64).exp() - (-1.0f64).exp()) / (1.0 - 4.0);
        let p = scenario_prob(&m, &h, 1.0).unwrap();
        assert_eq!(p.route, ProbRoute::ClosedForm);
        assert!((p.value - expected).abs() < 1e-15);
        let (q, _) = prob_quadrature(&m, &h, 1.0).unwrap();
        assert!((q - expected).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_is_zero() {
        let mut cfg = fixtures::twostate_config();
        cfg.lambda[1][0] = 0.0;
        cfg.assets[0].beta[1][0] = 0.0;
        let m = crate::model::validate_model(&cfg).unwrap().model;
        let p = scenario_prob(&m, &Scenario::new(vec![0, 1, 0]).unwrap(), 1.0).unwrap();
        assert_eq!(p.value, 0.0);
        assert!(!p.is_admissible());
    }

    #[test]
    fn table_mass() {
        let m = fixtures::kh();
        let tab = scenario_table(&m, 0, 10, 1.0).unwrap();
        // total jumps are Poisson(2)
        let tail: f64 = 1.0
            - (0..=10)
                .map(|k| (-2.0f64).exp() * 2.0f64.powi(k) / (1..=k).map(f64::from).product::<f64>())
                .sum::<f64>();
        assert!((tab.tail - tail).abs() < 1e-10);
    }
}
