//! Hit-and-run sampler for the holding times of a scenario given `ell`.
//!
//! The fiber `{dt >= 0 : sum_i (mu - r)^{e_i} dt_i = target, sum dt = tau}`
//! carries the density `exp(-sum_i a_i dt_i)` with `a_i` the total exit
//! rate of `e_i`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::residual_system;
use crate::error::{Error, Result};
use crate::feasibility::{null_space, solve_strict};
use crate::model::MarketModel;
use crate::scenario::Scenario;
use crate::simulate::path_rng;

pub const BURN_IN: usize = 500;
pub const THIN: usize = 10;

#[derive(Debug, Clone)]
pub struct FiberSampler {
    rates: Vec<f64>,
    basis: Vec<Vec<f64>>,
    start: Vec<f64>,
}

impl FiberSampler {
    /// `None` when the fiber has no strictly positive point.
    pub fn new(model: &MarketModel, c: &Scenario, ell: &[f64], horizon: f64, base: &[f64]) -> Result<Option<Self>> {
        let sys = residual_system(model, c, ell, horizon, base);
        let lin = sys.as_linear_system()?;
        let sol = solve_strict(&lin)?;
        let feasible = sol.is_feasible();
        let Some(start) = sol.witness.filter(|_| feasible) else {
            return Ok(None);
        };
        let rows: Vec<Vec<f64>> = (0..lin.rows())
            .map(|i| (0..lin.cols()).map(|j| lin.get(i, j)).collect())
            .collect();
        Ok(Some(Self {
            rates: c.states().iter().map(|&e| model.total_rate(e)).collect(),
            basis: null_space(&rows, lin.cols()),
            start,
        }))
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    fn step(&self, x: &mut [f64], rng: &mut ChaCha8Rng) {
        let z: Vec<f64> = (0..self.basis.len()).map(|_| rng.sample(StandardNormal)).collect();
        let mut dir = vec![0.0; x.len()];
        for (zj, v) in z.iter().zip(&self.basis) {
            for (d, vi) in dir.iter_mut().zip(v) {
                *d += zj * vi;
            }
        }
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            return;
        }
        dir.iter_mut().for_each(|d| *d /= norm);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (xi, di) in x.iter().zip(&dir) {
            if di.abs() < 1e-14 {
                continue;
            }
            let s = -xi / di;
            if *di > 0.0 {
                lo = lo.max(s);
            } else {
                hi = hi.min(s);
            }
        }
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return;
        }
        let slope: f64 = self.rates.iter().zip(&dir).map(|(a, d)| a * d).sum();
        let w = hi - lo;
        let u: f64 = rng.random();
        let s = if (slope * w).abs() < 1e-12 {
            lo + u * w
        } else if slope > 0.0 {
            lo - (u * (-slope * w).exp_m1()).ln_1p() / slope
        } else {
            // mirror around hi so the exponent stays negative
            let k = -slope;
            hi + (u * (-k * w).exp_m1()).ln_1p() / k
        };
        let s = s.clamp(lo, hi);
        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi = (*xi + s * di).max(0.0);
        }
    }

    /// `n` thinned draws of the holding-time vector.
    pub fn run(&self, n: usize, seed: u64, burn_in: usize, thin: usize) -> Result<Vec<Vec<f64>>> {
        if thin == 0 {
            return Err(Error::InvalidArgument("thinning must be at least 1".into()));
        }
        if self.basis.is_empty() {
            return Ok(vec![self.start.clone(); n]);
        }
        let mut rng = path_rng(seed, 0);
        let mut x = self.start.clone();
        for _ in 0..burn_in {
            self.step(&mut x, &mut rng);
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..thin {
                self.step(&mut x, &mut rng);
            }
            out.push(x.clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn determined_fiber_is_a_point() {
        let m = fixtures::twostate();
        let c = Scenario::new(vec![0, 1]).unwrap();
        let ell = [1.1f64.ln() - 0.5 * 0.3 + 0.5 * 0.7];
        let f = FiberSampler::new(&m, &c, &ell, 1.0, &[0.0]).unwrap().unwrap();
        assert_eq!(f.dim(), 0);
        let xs = f.run(3, 1, BURN_IN, THIN).unwrap();
        assert!((xs[0][0] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn draws_stay_on_fiber() {
        let m = fixtures::twostate();
        let c = Scenario::new(vec![0, 1, 0, 1]).unwrap();
        let ell = [1.1f64.ln() + 0.9f64.ln() + 1.1f64.ln() + 0.1];
        let f = FiberSampler::new(&m, &c, &ell, 1.0, &[0.0]).unwrap().unwrap();
        assert_eq!(f.dim(), 2);
        let jump = c.cumulative_jump(&m)[0];
        for dt in f.run(200, 4, 100, 5).unwrap() {
            assert!(dt.iter().all(|d| *d >= 0.0));
            assert!((dt.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let l = jump - 0.5 * (dt[0] + dt[2]) + 0.5 * (dt[1] + dt[3]);
            assert!((l - ell[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn truncated_exponential_matches_equal_rates_uniform() {
        // equal exit rates: the fiber law is uniform, so E[dt_0] is the
        // centroid of the segment dt_0 + dt_2 = 0.4 (dt_1 + dt_3 = 0.6).
        let m = fixtures::twostate();
        let c = Scenario::new(vec![0, 1, 0, 1]).unwrap();
        let jump = c.cumulative_jump(&m)[0];
        let ell = [jump - 0.5 * 0.4 + 0.5 * 0.6];
        let f = FiberSampler::new(&m, &c, &ell, 1.0, &[0.0]).unwrap().unwrap();
        let xs = f.run(20000, 9, BURN_IN, THIN).unwrap();
        let mean = xs.iter().map(|d| d[0]).sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.2).abs() < 0.01, "mean {mean}");
    }
}
