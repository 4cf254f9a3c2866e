//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Sized for the small systems this crate produces (tens of rows and
//! columns). All variables are non-negative; bounds are expressed as rows.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const PHASE1_TOL: f64 = 1e-9;
const DRIVE_OUT_EPS: f64 = 1e-9;
const MAX_ITERATIONS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// `maximize c.x  s.t.  rows, x >= 0`.
#[derive(Debug, Clone)]
pub(crate) struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl LinearProgram {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            objective: vec![0.0; n],
            rows: Vec::new(),
        }
    }

    pub fn maximize(&mut self, c: Vec<f64>) -> &mut Self {
        debug_assert_eq!(c.len(), self.n);
        self.objective = c;
        self
    }

    #[cfg(test)]
    pub fn minimize(&mut self, c: Vec<f64>) -> &mut Self {
        self.maximize(c.into_iter().map(|v| -v).collect())
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        debug_assert_eq!(coeffs.len(), self.n);
        self.rows.push((coeffs, rel, rhs));
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        if self
            .rows
            .iter()
            .any(|(c, _, b)| !b.is_finite() || c.iter().any(|v| !v.is_finite()))
            || self.objective.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("linear program".into()));
        }

        // Normalize rows: unit max coefficient, non-negative right-hand side.
        let mut rows = Vec::with_capacity(self.rows.len());
        for (coeffs, rel, rhs) in &self.rows {
            let scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                let ok = match rel {
                    Relation::Eq => rhs.abs() <= PHASE1_TOL,
                    Relation::Le => *rhs >= -PHASE1_TOL,
                    Relation::Ge => *rhs <= PHASE1_TOL,
                };
                if !ok {
                    return Ok(LpOutcome::Infeasible);
                }
                continue;
            }
            let mut c: Vec<f64> = coeffs.iter().map(|v| v / scale).collect();
            let mut b = rhs / scale;
            let mut r = *rel;
            if b < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
                b = -b;
                r = match r {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            rows.push((c, r, b));
        }

        let m = rows.len();
        let n = self.n;
        let n_slack = rows
            .iter()
            .filter(|(_, r, _)| *r != Relation::Eq)
            .count();
        let n_art = rows
            .iter()
            .filter(|(_, r, _)| *r != Relation::Le)
            .count();
        let first_art = n + n_slack;
        let width = n + n_slack + n_art;

        let mut tab = vec![vec![0.0; width + 1]; m];
        let mut basis = vec![0usize; m];
        let (mut s, mut a) = (n, first_art);
        for (i, (c, r, b)) in rows.iter().enumerate() {
            tab[i][..n].copy_from_slice(c);
            tab[i][width] = *b;
            match r {
                Relation::Le => {
                    tab[i][s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    tab[i][s] = -1.0;
                    s += 1;
                    tab[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    tab[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
            }
        }

        let mut t = Tableau {
            tab,
            basis,
            width,
            iterations: 0,
        };

        if n_art > 0 {
            let mut cost = vec![0.0; width];
            cost[first_art..].iter_mut().for_each(|c| *c = 1.0);
            let bounded = t.run(&cost, width)?;
            debug_assert!(bounded, "phase one is always bounded");
            let infeasibility: f64 = t
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= first_art)
                .map(|(i, _)| t.tab[i][width])
                .sum();
            if infeasibility > PHASE1_TOL {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive remaining artificials out of the basis; drop redundant rows.
            let mut i = 0;
            while i < t.tab.len() {
                if t.basis[i] >= first_art {
                    let col = (0..first_art).find(|&j| t.tab[i][j].abs() > DRIVE_OUT_EPS);
                    match col {
                        Some(j) => {
                            t.pivot(i, j);
                            i += 1;
                        }
                        None => {
                            t.tab.remove(i);
                            t.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }

        let mut cost = vec![0.0; width];
        for j in 0..n {
            cost[j] = -self.objective[j];
        }
        if !t.run(&cost, first_art)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; n];
        for (i, &b) in t.basis.iter().enumerate() {
            if b < n {
                x[b] = t.tab[i][width].max(0.0);
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

struct Tableau {
    tab: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    iterations: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.tab[row][col];
        for v in self.tab[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.tab[row].clone();
        for (i, r) in self.tab.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for j in 0..=w {
                    r[j] -= f * pivot_row[j];
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Minimizes `cost` over columns `< allowed`. Returns false if unbounded.
    fn run(&mut self, cost: &[f64], allowed: usize) -> Result<bool> {
        let w = self.width;
        loop {
            self.iterations += 1;
            if self.iterations > MAX_ITERATIONS {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
            // Reduced costs recomputed each pass; the tableaus here are tiny.
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let d = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(i, &b)| cost[b] * self.tab[i][j])
                        .sum::<f64>();
                d < -COST_EPS
            });
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.tab.len() {
                let a = self.tab[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.tab[i][w] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14
                                || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }
}
