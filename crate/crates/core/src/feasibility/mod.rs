//! Linear feasibility with strict positivity, hull membership, affine rank,
//! and bounds on the first holding time of a scenario.

mod lp;
mod rank;

use serde::{Deserialize, Serialize};

pub(crate) use lp::{LinearProgram, LpOutcome, Relation};
pub use rank::{affine_basis, affine_dim, null_space, RANK_RTOL};

use crate::error::{Error, Result};

/// Threshold (after column scaling) below which a component is not
/// considered strictly positive.
pub const POS_EPS: f64 = 1e-9;
/// Residual allowed for `A x = b` on a returned witness.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Two time bounds closer than this are reported as a determined time.
pub const TIME_TOL: f64 = 1e-9;

/// `A x = b` with `A` stored row-major, `m x p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    m: usize,
    p: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl LinearSystem {
    pub fn from_rows(rows: &[Vec<f64>], b: Vec<f64>) -> Result<Self> {
        let m = b.len();
        if rows.len() != m {
            return Err(Error::dims("system rows", m, rows.len()));
        }
        let p = rows.first().map_or(0, Vec::len);
        let mut a = Vec::with_capacity(m * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::dims("system row", p, r.len()));
            }
            a.extend_from_slice(r);
        }
        Self::check(m, p, a, b)
    }

    /// Builds the system from its columns (one per unknown), each of length `m`.
    pub fn from_columns(m: usize, columns: &[Vec<f64>], b: Vec<f64>) -> Result<Self> {
        if b.len() != m {
            return Err(Error::dims("right-hand side", m, b.len()));
        }
        let p = columns.len();
        let mut a = vec![0.0; m * p];
        for (j, c) in columns.iter().enumerate() {
            if c.len() != m {
                return Err(Error::dims("system column", m, c.len()));
            }
            for i in 0..m {
                a[i * p + j] = c[i];
            }
        }
        Self::check(m, p, a, b)
    }

    fn check(m: usize, p: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear system".into()));
        }
        Ok(Self { m, p, a, b })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.p + j]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.get(i, j)).collect()
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        (0..self.m)
            .map(|i| {
                let ax: f64 = (0..self.p).map(|j| self.get(i, j) * x[j]).sum();
                (ax - self.b[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    fn is_homogeneous(&self) -> bool {
        self.b.iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    InteriorFeasible,
    Infeasible,
}

/// A vector `xi` with `xi^T A >= 0`, `xi^T b <= 0`, not all of these zero:
/// no strictly positive solution of `A x = b` exists.
///
/// `strict` means every entry of `xi^T A` is positive and, for `b != 0`,
/// `xi^T b < 0` as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub xi: Vec<f64>,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilitySolution {
    pub status: FeasibilityStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    /// Max-min component of the scaled solution; `None` when `A x = b` has
    /// no non-negative solution at all.
    pub slack: Option<f64>,
}

impl FeasibilitySolution {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::InteriorFeasible
    }
}

/// Decides whether `A x = b` has a solution with every `x_j > 0`.
///
/// Columns are scaled to unit max-norm and the LP
/// `max t  s.t.  A' y = b,  y_j >= t,  t <= 1` is solved; feasible iff
/// `t* >= POS_EPS`. Infeasible systems come back with a verified
/// certificate.
pub fn solve_strict(sys: &LinearSystem) -> Result<FeasibilitySolution> {
    let scales: Vec<f64> = (0..sys.p)
        .map(|j| {
            let s = (0..sys.m).fold(0.0f64, |s, i| s.max(sys.get(i, j).abs()));
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    solve_strict_scaled(sys, &scales)
}

/// As [`solve_strict`], with the substitution `x_j = reference_j * y_j`.
///
/// The max-slack point is then the one furthest from the boundary in units
/// of `reference`, which makes `reference` itself the answer whenever it is
/// a solution.
pub fn solve_strict_scaled(sys: &LinearSystem, reference: &[f64]) -> Result<FeasibilitySolution> {
    if reference.len() != sys.p {
        return Err(Error::dims("reference scales", sys.p, reference.len()));
    }
    if reference.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::InvalidArgument("reference scales must be positive".into()));
    }
    if sys.p == 0 {
        if sys.b.iter().all(|v| v.abs() <= RESIDUAL_TOL) {
            return Ok(FeasibilitySolution {
                status: FeasibilityStatus::InteriorFeasible,
                witness: Some(Vec::new()),
                certificate: None,
                slack: None,
            });
        }
        return infeasible(sys, None);
    }

    let (m, p) = (sys.m, sys.p);
    // Variables: y (p), t_plus, t_minus.
    let mut lp = LinearProgram::new(p + 2);
    let mut obj = vec![0.0; p + 2];
    obj[p] = 1.0;
    obj[p + 1] = -1.0;
    lp.maximize(obj);
    for i in 0..m {
        let mut row = vec![0.0; p + 2];
        let mut sum = 0.0;
        for j in 0..p {
            row[j] = sys.get(i, j) * reference[j];
            sum += row[j];
        }
        row[p] = sum;
        row[p + 1] = -sum;
        lp.constrain(row, Relation::Eq, sys.b[i]);
    }
    let mut cap = vec![0.0; p + 2];
    cap[p] = 1.0;
    lp.constrain(cap, Relation::Le, 1.0);

    let (z, t) = match lp.solve()? {
        LpOutcome::Optimal { x, .. } => {
            let t = x[p] - x[p + 1];
            (x, t)
        }
        LpOutcome::Infeasible => return infeasible(sys, None),
        LpOutcome::Unbounded => {
            return Err(Error::Numerical("strict feasibility LP unbounded".into()))
        }
    };
    if t >= POS_EPS {
        let x: Vec<f64> = (0..p).map(|j| reference[j] * (z[j] + t)).collect();
        let res = sys.residual(&x);
        let bscale = sys.b.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        if res > RESIDUAL_TOL * bscale {
            return Err(Error::Numerical(format!(
                "witness residual {res:e} exceeds tolerance"
            )));
        }
        return Ok(FeasibilitySolution {
            status: FeasibilityStatus::InteriorFeasible,
            witness: Some(x),
            certificate: None,
            slack: Some(t),
        });
    }
    infeasible(sys, Some(t))
}

fn infeasible(sys: &LinearSystem, slack: Option<f64>) -> Result<FeasibilitySolution> {
    let cert = find_certificate(sys)?;
    Ok(FeasibilitySolution {
        status: FeasibilityStatus::Infeasible,
        witness: None,
        certificate: Some(cert),
        slack,
    })
}

/// Columns of `[A, -b]` (the `-b` column dropped when `b = 0`).
fn alternative_columns(sys: &LinearSystem) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = (0..sys.p).map(|j| sys.column(j)).collect();
    if !sys.is_homogeneous() {
        cols.push(sys.b.iter().map(|v| -v).collect());
    }
    cols
}

fn certificate_tol(sys: &LinearSystem, xi: &[f64]) -> f64 {
    let amax = sys
        .a
        .iter()
        .chain(&sys.b)
        .fold(0.0f64, |s, v| s.max(v.abs()));
    let ximax = xi.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    1e-12 * amax.max(1.0) * ximax.max(1.0) * (sys.m.max(1) as f64)
}

/// Checks `xi` against `sys`; returns whether it is strict.
pub fn verify_certificate(sys: &LinearSystem, xi: &[f64]) -> Result<bool> {
    if xi.len() != sys.m {
        return Err(Error::dims("certificate", sys.m, xi.len()));
    }
    let tol = certificate_tol(sys, xi);
    let z: Vec<f64> = alternative_columns(sys)
        .iter()
        .map(|c| c.iter().zip(xi).map(|(a, x)| a * x).sum())
        .collect();
    if let Some((j, v)) = z.iter().enumerate().find(|(_, v)| **v < -tol) {
        return Err(Error::InvalidCertificate(format!(
            "component {j} of the separating functional is negative ({v:e})"
        )));
    }
    if !z.iter().any(|v| *v > tol) {
        return Err(Error::InvalidCertificate(
            "separating functional vanishes identically".into(),
        ));
    }
    Ok(z.iter().all(|v| *v > tol))
}

fn find_certificate(sys: &LinearSystem) -> Result<Certificate> {
    let m = sys.m;
    let cols = alternative_columns(sys);
    let scaled: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let s = c.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if s > 0.0 {
                c.iter().map(|v| v / s).collect()
            } else {
                c.clone()
            }
        })
        .collect();

    // xi = w - 1 with w in [0, 2]^m.
    let box_rows = |lp: &mut LinearProgram, n: usize| {
        for i in 0..m {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            lp.constrain(row, Relation::Le, 2.0);
        }
    };

    // Strict alternative: max s  s.t.  xi . c_j >= s,  s <= 1.
    let mut lp = LinearProgram::new(m + 1);
    let mut obj = vec![0.0; m + 1];
    obj[m] = 1.0;
    lp.maximize(obj);
    box_rows(&mut lp, m + 1);
    for c in &scaled {
        let mut row: Vec<f64> = c.clone();
        row.push(-1.0);
        lp.constrain(row, Relation::Ge, c.iter().sum());
    }
    let mut cap = vec![0.0; m + 1];
    cap[m] = 1.0;
    lp.constrain(cap, Relation::Le, 1.0);
    if let LpOutcome::Optimal { x, .. } = lp.solve()? {
        if x[m] > POS_EPS {
            let xi: Vec<f64> = x[..m].iter().map(|w| w - 1.0).collect();
            if let Some(c) = finish_certificate(sys, xi)? {
                return Ok(c);
            }
        }
    }

    // Weak alternative: max sum_j xi . c_j  s.t.  0 <= xi . c_j <= 1.
    let mut lp = LinearProgram::new(m);
    let mut obj = vec![0.0; m];
    for c in &scaled {
        for i in 0..m {
            obj[i] += c[i];
        }
    }
    lp.maximize(obj);
    box_rows(&mut lp, m);
    for c in &scaled {
        let off: f64 = c.iter().sum();
        lp.constrain(c.clone(), Relation::Ge, off);
        lp.constrain(c.clone(), Relation::Le, off + 1.0);
    }
    if let LpOutcome::Optimal { x, .. } = lp.solve()? {
        let xi: Vec<f64> = x.iter().map(|w| w - 1.0).collect();
        if let Some(c) = finish_certificate(sys, xi)? {
            return Ok(c);
        }
    }
    Err(Error::Numerical(
        "no strictly positive solution found and no separating certificate either".into(),
    ))
}

fn finish_certificate(sys: &LinearSystem, mut xi: Vec<f64>) -> Result<Option<Certificate>> {
    let norm = xi.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if norm == 0.0 {
        return Ok(None);
    }
    xi.iter_mut().for_each(|v| {
        *v /= norm;
        if v.abs() < 1e-15 {
            *v = 0.0;
        }
    });
    match verify_certificate(sys, &xi) {
        Ok(strict) => Ok(Some(Certificate { xi, strict })),
        Err(Error::InvalidCertificate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Closed convex hull membership via convex weights.
pub fn hull_member(vertices: &[Vec<f64>], ell: &[f64]) -> Result<bool> {
    let Some(v0) = vertices.first() else {
        return Err(Error::InvalidArgument("convex hull of an empty set".into()));
    };
    let m = v0.len();
    if ell.len() != m {
        return Err(Error::dims("point", m, ell.len()));
    }
    for v in vertices {
        if v.len() != m {
            return Err(Error::dims("vertex", m, v.len()));
        }
    }
    // Shift to the first vertex so the rows are not dominated by the offset.
    let q = vertices.len();
    let mut lp = LinearProgram::new(q);
    for i in 0..m {
        let row: Vec<f64> = vertices.iter().map(|v| v[i] - v0[i]).collect();
        lp.constrain(row, Relation::Eq, ell[i] - v0[i]);
    }
    lp.constrain(vec![1.0; q], Relation::Eq, 1.0);
    Ok(matches!(lp.solve()?, LpOutcome::Optimal { .. }))
}

/// Holding-time system of a scenario: find `dt >= 0` with
/// `sum_j drifts[j] * dt_j = target` and `sum_j dt_j = horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldingTimeSystem {
    /// One drift vector (length `m`) per visited state.
    pub drifts: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub horizon: f64,
}

impl HoldingTimeSystem {
    pub fn as_linear_system(&self) -> Result<LinearSystem> {
        let m = self.target.len();
        let cols: Vec<Vec<f64>> = self
            .drifts
            .iter()
            .map(|d| {
                let mut c = d.clone();
                c.push(1.0);
                c
            })
            .collect();
        let mut b = self.target.clone();
        b.push(self.horizon);
        LinearSystem::from_columns(m + 1, &cols, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeBounds {
    Empty,
    Bounds {
        lo: f64,
        hi: f64,
        /// Max-min holding time (scaled) of the open system; `<= POS_EPS`
        /// means only boundary points of the closure solve it.
        slack: f64,
    },
}

impl TimeBounds {
    pub fn is_determined(&self) -> bool {
        matches!(self, TimeBounds::Bounds { lo, hi, .. } if hi - lo <= TIME_TOL)
    }
}

/// Infimum and supremum of the first holding time over the closed system.
pub fn time_bounds(sys: &HoldingTimeSystem) -> Result<TimeBounds> {
    if sys.drifts.is_empty() {
        return Err(Error::InvalidArgument("scenario without states".into()));
    }
    if !(sys.horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be >= 0, got {}",
            sys.horizon
        )));
    }
    let lin = sys.as_linear_system()?;
    let q = lin.cols();
    let build = |dir: f64| {
        let mut lp = LinearProgram::new(q);
        let mut obj = vec![0.0; q];
        obj[0] = dir;
        lp.maximize(obj);
        for i in 0..lin.rows() {
            lp.constrain((0..q).map(|j| lin.get(i, j)).collect(), Relation::Eq, lin.rhs()[i]);
        }
        lp
    };
    let hi = match build(1.0).solve()? {
        LpOutcome::Optimal { value, .. } => value,
        LpOutcome::Infeasible => return Ok(TimeBounds::Empty),
        LpOutcome::Unbounded => return Err(Error::Numerical("time bound LP unbounded".into())),
    };
    let lo = match build(-1.0).solve()? {
        LpOutcome::Optimal { value, .. } => -value,
        LpOutcome::Infeasible => return Ok(TimeBounds::Empty),
        LpOutcome::Unbounded => return Err(Error::Numerical("time bound LP unbounded".into())),
    };
    let (lo, hi) = (lo.clamp(0.0, sys.horizon), hi.clamp(0.0, sys.horizon));
    let slack = if sys.horizon > 0.0 {
        solve_strict(&lin)?.slack.unwrap_or(0.0)
    } else {
        0.0
    };
    Ok(TimeBounds::Bounds {
        lo: lo.min(hi),
        hi,
        slack,
    })
}
