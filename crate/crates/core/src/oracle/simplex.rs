//! Dense two-phase tableau simplex with Bland's rule.

use nalgebra::{DMatrix, DVector};

use crate::{GwsError, Result};

/// Pivot and feasibility tolerance.
pub const PIVOT_TOL: f64 = 1e-9;

const MAX_PIVOTS: usize = 200_000;
const TIE_TOL: f64 = 1e-12;
/// Primal infeasibility tolerated by the ratio test before clamping.
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Equality-row multipliers `y` with `Aᵀy ≥ c` and `bᵀy = cᵀx` at optimum.
    pub dual: Vec<f64>,
}

/// Standard-form problem `max cᵀx  s.t.  A x = b, x ≥ 0` with a dense
/// row-major `A`.
#[derive(Clone, Debug)]
pub struct Lp {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Lp {
    pub fn new(rows: usize, cols: usize) -> Self {
        Lp {
            rows,
            cols,
            a: vec![0.0; rows * cols],
            b: vec![0.0; rows],
            c: vec![0.0; cols],
        }
    }

    pub fn set(&mut self, r: usize, j: usize, v: f64) {
        self.a[r * self.cols + j] = v;
    }

    pub fn get(&self, r: usize, j: usize) -> f64 {
        self.a[r * self.cols + j]
    }
}

/// Pivots between refactorizations of the basis.
const REFACTOR_EVERY: usize = 32;

struct Tableau {
    rows: usize,
    /// Structural columns; artificial columns follow them.
    n: usize,
    width: usize,
    /// Sign-adjusted `[A | I]` and `b`, kept for refactorization.
    orig: Vec<f64>,
    orig_b: Vec<f64>,
    /// Cost of every column in the current phase.
    cost: Vec<f64>,
    t: Vec<f64>,
    rhs: Vec<f64>,
    obj: Vec<f64>,
    obj_rhs: f64,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
}

impl Tableau {
    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.width + j]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.t[pr * w + pc];
        for v in &mut self.t[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        self.t[pr * w + pc] = 1.0;
        self.rhs[pr] = (self.rhs[pr] * inv).max(0.0);
        let prow: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        let prhs = self.rhs[pr];
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let row = &mut self.t[r * w..(r + 1) * w];
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
                self.rhs[r] = (self.rhs[r] - f * prhs).max(0.0);
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for (x, p) in self.obj.iter_mut().zip(&prow) {
                *x -= f * p;
            }
            self.obj[pc] = 0.0;
            self.obj_rhs -= f * prhs;
        }
        self.is_basic[self.basis[pr]] = false;
        self.is_basic[pc] = true;
        self.basis[pr] = pc;
    }

    /// Recomputes the tableau as `B⁻¹[A | I]` from the original data,
    /// discarding accumulated rounding error.
    fn refactor(&mut self) -> Result<()> {
        let (m, w) = (self.rows, self.width);
        let b = DMatrix::from_fn(m, m, |r, k| self.orig[r * w + self.basis[k]]);
        let inv = b
            .lu()
            .try_inverse()
            .ok_or_else(|| GwsError::numerical("simplex basis became singular"))?;
        let orig = DMatrix::from_row_slice(m, w, &self.orig);
        let t = &inv * orig;
        let rhs = &inv * DVector::from_column_slice(&self.orig_b);
        for r in 0..m {
            for j in 0..w {
                self.t[r * w + j] = t[(r, j)];
            }
            self.t[r * w + self.basis[r]] = 1.0;
            self.rhs[r] = rhs[r].max(0.0);
        }
        self.reprice();
        Ok(())
    }

    /// Objective row `z_j − c_j` for the current basis and costs.
    fn reprice(&mut self) {
        let w = self.width;
        self.obj = self.cost.iter().map(|c| -c).collect();
        self.obj_rhs = 0.0;
        for r in 0..self.rows {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                for j in 0..w {
                    self.obj[j] += cb * self.t[r * w + j];
                }
                self.obj_rhs += cb * self.rhs[r];
            }
        }
        for &bv in &self.basis {
            self.obj[bv] = 0.0;
        }
    }

    /// Bland's entering rule over structural columns with a two-pass
    /// ratio test that prefers large pivots. After a long run of
    /// degenerate pivots the leaving rule also falls back to Bland, which
    /// rules out cycling. Returns false on unboundedness.
    fn optimize(&mut self) -> Result<bool> {
        let stall_limit = 50 * (self.rows + 1);
        let mut stalled = 0;
        for it in 0..MAX_PIVOTS {
            if it > 0 && it % REFACTOR_EVERY == 0 {
                self.refactor()?;
            }
            let Some(pc) = (0..self.n).find(|&j| self.obj[j] < -PIVOT_TOL && !self.is_basic[j])
            else {
                return Ok(true);
            };
            let strict = stalled >= stall_limit;
            let mut bound = f64::INFINITY;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let slack = if strict { TIE_TOL * a } else { FEAS_TOL };
                    bound = bound.min((self.rhs[r] + slack) / a);
                }
            }
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL && self.rhs[r] / a <= bound {
                    let better = match best {
                        None => true,
                        Some((br, ba)) if strict => self.basis[r] < self.basis[br] || ba <= 0.0,
                        Some((br, ba)) => a > ba || (a == ba && self.basis[r] < self.basis[br]),
                    };
                    if better {
                        best = Some((r, a));
                    }
                }
            }
            let Some((pr, _)) = best else {
                return Ok(false);
            };
            let before = self.obj_rhs;
            self.pivot(pr, pc);
            if self.obj_rhs > before + PIVOT_TOL {
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
        Err(GwsError::numerical("simplex pivot limit reached"))
    }
}

/// Solves `max cᵀx  s.t.  A x = b, x ≥ 0`.
///
/// Rows whose slack-like unit column is already present start with that
/// column basic; the rest get artificial variables.
pub fn maximize(lp: &Lp) -> Result<LpSolution> {
    let (m, n) = (lp.rows, lp.cols);
    if lp.a.len() != m * n || lp.b.len() != m || lp.c.len() != n {
        return Err(GwsError::invalid("LP dimensions are inconsistent"));
    }
    let width = n + m;
    let mut orig = vec![0.0; m * width];
    let mut orig_b = vec![0.0; m];
    let mut flipped = vec![false; m];
    for r in 0..m {
        let sign = if lp.b[r] < 0.0 { -1.0 } else { 1.0 };
        flipped[r] = sign < 0.0;
        for j in 0..n {
            orig[r * width + j] = sign * lp.get(r, j);
        }
        orig[r * width + n + r] = 1.0;
        orig_b[r] = sign * lp.b[r];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut used = vec![false; n];
    for j in 0..n {
        let nonzero: Vec<usize> = (0..m).filter(|&r| orig[r * width + j] != 0.0).collect();
        if let [r] = nonzero[..] {
            if orig[r * width + j] == 1.0 && basis[r] >= n && !used[j] {
                basis[r] = j;
                used[j] = true;
            }
        }
    }
    let mut cost = vec![0.0; width];
    for c in &mut cost[n..] {
        *c = -1.0;
    }
    let mut tab = Tableau {
        rows: m,
        n,
        width,
        t: orig.clone(),
        rhs: orig_b.clone(),
        orig,
        orig_b,
        cost,
        obj: vec![0.0; width],
        obj_rhs: 0.0,
        is_basic: (0..width).map(|j| basis.contains(&j)).collect(),
        basis,
    };
    tab.reprice();
    tab.optimize()?;
    tab.refactor()?;
    let scale = 1.0 + lp.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if tab.obj_rhs < -PIVOT_TOL * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; n],
            objective: 0.0,
            dual: vec![0.0; m],
        });
    }
    // drive zero-level artificials out of the basis on the largest entry
    for r in 0..m {
        if tab.basis[r] >= n {
            let mut best = (0.0, None);
            for j in 0..n {
                let a = tab.at(r, j).abs();
                if a > best.0 && !tab.is_basic[j] {
                    best = (a, Some(j));
                }
            }
            if let (a, Some(j)) = best {
                if a > 1e-7 {
                    tab.pivot(r, j);
                }
            }
        }
    }
    for j in 0..width {
        tab.cost[j] = if j < n { lp.c[j] } else { 0.0 };
    }
    tab.refactor()?;
    let bounded = tab.optimize()?;
    tab.refactor()?;
    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs[r];
        }
    }
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    let dual = (0..m)
        .map(|r| {
            if flipped[r] {
                -tab.obj[n + r]
            } else {
                tab.obj[n + r]
            }
        })
        .collect();
    Ok(LpSolution {
        status: if bounded {
            LpStatus::Optimal
        } else {
            LpStatus::Unbounded
        },
        x,
        objective,
        dual,
    })
}
