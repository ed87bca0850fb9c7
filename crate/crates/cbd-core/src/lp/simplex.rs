//! Exact-rational simplex over unit-coefficient constraint matrices.
//!
//! Every LP in this crate has the form `A x = b`, `x >= 0` with `A`
//! entries in `{0, 1}` and `b >= 0`, so a column is fully described by the
//! set of rows it hits. Columns are supplied through [`ColumnOracle`],
//! which lets the coupling LPs generate their exponentially many columns
//! on the fly instead of materializing them.
//!
//! Phase 1 runs a revised simplex on artificial variables with exact
//! `BigRational` arithmetic. A feasible basic solution is returned as a
//! sparse vector; an infeasible problem yields the final simplex
//! multipliers `y`, which satisfy `y . A_j <= 0` for every column and
//! `y . b > 0` — a Farkas certificate checkable independently of the
//! pivot path that produced it. Phase 2 minimizes an arbitrary rational
//! objective and is used by the test oracles (pairwise-maximality and
//! uniqueness checks).
//!
//! Pricing uses Dantzig's rule and falls back to Bland's rule after a run
//! of degenerate pivots, which guarantees termination.

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rational::Rat;

/// Column access for a unit-coefficient LP.
pub trait ColumnOracle {
    fn num_rows(&self) -> usize;
    fn num_cols(&self) -> usize;
    /// Writes the row indices of column `j` into `out` (cleared first).
    fn column_support(&self, j: usize, out: &mut Vec<usize>);
}

/// A materialized column list, for small LPs.
#[derive(Debug, Clone)]
pub struct DenseUnitLp {
    num_rows: usize,
    cols: Vec<Vec<usize>>,
}

impl DenseUnitLp {
    pub fn new(num_rows: usize, cols: Vec<Vec<usize>>) -> Self {
        for col in &cols {
            for &r in col {
                assert!(r < num_rows, "row index {r} out of range");
            }
        }
        DenseUnitLp { num_rows, cols }
    }
}

impl ColumnOracle for DenseUnitLp {
    fn num_rows(&self) -> usize {
        self.num_rows
    }

    fn num_cols(&self) -> usize {
        self.cols.len()
    }

    fn column_support(&self, j: usize, out: &mut Vec<usize>) {
        out.clear();
        out.extend_from_slice(&self.cols[j]);
    }
}

/// Outcome of a feasibility solve.
#[derive(Debug, Clone)]
pub enum Feasibility {
    /// A basic feasible point, as sparse `(column, mass)` pairs.
    Feasible(Vec<(usize, Rat)>),
    /// Farkas multipliers over the rows: `y . A_j <= 0` for all columns
    /// and `y . b > 0`.
    Infeasible(Vec<Rat>),
}

#[derive(Debug, Error, Clone)]
pub enum SimplexError {
    #[error("problem is infeasible")]
    Infeasible(Vec<Rat>),
    #[error("objective is unbounded below on the feasible region")]
    Unbounded,
}

/// Optimal value and a sparse optimal point.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub value: Rat,
    pub solution: Vec<(usize, Rat)>,
}

/// Decides feasibility of `A x = b, x >= 0`.
pub fn solve_feasibility<O: ColumnOracle>(oracle: &O, rhs: &[Rat]) -> Feasibility {
    let mut tableau = Tableau::new(oracle, rhs);
    match tableau.phase1() {
        Some(farkas) => Feasibility::Infeasible(farkas),
        None => Feasibility::Feasible(tableau.solution()),
    }
}

/// Minimizes `c . x` over `A x = b, x >= 0`.
pub fn minimize<O: ColumnOracle>(
    oracle: &O,
    rhs: &[Rat],
    objective: &[Rat],
) -> Result<Optimum, SimplexError> {
    assert_eq!(objective.len(), oracle.num_cols());
    let mut tableau = Tableau::new(oracle, rhs);
    if let Some(farkas) = tableau.phase1() {
        return Err(SimplexError::Infeasible(farkas));
    }
    tableau.phase2(objective)?;
    let solution = tableau.solution();
    let value = solution
        .iter()
        .map(|(j, v)| &objective[*j] * v)
        .fold(Rat::zero(), |a, b| a + b);
    Ok(Optimum { value, solution })
}

/// Maximizes `c . x` over `A x = b, x >= 0`.
pub fn maximize<O: ColumnOracle>(
    oracle: &O,
    rhs: &[Rat],
    objective: &[Rat],
) -> Result<Optimum, SimplexError> {
    let negated: Vec<Rat> = objective.iter().map(|c| -c).collect();
    let mut opt = minimize(oracle, rhs, &negated)?;
    opt.value = -opt.value;
    Ok(opt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasisVar {
    Structural(usize),
    Artificial(usize),
}

struct Tableau<'a, O: ColumnOracle> {
    oracle: &'a O,
    m: usize,
    /// Inverse of the current basis matrix.
    binv: Vec<Vec<Rat>>,
    /// Current basic values, `binv * b`.
    xb: Vec<Rat>,
    basis: Vec<BasisVar>,
    /// Switches to Bland's rule after a degenerate stall.
    bland: bool,
    stall: usize,
    support: Vec<usize>,
}

impl<'a, O: ColumnOracle> Tableau<'a, O> {
    fn new(oracle: &'a O, rhs: &[Rat]) -> Self {
        let m = oracle.num_rows();
        assert_eq!(rhs.len(), m);
        assert!(
            rhs.iter().all(|b| !b.is_negative()),
            "unit LPs require a nonnegative right-hand side"
        );
        let binv = (0..m)
            .map(|i| {
                let mut row = vec![Rat::zero(); m];
                row[i] = Rat::from_integer(1.into());
                row
            })
            .collect();
        Tableau {
            oracle,
            m,
            binv,
            xb: rhs.to_vec(),
            basis: (0..m).map(BasisVar::Artificial).collect(),
            bland: false,
            stall: 0,
            support: Vec::new(),
        }
    }

    /// Simplex multipliers `y = c_B . binv` for the given basic costs.
    fn multipliers(&self, cost: impl Fn(BasisVar) -> Option<Rat>) -> Vec<Rat> {
        let mut y = vec![Rat::zero(); self.m];
        for (i, var) in self.basis.iter().enumerate() {
            let Some(c) = cost(*var) else { continue };
            if c.is_zero() {
                continue;
            }
            for (r, entry) in self.binv[i].iter().enumerate() {
                if !entry.is_zero() {
                    y[r] += &c * entry;
                }
            }
        }
        y
    }

    /// Reduced cost of a structural column under multipliers `y`:
    /// `c_j - sum y over the column support`.
    fn reduced_cost(&mut self, j: usize, y: &[Rat], objective: Option<&[Rat]>) -> Rat {
        self.oracle.column_support(j, &mut self.support);
        let mut s = Rat::zero();
        for &r in &self.support {
            if !y[r].is_zero() {
                s += &y[r];
            }
        }
        match objective {
            Some(c) => &c[j] - s,
            None => -s,
        }
    }

    /// Entering column with negative reduced cost, or `None` at optimality.
    fn price(&mut self, y: &[Rat], objective: Option<&[Rat]>) -> Option<usize> {
        let mut best: Option<(Rat, usize)> = None;
        for j in 0..self.oracle.num_cols() {
            let rc = self.reduced_cost(j, y, objective);
            if !rc.is_negative() {
                continue;
            }
            if self.bland {
                return Some(j);
            }
            match &best {
                Some((b, _)) if *b <= rc => {}
                _ => best = Some((rc, j)),
            }
        }
        best.map(|(_, j)| j)
    }

    /// `binv * A_j` for the column with the given support.
    fn direction(&self, support: &[usize]) -> Vec<Rat> {
        (0..self.m)
            .map(|i| {
                let row = &self.binv[i];
                let mut s = Rat::zero();
                for &r in support {
                    if !row[r].is_zero() {
                        s += &row[r];
                    }
                }
                s
            })
            .collect()
    }

    /// Global variable index used by Bland's rule.
    fn var_index(&self, var: BasisVar) -> usize {
        match var {
            BasisVar::Structural(j) => j,
            BasisVar::Artificial(r) => self.oracle.num_cols() + r,
        }
    }

    /// Picks the leaving row for direction `d`. With `guard_artificials`,
    /// artificial variables sitting at zero are not allowed to grow: a
    /// negative direction entry on such a row forces a degenerate pivot
    /// there instead.
    fn ratio_test(&self, d: &[Rat], guard_artificials: bool) -> Option<usize> {
        let mut best: Option<(Rat, usize)> = None;
        for (i, di) in d.iter().enumerate() {
            let ratio = if di.is_positive() {
                &self.xb[i] / di
            } else if guard_artificials
                && di.is_negative()
                && matches!(self.basis[i], BasisVar::Artificial(_))
            {
                debug_assert!(self.xb[i].is_zero());
                Rat::zero()
            } else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((r, row)) => {
                    if ratio != *r {
                        ratio < *r
                    } else if self.bland {
                        self.var_index(self.basis[i]) < self.var_index(self.basis[*row])
                    } else {
                        // prefer kicking artificials out of the basis
                        matches!(self.basis[i], BasisVar::Artificial(_))
                            && matches!(self.basis[*row], BasisVar::Structural(_))
                    }
                }
            };
            if better {
                best = Some((ratio, i));
            }
        }
        best.map(|(_, i)| i)
    }

    fn pivot(&mut self, row: usize, d: &[Rat], entering: BasisVar) {
        let pivot_val = d[row].clone();
        let inv_row: Vec<Rat> = self.binv[row].iter().map(|v| v / &pivot_val).collect();
        let x_row = &self.xb[row] / &pivot_val;
        for (i, di) in d.iter().enumerate() {
            if i == row || di.is_zero() {
                continue;
            }
            for (r, inv) in inv_row.iter().enumerate() {
                if !inv.is_zero() {
                    let t = di * inv;
                    self.binv[i][r] -= t;
                }
            }
            let t = di * &x_row;
            self.xb[i] -= t;
        }
        self.binv[row] = inv_row;
        self.xb[row] = x_row;
        self.basis[row] = entering;
    }

    fn infeasibility(&self) -> Rat {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(v, _)| matches!(v, BasisVar::Artificial(_)))
            .map(|(_, x)| x.clone())
            .fold(Rat::zero(), |a, b| a + b)
    }

    fn note_progress(&mut self, before: &Rat, after: &Rat) {
        if after < before {
            self.stall = 0;
        } else {
            self.stall += 1;
            if self.stall > 4 * self.m + 32 {
                self.bland = true;
            }
        }
    }

    /// Drives the artificial objective to zero. Returns the Farkas
    /// multipliers when the minimum is positive.
    fn phase1(&mut self) -> Option<Vec<Rat>> {
        let phase1_cost = |var: BasisVar| match var {
            BasisVar::Artificial(_) => Some(Rat::from_integer(1.into())),
            BasisVar::Structural(_) => None,
        };
        loop {
            let y = self.multipliers(phase1_cost);
            let Some(j) = self.price(&y, None) else {
                // optimal for the artificial objective
                let residual = self.infeasibility();
                return if residual.is_zero() { None } else { Some(y) };
            };
            self.oracle.column_support(j, &mut self.support);
            let support = self.support.clone();
            let d = self.direction(&support);
            let row = self
                .ratio_test(&d, false)
                .expect("phase-1 objective is bounded below by zero");
            let before = self.infeasibility();
            self.pivot(row, &d, BasisVar::Structural(j));
            let after = self.infeasibility();
            self.note_progress(&before, &after);
        }
    }

    /// Minimizes a structural objective from a feasible basis. Artificial
    /// variables are held at zero throughout.
    fn phase2(&mut self, objective: &[Rat]) -> Result<(), SimplexError> {
        self.stall = 0;
        loop {
            let y = self.multipliers(|var| match var {
                BasisVar::Structural(j) => Some(objective[j].clone()),
                BasisVar::Artificial(_) => None,
            });
            let Some(j) = self.price(&y, Some(objective)) else {
                return Ok(());
            };
            self.oracle.column_support(j, &mut self.support);
            let support = self.support.clone();
            let d = self.direction(&support);
            let Some(row) = self.ratio_test(&d, true) else {
                return Err(SimplexError::Unbounded);
            };
            let before = self.objective_value(objective);
            self.pivot(row, &d, BasisVar::Structural(j));
            let after = self.objective_value(objective);
            self.note_progress(&before, &after);
        }
    }

    fn objective_value(&self, objective: &[Rat]) -> Rat {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter_map(|(v, x)| match v {
                BasisVar::Structural(j) => Some(&objective[*j] * x),
                BasisVar::Artificial(_) => None,
            })
            .fold(Rat::zero(), |a, b| a + b)
    }

    /// Sparse structural solution (zero basic values omitted).
    fn solution(&self) -> Vec<(usize, Rat)> {
        let mut out: Vec<(usize, Rat)> = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter_map(|(v, x)| match v {
                BasisVar::Structural(j) if !x.is_zero() => Some((*j, x.clone())),
                _ => None,
            })
            .collect();
        out.sort_by_key(|(j, _)| *j);
        out
    }
}
