use nalgebra::{DMatrix, DVector};

use super::OptimizerError;

const MAX_PIVOTS: usize = 10_000;

/// `max c'x  s.t.  A_eq x = b_eq,  lower <= x <= upper` with finite bounds.
#[derive(Debug, Clone)]
pub struct BoundedLP {
    pub objective: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub value: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl BoundedLP {
    fn validate(&self) -> Result<(), OptimizerError> {
        let n = self.objective.len();
        let m = self.b_eq.len();
        if self.a_eq.shape() != (m, n) || self.lower.len() != n || self.upper.len() != n {
            return Err(OptimizerError::InvalidProblem("dimension mismatch".into()));
        }
        if m > n {
            return Err(OptimizerError::InvalidProblem(format!(
                "{m} equality rows for {n} variables"
            )));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(OptimizerError::InvalidProblem(format!(
                    "bounds on x[{j}] must be finite and ordered, got [{l}, {u}]"
                )));
            }
        }
        Ok(())
    }
}

/// Bounded-variable primal simplex on a dense tableau, two phases, Bland's
/// rule for both the entering and the leaving variable.
pub fn solve_lp(lp: &BoundedLP) -> Result<LpOutcome, OptimizerError> {
    lp.validate()?;
    let n = lp.objective.len();
    let m = lp.b_eq.len();

    // Shift to y = x - lower in [0, upper - lower]; make the right-hand side
    // non-negative so the artificial basis starts feasible.
    let mut rhs = &lp.b_eq - &lp.a_eq * &lp.lower;
    let mut t = Tableau {
        rows: DMatrix::zeros(m, n + m),
        basis: (n..n + m).collect(),
        beta: DVector::zeros(m),
        ub: (0..n)
            .map(|j| lp.upper[j] - lp.lower[j])
            .chain(std::iter::repeat_n(f64::INFINITY, m))
            .collect(),
        at_upper: vec![false; n + m],
        pivots: 0,
    };
    for i in 0..m {
        let sign = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
        rhs[i] *= sign;
        for j in 0..n {
            t.rows[(i, j)] = sign * lp.a_eq[(i, j)];
        }
        t.rows[(i, n + i)] = 1.0;
        t.beta[i] = rhs[i];
    }

    let scale = 1.0 + rhs.amax() + lp.a_eq.amax();
    let feas_tol = 1e-9 * scale;

    // Phase I: maximize -sum(artificials).
    let phase1: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { -1.0 }).collect();
    match t.run(&phase1, n + m)? {
        Step::Optimal => {}
        Step::Unbounded => unreachable!("phase I objective is bounded"),
    }
    let infeasibility: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.beta[i]).sum();
    if infeasibility > feas_tol {
        return Ok(LpOutcome::Infeasible);
    }

    // Drive zero-level artificials out of the basis where possible; rows
    // where that fails are redundant and keep their artificial pinned at 0.
    for r in 0..m {
        if t.basis[r] < n {
            continue;
        }
        let candidate = (0..n)
            .filter(|&j| !t.basis.contains(&j))
            .find(|&j| t.rows[(r, j)].abs() > 1e-9);
        if let Some(j) = candidate {
            t.pivot_degenerate(r, j);
        }
    }
    for j in n..n + m {
        t.ub[j] = 0.0;
    }

    let mut phase2 = vec![0.0; n + m];
    phase2[..n].copy_from_slice(lp.objective.as_slice());
    match t.run(&phase2, n)? {
        Step::Optimal => {}
        Step::Unbounded => return Ok(LpOutcome::Unbounded),
    }

    let mut y = DVector::zeros(n);
    for j in 0..n {
        if t.at_upper[j] {
            y[j] = t.ub[j];
        }
    }
    for i in 0..m {
        if t.basis[i] < n {
            y[t.basis[i]] = t.beta[i];
        }
    }
    let x = DVector::from_iterator(n, (0..n).map(|j| (lp.lower[j] + y[j]).clamp(lp.lower[j], lp.upper[j])));
    let value = lp.objective.dot(&x);
    Ok(LpOutcome::Optimal(LpSolution {
        x,
        value,
        pivots: t.pivots,
    }))
}

enum Step {
    Optimal,
    Unbounded,
}

struct Tableau {
    /// `B^-1 [A | I]`
    rows: DMatrix<f64>,
    basis: Vec<usize>,
    /// Values of the basic variables.
    beta: DVector<f64>,
    ub: Vec<f64>,
    at_upper: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    /// Maximizes `cost` with entering candidates restricted to `j < enterable`.
    fn run(&mut self, cost: &[f64], enterable: usize) -> Result<Step, OptimizerError> {
        let m = self.basis.len();
        let cscale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let rc_tol = 1e-11 * cscale;
        const PIV_TOL: f64 = 1e-12;

        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(OptimizerError::NonConvergence {
                    iterations: self.pivots,
                    best: self.beta.clone(),
                });
            }

            // Bland: lowest-index improving nonbasic variable.
            let mut entering = None;
            for j in 0..enterable {
                if self.basis.contains(&j) || self.ub[j] == 0.0 {
                    continue;
                }
                let rc = cost[j] - (0..m).map(|i| cost[self.basis[i]] * self.rows[(i, j)]).sum::<f64>();
                if (!self.at_upper[j] && rc > rc_tol) || (self.at_upper[j] && rc < -rc_tol) {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(Step::Optimal);
            };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            let mut theta = self.ub[j];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..m {
                let a = dir * self.rows[(i, j)];
                let (limit, to_upper) = if a > PIV_TOL {
                    (self.beta[i].max(0.0) / a, false)
                } else if a < -PIV_TOL && self.ub[self.basis[i]].is_finite() {
                    ((self.ub[self.basis[i]] - self.beta[i]).max(0.0) / -a, true)
                } else {
                    continue;
                };
                let better =
                    limit < theta || (limit == theta && leave.is_some_and(|(r, _)| self.basis[i] < self.basis[r]));
                if better {
                    theta = limit;
                    leave = Some((i, to_upper));
                }
            }
            if theta.is_infinite() {
                return Ok(Step::Unbounded);
            }

            for i in 0..m {
                self.beta[i] -= theta * dir * self.rows[(i, j)];
            }
            self.pivots += 1;
            match leave {
                None => self.at_upper[j] = !self.at_upper[j],
                Some((r, to_upper)) => {
                    let entering_value = if self.at_upper[j] { self.ub[j] - theta } else { theta };
                    let leaving = self.basis[r];
                    self.at_upper[leaving] = to_upper;
                    self.at_upper[j] = false;
                    self.pivot(r, j);
                    self.beta[r] = entering_value;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[(r, j)];
        let cols = self.rows.ncols();
        for c in 0..cols {
            self.rows[(r, c)] /= p;
        }
        for i in 0..self.rows.nrows() {
            if i == r {
                continue;
            }
            let f = self.rows[(i, j)];
            if f == 0.0 {
                continue;
            }
            for c in 0..cols {
                let v = self.rows[(r, c)];
                self.rows[(i, c)] -= f * v;
            }
        }
        self.basis[r] = j;
    }

    /// Swap a zero-valued basic variable for nonbasic `j` without moving
    /// the current point.
    fn pivot_degenerate(&mut self, r: usize, j: usize) {
        let value = if self.at_upper[j] { self.ub[j] } else { 0.0 };
        let leaving = self.basis[r];
        self.at_upper[leaving] = false;
        self.at_upper[j] = false;
        self.pivot(r, j);
        // Basic values are unchanged except the entering one, which keeps
        // its previous nonbasic level.
        self.beta[r] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equal_pair_reaches_upper_bound() {
        let lp = BoundedLP {
            objective: DVector::from_vec(vec![1.0, 0.0]),
            a_eq: DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            b_eq: DVector::zeros(1),
            lower: DVector::zeros(2),
            upper: DVector::from_element(2, 1.0),
        };
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_relative_eq!(sol.value, 1.0);
        assert_relative_eq!(sol.x[1], 1.0);
    }

    #[test]
    fn equality_outside_bounds_is_infeasible() {
        let lp = BoundedLP {
            objective: DVector::from_vec(vec![1.0, 1.0]),
            a_eq: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            b_eq: DVector::from_element(1, 3.0),
            lower: DVector::zeros(2),
            upper: DVector::from_element(2, 1.0),
        };
        assert!(matches!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let lp = BoundedLP {
            objective: DVector::from_vec(vec![1.0, 2.0, -1.0]),
            a_eq: DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]),
            b_eq: DVector::from_vec(vec![1.0, 2.0]),
            lower: DVector::from_element(3, -1.0),
            upper: DVector::from_element(3, 1.0),
        };
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        // best: x2 = 1, x3 = -1, x1 = 1
        assert_relative_eq!(sol.value, 1.0 + 2.0 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_lower_bounds_and_flipped_rows() {
        let lp = BoundedLP {
            objective: DVector::from_vec(vec![0.0, 0.0, 1.0]),
            a_eq: DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]),
            b_eq: DVector::from_element(1, -1.5),
            lower: DVector::from_element(3, -1.0),
            upper: DVector::from_element(3, 2.0),
        };
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_relative_eq!(sol.x[0] + sol.x[1], -1.5, epsilon = 1e-14);
        assert_relative_eq!(sol.value, 2.0);
    }

    #[test]
    fn rejects_infinite_bounds() {
        let lp = BoundedLP {
            objective: DVector::from_vec(vec![1.0]),
            a_eq: DMatrix::zeros(0, 1),
            b_eq: DVector::zeros(0),
            lower: DVector::zeros(1),
            upper: DVector::from_element(1, f64::INFINITY),
        };
        assert!(solve_lp(&lp).is_err());
    }
}
