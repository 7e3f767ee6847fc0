use nalgebra::{DMatrix, DVector};

use super::OptimizerError;

/// `min 1/2 x'Hx + g'x  s.t.  lower <= x <= upper`, with `H` SPD.
#[derive(Debug, Clone)]
pub struct BoxQP {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundStatus {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    /// Absolute tolerance on gradient components and multiplier signs.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    /// Final working set; feed it back as a warm start.
    pub active_set: Vec<BoundStatus>,
}

impl BoxQP {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn cost(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.hessian * x + &self.linear
    }

    pub fn is_feasible(&self, x: &DVector<f64>) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(&v, (&l, &u))| l <= v && v <= u)
    }

    /// Largest violation of the first-order optimality conditions at `x`:
    /// zero gradient on interior coordinates, correctly signed gradient on
    /// coordinates sitting at a bound.
    pub fn kkt_residual(&self, x: &DVector<f64>) -> f64 {
        let g = self.gradient(x);
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            let (l, u) = (self.lower[i], self.upper[i]);
            let r = if l == u {
                0.0
            } else if x[i] <= l {
                (-g[i]).max(0.0)
            } else if x[i] >= u {
                g[i].max(0.0)
            } else {
                g[i].abs()
            };
            worst = worst.max(r);
        }
        worst
    }

    fn validate(&self) -> Result<(), OptimizerError> {
        let n = self.dim();
        if self.hessian.shape() != (n, n) || self.lower.len() != n || self.upper.len() != n {
            return Err(OptimizerError::InvalidProblem("dimension mismatch".into()));
        }
        for i in 0..n {
            let (l, u) = (self.lower[i], self.upper[i]);
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(OptimizerError::InvalidProblem(format!(
                    "bad bounds on x[{i}]: [{l}, {u}]"
                )));
            }
        }
        if self.hessian.iter().chain(self.linear.iter()).any(|v| !v.is_finite()) {
            return Err(OptimizerError::InvalidProblem("non-finite data".into()));
        }
        Ok(())
    }
}

pub fn solve_box_qp(qp: &BoxQP, opts: &QpOptions) -> Result<QpSolution, OptimizerError> {
    solve_box_qp_warm(qp, opts, None)
}

/// Primal active-set method. The working set holds the clamped coordinates;
/// each iteration solves the reduced Newton system on the free ones by
/// Cholesky, then either adds the first blocking bound or releases the bound
/// with the most negative multiplier.
pub fn solve_box_qp_warm(
    qp: &BoxQP,
    opts: &QpOptions,
    warm_start: Option<&[BoundStatus]>,
) -> Result<QpSolution, OptimizerError> {
    qp.validate()?;
    let n = qp.dim();

    let mut status: Vec<BoundStatus> = match warm_start {
        Some(ws) if ws.len() == n => ws.to_vec(),
        _ => vec![BoundStatus::Free; n],
    };
    let mut x = DVector::zeros(n);
    for i in 0..n {
        let (l, u) = (qp.lower[i], qp.upper[i]);
        if l == u {
            status[i] = BoundStatus::Lower;
        }
        x[i] = match status[i] {
            BoundStatus::Lower => l,
            BoundStatus::Upper => u,
            BoundStatus::Free => 0.0f64.clamp(l, u),
        };
    }

    let mut iterations = 0;
    loop {
        if iterations >= opts.max_iterations {
            return Err(OptimizerError::NonConvergence { iterations, best: x });
        }

        let free: Vec<usize> = (0..n).filter(|&i| status[i] == BoundStatus::Free).collect();
        let grad = qp.gradient(&x);

        let mut blocking: Option<(usize, BoundStatus)> = None;
        if !free.is_empty() {
            let h_ff = qp.hessian.select_rows(&free).select_columns(&free);
            let rhs = -DVector::from_iterator(free.len(), free.iter().map(|&i| grad[i]));
            let chol = h_ff
                .cholesky()
                .ok_or_else(|| OptimizerError::InvalidProblem("Hessian is not positive definite".into()))?;
            let d = chol.solve(&rhs);

            let mut step = 1.0;
            for (k, &i) in free.iter().enumerate() {
                let (limit, bound) = if d[k] < 0.0 {
                    ((qp.lower[i] - x[i]) / d[k], BoundStatus::Lower)
                } else if d[k] > 0.0 {
                    ((qp.upper[i] - x[i]) / d[k], BoundStatus::Upper)
                } else {
                    continue;
                };
                if limit < step {
                    step = limit.max(0.0);
                    blocking = Some((i, bound));
                }
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] = (x[i] + step * d[k]).clamp(qp.lower[i], qp.upper[i]);
            }
        }

        iterations += 1;
        if let Some((i, bound)) = blocking {
            x[i] = if bound == BoundStatus::Lower {
                qp.lower[i]
            } else {
                qp.upper[i]
            };
            status[i] = bound;
            continue;
        }

        // Full Newton step taken: the free gradient vanishes. Check the signs
        // of the multipliers on the working set.
        let grad = qp.gradient(&x);
        let mut release: Option<(usize, f64)> = None;
        for i in 0..n {
            if qp.lower[i] == qp.upper[i] {
                continue;
            }
            let violation = match status[i] {
                BoundStatus::Lower => -grad[i],
                BoundStatus::Upper => grad[i],
                BoundStatus::Free => continue,
            };
            if violation > opts.tol && release.is_none_or(|(_, v)| violation > v) {
                release = Some((i, violation));
            }
        }
        match release {
            Some((i, _)) => status[i] = BoundStatus::Free,
            None => {
                let cost = qp.cost(&x);
                return Ok(QpSolution {
                    x,
                    cost,
                    iterations,
                    active_set: status,
                });
            }
        }
    }
}
