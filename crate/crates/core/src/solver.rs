//! Small dense nonlinear solver: damped Gauss-Newton with a central-difference
//! Jacobian and a fixed multi-start grid.
//!
//! Square systems are solved to a residual tolerance; over-determined ones
//! converge when the step stalls (nonlinear least squares).

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the max-norm of the residual vector.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Singular values below `rank_tol * s_max` count as rank deficiency.
    pub rank_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 200,
            fd_step: 1e-6,
            rank_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Singular values of the Jacobian at `x`, descending.
    pub singular_values: Vec<f64>,
}

impl Solution {
    pub fn max_residual(&self) -> f64 {
        max_abs(&self.residual)
    }

    /// Whether the Jacobian at the solution has full column rank.
    pub fn full_rank(&self, rank_tol: f64) -> bool {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&hi), Some(&lo)) => hi > 0.0 && lo > rank_tol * hi,
            _ => false,
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn jacobian<F>(f: &F, x: &[f64], m: usize, h_rel: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = h_rel * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let up = f(&probe)?;
        probe[j] = x[j] - h;
        let down = f(&probe)?;
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

fn singular_values(jac: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = jac.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Damped Gauss-Newton from `x0`. `f` returns `None` where it cannot be
/// evaluated; such trial points are treated as a failed line-search step.
pub fn damped_newton<F>(f: &F, x0: &[f64], opts: &SolverOptions) -> Option<Solution>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let m = r.len();
    let overdetermined = m > x.len();
    let mut converged = max_abs(&r) < opts.tol;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let jac = match jacobian(f, &x, m, opts.fd_step) {
            Some(j) if j.iter().all(|v| v.is_finite()) => j,
            _ => break,
        };
        let rhs = -DVector::from_column_slice(&r);
        if overdetermined {
            // stationary point of the squared residual
            let grad = jac.transpose() * &rhs;
            if grad.norm() <= 1e-10 * jac.norm() * rhs.norm().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        let step = match jac.svd(true, true).solve(&rhs, 1e-14) {
            Ok(s) => s,
            Err(_) => break,
        };
        iterations += 1;
        let base = sq_norm(&r);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi + t * si).collect();
            if let Some(rt) = f(&trial) {
                if rt.iter().all(|v| v.is_finite()) && sq_norm(&rt) < base {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next_x, next_r)) = accepted else {
            break;
        };
        let step_size = t * step.norm();
        let scale = 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let progress = sq_norm(&next_r) / base.max(f64::MIN_POSITIVE);
        x = next_x;
        r = next_r;
        let small = max_abs(&r) < opts.tol;
        if overdetermined && step_size < 1e-12 * scale {
            converged = true;
            break;
        }
        if small {
            converged = true;
            // polish while Newton still gains
            if progress > 0.25 || max_abs(&r) < 1e-15 {
                break;
            }
        }
    }
    let singular_values = jacobian(f, &x, m, opts.fd_step)
        .map(|j| singular_values(&j))
        .unwrap_or_default();
    Some(Solution {
        x,
        residual: r,
        iterations,
        converged,
        singular_values,
    })
}

/// Outcome of a multi-start run.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStart {
    /// Solution from the first start that converged.
    pub first: Option<(usize, Solution)>,
    /// Every converged solution, one per start, in start order.
    pub converged: Vec<(usize, Solution)>,
}

pub fn multi_start<F>(f: &F, starts: &[Vec<f64>], opts: &SolverOptions) -> MultiStart
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let converged: Vec<(usize, Solution)> = starts
        .iter()
        .enumerate()
        .filter_map(|(i, s)| damped_newton(f, s, opts).filter(|sol| sol.converged).map(|sol| (i, sol)))
        .collect();
    MultiStart {
        first: converged.first().cloned(),
        converged,
    }
}

/// Cartesian product of per-coordinate start values.
pub fn grid(axes: &[&[f64]]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
