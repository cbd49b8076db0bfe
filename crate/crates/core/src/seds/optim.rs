//! Unconstrained minimization used by the SEDS fit.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimStatus {
    /// Gradient or objective change fell below tolerance.
    Converged,
    /// Iteration budget used up; the iterate is still usable.
    MaxIterations,
    /// No descent step could be found; the iterate is still usable.
    Stalled,
    /// The objective or gradient became non-finite.
    NumericalFailure,
}

impl OptimStatus {
    pub fn is_failure(self) -> bool {
        self == OptimStatus::NumericalFailure
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub status: OptimStatus,
}

/// Objective returning its value and writing the gradient into the slice.
pub type Objective<'a> = dyn FnMut(&[f64], &mut [f64]) -> f64 + 'a;

pub trait Optimizer: Sync {
    fn minimize(&self, f: &mut Objective<'_>, x0: Vec<f64>) -> OptimResult;
}

/// Limited-memory BFGS with Armijo backtracking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lbfgs {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when the largest gradient entry is below this.
    pub grad_tol: f64,
    /// Stop when the relative objective decrease is below this.
    pub rel_tol: f64,
}

impl Default for Lbfgs {
    fn default() -> Self {
        Self {
            max_iter: 500,
            memory: 10,
            grad_tol: 1e-9,
            rel_tol: 1e-12,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl Optimizer for Lbfgs {
    fn minimize(&self, f: &mut Objective<'_>, x0: Vec<f64>) -> OptimResult {
        let n = x0.len();
        let mut x = x0;
        let mut g = vec![0.0; n];
        let mut fx = f(&x, &mut g);
        let fail = |x: Vec<f64>, value, iterations| OptimResult {
            x,
            value,
            iterations,
            status: OptimStatus::NumericalFailure,
        };
        if !fx.is_finite() || !finite(&g) {
            return fail(x, fx, 0);
        }
        let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(self.memory);
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        for iter in 0..self.max_iter {
            if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < self.grad_tol {
                return OptimResult {
                    x,
                    value: fx,
                    iterations: iter,
                    status: OptimStatus::Converged,
                };
            }
            // two-loop recursion
            let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let a = rho * dot(s, &d);
                d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
                alphas.push(a);
            }
            if let Some((s, y, _)) = history.back() {
                let gamma = dot(s, y) / dot(y, y);
                d.iter_mut().for_each(|v| *v *= gamma);
            }
            for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &d);
                d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
            }
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                history.clear();
                d = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }
            let mut step = if history.is_empty() {
                (1.0 / d.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0)
            } else {
                1.0
            };
            let mut accepted = false;
            for _ in 0..50 {
                x_new
                    .iter_mut()
                    .zip(&x)
                    .zip(&d)
                    .for_each(|((xn, xi), di)| *xn = xi + step * di);
                let f_new = f(&x_new, &mut g_new);
                if f_new.is_finite() && finite(&g_new) && f_new <= fx + 1e-4 * step * slope {
                    let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                        if history.len() == self.memory {
                            history.pop_front();
                        }
                        history.push_back((s, y, 1.0 / sy));
                    }
                    let decrease = fx - f_new;
                    std::mem::swap(&mut x, &mut x_new);
                    std::mem::swap(&mut g, &mut g_new);
                    let prev = fx;
                    fx = f_new;
                    accepted = true;
                    if decrease <= self.rel_tol * prev.abs().max(1e-300) {
                        return OptimResult {
                            x,
                            value: fx,
                            iterations: iter + 1,
                            status: OptimStatus::Converged,
                        };
                    }
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                if !fx.is_finite() {
                    return fail(x, fx, iter);
                }
                return OptimResult {
                    x,
                    value: fx,
                    iterations: iter,
                    status: OptimStatus::Stalled,
                };
            }
        }
        OptimResult {
            x,
            value: fx,
            iterations: self.max_iter,
            status: OptimStatus::MaxIterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let mut f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let r = Lbfgs {
            max_iter: 500,
            ..Lbfgs::default()
        }
        .minimize(&mut f, vec![-1.2, 1.0]);
        assert!(!r.status.is_failure());
        assert!(
            (r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5,
            "{:?}",
            r
        );
    }

    #[test]
    fn nan_objective_is_failure() {
        let mut f = |_: &[f64], g: &mut [f64]| {
            g[0] = 0.0;
            f64::NAN
        };
        let r = Lbfgs::default().minimize(&mut f, vec![0.0]);
        assert_eq!(r.status, OptimStatus::NumericalFailure);
    }
}
