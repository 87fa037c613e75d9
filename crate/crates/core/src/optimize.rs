//! L-BFGS minimizer with a backtracking Armijo line search.
//!
//! Two-loop recursion over a bounded history of (step, gradient-change)
//! pairs, initial Hessian scaling `gamma = (s.y)/(y.y)`, and cautious
//! updates: pairs with non-positive curvature are skipped so the inverse
//! Hessian approximation stays positive definite. The line search only needs
//! objective values, which matters here because gradients cost an order of
//! magnitude more than objectives.

use std::collections::VecDeque;

use crate::error::{Result, VqtError};

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    /// Iteration budget (accepted steps).
    pub max_iters: usize,
    /// History pairs kept for the two-loop recursion.
    pub memory: usize,
    /// Converged when |f_k - f_{k+1}| drops below this over one step...
    pub f_tol: f64,
    /// ...and the gradient infinity norm is below this.
    pub grad_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    /// Maximum halvings per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            memory: 10,
            f_tol: 1e-8,
            grad_tol: 1e-6,
            c1: 1e-4,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    /// Accepted steps taken.
    pub iterations: usize,
    /// True when both convergence thresholds were met; false means the
    /// budget ran out or the line search stalled.
    pub converged: bool,
    pub n_value_evals: usize,
    pub n_grad_evals: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimize `value_grad` starting at `x0`. `value` must agree with the first
/// component of `value_grad`; it is what the line search calls.
pub fn minimize<V, VG>(
    mut value: V,
    mut value_grad: VG,
    x0: &[f64],
    opts: &LbfgsOptions,
) -> Result<MinimizeOutcome>
where
    V: FnMut(&[f64]) -> Result<f64>,
    VG: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut n_value = 0usize;
    let mut n_grad = 0usize;

    let (mut f, mut g) = value_grad(&x)?;
    n_grad += 1;
    check_finite(f, &x)?;

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0usize;
    let mut converged = false;

    if n == 0 {
        return Ok(MinimizeOutcome {
            x,
            f,
            grad: g,
            iterations: 0,
            converged: true,
            n_value_evals: n_value,
            n_grad_evals: n_grad,
        });
    }

    'outer: while iterations < opts.max_iters {
        // Two-loop recursion for d = -H g.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        if !history.is_empty() {
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let a = rho * dot(s, &d);
                for (di, yi) in d.iter_mut().zip(y) {
                    *di -= a * yi;
                }
                alphas.push(a);
            }
            let (s_last, y_last, _) = history.back().unwrap();
            let gamma = dot(s_last, y_last) / dot(y_last, y_last);
            if gamma.is_finite() && gamma > 0.0 {
                for di in d.iter_mut() {
                    *di *= gamma;
                }
            }
            for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &d);
                for (di, si) in d.iter_mut().zip(s) {
                    *di += (a - b) * si;
                }
            }
        }

        let mut slope = dot(&g, &d);
        if !d.iter().all(|v| v.is_finite()) || slope >= 0.0 {
            // Stale curvature produced a bad direction; restart from
            // steepest descent.
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
            if slope >= 0.0 {
                break; // gradient is exactly zero
            }
        }

        // Backtracking Armijo search.
        let mut alpha = if history.is_empty() {
            (1.0 / inf_norm(&g).max(1.0)).min(1.0)
        } else {
            1.0
        };
        let mut trial = vec![0.0; n];
        let mut accepted = false;
        for _ in 0..opts.max_line_search {
            for (t, (xi, di)) in trial.iter_mut().zip(x.iter().zip(&d)) {
                *t = xi + alpha * di;
            }
            let ft = value(&trial)?;
            n_value += 1;
            check_finite(ft, &trial)?;
            if ft <= f + opts.c1 * alpha * slope {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Stalled: no decrease along d at the smallest step.
            break 'outer;
        }

        let (f_new, g_new) = value_grad(&trial)?;
        n_grad += 1;
        check_finite(f_new, &trial)?;

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let curvature_ok = sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt()
            && (1.0 / sy).is_finite();
        if curvature_ok {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let df = (f - f_new).abs();
        x.copy_from_slice(&trial);
        f = f_new;
        g = g_new;
        iterations += 1;

        if df < opts.f_tol && inf_norm(&g) < opts.grad_tol {
            converged = true;
            break;
        }
    }

    Ok(MinimizeOutcome {
        x,
        f,
        grad: g,
        iterations,
        converged,
        n_value_evals: n_value,
        n_grad_evals: n_grad,
    })
}

fn check_finite(f: f64, x: &[f64]) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(VqtError::Numerical(format!(
            "objective is {f} at theta = {x:?}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> (f64, Vec<f64>) {
        // f = sum (i+1) (x_i - i)^2
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for (i, &xi) in x.iter().enumerate() {
            let w = (i + 1) as f64;
            let d = xi - i as f64;
            f += w * d * d;
            g[i] = 2.0 * w * d;
        }
        (f, g)
    }

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            let (a, b) = (x[i], x[i + 1]);
            f += 100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2);
            g[i] += -400.0 * a * (b - a * a) - 2.0 * (1.0 - a);
            g[i + 1] += 200.0 * (b - a * a);
        }
        (f, g)
    }

    #[test]
    fn quadratic_converges_fast() {
        let opts = LbfgsOptions::default();
        let out = minimize(
            |x| Ok(quadratic(x).0),
            |x| Ok(quadratic(x)),
            &[5.0, -3.0, 2.0, 9.0],
            &opts,
        )
        .unwrap();
        assert!(out.converged);
        for (i, xi) in out.x.iter().enumerate() {
            assert!((xi - i as f64).abs() < 1e-6, "x[{i}] = {xi}");
        }
        assert!(out.iterations < 50);
    }

    #[test]
    fn rosenbrock_ten_dimensional() {
        let opts = LbfgsOptions {
            max_iters: 2000,
            ..Default::default()
        };
        let out = minimize(
            |x| Ok(rosenbrock(x).0),
            |x| Ok(rosenbrock(x)),
            &[-1.2; 10],
            &opts,
        )
        .unwrap();
        assert!(out.f < 1e-10, "f = {}", out.f);
        for xi in &out.x {
            assert!((xi - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn nan_objective_is_an_error() {
        let r = minimize(
            |_| Ok(f64::NAN),
            |_| Ok((f64::NAN, vec![0.0])),
            &[1.0],
            &LbfgsOptions::default(),
        );
        assert!(matches!(r, Err(VqtError::Numerical(_))));
    }

    #[test]
    fn budget_exhaustion_is_reported_not_an_error() {
        let opts = LbfgsOptions {
            max_iters: 3,
            ..Default::default()
        };
        let out = minimize(
            |x| Ok(rosenbrock(x).0),
            |x| Ok(rosenbrock(x)),
            &[-1.2; 6],
            &opts,
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
    }
}
