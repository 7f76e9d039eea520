//! Nelder-Mead (through argmin) and a small BFGS for closures on `&[f64]`.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;

use crate::error::{Error, Result};

struct Problem<F> {
    cost: F,
}

impl<F> CostFunction for Problem<F>
where
    F: Fn(&[f64]) -> f64,
{
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.cost)(p))
    }
}

fn solver_error(e: argmin::core::Error) -> Error {
    Error::NumericalFailure(format!("optimizer: {e}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Minimizes `f` from an axis-aligned simplex of edge `step` around `x0`.
/// The result is never worse than `f(x0)`.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_iters: u64,
) -> Result<Minimum> {
    let f0 = f(x0);
    let mut simplex = vec![x0.to_vec()];
    for k in 0..x0.len() {
        let mut v = x0.to_vec();
        v[k] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-15)
        .map_err(solver_error)?;
    let problem = Problem { cost: &f };
    let res = Executor::new(problem, solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(solver_error)?;
    let state = res.state();
    let value = state.get_best_cost();
    match state.get_best_param() {
        Some(x) if value <= f0 => Ok(Minimum {
            x: x.clone(),
            value,
        }),
        _ => Ok(Minimum {
            x: x0.to_vec(),
            value: f0,
        }),
    }
}

/// BFGS with an Armijo backtracking line search. Stops when the step
/// search fails, the gradient vanishes, or after `max_iters` iterations.
pub fn bfgs(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    max_iters: u64,
) -> Result<Minimum> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::NumericalFailure("BFGS start is not finite".into()));
    }
    let mut g = grad(&x);
    let mut h = vec![0.0; n * n];
    for k in 0..n {
        h[k * n + k] = 1.0;
    }
    for _ in 0..max_iters {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-14 {
            break;
        }
        let mut p: Vec<f64> = (0..n)
            .map(|r| -(0..n).map(|c| h[r * n + c] * g[c]).sum::<f64>())
            .collect();
        let mut slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // Lost positive definiteness: reset to steepest descent.
            h.iter_mut()
                .enumerate()
                .for_each(|(k, v)| *v = if k % (n + 1) == 0 { 1.0 } else { 0.0 });
            p = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let fnew = f(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * alpha * slope {
                accepted = Some((xn, fnew));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let gn = grad(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            let hy: Vec<f64> = (0..n)
                .map(|r| (0..n).map(|c| h[r * n + c] * y[c]).sum())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for r in 0..n {
                for c in 0..n {
                    h[r * n + c] += -rho * (hy[r] * s[c] + s[r] * hy[c])
                        + (rho * rho * yhy + rho) * s[r] * s[c];
                }
            }
        }
        let gain = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if gain <= 1e-16 * fx.abs() {
            break;
        }
    }
    Ok(Minimum { x, value: fx })
}

/// Central-difference gradient.
pub fn numeric_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + h;
            let up = f(&p);
            p[k] = orig - h;
            let down = f(&p);
            p[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Vertex of the parabola through three equally spaced samples, as an
/// offset in units of the spacing from the middle sample. `None` if the
/// samples are not convex.
pub fn parabolic_vertex(left: f64, mid: f64, right: f64) -> Option<f64> {
    let curv = left - 2.0 * mid + right;
    if curv <= 0.0 || !curv.is_finite() {
        return None;
    }
    Some(0.5 * (left - right) / curv)
}
