//! Quasi-Newton minimization with a backtracking line search.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged once the gradient's largest absolute entry falls below this.
    pub grad_tol: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { max_iter: 500, grad_tol: 1e-5, armijo: 1e-4, max_backtracks: 60 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, libm::fabs(*x)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the objective and writes the gradient into its
/// second argument. Accepted steps never increase the objective.
pub fn minimize<F>(mut f: F, x0: &[f64], h0: Option<Matrix>, opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history = vec![fx];
    let scaled_h0 = h0.is_some();
    let mut h = h0.unwrap_or_else(|| Matrix::identity(n));
    let mut fresh = true;
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut iterations = 0;

    while iterations < opts.max_iter && fx.is_finite() {
        if inf_norm(&g) < opts.grad_tol {
            break;
        }
        let mut d: Vec<f64> = h.mul_vec(&g).iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = Matrix::identity(n);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        if fresh && !scaled_h0 {
            // keep the first steepest-descent step bounded
            let s = 1.0 / f64::max(1.0, inf_norm(&d));
            d.iter_mut().for_each(|v| *v *= s);
            slope *= s;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                xn[i] = x[i] + alpha * d[i];
            }
            let fnew = f(&xn, &mut gn);
            let armijo = fnew <= fx + opts.armijo * alpha * slope;
            // below rounding noise the Armijo test cannot discriminate; accept a
            // non-increasing step that shrinks the gradient instead
            let noise = fnew <= fx && inf_norm(&gn) < inf_norm(&g) && alpha * libm::fabs(slope) < 1e-10 * (1.0 + libm::fabs(fx));
            if fnew.is_finite() && (armijo || noise) {
                accepted = true;
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) {
                    if fresh && !scaled_h0 {
                        let scale = sy / dot(&y, &y);
                        h = Matrix::identity(n);
                        h.scale(scale);
                    }
                    update_inverse(&mut h, &s, &y, sy);
                    fresh = false;
                }
                x.copy_from_slice(&xn);
                g.copy_from_slice(&gn);
                fx = fnew;
                history.push(fx);
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        if !accepted {
            if fresh {
                break;
            }
            h = Matrix::identity(n);
            fresh = true;
        }
    }
    let converged = inf_norm(&g) < opts.grad_tol;
    BfgsResult { x, f: fx, grad: g, iterations, converged, history }
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1 / sᵀy`.
fn update_inverse(h: &mut Matrix, s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = h.mul_vec(y);
    let yhy = dot(y, &hy);
    let c = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + c * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
    }

    #[test]
    fn finds_rosenbrock_minimum_monotonically() {
        let r = minimize(rosenbrock, &[-1.2, 1.0], None, &BfgsOptions::default());
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_with_preconditioner() {
        let diag = [1.0, 100.0, 1e4];
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..3 {
                g[i] = diag[i] * (x[i] - 1.0);
                v += 0.5 * diag[i] * (x[i] - 1.0) * (x[i] - 1.0);
            }
            v
        };
        let mut h = Matrix::zeros(3);
        for i in 0..3 {
            h[(i, i)] = 1.0 / diag[i];
        }
        let r = minimize(f, &[0.0; 3], Some(h), &BfgsOptions::default());
        assert!(r.converged);
        assert!(r.iterations <= 2);
    }
}
