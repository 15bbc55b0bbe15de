//! Small root-finding kernels for the shooting problems.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Residual (max-norm) at which iteration stops successfully.
    pub tol: f64,
    /// Residual still accepted when the iteration stagnates.
    pub accept: f64,
    pub max_iter: usize,
    /// Central-difference step relative to the unknown's scale.
    pub fd_rel_step: f64,
    pub max_backtracks: usize,
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-11,
            accept: 1e-8,
            max_iter: 100,
            fd_rel_step: 1e-6,
            max_backtracks: 30,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// Damped Newton with a finite-difference Jacobian.
///
/// `f` returns `None` outside the feasible region; the line search halves the
/// step until it lands on a feasible point with a smaller residual.
pub fn damped_newton<F>(f: F, x0: &[f64], scale: &[f64], opts: &NewtonOptions) -> NewtonOutcome
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let Some(mut r) = f(&x) else {
        return NewtonOutcome { x, residual: f64::INFINITY, iterations: 0, converged: false };
    };
    let mut norm = max_norm(&r);
    let stalled = |x: Vec<f64>, norm: f64, it: usize| NewtonOutcome {
        x,
        residual: norm,
        iterations: it,
        converged: norm <= opts.accept,
    };
    for it in 0..opts.max_iter {
        if norm <= opts.tol {
            return NewtonOutcome { x, residual: norm, iterations: it, converged: true };
        }
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            let h = opts.fd_rel_step * scale[j].abs().max(1e-3);
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let col: Vec<f64> = match (f(&xp), f(&xm)) {
                (Some(a), Some(b)) => a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
                (Some(a), None) => a.iter().zip(&r).map(|(a, b)| (a - b) / h).collect(),
                (None, Some(b)) => r.iter().zip(&b).map(|(a, b)| (a - b) / h).collect(),
                (None, None) => return stalled(x, norm, it),
            };
            for (i, v) in col.into_iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        let rhs = -DVector::from_column_slice(&r);
        let step = if m == n {
            jac.lu().solve(&rhs)
        } else {
            let jt = jac.transpose();
            (&jt * &jac).lu().solve(&(jt * rhs))
        };
        let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
            return stalled(x, norm, it);
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Some(rt) = f(&trial) {
                let nt = max_norm(&rt);
                if nt < (1.0 - 1e-4 * lambda) * norm {
                    let moved = max_norm(&step.iter().map(|d| lambda * d).collect::<Vec<_>>());
                    x = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    if moved < opts.min_step {
                        return stalled(x, norm, it + 1);
                    }
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return stalled(x, norm, it + 1);
        }
    }
    NewtonOutcome { converged: norm <= opts.accept, x, residual: norm, iterations: opts.max_iter }
}

/// Refines a sign-changing bracket with the Illinois variant of regula falsi,
/// falling back to bisection when the secant stalls.
pub fn refine_bracket<F>(f: F, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, tol: f64) -> Option<f64>
where
    F: Fn(f64) -> Option<f64>,
{
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let secant = (a * fb - b * fa) / (fb - fa);
        let mid = 0.5 * (a + b);
        let c = if secant.is_finite() && secant > a.min(b) && secant < a.max(b) { secant } else { mid };
        let fc = f(c)?;
        if fc.abs() <= tol || (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_solves_nonlinear_system() {
        let f = |x: &[f64]| Some(vec![x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1]]);
        let out = damped_newton(f, &[1.0, 0.5], &[1.0, 1.0], &NewtonOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn newton_respects_feasible_region() {
        // the full first step overshoots past x = 2.5
        let f = |x: &[f64]| if x[0] >= 2.5 { None } else { Some(vec![x[0] * x[0] - 4.0]) };
        let out = damped_newton(f, &[0.6], &[1.0], &NewtonOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bracket_refinement() {
        let f = |x: f64| Some(x.powi(3) - 2.0);
        let r = refine_bracket(f, 0.0, -2.0, 2.0, 6.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
        assert!(refine_bracket(f, 2.0, 6.0, 3.0, 25.0, 1e-14).is_none());
    }
}
