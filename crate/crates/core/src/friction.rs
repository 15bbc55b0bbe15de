//! Resistance models and the level function `Φ(x) = φ(x) − x/α`.
//!
//! Two models are supported: linear `φ(x) = γx` and the piecewise quadratic
//! `φ(x) = ±b/2·x² + kx` (sign of the quadratic term follows the sign of `x`).
//! Both are odd, strictly increasing, and vanish at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BISECTION_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum FrictionModel {
    Linear { gamma: f64 },
    Quadratic { k: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Terminal velocities under zero and full thrust.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityBounds {
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRoot {
    pub x: f64,
    /// Set when the level touches an interior extremum of `Φ` (double root).
    pub tangent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRootSet {
    pub level: f64,
    pub roots: Vec<LevelRoot>,
}

impl LevelRootSet {
    pub fn values(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.x).collect()
    }
}

impl FrictionModel {
    pub fn linear(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Param(format!("linear rate must be positive, got {gamma}")));
        }
        Ok(FrictionModel::Linear { gamma })
    }

    pub fn quadratic(k: f64, b: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::Param(format!("quadratic coefficients must be positive, got k={k}, b={b}")));
        }
        Ok(FrictionModel::Quadratic { k, b })
    }

    pub fn phi(&self, x: f64) -> f64 {
        match *self {
            FrictionModel::Linear { gamma } => gamma * x,
            FrictionModel::Quadratic { k, b } => 0.5 * b * x * x.abs() + k * x,
        }
    }

    /// `φ'(x)`; continuous across zero.
    pub fn dphi(&self, x: f64) -> f64 {
        match *self {
            FrictionModel::Linear { gamma } => gamma,
            FrictionModel::Quadratic { k, b } => k + b * x.abs(),
        }
    }

    /// One-sided second derivative. Only differs between sides at `x = 0`.
    pub fn ddphi_side(&self, x: f64, side: Side) -> f64 {
        match *self {
            FrictionModel::Linear { .. } => 0.0,
            FrictionModel::Quadratic { b, .. } => {
                if x > 0.0 || (x == 0.0 && side == Side::Right) {
                    b
                } else {
                    -b
                }
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, FrictionModel::Linear { .. })
    }

    /// Slope at the origin, `φ'(0)`.
    pub fn slope_at_zero(&self) -> f64 {
        self.dphi(0.0)
    }

    pub fn velocity_bounds(&self, g: f64) -> Result<VelocityBounds> {
        check_gravity(g)?;
        let x_max = solve_increasing(|x| self.phi(x) - (1.0 - g), 0.0, 1.0, 1.0);
        let x_min = solve_increasing(|x| self.phi(x) + g, -1.0, 0.0, -1.0);
        Ok(VelocityBounds { x_min, x_max })
    }

    /// Positive solution of `φ'(x) = 1/α`, or `None` when `φ'(0) ≥ 1/α`.
    ///
    /// A linear model has constant slope and never yields an isolated root.
    pub fn x_tilde(&self, alpha: f64) -> Option<f64> {
        match *self {
            FrictionModel::Linear { .. } => None,
            FrictionModel::Quadratic { k, b } => {
                if k * alpha >= 1.0 {
                    None
                } else {
                    Some((1.0 - k * alpha) / (b * alpha))
                }
            }
        }
    }

    /// Level function `Φ(x) = φ(x) − x/α`.
    pub fn level_fn(&self, alpha: f64, x: f64) -> f64 {
        self.phi(x) - x / alpha
    }

    /// Breakpoints splitting `[x_min, x_max]` into pieces on which `Φ` is monotone.
    fn monotone_breaks(&self, alpha: f64, bounds: &VelocityBounds) -> Vec<f64> {
        let mut pts = vec![bounds.x_min];
        if let Some(xt) = self.x_tilde(alpha) {
            if -xt > bounds.x_min {
                pts.push(-xt);
            }
            pts.push(0.0);
            if xt < bounds.x_max {
                pts.push(xt);
            }
        } else {
            pts.push(0.0);
        }
        pts.push(bounds.x_max);
        pts
    }

    pub fn c_range(&self, alpha: f64, bounds: &VelocityBounds) -> (f64, f64) {
        let pts = self.monotone_breaks(alpha, bounds);
        pts.iter()
            .map(|&x| self.level_fn(alpha, x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// All solutions of `Φ(x) = c` in `[x_min, x_max]`, ascending.
    pub fn level_roots(&self, alpha: f64, c: f64, bounds: &VelocityBounds) -> Result<LevelRootSet> {
        if !(alpha > 0.0) {
            return Err(Error::Param(format!("alpha must be positive, got {alpha}")));
        }
        let (c_min, c_max) = self.c_range(alpha, bounds);
        let slack = 1e-12 * (1.0 + c.abs());
        if c < c_min - slack || c > c_max + slack {
            return Err(Error::Level { level: c, min: c_min, max: c_max });
        }
        let f = |x: f64| self.level_fn(alpha, x) - c;
        let interior: Vec<f64> = self.x_tilde(alpha).map(|xt| vec![-xt, xt]).unwrap_or_default();
        let pts = self.monotone_breaks(alpha, bounds);
        let mut roots: Vec<LevelRoot> = Vec::new();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (f(a), f(b));
            let root = if fa.abs() <= slack {
                Some(a)
            } else if fb.abs() <= slack {
                Some(b)
            } else if fa.signum() != fb.signum() {
                Some(bisect(&f, a, b))
            } else {
                None
            };
            if let Some(x) = root {
                let dup = roots.last().map(|r| (r.x - x).abs() <= 1e-10 * (1.0 + x.abs())).unwrap_or(false);
                if !dup {
                    let tangent =
                        interior.iter().any(|&xc| (xc - x).abs() <= 1e-9 && xc > bounds.x_min && xc < bounds.x_max);
                    roots.push(LevelRoot { x, tangent });
                }
            }
        }
        Ok(LevelRootSet { level: c, roots })
    }
}

pub(crate) fn check_gravity(g: f64) -> Result<()> {
    if g > 0.0 && g < 1.0 {
        Ok(())
    } else {
        Err(Error::Param(format!("gravity must lie in (0, 1), got {g}")))
    }
}

/// Root of an increasing function; the bracket grows by `step` in the
/// direction of `grow` until it straddles zero.
fn solve_increasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, grow: f64) -> f64 {
    let mut width = 1.0;
    for _ in 0..200 {
        if f(lo) <= 0.0 && f(hi) >= 0.0 {
            break;
        }
        width *= 2.0;
        if grow > 0.0 {
            hi = lo + width;
        } else {
            lo = hi - width;
        }
    }
    bisect(&f, lo, hi)
}

/// Plain bisection on a sign-changing bracket.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..BISECTION_MAX_ITER {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
