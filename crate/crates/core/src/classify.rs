//! Regime decision tree: which extremal structures can satisfy the
//! maximum principle for given gravity and fuel multiplier.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::friction::{check_gravity, FrictionModel};

/// Relative width of the knife-edge band around each threshold.
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ExtremalType {
    Ia,
    Ib,
    IIa,
    IIb,
    III,
}

impl ExtremalType {
    pub const ALL: [ExtremalType; 5] =
        [ExtremalType::Ia, ExtremalType::Ib, ExtremalType::IIa, ExtremalType::IIb, ExtremalType::III];

    pub fn switch_count(self) -> usize {
        match self {
            ExtremalType::Ia => 1,
            ExtremalType::Ib | ExtremalType::IIa => 2,
            ExtremalType::IIb | ExtremalType::III => 3,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ia" => Some(ExtremalType::Ia),
            "ib" => Some(ExtremalType::Ib),
            "iia" => Some(ExtremalType::IIa),
            "iib" => Some(ExtremalType::IIb),
            "iii" => Some(ExtremalType::III),
            _ => None,
        }
    }
}

impl fmt::Display for ExtremalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExtremalType::Ia => "Ia",
            ExtremalType::Ib => "Ib",
            ExtremalType::IIa => "IIa",
            ExtremalType::IIb => "IIb",
            ExtremalType::III => "III",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GravityCase {
    /// `0 < g < 1/2`
    I,
    /// `g = 1/2`
    II,
    /// `1/2 < g < 1`
    III,
}

/// Cell of the classification scheme, printed as e.g. `I.1.c` or `III.2.b`.
///
/// `alpha_case == 0` marks `φ'(0) ≥ 1/α`: the level function has only the zero
/// root and the scheme is not entered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegimeLabel {
    pub gravity: GravityCase,
    pub alpha_case: u8,
    pub sub_case: Option<char>,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = match self.gravity {
            GravityCase::I => "I",
            GravityCase::II => "II",
            GravityCase::III => "III",
        };
        write!(f, "{g}.{}", self.alpha_case)?;
        if let Some(c) = self.sub_case {
            write!(f, ".{c}")?;
        }
        Ok(())
    }
}

impl Serialize for RegimeLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Threshold comparisons that decided the regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gates {
    pub x_min: f64,
    pub x_max: f64,
    pub x_tilde: Option<f64>,
    /// `x_max / (1 − g)`
    pub alpha_upper: f64,
    /// `−x_min / g`
    pub alpha_lower: f64,
    /// Some comparison landed within the knife-edge band.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    pub types: Vec<ExtremalType>,
    pub gates: Gates,
}

impl CandidateSet {
    pub fn contains(&self, t: ExtremalType) -> bool {
        self.types.contains(&t)
    }

    pub fn display_types(&self) -> String {
        let inner: Vec<String> = self.types.iter().map(|t| t.to_string()).collect();
        format!("{{{}}}", inner.join(","))
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_EPS * (1.0 + a.abs().max(b.abs()))
}

/// Maps `(model, g, α)` onto the classification scheme.
pub fn classify(model: &FrictionModel, g: f64, alpha: f64) -> Result<(RegimeLabel, CandidateSet)> {
    check_gravity(g)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Param(format!("alpha must be positive, got {alpha}")));
    }
    use ExtremalType::*;
    let vb = model.velocity_bounds(g)?;
    let (x_min, x_max) = (vb.x_min, vb.x_max);
    let xt = model.x_tilde(alpha);
    let alpha_upper = x_max / (1.0 - g);
    let alpha_lower = -x_min / g;

    let gravity = if g == 0.5 {
        GravityCase::II
    } else if g < 0.5 {
        GravityCase::I
    } else {
        GravityCase::III
    };
    let mut boundary = g != 0.5 && near(g, 0.5);

    let mut gates = Gates { x_min, x_max, x_tilde: xt, alpha_upper, alpha_lower, boundary: false };

    let Some(xt) = xt else {
        gates.boundary = boundary || near(model.slope_at_zero() * alpha, 1.0);
        let label = RegimeLabel { gravity, alpha_case: 0, sub_case: None };
        return Ok((label, CandidateSet { types: vec![Ia], gates }));
    };

    boundary |= near(alpha, alpha_upper) || near(alpha, alpha_lower);
    boundary |= near(x_max, xt) || near(x_min, -xt);
    gates.boundary = boundary;

    let all = vec![Ia, Ib, IIa, IIb, III];
    let (alpha_case, sub_case, types): (u8, Option<char>, Vec<ExtremalType>) = match gravity {
        GravityCase::I => {
            if alpha <= alpha_upper {
                if x_max <= xt {
                    (1, Some('a'), vec![Ia])
                } else if x_min >= -xt {
                    (1, Some('b'), vec![Ia, Ib])
                } else {
                    (1, Some('c'), vec![Ia, Ib, IIa])
                }
            } else if alpha < alpha_lower {
                if x_min >= -xt {
                    (2, Some('a'), vec![Ia, Ib])
                } else {
                    (2, Some('b'), vec![Ia, Ib, IIa])
                }
            } else {
                (3, None, all)
            }
        }
        GravityCase::II => {
            if alpha <= 2.0 * x_max {
                if x_max < xt {
                    (1, Some('a'), vec![Ia])
                } else {
                    (1, Some('b'), vec![Ia, Ib, IIa])
                }
            } else {
                (2, None, all)
            }
        }
        GravityCase::III => {
            if alpha <= alpha_lower {
                if x_min >= -xt {
                    (1, Some('a'), vec![Ia])
                } else if x_max <= xt {
                    (1, Some('b'), vec![Ia])
                } else {
                    (1, Some('c'), vec![Ia, Ib])
                }
            } else if alpha <= alpha_upper {
                if x_max <= xt {
                    (2, Some('a'), vec![Ia, IIa])
                } else {
                    (2, Some('b'), all)
                }
            } else {
                (3, None, all)
            }
        }
    };
    let types = if model.is_linear() { vec![Ia] } else { types };
    Ok((RegimeLabel { gravity, alpha_case, sub_case }, CandidateSet { types, gates }))
}

/// Whether `Φ(x) = 0` has a root in `[x_min, x_max]` other than zero.
pub fn has_nonzero_level_roots(model: &FrictionModel, g: f64, alpha: f64) -> Result<bool> {
    let vb = model.velocity_bounds(g)?;
    let roots = model.level_roots(alpha, 0.0, &vb)?;
    Ok(roots.roots.iter().any(|r| r.x.abs() > 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExtremalType::*;

    fn quad() -> FrictionModel {
        FrictionModel::quadratic(0.5, 1.0).unwrap()
    }

    #[test]
    fn low_alpha_single_bang() {
        let (label, set) = classify(&quad(), 0.3, 0.5).unwrap();
        assert_eq!(label.to_string(), "I.1.a");
        assert_eq!(set.types, vec![Ia]);
        assert!((set.gates.alpha_upper - 1.120_747_8).abs() < 1e-6);
    }

    #[test]
    fn high_alpha_all_types() {
        let (label, set) = classify(&quad(), 0.3, 1.6).unwrap();
        assert_eq!(label.to_string(), "I.3");
        assert_eq!(set.types, vec![Ia, Ib, IIa, IIb, III]);
        assert!((set.gates.alpha_lower - 1.406_514_7).abs() < 1e-6);
    }

    #[test]
    fn linear_always_bang_bang() {
        let m = FrictionModel::linear(1.0).unwrap();
        for &a in &[0.1, 1.0, 5.0] {
            assert_eq!(classify(&m, 0.5, a).unwrap().1.types, vec![Ia]);
        }
    }

    #[test]
    fn half_gravity_cases() {
        let m = quad();
        let vb = m.velocity_bounds(0.5).unwrap();
        assert!((vb.x_min + vb.x_max).abs() < 1e-12);
        let (label, _) = classify(&m, 0.5, 0.3).unwrap();
        assert_eq!(label.to_string(), "II.1.a");
        let (label, set) = classify(&m, 0.5, 2.0 * vb.x_max + 0.01).unwrap();
        assert_eq!(label.to_string(), "II.2");
        assert_eq!(set.types.len(), 5);
    }

    #[test]
    fn zero_root_only_when_slope_dominates() {
        let (label, set) = classify(&quad(), 0.3, 2.5).unwrap();
        assert_eq!(label.alpha_case, 0);
        assert_eq!(set.types, vec![Ia]);
    }

    #[test]
    fn nonzero_roots() {
        assert!(!has_nonzero_level_roots(&quad(), 0.3, 2.5).unwrap());
        assert!(has_nonzero_level_roots(&quad(), 0.3, 4.0 / 3.0).unwrap());
        let lin = FrictionModel::linear(1.0).unwrap();
        assert!(!has_nonzero_level_roots(&lin, 0.3, 0.5).unwrap());
    }

    #[test]
    fn invalid_inputs() {
        assert!(classify(&quad(), 1.0, 0.5).is_err());
        assert!(classify(&quad(), 0.3, 0.0).is_err());
    }
}
