//! Analytic exclusion of burn-coast-burn-coast extremals under quadratic drag.
//!
//! On a coast arc with positive velocity the costate is an explicit function
//! of `z = bx + k`, so whether the arc can close the level `ψ = α` again
//! reduces to the signs of two quadratics in the starting `z₀`:
//! `B(z₀) ∝ ψ(k)` and `C(z₀) ∝ ψ(k) − k/(k² + bg)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::friction::FrictionModel;

/// Values of `B`/`C` this close to zero count as zero when comparing signs.
const SIGN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticCase {
    pub k: f64,
    pub b: f64,
    pub g: f64,
    pub alpha: f64,
}

/// `Wide` when `2bg ≥ k²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GravityBranch {
    Wide,
    Narrow,
}

impl QuadraticCase {
    pub fn new(k: f64, b: f64, g: f64, alpha: f64) -> Result<Self> {
        FrictionModel::quadratic(k, b)?;
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::Param(format!("gravity must lie in (0, 1), got {g}")));
        }
        if !(alpha > 0.0 && alpha * k < 1.0) {
            return Err(Error::Param(format!("alpha must lie in (0, 1/k) = (0, {}), got {alpha}", 1.0 / k)));
        }
        Ok(QuadraticCase { k, b, g, alpha })
    }

    pub fn from_model(model: &FrictionModel, g: f64, alpha: f64) -> Result<Self> {
        match *model {
            FrictionModel::Quadratic { k, b } => Self::new(k, b, g, alpha),
            FrictionModel::Linear { .. } => Err(Error::Param("exclusion needs the quadratic model".into())),
        }
    }

    /// `2bg − k²` with its sign.
    pub fn h_signed(&self) -> f64 {
        2.0 * self.b * self.g - self.k * self.k
    }

    /// `h² = |2bg − k²|`
    pub fn h2(&self) -> f64 {
        self.h_signed().abs()
    }

    /// `c² = bg + k²`
    pub fn c2(&self) -> f64 {
        self.b * self.g + self.k * self.k
    }

    pub fn branch(&self) -> GravityBranch {
        gravity_branch(self.k, self.b, self.g)
    }

    pub fn z_tilde(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn x_tilde(&self) -> f64 {
        (1.0 - self.k * self.alpha) / (self.b * self.alpha)
    }

    /// Costate level at the zero crossing that separates concave from convex continuation.
    pub fn threshold(&self) -> f64 {
        self.k / self.c2()
    }

    pub fn z_of(&self, x: f64) -> f64 {
        self.b * x + self.k
    }
}

fn gravity_branch(k: f64, b: f64, g: f64) -> GravityBranch {
    if 2.0 * b * g >= k * k {
        GravityBranch::Wide
    } else {
        GravityBranch::Narrow
    }
}

/// Costate along a positive-velocity coast arc entered at `z₀` with `ψ = α`.
pub fn psi_closed_form(case: &QuadraticCase, z0: f64, z: f64) -> Result<f64> {
    let h = case.h_signed();
    let den = h + z * z;
    if den.abs() < 1e-14 {
        return Err(Error::SingularDenominator { z });
    }
    Ok((case.alpha * (h + z0 * z0) + 2.0 * (z - z0)) / den)
}

/// `B(z₀) = αz₀² − 2z₀ + 2k ± αh²`, a positive multiple of `ψ(k)`.
pub fn b_poly(case: &QuadraticCase, z0: f64) -> f64 {
    case.alpha * z0 * z0 - 2.0 * z0 + 2.0 * case.k + case.alpha * case.h_signed()
}

/// `C(z₀) = c²αz₀² − 2c²z₀ ± αh²c² + 2k³`, a positive multiple of `ψ(k) − k/c²`.
pub fn c_poly(case: &QuadraticCase, z0: f64) -> f64 {
    let c2 = case.c2();
    c2 * case.alpha * z0 * z0 - 2.0 * c2 * z0 + case.alpha * case.h_signed() * c2 + 2.0 * case.k.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadRoots {
    pub discriminant: f64,
    /// Ordered real roots when the discriminant is positive.
    pub roots: Option<(f64, f64)>,
}

fn quad_roots(a: f64, bb: f64, c: f64) -> QuadRoots {
    let disc = bb * bb - 4.0 * a * c;
    let roots = (disc > 0.0).then(|| {
        let q = -0.5 * (bb + bb.signum() * disc.sqrt());
        let (r1, r2) = (q / a, c / q);
        (r1.min(r2), r1.max(r2))
    });
    QuadRoots { discriminant: disc, roots }
}

/// Roots of `B` in `z₀`; `D_B = 4(1 − 2kα ∓ h²α²)`.
pub fn b_roots(case: &QuadraticCase) -> QuadRoots {
    let a = case.alpha;
    quad_roots(a, -2.0, 2.0 * case.k + a * case.h_signed())
}

/// Roots of `C` in `z₀`, symmetric about `1/α`.
pub fn c_roots(case: &QuadraticCase) -> QuadRoots {
    let (a, c2) = (case.alpha, case.c2());
    quad_roots(c2 * a, -2.0 * c2, a * case.h_signed() * c2 + 2.0 * case.k.powi(3))
}

/// `D_B` as a function of α.
pub fn d_b(k: f64, b: f64, g: f64, alpha: f64) -> f64 {
    let h = 2.0 * b * g - k * k;
    4.0 * (1.0 - h * alpha * alpha - 2.0 * k * alpha)
}

/// `D_C` as a function of α.
pub fn d_c(k: f64, b: f64, g: f64, alpha: f64) -> f64 {
    let h = 2.0 * b * g - k * k;
    let c2 = b * g + k * k;
    4.0 * (-h * c2 * c2 * alpha * alpha - 2.0 * k.powi(3) * c2 * alpha + c2 * c2)
}

/// α-roots of the discriminants `D_B` and `D_C` with their ordering relative to `1/k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaRoots {
    pub branch: GravityBranch,
    pub b_alpha1: f64,
    pub b_alpha2: f64,
    pub c_alpha1: f64,
    pub c_alpha2: f64,
    pub inv_k: f64,
}

/// Computes the discriminant roots in cancellation-free form and checks
/// `α₁ < 0 < α₂ < 1/k` (wide branch) or `0 < α₁ < 1/k < α₂` (narrow branch).
pub fn alpha_root_brackets(k: f64, b: f64, g: f64) -> Result<AlphaRoots> {
    let branch = gravity_branch(k, b, g);
    let h2 = (2.0 * b * g - k * k).abs();
    let c2 = b * g + k * k;
    let k3 = k.powi(3);
    let inv_k = 1.0 / k;
    let (b_alpha1, b_alpha2, c_alpha1, c_alpha2) = match branch {
        GravityBranch::Wide => {
            let sb = (k * k + h2).sqrt();
            let sc = (k3 * k3 + h2 * c2 * c2).sqrt();
            (-1.0 / (sb - k), 1.0 / (k + sb), -c2 / (sc - k3), c2 / (k3 + sc))
        }
        GravityBranch::Narrow => {
            // k² − h² = 2bg and k⁶ − h²c⁴ = 3k²(bg)² + 2(bg)³
            let sb = (2.0 * b * g).sqrt();
            let p = b * g;
            let sc = (3.0 * k * k * p * p + 2.0 * p * p * p).sqrt();
            (1.0 / (k + sb), 1.0 / (k - sb), c2 / (k3 + sc), c2 / (k3 - sc))
        }
    };
    let roots = AlphaRoots { branch, b_alpha1, b_alpha2, c_alpha1, c_alpha2, inv_k };
    let ordered = |a1: f64, a2: f64| match branch {
        GravityBranch::Wide => a1 < 0.0 && 0.0 < a2 && a2 < inv_k,
        GravityBranch::Narrow => 0.0 < a1 && a1 < inv_k && inv_k < a2,
    };
    if !ordered(b_alpha1, b_alpha2) {
        return Err(Error::TheoryViolation(format!(
            "roots of D_B out of order for k={k}, b={b}, g={g}: {b_alpha1}, {b_alpha2}, 1/k={inv_k}"
        )));
    }
    if !ordered(c_alpha1, c_alpha2) {
        return Err(Error::TheoryViolation(format!(
            "roots of D_C out of order for k={k}, b={b}, g={g}: {c_alpha1}, {c_alpha2}, 1/k={inv_k}"
        )));
    }
    Ok(roots)
}

/// How the velocity behaves on the coast arcs of a hypothetical
/// burn-coast-burn-coast extremal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SchemeCase {
    /// The costate cannot reach `x = 0` on the first coast arc while positive.
    NoSignChange,
    /// Velocity crosses zero with `ψ ≤ k/c²`.
    SubThresholdCrossing,
    /// Velocity crosses zero on both coast arcs with `ψ > k/c²`.
    SuperThresholdCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Contradiction {
    /// `ψ` is strictly concave and decreasing on the first coast arc, so it
    /// cannot return to α.
    ConcaveCoastArc,
    /// `ψ̈ < 0` persists past the zero crossing, same conclusion.
    ConcaveAfterZeroCrossing,
    /// `ψ̈ > 0` persists up to the horizon, but `ψ̈(T) = −φ'(x(T)) < 0`.
    ConvexUntilHorizon,
}

impl SchemeCase {
    pub fn contradiction(self) -> Contradiction {
        match self {
            SchemeCase::NoSignChange => Contradiction::ConcaveCoastArc,
            SchemeCase::SubThresholdCrossing => Contradiction::ConcaveAfterZeroCrossing,
            SchemeCase::SuperThresholdCrossing => Contradiction::ConvexUntilHorizon,
        }
    }
}

/// Exclusion argument at one level `c` of `Φ` with positive roots `x₂ < x̃ < x₃`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelExclusion {
    pub level: f64,
    pub x2: f64,
    pub x3: f64,
    pub z2: f64,
    pub z3: f64,
    pub b_z2: f64,
    pub b_z3: f64,
    pub c_z2: f64,
    pub c_z3: f64,
    pub case_taken: SchemeCase,
    pub contradiction: Contradiction,
    /// `x₃ < x_max` and a negative root exists in `(x_min, −x̃)`.
    pub admissible: bool,
    /// Costate at `x = 0` from a time-domain simulation of the first coast arc.
    pub simulated_psi_at_zero: f64,
    /// The simulation agrees with the sign of `B(z₃)` (vacuous when `|ψ| ≤ 1e−6`).
    pub simulation_agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionReport {
    pub case: QuadraticCase,
    pub branch: GravityBranch,
    pub b_roots: QuadRoots,
    pub c_roots: QuadRoots,
    pub alpha_roots: AlphaRoots,
    pub levels: Vec<LevelExclusion>,
    pub excluded: bool,
}

impl ExclusionReport {
    /// Distinct cases taken across levels, in first-seen order.
    pub fn cases_taken(&self) -> Vec<SchemeCase> {
        let mut out: Vec<SchemeCase> = Vec::new();
        for l in &self.levels {
            if !out.contains(&l.case_taken) {
                out.push(l.case_taken);
            }
        }
        out
    }
}

fn sign_of(v: f64, scale: f64) -> i8 {
    if v > SIGN_EPS * scale {
        1
    } else if v < -SIGN_EPS * scale {
        -1
    } else {
        0
    }
}

/// Time-domain RK4 of the coast arc `ẋ = −φ(x) − g`, `ψ̇ = −1 + ψφ'(x)` from
/// `(x0, α)` until the velocity reaches zero; returns `ψ` there.
fn coast_psi_at_zero(case: &QuadraticCase, x0: f64) -> f64 {
    let (k, b, g) = (case.k, case.b, case.g);
    let rhs = |x: f64, p: f64| (-(0.5 * b * x * x + k * x) - g, -1.0 + p * (b * x + k));
    let dt = 1e-3 * x0.clamp(1e-3, 1.0);
    let (mut x, mut p) = (x0, case.alpha);
    loop {
        let (k1x, k1p) = rhs(x, p);
        let (k2x, k2p) = rhs(x + 0.5 * dt * k1x, p + 0.5 * dt * k1p);
        let (k3x, k3p) = rhs(x + 0.5 * dt * k2x, p + 0.5 * dt * k2p);
        let (k4x, k4p) = rhs(x + dt * k3x, p + dt * k3p);
        let xn = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        let pn = p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        if xn <= 0.0 {
            // linear interpolation inside the last step is enough for a sign
            let w = x / (x - xn);
            return p + w * (pn - p);
        }
        x = xn;
        p = pn;
    }
}

/// Runs the case analysis at level `c ∈ (−b x̃²/2, 0)`.
pub fn exclude_level(case: &QuadraticCase, level: f64) -> Result<LevelExclusion> {
    let xt = case.x_tilde();
    let c_low = -0.5 * case.b * xt * xt;
    if !(level > c_low && level < 0.0) {
        return Err(Error::Level { level, min: c_low, max: 0.0 });
    }
    let r = (xt * xt + 2.0 * level / case.b).sqrt();
    let (x2, x3) = (xt - r, xt + r);
    let (z2, z3) = (case.z_of(x2), case.z_of(x3));
    let (b_z2, b_z3) = (b_poly(case, z2), b_poly(case, z3));
    let (c_z2, c_z3) = (c_poly(case, z2), c_poly(case, z3));
    let scale_b = 1.0 + case.alpha * z3 * z3;
    let scale_c = case.c2() * scale_b;

    let (sb2, sb3) = (sign_of(b_z2, scale_b), sign_of(b_z3, scale_b));
    let (sc2, sc3) = (sign_of(c_z2, scale_c), sign_of(c_z3, scale_c));
    if sb2 != sb3 || sc2 != sc3 {
        return Err(Error::TheoryViolation(format!("B or C changes sign between z2={z2} and z3={z3} for {case:?}")));
    }
    let case_taken = if sb3 <= 0 {
        SchemeCase::NoSignChange
    } else if sc3 <= 0 {
        SchemeCase::SubThresholdCrossing
    } else {
        SchemeCase::SuperThresholdCrossing
    };

    let model = FrictionModel::Quadratic { k: case.k, b: case.b };
    let vb = model.velocity_bounds(case.g)?;
    let x1 = -xt - (xt * xt - 2.0 * level / case.b).sqrt();
    let admissible = x3 < vb.x_max && x1 > vb.x_min;

    let simulated_psi_at_zero = coast_psi_at_zero(case, x3);
    let simulation_agrees = simulated_psi_at_zero.abs() <= 1e-6 || (simulated_psi_at_zero > 0.0) == (sb3 > 0);

    Ok(LevelExclusion {
        level,
        x2,
        x3,
        z2,
        z3,
        b_z2,
        b_z3,
        c_z2,
        c_z3,
        case_taken,
        contradiction: case_taken.contradiction(),
        admissible,
        simulated_psi_at_zero,
        simulation_agrees,
    })
}

/// Evaluates the exclusion argument on `n_levels` levels spread evenly over
/// the open range where `Φ = c` has two positive roots.
pub fn exclude_type_iii(case: &QuadraticCase, n_levels: usize) -> Result<ExclusionReport> {
    let alpha_roots = alpha_root_brackets(case.k, case.b, case.g)?;
    let xt = case.x_tilde();
    let c_low = -0.5 * case.b * xt * xt;
    let levels = (1..=n_levels)
        .map(|j| exclude_level(case, c_low * (1.0 - j as f64 / (n_levels + 1) as f64)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(l) = levels.iter().find(|l| !l.simulation_agrees) {
        return Err(Error::TheoryViolation(format!(
            "coast-arc simulation gives psi(x=0) = {} against sign of B = {} at level {}",
            l.simulated_psi_at_zero, l.b_z3, l.level
        )));
    }
    Ok(ExclusionReport {
        case: *case,
        branch: case.branch(),
        b_roots: b_roots(case),
        c_roots: c_roots(case),
        alpha_roots,
        levels,
        excluded: true,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn case(alpha: f64) -> QuadraticCase {
        QuadraticCase::new(0.5, 1.0, 0.3, alpha).unwrap()
    }

    #[test]
    fn closed_form_hand_value() {
        let c = case(1.0);
        assert_abs_diff_eq!(c.h2(), 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(psi_closed_form(&c, 1.2, 0.5).unwrap(), 0.65, epsilon = 1e-14);
        assert_eq!(psi_closed_form(&c, 1.2, 1.2).unwrap(), 1.0);
    }

    #[test]
    fn threshold_value() {
        assert_abs_diff_eq!(case(1.0).threshold(), 0.5 / 0.55, epsilon = 1e-15);
    }

    #[test]
    fn b_discriminant_and_roots() {
        let c = case(0.5);
        let r = b_roots(&c);
        assert_abs_diff_eq!(r.discriminant / 4.0, 0.4125, epsilon = 1e-14);
        assert_abs_diff_eq!(r.discriminant, d_b(0.5, 1.0, 0.3, 0.5), epsilon = 1e-14);
        let (lo, hi) = r.roots.unwrap();
        assert!(b_poly(&c, lo).abs() < 1e-12 && b_poly(&c, hi).abs() < 1e-12);
        assert_abs_diff_eq!(0.5 * (lo + hi), c.z_tilde(), epsilon = 1e-12);
    }

    #[test]
    fn c_roots_vanish_and_are_symmetric() {
        let c = case(0.9);
        assert_abs_diff_eq!(c.c2(), 0.55, epsilon = 1e-15);
        let r = c_roots(&c);
        if let Some((lo, hi)) = r.roots {
            assert!(c_poly(&c, lo).abs() < 1e-10 && c_poly(&c, hi).abs() < 1e-10);
            assert_abs_diff_eq!(0.5 * (lo + hi), c.z_tilde(), epsilon = 1e-10);
        } else {
            assert!(r.discriminant <= 0.0);
        }
        assert_abs_diff_eq!(r.discriminant, d_c(0.5, 1.0, 0.3, 0.9), epsilon = 1e-14);
    }

    #[test]
    fn double_root_at_singular_level() {
        let ar = alpha_root_brackets(0.5, 1.0, 0.3).unwrap();
        let c = case(ar.b_alpha2);
        assert!(b_poly(&c, c.z_tilde()).abs() < 1e-12);
        let c = case(ar.c_alpha2);
        assert!(c_poly(&c, c.z_tilde()).abs() < 1e-12);
    }

    #[test]
    fn wide_branch_roots() {
        let ar = alpha_root_brackets(0.5, 1.0, 0.3).unwrap();
        assert_eq!(ar.branch, GravityBranch::Wide);
        let printed = (-0.5 + (0.25f64 + 0.35).sqrt()) / 0.35;
        assert_abs_diff_eq!(ar.b_alpha2, printed, epsilon = 1e-14);
        assert_abs_diff_eq!(ar.b_alpha2, 0.78456191, epsilon = 1e-8);
        assert!(d_b(0.5, 1.0, 0.3, ar.b_alpha2).abs() < 1e-10);
        assert!(d_c(0.5, 1.0, 0.3, ar.c_alpha2).abs() < 1e-10);
    }

    #[test]
    fn narrow_branch_roots() {
        // 2bg = 0.2 < k² = 0.64
        let (k, b, g) = (0.8, 1.0, 0.1);
        let ar = alpha_root_brackets(k, b, g).unwrap();
        assert_eq!(ar.branch, GravityBranch::Narrow);
        let h2 = k * k - 2.0 * b * g;
        let printed = (k - (k * k - h2).sqrt()) / h2;
        assert_abs_diff_eq!(ar.b_alpha1, printed, epsilon = 1e-14);
        for a in [ar.b_alpha1, ar.b_alpha2] {
            assert!(d_b(k, b, g, a).abs() < 1e-10);
        }
        for a in [ar.c_alpha1, ar.c_alpha2] {
            assert!(d_c(k, b, g, a).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_alpha_rejected() {
        assert!(QuadraticCase::new(0.5, 1.0, 0.3, 2.0).is_err());
        assert!(QuadraticCase::new(0.5, 1.0, 0.3, 0.0).is_err());
    }

    #[test]
    fn singular_denominator() {
        // narrow branch: z² = k² − 2bg
        let c = QuadraticCase::new(0.8, 1.0, 0.1, 0.5).unwrap();
        let z = (0.64f64 - 0.2).sqrt();
        assert!(matches!(psi_closed_form(&c, 1.0, z), Err(Error::SingularDenominator { .. })));
    }

    #[test]
    fn exclusion_runs_all_cases() {
        let mut seen = Vec::new();
        for alpha in [0.3, 0.8, 1.2, 1.6, 1.9] {
            let rep = exclude_type_iii(&case(alpha), 9).unwrap();
            assert!(rep.excluded);
            seen.extend(rep.cases_taken());
        }
        assert!(seen.contains(&SchemeCase::NoSignChange));
        assert!(seen.contains(&SchemeCase::SuperThresholdCrossing) || seen.contains(&SchemeCase::SubThresholdCrossing));
    }
}
