//! Pointwise check of the maximum-principle conditions on a sampled process.

use serde::Serialize;

use super::Extremal;
use crate::dynamics::{
    fuel_used, hamiltonian, integrate_costate_backward, ArcMode, ControlLaw, ProblemParams, Trajectory,
};
use crate::friction::FrictionModel;

#[derive(Debug, Clone, Copy)]
pub struct MpTolerances {
    pub transversality: f64,
    pub maximality_band: f64,
    /// Scaled by `1 + T`.
    pub hamiltonian: f64,
    pub fuel: f64,
    pub confinement: f64,
    pub switch_level: f64,
    pub crossing_slack: f64,
}

impl Default for MpTolerances {
    fn default() -> Self {
        MpTolerances {
            transversality: 1e-8,
            maximality_band: 1e-6,
            hamiltonian: 1e-6,
            fuel: 1e-9,
            confinement: 1e-9,
            switch_level: 1e-6,
            crossing_slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpCheck {
    pub condition: &'static str,
    pub pass: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpReport {
    pub pass: bool,
    pub checks: Vec<MpCheck>,
    /// Velocity stays nonnegative, so the process is optimal among
    /// nonnegative-velocity processes by concavity of the Hamiltonian.
    pub nonnegative_velocity: bool,
}

impl MpReport {
    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.condition).collect()
    }

    pub fn check(&self, condition: &str) -> Option<&MpCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

pub fn verify_mp(e: &Extremal, params: &ProblemParams, model: &FrictionModel, tol: &MpTolerances) -> MpReport {
    verify_process(e.alpha, &e.law, &e.traj, params, model, tol)
}

/// Verifies an arbitrary process with multiplier `alpha`.
///
/// The costate is recomputed when `traj` does not carry one.
pub fn verify_process(
    alpha: f64,
    law: &ControlLaw,
    traj: &Trajectory,
    params: &ProblemParams,
    model: &FrictionModel,
    tol: &MpTolerances,
) -> MpReport {
    let g = params.g;
    let mut checks = Vec::new();
    let mut push = |condition: &'static str, pass: bool, value: f64| checks.push(MpCheck { condition, pass, value });

    let psi = match &traj.psi {
        Some(p) => Some(p.clone()),
        None => integrate_costate_backward(model, g, traj).ok(),
    };
    let n = traj.len();
    let horizon = params.horizon;

    match &psi {
        Some(psi) => {
            let end = psi[n - 1].abs();
            push("transversality", end <= tol.transversality, end);
            let min_pre =
                traj.grid.iter().zip(psi).filter(|(t, _)| **t < horizon).map(|(_, p)| *p).fold(f64::INFINITY, f64::min);
            push("costate_positive", min_pre > 0.0, min_pre);
        }
        None => {
            push("transversality", false, f64::NAN);
            push("costate_positive", false, f64::NAN);
        }
    }

    push("alpha_positive", alpha > 0.0, alpha);

    let fuel_gap = (traj.final_mass() - params.m_t).abs().max((fuel_used(law) - params.fuel_budget()).abs());
    push("complementarity", fuel_gap <= tol.fuel, fuel_gap);

    if let Some(psi) = &psi {
        let band = tol.maximality_band;
        let mut worst = 0.0f64;
        for (p, u) in psi.iter().zip(&traj.u) {
            let d = p - alpha;
            let ok = if d > band {
                *u == 1.0
            } else if d < -band {
                *u == 0.0
            } else {
                true
            };
            if !ok {
                worst = worst.max(d.abs());
            }
        }
        push("maximality", worst == 0.0, worst);

        let (lo, hi) = traj
            .x
            .iter()
            .zip(psi)
            .zip(&traj.u)
            .map(|((x, p), u)| hamiltonian(model, g, *x, *p, alpha, *u))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(h), hi.max(h)));
        let range = hi - lo;
        push("hamiltonian_constant", range <= tol.hamiltonian * (1.0 + horizon), range);
    } else {
        push("maximality", false, f64::NAN);
        push("hamiltonian_constant", false, f64::NAN);
    }

    match model.velocity_bounds(g) {
        Ok(vb) => {
            let excursion =
                traj.x.iter().map(|x| (vb.x_min - x).max(x - vb.x_max)).fold(f64::NEG_INFINITY, f64::max).max(0.0);
            push("confinement", excursion <= tol.confinement, excursion);
        }
        Err(_) => push("confinement", false, f64::NAN),
    }

    let switches = law.switch_times();
    let levels: Vec<f64> = (0..switches.len()).map(|i| model.level_fn(alpha, traj.x_at_switch(i))).collect();
    let spread =
        levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if levels.len() < 2 { 0.0 } else { spread };
    push("switch_level_identity", spread <= tol.switch_level, spread);

    let crossing = crossing_violation(law, traj, tol.crossing_slack);
    push("crossing_signs", crossing == 0.0, crossing);

    let pass = checks.iter().all(|c| c.pass);
    let nonnegative_velocity = traj.x.iter().all(|x| *x >= -tol.confinement);
    MpReport { pass, checks, nonnegative_velocity }
}

/// Largest violation of the velocity signs forced at consecutive level
/// crossings, judged by the bang arc between them.
fn crossing_violation(law: &ControlLaw, traj: &Trajectory, slack: f64) -> f64 {
    let arcs = law.arcs();
    let mut worst = 0.0f64;
    for (k, arc) in arcs.iter().enumerate().take(arcs.len().saturating_sub(1)).skip(1) {
        let (x_in, x_out) = (traj.x_at_switch(k - 1), traj.x_at_switch(k));
        let v = match arc.mode {
            // ψ > α between: x(t') < 0 and x(t'') ≤ −x(t')
            ArcMode::Bang1 => (x_in - slack).max(0.0).max(x_out + x_in - slack),
            // ψ < α between: x(t') < 0, or x(t') > 0 and x(t'') ≤ −x(t')
            ArcMode::Bang0 => {
                if x_in < slack {
                    0.0
                } else {
                    (x_out + x_in - slack).max(0.0)
                }
            }
            ArcMode::Singular { .. } => 0.0,
        };
        worst = worst.max(v);
    }
    worst
}
