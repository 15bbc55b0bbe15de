//! Construction of candidate extremals by indirect shooting.
//!
//! Every structure is parameterised by a few unknowns (switch times and,
//! where it is not implied by a singular junction, the multiplier α). The fuel
//! budget pins one more switch time, so residuals are purely the costate
//! level conditions `ψ(tᵢ) = α`.

mod scan;
mod verify;

pub use scan::{full_thrust_trajectory, scan_all, ScanOutcome, TypeAttempt, VerifiedExtremal};
pub use verify::{verify_mp, verify_process, MpCheck, MpReport, MpTolerances};

use serde::Serialize;

use crate::classify::ExtremalType;
use crate::dynamics::{simulate, ArcMode, ControlLaw, ProblemParams, Trajectory, DEFAULT_STEPS_PER_UNIT};
use crate::error::{Error, Result};
use crate::friction::FrictionModel;
use crate::solve::{damped_newton, max_norm, refine_bracket, NewtonOptions};

#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    /// Density for the final, reported trajectory.
    pub steps_per_unit: f64,
    /// Density used while multistart Newton iterates are far from a root.
    pub search_steps_per_unit: f64,
    pub seeds_per_dim: usize,
    pub newton: NewtonOptions,
    /// Slack allowed on the costate sign pattern of bang arcs.
    pub sign_band: f64,
    /// Allowed `|ψ − α|` on singular arcs.
    pub singular_band: f64,
    /// Shortest arc accepted in a converged schedule.
    pub min_arc: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            steps_per_unit: DEFAULT_STEPS_PER_UNIT,
            search_steps_per_unit: 150.0,
            seeds_per_dim: 16,
            newton: NewtonOptions::default(),
            sign_band: 1e-9,
            singular_band: 1e-8,
            min_arc: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Extremal {
    #[serde(rename = "type")]
    pub kind: ExtremalType,
    pub alpha: f64,
    pub switch_times: Vec<f64>,
    #[serde(skip)]
    pub law: ControlLaw,
    #[serde(skip)]
    pub traj: Trajectory,
    pub residual_norm: f64,
}

impl Extremal {
    pub fn final_position(&self) -> f64 {
        self.traj.final_position()
    }

    pub fn psi(&self) -> &[f64] {
        self.traj.psi.as_deref().unwrap_or(&[])
    }
}

/// Control modes of a structure, in time order.
fn modes(kind: ExtremalType, singular: Option<ArcMode>) -> Vec<ArcMode> {
    use ArcMode::*;
    match kind {
        ExtremalType::Ia => vec![Bang1, Bang0],
        ExtremalType::Ib => vec![Bang1, singular.expect("singular mode"), Bang0],
        ExtremalType::IIa => vec![Bang0, Bang1, Bang0],
        ExtremalType::IIb => vec![Bang0, Bang1, singular.expect("singular mode"), Bang0],
        ExtremalType::III => vec![Bang1, Bang0, Bang1, Bang0],
    }
}

/// Whether α is a free unknown (appended after the free switch times).
fn alpha_is_unknown(kind: ExtremalType) -> bool {
    matches!(kind, ExtremalType::IIa | ExtremalType::III)
}

fn free_time_count(kind: ExtremalType) -> usize {
    match kind {
        ExtremalType::Ia => 0,
        ExtremalType::Ib | ExtremalType::IIa => 1,
        ExtremalType::IIb | ExtremalType::III => 2,
    }
}

/// Velocity reached at `t_end` under `modes` switched at `switches`.
fn prefix_velocity(
    params: &ProblemParams,
    model: &FrictionModel,
    prefix: &[ArcMode],
    switches: &[f64],
    t_end: f64,
    density: f64,
) -> Result<f64> {
    let law = ControlLaw::from_switches(prefix, switches, t_end)?;
    let traj = crate::dynamics::integrate_forward(params, model, &law, density)?;
    Ok(*traj.x.last().unwrap())
}

/// Singular arc entered at `level` with thrust `φ(level) + g`, its length fixed
/// by the fuel left over.
fn singular_exit(
    params: &ProblemParams,
    model: &FrictionModel,
    level: f64,
    start: f64,
    fuel_left: f64,
) -> Result<(ArcMode, f64)> {
    let mode = ArcMode::singular(model, params.g, level)?;
    let thrust = mode.thrust();
    if !(thrust > 0.0) {
        return Err(Error::InfeasibleSingular { thrust });
    }
    Ok((mode, start + fuel_left / thrust))
}

/// Schedule implied by the free switch times, plus α when a singular junction fixes it.
pub(crate) fn schedule(
    kind: ExtremalType,
    params: &ProblemParams,
    model: &FrictionModel,
    free: &[f64],
    density: f64,
) -> Result<(ControlLaw, Option<f64>)> {
    let dm = params.fuel_budget();
    let horizon = params.horizon;
    let ordered = |ts: &[f64]| -> Result<()> {
        let ok = ts.first().is_some_and(|&t| t > 0.0)
            && ts.windows(2).all(|w| w[0] < w[1])
            && ts.last().is_some_and(|&t| t < horizon);
        if ok {
            Ok(())
        } else {
            Err(Error::InfeasibleSchedule(format!("switch times {ts:?} not ordered in (0, {horizon})")))
        }
    };
    use ArcMode::*;
    match kind {
        ExtremalType::Ia => {
            let ts = [dm];
            ordered(&ts)?;
            Ok((ControlLaw::from_switches(&modes(kind, None), &ts, horizon)?, None))
        }
        ExtremalType::Ib => {
            let t1 = free[0];
            if !(t1 > 0.0 && t1 < dm) {
                return Err(Error::InfeasibleSchedule(format!("t1 = {t1} outside (0, {dm})")));
            }
            let x1 = prefix_velocity(params, model, &[Bang1], &[], t1, density)?;
            let (mode, t2) = singular_exit(params, model, x1, t1, dm - t1)?;
            let ts = [t1, t2];
            ordered(&ts)?;
            let alpha = 1.0 / model.dphi(x1);
            Ok((ControlLaw::from_switches(&modes(kind, Some(mode)), &ts, horizon)?, Some(alpha)))
        }
        ExtremalType::IIa => {
            let ts = [free[0], free[0] + dm];
            ordered(&ts)?;
            Ok((ControlLaw::from_switches(&modes(kind, None), &ts, horizon)?, None))
        }
        ExtremalType::IIb => {
            let (t1, t2) = (free[0], free[1]);
            let burn = t2 - t1;
            if !(t1 > 0.0 && burn > 0.0 && burn < dm && t2 < horizon) {
                return Err(Error::InfeasibleSchedule(format!("({t1}, {t2}) infeasible")));
            }
            let x2 = prefix_velocity(params, model, &[Bang0, Bang1], &[t1], t2, density)?;
            if !(x2 > 0.0) {
                return Err(Error::InfeasibleSchedule(format!("singular level {x2} must be positive")));
            }
            let (mode, t3) = singular_exit(params, model, x2, t2, dm - burn)?;
            let ts = [t1, t2, t3];
            ordered(&ts)?;
            let alpha = 1.0 / model.dphi(x2);
            Ok((ControlLaw::from_switches(&modes(kind, Some(mode)), &ts, horizon)?, Some(alpha)))
        }
        ExtremalType::III => {
            let (t1, t2) = (free[0], free[1]);
            let ts = [t1, t2, t2 + dm - t1];
            ordered(&ts)?;
            Ok((ControlLaw::from_switches(&modes(kind, None), &ts, horizon)?, None))
        }
    }
}

/// Rebuilds the control law of a structure from explicit switch times.
///
/// Singular levels are taken from the velocity reached at the junction; the
/// fuel balance is not imposed.
pub fn law_from_switches(
    kind: ExtremalType,
    params: &ProblemParams,
    model: &FrictionModel,
    switch_times: &[f64],
    density: f64,
) -> Result<ControlLaw> {
    if switch_times.len() != kind.switch_count() {
        return Err(Error::InfeasibleSchedule(format!(
            "type {kind} needs {} switch times, got {}",
            kind.switch_count(),
            switch_times.len()
        )));
    }
    let singular = match kind {
        ExtremalType::Ib => {
            let x1 = prefix_velocity(params, model, &[ArcMode::Bang1], &[], switch_times[0], density)?;
            Some(ArcMode::singular(model, params.g, x1)?)
        }
        ExtremalType::IIb => {
            let x2 = prefix_velocity(
                params,
                model,
                &[ArcMode::Bang0, ArcMode::Bang1],
                &switch_times[..1],
                switch_times[1],
                density,
            )?;
            Some(ArcMode::singular(model, params.g, x2)?)
        }
        _ => None,
    };
    ControlLaw::from_switches(&modes(kind, singular), switch_times, params.horizon)
}

struct Evaluation {
    law: ControlLaw,
    traj: Trajectory,
    alpha: f64,
    residuals: Vec<f64>,
}

/// Simulates the schedule for `unknowns` and returns the shooting residuals.
fn evaluate(
    kind: ExtremalType,
    params: &ProblemParams,
    model: &FrictionModel,
    unknowns: &[f64],
    density: f64,
) -> Result<Evaluation> {
    let n_free = free_time_count(kind);
    let (law, derived) = schedule(kind, params, model, &unknowns[..n_free], density)?;
    let traj = simulate(params, model, &law, density)?;
    let psi_sw: Vec<f64> = (0..kind.switch_count()).map(|k| traj.psi_at_switch(k).unwrap()).collect();
    let alpha = match (derived, alpha_is_unknown(kind)) {
        (Some(a), _) => a,
        (None, true) => unknowns[n_free],
        (None, false) => psi_sw[0],
    };
    if !(alpha > 0.0) {
        return Err(Error::NotAnExtremal(format!("multiplier {alpha} is not positive")));
    }
    let residuals = match kind {
        ExtremalType::Ia => vec![],
        // the singular arc carries ψ ≡ α backwards once ψ(exit) = α
        ExtremalType::Ib => vec![psi_sw[1] - alpha],
        ExtremalType::IIb => vec![psi_sw[0] - alpha, psi_sw[2] - alpha],
        ExtremalType::IIa | ExtremalType::III => psi_sw.iter().map(|p| p - alpha).collect(),
    };
    Ok(Evaluation { law, traj, alpha, residuals })
}

/// Checks the costate sign pattern required by the control on each arc.
fn check_sign_pattern(
    kind: ExtremalType,
    traj: &Trajectory,
    law: &ControlLaw,
    alpha: f64,
    opts: &ShootingOptions,
) -> Result<()> {
    let psi = traj.psi.as_ref().expect("costate");
    let n_arcs = law.arcs().len();
    for (k, arc) in law.arcs().iter().enumerate() {
        let lo = traj.arc_start(k) + usize::from(k > 0);
        let hi = if k + 1 < n_arcs { traj.arc_start(k + 1) - 1 } else { traj.len() };
        for (i, p) in psi.iter().enumerate().take(hi).skip(lo) {
            let d = p - alpha;
            let bad = match arc.mode {
                ArcMode::Bang1 => d < -opts.sign_band,
                ArcMode::Bang0 => d > opts.sign_band,
                ArcMode::Singular { .. } => d.abs() > opts.singular_band,
            };
            if bad {
                return Err(Error::NotAnExtremal(format!(
                    "type {kind}: ψ − α = {d:.3e} at t = {:.6} contradicts {:?}",
                    traj.grid[i], arc.mode
                )));
            }
        }
    }
    Ok(())
}

/// Full-density evaluation, acceptance checks and packaging.
fn finalize(
    kind: ExtremalType,
    params: &ProblemParams,
    model: &FrictionModel,
    unknowns: &[f64],
    opts: &ShootingOptions,
) -> Result<Extremal> {
    let ev = evaluate(kind, params, model, unknowns, opts.steps_per_unit)?;
    let switch_times = ev.law.switch_times();
    let psi_sw: Vec<f64> = (0..switch_times.len()).map(|k| ev.traj.psi_at_switch(k).unwrap() - ev.alpha).collect();
    let residual_norm = max_norm(&psi_sw);
    if residual_norm > opts.newton.accept {
        return Err(Error::NotAnExtremal(format!("type {kind}: level residual {residual_norm:.3e} above tolerance")));
    }
    if let Some(a) = ev.law.arcs().iter().find(|a| a.end - a.start < opts.min_arc) {
        return Err(Error::NotAnExtremal(format!("type {kind}: degenerate arc [{}, {}]", a.start, a.end)));
    }
    check_sign_pattern(kind, &ev.traj, &ev.law, ev.alpha, opts)?;
    Ok(Extremal { kind, alpha: ev.alpha, switch_times, law: ev.law, traj: ev.traj, residual_norm })
}

/// Newton on the coarse grid, then a polishing Newton at full density.
fn shoot(
    kind: ExtremalType,
    params: &ProblemParams,
    model: &FrictionModel,
    seed: &[f64],
    opts: &ShootingOptions,
) -> Result<Extremal> {
    let scale: Vec<f64> =
        seed.iter().enumerate().map(|(i, _)| if i < free_time_count(kind) { params.horizon } else { 1.0 }).collect();
    let coarse_opts = NewtonOptions { tol: 1e-9, accept: 1e-5, ..opts.newton };
    let coarse = damped_newton(
        |u| evaluate(kind, params, model, u, opts.search_steps_per_unit).ok().map(|e| e.residuals),
        seed,
        &scale,
        &coarse_opts,
    );
    if !coarse.converged {
        return Err(Error::NotAnExtremal(format!(
            "type {kind}: Newton stagnated at residual {:.3e} after {} iterations",
            coarse.residual, coarse.iterations
        )));
    }
    // cheap rejection before paying for the fine grid
    let ev = evaluate(kind, params, model, &coarse.x, opts.search_steps_per_unit)?;
    if let Some(a) = ev.law.arcs().iter().find(|a| a.end - a.start < opts.min_arc) {
        return Err(Error::NotAnExtremal(format!("type {kind}: degenerate arc [{}, {}]", a.start, a.end)));
    }
    let loose = ShootingOptions { sign_band: 1e-5, singular_band: 1e-5, ..*opts };
    check_sign_pattern(kind, &ev.traj, &ev.law, ev.alpha, &loose)?;
    let fine = damped_newton(
        |u| evaluate(kind, params, model, u, opts.steps_per_unit).ok().map(|e| e.residuals),
        &coarse.x,
        &scale,
        &opts.newton,
    );
    if !fine.converged {
        return Err(Error::NotAnExtremal(format!(
            "type {kind}: polishing Newton stagnated at residual {:.3e}",
            fine.residual
        )));
    }
    finalize(kind, params, model, &fine.x, opts)
}

fn require_budget(params: &ProblemParams) -> Result<()> {
    if params.full_thrust_shortcut() {
        Err(Error::InfeasibleSchedule("fuel budget covers the whole horizon".into()))
    } else {
        Ok(())
    }
}

/// Bang-bang `u = (1, 0)` with the switch pinned at `t₁ = Δm`.
pub fn build_type_ia(params: &ProblemParams, model: &FrictionModel, opts: &ShootingOptions) -> Result<Extremal> {
    require_budget(params)?;
    finalize(ExtremalType::Ia, params, model, &[], opts)
}

fn ib_residual(params: &ProblemParams, model: &FrictionModel, t1: f64, density: f64) -> Result<f64> {
    Ok(evaluate(ExtremalType::Ib, params, model, &[t1], density)?.residuals[0])
}

/// Sign-changing brackets of the type-Ib residual over `t₁ ∈ (0, Δm)`.
pub(crate) fn ib_brackets(
    params: &ProblemParams,
    model: &FrictionModel,
    opts: &ShootingOptions,
) -> Vec<(f64, f64, f64, f64)> {
    let dm = params.fuel_budget();
    let n = 4 * opts.seeds_per_dim;
    let samples: Vec<(f64, Option<f64>)> = (0..n)
        .map(|i| {
            let t = dm * (i as f64 + 0.5) / n as f64;
            (t, ib_residual(params, model, t, opts.steps_per_unit).ok())
        })
        .collect();
    samples
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            ((a, Some(fa)), (b, Some(fb))) if fa.signum() != fb.signum() || fa == 0.0 => Some((a, fa, b, fb)),
            _ => None,
        })
        .collect()
}

pub(crate) fn finalize_ib_bracket(
    params: &ProblemParams,
    model: &FrictionModel,
    bracket: (f64, f64, f64, f64),
    opts: &ShootingOptions,
) -> Result<Extremal> {
    let (a, fa, b, fb) = bracket;
    let t1 = refine_bracket(|t| ib_residual(params, model, t, opts.steps_per_unit).ok(), a, fa, b, fb, 1e-13)
        .ok_or_else(|| Error::NotAnExtremal("type Ib: bracket refinement failed".into()))?;
    finalize(ExtremalType::Ib, params, model, &[t1], opts)
}

/// Bang-singular-bang: shoot on `t₁`, with α fixed by the singular junction.
pub fn build_type_ib(
    params: &ProblemParams,
    model: &FrictionModel,
    t1_seed: f64,
    opts: &ShootingOptions,
) -> Result<Extremal> {
    require_budget(params)?;
    ib_residual(params, model, t1_seed, opts.steps_per_unit)?;
    let brackets = ib_brackets(params, model, opts);
    let nearest = brackets
        .into_iter()
        .min_by(|p, q| {
            let dp = (0.5 * (p.0 + p.2) - t1_seed).abs();
            let dq = (0.5 * (q.0 + q.2) - t1_seed).abs();
            dp.total_cmp(&dq)
        })
        .ok_or_else(|| Error::NotAnExtremal("type Ib: residual never changes sign".into()))?;
    finalize_ib_bracket(params, model, nearest, opts)
}

/// Every type-Ib extremal found by scanning `t₁`.
pub fn build_type_ib_all(
    params: &ProblemParams,
    model: &FrictionModel,
    opts: &ShootingOptions,
) -> Vec<Result<Extremal>> {
    if let Err(e) = require_budget(params) {
        return vec![Err(e)];
    }
    ib_brackets(params, model, opts).into_iter().map(|b| finalize_ib_bracket(params, model, b, opts)).collect()
}

/// Coast-burn-coast; unknowns `(t₁, α)`.
pub fn build_type_iia(
    params: &ProblemParams,
    model: &FrictionModel,
    seed: (f64, f64),
    opts: &ShootingOptions,
) -> Result<Extremal> {
    require_budget(params)?;
    shoot(ExtremalType::IIa, params, model, &[seed.0, seed.1], opts)
}

/// Coast-burn-singular-coast; unknowns `(t₁, t₂)`.
pub fn build_type_iib(
    params: &ProblemParams,
    model: &FrictionModel,
    seed: (f64, f64),
    opts: &ShootingOptions,
) -> Result<Extremal> {
    require_budget(params)?;
    shoot(ExtremalType::IIb, params, model, &[seed.0, seed.1], opts)
}

/// Burn-coast-burn-coast; unknowns `(t₁, t₂, α)`.
pub fn build_type_iii(
    params: &ProblemParams,
    model: &FrictionModel,
    seed: (f64, f64, f64),
    opts: &ShootingOptions,
) -> Result<Extremal> {
    require_budget(params)?;
    run_seed(ExtremalType::III, params, model, &[seed.0, seed.1, seed.2], opts)
}

/// Newton-based builder from one seed.
pub(crate) fn run_seed(
    kind: ExtremalType,
    params: &ProblemParams,
    model: &FrictionModel,
    seed: &[f64],
    opts: &ShootingOptions,
) -> Result<Extremal> {
    let out = shoot(kind, params, model, seed, opts)?;
    if kind != ExtremalType::III {
        return Ok(out);
    }
    // positive levels pair up as x(t₃) < x(t₁)
    let (x1, x3) = (out.traj.x_at_switch(0), out.traj.x_at_switch(2));
    if !(x1 > 0.0 && x3 > 0.0 && x3 < x1) {
        return Err(Error::NotAnExtremal(format!(
            "type III: switch velocities x(t1) = {x1}, x(t3) = {x3} do not pair"
        )));
    }
    Ok(out)
}

fn midpoints(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
}

/// Multistart seeds for the Newton-based structures.
///
/// For structures with α as an unknown, the α seed is `alpha_hint` when given,
/// otherwise the costate at the first switch of the seed schedule.
pub fn multistart_seeds(
    kind: ExtremalType,
    params: &ProblemParams,
    model: &FrictionModel,
    alpha_hint: Option<f64>,
    opts: &ShootingOptions,
) -> Vec<Vec<f64>> {
    let (dm, horizon, n) = (params.fuel_budget(), params.horizon, opts.seeds_per_dim);
    let times: Vec<Vec<f64>> = match kind {
        ExtremalType::Ia => vec![vec![]],
        ExtremalType::Ib => midpoints(0.0, dm, n).map(|t| vec![t]).collect(),
        ExtremalType::IIa => midpoints(0.0, horizon - dm, n).map(|t| vec![t]).collect(),
        ExtremalType::IIb => {
            midpoints(0.0, horizon, n).flat_map(|t1| midpoints(0.0, dm, n).map(move |d| vec![t1, t1 + d])).collect()
        }
        ExtremalType::III => midpoints(0.0, dm, n)
            .flat_map(|t1| midpoints(0.0, horizon - dm, n).map(move |gap| vec![t1, t1 + gap]))
            .collect(),
    };
    if !alpha_is_unknown(kind) {
        return times;
    }
    times
        .into_iter()
        .map(|mut ts| {
            let a = alpha_hint.unwrap_or_else(|| {
                schedule(kind, params, model, &ts, opts.search_steps_per_unit)
                    .and_then(|(law, _)| simulate(params, model, &law, opts.search_steps_per_unit))
                    .ok()
                    .and_then(|tr| tr.psi_at_switch(0))
                    .unwrap_or(0.5)
            });
            ts.push(a);
            ts
        })
        .collect()
}

/// Runs the builder of `kind` from every multistart seed, one result per seed.
pub fn multistart(
    kind: ExtremalType,
    params: &ProblemParams,
    model: &FrictionModel,
    alpha_hint: Option<f64>,
    opts: &ShootingOptions,
) -> Vec<Result<Extremal>> {
    if let Err(e) = require_budget(params) {
        return vec![Err(e)];
    }
    match kind {
        ExtremalType::Ia => vec![build_type_ia(params, model, opts)],
        ExtremalType::Ib => build_type_ib_all(params, model, opts),
        _ => multistart_seeds(kind, params, model, alpha_hint, opts)
            .iter()
            .map(|seed| run_seed(kind, params, model, seed, opts))
            .collect(),
    }
}

/// Drops extremals whose switch times lie within `radius` of an earlier one of the same type.
pub fn dedup(extremals: Vec<Extremal>, radius: f64) -> Vec<Extremal> {
    let mut out: Vec<Extremal> = Vec::new();
    for e in extremals {
        let dup = out.iter().any(|o| {
            o.kind == e.kind && o.switch_times.iter().zip(&e.switch_times).all(|(a, b)| (a - b).abs() < radius)
        });
        if !dup {
            out.push(e);
        }
    }
    out
}
