use serde::Serialize;

use super::{
    build_type_ia, dedup, finalize_ib_bracket, ib_brackets, multistart_seeds, run_seed, verify_mp, Extremal, MpReport,
    MpTolerances, ShootingOptions,
};
use crate::classify::{classify, CandidateSet, ExtremalType, RegimeLabel};
use crate::dynamics::{simulate, ArcMode, ControlLaw, ProblemParams, Trajectory};
use crate::error::{Error, Result};
use crate::friction::FrictionModel;
use crate::parallel::par_map;

#[derive(Debug, Clone, Serialize)]
pub struct VerifiedExtremal {
    #[serde(flatten)]
    pub extremal: Extremal,
    pub s_t: f64,
    pub mp_report: MpReport,
    pub regime: Option<RegimeLabel>,
    pub candidates: Option<String>,
    /// The regime computed from this extremal's α lists its type.
    pub admitted: bool,
    #[serde(skip)]
    pub candidate_set: Option<CandidateSet>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TypeAttempt {
    #[serde(rename = "type")]
    pub kind: ExtremalType,
    pub starts: usize,
    pub converged: usize,
    pub verified: usize,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    /// Present when the budget covers the horizon and `u ≡ 1` is optimal.
    pub full_thrust: Option<Trajectory>,
    /// Sorted by `s(T)`, best first.
    pub extremals: Vec<VerifiedExtremal>,
    pub attempts: Vec<TypeAttempt>,
}

impl ScanOutcome {
    pub fn best(&self) -> Option<&VerifiedExtremal> {
        self.extremals.first()
    }
}

enum Task {
    Ia,
    IbBracket((f64, f64, f64, f64)),
    Shoot(ExtremalType, Vec<f64>),
}

impl Task {
    fn kind(&self) -> ExtremalType {
        match self {
            Task::Ia => ExtremalType::Ia,
            Task::IbBracket(_) => ExtremalType::Ib,
            Task::Shoot(k, _) => *k,
        }
    }
}

pub fn full_thrust_trajectory(params: &ProblemParams, model: &FrictionModel, density: f64) -> Result<Trajectory> {
    let law = ControlLaw::from_switches(&[ArcMode::Bang1], &[], params.horizon)?;
    simulate(params, model, &law, density)
}

/// Tries every structure from every multistart seed and keeps the extremals
/// that pass the maximum-principle verifier.
pub fn scan_all(
    params: &ProblemParams,
    model: &FrictionModel,
    opts: &ShootingOptions,
    tol: &MpTolerances,
    jobs: usize,
) -> Result<ScanOutcome> {
    if params.full_thrust_shortcut() {
        return Ok(ScanOutcome {
            full_thrust: Some(full_thrust_trajectory(params, model, opts.steps_per_unit)?),
            extremals: Vec::new(),
            attempts: Vec::new(),
        });
    }
    let mut tasks = vec![Task::Ia];
    tasks.extend(ib_brackets(params, model, opts).into_iter().map(Task::IbBracket));
    for kind in [ExtremalType::IIa, ExtremalType::IIb, ExtremalType::III] {
        tasks.extend(multistart_seeds(kind, params, model, None, opts).into_iter().map(|s| Task::Shoot(kind, s)));
    }

    let results = par_map(&tasks, jobs, |task| match task {
        Task::Ia => build_type_ia(params, model, opts),
        Task::IbBracket(b) => finalize_ib_bracket(params, model, *b, opts),
        Task::Shoot(kind, seed) => run_seed(*kind, params, model, seed, opts),
    });

    let mut attempts: Vec<TypeAttempt> =
        ExtremalType::ALL.iter().map(|&kind| TypeAttempt { kind, starts: 0, converged: 0, verified: 0 }).collect();
    let slot = |kind: ExtremalType| ExtremalType::ALL.iter().position(|k| *k == kind).unwrap();
    let mut found = Vec::new();
    for (task, res) in tasks.iter().zip(results) {
        let a = &mut attempts[slot(task.kind())];
        a.starts += 1;
        if let Ok(e) = res {
            a.converged += 1;
            found.push(e);
        }
    }
    let unique = dedup(found, 1e-6);

    let mut extremals: Vec<VerifiedExtremal> = unique
        .into_iter()
        .filter_map(|e| {
            let mp_report = verify_mp(&e, params, model, tol);
            if !mp_report.pass {
                return None;
            }
            let classified = classify(model, params.g, e.alpha).ok();
            let admitted = classified.as_ref().is_some_and(|(_, c)| c.contains(e.kind));
            Some(VerifiedExtremal {
                s_t: e.final_position(),
                regime: classified.as_ref().map(|(r, _)| *r),
                candidates: classified.as_ref().map(|(_, c)| c.display_types()),
                candidate_set: classified.map(|(_, c)| c),
                admitted,
                mp_report,
                extremal: e,
            })
        })
        .collect();
    extremals.sort_by(|p, q| {
        q.s_t
            .total_cmp(&p.s_t)
            .then(p.extremal.kind.cmp(&q.extremal.kind))
            .then_with(|| p.extremal.switch_times.partial_cmp(&q.extremal.switch_times).unwrap())
    });
    for v in &extremals {
        attempts[slot(v.extremal.kind)].verified += 1;
    }
    if extremals.is_empty() {
        return Err(Error::NoExtremalFound);
    }
    Ok(ScanOutcome { full_thrust: None, extremals, attempts })
}
