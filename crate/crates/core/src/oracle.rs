//! Direct-method reference optimisers that do not use the maximum principle:
//! brute-force search over switching structures and projected gradient
//! ascent on piecewise-constant controls.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::ExtremalType;
use crate::dynamics::{
    integrate_costate_backward, integrate_forward, ControlLaw, ProblemParams, Trajectory, DEFAULT_STEPS_PER_UNIT,
};
use crate::error::{Error, Result};
use crate::extremal::schedule;
use crate::friction::FrictionModel;
use crate::parallel::par_map;

pub const DEFAULT_GRID_N: usize = 200;
const SEARCH_STEPS_PER_UNIT: f64 = 150.0;

#[derive(Debug, Clone, Serialize)]
pub struct StructuredBest {
    pub structure: ExtremalType,
    pub switch_times: Vec<f64>,
    /// Re-evaluated on the fine grid.
    pub s_t: f64,
    pub feasible_points: usize,
    #[serde(skip)]
    pub law: ControlLaw,
}

fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

/// Exhaustive search over the free switch times of one structure.
///
/// The fuel budget pins the remaining switch exactly as in the shooting
/// builders, so every evaluated schedule spends exactly `Δm`.
pub fn structured_search(
    params: &ProblemParams,
    model: &FrictionModel,
    structure: ExtremalType,
    grid_n: usize,
) -> Result<StructuredBest> {
    let (dm, horizon) = (params.fuel_budget(), params.horizon);
    let points: Vec<Vec<f64>> = match structure {
        ExtremalType::Ia => vec![vec![]],
        ExtremalType::Ib => midpoints(0.0, dm, grid_n).into_iter().map(|t| vec![t]).collect(),
        ExtremalType::IIa => midpoints(0.0, horizon - dm, grid_n).into_iter().map(|t| vec![t]).collect(),
        ExtremalType::IIb => {
            let burns = midpoints(0.0, dm, grid_n);
            midpoints(0.0, horizon, grid_n)
                .into_iter()
                .flat_map(|t1| burns.iter().map(move |d| vec![t1, t1 + d]))
                .collect()
        }
        ExtremalType::III => {
            let gaps = midpoints(0.0, horizon - dm, grid_n);
            midpoints(0.0, dm, grid_n)
                .into_iter()
                .flat_map(|t1| gaps.iter().map(move |gap| vec![t1, t1 + gap]))
                .collect()
        }
    };
    let mut best: Option<(f64, &Vec<f64>)> = None;
    let mut feasible = 0;
    for free in &points {
        let Ok((law, _)) = schedule(structure, params, model, free, SEARCH_STEPS_PER_UNIT) else {
            continue;
        };
        let Ok(traj) = integrate_forward(params, model, &law, SEARCH_STEPS_PER_UNIT) else {
            continue;
        };
        feasible += 1;
        let s = traj.final_position();
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, free));
        }
    }
    let (_, free) = best.ok_or_else(|| Error::NoFeasibleSchedule(structure.to_string()))?;
    let (law, _) = schedule(structure, params, model, free, DEFAULT_STEPS_PER_UNIT)?;
    let traj = integrate_forward(params, model, &law, DEFAULT_STEPS_PER_UNIT)?;
    Ok(StructuredBest {
        structure,
        switch_times: law.switch_times(),
        s_t: traj.final_position(),
        feasible_points: feasible,
        law,
    })
}

/// Best structured schedule over all five structures; `None` when none is feasible.
pub fn structured_search_all(
    params: &ProblemParams,
    model: &FrictionModel,
    grid_n: usize,
    jobs: usize,
) -> Vec<Result<StructuredBest>> {
    par_map(&ExtremalType::ALL, jobs, |&s| structured_search(params, model, s, grid_n))
}

#[derive(Debug, Clone, Copy)]
pub struct DirectOptions {
    pub cells: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub armijo_sigma: f64,
    /// Stop when the projected step moves the control by less than this (max-norm).
    pub step_tol: f64,
    pub grid_n: usize,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions {
            cells: 2000,
            restarts: 4,
            seed: 42,
            max_iter: 5000,
            armijo_sigma: 1e-4,
            step_tol: 1e-9,
            grid_n: DEFAULT_GRID_N,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectSolution {
    pub cells: usize,
    /// Control value on each cell `[ih, (i+1)h]`.
    pub control: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the winning start; the last start is the structured warm start.
    pub start: usize,
    pub trajectory: Trajectory,
}

/// Piecewise-constant control on a uniform mesh with one RK4 step per cell.
struct Mesh<'a> {
    params: &'a ProblemParams,
    model: &'a FrictionModel,
    h: f64,
    n: usize,
}

impl Mesh<'_> {
    fn forward(&self, u: &[f64]) -> Trajectory {
        let (g, h, model) = (self.params.g, self.h, self.model);
        let n = self.n;
        let mut traj = Trajectory {
            grid: Vec::with_capacity(n + 1),
            s: Vec::with_capacity(n + 1),
            x: Vec::with_capacity(n + 1),
            m: Vec::with_capacity(n + 1),
            u: Vec::with_capacity(n + 1),
            psi: None,
            arc_starts: vec![0],
        };
        let (mut s, mut x, mut m) = (0.0, 0.0, self.params.m0);
        for i in 0..=n {
            traj.grid.push(i as f64 * h);
            traj.s.push(s);
            traj.x.push(x);
            traj.m.push(m);
            traj.u.push(u[i.min(n - 1)]);
            if i == n {
                break;
            }
            let ui = u[i];
            let acc = |x: f64| ui - model.phi(x) - g;
            let k1 = acc(x);
            let k2 = acc(x + 0.5 * h * k1);
            let k3 = acc(x + 0.5 * h * k2);
            let k4 = acc(x + h * k3);
            s += h * (x + h / 6.0 * (k1 + k2 + k3));
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            m -= h * ui;
        }
        traj
    }

    fn objective(&self, u: &[f64]) -> f64 {
        self.forward(u).final_position()
    }

    /// Objective and its L² gradient `(1/h)∫_cell ψ dt`.
    fn gradient(&self, u: &[f64]) -> (f64, Vec<f64>, Trajectory) {
        let mut traj = self.forward(u);
        let psi = integrate_costate_backward(self.model, self.params.g, &traj).expect("costate stays positive");
        let grad = psi.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        traj.psi = Some(psi);
        (traj.final_position(), grad, traj)
    }

    /// Euclidean projection onto `{0 ≤ u ≤ 1, hΣu = Δm}` by bisection on the shift.
    fn project(&self, v: &[f64]) -> Vec<f64> {
        let target = self.params.fuel_budget() / self.h;
        let mass = |lam: f64| v.iter().map(|x| (x - lam).clamp(0.0, 1.0)).sum::<f64>();
        let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
        let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mass(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        let mut u: Vec<f64> = v.iter().map(|x| (x - lam).clamp(0.0, 1.0)).collect();
        // spread the last rounding error over the free cells
        let gap = target - u.iter().sum::<f64>();
        let free: Vec<usize> = (0..u.len()).filter(|&i| u[i] > 0.0 && u[i] < 1.0).collect();
        if !free.is_empty() {
            let d = gap / free.len() as f64;
            for i in free {
                u[i] = (u[i] + d).clamp(0.0, 1.0);
            }
        }
        u
    }

    /// Projected gradient ascent with Armijo backtracking from a unit step.
    fn ascend(&self, start: Vec<f64>, opts: &DirectOptions) -> (Vec<f64>, f64, usize, bool) {
        let mut u = self.project(&start);
        let (mut f, mut grad, _) = self.gradient(&u);
        for it in 0..opts.max_iter {
            let mut tau = 1.0;
            let mut moved = None;
            for _ in 0..40 {
                let trial: Vec<f64> = u.iter().zip(&grad).map(|(a, g)| a + tau * g).collect();
                let cand = self.project(&trial);
                let step = cand.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if step < opts.step_tol {
                    return (u, f, it, true);
                }
                let decrease: f64 = cand.iter().zip(&u).zip(&grad).map(|((c, a), g)| g * (c - a)).sum::<f64>() * self.h;
                let fc = self.objective(&cand);
                if fc >= f + opts.armijo_sigma * decrease {
                    moved = Some(cand);
                    break;
                }
                tau *= 0.5;
            }
            let Some(cand) = moved else {
                return (u, f, it, true);
            };
            u = cand;
            let (fn_, gn, _) = self.gradient(&u);
            let gain = fn_ - f;
            f = fn_;
            grad = gn;
            if gain.abs() <= 1e-15 * (1.0 + f.abs()) {
                return (u, f, it + 1, true);
            }
        }
        (u, f, opts.max_iter, false)
    }
}

/// Cell averages of a switching law.
fn discretise(law: &ControlLaw, n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            law.arcs().iter().map(|arc| (arc.end.min(b) - arc.start.max(a)).max(0.0) * arc.mode.thrust()).sum::<f64>()
                / h
        })
        .collect()
}

/// Maximises `s(T)` over piecewise-constant controls on `cells` cells.
///
/// Starts: `restarts` seeded random controls plus the best structured schedule.
pub fn direct_solve(
    params: &ProblemParams,
    model: &FrictionModel,
    opts: &DirectOptions,
    jobs: usize,
) -> Result<DirectSolution> {
    if opts.cells < 100 {
        return Err(Error::Param(format!("direct solver needs at least 100 cells, got {}", opts.cells)));
    }
    let n = opts.cells;
    let mesh = Mesh { params, model, h: params.horizon / n as f64, n };
    if params.full_thrust_shortcut() {
        let u = vec![1.0; n];
        let (objective, _, trajectory) = mesh.gradient(&u);
        return Ok(DirectSolution {
            cells: n,
            control: u,
            objective,
            iterations: 0,
            converged: true,
            start: 0,
            trajectory,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<f64>> = (0..opts.restarts).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
    let best_structured = structured_search_all(params, model, opts.grid_n, jobs)
        .into_iter()
        .flatten()
        .max_by(|a, b| a.s_t.total_cmp(&b.s_t));
    if let Some(b) = best_structured {
        starts.push(discretise(&b.law, n, mesh.h));
    }
    let runs = par_map(&starts, jobs, |s| mesh.ascend(s.clone(), opts));
    let (start, (u, _, iterations, converged)) =
        runs.into_iter().enumerate().max_by(|(_, a), (_, b)| a.1.total_cmp(&b.1)).expect("at least one start");
    let (objective, _, trajectory) = mesh.gradient(&u);
    Ok(DirectSolution { cells: n, control: u, objective, iterations, converged, start, trajectory })
}
