//! State propagation under piecewise control laws and the backward costate pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::friction::{check_gravity, FrictionModel};

/// Default integration density (RK4 steps per unit time).
pub const DEFAULT_STEPS_PER_UNIT: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub g: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub m0: f64,
    #[serde(rename = "mT")]
    pub m_t: f64,
}

impl ProblemParams {
    pub fn new(g: f64, horizon: f64, m0: f64, m_t: f64) -> Result<Self> {
        check_gravity(g)?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Param(format!("horizon must be positive, got {horizon}")));
        }
        if !(m0.is_finite() && m0 > 0.0) {
            return Err(Error::Param(format!("initial mass must be positive, got {m0}")));
        }
        if !(m_t > 0.0 && m_t < m0) {
            return Err(Error::Param(format!("dry mass must lie in (0, m0), got {m_t}")));
        }
        Ok(ProblemParams { g, horizon, m0, m_t })
    }

    /// Fuel budget `Δm = m0 − mT`.
    pub fn fuel_budget(&self) -> f64 {
        self.m0 - self.m_t
    }

    /// With `Δm ≥ T` the budget never binds and full thrust is optimal.
    pub fn full_thrust_shortcut(&self) -> bool {
        self.fuel_budget() >= self.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ArcMode {
    Bang0,
    Bang1,
    /// Velocity held at `level` by the thrust `φ(level) + g`.
    Singular {
        level: f64,
        thrust: f64,
    },
}

impl ArcMode {
    pub fn singular(model: &FrictionModel, g: f64, level: f64) -> Result<Self> {
        let thrust = model.phi(level) + g;
        if !(0.0..=1.0).contains(&thrust) {
            return Err(Error::InfeasibleSingular { thrust });
        }
        Ok(ArcMode::Singular { level, thrust })
    }

    pub fn thrust(&self) -> f64 {
        match *self {
            ArcMode::Bang0 => 0.0,
            ArcMode::Bang1 => 1.0,
            ArcMode::Singular { thrust, .. } => thrust,
        }
    }

    fn same_kind(&self, other: &ArcMode) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
    pub mode: ArcMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLaw {
    arcs: Vec<Arc>,
}

impl ControlLaw {
    pub fn new(arcs: Vec<Arc>, horizon: f64) -> Result<Self> {
        let first = arcs.first().ok_or_else(|| Error::InfeasibleSchedule("empty control law".into()))?;
        if first.start != 0.0 {
            return Err(Error::InfeasibleSchedule("first arc must start at 0".into()));
        }
        if arcs.last().map(|a| a.end) != Some(horizon) {
            return Err(Error::InfeasibleSchedule("last arc must end at the horizon".into()));
        }
        for a in &arcs {
            if !(a.start < a.end) {
                return Err(Error::InfeasibleSchedule(format!("arc [{}, {}] is empty or reversed", a.start, a.end)));
            }
        }
        for w in arcs.windows(2) {
            if w[0].end != w[1].start {
                return Err(Error::InfeasibleSchedule("arcs are not contiguous".into()));
            }
            if w[0].mode.same_kind(&w[1].mode) {
                return Err(Error::InfeasibleSchedule("adjacent arcs share a mode".into()));
            }
        }
        Ok(ControlLaw { arcs })
    }

    /// Builds arcs from consecutive modes separated by `switch_times`.
    pub fn from_switches(modes: &[ArcMode], switch_times: &[f64], horizon: f64) -> Result<Self> {
        if modes.len() != switch_times.len() + 1 {
            return Err(Error::InfeasibleSchedule(format!(
                "{} modes need {} switch times, got {}",
                modes.len(),
                modes.len() - 1,
                switch_times.len()
            )));
        }
        let mut bounds = Vec::with_capacity(modes.len() + 1);
        bounds.push(0.0);
        bounds.extend_from_slice(switch_times);
        bounds.push(horizon);
        let arcs = modes.iter().zip(bounds.windows(2)).map(|(&mode, w)| Arc { start: w[0], end: w[1], mode }).collect();
        ControlLaw::new(arcs, horizon)
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn horizon(&self) -> f64 {
        self.arcs.last().map(|a| a.end).unwrap_or(0.0)
    }

    pub fn switch_times(&self) -> Vec<f64> {
        self.arcs.iter().skip(1).map(|a| a.start).collect()
    }
}

/// Total thrust integral of a law, summed in closed form over arcs.
pub fn fuel_used(law: &ControlLaw) -> f64 {
    law.arcs().iter().map(|a| a.mode.thrust() * (a.end - a.start)).sum()
}

/// Sampled trajectory. Arc boundaries appear twice in `grid`, once with the
/// control of the arc ending there and once with the control of the arc
/// starting there, so every cell carries a single constant control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub u: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub psi: Option<Vec<f64>>,
    #[serde(skip)]
    pub arc_starts: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn final_position(&self) -> f64 {
        *self.s.last().unwrap_or(&0.0)
    }

    pub fn final_mass(&self) -> f64 {
        *self.m.last().unwrap_or(&0.0)
    }

    /// Node index where arc `k` begins.
    pub fn arc_start(&self, k: usize) -> usize {
        self.arc_starts[k]
    }

    /// Velocity at the start of arc `k` (i.e. at switch time `k − 1`).
    pub fn x_at_switch(&self, switch: usize) -> f64 {
        self.x[self.arc_starts[switch + 1]]
    }

    pub fn psi_at_switch(&self, switch: usize) -> Option<f64> {
        self.psi.as_ref().map(|p| p[self.arc_starts[switch + 1]])
    }

    /// Trapezoid integral of the stored control.
    pub fn thrust_integral(&self) -> f64 {
        self.grid.windows(2).zip(self.u.windows(2)).map(|(t, u)| 0.5 * (t[1] - t[0]) * (u[0] + u[1])).sum()
    }
}

/// Forward RK4 propagation of `(s, x, m)` from rest at `s = x = 0`.
pub fn integrate_forward(
    params: &ProblemParams,
    model: &FrictionModel,
    law: &ControlLaw,
    steps_per_unit: f64,
) -> Result<Trajectory> {
    let g = params.g;
    let cap = law.arcs().iter().map(|a| steps_for(a.end - a.start, steps_per_unit) + 1).sum::<usize>();
    let mut traj = Trajectory {
        grid: Vec::with_capacity(cap),
        s: Vec::with_capacity(cap),
        x: Vec::with_capacity(cap),
        m: Vec::with_capacity(cap),
        u: Vec::with_capacity(cap),
        psi: None,
        arc_starts: Vec::with_capacity(law.arcs().len()),
    };
    let (mut s, mut x, mut m) = (0.0, 0.0, params.m0);
    for arc in law.arcs() {
        let u = arc.mode.thrust();
        traj.arc_starts.push(traj.grid.len());
        push_node(&mut traj, arc.start, s, x, m, u);
        let n = steps_for(arc.end - arc.start, steps_per_unit);
        let h = (arc.end - arc.start) / n as f64;
        match arc.mode {
            ArcMode::Singular { level, .. } => {
                if (x - level).abs() > 1e-6 * (1.0 + level.abs()) {
                    return Err(Error::InfeasibleSchedule(format!(
                        "singular arc entered at velocity {x}, expected {level}"
                    )));
                }
                let (s0, m0) = (s, m);
                x = level;
                for i in 1..=n {
                    let tau = if i == n { arc.end - arc.start } else { i as f64 * h };
                    s = s0 + level * tau;
                    m = m0 - u * tau;
                    push_node(&mut traj, arc.start + tau, s, x, m, u);
                }
            }
            _ => {
                let m0 = m;
                let accel = |x: f64| u - model.phi(x) - g;
                for i in 1..=n {
                    let k1x = accel(x);
                    let k1s = x;
                    let k2x = accel(x + 0.5 * h * k1x);
                    let k2s = x + 0.5 * h * k1x;
                    let k3x = accel(x + 0.5 * h * k2x);
                    let k3s = x + 0.5 * h * k2x;
                    let k4x = accel(x + h * k3x);
                    let k4s = x + h * k3x;
                    s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
                    x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
                    let tau = if i == n { arc.end - arc.start } else { i as f64 * h };
                    m = m0 - u * tau;
                    push_node(&mut traj, arc.start + tau, s, x, m, u);
                }
            }
        }
    }
    Ok(traj)
}

fn steps_for(len: f64, steps_per_unit: f64) -> usize {
    // rounding noise in arc lengths must not add a step
    ((len * steps_per_unit - 1e-6).ceil() as usize).max(1)
}

fn push_node(traj: &mut Trajectory, t: f64, s: f64, x: f64, m: f64, u: f64) {
    traj.grid.push(t);
    traj.s.push(s);
    traj.x.push(x);
    traj.m.push(m);
    traj.u.push(u);
}

/// Backward RK4 for `ψ̇ = −1 + ψ φ'(x)` from `ψ(T) = 0` on the trajectory grid.
///
/// Midpoint velocities come from cubic Hermite interpolation using the state
/// derivative of each cell, which keeps the scheme fourth order.
pub fn integrate_costate_backward(model: &FrictionModel, g: f64, traj: &Trajectory) -> Result<Vec<f64>> {
    let n = traj.len();
    let mut psi = vec![0.0; n];
    let rhs = |x: f64, p: f64| -1.0 + p * model.dphi(x);
    for i in (0..n.saturating_sub(1)).rev() {
        let h = traj.grid[i + 1] - traj.grid[i];
        if h == 0.0 {
            psi[i] = psi[i + 1];
            continue;
        }
        let u = traj.u[i];
        let (x0, x1) = (traj.x[i], traj.x[i + 1]);
        let v0 = u - model.phi(x0) - g;
        let v1 = u - model.phi(x1) - g;
        let xm = 0.5 * (x0 + x1) + h / 8.0 * (v0 - v1);
        let p = psi[i + 1];
        let k1 = rhs(x1, p);
        let k2 = rhs(xm, p - 0.5 * h * k1);
        let k3 = rhs(xm, p - 0.5 * h * k2);
        let k4 = rhs(x0, p - h * k3);
        psi[i] = p - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let horizon = *traj.grid.last().unwrap_or(&0.0);
    if let Some(i) = (0..n).find(|&i| traj.grid[i] < horizon && psi[i] <= 0.0) {
        return Err(Error::VerifierFlag(format!(
            "costate nonpositive ({}) at t = {} before the horizon",
            psi[i], traj.grid[i]
        )));
    }
    Ok(psi)
}

/// Forward pass followed by the costate pass; the returned trajectory has `psi` set.
pub fn simulate(
    params: &ProblemParams,
    model: &FrictionModel,
    law: &ControlLaw,
    steps_per_unit: f64,
) -> Result<Trajectory> {
    let mut traj = integrate_forward(params, model, law, steps_per_unit)?;
    traj.psi = Some(integrate_costate_backward(model, params.g, &traj)?);
    Ok(traj)
}

/// Pontryagin function with `ψ_s = 1` and `ψ_m = α`.
pub fn hamiltonian(model: &FrictionModel, g: f64, x: f64, psi: f64, alpha: f64, u: f64) -> f64 {
    x + psi * (u - model.phi(x) - g) - alpha * u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bang_law(t1: f64, horizon: f64) -> ControlLaw {
        ControlLaw::from_switches(&[ArcMode::Bang1, ArcMode::Bang0], &[t1], horizon).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(0.3, 3.0, 2.0, 1.0).is_ok());
        assert!(ProblemParams::new(0.3, 3.0, 2.0, 2.0).is_err());
        assert!(ProblemParams::new(1.2, 3.0, 2.0, 1.0).is_err());
        assert!(ProblemParams::new(0.3, 1.0, 2.0, 0.5).unwrap().full_thrust_shortcut());
    }

    #[test]
    fn law_validation() {
        let bad = ControlLaw::from_switches(&[ArcMode::Bang1, ArcMode::Bang1], &[0.5], 1.0);
        assert!(bad.is_err());
        let bad = ControlLaw::from_switches(&[ArcMode::Bang1, ArcMode::Bang0], &[1.5], 1.0);
        assert!(bad.is_err());
    }

    #[test]
    fn full_thrust_linear_closed_form() {
        let params = ProblemParams::new(0.5, 1.0, 2.0, 0.5).unwrap();
        let model = FrictionModel::linear(1.0).unwrap();
        let law = ControlLaw::from_switches(&[ArcMode::Bang1], &[], 1.0).unwrap();
        let traj = integrate_forward(&params, &model, &law, DEFAULT_STEPS_PER_UNIT).unwrap();
        for (t, x) in traj.grid.iter().zip(&traj.x) {
            let exact = 0.5 * (1.0 - (-t).exp());
            assert!((x - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let params = ProblemParams::new(0.3, 2.0, 1.6, 1.0).unwrap();
        let model = FrictionModel::linear(1.0).unwrap();
        let law = bang_law(0.6, 2.0);
        let s = |n: f64| integrate_forward(&params, &model, &law, n).unwrap().final_position();
        let (a, b, c) = (s(5.0), s(10.0), s(20.0));
        let ratio = (a - b) / (b - c);
        assert!((8.0..32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn coast_from_rest_falls_monotonically() {
        let params = ProblemParams::new(0.3, 2.0, 2.0, 1.5).unwrap();
        let model = FrictionModel::quadratic(0.5, 1.0).unwrap();
        let law = ControlLaw::from_switches(&[ArcMode::Bang0], &[], 2.0).unwrap();
        let traj = integrate_forward(&params, &model, &law, 500.0).unwrap();
        let vb = model.velocity_bounds(0.3).unwrap();
        assert!(traj.x.windows(2).all(|w| w[1] < w[0]));
        assert!(traj.x.iter().all(|&x| x > vb.x_min));
    }

    #[test]
    fn singular_arc_is_closed_form() {
        let params = ProblemParams::new(0.3, 3.0, 3.0, 1.5).unwrap();
        let model = FrictionModel::quadratic(0.5, 1.0).unwrap();
        let mode = ArcMode::singular(&model, 0.3, 0.3).unwrap();
        assert!((mode.thrust() - 0.495).abs() < 1e-15);
        let head = bang_law(0.3, 3.0);
        let pre = integrate_forward(&params, &model, &head, 1000.0).unwrap();
        let x1 = pre.x_at_switch(0);
        let mode = ArcMode::singular(&model, 0.3, x1).unwrap();
        let law = ControlLaw::from_switches(&[ArcMode::Bang1, mode, ArcMode::Bang0], &[0.3, 1.5], 3.0).unwrap();
        let traj = integrate_forward(&params, &model, &law, 1000.0).unwrap();
        let (a, b) = (traj.arc_start(1), traj.arc_start(2));
        assert!(traj.x[a..b].iter().all(|&x| x == x1));
        let u = mode.thrust();
        assert!((traj.m[b - 1] - (params.m0 - 0.3 - u * 1.2)).abs() < 1e-12);
    }

    #[test]
    fn linear_costate_closed_form() {
        for &gamma in &[1.0, 2.0] {
            let params = ProblemParams::new(0.5, 1.0, 1.0, 0.6).unwrap();
            let model = FrictionModel::linear(gamma).unwrap();
            let traj = simulate(&params, &model, &bang_law(0.4, 1.0), DEFAULT_STEPS_PER_UNIT).unwrap();
            let psi = traj.psi.as_ref().unwrap();
            for (t, p) in traj.grid.iter().zip(psi) {
                let exact = (1.0 - (gamma * (t - 1.0)).exp()) / gamma;
                assert!((p - exact).abs() < 1e-10);
            }
        }
        // ψ(0) = 1 − e^{−1} for γ = 1, T = 1
        let model = FrictionModel::linear(1.0).unwrap();
        let params = ProblemParams::new(0.5, 1.0, 1.0, 0.6).unwrap();
        let traj = simulate(&params, &model, &bang_law(0.4, 1.0), 2000.0).unwrap();
        assert!((traj.psi.unwrap()[0] - 0.632_120_558_828_557_7).abs() < 1e-10);
    }

    #[test]
    fn costate_terminal_slope() {
        let params = ProblemParams::new(0.3, 3.0, 2.0, 1.0).unwrap();
        let model = FrictionModel::quadratic(0.5, 1.0).unwrap();
        let traj = simulate(&params, &model, &bang_law(1.0, 3.0), 2000.0).unwrap();
        let psi = traj.psi.as_ref().unwrap();
        let n = psi.len();
        assert_eq!(psi[n - 1], 0.0);
        let slope = (psi[n - 1] - psi[n - 2]) / (traj.grid[n - 1] - traj.grid[n - 2]);
        assert!((slope + 1.0).abs() < 1e-3);
    }

    #[test]
    fn hamiltonian_cases() {
        let m = FrictionModel::quadratic(0.5, 1.0).unwrap();
        assert_eq!(hamiltonian(&m, 0.3, 0.0, 0.0, 1.0, 0.0), 0.0);
        let (x, a) = (0.4, 0.8);
        let h0 = hamiltonian(&m, 0.3, x, a, a, 0.0);
        let h1 = hamiltonian(&m, 0.3, x, a, a, 1.0);
        assert!((h0 - h1).abs() < 1e-15);
        assert!((h0 - (x - a * m.phi(x) - a * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn fuel_closed_form() {
        assert_eq!(fuel_used(&bang_law(0.4, 1.0)), 0.4);
        let zero = ControlLaw::from_switches(&[ArcMode::Bang0], &[], 1.0).unwrap();
        assert_eq!(fuel_used(&zero), 0.0);
    }
}
