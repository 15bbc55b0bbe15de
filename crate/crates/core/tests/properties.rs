use goddard_core::classify::{classify, ExtremalType};
use goddard_core::dynamics::{fuel_used, integrate_forward, simulate, ArcMode, ControlLaw, ProblemParams};
use goddard_core::exclusion::{exclude_level, psi_closed_form, QuadraticCase};
use goddard_core::extremal::{scan_all, verify_process, MpTolerances, ShootingOptions};
use goddard_core::friction::FrictionModel;
use goddard_core::oracle::{direct_solve, DirectOptions};
use goddard_core::Error;
use proptest::prelude::*;

fn quad() -> FrictionModel {
    FrictionModel::quadratic(0.5, 1.0).unwrap()
}

fn same_sign(a: f64, b: f64) -> bool {
    (a > 0.0) == (b > 0.0) || a.abs() < 1e-12 || b.abs() < 1e-12
}

fn quad_case() -> impl Strategy<Value = QuadraticCase> {
    (0.2..1.0f64, 0.5..2.0f64, 0.1..0.9f64, 0.02..0.98f64)
        .prop_map(|(k, b, g, f)| QuadraticCase::new(k, b, g, f / k).unwrap())
}

proptest! {
    #[test]
    fn classification_is_a_partition(g in 0.001..0.999f64, alpha in 0.001..6.0f64) {
        let (label, set) = classify(&quad(), g, alpha).unwrap();
        prop_assert!(!set.types.is_empty());
        prop_assert!(set.types.contains(&ExtremalType::Ia));
        prop_assert!(label.alpha_case <= 3);
        prop_assert_eq!(label.alpha_case == 0, set.gates.x_tilde.is_none());
        let mut sorted = set.types.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(sorted, set.types);
    }

    #[test]
    fn candidate_sets_grow_with_alpha(g in 0.01..0.99f64, a in 0.01..1.99f64, b in 0.01..1.99f64) {
        let (lo, hi) = (a.min(b), a.max(b));
        let small = classify(&quad(), g, lo).unwrap().1;
        let large = classify(&quad(), g, hi).unwrap().1;
        prop_assert!(small.types.iter().all(|t| large.contains(*t)), "{:?} ⊄ {:?}", small.types, large.types);
    }

    #[test]
    fn linear_model_collapses(gamma in 0.1..5.0f64, g in 0.01..0.99f64, alpha in 0.01..20.0f64) {
        let m = FrictionModel::linear(gamma).unwrap();
        prop_assert_eq!(classify(&m, g, alpha).unwrap().1.types, vec![ExtremalType::Ia]);
    }

    #[test]
    fn level_roots_share_b_and_c_signs(case in quad_case(), frac in 0.01..0.99f64) {
        let xt = case.x_tilde();
        let level = -frac * 0.5 * case.b * xt * xt;
        let l = exclude_level(&case, level).unwrap();
        prop_assert!(l.x2 < xt && xt < l.x3);
        prop_assert!(same_sign(l.b_z2, l.b_z3), "B: {} vs {}", l.b_z2, l.b_z3);
        prop_assert!(same_sign(l.c_z2, l.c_z3), "C: {} vs {}", l.c_z2, l.c_z3);
        prop_assert!(l.simulation_agrees);
    }

    #[test]
    fn closed_form_solves_costate_ode(case in quad_case(), x0 in 0.05..1.5f64) {
        let (k, h) = (case.k, case.h_signed());
        let z0 = case.z_of(x0);
        let f = |z: f64, p: f64| 2.0 * (1.0 - p * z) / (z * z + h);
        let n = 2000;
        let dz = (k - z0) / n as f64;
        let mut p = case.alpha;
        for i in 0..n {
            let z = z0 + i as f64 * dz;
            let k1 = f(z, p);
            let k2 = f(z + 0.5 * dz, p + 0.5 * dz * k1);
            let k3 = f(z + 0.5 * dz, p + 0.5 * dz * k2);
            let k4 = f(z + dz, p + dz * k3);
            p += dz / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let exact = psi_closed_form(&case, z0, k).unwrap();
        prop_assert!((p - exact).abs() < 1e-8, "{p} vs {exact}");
    }

    #[test]
    fn costate_stays_concave_after_low_crossing(case in quad_case(), x0 in 0.05..1.5f64) {
        // coast arc from (x0, ψ = α) through x = 0 with ψ below k/c² at the crossing
        let model = FrictionModel::quadratic(case.k, case.b).unwrap();
        let x_min = model.velocity_bounds(case.g).unwrap().x_min;
        let rhs = |x: f64, p: f64| (-model.phi(x) - case.g, -1.0 + p * model.dphi(x));
        let dt = 1e-3;
        let (mut x, mut p) = (x0, case.alpha);
        let mut psi = Vec::new();
        let mut crossed_at = None;
        while psi.len() < 20_000 && p > 0.0 && x > 0.5 * x_min {
            psi.push(p);
            let (k1x, k1p) = rhs(x, p);
            let (k2x, k2p) = rhs(x + 0.5 * dt * k1x, p + 0.5 * dt * k1p);
            let (k3x, k3p) = rhs(x + 0.5 * dt * k2x, p + 0.5 * dt * k2p);
            let (k4x, k4p) = rhs(x + dt * k3x, p + dt * k3p);
            let xn = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            if x > 0.0 && xn <= 0.0 {
                crossed_at = Some((psi.len(), p));
            }
            x = xn;
        }
        let Some((i0, p_star)) = crossed_at else { return Ok(()); };
        prop_assume!(p_star > 0.0 && p_star < case.threshold());
        for i in (i0 + 1)..psi.len().saturating_sub(1) {
            let dd = (psi[i + 1] - 2.0 * psi[i] + psi[i - 1]) / (dt * dt);
            prop_assert!(dd < 0.0, "ψ̈ = {dd} at step {i} after crossing at {i0}");
        }
    }

    #[test]
    fn velocity_is_monotone_on_bang_arcs(g in 0.05..0.95f64, t1 in 0.05..1.0f64, t2 in 1.05..2.0f64) {
        let params = ProblemParams::new(g, 3.0, 2.0, 1.0).unwrap();
        let model = quad();
        let law = ControlLaw::from_switches(&[ArcMode::Bang1, ArcMode::Bang0, ArcMode::Bang1], &[t1, t2], 3.0).unwrap();
        let tr = integrate_forward(&params, &model, &law, 200.0).unwrap();
        let vb = model.velocity_bounds(g).unwrap();
        for w in 1..tr.len() {
            // each arc opens with a copy of the previous arc's last node
            if tr.arc_starts.contains(&w) {
                continue;
            }
            let dx = tr.x[w] - tr.x[w - 1];
            let expected_sign = if tr.u[w] == 1.0 { dx > 0.0 } else { dx < 0.0 };
            prop_assert!(expected_sign, "dx = {} at t = {}", dx, tr.grid[w]);
        }
        prop_assert!(tr.x.iter().all(|&x| x > vb.x_min - 1e-9 && x < vb.x_max + 1e-9));
    }

    #[test]
    fn wrong_switches_fail_verification(g in 0.2..0.6f64, t1 in 0.1..0.9f64, gap in 0.1..1.0f64) {
        // coast, burn, coast with ψ(t₁) taken as α but the burn end placed arbitrarily
        let params = ProblemParams::new(g, 3.0, 1.5, 1.0).unwrap();
        let model = quad();
        let dm = params.fuel_budget();
        let law = ControlLaw::from_switches(
            &[ArcMode::Bang0, ArcMode::Bang1, ArcMode::Bang0],
            &[t1 + gap, t1 + gap + dm],
            params.horizon,
        ).unwrap();
        let Ok(tr) = simulate(&params, &model, &law, 400.0) else { return Ok(()); };
        prop_assert!((fuel_used(&law) - dm).abs() < 1e-12);
        let alpha = tr.psi_at_switch(0).unwrap();
        let report = verify_process(alpha, &law, &tr, &params, &model, &MpTolerances::default());
        let psi2 = tr.psi_at_switch(1).unwrap();
        prop_assume!((psi2 - alpha).abs() > 1e-4);
        prop_assert!(!report.pass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn constructed_extremals_are_admitted(g in 0.05..0.95f64, horizon in 1.0..5.0f64, share in 0.05..0.6f64) {
        let params = ProblemParams::new(g, horizon, 1.0 + share * horizon, 1.0).unwrap();
        match scan_all(&params, &quad(), &ShootingOptions::default(), &MpTolerances::default(), 1) {
            Ok(out) => {
                for v in &out.extremals {
                    let (_, set) = classify(&quad(), g, v.extremal.alpha).unwrap();
                    prop_assert!(set.contains(v.extremal.kind), "{} outside {}", v.extremal.kind, set.display_types());
                    prop_assert!(v.admitted);
                }
            }
            Err(Error::NoExtremalFound) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn direct_controls_stay_feasible(g in 0.1..0.9f64, share in 0.1..0.9f64) {
        let params = ProblemParams::new(g, 2.0, 1.0 + 2.0 * share, 1.0).unwrap();
        let opts = DirectOptions { cells: 100, restarts: 1, max_iter: 200, grid_n: 20, ..Default::default() };
        let d = direct_solve(&params, &quad(), &opts, 1).unwrap();
        let h = params.horizon / d.cells as f64;
        prop_assert!(d.control.iter().all(|&u| (0.0..=1.0).contains(&u)));
        prop_assert!((d.control.iter().sum::<f64>() * h - params.fuel_budget()).abs() < 1e-9);
    }
}
