use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::output::{fmt_f64, to_json, ExtremalRecord};
use super::{
    parse_range, ClassifyArgs, CliError, ExcludeArgs, OracleArgs, RunConfig, SolveArgs, SweepArgs, VerifyArgs,
    EXIT_NO_EXTREMAL, EXIT_OK, EXIT_THEORY,
};
use crate::classify::{classify as classify_point, ExtremalType, Gates};
use crate::dynamics::{simulate, ProblemParams, DEFAULT_STEPS_PER_UNIT};
use crate::error::Error;
use crate::exclusion::{exclude_type_iii, ExclusionReport, QuadraticCase};
use crate::extremal::{
    law_from_switches, multistart, scan_all, verify_process, MpTolerances, ShootingOptions, TypeAttempt,
};
use crate::friction::FrictionModel;
use crate::oracle::{direct_solve, structured_search_all, DirectOptions};
use crate::parallel::par_map;

type CmdResult = Result<i32, CliError>;

fn list(v: &[f64]) -> String {
    let inner: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", inner.join(","))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct ClassifyRecord<'a> {
    model: FrictionModel,
    g: f64,
    alpha: f64,
    regime: String,
    candidates: &'a [ExtremalType],
    gates: &'a Gates,
}

pub fn classify(a: &ClassifyArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = a.model.resolve(a.alpha)?;
    let g = cfg.gravity()?;
    let alpha = RunConfig::require(cfg.alpha, "alpha", "alpha")?;
    let (label, cand) = classify_point(&cfg.model, g, alpha)?;
    let gates = &cand.gates;
    writeln!(out, "{label} {}", cand.display_types())?;
    writeln!(out, "x_min {}", fmt_f64(gates.x_min))?;
    writeln!(out, "x_max {}", fmt_f64(gates.x_max))?;
    match gates.x_tilde {
        Some(x) => writeln!(out, "x_tilde {}", fmt_f64(x))?,
        None => writeln!(out, "x_tilde none")?,
    }
    writeln!(out, "alpha_upper {}", fmt_f64(gates.alpha_upper))?;
    writeln!(out, "alpha_lower {}", fmt_f64(gates.alpha_lower))?;
    writeln!(out, "boundary {}", gates.boundary)?;
    if let Some(path) = &a.json {
        let rec =
            ClassifyRecord { model: cfg.model, g, alpha, regime: label.to_string(), candidates: &cand.types, gates };
        write_file(path, &to_json(&rec)?)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    model: FrictionModel,
    params: &'a ProblemParams,
    best: Option<usize>,
    full_thrust: bool,
    extremals: Vec<ExtremalSummary<'a>>,
    attempts: &'a [TypeAttempt],
}

#[derive(Serialize)]
struct ExtremalSummary<'a> {
    #[serde(rename = "type")]
    kind: ExtremalType,
    alpha: f64,
    switch_times: &'a [f64],
    #[serde(rename = "s_T")]
    s_t: f64,
    residual_norm: f64,
    regime: Option<String>,
    admitted: bool,
    nonnegative_velocity: bool,
    file: String,
}

pub fn solve(a: &SolveArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = a.model.resolve(None)?;
    let params = cfg.params()?;
    if !(a.steps_per_unit >= 10.0) {
        return Err(CliError::Usage(format!("--steps-per-unit must be at least 10, got {}", a.steps_per_unit)));
    }
    let opts = ShootingOptions { steps_per_unit: a.steps_per_unit, ..ShootingOptions::default() };
    let outcome = scan_all(&params, &cfg.model, &opts, &MpTolerances::default(), cfg.jobs)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
    }

    if let Some(traj) = &outcome.full_thrust {
        writeln!(out, "full thrust s_T {}", fmt_f64(traj.final_position()))?;
        if let Some(dir) = &a.out {
            write_file(&dir.join("extremal_00_full_thrust.json"), &to_json(&ExtremalRecord::full_thrust(traj))?)?;
            let summary = SolveSummary {
                model: cfg.model,
                params: &params,
                best: None,
                full_thrust: true,
                extremals: Vec::new(),
                attempts: &outcome.attempts,
            };
            write_file(&dir.join("solve.json"), &to_json(&summary)?)?;
        }
        return Ok(EXIT_OK);
    }

    let mut summaries = Vec::new();
    for (i, v) in outcome.extremals.iter().enumerate() {
        let e = &v.extremal;
        let regime = v.regime.map(|r| r.to_string());
        writeln!(
            out,
            "{i} {} s_T {} alpha {} switches {} regime {} admitted {}",
            e.kind,
            fmt_f64(v.s_t),
            fmt_f64(e.alpha),
            list(&e.switch_times),
            regime.as_deref().unwrap_or("-"),
            v.admitted
        )?;
        let file = format!("extremal_{i:02}_{}.json", e.kind);
        if let Some(dir) = &a.out {
            write_file(&dir.join(&file), &to_json(&ExtremalRecord::from_verified(v))?)?;
        }
        summaries.push(ExtremalSummary {
            kind: e.kind,
            alpha: e.alpha,
            switch_times: &e.switch_times,
            s_t: v.s_t,
            residual_norm: e.residual_norm,
            regime,
            admitted: v.admitted,
            nonnegative_velocity: v.mp_report.nonnegative_velocity,
            file,
        });
    }
    writeln!(out, "best {}", outcome.extremals[0].extremal.kind)?;
    if let Some(dir) = &a.out {
        let summary = SolveSummary {
            model: cfg.model,
            params: &params,
            best: Some(0),
            full_thrust: false,
            extremals: summaries,
            attempts: &outcome.attempts,
        };
        write_file(&dir.join("solve.json"), &to_json(&summary)?)?;
    }
    Ok(EXIT_OK)
}

#[derive(Deserialize)]
struct StoredExtremal {
    #[serde(rename = "type")]
    kind: Option<String>,
    switch_times: Vec<f64>,
    alpha: Option<f64>,
}

pub fn verify(a: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = a.model.resolve(None)?;
    let params = cfg.params()?;
    let text =
        fs::read_to_string(&a.input).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.input.display())))?;
    let stored: StoredExtremal = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid extremal JSON {}: {e}", a.input.display())))?;
    let kind = stored
        .kind
        .as_deref()
        .and_then(ExtremalType::parse)
        .ok_or_else(|| CliError::Usage("input must name an extremal type (Ia, Ib, IIa, IIb, III)".into()))?;
    let law = law_from_switches(kind, &params, &cfg.model, &stored.switch_times, DEFAULT_STEPS_PER_UNIT)?;
    let traj = simulate(&params, &cfg.model, &law, DEFAULT_STEPS_PER_UNIT)?;
    let alpha = a.alpha.or(stored.alpha).or_else(|| traj.psi_at_switch(0)).unwrap_or(f64::NAN);
    let report = verify_process(alpha, &law, &traj, &params, &cfg.model, &MpTolerances::default());
    writeln!(out, "type {kind} alpha {} s_T {}", fmt_f64(alpha), fmt_f64(traj.final_position()))?;
    for c in &report.checks {
        writeln!(out, "{} {} {}", c.condition, if c.pass { "pass" } else { "FAIL" }, fmt_f64(c.value))?;
    }
    writeln!(out, "{}", if report.pass { "PASS" } else { "FAIL" })?;
    if let Some(path) = &a.json {
        write_file(path, &to_json(&report)?)?;
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_NO_EXTREMAL })
}

enum CellOutcome {
    Skipped(String),
    Done(Box<ExclusionReport>, Option<bool>),
    Violation(String),
}

const EXCLUDE_HEADER: [&str; 19] = [
    "cell",
    "k",
    "b",
    "g",
    "alpha",
    "status",
    "branch",
    "d_b",
    "d_c",
    "cases",
    "b_z2",
    "b_z3",
    "c_z2",
    "c_z3",
    "levels",
    "admissible_levels",
    "excluded",
    "shooting",
    "note",
];

pub fn exclude_iii(a: &ExcludeArgs, out: &mut dyn Write) -> CmdResult {
    let ks = parse_range(&a.k_range)?;
    let bs = parse_range(&a.b_range)?;
    let gs = parse_range(&a.g_range)?;
    let alpha_abs = a.alpha_range.as_deref().map(parse_range).transpose()?;
    if alpha_abs.is_none() && a.alpha_n == 0 {
        return Err(CliError::Usage("--alpha-n must be positive".into()));
    }
    if a.levels == 0 {
        return Err(CliError::Usage("--levels must be positive".into()));
    }
    let mut cells = Vec::new();
    for &k in &ks {
        for &b in &bs {
            for &g in &gs {
                let alphas: Vec<f64> = match &alpha_abs {
                    Some(v) => v.clone(),
                    None => (0..a.alpha_n).map(|j| (j as f64 + 0.5) / a.alpha_n as f64 / k).collect(),
                };
                for alpha in alphas {
                    cells.push((k, b, g, alpha));
                }
            }
        }
    }
    let jobs = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let shoot_opts = ShootingOptions::default();
    let results = par_map(&cells, jobs, |&(k, b, g, alpha)| {
        let case = match QuadraticCase::new(k, b, g, alpha) {
            Ok(c) => c,
            Err(e) => return CellOutcome::Skipped(e.to_string()),
        };
        let report = match exclude_type_iii(&case, a.levels) {
            Ok(r) => r,
            Err(e) => return CellOutcome::Violation(e.to_string()),
        };
        let shooting = a.check_shooting.then(|| {
            let model = FrictionModel::Quadratic { k, b };
            ProblemParams::new(g, a.shoot_horizon, 1.0 + a.shoot_fuel, 1.0)
                .map(|p| {
                    multistart(ExtremalType::III, &p, &model, Some(alpha), &shoot_opts)
                        .iter()
                        .all(|r| matches!(r, Err(Error::NotAnExtremal(_))))
                })
                .unwrap_or(false)
        });
        CellOutcome::Done(Box::new(report), shooting)
    });

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(EXCLUDE_HEADER)?;
    let (mut excluded, mut skipped, mut violations, mut shooting_disagree) = (0, 0, 0, 0);
    for (i, ((k, b, g, alpha), res)) in cells.iter().zip(&results).enumerate() {
        let head = [i.to_string(), fmt_f64(*k), fmt_f64(*b), fmt_f64(*g), fmt_f64(*alpha)];
        let mut row: Vec<String> = head.to_vec();
        match res {
            CellOutcome::Skipped(msg) => {
                skipped += 1;
                row.extend(["skipped".to_string()]);
                row.extend(std::iter::repeat_n(String::new(), 12));
                row.push(msg.clone());
            }
            CellOutcome::Violation(msg) => {
                violations += 1;
                row.extend(["violation".to_string()]);
                row.extend(std::iter::repeat_n(String::new(), 10));
                row.extend(["false".to_string(), String::new(), msg.clone()]);
            }
            CellOutcome::Done(rep, shooting) => {
                if rep.excluded {
                    excluded += 1;
                }
                let mid = &rep.levels[rep.levels.len() / 2];
                let cases: Vec<String> = rep.cases_taken().iter().map(|c| format!("{c:?}")).collect();
                let shoot = match shooting {
                    None => String::new(),
                    Some(true) => "not_an_extremal".to_string(),
                    Some(false) => {
                        shooting_disagree += 1;
                        "extremal_found".to_string()
                    }
                };
                row.extend([
                    "excluded".to_string(),
                    format!("{:?}", rep.branch),
                    fmt_f64(rep.b_roots.discriminant),
                    fmt_f64(rep.c_roots.discriminant),
                    cases.join("|"),
                    fmt_f64(mid.b_z2),
                    fmt_f64(mid.b_z3),
                    fmt_f64(mid.c_z2),
                    fmt_f64(mid.c_z3),
                    rep.levels.len().to_string(),
                    rep.levels.iter().filter(|l| l.admissible).count().to_string(),
                    rep.excluded.to_string(),
                    shoot,
                    String::new(),
                ]);
            }
        }
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    match &a.out {
        Some(path) => write_file(path, std::str::from_utf8(&bytes).expect("csv writes UTF-8"))?,
        None => out.write_all(&bytes)?,
    }
    eprintln!(
        "{} cells: {excluded} excluded, {skipped} skipped, {violations} violations, {shooting_disagree} shooting disagreements",
        cells.len()
    );
    Ok(if violations > 0 || shooting_disagree > 0 { EXIT_THEORY } else { EXIT_OK })
}

pub fn oracle(a: &OracleArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = a.model.resolve(None)?;
    let params = cfg.params()?;
    let opts = DirectOptions {
        cells: a.cells,
        restarts: a.restarts,
        seed: cfg.seed,
        grid_n: a.grid_n,
        ..DirectOptions::default()
    };
    let direct = direct_solve(&params, &cfg.model, &opts, cfg.jobs)?;
    let structured = structured_search_all(&params, &cfg.model, a.grid_n, cfg.jobs);
    let best_structured = structured.iter().flatten().max_by(|x, y| x.s_t.total_cmp(&y.s_t));
    let extremal = match scan_all(&params, &cfg.model, &ShootingOptions::default(), &MpTolerances::default(), cfg.jobs)
    {
        Ok(o) => match (&o.full_thrust, o.best()) {
            (Some(tr), _) => Some(("full_thrust".to_string(), tr.final_position())),
            (None, Some(v)) => Some((v.extremal.kind.to_string(), v.s_t)),
            _ => None,
        },
        Err(Error::NoExtremalFound) => None,
        Err(e) => return Err(e.into()),
    };
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "direct_s_T",
        "direct_converged",
        "direct_iterations",
        "structured_best",
        "structured_s_T",
        "extremal_best",
        "extremal_s_T",
    ])?;
    wtr.write_record([
        fmt_f64(direct.objective),
        direct.converged.to_string(),
        direct.iterations.to_string(),
        best_structured.map(|b| b.structure.to_string()).unwrap_or_default(),
        best_structured.map(|b| fmt_f64(b.s_t)).unwrap_or_default(),
        extremal.as_ref().map(|e| e.0.clone()).unwrap_or_default(),
        extremal.as_ref().map(|e| fmt_f64(e.1)).unwrap_or_default(),
    ])?;
    out.write_all(&wtr.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;
    if let Some(path) = &a.out {
        write_file(path, &to_json(&direct)?)?;
    }
    Ok(EXIT_OK)
}

pub const SWEEP_HEADER: [&str; 7] = ["g", "alpha", "regime", "candidates", "best_type", "s_T", "boundary_flag"];

pub fn sweep(a: &SweepArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = a.model.resolve(None)?;
    let gs = parse_range(&a.g_range)?;
    let alphas = parse_range(&a.alpha_range)?;
    // the best extremal depends on g only; α is one of its outputs
    let best: Vec<Option<(String, f64)>> = if !cfg.has_mission() {
        vec![None; gs.len()]
    } else {
        let params: Vec<ProblemParams> =
            gs.iter().map(|&g| cfg.params_with_gravity(g)).collect::<Result<_, CliError>>()?;
        let per_g = par_map(&params, cfg.jobs, |params| {
            match scan_all(params, &cfg.model, &ShootingOptions::default(), &MpTolerances::default(), 1) {
                Ok(o) => Ok(match (&o.full_thrust, o.best()) {
                    (Some(tr), _) => Some(("full_thrust".to_string(), tr.final_position())),
                    (None, Some(v)) => Some((v.extremal.kind.to_string(), v.s_t)),
                    _ => None,
                }),
                Err(Error::NoExtremalFound) => Ok(None),
                Err(e) => Err(e),
            }
        });
        per_g.into_iter().collect::<Result<Vec<_>, Error>>()?
    };
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(SWEEP_HEADER)?;
    for (g, best) in gs.iter().zip(&best) {
        for alpha in &alphas {
            let (label, cand) = classify_point(&cfg.model, *g, *alpha)?;
            wtr.write_record([
                fmt_f64(*g),
                fmt_f64(*alpha),
                label.to_string(),
                cand.display_types(),
                best.as_ref().map(|b| b.0.clone()).unwrap_or_default(),
                best.as_ref().map(|b| fmt_f64(b.1)).unwrap_or_default(),
                cand.gates.boundary.to_string(),
            ])?;
        }
    }
    let bytes = wtr.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    match &a.out {
        Some(path) => write_file(path, std::str::from_utf8(&bytes).expect("csv writes UTF-8"))?,
        None => out.write_all(&bytes)?,
    }
    Ok(EXIT_OK)
}
