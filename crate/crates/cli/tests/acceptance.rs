//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Instant;

use hemiguard::barrier::{barrier_curve, classify, curvature, DEFAULT_BAND, DEFAULT_CURVATURE_STEP};
use hemiguard::dynamics::{
    state_derivative, DefenderStrategy, IntruderStrategy, OptimalDefender, OptimalIntruder,
    RandomWalkDefender, RandomWalkIntruder, StationaryDefender,
};
use hemiguard::simulation::{max_step_decrease, max_step_increase, nash_check, run, NASH_SLACK, STEP_SLACK};
use hemiguard::solver::{oracle_solve, payoff_slope, solve, solve_or_corner, DEFAULT_TOL};
use hemiguard::{
    GameParams, GameState, IntruderControl, RegionLabel, ScenarioSpec, TerminalKind, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const SEED: u64 = 20_240_917;
const ORACLE_GRID: usize = 100_000;
const CONFIGS: usize = 1000;
const POOL: u64 = 20;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn section_five() -> (GameState, GameParams) {
    (GameState::new(0.9, 0.3 * PI, 2.0).unwrap(), GameParams::new(0.8).unwrap())
}

/// ψ ∈ [0, π), φ_D ∈ [0, π/2], r ∈ (1, 5], ν ∈ (0.1, 1].
fn solver_configs() -> Vec<(GameState, GameParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..CONFIGS)
        .map(|_| {
            let psi = rng.gen_range(0.0..PI);
            let phi = rng.gen_range(0.0..=FRAC_PI_2);
            let r = 5.0 - 4.0 * rng.gen::<f64>();
            let nu = 1.0 - 0.9 * rng.gen::<f64>();
            (GameState::new(psi, phi, r).unwrap(), GameParams::new(nu).unwrap())
        })
        .collect()
}

/// Game configurations away from the pole and the perimeter.
fn game_config(rng: &mut ChaCha8Rng) -> (GameState, GameParams) {
    let psi = rng.gen_range(-PI..PI);
    let phi = rng.gen_range(0.0..FRAC_PI_2);
    let r = rng.gen_range(1.05..3.0);
    let nu = rng.gen_range(0.3..=1.0);
    (GameState::new(psi, phi, r).unwrap(), GameParams::new(nu).unwrap())
}

fn c1_degeneracy() -> Verdict {
    let mut worst_beta: f64 = 0.0;
    for nu in [0.2, 0.5, 0.8, 1.0] {
        let params = GameParams::new(nu).unwrap();
        for (psi, r) in [(0.0, 2.0), (0.4, 1.5), (1.0, 3.0), (-0.7, 2.5)] {
            let state = GameState::new(psi, 0.0, r).unwrap();
            match solve(&state, &params, DEFAULT_TOL) {
                Ok(sol) => worst_beta = worst_beta.max((sol.beta_star - nu.acos()).abs()),
                Err(e) => return Verdict::new(false, format!("solve failed at nu={nu}, psi={psi}: {e}")),
            }
        }
    }
    let sol = solve(&GameState::new(0.0, 0.0, 2.0).unwrap(), &GameParams::new(0.8).unwrap(), DEFAULT_TOL).unwrap();
    let d_theta = (sol.theta_star - 0.515_778_4).abs();
    let d_p = (sol.p_star - -1.025_509_5).abs();
    Verdict::new(
        worst_beta <= 1e-12 && d_theta <= 1e-6 && d_p <= 1e-6,
        format!("max |beta*-acos nu| = {worst_beta:.3e}; |theta*-0.5157784| = {d_theta:.3e}; |p*+1.0255095| = {d_p:.3e}"),
    )
}

fn c2_oracle(configs: &[(GameState, GameParams)]) -> Verdict {
    let diffs: Vec<Result<(f64, f64), String>> = configs
        .par_iter()
        .map(|(s, p)| {
            let a = solve(s, p, DEFAULT_TOL).map_err(|e| format!("{s:?}: {e}"))?;
            let b = oracle_solve(s, p, ORACLE_GRID).map_err(|e| format!("{s:?}: {e}"))?;
            Ok(((a.p_star - b.p_star).abs(), (a.theta_star - b.theta_star).abs()))
        })
        .collect();
    let mut dp: f64 = 0.0;
    let mut dtheta: f64 = 0.0;
    for d in diffs {
        match d {
            Ok((a, b)) => {
                dp = dp.max(a);
                dtheta = dtheta.max(b);
            }
            Err(e) => return Verdict::new(false, format!("solver error {e}")),
        }
    }
    Verdict::new(
        dp <= 1e-6 && dtheta <= 1e-4,
        format!("{CONFIGS} configs; max |dp*| = {dp:.3e}, max |dtheta*| = {dtheta:.3e}"),
    )
}

fn c3_stationarity(configs: &[(GameState, GameParams)]) -> Verdict {
    let worst = configs
        .par_iter()
        .map(|(s, p)| match solve(s, p, DEFAULT_TOL) {
            Ok(sol) => payoff_slope(s, p, sol.theta_star, 1e-6).abs() / (1.0 + sol.p_star.abs()),
            Err(_) => f64::INFINITY,
        })
        .reduce(|| 0.0, f64::max);
    Verdict::new(worst <= 1e-6, format!("max |dp/dtheta|/(1+|p*|) = {worst:.3e}"))
}

fn c4_barrier_residual() -> Verdict {
    let mut worst_p: f64 = 0.0;
    let mut min_slope = f64::INFINITY;
    let mut worst_gap: f64 = 0.0;
    for k in [0.1, 0.2, 0.3, 0.4] {
        let phi = k * PI;
        for nu in [0.3, 0.8, 1.0] {
            let params = GameParams::new(nu).unwrap();
            let curve = match barrier_curve(phi, nu, 256) {
                Ok(c) => c,
                Err(e) => return Verdict::new(false, format!("barrier_curve({k}pi, {nu}): {e}")),
            };
            for s in &curve.samples {
                let p = s
                    .to_state(phi)
                    .and_then(|st| solve_or_corner(&st, &params, DEFAULT_TOL))
                    .map(|sol| sol.p_star.abs())
                    .unwrap_or(f64::INFINITY);
                worst_p = worst_p.max(p);
            }
            for w in curve.samples.windows(2) {
                if w[0].theta > 0.0 && w[1].theta < PI {
                    min_slope = min_slope.min((w[1].psi - w[0].psi) / (w[1].theta - w[0].theta));
                }
            }
            let (a, b) = (curve.samples[0].position(), curve.samples[255].position());
            worst_gap = worst_gap.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    Verdict::new(
        worst_p <= 1e-9 && min_slope > 0.0 && worst_gap <= 1e-9,
        format!("max |p| = {worst_p:.3e}; min dpsi/dtheta on (0, pi) = {min_slope:.4}; max closure gap = {worst_gap:.3e}"),
    )
}

fn c5_circle() -> Verdict {
    let mut worst_r: f64 = 0.0;
    for nu in [0.5, 0.8, 1.0] {
        let curve = barrier_curve(FRAC_PI_2, nu, 256).unwrap();
        let target = 1.0 + nu * FRAC_PI_2;
        for s in &curve.samples {
            worst_r = worst_r.max((s.r - target).abs());
        }
    }
    let expected = 1.0 / (1.0 + 0.4 * PI);
    let mut worst_k: f64 = 0.0;
    for theta in [-2.5, -1.0, 0.3, 1.2, 2.0, 2.9] {
        match curvature(FRAC_PI_2, 0.8, theta, DEFAULT_CURVATURE_STEP) {
            Ok(k) => worst_k = worst_k.max((k - expected).abs()),
            Err(e) => return Verdict::new(false, format!("curvature at theta={theta}: {e}")),
        }
    }
    Verdict::new(
        worst_r <= 1e-9 && worst_k <= 1e-4,
        format!("max |r-(1+nu pi/2)| = {worst_r:.3e}; max |kappa-1/(1+0.4pi)| = {worst_k:.3e}"),
    )
}

fn c6_shape() -> Verdict {
    let ratios: Vec<f64> = [0.05, 0.15, 0.25, 0.35, 0.45]
        .iter()
        .map(|k| barrier_curve(k * PI, 0.8, 256).unwrap().aspect_ratio())
        .collect();
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]) && ratios.iter().all(|&a| a >= 1.0);
    let small = barrier_curve(0.3 * PI, 0.3, 256).unwrap().enclosed_area();
    let large = barrier_curve(0.3 * PI, 0.8, 256).unwrap().enclosed_area();
    let shown: Vec<String> = ratios.iter().map(|a| format!("{a:.4}")).collect();
    Verdict::new(
        decreasing && small < large,
        format!("aspect ratios [{}]; area nu=0.3 {small:.4} vs nu=0.8 {large:.4}", shown.join(", ")),
    )
}

fn c7_c8_conservation(trajs: &mut Vec<Trajectory>) -> (Verdict, Verdict) {
    let (state, params) = section_five();
    let coarse = run(&ScenarioSpec::optimal(state, params).unwrap().with_dt(1e-3)).unwrap();
    let fine = run(&ScenarioSpec::optimal(state, params).unwrap().with_dt(5e-4)).unwrap();
    let (d1, d2) = (coarse.payoff_deviation(), fine.payoff_deviation());
    let drift = coarse.breach_azimuth_drift();
    trajs.push(coarse);
    trajs.push(fine);
    (
        Verdict::new(
            d1 <= 1e-3 && d2 <= 0.5 * d1,
            format!("max |p(t)-p(0)| = {d1:.3e} at dt=1e-3, {d2:.3e} at dt=5e-4 (ratio {:.3})", d2 / d1),
        ),
        Verdict::new(drift <= 1e-3, format!("breaching azimuth drift = {drift:.3e} rad")),
    )
}

fn c9_monotonicity(trajs: &mut Vec<Trajectory>) -> Verdict {
    let (state, params) = section_five();
    let base = ScenarioSpec::optimal(state, params).unwrap().with_seed(SEED);

    let vs_intruders: Vec<Trajectory> = (0..POOL)
        .into_par_iter()
        .map(|stream| run(&base.clone().with_intruder(Arc::new(RandomWalkIntruder { stream }))).unwrap())
        .collect();
    let rises: Vec<f64> = vs_intruders.iter().map(|t| max_step_increase(&t.payoff_trace)).collect();
    let bad_intruders = rises.iter().filter(|&&d| d > STEP_SLACK).count();
    let worst_rise = rises.iter().copied().fold(0.0, f64::max);

    let vs_defenders: Vec<Trajectory> = (0..POOL)
        .into_par_iter()
        .map(|stream| run(&base.clone().with_defender(Arc::new(RandomWalkDefender { stream }))).unwrap())
        .collect();
    let falls: Vec<f64> = vs_defenders.iter().map(|t| max_step_decrease(&t.payoff_trace)).collect();
    let bad_defenders = falls.iter().filter(|&&d| d > STEP_SLACK).count();
    let worst_fall = falls.iter().copied().fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let mut winning = Vec::new();
    while winning.len() < 20 {
        let (s, p) = game_config(&mut rng);
        if classify(&s, &p, DEFAULT_BAND).unwrap() == RegionLabel::IntruderWinning {
            winning.push((s, p));
        }
    }
    let stationary: Vec<Trajectory> = winning
        .par_iter()
        .map(|&(s, p)| {
            let spec = ScenarioSpec::new(s, p, Arc::new(StationaryDefender), Arc::new(OptimalIntruder)).unwrap();
            run(&spec).unwrap()
        })
        .collect();
    let lost = stationary.iter().filter(|t| t.terminal.kind != TerminalKind::IntruderWin).count();

    trajs.extend(vs_intruders);
    trajs.extend(vs_defenders);
    trajs.extend(stationary);
    Verdict::new(
        bad_intruders == 0 && bad_defenders == 0 && lost == 0,
        format!(
            "random intruders vs optimal defender: {bad_intruders}/{POOL} traces rise by more than {STEP_SLACK:e} per step (worst {worst_rise:.3e}); \
             random defenders vs optimal intruder: {bad_defenders}/{POOL} fall (worst {worst_fall:.3e}); \
             stationary defender: {lost}/20 intruder-winning starts not won by the intruder"
        ),
    )
}

fn c10_nash() -> Verdict {
    let (state, params) = section_five();
    let defenders: Vec<Arc<dyn DefenderStrategy>> = (0..POOL)
        .map(|stream| Arc::new(RandomWalkDefender { stream }) as Arc<dyn DefenderStrategy>)
        .collect();
    let intruders: Vec<Arc<dyn IntruderStrategy>> = (0..POOL)
        .map(|stream| Arc::new(RandomWalkIntruder { stream }) as Arc<dyn IntruderStrategy>)
        .collect();
    let report = nash_check(state, params, &defenders, &intruders, 1e-3, None, SEED, NASH_SLACK).unwrap();
    let left = report.max_alt_intruder_p <= report.equilibrium.p_terminal + 1e-3;
    let right = report.equilibrium.p_terminal <= report.min_alt_defender_p + 1e-3;
    Verdict::new(
        left && right,
        format!(
            "max alt-intruder p = {:.4}, equilibrium p = {:.6}, min alt-defender p = {:.4}",
            report.max_alt_intruder_p, report.equilibrium.p_terminal, report.min_alt_defender_p
        ),
    )
}

fn c11_outcomes(trajs: &mut Vec<Trajectory>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 11);
    let mut configs = Vec::new();
    while configs.len() < 50 {
        let (s, p) = game_config(&mut rng);
        let p_star = solve_or_corner(&s, &p, DEFAULT_TOL).unwrap().p_star;
        if p_star.abs() >= 1e-2 {
            configs.push((s, p));
        }
    }
    let results: Vec<(RegionLabel, Trajectory)> = configs
        .par_iter()
        .map(|&(s, p)| {
            let label = classify(&s, &p, DEFAULT_BAND).unwrap();
            let spec = ScenarioSpec::new(s, p, Arc::new(OptimalDefender), Arc::new(OptimalIntruder)).unwrap();
            (label, run(&spec).unwrap())
        })
        .collect();
    let mut mismatches = 0;
    let mut intruder_wins = 0;
    for (label, traj) in results {
        let expected = match label {
            RegionLabel::IntruderWinning => TerminalKind::IntruderWin,
            RegionLabel::DefenderWinning => TerminalKind::DefenderWin,
            RegionLabel::OnBarrier => unreachable!("|p*| >= 1e-2"),
        };
        if traj.terminal.kind != expected {
            mismatches += 1;
        }
        if expected == TerminalKind::IntruderWin {
            intruder_wins += 1;
        }
        trajs.push(traj);
    }
    Verdict::new(
        mismatches == 0,
        format!("50 configs ({intruder_wins} intruder-winning); {mismatches} outcome mismatches"),
    )
}

/// Speed from the equations of motion at each recorded state and control;
/// an idle intruder isolates the defender's azimuthal rate.
fn c12_speed(trajs: &[Trajectory]) -> Verdict {
    let params = GameParams::new(1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut samples = 0usize;
    for traj in trajs {
        for (k, dc) in traj.defender_controls.iter().enumerate() {
            let d = &traj.defender_states[k];
            let state = GameState::new(0.0, d.phi_d(), 2.0).unwrap();
            let speed = match state_derivative(&state, dc, &IntruderControl::IDLE, &params) {
                Ok(rate) => (rate.phi_d.powi(2) + (rate.psi * d.phi_d().cos()).powi(2)).sqrt(),
                Err(_) => f64::INFINITY,
            };
            worst = worst.max((speed - 1.0).abs());
            samples += 1;
        }
    }
    Verdict::new(
        worst <= 1e-9,
        format!("{} trajectories, {samples} samples; max |speed-1| = {worst:.3e}", trajs.len()),
    )
}

fn hemiguard(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hemiguard"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HEMIGUARD_JOBS")
        .output()
        .expect("binary runs")
}

type Files = Vec<(String, Vec<u8>)>;

fn dir_bytes(dir: &Path) -> Files {
    let mut files: Files = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_file())
        .map(|e| {
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c13_cli() -> Verdict {
    let reproducible: [&[&str]; 7] = [
        &["solve", "--psi", "0.9", "--phi-d", "0.9424778", "--r", "2", "--nu", "0.8"],
        &["barrier", "--phi-d", "0.9424778", "--nu", "0.8", "--samples", "256", "--out", "barrier.csv"],
        &["classify", "--phi-d", "0.3pi", "--nu", "0.8", "--grid", "48", "--r-max", "3", "--out", "grid.csv"],
        &[
            "simulate", "--scenario", "defender-optimal", "--intruder", "random:3", "--psi", "0.9", "--phi-d",
            "0.9424778", "--r", "2", "--nu", "0.8", "--seed", "7", "--out", "trace.csv", "--summary", "summary.json",
        ],
        &[
            "simulate", "--scenario", "both-optimal", "--psi", "0.9", "--phi-d", "0.9424778", "--r", "2", "--nu",
            "0.8", "--format", "json", "--out", "trace.json",
        ],
        &["sweep", "--phi-d", "0.1pi,0.3pi", "--nu", "0.3,0.8", "--level", "0,-0.25", "--out-dir", "sweep"],
        &["nash-check", "--psi", "0.9", "--phi-d", "0.3pi", "--r", "2", "--nu", "0.8", "--alternates", "4", "--seed", "5"],
    ];
    let mut problems = Vec::new();
    for args in reproducible {
        let runs: Vec<(Output, Files)> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let out = hemiguard(args, dir.path());
                let mut files = dir_bytes(dir.path());
                let sub = dir.path().join("sweep");
                if sub.is_dir() {
                    files.extend(dir_bytes(&sub));
                }
                (out, files)
            })
            .collect();
        let (a, b) = (&runs[0], &runs[1]);
        if !a.0.status.success() {
            problems.push(format!("{} exited {:?}", args[0], a.0.status.code()));
        } else if a.0.stdout != b.0.stdout || a.1 != b.1 || a.1.iter().any(|(_, bytes)| bytes.is_empty()) {
            problems.push(format!("{} output differs between runs", args[0]));
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let exit_cases: [(&[&str], i32, Option<&str>); 8] = [
        (&[], 1, None),
        (&["solve", "--psi", "0.9", "--r", "2", "--nu", "0.8"], 1, None),
        (&["solve", "--psi", "x", "--phi-d", "0", "--r", "2", "--nu", "0.8"], 1, None),
        (&["frobnicate"], 1, None),
        (&["solve", "--psi", "0", "--phi-d", "0", "--r", "0.5", "--nu", "0.8"], 1, Some("invalid_input")),
        (&["solve", "--psi", "3", "--phi-d", "0", "--r", "1.5", "--nu", "0.8"], 2, Some("degenerate_approach")),
        (
            &["barrier", "--phi-d", "0.3pi", "--nu", "0.8", "--level", "3"],
            2,
            Some("level_set_inside_perimeter"),
        ),
        (
            &["simulate", "--psi", "0.9", "--phi-d", "0.3pi", "--r", "2", "--nu", "0.8", "--timeout", "0.1"],
            0,
            Some("Timeout"),
        ),
    ];
    for (args, code, marker) in exit_cases {
        let out = hemiguard(args, dir.path());
        let stdout = String::from_utf8_lossy(&out.stdout);
        if out.status.code() != Some(code) || marker.is_some_and(|m| !stdout.contains(m)) {
            problems.push(format!("`{}` gave exit {:?}, expected {code}", args.join(" "), out.status.code()));
        }
    }
    let help = hemiguard(&["--help"], dir.path());
    if help.status.code() != Some(0) {
        problems.push("--help did not exit 0".into());
    }

    Verdict::new(
        problems.is_empty(),
        if problems.is_empty() {
            "7 commands byte-identical across runs; 9 exit-code cases as contracted".to_string()
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let start = Instant::now();
    let configs = solver_configs();
    let mut trajs = Vec::new();
    let (c7, c8) = c7_c8_conservation(&mut trajs);
    let c9 = c9_monotonicity(&mut trajs);
    let c11 = c11_outcomes(&mut trajs);
    let results = [
        ("degeneracy closed form", c1_degeneracy()),
        ("solver vs oracle", c2_oracle(&configs)),
        ("stationarity", c3_stationarity(&configs)),
        ("barrier residual", c4_barrier_residual()),
        ("circle limit", c5_circle()),
        ("barrier shape ordering", c6_shape()),
        ("payoff conservation", c7),
        ("breaching point conservation", c8),
        ("payoff monotonicity", c9),
        ("equilibrium ordering", c10_nash()),
        ("region predicts outcome", c11),
        ("defender speed identity", c12_speed(&trajs)),
        ("cli reproducibility and exit codes", c13_cli()),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {}", i + 1, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
