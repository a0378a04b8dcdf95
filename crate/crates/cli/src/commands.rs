use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hemiguard::barrier::{self, barrier_curve, level_set};
use hemiguard::dynamics::{
    defender_strategy_from_name, intruder_strategy_from_name, DefenderStrategy, IntruderStrategy,
    RandomWalkDefender, RandomWalkIntruder,
};
use hemiguard::simulation::{
    is_non_decreasing, is_non_increasing, max_step_decrease, max_step_increase, nash_check as run_nash,
    run, RunSummary, STEP_SLACK,
};
use hemiguard::solver::solve as solve_state;
use hemiguard::{BarrierCurve, GameParams, GameState, RegionLabel, ScenarioSpec, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{emit, to_json, url_safe, write_atomic, Cell, Table};
use crate::{
    AngleArg, BarrierArgs, ClassifyArgs, CliError, ConfigArgs, Ctx, Format, NashArgs, Scenario,
    SimulateArgs, SolveArgs, SweepArgs,
};

type CmdResult = Result<(), CliError>;

impl Ctx {
    fn records_as_json(&self) -> bool {
        self.format != Format::Csv
    }

    fn datasets_as_csv(&self) -> bool {
        self.format != Format::Json
    }

    /// Angle on the way out, in the unit the user asked for.
    fn out_angle(&self, radians: f64) -> f64 {
        if self.degrees {
            radians.to_degrees()
        } else {
            radians
        }
    }

    fn in_angle(&self, a: &AngleArg) -> f64 {
        a.radians(self.degrees)
    }

    fn config(&self, c: &ConfigArgs) -> Result<(GameState, GameParams), CliError> {
        let state = GameState::new(self.in_angle(&c.psi), self.in_angle(&c.phi_d), c.r)?;
        let params = GameParams::new(c.nu)?;
        Ok((state, params))
    }

    /// A single record: JSON object by default, header plus one row as CSV.
    fn record<T: Serialize>(&self, value: &T, row: impl FnOnce() -> Table) -> String {
        if self.records_as_json() {
            to_json(value)
        } else {
            row().to_csv()
        }
    }

    fn dataset(&self, table: &Table) -> String {
        if self.datasets_as_csv() {
            table.to_csv()
        } else {
            table.to_json()
        }
    }
}

fn label_for(p: f64, band: f64) -> RegionLabel {
    if p > band {
        RegionLabel::IntruderWinning
    } else if p < -band {
        RegionLabel::DefenderWinning
    } else {
        RegionLabel::OnBarrier
    }
}

#[derive(Serialize)]
struct SolveRecord {
    theta_star: f64,
    beta_star: f64,
    tau_d: f64,
    tau_a: f64,
    p_star: f64,
    region: RegionLabel,
}

pub fn solve(ctx: &Ctx, a: &SolveArgs) -> CmdResult {
    let (state, params) = ctx.config(&a.config)?;
    let sol = solve_state(&state, &params, a.tol)?;
    let rec = SolveRecord {
        theta_star: ctx.out_angle(sol.theta_star),
        beta_star: ctx.out_angle(sol.beta_star),
        tau_d: sol.tau_d,
        tau_a: sol.tau_a,
        p_star: sol.p_star,
        region: label_for(sol.p_star, barrier::DEFAULT_BAND),
    };
    let text = ctx.record(&rec, || {
        let mut t = Table::new(&["theta_star", "beta_star", "tau_d", "tau_a", "p_star", "region"]);
        t.push(vec![
            rec.theta_star.into(),
            rec.beta_star.into(),
            rec.tau_d.into(),
            rec.tau_a.into(),
            rec.p_star.into(),
            rec.region.as_str().into(),
        ]);
        t
    });
    Ok(emit(None, &text)?)
}

fn curve_table(ctx: &Ctx, curve: &BarrierCurve) -> Table {
    let mut t = Table::new(&["theta", "beta", "x", "r", "psi"]);
    for s in &curve.samples {
        t.push(vec![
            ctx.out_angle(s.theta).into(),
            ctx.out_angle(s.beta).into(),
            s.x.into(),
            s.r.into(),
            ctx.out_angle(s.psi).into(),
        ]);
    }
    t
}

fn curve_for(phi_d: f64, nu: f64, level: Option<f64>, samples: usize) -> hemiguard::Result<BarrierCurve> {
    match level {
        Some(k) if k != 0.0 => level_set(phi_d, nu, k, samples),
        _ => barrier_curve(phi_d, nu, samples),
    }
}

pub fn barrier(ctx: &Ctx, a: &BarrierArgs) -> CmdResult {
    let curve = curve_for(ctx.in_angle(&a.phi_d), a.nu, a.level, a.samples)?;
    Ok(emit(a.out.as_deref(), &ctx.dataset(&curve_table(ctx, &curve)))?)
}

#[derive(Serialize)]
struct ClassifyRecord {
    psi: f64,
    r: f64,
    p_star: f64,
    label: RegionLabel,
}

pub fn classify(ctx: &Ctx, a: &ClassifyArgs) -> CmdResult {
    let phi_d = ctx.in_angle(&a.phi_d);
    let params = GameParams::new(a.nu)?;
    let point = |psi: f64, r: f64| -> hemiguard::Result<ClassifyRecord> {
        let state = GameState::new(psi, phi_d, r)?;
        let p_star = hemiguard::solver::solve_or_corner(&state, &params, hemiguard::solver::DEFAULT_TOL)?.p_star;
        Ok(ClassifyRecord {
            psi: ctx.out_angle(state.psi()),
            r,
            p_star,
            label: label_for(p_star, a.band),
        })
    };

    match (&a.psi, a.r, a.grid, a.r_max) {
        (Some(psi), Some(r), None, None) => {
            let rec = point(ctx.in_angle(psi), r)?;
            let text = ctx.record(&rec, || {
                let mut t = Table::new(&["psi", "r", "p_star", "label"]);
                t.push(vec![rec.psi.into(), rec.r.into(), rec.p_star.into(), rec.label.as_str().into()]);
                t
            });
            Ok(emit(a.out.as_deref(), &text)?)
        }
        (None, None, Some(n), Some(r_max)) => {
            if n == 0 {
                return Err(CliError::Usage("--grid must be at least 1".into()));
            }
            if !(r_max > 1.0) {
                return Err(CliError::Usage(format!("--r-max must exceed 1, got {r_max}")));
            }
            let nodes: Vec<(f64, f64)> = (0..n)
                .flat_map(|i| {
                    let psi = -PI + 2.0 * PI * i as f64 / n as f64;
                    (0..n).map(move |j| (psi, 1.0 + (r_max - 1.0) * (j + 1) as f64 / n as f64))
                })
                .collect();
            let recs = nodes
                .par_iter()
                .map(|&(psi, r)| point(psi, r))
                .collect::<hemiguard::Result<Vec<_>>>()?;
            let mut t = Table::new(&["psi", "r", "p_star", "label"]);
            for rec in recs {
                t.push(vec![rec.psi.into(), rec.r.into(), rec.p_star.into(), rec.label.as_str().into()]);
            }
            Ok(emit(a.out.as_deref(), &ctx.dataset(&t))?)
        }
        _ => Err(CliError::Usage(
            "classify needs either --psi and --r, or --grid and --r-max".into(),
        )),
    }
}

fn strategies(
    ctx: &Ctx,
    a: &SimulateArgs,
) -> Result<(Arc<dyn DefenderStrategy>, Arc<dyn IntruderStrategy>), CliError> {
    let (optimal_d, optimal_i, default_d, default_i) = match a.scenario {
        None | Some(Scenario::BothOptimal) => (a.scenario.is_some(), a.scenario.is_some(), "optimal", "optimal"),
        Some(Scenario::DefenderOptimal) => (true, false, "optimal", "random:0"),
        Some(Scenario::IntruderOptimal) => (false, true, "stationary", "optimal"),
    };
    let d = a.defender.as_deref().unwrap_or(default_d);
    let i = a.intruder.as_deref().unwrap_or(default_i);
    if (optimal_d && d != "optimal") || (optimal_i && i != "optimal") {
        return Err(CliError::Usage(format!(
            "strategies '{d}' vs '{i}' contradict the chosen scenario"
        )));
    }
    let i = match i.strip_prefix("fixed:") {
        Some(heading) if ctx.degrees => {
            let deg: f64 = heading
                .parse()
                .map_err(|_| CliError::Usage(format!("bad heading '{heading}'")))?;
            format!("fixed:{}", deg.to_radians())
        }
        _ => i.to_string(),
    };
    Ok((defender_strategy_from_name(d)?, intruder_strategy_from_name(&i)?))
}

#[derive(Serialize)]
struct SimulateSummary {
    defender: String,
    intruder: String,
    seed: u64,
    dt: f64,
    steps: u64,
    outcome: String,
    t_f: f64,
    p_initial: f64,
    p_terminal: f64,
    p_non_increasing: bool,
    p_non_decreasing: bool,
    max_step_increase: f64,
    max_step_decrease: f64,
}

const TRACE_HEADER: [&str; 10] = [
    "t", "psi_d", "phi_d", "psi_a", "r", "omega_d", "gamma_a", "tau_d", "tau_a", "p",
];

fn trace_table(ctx: &Ctx, traj: &Trajectory) -> Table {
    let mut t = Table::new(&TRACE_HEADER);
    for k in 0..traj.len() {
        let d = &traj.defender_states[k];
        let i = &traj.intruder_states[k];
        t.push(vec![
            traj.times[k].into(),
            ctx.out_angle(d.psi_d()).into(),
            ctx.out_angle(d.phi_d()).into(),
            ctx.out_angle(i.psi_a()).into(),
            i.r().into(),
            traj.defender_controls[k].omega_d().into(),
            ctx.out_angle(traj.intruder_controls[k].gamma_a()).into(),
            traj.tau_d_trace[k].into(),
            traj.tau_a_trace[k].into(),
            traj.payoff_trace[k].into(),
        ]);
    }
    t
}

pub fn simulate(ctx: &Ctx, a: &SimulateArgs) -> CmdResult {
    let (state, params) = ctx.config(&a.config)?;
    let (defender, intruder) = strategies(ctx, a)?;
    let mut spec = ScenarioSpec::new(state, params, defender, intruder)?
        .with_dt(a.dt)
        .with_seed(a.seed);
    if let Some(t) = a.timeout {
        spec = spec.with_timeout(t);
    }
    let traj = run(&spec)?;
    let p = &traj.payoff_trace;
    let summary = SimulateSummary {
        defender: spec.defender_strategy.name(),
        intruder: spec.intruder_strategy.name(),
        seed: spec.seed,
        dt: spec.dt,
        steps: traj.len().saturating_sub(1) as u64,
        outcome: traj.terminal.kind.as_str().to_string(),
        t_f: traj.terminal.t_f,
        p_initial: traj.initial_payoff(),
        p_terminal: traj.terminal_payoff(),
        p_non_increasing: is_non_increasing(p, STEP_SLACK),
        p_non_decreasing: is_non_decreasing(p, STEP_SLACK),
        max_step_increase: max_step_increase(p),
        max_step_decrease: max_step_decrease(p),
    };
    if let Some(out) = &a.out {
        write_atomic(out, &ctx.dataset(&trace_table(ctx, &traj)))?;
    }
    let text = ctx.record(&summary, || {
        let mut t = Table::new(&[
            "defender",
            "intruder",
            "seed",
            "dt",
            "steps",
            "outcome",
            "t_f",
            "p_initial",
            "p_terminal",
            "p_non_increasing",
            "p_non_decreasing",
            "max_step_increase",
            "max_step_decrease",
        ]);
        t.push(vec![
            summary.defender.clone().into(),
            summary.intruder.clone().into(),
            summary.seed.into(),
            summary.dt.into(),
            summary.steps.into(),
            summary.outcome.clone().into(),
            summary.t_f.into(),
            summary.p_initial.into(),
            summary.p_terminal.into(),
            summary.p_non_increasing.into(),
            summary.p_non_decreasing.into(),
            summary.max_step_increase.into(),
            summary.max_step_decrease.into(),
        ]);
        t
    });
    Ok(emit(a.summary.as_deref(), &text)?)
}

fn summary_row(role: &str, s: &RunSummary) -> Vec<Cell> {
    vec![
        role.into(),
        s.defender.clone().into(),
        s.intruder.clone().into(),
        s.seed.into(),
        s.outcome.as_str().into(),
        s.t_f.into(),
        s.p_initial.into(),
        s.p_terminal.into(),
    ]
}

pub fn nash_check(ctx: &Ctx, a: &NashArgs) -> CmdResult {
    if a.alternates == 0 {
        return Err(CliError::Usage("--alternates must be at least 1".into()));
    }
    let (state, params) = ctx.config(&a.config)?;
    let intruders: Vec<Arc<dyn IntruderStrategy>> = (0..a.alternates)
        .map(|stream| Arc::new(RandomWalkIntruder { stream }) as Arc<dyn IntruderStrategy>)
        .collect();
    let defenders: Vec<Arc<dyn DefenderStrategy>> = (0..a.alternates)
        .map(|stream| Arc::new(RandomWalkDefender { stream }) as Arc<dyn DefenderStrategy>)
        .collect();
    let report = run_nash(state, params, &defenders, &intruders, a.dt, a.timeout, a.seed, a.slack)?;
    let text = ctx.record(&report, || {
        let mut t = Table::new(&[
            "role", "defender", "intruder", "seed", "outcome", "t_f", "p_initial", "p_terminal",
        ]);
        t.push(summary_row("equilibrium", &report.equilibrium));
        for s in &report.vs_intruders {
            t.push(summary_row("alt_intruder", s));
        }
        for s in &report.vs_defenders {
            t.push(summary_row("alt_defender", s));
        }
        t
    });
    Ok(emit(a.out.as_deref(), &text)?)
}

fn sweep_file_name(ctx: &Ctx, phi_d: &AngleArg, nu: f64, level: Option<f64>) -> String {
    let mut name = format!("phiD={},nu={}", phi_d.label(), crate::output::fmt_sig(nu));
    if let Some(k) = level {
        name.push_str(&format!(",k={}", crate::output::fmt_sig(k)));
    }
    name.push_str(if ctx.datasets_as_csv() { ".csv" } else { ".json" });
    url_safe(&name)
}

pub fn sweep(ctx: &Ctx, a: &SweepArgs) -> CmdResult {
    let levels: Vec<Option<f64>> = if a.level.is_empty() {
        vec![None]
    } else {
        a.level.iter().copied().map(Some).collect()
    };
    let mut jobs: Vec<(&AngleArg, f64, Option<f64>)> = Vec::new();
    for phi_d in &a.phi_d {
        for &nu in &a.nu {
            for &level in &levels {
                jobs.push((phi_d, nu, level));
            }
        }
    }
    let written = jobs
        .par_iter()
        .map(|&(phi_d, nu, level)| -> Result<PathBuf, CliError> {
            let curve = curve_for(ctx.in_angle(phi_d), nu, level, a.samples)?;
            let path = a.out_dir.join(sweep_file_name(ctx, phi_d, nu, level));
            write_atomic(&path, &ctx.dataset(&curve_table(ctx, &curve)))?;
            Ok(path)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let listing: String = written
        .iter()
        .map(|p| format!("{}\n", p.file_name().map(Path::new).unwrap_or(p).display()))
        .collect();
    Ok(emit(None, &listing)?)
}
