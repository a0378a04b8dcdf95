//! Full games: integration loop, recorded traces and the equilibrium check.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    advance, check_terminal, DefenderControl, DefenderStrategy, IntruderControl, IntruderStrategy,
    OptimalDefender, OptimalIntruder, StepContext, TerminalEvent, TerminalKind, DEFAULT_DT,
    DEFAULT_TOL_BREACH, DEFAULT_TOL_CAPTURE, POLE_EPS,
};
use crate::error::{GameError, Result};
use crate::geometry::{DefenderState, GameParams, GameState, IntruderState, Vec3};
use crate::solver::{solve_or_corner, DEFAULT_TOL};

/// Default per-step slack for the monotonicity checks.
pub const STEP_SLACK: f64 = 1e-6;

/// Default slack for the equilibrium ordering of terminal payoffs.
pub const NASH_SLACK: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    /// Relative configuration at `t = 0`; the defender starts at azimuth 0.
    pub initial_state: GameState,
    pub params: GameParams,
    pub defender_strategy: Arc<dyn DefenderStrategy>,
    pub intruder_strategy: Arc<dyn IntruderStrategy>,
    pub dt: f64,
    pub timeout: f64,
    pub seed: u64,
    pub tol_breach: f64,
    pub tol_capture: f64,
}

impl ScenarioSpec {
    /// Default step, tolerances and a timeout of four times the intruder's
    /// initial target time.
    pub fn new(
        initial_state: GameState,
        params: GameParams,
        defender_strategy: Arc<dyn DefenderStrategy>,
        intruder_strategy: Arc<dyn IntruderStrategy>,
    ) -> Result<Self> {
        let tau_a = solve_or_corner(&initial_state, &params, DEFAULT_TOL)?.tau_a;
        Ok(Self {
            initial_state,
            params,
            defender_strategy,
            intruder_strategy,
            dt: DEFAULT_DT,
            timeout: (4.0 * tau_a).max(DEFAULT_DT),
            seed: 0,
            tol_breach: DEFAULT_TOL_BREACH,
            tol_capture: DEFAULT_TOL_CAPTURE,
        })
    }

    /// Both players optimal.
    pub fn optimal(initial_state: GameState, params: GameParams) -> Result<Self> {
        Self::new(initial_state, params, Arc::new(OptimalDefender), Arc::new(OptimalIntruder))
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_timeout(mut self, timeout: f64) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_defender(mut self, strategy: Arc<dyn DefenderStrategy>) -> Self {
        self.defender_strategy = strategy;
        self
    }

    pub fn with_intruder(mut self, strategy: Arc<dyn IntruderStrategy>) -> Self {
        self.intruder_strategy = strategy;
        self
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt", self.dt),
            ("timeout", self.timeout),
            ("tol_breach", self.tol_breach),
            ("tol_capture", self.tol_capture),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(GameError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub defender_states: Vec<DefenderState>,
    pub intruder_states: Vec<IntruderState>,
    /// Controls applied from each sample onwards; the terminal sample repeats
    /// the last applied pair.
    pub defender_controls: Vec<DefenderControl>,
    pub intruder_controls: Vec<IntruderControl>,
    pub payoff_trace: Vec<f64>,
    pub tau_d_trace: Vec<f64>,
    pub tau_a_trace: Vec<f64>,
    /// Absolute azimuth of the optimal breaching point at each sample.
    pub breach_azimuth_trace: Vec<f64>,
    pub terminal: TerminalEvent,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_payoff(&self) -> f64 {
        self.payoff_trace[0]
    }

    pub fn terminal_payoff(&self) -> f64 {
        *self.payoff_trace.last().unwrap()
    }

    /// Largest `|p(t) - p(0)|` along the run.
    pub fn payoff_deviation(&self) -> f64 {
        let p0 = self.initial_payoff();
        self.payoff_trace.iter().map(|p| (p - p0).abs()).fold(0.0, f64::max)
    }

    /// Largest angular drift of the optimal breaching point from its start.
    pub fn breach_azimuth_drift(&self) -> f64 {
        let b0 = self.breach_azimuth_trace[0];
        self.breach_azimuth_trace
            .iter()
            .map(|b| crate::geometry::normalize_angle(b - b0).abs())
            .fold(0.0, f64::max)
    }

    /// Defender speed implied by each recorded control,
    /// `sqrt(φ̇² + ψ̇_D² cos²φ_D)`.
    pub fn defender_speeds(&self) -> Vec<f64> {
        self.defender_controls
            .iter()
            .map(|c| (c.omega_d().powi(2) + c.azimuthal_speed().powi(2)).sqrt())
            .collect()
    }
}

/// Largest single-step increase of a trace (0 for a non-increasing one).
pub fn max_step_increase(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Largest single-step decrease of a trace (0 for a non-decreasing one).
pub fn max_step_decrease(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

pub fn is_non_increasing(trace: &[f64], step_slack: f64) -> bool {
    max_step_increase(trace) <= step_slack
}

pub fn is_non_decreasing(trace: &[f64], step_slack: f64) -> bool {
    max_step_decrease(trace) <= step_slack
}

struct Recorder {
    traj: Trajectory,
}

impl Recorder {
    fn push(
        &mut self,
        t: f64,
        defender: DefenderState,
        intruder: IntruderState,
        controls: (DefenderControl, IntruderControl),
        params: &GameParams,
    ) -> Result<()> {
        let state = GameState::from_agents(&defender, &intruder);
        let sol = solve_or_corner(&state, params, DEFAULT_TOL)?.with_defender_azimuth(defender.psi_d());
        let t_ = &mut self.traj;
        t_.times.push(t);
        t_.defender_states.push(defender);
        t_.intruder_states.push(intruder);
        t_.defender_controls.push(controls.0);
        t_.intruder_controls.push(controls.1);
        t_.tau_d_trace.push(sol.tau_d);
        t_.tau_a_trace.push(sol.tau_a);
        t_.payoff_trace.push(sol.tau_d - sol.tau_a);
        t_.breach_azimuth_trace.push(sol.breach_point_azimuth);
        Ok(())
    }
}

/// On the pole every azimuth labels the same point; pick the intruder's so
/// that the relative azimuth is zero.
fn fix_pole_gauge(defender: DefenderState, intruder: &IntruderState) -> DefenderState {
    if defender.phi_d().cos() < POLE_EPS {
        defender.with_azimuth(intruder.psi_a())
    } else {
        defender
    }
}

/// Plays one game to its end.
pub fn run(spec: &ScenarioSpec) -> Result<Trajectory> {
    spec.validate()?;
    let params = &spec.params;
    let init = spec.initial_state;
    let mut defender = DefenderState::new(0.0, init.phi_d())?;
    let mut intruder = IntruderState::new(init.psi(), init.r())?;
    defender = fix_pole_gauge(defender, &intruder);

    let mut rec = Recorder {
        traj: Trajectory {
            times: Vec::new(),
            defender_states: Vec::new(),
            intruder_states: Vec::new(),
            defender_controls: Vec::new(),
            intruder_controls: Vec::new(),
            payoff_trace: Vec::new(),
            tau_d_trace: Vec::new(),
            tau_a_trace: Vec::new(),
            breach_azimuth_trace: Vec::new(),
            terminal: TerminalEvent {
                kind: TerminalKind::Timeout,
                t_f: 0.0,
                final_state: init,
            },
        },
    };

    let controls_at = |step: u64, t: f64, d: &DefenderState, a: &IntruderState| -> Result<_> {
        let ctx = StepContext {
            t,
            step,
            dt: spec.dt,
            seed: spec.seed,
        };
        Ok((
            spec.defender_strategy.control(&ctx, d, a, params)?,
            spec.intruder_strategy.control(&ctx, d, a, params)?,
        ))
    };

    let start = GameState::from_agents(&defender, &intruder);
    if let Some(event) = check_terminal(&start, 0.0, spec.tol_breach, spec.tol_capture)? {
        rec.push(0.0, defender, intruder, (DefenderControl::DESCEND, IntruderControl::IDLE), params)?;
        rec.traj.terminal = event;
        return Ok(rec.traj);
    }

    let mut step: u64 = 0;
    loop {
        let t = step as f64 * spec.dt;
        let state = GameState::from_agents(&defender, &intruder);
        if t >= spec.timeout {
            let last = rec.traj.defender_controls.last().copied().unwrap_or(DefenderControl::DESCEND);
            let last_i = rec.traj.intruder_controls.last().copied().unwrap_or(IntruderControl::IDLE);
            rec.push(t, defender, intruder, (last, last_i), params)?;
            rec.traj.terminal = TerminalEvent {
                kind: TerminalKind::Timeout,
                t_f: t,
                final_state: state,
            };
            return Ok(rec.traj);
        }

        let controls = controls_at(step, t, &defender, &intruder)?;
        rec.push(t, defender, intruder, controls, params)?;

        let raw = advance(&defender, &intruder, &controls.0, &controls.1, params, spec.dt);
        let next_d = DefenderState::from_cartesian(raw.defender, defender.psi_d())?;
        let r_raw = raw.intruder[0].hypot(raw.intruder[1]);
        let next_a = IntruderState::from_planar(raw.intruder[0], raw.intruder[1])?;
        let next_state = GameState::from_agents(&next_d, &next_a);

        let breach_level = 1.0 + spec.tol_breach;
        let breach_frac = (r_raw <= breach_level)
            .then(|| crossing_fraction(state.r(), r_raw, breach_level));
        let capture_frac = (next_state.separation() <= spec.tol_capture)
            .then(|| crossing_fraction(state.separation(), next_state.separation(), spec.tol_capture));

        let frac = match (breach_frac, capture_frac) {
            (None, None) => None,
            (Some(b), None) => Some(b),
            (None, Some(c)) => Some(c),
            (Some(b), Some(c)) => Some(b.min(c)),
        };

        if let Some(s) = frac {
            let (d_end, a_end) = interpolate(&defender, &intruder, raw.defender, raw.intruder, s)?;
            let mut end_state = GameState::from_agents(&d_end, &a_end);
            let t_f = t + s * spec.dt;
            // pin the crossing quantity onto its threshold
            if breach_frac == Some(s) {
                end_state = GameState::new(end_state.psi(), end_state.phi_d(), breach_level)?;
            }
            let a_end = if breach_frac == Some(s) {
                IntruderState::new(a_end.psi_a(), breach_level)?
            } else {
                a_end
            };
            let kind = if breach_frac == Some(s) {
                TerminalKind::IntruderWin
            } else {
                TerminalKind::DefenderWin
            };
            let both = end_state.r() <= breach_level && end_state.separation() <= spec.tol_capture;
            if both {
                return Err(GameError::AmbiguousTerminal {
                    r: end_state.r(),
                    separation: end_state.separation(),
                });
            }
            rec.push(t_f, d_end, a_end, controls, params)?;
            rec.traj.terminal = TerminalEvent {
                kind,
                t_f,
                final_state: end_state,
            };
            return Ok(rec.traj);
        }

        defender = fix_pole_gauge(next_d, &next_a);
        intruder = next_a;
        step += 1;
    }
}

fn crossing_fraction(before: f64, after: f64, level: f64) -> f64 {
    if before <= level || before == after {
        return 0.0;
    }
    ((before - level) / (before - after)).clamp(0.0, 1.0)
}

fn interpolate(
    defender: &DefenderState,
    intruder: &IntruderState,
    d_raw: Vec3,
    a_raw: [f64; 2],
    s: f64,
) -> Result<(DefenderState, IntruderState)> {
    let p0 = defender.to_cartesian();
    let p = p0.add(d_raw.sub(p0).scale(s));
    let q0 = intruder.to_planar();
    let q = [q0[0] + s * (a_raw[0] - q0[0]), q0[1] + s * (a_raw[1] - q0[1])];
    Ok((
        DefenderState::from_cartesian(p, defender.psi_d())?,
        IntruderState::from_planar(q[0], q[1])?,
    ))
}

/// Terminal payoff of one run in a [`NashReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub defender: String,
    pub intruder: String,
    pub seed: u64,
    pub outcome: TerminalKind,
    pub t_f: f64,
    pub p_initial: f64,
    pub p_terminal: f64,
    pub max_step_increase: f64,
    pub max_step_decrease: f64,
}

impl RunSummary {
    fn of(spec: &ScenarioSpec, traj: &Trajectory) -> Self {
        Self {
            defender: spec.defender_strategy.name(),
            intruder: spec.intruder_strategy.name(),
            seed: spec.seed,
            outcome: traj.terminal.kind,
            t_f: traj.terminal.t_f,
            p_initial: traj.initial_payoff(),
            p_terminal: traj.terminal_payoff(),
            max_step_increase: max_step_increase(&traj.payoff_trace),
            max_step_decrease: max_step_decrease(&traj.payoff_trace),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashReport {
    pub equilibrium: RunSummary,
    /// Optimal defender against each alternative intruder.
    pub vs_intruders: Vec<RunSummary>,
    /// Each alternative defender against the optimal intruder.
    pub vs_defenders: Vec<RunSummary>,
    /// Largest terminal payoff the alternative intruders achieved.
    pub max_alt_intruder_p: f64,
    /// Smallest terminal payoff the alternative defenders conceded.
    pub min_alt_defender_p: f64,
    pub slack: f64,
    pub ordering_holds: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn nash_check(
    initial: GameState,
    params: GameParams,
    alt_defenders: &[Arc<dyn DefenderStrategy>],
    alt_intruders: &[Arc<dyn IntruderStrategy>],
    dt: f64,
    timeout: Option<f64>,
    seed: u64,
    slack: f64,
) -> Result<NashReport> {
    if alt_defenders.is_empty() || alt_intruders.is_empty() {
        return Err(GameError::InvalidInput("strategy pools must not be empty".into()));
    }
    let mut base = ScenarioSpec::optimal(initial, params)?.with_dt(dt).with_seed(seed);
    if let Some(t) = timeout {
        base = base.with_timeout(t);
    }

    let mut specs = vec![base.clone()];
    specs.extend(alt_intruders.iter().map(|s| base.clone().with_intruder(s.clone())));
    specs.extend(alt_defenders.iter().map(|s| base.clone().with_defender(s.clone())));

    let summaries = specs
        .par_iter()
        .map(|spec| run(spec).map(|traj| RunSummary::of(spec, &traj)))
        .collect::<Result<Vec<_>>>()?;

    let equilibrium = summaries[0].clone();
    let vs_intruders = summaries[1..=alt_intruders.len()].to_vec();
    let vs_defenders = summaries[1 + alt_intruders.len()..].to_vec();
    let max_alt_intruder_p = vs_intruders.iter().map(|s| s.p_terminal).fold(f64::NEG_INFINITY, f64::max);
    let min_alt_defender_p = vs_defenders.iter().map(|s| s.p_terminal).fold(f64::INFINITY, f64::min);
    let ordering_holds = max_alt_intruder_p <= equilibrium.p_terminal + slack
        && equilibrium.p_terminal <= min_alt_defender_p + slack;
    Ok(NashReport {
        equilibrium,
        vs_intruders,
        vs_defenders,
        max_alt_intruder_p,
        min_alt_defender_p,
        slack,
        ordering_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{FixedHeadingIntruder, RandomWalkIntruder, StationaryDefender, StationaryIntruder};
    use std::f64::consts::PI;

    fn section_five() -> (GameState, GameParams) {
        (GameState::new(0.9, 0.3 * PI, 2.0).unwrap(), GameParams::new(0.8).unwrap())
    }

    #[test]
    fn traces_are_consistent() {
        let (s, p) = section_five();
        let traj = run(&ScenarioSpec::optimal(s, p).unwrap()).unwrap();
        let n = traj.len();
        for len in [
            traj.defender_states.len(),
            traj.intruder_states.len(),
            traj.defender_controls.len(),
            traj.intruder_controls.len(),
            traj.payoff_trace.len(),
            traj.tau_d_trace.len(),
            traj.tau_a_trace.len(),
            traj.breach_azimuth_trace.len(),
        ] {
            assert_eq!(len, n);
        }
        for i in 0..n {
            assert_eq!(traj.payoff_trace[i], traj.tau_d_trace[i] - traj.tau_a_trace[i]);
        }
        assert_eq!(traj.terminal.t_f, *traj.times.last().unwrap());
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn section_five_is_an_intruder_win_with_constant_payoff() {
        let (s, p) = section_five();
        let traj = run(&ScenarioSpec::optimal(s, p).unwrap()).unwrap();
        assert_eq!(traj.terminal.kind, TerminalKind::IntruderWin);
        assert!(traj.payoff_deviation() <= 1e-3);
        assert!(traj.breach_azimuth_drift() <= 1e-3);
        assert!(traj.terminal.final_state.r() <= 1.0 + 1e-6);
    }

    #[test]
    fn runs_are_deterministic() {
        let (s, p) = section_five();
        let spec = ScenarioSpec::optimal(s, p)
            .unwrap()
            .with_intruder(Arc::new(RandomWalkIntruder { stream: 2 }))
            .with_seed(11);
        assert_eq!(run(&spec).unwrap(), run(&spec).unwrap());
    }

    #[test]
    fn idle_players_push_payoff_the_expected_way() {
        let (s, p) = section_five();
        let idle_d = ScenarioSpec::optimal(s, p).unwrap().with_defender(Arc::new(StationaryDefender));
        let traj = run(&idle_d).unwrap();
        assert!(is_non_decreasing(&traj.payoff_trace, STEP_SLACK));
        assert_eq!(traj.terminal.kind, TerminalKind::IntruderWin);

        let idle_a = ScenarioSpec::optimal(s, p).unwrap().with_intruder(Arc::new(StationaryIntruder));
        let traj = run(&idle_a).unwrap();
        assert!(is_non_increasing(&traj.payoff_trace, STEP_SLACK));
    }

    #[test]
    fn fixed_heading_scenario() {
        let (s, p) = section_five();
        let spec = ScenarioSpec::optimal(s, p)
            .unwrap()
            .with_intruder(Arc::new(FixedHeadingIntruder { gamma_a: 0.3 }));
        let traj = run(&spec).unwrap();
        assert!(is_non_increasing(&traj.payoff_trace, STEP_SLACK));
    }

    #[test]
    fn timeout_is_an_outcome() {
        let (s, p) = section_five();
        let spec = ScenarioSpec::optimal(s, p).unwrap().with_timeout(0.05);
        let traj = run(&spec).unwrap();
        assert_eq!(traj.terminal.kind, TerminalKind::Timeout);
        assert!(traj.terminal.t_f >= 0.05);
    }

    #[test]
    fn already_terminal_start() {
        let p = GameParams::new(0.8).unwrap();
        let s = GameState::new(0.0, 0.0, 3.0).unwrap();
        let traj = run(&ScenarioSpec::optimal(s, p).unwrap()).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.terminal.kind, TerminalKind::DefenderWin);
        assert_eq!(traj.terminal.t_f, 0.0);
    }

    #[test]
    fn bad_spec_is_rejected() {
        let (s, p) = section_five();
        let spec = ScenarioSpec::optimal(s, p).unwrap().with_dt(0.0);
        assert!(matches!(run(&spec), Err(GameError::InvalidInput(_))));
    }

    #[test]
    fn monotonicity_helpers() {
        assert_eq!(max_step_increase(&[3.0, 2.0, 2.5, 1.0]), 0.5);
        assert_eq!(max_step_decrease(&[1.0, 2.0, 1.75]), 0.25);
        assert!(is_non_increasing(&[1.0, 1.0 + 1e-7, 0.5], 1e-6));
        assert!(!is_non_decreasing(&[1.0, 0.9], 1e-6));
    }

    #[test]
    fn nash_check_rejects_empty_pools() {
        let (s, p) = section_five();
        assert!(nash_check(s, p, &[], &[], 1e-3, None, 0, NASH_SLACK).is_err());
    }
}
