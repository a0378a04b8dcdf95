//! Equations of motion, control laws and terminal conditions.
//!
//! The defender always moves at unit speed; its control is the elevation
//! rate `ω_D` plus the direction of its azimuthal motion. The intruder picks a
//! heading `γ_A` measured from the inward radial direction (positive towards
//! increasing azimuth) and a fraction of its top speed `ν`.
//!
//! Integration is done in absolute Cartesian coordinates with the controls
//! held fixed over each step, which stays regular at the pole.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::geometry::{normalize_angle, DefenderState, GameParams, GameState, IntruderState, Vec3};
use crate::solver::{solve, solve_or_corner, DEFAULT_TOL};

/// `cos φ_D` below which the defender is treated as sitting on the pole.
pub const POLE_EPS: f64 = 1e-12;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_TOL_BREACH: f64 = 1e-6;
pub const DEFAULT_TOL_CAPTURE: f64 = 1e-3;

/// Length of the piecewise-constant segments of the random strategies.
pub const RANDOM_SEGMENT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefenderControl {
    omega_d: f64,
    azimuth_sign: i8,
}

impl DefenderControl {
    pub fn new(omega_d: f64, azimuth_sign: i8) -> Result<Self> {
        if !(omega_d.is_finite() && omega_d.abs() <= 1.0) {
            return Err(GameError::InvalidInput(format!(
                "omega_d must lie in [-1, 1], got {omega_d}"
            )));
        }
        if azimuth_sign != 1 && azimuth_sign != -1 {
            return Err(GameError::InvalidInput(format!(
                "azimuth_sign must be +1 or -1, got {azimuth_sign}"
            )));
        }
        Ok(Self {
            omega_d,
            azimuth_sign,
        })
    }

    pub const DESCEND: DefenderControl = DefenderControl {
        omega_d: -1.0,
        azimuth_sign: 1,
    };

    pub const ASCEND: DefenderControl = DefenderControl {
        omega_d: 1.0,
        azimuth_sign: 1,
    };

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    pub fn azimuth_sign(&self) -> i8 {
        self.azimuth_sign
    }

    /// Magnitude of the tangential speed along the parallel, `sqrt(1 - ω_D²)`.
    pub fn azimuthal_speed(&self) -> f64 {
        (1.0 - self.omega_d * self.omega_d).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntruderControl {
    gamma_a: f64,
    speed_fraction: f64,
}

impl IntruderControl {
    pub fn new(gamma_a: f64, speed_fraction: f64) -> Result<Self> {
        if !gamma_a.is_finite() {
            return Err(GameError::InvalidInput(format!("gamma_a must be finite, got {gamma_a}")));
        }
        if !(0.0..=1.0).contains(&speed_fraction) {
            return Err(GameError::InvalidInput(format!(
                "speed_fraction must lie in [0, 1], got {speed_fraction}"
            )));
        }
        Ok(Self {
            gamma_a: normalize_angle(gamma_a),
            speed_fraction,
        })
    }

    pub const IDLE: IntruderControl = IntruderControl {
        gamma_a: 0.0,
        speed_fraction: 0.0,
    };

    pub fn gamma_a(&self) -> f64 {
        self.gamma_a
    }

    pub fn speed_fraction(&self) -> f64 {
        self.speed_fraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminalKind {
    DefenderWin,
    IntruderWin,
    Timeout,
}

impl TerminalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminalKind::DefenderWin => "DefenderWin",
            TerminalKind::IntruderWin => "IntruderWin",
            TerminalKind::Timeout => "Timeout",
        }
    }
}

impl fmt::Display for TerminalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalEvent {
    pub kind: TerminalKind,
    pub t_f: f64,
    pub final_state: GameState,
}

/// Time derivative of the relative state `(ψ, φ_D, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRate {
    pub psi: f64,
    pub phi_d: f64,
    pub r: f64,
}

pub fn state_derivative(
    state: &GameState,
    dc: &DefenderControl,
    ic: &IntruderControl,
    params: &GameParams,
) -> Result<StateRate> {
    let cos_phi = state.phi_d().cos();
    let lateral = dc.azimuthal_speed();
    let defender_azimuthal = if lateral == 0.0 {
        0.0
    } else if cos_phi < POLE_EPS {
        return Err(GameError::PoleSingularity {
            phi_d: state.phi_d(),
            omega_d: dc.omega_d,
        });
    } else {
        f64::from(dc.azimuth_sign) * lateral / cos_phi
    };
    let speed = params.nu() * ic.speed_fraction;
    let (s_g, c_g) = ic.gamma_a.sin_cos();
    Ok(StateRate {
        psi: speed * s_g / state.r() - defender_azimuthal,
        phi_d: dc.omega_d,
        r: -speed * c_g,
    })
}

/// Unit vectors towards increasing elevation and increasing azimuth.
fn sphere_frame(azimuth: f64, elevation: f64) -> (Vec3, Vec3) {
    let (sa, ca) = azimuth.sin_cos();
    let (se, ce) = elevation.sin_cos();
    (Vec3::new(-se * ca, -se * sa, ce), Vec3::new(-sa, ca, 0.0))
}

/// Velocity of the defender at `p` for a fixed control. The local frame is
/// oriented to agree with `e_psi0`, the azimuthal unit vector at the start of
/// the step, so that the field stays continuous when a stage crosses the pole.
fn defender_velocity(p: Vec3, e_psi0: Vec3, dc: &DefenderControl) -> Vec3 {
    let up = Vec3::new(0.0, 0.0, 1.0);
    let u = p.scale(1.0 / p.norm());
    let side = up.cross(u);
    let e_psi = if side.norm() > 1e-15 {
        let e = side.scale(1.0 / side.norm());
        if e.dot(e_psi0) < 0.0 {
            e.scale(-1.0)
        } else {
            e
        }
    } else {
        e_psi0
    };
    let e_phi = u.cross(e_psi);
    e_phi
        .scale(dc.omega_d)
        .add(e_psi.scale(f64::from(dc.azimuth_sign) * dc.azimuthal_speed()))
}

fn intruder_velocity(q: [f64; 2], ic: &IntruderControl, nu: f64) -> [f64; 2] {
    let norm = q[0].hypot(q[1]);
    let (ux, uy) = (q[0] / norm, q[1] / norm);
    let speed = nu * ic.speed_fraction;
    let (s_g, c_g) = ic.gamma_a.sin_cos();
    // -cos γ along the radial unit vector, sin γ along the azimuthal one
    [speed * (-c_g * ux - s_g * uy), speed * (-c_g * uy + s_g * ux)]
}

/// Unprojected result of one integration step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RawStep {
    pub defender: Vec3,
    pub intruder: [f64; 2],
}

pub(crate) fn advance(
    defender: &DefenderState,
    intruder: &IntruderState,
    dc: &DefenderControl,
    ic: &IntruderControl,
    params: &GameParams,
    dt: f64,
) -> RawStep {
    let (_, e_psi0) = sphere_frame(defender.psi_d(), defender.phi_d());
    let fd = |p: Vec3| defender_velocity(p, e_psi0, dc);
    let p0 = defender.to_cartesian();
    let k1 = fd(p0);
    let k2 = fd(p0.add(k1.scale(0.5 * dt)));
    let k3 = fd(p0.add(k2.scale(0.5 * dt)));
    let k4 = fd(p0.add(k3.scale(dt)));
    let dp = k1.add(k2.scale(2.0)).add(k3.scale(2.0)).add(k4).scale(dt / 6.0);
    let p1 = p0.add(dp);
    let p1 = p1.scale(1.0 / p1.norm());

    let nu = params.nu();
    let fi = |q: [f64; 2]| intruder_velocity(q, ic, nu);
    let at = |q: [f64; 2], k: [f64; 2], h: f64| [q[0] + h * k[0], q[1] + h * k[1]];
    let q0 = intruder.to_planar();
    let l1 = fi(q0);
    let l2 = fi(at(q0, l1, 0.5 * dt));
    let l3 = fi(at(q0, l2, 0.5 * dt));
    let l4 = fi(at(q0, l3, dt));
    let q1 = [
        q0[0] + dt / 6.0 * (l1[0] + 2.0 * l2[0] + 2.0 * l3[0] + l4[0]),
        q0[1] + dt / 6.0 * (l1[1] + 2.0 * l2[1] + 2.0 * l3[1] + l4[1]),
    ];
    RawStep {
        defender: p1,
        intruder: q1,
    }
}

/// One fixed step of the classical Runge-Kutta scheme with both controls
/// held constant. The defender is projected back onto the hemisphere and the
/// intruder onto the region outside the perimeter.
pub fn integrate_step(
    defender: &DefenderState,
    intruder: &IntruderState,
    dc: &DefenderControl,
    ic: &IntruderControl,
    params: &GameParams,
    dt: f64,
) -> Result<(DefenderState, IntruderState)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GameError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let raw = advance(defender, intruder, dc, ic, params, dt);
    Ok((
        DefenderState::from_cartesian(raw.defender, defender.psi_d())?,
        IntruderState::from_planar(raw.intruder[0], raw.intruder[1])?,
    ))
}

pub fn check_terminal(
    state: &GameState,
    t: f64,
    tol_breach: f64,
    tol_capture: f64,
) -> Result<Option<TerminalEvent>> {
    let separation = state.separation();
    let breached = state.r() <= 1.0 + tol_breach;
    let captured = separation <= tol_capture;
    let kind = match (breached, captured) {
        (true, true) => {
            return Err(GameError::AmbiguousTerminal {
                r: state.r(),
                separation,
            })
        }
        (true, false) => TerminalKind::IntruderWin,
        (false, true) => TerminalKind::DefenderWin,
        (false, false) => return Ok(None),
    };
    Ok(Some(TerminalEvent {
        kind,
        t_f: t,
        final_state: *state,
    }))
}

/// Per-step information handed to strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub t: f64,
    pub step: u64,
    pub dt: f64,
    /// Run seed; randomized strategies derive all their draws from it.
    pub seed: u64,
}

pub trait DefenderStrategy: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn control(
        &self,
        ctx: &StepContext,
        defender: &DefenderState,
        intruder: &IntruderState,
        params: &GameParams,
    ) -> Result<DefenderControl>;
}

pub trait IntruderStrategy: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn control(
        &self,
        ctx: &StepContext,
        defender: &DefenderState,
        intruder: &IntruderState,
        params: &GameParams,
    ) -> Result<IntruderControl>;
}

/// Unit-speed control that follows the great circle from `from` to `to`.
/// `None` when the two points coincide or are antipodal.
pub fn geodesic_control(from: &DefenderState, to: Vec3) -> Option<DefenderControl> {
    let d = from.to_cartesian();
    let tangent = to.sub(d.scale(to.dot(d)));
    let norm = tangent.norm();
    if norm < 1e-14 {
        return None;
    }
    let t = tangent.scale(1.0 / norm);
    let (e_phi, e_psi) = sphere_frame(from.psi_d(), from.phi_d());
    let omega = t.dot(e_phi).clamp(-1.0, 1.0);
    let sign = if t.dot(e_psi) < 0.0 { -1 } else { 1 };
    Some(DefenderControl {
        omega_d: omega,
        azimuth_sign: sign,
    })
}

/// Moves along the great circle towards the optimal breaching point.
#[derive(Debug, Clone, Copy, Default)]
pub struct OptimalDefender;

impl DefenderStrategy for OptimalDefender {
    fn name(&self) -> String {
        "optimal".into()
    }

    fn control(
        &self,
        ctx: &StepContext,
        defender: &DefenderState,
        intruder: &IntruderState,
        params: &GameParams,
    ) -> Result<DefenderControl> {
        let state = GameState::from_agents(defender, intruder);
        if state.psi() == 0.0 || defender.phi_d().cos() < POLE_EPS {
            return Ok(DefenderControl::DESCEND);
        }
        let sol = match solve(&state, params, DEFAULT_TOL) {
            Ok(sol) => sol,
            // on the perimeter facing the far side: climb off the plane
            Err(GameError::DegenerateApproach { .. }) => return Ok(DefenderControl::ASCEND),
            Err(e) => return Err(e),
        };
        let target = Vec3::on_sphere(defender.psi_d() + sol.theta_star, 0.0);
        let Some(dc) = geodesic_control(defender, target) else {
            return Ok(dither(ctx.step));
        };
        Ok(slide_onto_intruder_azimuth(dc, state.psi(), defender.phi_d(), ctx.dt))
    }
}

/// If a step of `dc` would carry the defender past the intruder's azimuth,
/// returns the control that ends the step exactly on it and spends the rest
/// of the unit speed descending. Otherwise returns `dc`.
///
/// On `ψ = 0` the two mirror-image breaching points tie, and following either
/// one overshoots onto the other side; this keeps the defender on the
/// switching line instead of chattering across it.
fn slide_onto_intruder_azimuth(dc: DefenderControl, psi: f64, phi_d: f64, dt: f64) -> DefenderControl {
    let towards = f64::from(dc.azimuth_sign) * psi > 0.0;
    let needed = psi.abs() * phi_d.cos() / dt;
    if !towards || needed >= dc.azimuthal_speed() {
        return dc;
    }
    DefenderControl {
        omega_d: -(1.0 - needed * needed).sqrt(),
        azimuth_sign: dc.azimuth_sign,
    }
}

/// Heads straight for the optimal breaching point at full speed.
#[derive(Debug, Clone, Copy, Default)]
pub struct OptimalIntruder;

/// Heading that points from the intruder towards the planar point `target`.
pub fn heading_towards(intruder: &IntruderState, target: [f64; 2]) -> f64 {
    let [x, y] = intruder.to_planar();
    let (dx, dy) = (target[0] - x, target[1] - y);
    let (s, c) = intruder.psi_a().sin_cos();
    let inward = -(dx * c + dy * s);
    let lateral = -dx * s + dy * c;
    lateral.atan2(inward)
}

impl IntruderStrategy for OptimalIntruder {
    fn name(&self) -> String {
        "optimal".into()
    }

    fn control(
        &self,
        _ctx: &StepContext,
        defender: &DefenderState,
        intruder: &IntruderState,
        params: &GameParams,
    ) -> Result<IntruderControl> {
        let state = GameState::from_agents(defender, intruder);
        let sol = solve_or_corner(&state, params, DEFAULT_TOL)?;
        let azimuth = defender.psi_d() + sol.theta_star;
        let gamma = heading_towards(intruder, [azimuth.cos(), azimuth.sin()]);
        IntruderControl::new(gamma, 1.0)
    }
}

/// Constant heading at full speed.
#[derive(Debug, Clone, Copy)]
pub struct FixedHeadingIntruder {
    pub gamma_a: f64,
}

impl IntruderStrategy for FixedHeadingIntruder {
    fn name(&self) -> String {
        format!("fixed:{}", self.gamma_a)
    }

    fn control(
        &self,
        _ctx: &StepContext,
        _defender: &DefenderState,
        _intruder: &IntruderState,
        _params: &GameParams,
    ) -> Result<IntruderControl> {
        IntruderControl::new(self.gamma_a, 1.0)
    }
}

/// Does not move.
#[derive(Debug, Clone, Copy, Default)]
pub struct StationaryIntruder;

impl IntruderStrategy for StationaryIntruder {
    fn name(&self) -> String {
        "stationary".into()
    }

    fn control(
        &self,
        _ctx: &StepContext,
        _defender: &DefenderState,
        _intruder: &IntruderState,
        _params: &GameParams,
    ) -> Result<IntruderControl> {
        Ok(IntruderControl::IDLE)
    }
}

fn dither(step: u64) -> DefenderControl {
    DefenderControl {
        omega_d: 0.0,
        azimuth_sign: if step.is_multiple_of(2) { 1 } else { -1 },
    }
}

/// Stays in place. The defender has no zero-speed control, so it shuttles
/// back and forth by one step: along its parallel, or down and back up when
/// it starts on the pole.
#[derive(Debug, Clone, Copy, Default)]
pub struct StationaryDefender;

impl DefenderStrategy for StationaryDefender {
    fn name(&self) -> String {
        "stationary".into()
    }

    fn control(
        &self,
        ctx: &StepContext,
        defender: &DefenderState,
        _intruder: &IntruderState,
        _params: &GameParams,
    ) -> Result<DefenderControl> {
        let phi = defender.phi_d();
        if phi.cos() < POLE_EPS {
            return Ok(DefenderControl::DESCEND);
        }
        if ctx.step % 2 == 1 && phi > FRAC_PI_2 - 1.5 * ctx.dt {
            return Ok(DefenderControl::ASCEND);
        }
        Ok(dither(ctx.step))
    }
}

fn segment_rng(seed: u64, stream: u64, t: f64) -> ChaCha8Rng {
    let segment = (t / RANDOM_SEGMENT + 1e-9).floor().max(0.0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // each segment gets its own block of 16 words
    rng.set_word_pos(u128::from(segment) * 16);
    rng
}

/// Piecewise-constant random heading and speed, redrawn every
/// [`RANDOM_SEGMENT`] time units.
#[derive(Debug, Clone, Copy)]
pub struct RandomWalkIntruder {
    pub stream: u64,
}

impl IntruderStrategy for RandomWalkIntruder {
    fn name(&self) -> String {
        format!("random:{}", self.stream)
    }

    fn control(
        &self,
        ctx: &StepContext,
        _defender: &DefenderState,
        _intruder: &IntruderState,
        _params: &GameParams,
    ) -> Result<IntruderControl> {
        let mut rng = segment_rng(ctx.seed, self.stream, ctx.t);
        let gamma = rng.gen_range(-PI..PI);
        let fraction = rng.gen_range(0.0..=1.0);
        IntruderControl::new(gamma, fraction)
    }
}

/// Piecewise-constant random elevation rate and azimuthal direction.
#[derive(Debug, Clone, Copy)]
pub struct RandomWalkDefender {
    pub stream: u64,
}

impl DefenderStrategy for RandomWalkDefender {
    fn name(&self) -> String {
        format!("random:{}", self.stream)
    }

    fn control(
        &self,
        ctx: &StepContext,
        _defender: &DefenderState,
        _intruder: &IntruderState,
        _params: &GameParams,
    ) -> Result<DefenderControl> {
        let mut rng = segment_rng(ctx.seed, self.stream, ctx.t);
        let omega = rng.gen_range(-1.0..=1.0);
        let sign = if rng.gen::<bool>() { 1 } else { -1 };
        DefenderControl::new(omega, sign)
    }
}

/// Parses `optimal`, `stationary` or `random:<stream>`.
pub fn defender_strategy_from_name(name: &str) -> Result<Arc<dyn DefenderStrategy>> {
    match name.split_once(':') {
        None if name == "optimal" => Ok(Arc::new(OptimalDefender)),
        None if name == "stationary" => Ok(Arc::new(StationaryDefender)),
        Some(("random", stream)) => Ok(Arc::new(RandomWalkDefender {
            stream: parse_stream(stream)?,
        })),
        _ => Err(GameError::InvalidInput(format!("unknown defender strategy '{name}'"))),
    }
}

/// Parses `optimal`, `stationary`, `fixed:<gamma>` or `random:<stream>`.
pub fn intruder_strategy_from_name(name: &str) -> Result<Arc<dyn IntruderStrategy>> {
    match name.split_once(':') {
        None if name == "optimal" => Ok(Arc::new(OptimalIntruder)),
        None if name == "stationary" => Ok(Arc::new(StationaryIntruder)),
        Some(("fixed", gamma)) => {
            let gamma_a: f64 = gamma
                .parse()
                .map_err(|_| GameError::InvalidInput(format!("bad heading '{gamma}'")))?;
            IntruderControl::new(gamma_a, 1.0)?;
            Ok(Arc::new(FixedHeadingIntruder { gamma_a }))
        }
        Some(("random", stream)) => Ok(Arc::new(RandomWalkIntruder {
            stream: parse_stream(stream)?,
        })),
        _ => Err(GameError::InvalidInput(format!("unknown intruder strategy '{name}'"))),
    }
}

fn parse_stream(s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| GameError::InvalidInput(format!("bad random stream '{s}'")))
}
