//! Optimal breaching point.
//!
//! The intruder picks the breaching angle `θ` that maximises the payoff
//! `p(θ) = τ_D(θ) - τ_A(θ)`. At the maximiser the approach angle of the
//! intruder's straight path satisfies `cos β = ν · dτ_D/dθ`, and the triangle
//! formed by the origin, the intruder and the breaching point ties `β` back to
//! `θ` through `θ = ψ - β + acos(cos β / r)`. [`solve`] finds the root of the
//! difference between the two sides by bisection; [`oracle_solve`] maximises
//! the payoff by brute force and exists to cross-check it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::geometry::{
    defender_target_time, intruder_target_time, normalize_angle, payoff, GameParams, GameState,
};

/// Default bisection tolerance on the breaching angle, radians.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Offset of the bisection's lower end from `θ = ψ`, which is a degenerate
/// point of the approach-angle formula when `ψ = φ_D = 0`.
pub const BRACKET_OFFSET: f64 = 1e-9;

/// Step of the central difference used to check stationarity.
pub const STATIONARITY_STEP: f64 = 1e-6;

/// Denominator of the approach-angle formula below which it is undefined.
const DEGENERACY_EPS: f64 = 1e-12;

/// Number of probes used to reject brackets with several sign changes.
const SCAN_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreachSolution {
    /// Breaching angle relative to the defender's azimuth.
    pub theta_star: f64,
    pub beta_star: f64,
    /// Absolute azimuth of the breaching point. Equal to `theta_star` until
    /// [`BreachSolution::with_defender_azimuth`] anchors it.
    pub breach_point_azimuth: f64,
    pub tau_d: f64,
    pub tau_a: f64,
    pub p_star: f64,
}

impl BreachSolution {
    fn at(state: &GameState, params: &GameParams, theta: f64, beta: f64) -> Self {
        let tau_d = defender_target_time(state.phi_d(), theta);
        let tau_a = intruder_target_time(state.r(), theta - state.psi(), params.nu());
        Self {
            theta_star: theta,
            beta_star: beta,
            breach_point_azimuth: theta,
            tau_d,
            tau_a,
            p_star: tau_d - tau_a,
        }
    }

    pub fn with_defender_azimuth(mut self, psi_d: f64) -> Self {
        self.breach_point_azimuth = normalize_angle(psi_d + self.theta_star);
        self
    }

    fn mirrored(mut self) -> Self {
        self.theta_star = -self.theta_star;
        self.breach_point_azimuth = -self.breach_point_azimuth;
        self
    }
}

/// Search interval for the breaching angle, in the frame where `ψ >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverBracket {
    pub theta_lo: f64,
    /// Tangency angle: the intruder's straight path grazes the perimeter.
    pub theta_hi: f64,
    pub tol: f64,
}

impl SolverBracket {
    pub fn for_state(state: &GameState, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(GameError::InvalidInput(format!("tol must be positive, got {tol}")));
        }
        let psi = state.psi().abs();
        Ok(Self {
            theta_lo: psi,
            theta_hi: psi + (1.0 / state.r()).acos(),
            tol,
        })
    }
}

/// Approach angle that makes breaching angle `theta` stationary for the
/// payoff, `acos(ν cos φ_D sin θ / sqrt(1 - cos²φ_D cos²θ))`.
pub fn approach_angle(phi_d: f64, theta: f64, nu: f64) -> Result<f64> {
    let (s_phi, c_phi) = phi_d.sin_cos();
    let (s_th, c_th) = theta.sin_cos();
    // 1 - cos²φ cos²θ without cancellation
    let denom = (s_th * s_th + s_phi * s_phi * c_th * c_th).sqrt();
    if denom < DEGENERACY_EPS {
        return Err(GameError::DegenerateApproach { phi_d, theta });
    }
    Ok((nu * c_phi * s_th / denom).clamp(-1.0, 1.0).acos())
}

/// Like [`approach_angle`], but substitutes the one-sided limit `acos ν` at
/// the corners where a defender on the perimeter faces `θ ∈ {0, π}`.
pub fn approach_angle_or_limit(phi_d: f64, theta: f64, nu: f64) -> f64 {
    approach_angle(phi_d, theta, nu).unwrap_or_else(|_| nu.acos())
}

/// `θ - (ψ - β(θ) + acos(cos β(θ) / r))`. Negative where the payoff is still
/// increasing in `θ`, positive once it decreases.
pub fn theta_residual(state: &GameState, params: &GameParams, theta: f64) -> Result<f64> {
    let beta = approach_angle(state.phi_d(), theta, params.nu())?;
    let implied = state.psi() - beta + (beta.cos() / state.r()).clamp(-1.0, 1.0).acos();
    Ok(theta - implied)
}

/// Optimal breaching angle, approach angle and payoff for `state`.
pub fn solve(state: &GameState, params: &GameParams, tol: f64) -> Result<BreachSolution> {
    if state.psi() < 0.0 {
        return solve(&state.mirrored(), params, tol).map(BreachSolution::mirrored);
    }
    let bracket = SolverBracket::for_state(state, tol)?;
    let psi = state.psi();
    let phi_d = state.phi_d();
    let nu = params.nu();

    let lo = psi + BRACKET_OFFSET;
    let on_perimeter_plane = phi_d.sin() < DEGENERACY_EPS;
    let hi = if on_perimeter_plane && bracket.theta_hi >= PI {
        PI - BRACKET_OFFSET
    } else {
        bracket.theta_hi.min(PI)
    };

    // intruder on (or numerically on) the perimeter: it already stands on
    // its breaching point
    if state.r() <= 1.0 || lo >= hi {
        let beta = approach_angle(phi_d, psi, nu)?;
        return Ok(BreachSolution::at(state, params, psi, beta));
    }

    let g_lo = theta_residual(state, params, lo)?;
    if g_lo >= 0.0 {
        // payoff already decreasing at the intruder's own azimuth
        let beta = approach_angle(phi_d, psi, nu)?;
        return Ok(BreachSolution::at(state, params, psi, beta));
    }
    let g_hi = theta_residual(state, params, hi)?;
    if g_hi < 0.0 {
        if on_perimeter_plane {
            // the maximiser is the kink opposite the defender
            return Err(GameError::DegenerateApproach { phi_d, theta: PI });
        }
        return Err(GameError::NoBracket {
            lo,
            hi,
            sign_changes: 0,
        });
    }
    if g_hi == 0.0 {
        let beta = approach_angle(phi_d, hi, nu)?;
        return Ok(BreachSolution::at(state, params, hi, beta));
    }

    let sign_changes = count_sign_changes(state, params, lo, hi)?;
    if sign_changes != 1 {
        return Err(GameError::NoBracket {
            lo,
            hi,
            sign_changes,
        });
    }

    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if theta_residual(state, params, mid)? < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let theta = 0.5 * (a + b);
    let beta = approach_angle(phi_d, theta, nu)?;
    Ok(BreachSolution::at(state, params, theta, beta))
}

fn count_sign_changes(state: &GameState, params: &GameParams, lo: f64, hi: f64) -> Result<usize> {
    let mut changes = 0;
    let mut prev_sign = 0.0;
    for i in 0..=SCAN_POINTS {
        let theta = lo + (hi - lo) * i as f64 / SCAN_POINTS as f64;
        let g = theta_residual(state, params, theta)?;
        if g == 0.0 {
            continue;
        }
        let sign = g.signum();
        if prev_sign != 0.0 && sign != prev_sign {
            changes += 1;
        }
        prev_sign = sign;
    }
    Ok(changes)
}

/// [`solve`], except that the corner where a defender on the perimeter
/// faces an intruder whose best option is the point diametrically opposite
/// is resolved to that point. The payoff there is still well defined (it is
/// a kink maximum) even though the approach angle is not; the one-sided
/// limit `acos ν` is reported for it.
pub fn solve_or_corner(state: &GameState, params: &GameParams, tol: f64) -> Result<BreachSolution> {
    match solve(state, params, tol) {
        Err(GameError::DegenerateApproach { theta, .. }) if theta.abs() > PI / 2.0 => {
            let theta = if state.psi() < 0.0 { -PI } else { PI };
            Ok(BreachSolution::at(state, params, theta, params.nu().acos()))
        }
        other => other,
    }
}

/// Brute-force maximiser of the payoff: a uniform grid over `[ψ, θ_t]`
/// followed by a ternary search between the neighbours of the best node.
pub fn oracle_solve(state: &GameState, params: &GameParams, grid_points: usize) -> Result<BreachSolution> {
    if grid_points < 1000 {
        return Err(GameError::InvalidInput(format!(
            "oracle needs at least 1000 grid points, got {grid_points}"
        )));
    }
    if state.psi() < 0.0 {
        return oracle_solve(&state.mirrored(), params, grid_points).map(BreachSolution::mirrored);
    }
    let bracket = SolverBracket::for_state(state, DEFAULT_TOL)?;
    let (lo, hi) = (bracket.theta_lo, bracket.theta_hi);
    let step = (hi - lo) / (grid_points - 1) as f64;
    let node = |i: usize| if i + 1 == grid_points { hi } else { lo + step * i as f64 };

    let mut best_i = 0;
    let mut best_p = f64::NEG_INFINITY;
    for i in 0..grid_points {
        let p = payoff(state, params, node(i));
        // strict comparison keeps the lowest θ on ties
        if p > best_p {
            best_p = p;
            best_i = i;
        }
    }

    let mut a = node(best_i.saturating_sub(1));
    let mut b = node((best_i + 1).min(grid_points - 1));
    for _ in 0..200 {
        if b - a < 1e-15 {
            break;
        }
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if payoff(state, params, m1) < payoff(state, params, m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let refined = 0.5 * (a + b);
    let theta = if payoff(state, params, refined) >= best_p {
        refined
    } else {
        node(best_i)
    };
    let beta = approach_angle_or_limit(state.phi_d(), theta, params.nu());
    Ok(BreachSolution::at(state, params, theta, beta))
}

/// Central-difference slope of the payoff in `θ`.
pub fn payoff_slope(state: &GameState, params: &GameParams, theta: f64, h: f64) -> f64 {
    (payoff(state, params, theta + h) - payoff(state, params, theta - h)) / (2.0 * h)
}
