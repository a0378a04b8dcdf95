//! Barrier between the intruder- and defender-winning regions.
//!
//! For a fixed defender, every breaching angle `θ` has exactly one intruder
//! position whose optimal breaching point is `θ` and whose payoff is zero:
//! its approach angle comes from the stationarity condition and its distance
//! to the breaching point equals `ν τ_D(θ)`. Sweeping `θ` around the circle
//! traces a simple closed curve; intruders inside it win.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::geometry::{defender_target_time, normalize_angle, GameParams, GameState};
use crate::solver::{approach_angle, approach_angle_or_limit, solve_or_corner, DEFAULT_TOL};

/// Payoff band treated as "on the barrier" by [`classify`] unless the caller
/// asks for something else.
pub const DEFAULT_BAND: f64 = 1e-6;

/// Default finite-difference step for [`curvature`].
pub const DEFAULT_CURVATURE_STEP: f64 = 1e-4;

/// One point of a barrier or level-set curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSample {
    pub theta: f64,
    pub beta: f64,
    /// Distance from the intruder position to its breaching point.
    pub x: f64,
    pub r: f64,
    pub psi: f64,
}

impl BarrierSample {
    /// Intruder position at distance `x` from the breaching point, reached
    /// with approach angle `beta`. Negative `theta` is handled by symmetry.
    fn from_chord(theta: f64, beta: f64, x: f64) -> Self {
        if theta < 0.0 {
            return Self::from_chord(-theta, beta, x).mirrored();
        }
        let r = (x * x + 1.0 + 2.0 * x * beta.sin()).sqrt();
        let psi = theta + beta - (beta.cos() / r).clamp(-1.0, 1.0).acos();
        Self {
            theta,
            beta,
            x,
            r,
            psi: normalize_angle(psi),
        }
    }

    fn mirrored(self) -> Self {
        Self {
            theta: -self.theta,
            psi: normalize_angle(-self.psi),
            ..self
        }
    }

    /// Planar position of the intruder.
    pub fn position(&self) -> [f64; 2] {
        [self.r * self.psi.cos(), self.r * self.psi.sin()]
    }

    pub fn to_state(&self, phi_d: f64) -> Result<GameState> {
        GameState::new(self.psi, phi_d, self.r.max(1.0))
    }
}

/// Ordered samples of a closed curve for a fixed defender elevation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCurve {
    pub phi_d: f64,
    pub nu: f64,
    /// Payoff level the curve was built for (0 for the barrier itself).
    pub level: f64,
    pub samples: Vec<BarrierSample>,
}

impl BarrierCurve {
    /// Ratio of the largest to the smallest radial distance along the curve.
    pub fn aspect_ratio(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.r), hi.max(s.r)));
        hi / lo
    }

    /// Area enclosed by the curve (shoelace formula over the samples).
    pub fn enclosed_area(&self) -> f64 {
        let pts: Vec<[f64; 2]> = self.samples.iter().map(BarrierSample::position).collect();
        let n = pts.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let [x0, y0] = pts[i];
                let [x1, y1] = pts[(i + 1) % n];
                x0 * y1 - x1 * y0
            })
            .sum();
        0.5 * twice.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    IntruderWinning,
    DefenderWinning,
    OnBarrier,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::IntruderWinning => "IntruderWinning",
            RegionLabel::DefenderWinning => "DefenderWinning",
            RegionLabel::OnBarrier => "OnBarrier",
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_curve_inputs(phi_d: f64, nu: f64) -> Result<GameParams> {
    if !(0.0..=FRAC_PI_2).contains(&phi_d) {
        return Err(GameError::InvalidInput(format!(
            "phi_d must lie in [0, pi/2], got {phi_d}"
        )));
    }
    GameParams::new(nu)
}

/// The zero-payoff intruder position whose optimal breaching angle is `theta`.
pub fn barrier_point(phi_d: f64, nu: f64, theta: f64) -> Result<BarrierSample> {
    check_curve_inputs(phi_d, nu)?;
    let theta = normalize_angle(theta);
    if theta < 0.0 {
        return barrier_point(phi_d, nu, -theta).map(BarrierSample::mirrored);
    }
    let beta = approach_angle(phi_d, theta, nu)?;
    Ok(barrier_sample_with(phi_d, nu, theta, beta))
}

fn barrier_sample_with(phi_d: f64, nu: f64, theta: f64, beta: f64) -> BarrierSample {
    BarrierSample::from_chord(theta, beta, nu * defender_target_time(phi_d, theta))
}

/// Barrier sampled at `n_samples` uniform breaching angles over `[-π, π]`.
///
/// The first and last samples sit at `θ = ∓π` and describe the same point.
/// For a defender on the perimeter the approach angle is undefined at
/// `θ ∈ {0, ±π}`; those samples use the limit taken from inside `(0, π)`.
pub fn barrier_curve(phi_d: f64, nu: f64, n_samples: usize) -> Result<BarrierCurve> {
    if n_samples < 16 {
        return Err(GameError::InvalidInput(format!(
            "barrier needs at least 16 samples, got {n_samples}"
        )));
    }
    check_curve_inputs(phi_d, nu)?;
    let last = (n_samples - 1) as f64;
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            // index i and n-1-i are mirror images; build the θ >= 0 one
            let j = i.max(n_samples - 1 - i);
            let theta = if 2 * j == n_samples - 1 {
                0.0
            } else if j == n_samples - 1 {
                PI
            } else {
                -PI + 2.0 * PI * j as f64 / last
            };
            let beta = approach_angle_or_limit(phi_d, theta, nu);
            let sample = barrier_sample_with(phi_d, nu, theta, beta);
            if j == i {
                sample
            } else {
                sample.mirrored()
            }
        })
        .collect();
    Ok(BarrierCurve {
        phi_d,
        nu,
        level: 0.0,
        samples,
    })
}

/// Region containing the intruder, decided by the sign of the optimal payoff.
pub fn classify(state: &GameState, params: &GameParams, band: f64) -> Result<RegionLabel> {
    let p = solve_or_corner(state, params, DEFAULT_TOL)?.p_star;
    Ok(if p > band {
        RegionLabel::IntruderWinning
    } else if p < -band {
        RegionLabel::DefenderWinning
    } else {
        RegionLabel::OnBarrier
    })
}

/// Curvature of the barrier at the sample built for breaching angle `theta`.
///
/// The barrier is a polar curve `r(ψ)`; its derivatives with respect to the
/// polar angle are obtained from central differences in `θ` through the
/// chain rule and fed to `|r² + 2r'² - r r''| / (r² + r'²)^{3/2}`.
pub fn curvature(phi_d: f64, nu: f64, theta: f64, h: f64) -> Result<f64> {
    if phi_d <= 0.0 {
        return Err(GameError::SingularCurvature);
    }
    if !(h > 0.0) {
        return Err(GameError::InvalidInput(format!("step must be positive, got {h}")));
    }
    let minus = barrier_point(phi_d, nu, theta - h)?;
    let mid = barrier_point(phi_d, nu, theta)?;
    let plus = barrier_point(phi_d, nu, theta + h)?;

    // unwrap ψ across the ±π seam before differencing
    let psi_m = mid.psi + normalize_angle(minus.psi - mid.psi);
    let psi_p = mid.psi + normalize_angle(plus.psi - mid.psi);

    let r_t = (plus.r - minus.r) / (2.0 * h);
    let r_tt = (plus.r - 2.0 * mid.r + minus.r) / (h * h);
    let psi_t = (psi_p - psi_m) / (2.0 * h);
    let psi_tt = (psi_p - 2.0 * mid.psi + psi_m) / (h * h);

    let r1 = r_t / psi_t;
    let r2 = (r_tt * psi_t - r_t * psi_tt) / psi_t.powi(3);
    let r = mid.r;
    Ok((r * r + 2.0 * r1 * r1 - r * r2).abs() / (r * r + r1 * r1).powf(1.5))
}

/// Curve of constant optimal payoff `k`, obtained by sliding every barrier
/// sample a distance `ν|k|` along the line through its breaching point:
/// outward for `k < 0`, inward for `k > 0`.
pub fn level_set(phi_d: f64, nu: f64, k: f64, n_samples: usize) -> Result<BarrierCurve> {
    if !k.is_finite() {
        return Err(GameError::InvalidInput(format!("level must be finite, got {k}")));
    }
    let barrier = barrier_curve(phi_d, nu, n_samples)?;
    let offset = nu * k;
    let samples = barrier
        .samples
        .iter()
        .map(|s| {
            let x = s.x - offset;
            if x < 0.0 {
                return Err(GameError::LevelSetInsidePerimeter {
                    theta: s.theta,
                    offset,
                });
            }
            Ok(BarrierSample::from_chord(s.theta, s.beta, x))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BarrierCurve {
        level: k,
        samples,
        ..barrier
    })
}
