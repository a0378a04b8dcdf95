//! Game state types and the closed-form distance/time formulas.
//!
//! The defender lives on the unit hemisphere and the intruder on its ground
//! plane. Positions are kept in spherical coordinates: the defender by
//! azimuth and elevation, the intruder by azimuth and radial distance. The
//! perimeter radius and the defender's maximum speed are both 1, so
//! distances and times share the same unit.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(GameError::InvalidInput(format!("{name} must be finite, got {value}")))
    }
}

fn check_elevation(phi_d: f64) -> Result<()> {
    check_finite("phi_d", phi_d)?;
    if (0.0..=FRAC_PI_2).contains(&phi_d) {
        Ok(())
    } else {
        Err(GameError::InvalidInput(format!(
            "phi_d must lie in [0, pi/2], got {phi_d}"
        )))
    }
}

fn check_radius(r: f64) -> Result<()> {
    check_finite("r", r)?;
    if r >= 1.0 {
        Ok(())
    } else {
        Err(GameError::InvalidInput(format!("r must be >= 1, got {r}")))
    }
}

/// Relative configuration `(ψ, φ_D, r)` with `ψ = ψ_A - ψ_D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    psi: f64,
    phi_d: f64,
    r: f64,
}

impl GameState {
    pub fn new(psi: f64, phi_d: f64, r: f64) -> Result<Self> {
        check_finite("psi", psi)?;
        check_elevation(phi_d)?;
        check_radius(r)?;
        Ok(Self {
            psi: normalize_angle(psi),
            phi_d,
            r,
        })
    }

    pub fn from_agents(defender: &DefenderState, intruder: &IntruderState) -> Self {
        Self {
            psi: normalize_angle(intruder.psi_a - defender.psi_d),
            phi_d: defender.phi_d,
            r: intruder.r,
        }
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn phi_d(&self) -> f64 {
        self.phi_d
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// The same configuration seen in a mirror through the defender's meridian.
    pub fn mirrored(&self) -> Self {
        Self {
            psi: normalize_angle(-self.psi),
            ..*self
        }
    }

    /// Angular separation `sqrt(ψ² + φ_D²)` used by the capture test.
    pub fn separation(&self) -> f64 {
        self.psi.hypot(self.phi_d)
    }
}

/// Defender position on the unit hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefenderState {
    psi_d: f64,
    phi_d: f64,
}

impl DefenderState {
    pub fn new(psi_d: f64, phi_d: f64) -> Result<Self> {
        check_finite("psi_d", psi_d)?;
        check_elevation(phi_d)?;
        Ok(Self {
            psi_d: normalize_angle(psi_d),
            phi_d,
        })
    }

    /// Projects an arbitrary 3-vector onto the hemisphere `z >= 0`.
    ///
    /// `fallback_azimuth` is kept when the point sits on the pole, where the
    /// azimuth carries no information.
    pub fn from_cartesian(v: Vec3, fallback_azimuth: f64) -> Result<Self> {
        let v = Vec3::new(v.x, v.y, v.z.max(0.0));
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(GameError::InvalidInput(format!(
                "cannot project {v:?} onto the hemisphere"
            )));
        }
        let u = v.scale(1.0 / norm);
        let horizontal = u.x.hypot(u.y);
        let phi_d = u.z.atan2(horizontal).clamp(0.0, FRAC_PI_2);
        let psi_d = if horizontal > 1e-15 {
            u.y.atan2(u.x)
        } else {
            fallback_azimuth
        };
        Ok(Self {
            psi_d: normalize_angle(psi_d),
            phi_d,
        })
    }

    pub fn psi_d(&self) -> f64 {
        self.psi_d
    }

    pub fn phi_d(&self) -> f64 {
        self.phi_d
    }

    pub fn to_cartesian(&self) -> Vec3 {
        Vec3::on_sphere(self.psi_d, self.phi_d)
    }

    /// Same physical point with a different azimuth label. Only meaningful on
    /// the pole, where every azimuth names the same position.
    pub fn with_azimuth(&self, psi_d: f64) -> Self {
        Self {
            psi_d: normalize_angle(psi_d),
            phi_d: self.phi_d,
        }
    }
}

/// Intruder position on the ground plane, outside or on the perimeter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntruderState {
    psi_a: f64,
    r: f64,
}

impl IntruderState {
    pub fn new(psi_a: f64, r: f64) -> Result<Self> {
        check_finite("psi_a", psi_a)?;
        check_radius(r)?;
        Ok(Self {
            psi_a: normalize_angle(psi_a),
            r,
        })
    }

    /// Builds the state from planar coordinates, clamping onto the perimeter
    /// when rounding leaves the point marginally inside it.
    pub fn from_planar(x: f64, y: f64) -> Result<Self> {
        check_finite("x", x)?;
        check_finite("y", y)?;
        let r = x.hypot(y).max(1.0);
        Ok(Self {
            psi_a: normalize_angle(y.atan2(x)),
            r,
        })
    }

    pub fn psi_a(&self) -> f64 {
        self.psi_a
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn to_planar(&self) -> [f64; 2] {
        [self.r * self.psi_a.cos(), self.r * self.psi_a.sin()]
    }
}

/// Intruder speed ratio `ν` (the defender's maximum speed is 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    nu: f64,
}

impl GameParams {
    pub fn new(nu: f64) -> Result<Self> {
        check_finite("nu", nu)?;
        if nu > 0.0 && nu <= 1.0 {
            Ok(Self { nu })
        } else {
            Err(GameError::InvalidInput(format!("nu must lie in (0, 1], got {nu}")))
        }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

/// Minimal 3-vector for positions and velocities on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Point on the unit sphere at the given azimuth and elevation.
    pub fn on_sphere(azimuth: f64, elevation: f64) -> Self {
        let (sa, ca) = azimuth.sin_cos();
        let (se, ce) = elevation.sin_cos();
        Self::new(ce * ca, ce * sa, se)
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn add(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn sub(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    /// Great-circle angle between two (not necessarily unit) vectors.
    pub fn angle_to(self, other: Vec3) -> f64 {
        self.cross(other).norm().atan2(self.dot(other))
    }
}

/// Geodesic travel time from the defender at elevation `phi_d` (azimuth 0)
/// to the perimeter point at breaching angle `theta`.
///
/// Equal to `acos(cos φ_D · cos θ)`; evaluated through `atan2` so that it
/// stays accurate when the two points nearly coincide.
pub fn defender_target_time(phi_d: f64, theta: f64) -> f64 {
    let (s_phi, c_phi) = phi_d.sin_cos();
    let (s_th, c_th) = theta.sin_cos();
    let sine = (s_th * s_th + s_phi * s_phi * c_th * c_th).sqrt();
    sine.atan2(c_phi * c_th)
}

/// Straight-line distance from an intruder at radius `r` to the perimeter
/// point at angular offset `delta`.
pub fn chord_length(r: f64, delta: f64) -> f64 {
    let half = (0.5 * delta).sin();
    ((r - 1.0) * (r - 1.0) + 4.0 * r * half * half).sqrt()
}

/// Intruder travel time to the breaching point, `delta = θ - ψ`.
pub fn intruder_target_time(r: f64, delta: f64, nu: f64) -> f64 {
    chord_length(r, delta) / nu
}

/// Distance to the breaching point for an intruder at radius `r` whose path
/// meets the perimeter at approach angle `beta` (measured from the tangent).
pub fn chord_from_approach(r: f64, beta: f64) -> f64 {
    let s = beta.sin();
    // r² - cos²β, written so that r ≈ 1 with β ≈ 0 keeps its digits
    let disc = (r - 1.0) * (r + 1.0) + s * s;
    -s + disc.max(0.0).sqrt()
}

/// Approach angle of the straight path from the intruder at `(psi, r)` to
/// the perimeter point at `theta`: the angle between the path and the
/// perimeter tangent at that point. `π/2` for a radial path, 0 at tangency.
pub fn path_approach_angle(r: f64, psi: f64, theta: f64) -> f64 {
    let (s, c) = (theta - psi).sin_cos();
    (r * c - 1.0).atan2((r * s).abs())
}

/// Payoff `τ_D - τ_A` for breaching angle `theta`; positive means the
/// intruder reaches the breaching point first.
pub fn payoff(state: &GameState, params: &GameParams, theta: f64) -> f64 {
    defender_target_time(state.phi_d, theta)
        - intruder_target_time(state.r, theta - state.psi, params.nu)
}
