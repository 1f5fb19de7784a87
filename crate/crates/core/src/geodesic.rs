//! Closed-form Schwarzschild quantities for light rays.
//!
//! Units are such that the horizon radius and the speed of light are both 1.
//! Vectors are given in pseudo-Cartesian components `(t, x, y, z)` associated
//! with the Schwarzschild coordinates `(t, r, θ, φ)`; `u = 1/r` is the inverse
//! radius.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::math::{Mat4, Vec3, Vec4};

/// Maximum of `u²(1 − u)` over `[0, 1]`, reached at the photon sphere.
pub const MU: f64 = 4.0 / 27.0;
/// Inverse radius of the photon sphere.
pub const PHOTON_SPHERE_U: f64 = 2.0 / 3.0;
/// Inverse radius of the innermost stable circular orbit.
pub const ISCO_U: f64 = 1.0 / 3.0;

/// Event position in Schwarzschild coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchwarzschildPosition {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SchwarzschildPosition {
    pub fn new(t: f64, r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r > 1.0) || !r.is_finite() {
            return Err(domain(format!("radius {r} is not outside the horizon")));
        }
        Ok(SchwarzschildPosition { t, r, theta, phi })
    }

    pub fn u(&self) -> f64 {
        1.0 / self.r
    }

    /// Pseudo-Cartesian spatial position.
    pub fn cartesian(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(st * cp, st * sp, ct) * self.r
    }
}

/// Metric product `g(a, b)` at spatial position `p`, in pseudo-Cartesian components.
pub fn metric_dot(p: Vec3, a: Vec4, b: Vec4) -> f64 {
    let r = p.length();
    let u = 1.0 / r;
    let n = p / r;
    let ar = a.s.dot(n);
    let br = b.s.dot(n);
    (1.0 - u) * a.t * b.t - ar * br / (1.0 - u) - (a.s.dot(b.s) - ar * br)
}

/// Orthonormal basis of a static observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticBasis {
    pub e_t: Vec4,
    pub e_r: Vec4,
    pub e_theta: Vec4,
    pub e_phi: Vec4,
}

impl StaticBasis {
    pub fn as_array(&self) -> [Vec4; 4] {
        [self.e_t, self.e_r, self.e_theta, self.e_phi]
    }
}

pub fn static_basis(pos: &SchwarzschildPosition) -> Result<StaticBasis> {
    if !(pos.r > 1.0) {
        return Err(domain(format!(
            "static observers do not exist at r = {}",
            pos.r
        )));
    }
    let u = pos.u();
    let k = (1.0 - u).sqrt();
    let (st, ct) = pos.theta.sin_cos();
    let (sp, cp) = pos.phi.sin_cos();
    Ok(StaticBasis {
        e_t: Vec4::new(1.0 / k, Vec3::ZERO),
        e_r: Vec4::new(0.0, Vec3::new(st * cp, st * sp, ct) * k),
        e_theta: Vec4::new(0.0, Vec3::new(ct * cp, ct * sp, -st)),
        e_phi: Vec4::new(0.0, Vec3::new(-sp, cp, 0.0)),
    })
}

/// Orthonormal camera frame; `e_tau` is the camera 4-velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraBasis {
    pub position: SchwarzschildPosition,
    pub e_tau: Vec4,
    pub e_w: Vec4,
    pub e_h: Vec4,
    pub e_d: Vec4,
    pub focal_length: f64,
}

impl CameraBasis {
    /// Builds `e_i = Λ_i^j e_j` from the static basis at `position`.
    pub fn from_lorentz(
        position: SchwarzschildPosition,
        lambda: &Mat4,
        focal_length: f64,
    ) -> Result<Self> {
        let sb = static_basis(&position)?.as_array();
        let row = |i: usize| {
            (0..4).fold(Vec4::default(), |acc, j| acc + sb[j] * lambda.0[i][j])
        };
        Ok(CameraBasis {
            position,
            e_tau: row(0),
            e_w: row(1),
            e_h: row(2),
            e_d: row(3),
            focal_length,
        })
    }
}

/// Initial (backward) beam direction for screen coordinates `(q_w, q_h)`.
pub fn beam_direction(q_w: f64, q_h: f64, cam: &CameraBasis) -> Vec4 {
    let f = cam.focal_length;
    let n = (q_w * q_w + q_h * q_h + f * f).sqrt();
    let spatial = cam.e_w * (q_w / n) + cam.e_h * (q_h / n) - cam.e_d * (f / n);
    -cam.e_tau + spatial
}

/// Rotated coordinate frame in which the beam's axial ray is equatorial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamFrame {
    pub ex: Vec3,
    pub ey: Vec3,
    pub ez: Vec3,
    pub delta: f64,
    pub alpha: f64,
    pub u_cam: f64,
}

impl BeamFrame {
    /// Direction in the beam plane at angle `angle` from `ex`.
    pub fn in_plane(&self, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        self.ex * c + self.ey * s
    }
}

pub fn make_beam_frame(pos: &SchwarzschildPosition, d: Vec4) -> BeamFrame {
    let p = pos.cartesian();
    let ex = p.normalize();
    let dn = d.s.normalize();
    let c = ex.cross(dn);
    let ez = if c.length() > 1e-14 {
        c.normalize()
    } else {
        // Radial ray: any plane containing ex will do.
        let helper = if ex.z.abs() < 0.9 { Vec3::Z } else { Vec3::X };
        let perp = helper - ex * helper.dot(ex);
        ex.cross(perp.normalize()).normalize()
    };
    let ey = ez.cross(ex).normalize();
    let delta = ex.dot(dn).clamp(-1.0, 1.0).acos();

    let line = Vec3::Z.cross(ez);
    let alpha = if line.length() < 1e-12 {
        0.0
    } else {
        let mut t = line.normalize();
        if t.dot(ey) < 0.0 {
            t = -t;
        }
        let a = ex.dot(t).clamp(-1.0, 1.0).acos();
        if a >= PI {
            0.0
        } else {
            a
        }
    };
    BeamFrame {
        ex,
        ey,
        ez,
        delta,
        alpha,
        u_cam: pos.u(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayClass {
    /// `e² ≥ μ`: the ray connects infinity and the horizon.
    Plunging,
    /// `e² < μ` outside the photon sphere: the ray comes from and returns to infinity.
    Scattering,
    /// `e² < μ` inside the photon sphere: the ray never leaves `u > 2/3`.
    Trapped,
    /// Exactly radial ray (`δ ∈ {0, π}`).
    Radial { outward: bool },
}

/// Constants of motion of a ray leaving inverse radius `u` at angle `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayState {
    pub u: f64,
    /// `du/dφ` along the (backward traced) ray.
    pub u_dot: f64,
    /// Inverse impact parameter (non-negative; infinite for radial rays).
    pub e: f64,
    pub e_square: f64,
    pub class: RayClass,
}

impl RayState {
    /// Same ray traced with `φ → −φ` (δ ↦ π − δ).
    pub fn reflected(&self) -> RayState {
        let class = match self.class {
            RayClass::Radial { outward } => RayClass::Radial { outward: !outward },
            c => c,
        };
        RayState {
            u_dot: -self.u_dot,
            class,
            ..*self
        }
    }
}

pub fn classify(u: f64, e_square: f64) -> RayClass {
    if e_square >= MU {
        RayClass::Plunging
    } else if u > PHOTON_SPHERE_U {
        RayClass::Trapped
    } else {
        RayClass::Scattering
    }
}

pub fn ray_constants(u: f64, delta: f64) -> Result<RayState> {
    if !(u > 0.0 && u < 1.0) {
        return Err(domain(format!("inverse radius {u} outside (0, 1)")));
    }
    if !(0.0..=PI).contains(&delta) {
        return Err(domain(format!("ray angle {delta} outside [0, π]")));
    }
    if delta == 0.0 || delta == PI {
        let outward = delta == 0.0;
        return Ok(RayState {
            u,
            u_dot: if outward { f64::NEG_INFINITY } else { f64::INFINITY },
            e: f64::INFINITY,
            e_square: f64::INFINITY,
            class: RayClass::Radial { outward },
        });
    }
    let u_dot = -u * delta.cos() / delta.sin();
    let e_square = u_dot * u_dot + u * u * (1.0 - u);
    Ok(RayState {
        u,
        u_dot,
        e: e_square.sqrt(),
        e_square,
        class: classify(u, e_square),
    })
}

/// Apsis inverse radius of a scattering ray with motion constant `e`.
pub fn apsis(e: f64) -> Result<f64> {
    // Squaring the rounded √μ can land one ulp above μ.
    let e_square = if e.abs() <= MU.sqrt() { (e * e).min(MU) } else { e * e };
    apsis_from_e_square(e_square)
}

pub fn apsis_from_e_square(e_square: f64) -> Result<f64> {
    if !(0.0..=MU).contains(&e_square) {
        return Err(domain(format!("no apsis for e² = {e_square}")));
    }
    let arg = 2.0 * e_square / MU - 1.0;
    if e_square == 0.0 || arg <= -1.0 {
        return Ok(0.0);
    }
    if arg >= 1.0 {
        return Ok(PHOTON_SPHERE_U);
    }
    Ok(1.0 / 3.0 + 2.0 / 3.0 * (arg.asin() / 3.0).sin())
}
