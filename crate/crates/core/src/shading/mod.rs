//! Received light: lensing amplification, Doppler shift and beaming, bloom, tone mapping.

pub mod color_table;
pub mod post;
pub mod spectrum;

pub use color_table::{apply_doppler_beaming, ColorTable, ColorTableOptions};
pub use post::{bloom, tone_map, BloomOptions, HdrImage};

use crate::error::{domain, Result};
use crate::math::{Vec3, Vec4};

/// Amplification is clamped here near caustics, where it diverges for point sources.
pub const MAX_AMPLIFICATION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emitter {
    /// A source at rest with respect to the static frame, at inverse radius `u`.
    Static { u: f64 },
    /// Disc matter on a circular orbit at inverse radius `u`; `ez_dot` is `e_z · e_z′`,
    /// the cosine between the disc axis and the beam-plane normal.
    DiscCircular { u: f64, ez_dot: f64 },
}

/// Receiver and ray data for the frequency ratio `ν/ν′`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerInputs {
    /// Camera inverse radius.
    pub u: f64,
    /// Angle between the backward beam and the outward radial direction at the camera.
    pub delta: f64,
    /// Camera 4-velocity `e_τ`, pseudo-Cartesian components.
    pub camera_velocity: Vec4,
    /// Radial and azimuthal unit vectors `e_x′`, `e_y′` of the beam plane at the camera.
    pub ex: Vec3,
    pub ey: Vec3,
    pub emitter: Emitter,
}

/// `g(k, l) / |e|` for a 4-velocity with rotated components `(kt, kr, kphi)`, where `l`
/// is the beam tangent taken with the negative root of `e`.
fn g_over_e(kt: f64, kr: f64, kphi: f64, u: f64, u_dot_over_e: f64, inv_e: f64) -> f64 {
    -kt + kr * u_dot_over_e / (1.0 - u) - kphi * inv_e
}

/// Doppler factor `D = ν/ν′` between an emitter and the camera along a beam.
pub fn doppler_factor(inp: &DopplerInputs) -> Result<f64> {
    let u = inp.u;
    if !(0.0..1.0).contains(&u) {
        return Err(domain(format!("camera inverse radius {u} outside [0, 1)")));
    }
    // u̇ / |e| and 1 / |e| in terms of δ, finite for radial rays too.
    let (s, c) = inp.delta.sin_cos();
    let root = (c * c + (1.0 - u) * s * s).sqrt();
    let u_dot_over_e = -c / root;
    let inv_e = |u: f64| if u > 0.0 { s / (u * root) } else { 0.0 };
    let k = inp.camera_velocity;
    let g_cam = g_over_e(k.t, k.s.dot(inp.ex), u * k.s.dot(inp.ey), u, u_dot_over_e, inv_e(u));
    // Only the e-dependent part of l′ survives for emitters without radial motion.
    let g_emit = match inp.emitter {
        Emitter::Static { u: ue } => {
            if !(0.0..1.0).contains(&ue) {
                return Err(domain(format!("static emitter at u = {ue} is not outside the horizon")));
            }
            -1.0 / (1.0 - ue).sqrt()
        }
        Emitter::DiscCircular { u: ue, ez_dot } => {
            if !(0.0..2.0 / 3.0).contains(&ue) {
                return Err(domain(format!("no circular orbit at u = {ue}")));
            }
            let kt = (2.0 / (2.0 - 3.0 * ue)).sqrt();
            let kphi = (ue.powi(3) / (2.0 - 3.0 * ue)).sqrt() * ez_dot;
            -kt - kphi * inv_e(u)
        }
    };
    let d = g_cam / g_emit;
    if !(d > 0.0 && d.is_finite()) {
        return Err(domain(format!("non-positive Doppler factor {d}")));
    }
    Ok(d)
}

/// Solid-angle ratio `Ω/Ω′` from screen derivatives of the camera direction `q` and the
/// escape direction `d′`, clamped to [`MAX_AMPLIFICATION`].
pub fn lensing_amplification(dw_q: Vec3, dh_q: Vec3, dw_d: Vec3, dh_d: Vec3) -> f64 {
    let num = dw_q.cross(dh_q).length();
    let den = dw_d.cross(dh_d).length();
    if !(num.is_finite() && den.is_finite()) {
        return MAX_AMPLIFICATION;
    }
    if den * MAX_AMPLIFICATION <= num {
        return MAX_AMPLIFICATION;
    }
    num / den
}
