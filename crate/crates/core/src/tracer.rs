//! Table-driven beam tracing: escape angle and accretion-disc intersections.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geodesic::{apsis_from_e_square, BeamFrame, MU, PHOTON_SPHERE_U};
use crate::math::Vec3;
use crate::tables::mapping::{d_column, Half};
use crate::tables::{clamp_to_table_band, deflection_time, radius_time, DeflectionSample, GeodesicTables, InverseRadiusTable};

/// A crossing of the ray with the disc plane inside the disc band.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiscIntersection {
    /// Emission time relative to reception: minus the light travel time.
    pub t_ret: f64,
    pub u_hit: f64,
    /// Azimuth of the crossing in the beam plane, measured from `ex` towards `ey`.
    pub phi_hit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceResult {
    /// Escape angle `δ′` in the beam plane, or `None` when the ray is captured.
    pub escape_delta: Option<f64>,
    /// Crossing between the camera and the turning point (or infinity, or the horizon).
    pub first: Option<DiscIntersection>,
    /// Crossing beyond the turning point, found through the reflected branch.
    pub mirror: Option<DiscIntersection>,
}

impl TraceResult {
    pub fn captured() -> Self {
        TraceResult::default()
    }

    pub fn escaped(delta: f64) -> Self {
        TraceResult {
            escape_delta: Some(delta),
            ..Default::default()
        }
    }

    pub fn is_captured(&self) -> bool {
        self.escape_delta.is_none()
    }

    pub fn intersections(&self) -> impl Iterator<Item = &DiscIntersection> {
        self.first.iter().chain(self.mirror.iter())
    }

    pub fn hit_count(&self) -> usize {
        self.first.is_some() as usize + self.mirror.is_some() as usize
    }
}

/// Disc band in inverse radius, `u_oc ≤ u ≤ u_ic`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscBand {
    pub u_ic: f64,
    pub u_oc: f64,
}

impl DiscBand {
    pub fn new(u_ic: f64, u_oc: f64) -> Result<Self> {
        if !(0.0 <= u_oc && u_oc <= u_ic && u_ic <= 1.0 / 3.0) {
            return Err(Error::Domain(format!(
                "disc band u_oc = {u_oc}, u_ic = {u_ic} must satisfy 0 ≤ u_oc ≤ u_ic ≤ 1/3"
            )));
        }
        Ok(DiscBand { u_ic, u_oc })
    }

    pub fn contains(&self, u: f64) -> bool {
        self.u_oc <= u && u <= self.u_ic
    }
}

/// Stored (regularized) time and `u` at azimuth `phi`; [`u_time`] converts the time.
fn lookup_u(table: &InverseRadiusTable, e: f64, phi: f64) -> Option<(f64, f64)> {
    if phi > InverseRadiusTable::max_phi(e) {
        return None;
    }
    table.lookup_regularized(e, phi).ok().map(|r| (r.time, r.u))
}

// Coordinate times are only needed for disc crossings, so lookups keep the stored
// time and convert it on demand.
fn u_time(regularized: f64, e: f64, phi: f64) -> f64 {
    if phi == 0.0 || e == 0.0 {
        f64::NEG_INFINITY
    } else {
        radius_time(regularized, e, phi)
    }
}

fn d_time(regularized: f64, e: f64, u: f64) -> f64 {
    if u == 0.0 || e == 0.0 {
        f64::NEG_INFINITY
    } else {
        deflection_time(regularized, e, u)
    }
}

/// Traces the beam of a camera at radius `p_r` with initial angle `delta` and disc angle `alpha`.
pub fn trace_ray(
    p_r: f64,
    delta: f64,
    alpha: f64,
    band: &DiscBand,
    tables: &GeodesicTables,
) -> Result<TraceResult> {
    if !(p_r > 1.0) {
        return Err(Error::Domain(format!("camera radius {p_r} must exceed 1")));
    }
    if !(0.0..=PI).contains(&delta) || !(0.0..PI).contains(&alpha) {
        return Err(Error::Domain(format!("beam angles δ = {delta}, α = {alpha} out of range")));
    }
    if delta == 0.0 {
        return Ok(TraceResult::escaped(0.0));
    }
    if delta == PI {
        return Ok(TraceResult::captured());
    }
    let u = 1.0 / p_r;
    let u_dot = -u / delta.tan();
    let e_square = u_dot * u_dot + u * u * (1.0 - u);
    let scattering = e_square < MU;
    if scattering && u > PHOTON_SPHERE_U {
        return Ok(TraceResult::captured());
    }
    let s = if u_dot >= 0.0 { 1.0 } else { -1.0 };

    let e_table = clamp_to_table_band(e_square);
    let e = e_table.sqrt();
    let col = d_column(e)?;
    let (u_apsis, apsis) = if scattering {
        // The column already holds the apsis unless rounding put e on the other side.
        let ua = if col.half == Half::Scattering { col.u_apsis } else { apsis_from_e_square(e_table)? };
        (ua, Some(tables.deflection.lookup_in_column(&col, ua)?))
    } else {
        (1.0, None)
    };
    let u_cam = u.min(u_apsis);
    let cam = tables.deflection.lookup_in_column(&col, u_cam)?;
    let phi_cam = cam.deflection + if s > 0.0 { PI - delta } else { delta };
    let phi_apsis = apsis.map_or(f64::INFINITY, |a| a.deflection + PI / 2.0);
    // Times of the camera and the turning point, preferably from the same table
    // as the crossings so that interpolation errors largely cancel nearby.
    // Only needed for crossings, so evaluated lazily.
    let t_cam = || {
        lookup_u(&tables.inverse_radius, e, phi_cam).map_or(d_time(cam.time, e, u_cam), |v| u_time(v.0, e, phi_cam))
    };
    let t_a = |a: DeflectionSample| {
        lookup_u(&tables.inverse_radius, e, phi_apsis)
            .map_or(d_time(a.time, e, u_apsis), |v| u_time(v.0, e, phi_apsis))
    };

    let mut phi = phi_cam + s * alpha;

    let mut result = TraceResult::default();
    let phi0 = phi.rem_euclid(PI);
    if phi0 < phi_apsis {
        if let Some((time0, u0)) = lookup_u(&tables.inverse_radius, e, phi0) {
            // Ahead of the camera when reached after it along the branch; compared in φ
            // because u barely moves for small α and the table error could flip its sign.
            if band.contains(u0) && s * (phi0 - phi_cam) >= 0.0 {
                result.first = Some(DiscIntersection {
                    t_ret: (-s * (u_time(time0, e, phi0) - t_cam())).min(0.0),
                    u_hit: u0,
                    phi_hit: alpha + phi - phi0,
                });
            }
        }
    }
    if let (Some(a), true) = (apsis, s > 0.0) {
        phi = 2.0 * phi_apsis - phi;
        let phi1 = phi.rem_euclid(PI);
        if phi1 < phi_apsis {
            if let Some((time1, u1)) = lookup_u(&tables.inverse_radius, e, phi1) {
                if band.contains(u1) {
                    result.mirror = Some(DiscIntersection {
                        t_ret: (t_cam() + u_time(time1, e, phi1) - 2.0 * t_a(a)).min(0.0),
                        u_hit: u1,
                        phi_hit: alpha + phi - phi1,
                    });
                }
            }
        }
    }

    let deflection = if s > 0.0 {
        match apsis {
            Some(a) => 2.0 * a.deflection - cam.deflection,
            None => return Ok(TraceResult { escape_delta: None, ..result }),
        }
    } else {
        cam.deflection
    };
    result.escape_delta = Some(delta + deflection);
    Ok(result)
}

/// Escape direction `cos δ′ ex + sin δ′ ey` of a non-captured trace.
pub fn escape_direction(result: &TraceResult, frame: &BeamFrame) -> Result<Vec3> {
    let d = result
        .escape_delta
        .ok_or_else(|| Error::InvalidBeam("captured ray has no escape direction".into()))?;
    Ok(frame.in_plane(d))
}
