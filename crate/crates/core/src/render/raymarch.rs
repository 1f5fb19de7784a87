//! Ray-marching baseline: the orbit equation `ü = 3u²/2 − u` stepped in `φ` with a fixed
//! step budget, with the same disc-plane tests as the table tracer.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tracer::{DiscBand, DiscIntersection, TraceResult};

/// Azimuth covered by the full step budget.
pub const MARCH_PHI: f64 = 3.0 * PI;

fn accel(u: f64) -> f64 {
    1.5 * u * u - u
}

fn time_rate(e: f64, u: f64) -> f64 {
    if u > 0.0 {
        e / (u * u * (1.0 - u))
    } else {
        0.0
    }
}

/// Cubic Hermite interpolation of `u` over one step of length `h` at fraction `f`.
fn hermite(u0: f64, w0: f64, u1: f64, w1: f64, h: f64, f: f64) -> f64 {
    let (f2, f3) = (f * f, f * f * f);
    (2.0 * f3 - 3.0 * f2 + 1.0) * u0 + (f3 - 2.0 * f2 + f) * h * w0 + (-2.0 * f3 + 3.0 * f2) * u1 + (f3 - f2) * h * w1
}

/// Traces a beam like [`crate::tracer::trace_ray`], integrating with at most `steps`
/// Störmer–Verlet steps of `MARCH_PHI / steps`.
pub fn raymarch_trace(p_r: f64, delta: f64, alpha: f64, band: &DiscBand, steps: usize) -> Result<TraceResult> {
    if !(p_r > 1.0) || !(0.0..=PI).contains(&delta) || !(0.0..PI).contains(&alpha) {
        return Err(Error::Domain(format!("invalid ray r = {p_r}, δ = {delta}, α = {alpha}")));
    }
    if steps == 0 {
        return Err(Error::Domain("ray marching needs at least one step".into()));
    }
    if delta == 0.0 {
        return Ok(TraceResult::escaped(0.0));
    }
    if delta == PI {
        return Ok(TraceResult::captured());
    }
    let h = MARCH_PHI / steps as f64;
    let mut u = 1.0 / p_r;
    let mut w = -u / delta.tan();
    let e = (w * w + u * u * (1.0 - u)).sqrt();
    let (mut phi, mut t) = (0.0, 0.0);
    let mut next_event = if alpha > 0.0 { alpha } else { PI };
    let mut beyond = false;
    let mut result = TraceResult::default();
    for _ in 0..steps {
        let half = w + 0.5 * h * accel(u);
        let u1 = u + h * half;
        let w1 = half + 0.5 * h * accel(u1);
        let t1 = t + 0.5 * h * (time_rate(e, u) + time_rate(e, u1));
        let phi1 = phi + h;
        while next_event <= phi1 {
            let f = (next_event - phi) / h;
            let ue = hermite(u, w, u1, w1, h, f);
            let turned = beyond || (w > 0.0 && w1 <= 0.0 && w / (w - w1) < f);
            if band.contains(ue) && ue > 0.0 {
                let hit = DiscIntersection {
                    t_ret: -(t + f * (t1 - t)),
                    u_hit: ue,
                    phi_hit: next_event,
                };
                let slot = if turned { &mut result.mirror } else { &mut result.first };
                slot.get_or_insert(hit);
            }
            next_event += PI;
        }
        if w > 0.0 && w1 <= 0.0 {
            beyond = true;
        }
        if u1 >= 1.0 {
            return Ok(TraceResult {
                escape_delta: None,
                ..result
            });
        }
        if u1 <= 0.0 && w1 < 0.0 {
            result.escape_delta = Some(phi + h * u / (u - u1));
            return Ok(result);
        }
        (u, w, t, phi) = (u1, w1, t1, phi1);
    }
    // Out of steps: an outgoing ray is finished as a straight line, anything else is
    // taken as captured.
    if w < 0.0 && u < 1.0 / 3.0 {
        result.escape_delta = Some(phi + u.atan2(-w));
    }
    Ok(result)
}
