//! Non-linear texel mappings for the deflection and inverse-radius tables.
//!
//! The deflection table maps `(e, u)` into `[0,1]²`. Its left half
//! (`s ≤ 1/2`) holds scattering rays (`e² < μ`) and its right half
//! (`s ≥ 1/2`) plunging rays (`e² ≥ μ`). Both halves meet at `s = 1/2`
//! (`e = 0` on the left, `e = ∞` on the right) and concentrate samples near
//! the separatrix `e² = μ`, which sits at `s = 0` and `s = 1`.

use crate::error::{domain, Result};
use crate::geodesic::{apsis_from_e_square, MU, PHOTON_SPHERE_U};

/// Scale of the logarithmic `e` axis.
pub const LOG_SCALE: f64 = 50.0;

fn sqrt_two_thirds() -> f64 {
    (2.0f64 / 3.0).sqrt()
}

fn u_axis_norm() -> f64 {
    sqrt_two_thirds() + (1.0f64 / 3.0).sqrt()
}

/// Which half of the deflection table a motion constant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    Scattering,
    Plunging,
}

impl Half {
    pub fn of(e_square: f64) -> Half {
        if e_square < MU {
            Half::Scattering
        } else {
            Half::Plunging
        }
    }
}

/// Largest `e²` representable on the scattering side (`s = 0`).
pub fn scattering_e_square_limit() -> f64 {
    MU * -(-LOG_SCALE * 0.25).exp_m1()
}

/// Smallest `e²` representable on the plunging side (`s = 1`).
pub fn plunging_e_square_limit() -> f64 {
    MU / -(-LOG_SCALE * 0.25).exp_m1()
}

/// `s` coordinate of the deflection table for a given `e²`.
pub fn d_s_from_e_square(e_square: f64) -> f64 {
    if e_square < MU {
        0.5 - (-(-e_square / MU).ln_1p() / LOG_SCALE).sqrt()
    } else if e_square.is_infinite() {
        0.5
    } else {
        0.5 + (-(-MU / e_square).ln_1p() / LOG_SCALE).sqrt()
    }
}

/// Inverse of [`d_s_from_e_square`]; `half` disambiguates `s = 1/2`.
pub fn d_e_square_from_s(s: f64, half: Half) -> f64 {
    match half {
        Half::Scattering => {
            let x = 0.5 - s;
            MU * -(-LOG_SCALE * x * x).exp_m1()
        }
        Half::Plunging => {
            let x = s - 0.5;
            if x == 0.0 {
                f64::INFINITY
            } else {
                MU / -(-LOG_SCALE * x * x).exp_m1()
            }
        }
    }
}

/// `t` coordinate of the deflection table for inverse radius `u`.
///
/// `u_apsis` is only used on the scattering side.
pub fn d_t_from_u(u: f64, half: Half, u_apsis: f64) -> f64 {
    match half {
        Half::Scattering => {
            if u_apsis <= 0.0 {
                0.0
            } else {
                1.0 - (1.0 - u / u_apsis).max(0.0).sqrt()
            }
        }
        Half::Plunging => {
            let d = u - PHOTON_SPHERE_U;
            let signed = if d >= 0.0 { d.sqrt() } else { -(-d).sqrt() };
            (sqrt_two_thirds() + signed) / u_axis_norm()
        }
    }
}

pub fn d_u_from_t(t: f64, half: Half, u_apsis: f64) -> f64 {
    match half {
        Half::Scattering => {
            let w = 1.0 - t;
            u_apsis * (1.0 - w * w)
        }
        Half::Plunging => {
            let x = t * u_axis_norm() - sqrt_two_thirds();
            PHOTON_SPHERE_U + x * x.abs()
        }
    }
}

/// The deflection-table column of one motion constant: everything [`map_d`] needs
/// that does not depend on `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DColumn {
    pub e: f64,
    pub half: Half,
    pub s: f64,
    /// Apsis of a scattering ray, 0 on the plunging side.
    pub u_apsis: f64,
}

pub fn d_column(e: f64) -> Result<DColumn> {
    if !(e >= 0.0) {
        return Err(domain(format!("motion constant {e} must be non-negative")));
    }
    let e_square = e * e;
    let half = Half::of(e_square);
    let u_apsis = match half {
        Half::Scattering => apsis_from_e_square(e_square)?,
        Half::Plunging => 0.0,
    };
    let mut s = d_s_from_e_square(e_square);
    // Absorb rounding at the band edges.
    if (-1e-12..0.0).contains(&s) {
        s = 0.0;
    } else if (1.0..1.0 + 1e-12).contains(&s) {
        s = 1.0;
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(domain(format!(
            "e² = {e_square} is too close to the separatrix for the table"
        )));
    }
    Ok(DColumn { e, half, s, u_apsis })
}

/// `t` coordinate of inverse radius `u` in column `col`.
pub fn d_column_t(col: &DColumn, u: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(domain(format!("inverse radius {u} outside [0, 1)")));
    }
    let ua = col.u_apsis;
    if col.half == Half::Scattering && u > ua * (1.0 + 1e-12) + 1e-300 {
        return Err(domain(format!("u = {u} is beyond the apsis {ua} of a scattering ray")));
    }
    Ok(d_t_from_u(u, col.half, ua).clamp(0.0, 1.0))
}

/// Maps `(e, u)` to deflection-table texture coordinates.
pub fn map_d(e: f64, u: f64) -> Result<(f64, f64)> {
    let col = d_column(e)?;
    Ok((col.s, d_column_t(&col, u)?))
}

/// Inverse of [`map_d`]. At `s = 1/2` the scattering side (`e = 0`) is returned.
pub fn unmap_d(s: f64, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("texture coordinates ({s}, {t}) outside [0,1]²")));
    }
    let half = if s <= 0.5 {
        Half::Scattering
    } else {
        Half::Plunging
    };
    let e_square = d_e_square_from_s(s, half);
    let u_apsis = match half {
        Half::Scattering => apsis_from_e_square(e_square.min(MU))?,
        Half::Plunging => 0.0,
    };
    Ok((e_square.sqrt(), d_u_from_t(t, half, u_apsis)))
}

pub fn u_s_from_e(e: f64) -> f64 {
    if e.is_infinite() {
        0.0
    } else {
        1.0 / (1.0 + 6.0 * e * e)
    }
}

pub fn u_e_from_s(s: f64) -> f64 {
    if s <= 0.0 {
        f64::INFINITY
    } else {
        ((1.0 / s - 1.0) / 6.0).sqrt()
    }
}

/// Ratio `t / φ` of the inverse-radius table at motion constant `e`.
pub fn u_t_per_phi(e: f64) -> f64 {
    if e.is_infinite() {
        f64::INFINITY
    } else {
        (1.0 + 6.0 * e * e * e) / (3.0 * (1.0 + e * e))
    }
}

/// Maps `(e, φ)` to inverse-radius-table texture coordinates.
pub fn map_u(e: f64, phi: f64) -> Result<(f64, f64)> {
    if !(e >= 0.0) || !e.is_finite() {
        return Err(domain(format!("motion constant {e} must be finite and non-negative")));
    }
    if !(0.0..std::f64::consts::PI).contains(&phi) {
        return Err(domain(format!("azimuth {phi} outside [0, π)")));
    }
    Ok((u_s_from_e(e), phi * u_t_per_phi(e)))
}

pub fn unmap_u(s: f64, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&s) || !(t >= 0.0) {
        return Err(domain(format!("texture coordinates ({s}, {t}) out of range")));
    }
    let e = u_e_from_s(s);
    if e.is_infinite() {
        return Ok((e, 0.0));
    }
    Ok((e, t / u_t_per_phi(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn origin_maps_to_seam() {
        let (s, t) = map_d(0.0, 0.0).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn photon_sphere_row_on_plunging_side() {
        let e = (2.0 * MU).sqrt();
        let (s, t) = map_d(e, 2.0 / 3.0).unwrap();
        assert_abs_diff_eq!(s, 0.5 + ((2.0f64).ln() / 50.0).sqrt(), epsilon = 1e-14);
        let expected = sqrt_two_thirds() / (sqrt_two_thirds() + (1.0f64 / 3.0).sqrt());
        assert_abs_diff_eq!(t, expected, epsilon = 1e-14);
    }

    #[test]
    fn u_mapping_examples() {
        assert_eq!(map_u(0.0, 0.0).unwrap(), (1.0, 0.0));
        assert_eq!(map_u(0.0, 3.0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn out_of_domain_inputs_are_rejected() {
        assert!(map_d(-1.0, 0.1).is_err());
        assert!(map_d(0.1, 1.0).is_err());
        // Beyond the apsis of a scattering ray.
        assert!(map_d(0.2, 0.5).is_err());
        // Inside the unrepresentable band around the separatrix.
        assert!(map_d(MU.sqrt() * (1.0 - 1e-9), 0.1).is_err());
        assert!(map_u(0.1, 4.0).is_err());
    }

    #[test]
    fn band_limits_map_to_edges() {
        assert_abs_diff_eq!(d_s_from_e_square(scattering_e_square_limit()), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d_s_from_e_square(plunging_e_square_limit()), 1.0, epsilon = 1e-9);
    }

    fn domain_point() -> impl Strategy<Value = (f64, f64)> {
        (0.0f64..1.0, 0.0f64..1.0, any::<bool>()).prop_map(|(a, b, scattering)| {
            if scattering {
                let e2 = a * scattering_e_square_limit();
                let ua = apsis_from_e_square(e2).unwrap();
                (e2.sqrt(), b * ua)
            } else {
                // e² from the plunging limit up to ~1e4.
                let e2 = plunging_e_square_limit() * (1.0 + a * 1e5);
                (e2.sqrt(), b * 0.999_999)
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100_000))]

        #[test]
        fn d_mapping_round_trips((e, u) in domain_point()) {
            let (s, t) = map_d(e, u).unwrap();
            prop_assert!((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t));
            let half = Half::of(e * e);
            let e2 = d_e_square_from_s(s, half);
            let ua = if half == Half::Scattering { apsis_from_e_square(e2).unwrap() } else { 0.0 };
            let u2 = d_u_from_t(t, half, ua);
            prop_assert!((e2.sqrt() - e).abs() <= 1e-9 * e.max(1e-3), "e {} vs {}", e, e2.sqrt());
            prop_assert!((u2 - u).abs() <= 1e-9, "u {} vs {}", u, u2);
        }

        #[test]
        fn u_mapping_round_trips(e in 0.0f64..20.0, frac in 0.0f64..1.0) {
            let phi = frac * (1.0 / u_t_per_phi(e)).min(std::f64::consts::PI);
            let (s, t) = map_u(e, phi).unwrap();
            let (e2, phi2) = unmap_u(s, t).unwrap();
            prop_assert!((e2 - e).abs() <= 1e-9 * e.max(1.0));
            prop_assert!((phi2 - phi).abs() <= 1e-9);
        }
    }

    #[test]
    fn d_mapping_is_injective_on_a_grid() {
        // Distinct domain points stay distinct in texture space (up to rounding).
        let mut seen = std::collections::HashSet::new();
        for i in 0..200 {
            let e2 = scattering_e_square_limit() * i as f64 / 199.0;
            let ua = apsis_from_e_square(e2).unwrap();
            for j in 0..50 {
                let u = if i == 0 { 0.0 } else { ua * j as f64 / 49.0 };
                let (s, t) = map_d(e2.sqrt(), u).unwrap();
                let key = ((s * 1e9).round() as i64, (t * 1e9).round() as i64);
                if i == 0 && j > 0 {
                    continue;
                }
                assert!(seen.insert(key), "collision at e²={e2}, u={u}");
            }
        }
    }
}
