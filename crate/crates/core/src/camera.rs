//! Camera dynamics: a free-falling camera on a timelike geodesic in an inclined
//! orbital plane, and the Lorentz transform from the static frame to the camera frame.

use crate::error::{Error, Result};
use crate::geodesic::{CameraBasis, SchwarzschildPosition};
use crate::math::{Mat4, Vec3};

/// Camera on a timelike geodesic, in polar coordinates `(r, ψ)` of a plane with
/// inclination `χ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitState {
    pub r: f64,
    pub psi: f64,
    pub chi: f64,
    pub t: f64,
    pub dr_dtau: f64,
    pub e: f64,
    pub l: f64,
    pub tau: f64,
}

/// Radial acceleration `d²r/dτ²`.
fn radial_acceleration(r: f64, l: f64) -> f64 {
    let u = 1.0 / r;
    let l2 = l * l;
    (2.0 * l2 * u.powi(3) - 3.0 * l2 * u.powi(4) - u * u) / 2.0
}

/// `(dr/dτ)²` required by the constants of motion at radius `r`.
fn radial_speed_squared(r: f64, e: f64, l: f64) -> f64 {
    let u = 1.0 / r;
    let l2 = l * l;
    e * e + l2 * u.powi(3) - l2 * u * u + u - 1.0
}

/// Initial state from radius `r0`, angle `δ0` between the velocity and the outward
/// radial direction, speed `v0` relative to the static observer, and inclination `χ`.
pub fn orbit_init(r0: f64, delta0: f64, v0: f64, chi: f64) -> Result<OrbitState> {
    if !(r0 > 1.0 && r0.is_finite()) {
        return Err(Error::InvalidInitialCondition(format!("r0 = {r0} is not outside the horizon")));
    }
    if !(0.0..1.0).contains(&v0) {
        return Err(Error::InvalidInitialCondition(format!("speed v0 = {v0} outside [0, 1)")));
    }
    if !(delta0 > 0.0 && delta0 < std::f64::consts::PI) {
        return Err(Error::InvalidInitialCondition(format!("direction δ0 = {delta0} outside (0, π)")));
    }
    if !chi.is_finite() {
        return Err(Error::InvalidInitialCondition(format!("inclination χ = {chi}")));
    }
    let u0 = 1.0 / r0;
    let e2 = (1.0 - u0) / (1.0 - v0 * v0);
    let cot = delta0.cos() / delta0.sin();
    let l2 = (e2 + u0 - 1.0) / (u0 * u0 * (1.0 - u0 + cot * cot));
    if !(l2 >= 0.0) {
        return Err(Error::InvalidInitialCondition(format!("negative l² = {l2}")));
    }
    let (e, l) = (e2.sqrt(), l2.sqrt());
    let speed = radial_speed_squared(r0, e, l).max(0.0).sqrt();
    let dr_dtau = if delta0 == std::f64::consts::FRAC_PI_2 { 0.0 } else { speed.copysign(delta0.cos()) };
    Ok(OrbitState {
        r: r0,
        psi: 0.0,
        chi,
        t: 0.0,
        dr_dtau,
        e,
        l,
        tau: 0.0,
    })
}

impl OrbitState {
    pub fn u(&self) -> f64 {
        1.0 / self.r
    }

    pub fn dt_dtau(&self) -> f64 {
        self.e / (1.0 - self.u())
    }

    pub fn dpsi_dtau(&self) -> f64 {
        self.l * self.u() * self.u()
    }

    /// `(dr/dτ)² − (e² + l²u³ − l²u² + u − 1)`, zero on an exact geodesic.
    pub fn energy_residual(&self) -> f64 {
        self.dr_dtau * self.dr_dtau - radial_speed_squared(self.r, self.e, self.l)
    }

    /// Velocity relative to the static observer, in the `e_r, e_χ, e_ψ` frame.
    pub fn velocity(&self) -> Vec3 {
        let u = self.u();
        let dt = self.dt_dtau();
        Vec3::new(
            self.dr_dtau / ((1.0 - u) * dt),
            0.0,
            self.dpsi_dtau() / (u * (1.0 - u).sqrt() * dt),
        )
    }

    /// Lorentz factor relative to the static observer, `e / √(1 − u)`.
    pub fn gamma(&self) -> f64 {
        self.e / (1.0 - self.u()).sqrt()
    }
}

/// Advances the orbit by proper time `dtau` with a velocity-Verlet step on `r`;
/// `t` and `ψ` follow by the trapezoidal rule.
pub fn orbit_step(s: &OrbitState, dtau: f64) -> Result<OrbitState> {
    if !(dtau > 0.0 && dtau.is_finite()) {
        return Err(Error::Domain(format!("proper time step {dtau} must be positive")));
    }
    if !(s.r > 1.0) {
        return Err(Error::HorizonCrossed { tau: s.tau });
    }
    let half = s.dr_dtau + 0.5 * dtau * radial_acceleration(s.r, s.l);
    let r = s.r + dtau * half;
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::HorizonCrossed { tau: s.tau + dtau });
    }
    let dr_dtau = half + 0.5 * dtau * radial_acceleration(r, s.l);
    let (u0, u1) = (1.0 / s.r, 1.0 / r);
    let t = s.t + 0.5 * dtau * s.e * (1.0 / (1.0 - u0) + 1.0 / (1.0 - u1));
    let psi = s.psi + 0.5 * dtau * s.l * (u0 * u0 + u1 * u1);
    Ok(OrbitState {
        r,
        psi,
        t,
        dr_dtau,
        tau: s.tau + dtau,
        ..*s
    })
}

pub fn schwarzschild_position(s: &OrbitState) -> SchwarzschildPosition {
    let (sp, cp) = s.psi.sin_cos();
    let (sc, cc) = s.chi.sin_cos();
    let theta = (cp * sc).clamp(-1.0, 1.0).acos();
    let phi = sp.atan2(cc * cp);
    SchwarzschildPosition {
        t: s.t,
        r: s.r,
        theta,
        phi,
    }
}

/// User orientation relative to the reference view, which looks at the black hole with
/// `e_h` along the orbit normal (north for a static camera) and `e_w` along the motion.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Orientation {
    /// Turns the view towards `e_w`.
    pub yaw: f64,
    /// Turns the view towards `e_h`.
    pub pitch: f64,
    /// Rotates `e_w` towards `e_h`.
    pub roll: f64,
}

impl Orientation {
    /// Rows `e_w, e_h, e_d` in the `r, χ, ψ` (or `r, θ, φ`) frame.
    pub fn rows(&self) -> [Vec3; 3] {
        let (mut w, mut h, mut d) = (Vec3::Z, -Vec3::Y, Vec3::X);
        // The camera looks along −e_d.
        let (s, c) = self.yaw.sin_cos();
        (w, d) = (w * c + d * s, d * c - w * s);
        let (s, c) = self.pitch.sin_cos();
        (h, d) = (h * c + d * s, d * c - h * s);
        let (s, c) = self.roll.sin_cos();
        (w, h) = (w * c + h * s, h * c - w * s);
        [w, h, d]
    }

    pub fn matrix(&self) -> Mat4 {
        Mat4::from_rotation(self.rows())
    }
}

/// Boost `B(v)` taking the static frame to one moving with velocity `v`: row 0 is the
/// moving observer's 4-velocity.
pub fn boost(v: Vec3) -> Result<Mat4> {
    let v2 = v.dot(v);
    if !(v2 < 1.0) {
        return Err(Error::Superluminal(v2.sqrt()));
    }
    let g = 1.0 / (1.0 - v2).sqrt();
    let c = if v2 > 0.0 { (g - 1.0) / v2 } else { 0.0 };
    let a = v.to_array();
    let mut m = Mat4::IDENTITY;
    m.0[0][0] = g;
    for i in 0..3 {
        m.0[0][i + 1] = g * a[i];
        m.0[i + 1][0] = g * a[i];
        for j in 0..3 {
            m.0[i + 1][j + 1] += c * a[i] * a[j];
        }
    }
    Ok(m)
}

/// `Λ = O·B(v)·R` with its factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzChain {
    pub r: Mat4,
    pub b: Mat4,
    pub o: Mat4,
    pub lambda: Mat4,
    pub v: Vec3,
}

/// Rotation from `e_t, e_r, e_θ, e_φ` to `e_t, e_r, e_χ, e_ψ`, where `e_χ` is the
/// orbit normal chosen to coincide with `e_θ` for an equatorial orbit.
fn orbital_rotation(pos: &SchwarzschildPosition, chi: f64) -> Mat4 {
    let (st, ct) = pos.theta.sin_cos();
    let (sp, cp) = pos.phi.sin_cos();
    let (sc, cc) = chi.sin_cos();
    // e_χ = (sin χ, 0, −cos χ) in Cartesian components.
    let x_theta = sc * ct * cp + cc * st;
    let x_phi = -sc * sp;
    let mut m = Mat4::IDENTITY;
    m.0[2][2] = x_theta;
    m.0[2][3] = x_phi;
    m.0[3][2] = -x_phi;
    m.0[3][3] = x_theta;
    m
}

pub fn lorentz_chain(s: &OrbitState, orientation: &Orientation) -> Result<LorentzChain> {
    let pos = schwarzschild_position(s);
    let r = orbital_rotation(&pos, s.chi);
    let v = s.velocity();
    let b = boost(v)?;
    let o = orientation.matrix();
    Ok(LorentzChain {
        r,
        b,
        o,
        lambda: o.mul(&b).mul(&r),
        v,
    })
}

/// Camera frame of an orbiting camera.
pub fn orbit_camera(s: &OrbitState, orientation: &Orientation, focal_length: f64) -> Result<CameraBasis> {
    let chain = lorentz_chain(s, orientation)?;
    CameraBasis::from_lorentz(schwarzschild_position(s), &chain.lambda, focal_length)
}

/// Camera frame of a static observer.
pub fn static_camera(
    pos: SchwarzschildPosition,
    orientation: &Orientation,
    focal_length: f64,
) -> Result<CameraBasis> {
    CameraBasis::from_lorentz(pos, &orientation.matrix(), focal_length)
}

/// Focal length for a horizontal field of view `fov` on a screen of half-width 1.
pub fn focal_length_for_fov(fov: f64) -> f64 {
    1.0 / (fov / 2.0).tan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec4;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn minkowski(a: Vec4, b: Vec4) -> f64 {
        -a.t * b.t + a.s.dot(b.s)
    }

    fn row(m: &Mat4, i: usize) -> Vec4 {
        Vec4::new(m.0[i][0], Vec3::new(m.0[i][1], m.0[i][2], m.0[i][3]))
    }

    #[test]
    fn circular_orbit_constants() {
        let s = orbit_init(3.0, FRAC_PI_2, 0.5, 0.3).unwrap();
        assert!((s.e * s.e - 8.0 / 9.0).abs() < 1e-14);
        assert!((s.l * s.l - 3.0).abs() < 1e-13);
        assert_eq!(s.dr_dtau, 0.0);
        assert!(radial_acceleration(3.0, s.l).abs() < 1e-15);
        assert!((s.velocity().length() - 0.5).abs() < 1e-14);
        assert!((s.gamma() - 2.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn circular_orbit_is_stable_over_many_steps() {
        let mut s = orbit_init(3.0, FRAC_PI_2, 0.5, 0.0).unwrap();
        for _ in 0..10_000 {
            s = orbit_step(&s, 1e-3).unwrap();
            assert!((s.r - 3.0).abs() < 1e-8);
            assert!(s.energy_residual().abs() < 1e-8);
            let g = 1.0 / (1.0 - s.velocity().dot(s.velocity())).sqrt();
            assert!((s.gamma() - g).abs() < 1e-8);
        }
        assert!((s.tau - 10.0).abs() < 1e-9);
        assert!((s.psi - 10.0 * s.l / 9.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_initial_conditions() {
        assert!(matches!(orbit_init(0.9, 1.0, 0.1, 0.0), Err(Error::InvalidInitialCondition(_))));
        assert!(orbit_init(5.0, 1.0, 1.0, 0.0).is_err());
        assert!(orbit_init(5.0, 0.0, 0.3, 0.0).is_err());
        assert!(orbit_init(5.0, PI, 0.3, 0.0).is_err());
    }

    #[test]
    fn radial_fall_crosses_horizon() {
        let mut s = orbit_init(4.0, FRAC_PI_2, 0.0, 0.0).unwrap();
        assert_eq!(s.l, 0.0);
        assert!((s.e * s.e - 0.75).abs() < 1e-15);
        let mut last = s.r;
        loop {
            match orbit_step(&s, 1e-3) {
                Ok(n) => {
                    assert!(n.r < last);
                    last = n.r;
                    s = n;
                }
                Err(Error::HorizonCrossed { tau }) => {
                    assert!(tau > 0.0);
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn leapfrog_is_second_order() {
        let run = |dtau: f64| {
            let mut s = orbit_init(8.0, 1.2, 0.35, 0.4).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..(20.0 / dtau) as usize {
                s = orbit_step(&s, dtau).unwrap();
                worst = worst.max(s.energy_residual().abs());
            }
            worst
        };
        let (a, b) = (run(0.02), run(0.01));
        assert!(a / b > 3.5 && a / b < 4.5, "{a} {b}");
    }

    #[test]
    fn position_examples() {
        let mut s = orbit_init(5.0, 1.0, 0.2, 0.0).unwrap();
        let p = schwarzschild_position(&s);
        assert_eq!((p.theta, p.phi), (FRAC_PI_2, 0.0));
        s.psi = FRAC_PI_2;
        s.chi = 0.7;
        let p = schwarzschild_position(&s);
        assert!((p.theta - FRAC_PI_2).abs() < 1e-15 && (p.phi - FRAC_PI_2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn position_matches_orbital_plane(psi in -7.0f64..7.0, chi in -3.0f64..3.0, r in 1.5f64..50.0) {
            let mut s = orbit_init(r, 1.0, 0.1, chi).unwrap();
            s.psi = psi;
            let p = schwarzschild_position(&s).cartesian();
            let (sp, cp) = psi.sin_cos();
            let (sc, cc) = chi.sin_cos();
            let q = Vec3::new(cc * cp, sp, sc * cp) * r;
            prop_assert!((p - q).length() < 1e-12 * r);
        }

        #[test]
        fn lorentz_chain_consistency(
            r0 in 2.0f64..30.0, delta in 0.1f64..3.0, v0 in 0.0f64..0.9, chi in -1.5f64..1.5,
            psi in -3.0f64..3.0, yaw in -3.0f64..3.0, pitch in -1.5f64..1.5, roll in -3.0f64..3.0,
        ) {
            let mut s = orbit_init(r0, delta, v0, chi).unwrap();
            s.psi = psi;
            let o = Orientation { yaw, pitch, roll };
            let c = lorentz_chain(&s, &o).unwrap();
            // Λ preserves the Minkowski product.
            let eta = [-1.0, 1.0, 1.0, 1.0];
            for i in 0..4 {
                for j in 0..4 {
                    let p = minkowski(row(&c.lambda, i), row(&c.lambda, j));
                    let expected = if i == j { eta[i] } else { 0.0 };
                    prop_assert!((p - expected).abs() < 1e-10);
                }
            }
            // e_τ is the geodesic 4-velocity (dt/dτ, dx/dτ) in pseudo-Cartesian components.
            let cam = orbit_camera(&s, &o, 1.0).unwrap();
            let (sp, cp) = s.psi.sin_cos();
            let (sc, cc) = s.chi.sin_cos();
            let n = Vec3::new(cc * cp, sp, sc * cp);
            let dn = Vec3::new(-cc * sp, cp, -sc * sp);
            let dx = n * s.dr_dtau + dn * (s.r * s.dpsi_dtau());
            prop_assert!((cam.e_tau.t - s.dt_dtau()).abs() < 1e-10 * s.dt_dtau());
            prop_assert!((cam.e_tau.s - dx).length() < 1e-10 * (1.0 + dx.length()));
        }
    }

    #[test]
    fn static_camera_looks_at_the_hole() {
        let pos = SchwarzschildPosition::new(0.0, 10.0, FRAC_PI_2, 0.0).unwrap();
        let cam = static_camera(pos, &Orientation::default(), 1.0).unwrap();
        // Looking along −e_d = −x, with e_h pointing north (+z) and e_w along +y.
        assert!((cam.e_d.s.normalize() - Vec3::X).length() < 1e-15);
        assert!((cam.e_h.s - Vec3::Z).length() < 1e-15);
        assert!((cam.e_w.s - Vec3::Y).length() < 1e-15);
        let c = lorentz_chain(&orbit_init(10.0, 1.0, 0.0, 0.0).unwrap(), &Orientation::default()).unwrap();
        assert_eq!(c.b, Mat4::IDENTITY);
        let yawed = Orientation { yaw: FRAC_PI_2, ..Default::default() }.rows();
        // A quarter turn right looks along the former e_w.
        assert!((-yawed[2] - Vec3::Z).length() < 1e-15);
    }
}
