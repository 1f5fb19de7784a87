//! Procedural accretion disc: black-body temperature profile and a density made
//! of linear particles on precessing quasi-circular orbits.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};
use crate::geodesic::ISCO_U;
use crate::shading::spectrum::blackbody_xyz;

/// Inverse radius where `u³(1 − √(3u))` is largest.
pub const PEAK_U: f64 = 12.0 / 49.0;
const PEAK_PROFILE: f64 = (12.0 * 12.0 * 12.0) / (49.0 * 49.0 * 49.0) / 7.0;
const EMISSION_SAMPLES: usize = 1024;

/// Complete elliptic integral of the first kind, `K(κ)`, by the arithmetic–geometric mean.
pub fn elliptic_k(kappa: f64) -> f64 {
    let (mut a, mut b) = (1.0, (1.0 - kappa * kappa).sqrt());
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    PI / (2.0 * a)
}

fn profile(u: f64) -> f64 {
    u.powi(3) * (1.0 - (3.0 * u).sqrt())
}

/// `x` reduced to `[0, 2π)`; `rem_euclid` goes through a slow software `fmod`.
fn wrap_tau(x: f64) -> f64 {
    if !(x.abs() < 1e15) {
        return x.rem_euclid(TAU);
    }
    let a = x - TAU * ((x / TAU) as i64) as f64;
    if a < 0.0 {
        a + TAU
    } else if a >= TAU {
        a - TAU
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscParticle {
    pub u1: f64,
    pub u2: f64,
    pub phi0: f64,
    pub u3: f64,
    pub kappa: f64,
    pub k: f64,
    pub u_mean: f64,
    /// Angular rate `dφ/dt = √(ū³/2)` of the reference point.
    pub omega: f64,
    /// `π √(u3 − u1) / 4K`, the phase rate of the radial oscillation per unit azimuth.
    pub radial_rate: f64,
}

impl DiscParticle {
    pub fn new(u1: f64, u2: f64, phi0: f64) -> Result<Self> {
        if !(0.0 < u1 && u1 <= u2 && u2 <= ISCO_U) {
            return Err(domain(format!("particle orbit bounds {u1}, {u2} must satisfy 0 < u1 ≤ u2 ≤ 1/3")));
        }
        let u3 = 1.0 - u1 - u2;
        let kappa = ((u2 - u1) / (u3 - u1)).sqrt();
        let k = elliptic_k(kappa);
        let u_mean = 0.5 * (u1 + u2);
        Ok(DiscParticle {
            u1,
            u2,
            phi0,
            u3,
            kappa,
            k,
            u_mean,
            omega: (u_mean.powi(3) / 2.0).sqrt(),
            radial_rate: PI / (4.0 * k) * (u3 - u1).sqrt(),
        })
    }

    /// Azimuth of the particle reference point at time `t`.
    pub fn phi(&self, t: f64) -> f64 {
        self.omega * t + self.phi0
    }

    /// Approximate orbit `u(φ)` of a point at total azimuth `phi`.
    pub fn orbit_u(&self, phi: f64) -> f64 {
        let s = (self.radial_rate * phi).sin();
        self.u1 + (self.u2 - self.u1) * s * s
    }

    /// Azimuth period of the radial oscillation.
    pub fn radial_period(&self) -> f64 {
        4.0 * self.k / (self.u3 - self.u1).sqrt()
    }

    /// Density contribution at hit time `t`, radius `r` and azimuth `phi`.
    pub fn density(&self, t: f64, r: f64, phi: f64, falloff: f64) -> f64 {
        let phi_t = self.phi(t);
        let a = wrap_tau(phi - phi_t);
        let u_a = self.orbit_u(a + phi_t);
        let da = a / PI - 1.0;
        let dr = (r - 1.0 / u_a) / falloff;
        let d2 = da * da + dr * dr;
        let v = (1.0 - d2).max(0.0);
        v * v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscModel {
    pub u_ic: f64,
    pub u_oc: f64,
    /// Peak temperature in kelvin.
    pub t_scale: f64,
    particles: Vec<DiscParticle>,
    /// Radial extent of a particle, in units of the horizon radius.
    pub density_falloff: f64,
    /// Emitted XYZ per unit density over `u ∈ [0, 1/3]`, normalized by `Y` at `t_scale`.
    emission: Vec<[f64; 3]>,
    /// Particles whose radial support meets each of [`RADIAL_BUCKETS`] radius bins.
    buckets: Vec<Vec<u32>>,
    bucket_range: (f64, f64),
}

const RADIAL_BUCKETS: usize = 64;

/// Radii outside which a particle's density vanishes.
fn support(p: &DiscParticle, falloff: f64) -> (f64, f64) {
    (1.0 / p.u2 - falloff, 1.0 / p.u1 + falloff)
}

impl DiscModel {
    pub fn new(
        u_ic: f64,
        u_oc: f64,
        t_scale: f64,
        particles: Vec<DiscParticle>,
        density_falloff: f64,
    ) -> Result<Self> {
        if !(0.0 < u_oc && u_oc < u_ic && u_ic <= ISCO_U) {
            return Err(domain(format!("disc band u_oc = {u_oc}, u_ic = {u_ic} must satisfy 0 < u_oc < u_ic ≤ 1/3")));
        }
        if !(t_scale > 0.0 && density_falloff > 0.0) {
            return Err(domain("disc temperature scale and falloff must be positive"));
        }
        let y_peak = blackbody_xyz(t_scale)[1];
        let emission = (0..EMISSION_SAMPLES)
            .map(|i| {
                let u = ISCO_U * i as f64 / (EMISSION_SAMPLES - 1) as f64;
                let t = t_scale * (profile(u).max(0.0) / PEAK_PROFILE).powf(0.25);
                blackbody_xyz(t).map(|v| v / y_peak)
            })
            .collect();
        let bucket_range = (1.0 / u_ic - density_falloff, 1.0 / u_oc + density_falloff);
        let width = (bucket_range.1 - bucket_range.0) / RADIAL_BUCKETS as f64;
        let mut buckets = vec![Vec::new(); RADIAL_BUCKETS];
        for (k, p) in particles.iter().enumerate() {
            let (lo, hi) = support(p, density_falloff);
            let first = ((lo - bucket_range.0) / width).floor().max(0.0) as usize;
            let last = (((hi - bucket_range.0) / width).floor().max(0.0) as usize).min(RADIAL_BUCKETS - 1);
            for b in &mut buckets[first.min(RADIAL_BUCKETS - 1)..=last] {
                b.push(k as u32);
            }
        }
        Ok(DiscModel {
            u_ic,
            u_oc,
            t_scale,
            particles,
            density_falloff,
            emission,
            buckets,
            bucket_range,
        })
    }

    pub fn particles(&self) -> &[DiscParticle] {
        &self.particles
    }

    /// A disc with `count` particles whose bounds are drawn uniformly in the band.
    pub fn generate(seed: u64, count: usize, u_ic: f64, u_oc: f64, t_scale: f64, falloff: f64) -> Result<Self> {
        if !(0.0 < u_oc && u_oc < u_ic && u_ic <= ISCO_U) {
            return Err(domain(format!("disc band u_oc = {u_oc}, u_ic = {u_ic} must satisfy 0 < u_oc < u_ic ≤ 1/3")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let particles = (0..count)
            .map(|_| {
                let a: f64 = rng.random_range(u_oc..=u_ic);
                let b: f64 = rng.random_range(u_oc..=u_ic);
                let phi0 = rng.random_range(0.0..TAU);
                DiscParticle::new(a.min(b), a.max(b), phi0)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(u_ic, u_oc, t_scale, particles, falloff)
    }

    pub fn contains(&self, u: f64) -> bool {
        self.u_oc <= u && u <= self.u_ic
    }

    pub fn temperature(&self, u: f64) -> Result<f64> {
        if !(0.0..=ISCO_U).contains(&u) {
            return Err(domain(format!("no disc temperature at u = {u} outside [0, 1/3]")));
        }
        Ok(self.t_scale * (profile(u).max(0.0) / PEAK_PROFILE).powf(0.25))
    }

    /// Sum of particle densities at an emission event.
    pub fn density(&self, t: f64, r: f64, phi: f64) -> f64 {
        let (lo, hi) = self.bucket_range;
        if !(lo..hi).contains(&r) {
            return 0.0;
        }
        let b = (((r - lo) / (hi - lo) * RADIAL_BUCKETS as f64) as usize).min(RADIAL_BUCKETS - 1);
        self.buckets[b]
            .iter()
            .map(|&k| &self.particles[k as usize])
            .filter(|p| {
                let (a, z) = support(p, self.density_falloff);
                a < r && r < z
            })
            .map(|p| p.density(t, r, phi, self.density_falloff))
            .sum()
    }

    /// Emitted XYZ per unit density at inverse radius `u`.
    pub fn emission(&self, u: f64) -> [f64; 3] {
        if !(0.0..=ISCO_U).contains(&u) {
            return [0.0; 3];
        }
        let f = u / ISCO_U * (EMISSION_SAMPLES - 1) as f64;
        let i = (f as usize).min(EMISSION_SAMPLES - 2);
        let w = f - i as f64;
        let (a, b) = (self.emission[i], self.emission[i + 1]);
        [0, 1, 2].map(|c| a[c] + w * (b[c] - a[c]))
    }

    /// Emitted colour and density at inverse radius `u`, emission time `t` and azimuth `phi`.
    pub fn radiance(&self, u: f64, t: f64, phi: f64) -> ([f64; 3], f64) {
        if !self.contains(u) {
            return ([0.0; 3], 0.0);
        }
        let density = self.density(t, 1.0 / u, phi);
        (self.emission(u).map(|v| v * density), density)
    }
}
