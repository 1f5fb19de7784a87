//! Spectral model: CIE 1931 colour matching, black bodies, and the
//! two-absorption-band spectrum family used for Doppler shifts of arbitrary
//! chromaticities.

use std::sync::OnceLock;

pub const LAMBDA_MIN: f64 = 360.0;
pub const LAMBDA_MAX: f64 = 830.0;
const SAMPLES: usize = 471;

/// Centres and width (nm) of the two absorption bands.
pub const ABSORPTION_CENTERS: [f64; 2] = [480.0, 610.0];
pub const ABSORPTION_WIDTH: f64 = 60.0;

/// Temperatures used for chromaticities far from the Planckian locus are clamped to this range.
pub const CCT_RANGE: (f64, f64) = (1000.0, 40000.0);

fn lobe(lambda: f64, mean: f64, below: f64, above: f64) -> f64 {
    let t = (lambda - mean) / if lambda < mean { below } else { above };
    (-0.5 * t * t).exp()
}

/// Analytic multi-lobe fit of the CIE 1931 2° colour matching functions.
pub fn cie_cmf(lambda: f64) -> [f64; 3] {
    let x = 1.056 * lobe(lambda, 599.8, 37.9, 31.0) + 0.362 * lobe(lambda, 442.0, 16.0, 26.7)
        - 0.065 * lobe(lambda, 501.1, 20.4, 26.2);
    let y = 0.821 * lobe(lambda, 568.8, 46.9, 40.5) + 0.286 * lobe(lambda, 530.9, 16.3, 31.1);
    let z = 1.217 * lobe(lambda, 437.0, 11.8, 36.0) + 0.681 * lobe(lambda, 459.0, 26.0, 13.8);
    [x, y, z]
}

fn cmf_table() -> &'static [[f64; 3]] {
    static T: OnceLock<Vec<[f64; 3]>> = OnceLock::new();
    T.get_or_init(|| (0..SAMPLES).map(|k| cie_cmf(LAMBDA_MIN + k as f64)).collect())
}

/// `∫ f(λ) [x̄, ȳ, z̄](λ) dλ` by the trapezoid rule at 1 nm.
pub fn integrate_xyz(f: impl Fn(f64) -> f64) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for (k, cmf) in cmf_table().iter().enumerate() {
        let w = if k == 0 || k == SAMPLES - 1 { 0.5 } else { 1.0 };
        let v = w * f(LAMBDA_MIN + k as f64);
        for c in 0..3 {
            acc[c] += v * cmf[c];
        }
    }
    acc
}

/// Planck spectral radiance at wavelength `lambda` (nm), in W·sr⁻¹·m⁻²·nm⁻¹.
pub fn planck(lambda: f64, temperature: f64) -> f64 {
    const C1: f64 = 2.0 * 6.626_070_15e-34 * 299_792_458.0 * 299_792_458.0;
    const C2: f64 = 6.626_070_15e-34 * 299_792_458.0 / 1.380_649e-23;
    if temperature <= 0.0 {
        return 0.0;
    }
    let l = lambda * 1e-9;
    1e-9 * C1 / (l.powi(5) * (C2 / (l * temperature)).exp_m1())
}

pub fn blackbody_xyz(temperature: f64) -> [f64; 3] {
    integrate_xyz(|l| planck(l, temperature))
}

pub fn chromaticity(xyz: [f64; 3]) -> Option<(f64, f64)> {
    let s = xyz[0] + xyz[1] + xyz[2];
    (s > 0.0 && s.is_finite()).then(|| (xyz[0] / s, xyz[1] / s))
}

pub fn blackbody_xy(temperature: f64) -> (f64, f64) {
    chromaticity(blackbody_xyz(temperature)).unwrap_or((1.0 / 3.0, 1.0 / 3.0))
}

/// McCamy's cubic approximation of the correlated colour temperature.
pub fn cct_mccamy(x: f64, y: f64) -> f64 {
    let n = (x - 0.3320) / (0.1858 - y);
    449.0 * n.powi(3) + 3525.0 * n * n + 6823.3 * n + 5520.33
}

fn uv(x: f64, y: f64) -> (f64, f64) {
    let d = -2.0 * x + 12.0 * y + 3.0;
    (4.0 * x / d, 6.0 * y / d)
}

/// Correlated colour temperature: McCamy's estimate refined to the nearest point of the
/// Planckian locus in the CIE 1960 uv plane, so locus chromaticities map to their own
/// temperature. Clamped to [`CCT_RANGE`].
pub fn correlated_temperature(x: f64, y: f64) -> f64 {
    let (lo, hi) = (CCT_RANGE.0.ln(), CCT_RANGE.1.ln());
    let seed = cct_mccamy(x, y);
    let seed = if seed.is_finite() && seed > 0.0 { seed.ln().clamp(lo, hi) } else { hi };
    let (tu, tv) = uv(x, y);
    let dist = |lt: f64| {
        let (bx, by) = blackbody_xy(lt.exp());
        let (bu, bv) = uv(bx, by);
        (bu - tu).powi(2) + (bv - tv).powi(2)
    };
    // Golden-section search on ln T around the seed.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((seed - 0.7).max(lo), (seed + 0.7).min(hi));
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (dist(c), dist(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = dist(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = dist(d);
        }
    }
    (0.5 * (a + b)).exp()
}

pub fn absorption(band: usize, lambda: f64) -> f64 {
    let t = (lambda - ABSORPTION_CENTERS[band]) / ABSORPTION_WIDTH;
    (-0.5 * t * t).exp()
}

/// `I(λ) = B_T(λ) (1 − a₁A₁(λ) − a₂A₂(λ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub temperature: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Spectrum {
    pub fn blackbody(temperature: f64) -> Self {
        Spectrum {
            temperature,
            a1: 0.0,
            a2: 0.0,
        }
    }

    pub fn value(&self, lambda: f64) -> f64 {
        planck(lambda, self.temperature) * self.transmission(lambda)
    }

    fn transmission(&self, lambda: f64) -> f64 {
        1.0 - self.a1 * absorption(0, lambda) - self.a2 * absorption(1, lambda)
    }

    pub fn xyz(&self) -> [f64; 3] {
        integrate_xyz(|l| self.value(l))
    }

    /// Received XYZ per unit emitted `X + Y + Z` for Doppler factor `d`:
    /// `D⁵ ∫ I(Dλ) x̄(λ) dλ / ∫ I(λ) (x̄ + ȳ + z̄)(λ) dλ`.
    pub fn shifted_xyz(&self, d: f64) -> [f64; 3] {
        let base = self.xyz();
        let norm = base[0] + base[1] + base[2];
        let shifted = integrate_xyz(|l| self.value(d * l));
        let k = d.powi(5) / norm;
        shifted.map(|v| v * k)
    }

    /// The same spectrum with both absorptions scaled down until it is non-negative.
    pub fn clamped_non_negative(&self) -> Spectrum {
        let m = self.min_transmission();
        if m >= 0.0 {
            return *self;
        }
        let k = 1.0 / (1.0 - m);
        Spectrum {
            a1: self.a1 * k,
            a2: self.a2 * k,
            ..*self
        }
    }

    fn min_transmission(&self) -> f64 {
        (0..SAMPLES)
            .map(|k| self.transmission(LAMBDA_MIN + k as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A spectrum of the family reproducing a chromaticity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumFit {
    pub spectrum: Spectrum,
    /// False when `(x, y)` lies outside the chromaticity triangle or the system is
    /// singular; the spectrum then matches the nearest point inside the triangle.
    pub exact: bool,
    /// False when the absorption bands drive the spectrum negative somewhere.
    pub non_negative: bool,
}

impl SpectrumFit {
    pub fn physical(&self) -> bool {
        self.exact && self.non_negative
    }
}

/// Solves the 2×2 linear system for `(a₁, a₂)` at the correlated colour temperature of `(x, y)`.
pub fn fit_spectrum(x: f64, y: f64) -> SpectrumFit {
    let inside = x >= 0.0 && y > 0.0 && x + y < 1.0;
    let (x, y) = if inside { (x, y) } else { clamp_to_triangle(x, y) };
    let temperature = correlated_temperature(x, y);
    let b = blackbody_xyz(temperature);
    let b1 = integrate_xyz(|l| planck(l, temperature) * absorption(0, l));
    let b2 = integrate_xyz(|l| planck(l, temperature) * absorption(1, l));
    // Chromaticity constraints X − x·S = 0 and Y − y·S = 0, linear in (a₁, a₂).
    let f = |v: [f64; 3]| {
        let s = v[0] + v[1] + v[2];
        [v[0] - x * s, v[1] - y * s]
    };
    let (fb, f1, f2) = (f(b), f(b1), f(b2));
    let det = f1[0] * f2[1] - f1[1] * f2[0];
    let scale = f1[0].abs().max(f1[1].abs()) * f2[0].abs().max(f2[1].abs());
    let solvable = det.abs() > 1e-12 * scale;
    let mut spectrum = Spectrum::blackbody(temperature);
    if solvable {
        spectrum.a1 = (fb[0] * f2[1] - fb[1] * f2[0]) / det;
        spectrum.a2 = (f1[0] * fb[1] - f1[1] * fb[0]) / det;
    }
    SpectrumFit {
        spectrum,
        exact: inside && solvable,
        non_negative: spectrum.min_transmission() >= 0.0,
    }
}

fn clamp_to_triangle(x: f64, y: f64) -> (f64, f64) {
    const EDGE: f64 = 1e-3;
    let x = x.max(EDGE);
    let y = y.max(EDGE);
    let s = x + y;
    if s > 1.0 - EDGE {
        let k = (1.0 - EDGE) / s;
        (x * k, y * k)
    } else {
        (x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cmf_fit_has_expected_peaks() {
        // Well-known CIE 1931 values: ȳ(555) ≈ 1, x̄(600) ≈ 1.06, z̄(445) ≈ 1.78.
        assert!((cie_cmf(555.0)[1] - 1.0).abs() < 0.02);
        assert!((cie_cmf(600.0)[0] - 1.062).abs() < 0.03);
        assert!((cie_cmf(445.0)[2] - 1.78).abs() < 0.06);
    }

    #[test]
    fn planckian_locus_reference_points() {
        // CIE 1931 chromaticities of black bodies at 2856 K (illuminant A) and 6504 K.
        let (x, y) = blackbody_xy(2856.0);
        assert!((x - 0.4476).abs() < 2e-3 && (y - 0.4074).abs() < 2e-3, "{x} {y}");
        let (x, y) = blackbody_xy(6504.0);
        assert!((x - 0.3135).abs() < 2e-3 && (y - 0.3237).abs() < 2e-3, "{x} {y}");
    }

    #[test]
    fn mccamy_near_locus() {
        for t in [3000.0, 5000.0, 6500.0, 9000.0] {
            let (x, y) = blackbody_xy(t);
            let cct = cct_mccamy(x, y);
            assert!((cct / t - 1.0).abs() < 0.03, "{t}: {cct}");
        }
    }

    #[test]
    fn black_body_shift_is_a_temperature_scale() {
        let s = Spectrum::blackbody(5000.0);
        for d in [0.5, 1.3, 2.0] {
            let a = chromaticity(s.shifted_xyz(d)).unwrap();
            let b = blackbody_xy(5000.0 * d);
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
        }
    }

    fn ratio(xyz: [f64; 3]) -> (f64, f64) {
        let s = xyz[0] + xyz[1] + xyz[2];
        (xyz[0] / s, xyz[1] / s)
    }

    #[test]
    fn fit_reproduces_chromaticity() {
        for (x, y) in [(0.3, 0.3), (0.45, 0.41), (0.29, 0.33), (0.2, 0.6), (0.05, 0.05)] {
            let fit = fit_spectrum(x, y);
            assert!(fit.exact, "{x} {y}: {fit:?}");
            let (fx, fy) = ratio(fit.spectrum.xyz());
            assert!((fx - x).abs() < 1e-9 && (fy - y).abs() < 1e-9, "{x} {y}: {fx} {fy}");
        }
        assert!(fit_spectrum(0.45, 0.41).physical());
        assert!(fit_spectrum(0.33, 0.3).physical());
    }

    #[test]
    fn fit_away_from_locus_is_flagged() {
        assert!(!fit_spectrum(0.2, 0.6).non_negative);
        let outside = fit_spectrum(0.6, 0.6);
        assert!(!outside.exact && !outside.physical());
    }

    #[test]
    fn black_body_chromaticities_fit_without_absorption() {
        for t in [2500.0, 4000.0, 6500.0] {
            let (x, y) = blackbody_xy(t);
            let fit = fit_spectrum(x, y);
            assert!(fit.physical());
            assert!(fit.spectrum.a1.abs() < 0.05 && fit.spectrum.a2.abs() < 0.05, "{fit:?}");
        }
    }
}
