//! Temporal distinguishability: coherence length, Gaussian wavepacket
//! overlap and the resulting coincidence dip.
//!
//! Lengths are in micrometres unless a name says otherwise, wavelengths in
//! nanometres, times in femtoseconds.

use std::f64::consts::{LN_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::werner_coincidence;

/// Vacuum speed of light in μm/fs.
pub const SPEED_OF_LIGHT_UM_PER_FS: f64 = 0.299_792_458;

/// `h c` in eV·nm.
pub const HC_EV_NM: f64 = 1_239.841_984;

/// Relative tolerance of the adaptive quadrature.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Integration half-range beyond the two wavepacket centres, in coherence lengths.
const QUADRATURE_SPAN: f64 = 6.0;
const QUADRATURE_MAX_DEPTH: u32 = 50;

/// Filtered photon spectrum: centre wavelength and FWHM bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    pub center_wavelength_nm: f64,
    pub bandwidth_fwhm_nm: f64,
}

impl Default for WavepacketSpec {
    fn default() -> Self {
        Self {
            center_wavelength_nm: 810.8,
            bandwidth_fwhm_nm: 10.0,
        }
    }
}

impl WavepacketSpec {
    pub fn new(center_wavelength_nm: f64, bandwidth_fwhm_nm: f64) -> Result<Self> {
        validate_spectrum(center_wavelength_nm, bandwidth_fwhm_nm)?;
        Ok(Self {
            center_wavelength_nm,
            bandwidth_fwhm_nm,
        })
    }

    pub fn coherence_length_um(&self) -> f64 {
        self.center_wavelength_nm * self.center_wavelength_nm / self.bandwidth_fwhm_nm / 1_000.0
    }

    pub fn coherence_time_fs(&self) -> f64 {
        self.coherence_length_um() / SPEED_OF_LIGHT_UM_PER_FS
    }

    /// `ΔE = h c Δλ / λ²` in eV.
    pub fn energy_bandwidth_ev(&self) -> f64 {
        HC_EV_NM * self.bandwidth_fwhm_nm / (self.center_wavelength_nm * self.center_wavelength_nm)
    }

    /// Full width at quarter probability of the model dip, `√2 ℓ_c`.
    pub fn predicted_dip_fwhm_um(&self) -> f64 {
        predicted_dip_fwhm(self.coherence_length_um())
    }
}

fn validate_spectrum(lambda_nm: f64, delta_lambda_nm: f64) -> Result<()> {
    if !(lambda_nm.is_finite() && lambda_nm > 0.0) {
        return Err(Error::OutOfRange {
            name: "wavelength",
            value: lambda_nm,
            range: "(0, inf)",
        });
    }
    if !(delta_lambda_nm.is_finite() && delta_lambda_nm > 0.0 && delta_lambda_nm <= lambda_nm) {
        return Err(Error::OutOfRange {
            name: "bandwidth",
            value: delta_lambda_nm,
            range: "(0, wavelength]",
        });
    }
    Ok(())
}

/// `λ² / Δλ` in μm for wavelengths given in nm.
pub fn coherence_length(lambda_nm: f64, delta_lambda_nm: f64) -> Result<f64> {
    Ok(WavepacketSpec::new(lambda_nm, delta_lambda_nm)?.coherence_length_um())
}

/// A path-length difference between the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathDelay {
    pub displacement_um: f64,
}

impl PathDelay {
    pub fn time_delay_fs(&self) -> f64 {
        delay_from_displacement(self.displacement_um)
    }
}

/// Arrival-time difference in fs for a path difference in μm.
pub fn delay_from_displacement(x0_um: f64) -> f64 {
    x0_um / SPEED_OF_LIGHT_UM_PER_FS
}

fn check_lc(lc: f64) -> Result<()> {
    if lc.is_finite() && lc > 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "coherence length",
            value: lc,
            range: "(0, inf)",
        })
    }
}

/// Product of two Gaussians of FWHM `lc`, one centred at 0 and one at `x0`.
fn overlap_integrand(x: f64, x0: f64, lc: f64) -> f64 {
    let k = 4.0 * LN_2 / (lc * lc);
    let prefactor = 2.0 * (2.0 * LN_2 / (lc * PI)).sqrt();
    prefactor * (-k * x * x).exp() * (-k * (x - x0) * (x - x0)).exp()
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureNonConvergence { a, b });
    }
    Ok(
        simpson_refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + simpson_refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` with absolute tolerance `tol`,
/// starting from `panels` equal sub-intervals.
pub fn adaptive_simpson(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    panels: usize,
) -> Result<f64> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let hi = if k + 1 == panels { b } else { lo + h };
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = simpson(fa, fm, fb, lo, hi);
        total += simpson_refine(
            &f,
            lo,
            hi,
            fa,
            fm,
            fb,
            whole,
            tol / panels as f64,
            QUADRATURE_MAX_DEPTH,
        )?;
    }
    Ok(total)
}

fn raw_overlap(x0: f64, lc: f64) -> Result<f64> {
    let lo = x0.min(0.0) - QUADRATURE_SPAN * lc;
    let hi = x0.max(0.0) + QUADRATURE_SPAN * lc;
    // The integral is at most the prefactor times ℓ_c, which fixes the absolute scale.
    let scale = overlap_integrand(0.0, 0.0, lc) * lc;
    adaptive_simpson(
        |x| overlap_integrand(x, x0, lc),
        lo,
        hi,
        QUADRATURE_TOL * scale,
        16,
    )
}

/// Overlap of two Gaussian wavepackets displaced by `x0`, integrated
/// numerically and normalized so that the value at `x0 = 0` is 1.
pub fn overlap_quadrature(x0: f64, lc: f64) -> Result<f64> {
    check_lc(lc)?;
    if !x0.is_finite() {
        return Err(Error::NonFinite("displacement"));
    }
    Ok(raw_overlap(x0, lc)? / raw_overlap(0.0, lc)?)
}

/// Analytic value of the normalized overlap, `exp(−2 ln2 x0² / ℓ_c²)`.
pub fn overlap_closed_form(x0: f64, lc: f64) -> Result<f64> {
    check_lc(lc)?;
    Ok((-2.0 * LN_2 * x0 * x0 / (lc * lc)).exp())
}

/// Coincidence probability at path difference `x0`: the overlap becomes the
/// Werner weight, which is evolved through the beamsplitter.
pub fn dip_probability(x0: f64, lc: f64) -> Result<f64> {
    dip_probability_with_visibility(x0, lc, 1.0)
}

/// As [`dip_probability`] with the Werner weight scaled by `visibility`,
/// giving `½[1 − v p(x0)]`.
pub fn dip_probability_with_visibility(x0: f64, lc: f64, visibility: f64) -> Result<f64> {
    let p = overlap_closed_form(x0, lc)?;
    werner_coincidence(visibility * p)
}

/// Full width of the model dip at `P_c = ¼`.
pub fn predicted_dip_fwhm(lc: f64) -> f64 {
    SQRT_2 * lc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherence_lengths() {
        let l10 = coherence_length(810.8, 10.0).unwrap();
        assert!((l10 - 65.739_664).abs() < 1e-6, "{l10}");
        let l30 = coherence_length(810.8, 30.0).unwrap();
        assert!((l30 - 21.913_221).abs() < 1e-6, "{l30}");
        // λ²/(λ/2) = 2λ, 810.8 nm -> 1.6216 μm
        assert!((coherence_length(810.8, 405.4).unwrap() - 1.6216).abs() < 1e-12);
    }

    #[test]
    fn coherence_length_rejects_bad_inputs() {
        assert!(coherence_length(0.0, 10.0).is_err());
        assert!(coherence_length(810.8, 0.0).is_err());
        assert!(coherence_length(810.8, -3.0).is_err());
        assert!(coherence_length(10.0, 810.8).is_err());
        assert!(coherence_length(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn spec_derived_quantities() {
        let w = WavepacketSpec::default();
        assert!((w.coherence_time_fs() - w.coherence_length_um() / 0.299_792_458).abs() < 1e-12);
        assert!((w.predicted_dip_fwhm_um() - SQRT_2 * w.coherence_length_um()).abs() < 1e-12);
        // 1239.84 * 10 / 810.8² ≈ 18.9 meV
        assert!((w.energy_bandwidth_ev() - 0.018_860).abs() < 1e-5);
    }

    #[test]
    fn delays() {
        assert!((delay_from_displacement(5.33) - 17.7790).abs() < 1e-3);
        assert_eq!(delay_from_displacement(0.0), 0.0);
        assert!((delay_from_displacement(299.792_458) - 1000.0).abs() < 1e-9);
        let d = PathDelay {
            displacement_um: 5.33,
        };
        assert_eq!(d.time_delay_fs(), delay_from_displacement(5.33));
    }

    #[test]
    fn overlap_at_zero_is_one() {
        for lc in [0.5, 21.9, 65.7, 1e4] {
            assert_eq!(overlap_quadrature(0.0, lc).unwrap(), 1.0);
            assert_eq!(overlap_closed_form(0.0, lc).unwrap(), 1.0);
        }
    }

    #[test]
    fn overlap_special_points() {
        let lc = 65.7;
        let at_lc = overlap_quadrature(lc, lc).unwrap();
        assert!((at_lc - 0.25).abs() < 1e-8, "{at_lc}");
        let half = overlap_closed_form(lc / SQRT_2, lc).unwrap();
        assert!((half - 0.5).abs() < 1e-15);
        assert!(overlap_quadrature(20.0 * lc, lc).unwrap() < 1e-100);
    }

    #[test]
    fn overlap_rejects_bad_lc() {
        assert!(overlap_quadrature(1.0, 0.0).is_err());
        assert!(overlap_closed_form(1.0, -1.0).is_err());
        assert!(dip_probability(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn simpson_on_polynomial_and_sine() {
        let cubic = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12, 1).unwrap();
        assert!((cubic - 0.0).abs() < 1e-12);
        let s = adaptive_simpson(f64::sin, 0.0, PI, 1e-12, 4).unwrap();
        assert!((s - 2.0).abs() < 1e-11);
    }

    #[test]
    fn simpson_reports_non_convergence() {
        let err = adaptive_simpson(
            |x| if x > 0.3 { 1.0 / (x - 0.3) } else { 0.0 },
            0.0,
            1.0,
            1e-14,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }

    #[test]
    fn dip_shape() {
        let lc = 65.7;
        assert!(dip_probability(0.0, lc).unwrap().abs() < 1e-12);
        assert!((dip_probability(10.0 * lc, lc).unwrap() - 0.5).abs() < 1e-12);
        let edge = dip_probability(predicted_dip_fwhm(lc) / 2.0, lc).unwrap();
        assert!((edge - 0.25).abs() < 1e-12);
        let v = dip_probability_with_visibility(0.0, lc, 0.93).unwrap();
        assert!((v - 0.5 * (1.0 - 0.93)).abs() < 1e-12);
    }
}
