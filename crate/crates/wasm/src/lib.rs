//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string; the page parses it and draws the
//! series on a canvas. The plain `*_json` functions hold the logic so they
//! can be tested natively.

use hom_core::detector::{simulate_dip_scan, DetectorConfig, DipScanSpec};
use hom_core::fit::{fit_dip, CurveModel};
use hom_core::polarization::polarized_coincidence;
use hom_core::wavepacket::{dip_probability_with_visibility, WavepacketSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct DipCurve {
    pub x_um: Vec<f64>,
    pub pc: Vec<f64>,
    pub coherence_length_um: f64,
    pub coherence_time_fs: f64,
    pub fwhm_um: f64,
}

#[derive(Serialize)]
pub struct PolarizationCurve {
    pub delta_deg: Vec<f64>,
    pub pc: Vec<f64>,
}

#[derive(Serialize)]
pub struct SimulatedFit {
    pub x_um: Vec<f64>,
    pub counts: Vec<u64>,
    pub fitted: Vec<f64>,
    pub visibility: f64,
    pub visibility_sigma: Option<f64>,
    pub fwhm_um: f64,
    pub center_um: f64,
    pub baseline: f64,
    pub reduced_chi_square: f64,
    pub generated_fwhm_um: f64,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn check_points(points: usize) -> Result<(), String> {
    if (2..=10_000).contains(&points) {
        Ok(())
    } else {
        Err(format!("points must be between 2 and 10000, got {points}"))
    }
}

/// Noise-free dip over ±3 coherence lengths.
pub fn dip_curve_json(
    wavelength_nm: f64,
    bandwidth_nm: f64,
    visibility: f64,
    points: usize,
) -> Result<String, String> {
    check_points(points)?;
    let spec = WavepacketSpec::new(wavelength_nm, bandwidth_nm).map_err(|e| e.to_string())?;
    let lc = spec.coherence_length_um();
    let step = 6.0 * lc / (points - 1) as f64;
    let x_um: Vec<f64> = (0..points).map(|k| -3.0 * lc + step * k as f64).collect();
    let pc = x_um
        .iter()
        .map(|&x| dip_probability_with_visibility(x, lc, visibility))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    to_json(&DipCurve {
        x_um,
        pc,
        coherence_length_um: lc,
        coherence_time_fs: spec.coherence_time_fs(),
        fwhm_um: spec.predicted_dip_fwhm_um(),
    })
}

/// `P_c` against the relative plate angle, from −90° to 90°.
pub fn polarization_curve_json(theta_deg: f64, points: usize) -> Result<String, String> {
    check_points(points)?;
    if !theta_deg.is_finite() {
        return Err("theta must be finite".into());
    }
    let theta = theta_deg.to_radians();
    let step = 180.0 / (points - 1) as f64;
    let delta_deg: Vec<f64> = (0..points).map(|k| -90.0 + step * k as f64).collect();
    let pc = delta_deg
        .iter()
        .map(|d| polarized_coincidence(theta, theta + d.to_radians()))
        .collect();
    to_json(&PolarizationCurve { delta_deg, pc })
}

/// Simulates a default-rate dip scan and fits it.
pub fn simulate_and_fit_json(
    seed: u64,
    visibility: f64,
    bandwidth_nm: f64,
) -> Result<String, String> {
    let spec = DipScanSpec {
        wavepacket: WavepacketSpec::new(810.8, bandwidth_nm).map_err(|e| e.to_string())?,
        visibility,
        ..DipScanSpec::default()
    };
    let cfg = DetectorConfig {
        rng_seed: seed,
        ..DetectorConfig::default()
    };
    let scan = simulate_dip_scan(&spec, &cfg).map_err(|e| e.to_string())?;
    let fit = fit_dip(&scan).map_err(|e| e.to_string())?;
    let fitted = scan
        .axis_values
        .iter()
        .map(|&x| fit.model.value(x))
        .collect();
    to_json(&SimulatedFit {
        fitted,
        visibility: fit.model.visibility,
        visibility_sigma: fit.uncertainty.map(|u| u.visibility),
        fwhm_um: fit.model.width,
        center_um: fit.model.center,
        baseline: fit.model.baseline,
        reduced_chi_square: fit.reduced_chi_square,
        generated_fwhm_um: spec.wavepacket.predicted_dip_fwhm_um(),
        x_um: scan.axis_values,
        counts: scan.coincidences,
    })
}

#[wasm_bindgen]
pub fn dip_curve(
    wavelength_nm: f64,
    bandwidth_nm: f64,
    visibility: f64,
    points: usize,
) -> Result<String, JsError> {
    dip_curve_json(wavelength_nm, bandwidth_nm, visibility, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn polarization_curve(theta_deg: f64, points: usize) -> Result<String, JsError> {
    polarization_curve_json(theta_deg, points).map_err(|e| JsError::new(&e))
}

/// `seed` arrives as a JS number; it is truncated to an integer.
#[wasm_bindgen]
pub fn simulate_and_fit(seed: f64, visibility: f64, bandwidth_nm: f64) -> Result<String, JsError> {
    if !(seed.is_finite() && seed >= 0.0) {
        return Err(JsError::new("seed must be a nonnegative number"));
    }
    simulate_and_fit_json(seed as u64, visibility, bandwidth_nm).map_err(|e| JsError::new(&e))
}
