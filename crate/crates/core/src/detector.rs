//! Monte Carlo generation of coincidence-count data.
//!
//! A scan point's mean coincidence count is the model coincidence probability
//! mapped onto a count ceiling plus an accidental floor; counts are then drawn
//! from a Poisson distribution. Singles are drawn independently of the scan
//! axis.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with the
//! configured 64-bit seed. Scan point `k` uses ChaCha stream `k`, so every
//! point is reproducible on its own and independent of evaluation order. The
//! timestamp-level [`event_stream`] uses stream `u64::MAX`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::polarization::polarized_coincidence;
use crate::wavepacket::{dip_probability_with_visibility, WavepacketSpec};

/// Accidental coincidences per scan point that the default configuration reproduces.
pub const DEFAULT_ACCIDENTALS_PER_POINT: f64 = 7.0;

/// Coincidence ceiling (counts per point at `P_c = ½`) of the default configuration.
pub const DEFAULT_CEILING_COUNTS: f64 = 1150.0;

const EVENT_STREAM_ID: u64 = u64::MAX;

/// `S_a · S_b · τ`, the rate of chance coincidences between uncorrelated detectors.
///
/// Rates are in counts/s and the window in seconds.
pub fn accidental_rate(singles_a: f64, singles_b: f64, window_s: f64) -> f64 {
    singles_a * singles_b * window_s
}

/// Rates, timing and seed of a two-detector counting setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Photon pairs per second arriving at the beamsplitter.
    pub pair_rate: f64,
    /// Probability that both photons of a pair are detected.
    pub efficiency: f64,
    /// Singles counts per second in each detector, excluding dark counts.
    pub singles_rate_per_arm: f64,
    /// Dark counts per second in each detector.
    pub dark_rate: f64,
    pub coincidence_window_ns: f64,
    /// Counting time per scan point.
    pub integration_time_s: f64,
    /// Multiplies `S_a S_b τ` when predicting accidentals per point. The default
    /// singles and window give 144 accidentals per 4 s point, far above the
    /// few counts observed with this kind of apparatus; the default scale
    /// brings the floor down to [`DEFAULT_ACCIDENTALS_PER_POINT`].
    pub accidental_scale: f64,
    pub rng_seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let mut cfg = Self {
            pair_rate: DEFAULT_CEILING_COUNTS / 4.0,
            efficiency: 1.0,
            singles_rate_per_arm: 30_000.0,
            dark_rate: 0.0,
            coincidence_window_ns: 40.0,
            integration_time_s: 4.0,
            accidental_scale: 1.0,
            rng_seed: 0,
        };
        cfg.calibrate_accidentals(DEFAULT_ACCIDENTALS_PER_POINT);
        cfg
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("pair_rate", self.pair_rate),
            ("singles_rate_per_arm", self.singles_rate_per_arm),
            ("dark_rate", self.dark_rate),
            ("accidental_scale", self.accidental_scale),
        ];
        for (name, value) in nonneg {
            check_range(name, value, 0.0, f64::MAX, "[0, inf)")?;
        }
        check_range("efficiency", self.efficiency, 0.0, 1.0, "[0, 1]")?;
        for (name, value) in [
            ("coincidence_window_ns", self.coincidence_window_ns),
            ("integration_time_s", self.integration_time_s),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    range: "(0, inf)",
                });
            }
        }
        Ok(())
    }

    pub fn window_s(&self) -> f64 {
        self.coincidence_window_ns * 1e-9
    }

    /// Detected pairs per second.
    pub fn detected_pair_rate(&self) -> f64 {
        self.pair_rate * self.efficiency
    }

    /// Mean coincidences per point at `P_c = ½`, excluding accidentals.
    pub fn ceiling_counts(&self) -> f64 {
        self.detected_pair_rate() * self.integration_time_s
    }

    /// Sets the pair rate so that `P_c = ½` maps to `counts` per point.
    pub fn set_ceiling(&mut self, counts: f64) {
        self.pair_rate = counts / (self.efficiency * self.integration_time_s);
    }

    /// Total singles rate per detector including dark counts.
    pub fn total_singles_rate(&self) -> f64 {
        self.singles_rate_per_arm + self.dark_rate
    }

    /// Unscaled accidental rate `S² τ` in counts/s.
    pub fn raw_accidental_rate(&self) -> f64 {
        let s = self.total_singles_rate();
        accidental_rate(s, s, self.window_s())
    }

    /// Predicted accidental coincidences per point, after scaling.
    pub fn accidentals_per_point(&self) -> f64 {
        self.accidental_scale * self.raw_accidental_rate() * self.integration_time_s
    }

    /// Chooses `accidental_scale` so that each point has `counts` accidentals.
    pub fn calibrate_accidentals(&mut self, counts: f64) {
        let raw = self.raw_accidental_rate() * self.integration_time_s;
        self.accidental_scale = if raw > 0.0 { counts / raw } else { 0.0 };
    }
}

/// Mean coincidence count per point for coincidence probability `pc`.
pub fn expected_coincidences(pc: f64, cfg: &DetectorConfig) -> Result<f64> {
    // Probabilities come out of trace products and may overshoot by rounding.
    let pc = check_range(
        "coincidence probability",
        pc,
        -1e-12,
        0.5 + 1e-12,
        "[0, 0.5]",
    )?
    .clamp(0.0, 0.5);
    cfg.validate()?;
    Ok(cfg.ceiling_counts() * 2.0 * pc + cfg.accidentals_per_point())
}

/// Stepper-motor calibration of the translation stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCalibration {
    pub steps_per_point: u32,
    pub displacement_per_step_um: f64,
}

impl Default for StageCalibration {
    /// 4 steps per point, 5.33 μm per 4 steps.
    fn default() -> Self {
        Self {
            steps_per_point: 4,
            displacement_per_step_um: 5.33 / 4.0,
        }
    }
}

impl StageCalibration {
    pub fn point_spacing_um(&self) -> f64 {
        self.steps_per_point as f64 * self.displacement_per_step_um
    }

    pub fn steps_to_um(&self, steps: f64) -> f64 {
        steps * self.displacement_per_step_um
    }

    pub fn um_to_steps(&self, um: f64) -> f64 {
        um / self.displacement_per_step_um
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    /// Stage position in μm.
    StagePositionUm,
    /// Waveplate angle in radians.
    WaveplateAngleRad,
}

impl AxisKind {
    pub fn unit(self) -> &'static str {
        match self {
            AxisKind::StagePositionUm => "um",
            AxisKind::WaveplateAngleRad => "rad",
        }
    }
}

/// A dip scan: stage positions, dip centre and the photons' spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipScanSpec {
    pub start_um: f64,
    pub stop_um: f64,
    pub n_points: usize,
    /// Stage position of zero path difference.
    pub center_um: f64,
    pub wavepacket: WavepacketSpec,
    pub visibility: f64,
}

impl Default for DipScanSpec {
    fn default() -> Self {
        Self {
            start_um: -200.0,
            stop_um: 200.0,
            n_points: 76,
            center_um: 0.0,
            wavepacket: WavepacketSpec::default(),
            visibility: 0.93,
        }
    }
}

impl DipScanSpec {
    pub fn positions(&self) -> Vec<f64> {
        let step = (self.stop_um - self.start_um) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|k| self.start_um + step * k as f64)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::InvalidInput(format!(
                "a scan needs at least 2 points, got {}",
                self.n_points
            )));
        }
        if !(self.start_um.is_finite() && self.stop_um.is_finite() && self.stop_um > self.start_um)
        {
            return Err(Error::InvalidInput(format!(
                "invalid scan range [{}, {}]",
                self.start_um, self.stop_um
            )));
        }
        if !self.center_um.is_finite() {
            return Err(Error::NonFinite("dip centre"));
        }
        WavepacketSpec::new(
            self.wavepacket.center_wavelength_nm,
            self.wavepacket.bandwidth_fwhm_nm,
        )?;
        check_range("visibility", self.visibility, 0.0, 1.0, "[0, 1]")?;
        Ok(())
    }
}

/// A polarization scan: angles of the arm-`y` plate with the arm-`x` plate fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolScanSpec {
    pub phi_values: Vec<f64>,
    pub theta: f64,
    pub visibility: f64,
}

impl PolScanSpec {
    /// `n_points` angles evenly spaced over `[start, stop]`, in radians.
    pub fn linspace(start: f64, stop: f64, n_points: usize, theta: f64, visibility: f64) -> Self {
        let step = if n_points > 1 {
            (stop - start) / (n_points - 1) as f64
        } else {
            0.0
        };
        Self {
            phi_values: (0..n_points).map(|k| start + step * k as f64).collect(),
            theta,
            visibility,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.phi_values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a scan needs at least 2 points, got {}",
                self.phi_values.len()
            )));
        }
        if !self
            .phi_values
            .iter()
            .chain([&self.theta])
            .all(|a| a.is_finite())
        {
            return Err(Error::NonFinite("waveplate angle"));
        }
        check_range("visibility", self.visibility, 0.0, 1.0, "[0, 1]")?;
        Ok(())
    }
}

impl Default for PolScanSpec {
    /// φ from −90° to 90° in 5° steps, θ = 0, v = 0.94.
    fn default() -> Self {
        let deg = std::f64::consts::PI / 180.0;
        Self::linspace(-90.0 * deg, 90.0 * deg, 37, 0.0, 0.94)
    }
}

/// What produced a scan record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanSource {
    Dip(DipScanSpec),
    Polarization(PolScanSpec),
}

/// One scan's counts. Columns are parallel arrays of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub axis_kind: AxisKind,
    pub axis_values: Vec<f64>,
    pub coincidences: Vec<u64>,
    pub singles_a: Vec<u64>,
    pub singles_b: Vec<u64>,
    pub accidental_estimate: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<DetectorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ScanSource>,
}

impl ScanRecord {
    pub fn len(&self) -> usize {
        self.axis_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis_values.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.axis_values.len();
        for len in [
            self.coincidences.len(),
            self.singles_a.len(),
            self.singles_b.len(),
            self.accidental_estimate.len(),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: len,
                });
            }
        }
        if !self.axis_values.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("scan axis"));
        }
        Ok(())
    }
}

/// RNG for scan point `index`.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One Poisson draw; a zero mean gives zero.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    let k: f64 = d.sample(rng);
    k as u64
}

struct PointCounts {
    coincidences: u64,
    singles_a: u64,
    singles_b: u64,
    accidentals: f64,
}

fn sample_point(cfg: &DetectorConfig, index: usize, mean_coincidences: f64) -> PointCounts {
    let mut rng = point_rng(cfg.rng_seed, index as u64);
    let singles_mean = cfg.total_singles_rate() * cfg.integration_time_s;
    let coincidences = sample_poisson(&mut rng, mean_coincidences);
    let singles_a = sample_poisson(&mut rng, singles_mean);
    let singles_b = sample_poisson(&mut rng, singles_mean);
    // Accidentals estimated from this point's measured singles.
    let accidentals = cfg.accidental_scale
        * accidental_rate(singles_a as f64, singles_b as f64, cfg.window_s())
        / cfg.integration_time_s;
    PointCounts {
        coincidences,
        singles_a,
        singles_b,
        accidentals,
    }
}

fn assemble(
    axis_kind: AxisKind,
    axis_values: Vec<f64>,
    means: &[f64],
    cfg: &DetectorConfig,
    source: ScanSource,
) -> ScanRecord {
    let points: Vec<PointCounts> = means
        .iter()
        .enumerate()
        .map(|(k, &m)| sample_point(cfg, k, m))
        .collect();
    ScanRecord {
        axis_kind,
        axis_values,
        coincidences: points.iter().map(|p| p.coincidences).collect(),
        singles_a: points.iter().map(|p| p.singles_a).collect(),
        singles_b: points.iter().map(|p| p.singles_b).collect(),
        accidental_estimate: points.iter().map(|p| p.accidentals).collect(),
        config: Some(cfg.clone()),
        seed: Some(cfg.rng_seed),
        source: Some(source),
    }
}

/// Mean coincidences at each stage position of a dip scan.
pub fn dip_scan_means(spec: &DipScanSpec, cfg: &DetectorConfig) -> Result<Vec<f64>> {
    spec.validate()?;
    let lc = spec.wavepacket.coherence_length_um();
    spec.positions()
        .into_iter()
        .map(|x| {
            let pc = dip_probability_with_visibility(x - spec.center_um, lc, spec.visibility)?;
            expected_coincidences(pc, cfg)
        })
        .collect()
}

/// Simulated coincidence scan across the dip.
pub fn simulate_dip_scan(spec: &DipScanSpec, cfg: &DetectorConfig) -> Result<ScanRecord> {
    cfg.validate()?;
    let means = dip_scan_means(spec, cfg)?;
    Ok(assemble(
        AxisKind::StagePositionUm,
        spec.positions(),
        &means,
        cfg,
        ScanSource::Dip(spec.clone()),
    ))
}

/// Mean coincidences at each waveplate angle of a polarization scan.
///
/// `½(1 − v) + v P_c(θ, φ)`, mapped onto counts, equals
/// `ceiling · [1 − v cos²(2φ − 2θ)]` plus accidentals.
pub fn pol_scan_means(spec: &PolScanSpec, cfg: &DetectorConfig) -> Result<Vec<f64>> {
    spec.validate()?;
    let v = spec.visibility;
    spec.phi_values
        .iter()
        .map(|&phi| {
            let pc = 0.5 * (1.0 - v) + v * polarized_coincidence(spec.theta, phi);
            expected_coincidences(pc.clamp(0.0, 0.5), cfg)
        })
        .collect()
}

/// Simulated coincidence scan over the angle of one half-wave plate.
pub fn simulate_pol_scan(spec: &PolScanSpec, cfg: &DetectorConfig) -> Result<ScanRecord> {
    cfg.validate()?;
    let means = pol_scan_means(spec, cfg)?;
    Ok(assemble(
        AxisKind::WaveplateAngleRad,
        spec.phi_values.clone(),
        &means,
        cfg,
        ScanSource::Polarization(spec.clone()),
    ))
}

/// Detector click times (seconds, sorted) and the windowed coincidence count.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub detector_a: Vec<f64>,
    pub detector_b: Vec<f64>,
    /// Pairs whose photons left through different ports.
    pub split_pairs: u64,
    pub coincidences: u64,
}

fn uniform_times(rng: &mut ChaCha8Rng, rate: f64, duration: f64) -> Vec<f64> {
    let n = sample_poisson(rng, rate * duration);
    (0..n).map(|_| rng.random::<f64>() * duration).collect()
}

/// Rate of uncorrelated clicks per detector so that, with pair photons
/// included, each detector's singles rate matches the configuration.
fn background_rate(pc: f64, cfg: &DetectorConfig) -> f64 {
    let from_pairs = cfg.detected_pair_rate() * (0.5 + pc);
    (cfg.singles_rate_per_arm - from_pairs).max(0.0) + cfg.dark_rate
}

/// Timestamp-level simulation of `duration_s` seconds of counting.
///
/// Pairs arrive as a Poisson process; a fraction `2 pc` leave through
/// different ports and click both detectors at the same instant, the rest
/// click a single detector. Uncorrelated background clicks are added to each
/// detector. Coincidences are counted with a window of total width
/// `coincidence_window_ns` (|t_a − t_b| ≤ τ/2), each click used at most once.
pub fn event_stream(duration_s: f64, pc: f64, cfg: &DetectorConfig) -> Result<EventStream> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::OutOfRange {
            name: "duration",
            value: duration_s,
            range: "(0, inf)",
        });
    }
    check_range("coincidence probability", pc, 0.0, 0.5, "[0, 0.5]")?;
    cfg.validate()?;

    let mut rng = point_rng(cfg.rng_seed, EVENT_STREAM_ID);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut split_pairs = 0;
    for t in uniform_times(&mut rng, cfg.detected_pair_rate(), duration_s) {
        if rng.random::<f64>() < 2.0 * pc {
            split_pairs += 1;
            a.push(t);
            b.push(t);
        } else if rng.random::<bool>() {
            a.push(t);
        } else {
            b.push(t);
        }
    }
    let bg = background_rate(pc, cfg);
    a.extend(uniform_times(&mut rng, bg, duration_s));
    b.extend(uniform_times(&mut rng, bg, duration_s));
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let coincidences = count_coincidences(&a, &b, cfg.window_s());
    Ok(EventStream {
        detector_a: a,
        detector_b: b,
        split_pairs,
        coincidences,
    })
}

/// Greedy one-to-one matching of sorted click times within `|Δt| ≤ window/2`.
pub fn count_coincidences(a: &[f64], b: &[f64], window_s: f64) -> u64 {
    let half = 0.5 * window_s;
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let d = a[i] - b[j];
        if d.abs() <= half {
            count += 1;
            i += 1;
            j += 1;
        } else if d < 0.0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    count
}

/// Mean windowed coincidences [`event_stream`] should produce.
pub fn expected_stream_coincidences(duration_s: f64, pc: f64, cfg: &DetectorConfig) -> f64 {
    let singles = background_rate(pc, cfg) + cfg.detected_pair_rate() * (0.5 + pc);
    cfg.detected_pair_rate() * 2.0 * pc * duration_s
        + accidental_rate(singles, singles, cfg.window_s()) * duration_s
}
