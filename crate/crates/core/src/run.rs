//! Reproducible runs: complete configurations for each kind of output, the
//! files they render to, and the manifest that replays them.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::{
    simulate_dip_scan, simulate_pol_scan, DetectorConfig, ScanRecord, ScanSource,
};
use crate::error::{Error, Result};
use crate::fit::{fit_cosine, fit_dip, fwhm_of_dip, CosineModel, DipModel, FitResult};
use crate::interference::werner_coincidence;
use crate::io::{load_scan, scan_to_csv_string, to_json_string};
use crate::polarization::polarized_coincidence;
use crate::wavepacket::{dip_probability, WavepacketSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a simulated scan depends on, seed included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub scan: ScanSource,
    pub detector: DetectorConfig,
}

impl ScanConfig {
    pub fn seed(&self) -> u64 {
        self.detector.rng_seed
    }

    pub fn simulate(&self) -> Result<ScanRecord> {
        match &self.scan {
            ScanSource::Dip(spec) => simulate_dip_scan(spec, &self.detector),
            ScanSource::Polarization(spec) => simulate_pol_scan(spec, &self.detector),
        }
    }

    /// The CSV and JSON texts of the simulated scan.
    pub fn render(&self) -> Result<RenderedScan> {
        let scan = self.simulate()?;
        Ok(RenderedScan {
            csv: scan_to_csv_string(&scan)?,
            json: to_json_string(&scan)?,
            scan,
        })
    }
}

pub struct RenderedScan {
    pub scan: ScanRecord,
    pub csv: String,
    pub json: String,
}

/// Noise-free coincidence probability curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ProbabilityConfig {
    /// `P_c` against the Werner weight `p` on `points` values in [0, 1].
    Werner { points: usize },
    /// `P_c` against `x₀/ℓ_c` on `points` values in `[−range, range]`.
    Dip {
        wavepacket: WavepacketSpec,
        range: f64,
        points: usize,
    },
    /// `P_c` against `φ − θ` in degrees on `points` values in [−90, 90].
    Polarization { theta_deg: f64, points: usize },
}

fn grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 points, got {points}"
        )));
    }
    let step = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|k| start + step * k as f64).collect())
}

impl ProbabilityConfig {
    /// `(axis, P_c)` rows and the axis column name.
    pub fn table(&self) -> Result<(&'static str, Vec<(f64, f64)>)> {
        match self {
            ProbabilityConfig::Werner { points } => {
                let rows = grid(0.0, 1.0, *points)?
                    .into_iter()
                    .map(|p| Ok((p, werner_coincidence(p)?)))
                    .collect::<Result<_>>()?;
                Ok(("p", rows))
            }
            ProbabilityConfig::Dip {
                wavepacket,
                range,
                points,
            } => {
                let spec = WavepacketSpec::new(
                    wavepacket.center_wavelength_nm,
                    wavepacket.bandwidth_fwhm_nm,
                )?;
                if !(range.is_finite() && *range > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "range must be positive, got {range}"
                    )));
                }
                let lc = spec.coherence_length_um();
                let rows = grid(-range, *range, *points)?
                    .into_iter()
                    .map(|u| Ok((u, dip_probability(u * lc, lc)?)))
                    .collect::<Result<_>>()?;
                Ok(("x0_over_lc", rows))
            }
            ProbabilityConfig::Polarization { theta_deg, points } => {
                if !theta_deg.is_finite() {
                    return Err(Error::NonFinite("waveplate angle"));
                }
                let theta = theta_deg * PI / 180.0;
                let rows = grid(-90.0, 90.0, *points)?
                    .into_iter()
                    .map(|d| (d, polarized_coincidence(theta, theta + d * PI / 180.0)))
                    .collect();
                Ok(("delta_deg", rows))
            }
        }
    }

    pub fn render_csv(&self) -> Result<String> {
        let (axis, rows) = self.table()?;
        let mut out = format!("{axis},coincidence_probability\n");
        for (x, pc) in rows {
            out.push_str(&format!("{x},{pc}\n"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModelKind {
    Dip,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub model: FitModelKind,
    pub input: PathBuf,
}

/// A fit result together with the quantities usually quoted from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitReport {
    Dip {
        /// Full width at half depth, absent when the visibility is 0.
        fwhm: Option<f64>,
        /// `(N_max − N_min)/(N_max + N_min)` of the fitted curve.
        contrast: f64,
        fit: FitResult<DipModel>,
    },
    Cosine {
        fit: FitResult<CosineModel>,
    },
}

impl FitReport {
    pub fn converged(&self) -> bool {
        match self {
            FitReport::Dip { fit, .. } => fit.converged,
            FitReport::Cosine { fit } => fit.converged,
        }
    }

    /// One line per headline quantity.
    pub fn summary(&self) -> String {
        let pm = |v: f64, s: Option<f64>| match s {
            Some(s) if s.is_finite() => format!("{v:.4} ± {s:.4}"),
            _ => format!("{v:.4}"),
        };
        match self {
            FitReport::Dip { fwhm, fit, .. } => {
                let u = fit.uncertainty;
                let mut s = format!(
                    "visibility  {}\nbaseline    {}\ncenter_um   {}\n",
                    pm(fit.model.visibility, u.map(|u| u.visibility)),
                    pm(fit.model.baseline, u.map(|u| u.baseline)),
                    pm(fit.model.center, u.map(|u| u.center)),
                );
                match fwhm {
                    Some(w) => s.push_str(&format!("fwhm_um     {}\n", pm(*w, u.map(|u| u.width)))),
                    None => s.push_str("fwhm_um     undefined (flat scan)\n"),
                }
                s.push_str(&diagnostics(
                    fit.reduced_chi_square,
                    fit.degrees_of_freedom,
                    fit.iterations,
                    fit.converged,
                ));
                s
            }
            FitReport::Cosine { fit } => {
                let u = fit.uncertainty;
                let mut s = format!(
                    "visibility  {}\nceiling     {}\nphase_deg   {}\n",
                    pm(fit.model.visibility, u.map(|u| u.visibility)),
                    pm(fit.model.ceiling, u.map(|u| u.ceiling)),
                    pm(
                        fit.model.phase.to_degrees(),
                        u.map(|u| u.phase.to_degrees())
                    ),
                );
                s.push_str(&diagnostics(
                    fit.reduced_chi_square,
                    fit.degrees_of_freedom,
                    fit.iterations,
                    fit.converged,
                ));
                s
            }
        }
    }
}

fn diagnostics(reduced: f64, dof: usize, iterations: usize, converged: bool) -> String {
    format!(
        "reduced_chi2 {reduced:.3} ({dof} dof)\niterations  {iterations}{}\n",
        if converged { "" } else { " (not converged)" }
    )
}

impl FitConfig {
    pub fn run(&self) -> Result<(ScanRecord, FitReport)> {
        let scan = load_scan(&self.input)?;
        let report = match self.model {
            FitModelKind::Dip => {
                let fit = fit_dip(&scan)?;
                FitReport::Dip {
                    fwhm: fwhm_of_dip(&fit.model).ok(),
                    contrast: fit.model.contrast(),
                    fit,
                }
            }
            FitModelKind::Cosine => FitReport::Cosine {
                fit: fit_cosine(&scan)?,
            },
        };
        Ok((scan, report))
    }
}

/// The configuration of one file-producing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunConfig {
    Simulate(ScanConfig),
    Fit(FitConfig),
    Probability(ProbabilityConfig),
}

impl RunConfig {
    pub fn subcommand(&self) -> &'static str {
        match self {
            RunConfig::Simulate(_) => "simulate",
            RunConfig::Fit(_) => "fit",
            RunConfig::Probability(_) => "probability",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: RunConfig,
    /// Random seed; `None` for runs that draw no random numbers.
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    /// Seconds since the Unix epoch when the run was made.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(config: RunConfig, outputs: Vec<PathBuf>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let seed = match &config {
            RunConfig::Simulate(c) => Some(c.seed()),
            _ => None,
        };
        Self {
            subcommand: config.subcommand().to_string(),
            config,
            seed,
            version: VERSION.to_string(),
            outputs,
            timestamp,
        }
    }

    /// Configuration to replay, with the manifest's seed taking precedence.
    pub fn resolved_config(&self) -> RunConfig {
        let mut cfg = self.config.clone();
        if let (RunConfig::Simulate(c), Some(seed)) = (&mut cfg, self.seed) {
            c.detector.rng_seed = seed;
        }
        cfg
    }
}

/// Manifest path recorded next to output `path`: `name.ext` becomes `name.manifest.json`.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.manifest.json"))
}

/// Renders the outputs of `config`, in the order `outputs` lists them.
///
/// Simulations produce `.csv` and `.json` files; fits produce the report
/// (`.json`) and optionally a re-emitted copy of the input data (`.csv`);
/// probability runs produce one `.csv` table.
pub fn render_outputs(config: &RunConfig, outputs: &[PathBuf]) -> Result<Vec<String>> {
    let ext = |p: &PathBuf| {
        p.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default()
    };
    let unknown =
        |p: &PathBuf| Error::InvalidInput(format!("unsupported output file {}", p.display()));
    match config {
        RunConfig::Simulate(cfg) => {
            let r = cfg.render()?;
            outputs
                .iter()
                .map(|p| match ext(p).as_str() {
                    "csv" => Ok(r.csv.clone()),
                    "json" => Ok(r.json.clone()),
                    _ => Err(unknown(p)),
                })
                .collect()
        }
        RunConfig::Fit(cfg) => {
            let (scan, report) = cfg.run()?;
            outputs
                .iter()
                .map(|p| match ext(p).as_str() {
                    "json" => to_json_string(&report),
                    "csv" => scan_to_csv_string(&scan),
                    _ => Err(unknown(p)),
                })
                .collect()
        }
        RunConfig::Probability(cfg) => {
            let table = cfg.render_csv()?;
            outputs
                .iter()
                .map(|p| match ext(p).as_str() {
                    "csv" => Ok(table.clone()),
                    _ => Err(unknown(p)),
                })
                .collect()
        }
    }
}

/// Writes the outputs of `config` and their manifest; returns the manifest path.
pub fn execute(config: &RunConfig, outputs: Vec<PathBuf>) -> Result<(RunManifest, PathBuf)> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::InvalidInput("a run needs at least one output".into()))?
        .clone();
    let texts = render_outputs(config, &outputs)?;
    for (path, text) in outputs.iter().zip(&texts) {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, text)?;
    }
    let manifest = RunManifest::new(config.clone(), outputs);
    let manifest_path = manifest_path_for(&first);
    std::fs::write(&manifest_path, to_json_string(&manifest)?)?;
    Ok((manifest, manifest_path))
}

/// Paths of a scan's CSV and JSON files for output stem `stem`.
pub fn scan_output_paths(dir: &Path, stem: &str) -> Vec<PathBuf> {
    vec![
        dir.join(format!("{stem}.csv")),
        dir.join(format!("{stem}.json")),
    ]
}

/// Simulates `config` and writes CSV, JSON and manifest into `dir`.
pub fn write_simulation(
    config: &ScanConfig,
    dir: &Path,
    stem: &str,
) -> Result<(RunManifest, PathBuf)> {
    execute(
        &RunConfig::Simulate(config.clone()),
        scan_output_paths(dir, stem),
    )
}

/// Regenerates a manifest's outputs in memory, paired with their paths.
pub fn replay(manifest: &RunManifest) -> Result<Vec<(PathBuf, String)>> {
    let texts = render_outputs(&manifest.resolved_config(), &manifest.outputs)?;
    Ok(manifest.outputs.iter().cloned().zip(texts).collect())
}
