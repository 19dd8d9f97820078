//! `hom`: two-photon interference curves, simulated scans and fits.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data, schema or file
//! errors, 3 when a fit does not converge.

mod config_file;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hom_core::detector::{DetectorConfig, DipScanSpec, PolScanSpec, ScanSource};
use hom_core::io::from_json_str;
use hom_core::run::{
    execute, replay, scan_output_paths, FitConfig, FitModelKind, ProbabilityConfig, RunConfig,
    RunManifest, ScanConfig,
};
use hom_core::wavepacket::WavepacketSpec;

#[derive(Parser)]
#[command(
    name = "hom",
    version,
    about = "Hong-Ou-Mandel interference: model curves, simulated scans and fits"
)]
struct Cli {
    /// key = value file of flag defaults; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a noise-free coincidence probability curve.
    #[command(args_override_self = true)]
    Probability(ProbabilityArgs),
    /// Simulate a dip or polarization scan and write CSV, JSON and a manifest.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Fit a scan read from CSV or JSON.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Coherence length, coherence time and predicted dip width of a filter.
    #[command(args_override_self = true)]
    Coherence(CoherenceArgs),
    /// Regenerate the outputs listed in a run manifest.
    #[command(args_override_self = true)]
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Werner,
    Dip,
    Polarization,
}

#[derive(Args)]
struct ProbabilityArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Number of samples [default: 101 werner, 121 dip, 37 polarization].
    #[arg(long)]
    points: Option<usize>,
    /// Centre wavelength in nm (dip mode).
    #[arg(long, default_value_t = 810.8)]
    wavelength: f64,
    /// Filter bandwidth (FWHM) in nm (dip mode).
    #[arg(long, default_value_t = 10.0)]
    bandwidth: f64,
    /// Half-range of x0 in coherence lengths (dip mode).
    #[arg(long, default_value_t = 3.0)]
    range: f64,
    /// Angle of the fixed plate in degrees (polarization mode).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,
    /// Write the table here (with a manifest) instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanKind {
    Dip,
    Pol,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scan: ScanKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Centre wavelength in nm.
    #[arg(long, default_value_t = 810.8)]
    wavelength: f64,
    /// Filter bandwidth (FWHM) in nm.
    #[arg(long, default_value_t = 10.0)]
    bandwidth: f64,
    /// First stage position in um (dip scan).
    #[arg(long, default_value_t = -200.0, allow_negative_numbers = true)]
    start: f64,
    /// Last stage position in um (dip scan).
    #[arg(long, default_value_t = 200.0, allow_negative_numbers = true)]
    stop: f64,
    /// Stage position of zero path difference in um (dip scan).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    center: f64,
    /// First angle of the scanned plate in degrees (polarization scan).
    #[arg(long, default_value_t = -90.0, allow_negative_numbers = true)]
    phi_start: f64,
    /// Last angle of the scanned plate in degrees (polarization scan).
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    phi_stop: f64,
    /// Angle of the fixed plate in degrees (polarization scan).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,
    /// Number of scan points [default: 76 dip, 37 polarization].
    #[arg(long)]
    points: Option<usize>,
    /// Interference visibility [default: 0.93 dip, 0.94 polarization].
    #[arg(long)]
    visibility: Option<f64>,
    /// Coincidences per point for distinguishable photons.
    #[arg(long, default_value_t = 1150.0)]
    ceiling: f64,
    /// Accidental coincidences per point at the configured singles rates.
    #[arg(long, default_value_t = 7.0)]
    accidentals: f64,
    /// Singles per second in each detector.
    #[arg(long, default_value_t = 30_000.0)]
    singles: f64,
    /// Dark counts per second in each detector.
    #[arg(long, default_value_t = 0.0)]
    dark_rate: f64,
    /// Coincidence window in ns.
    #[arg(long, default_value_t = 40.0)]
    window_ns: f64,
    /// Counting time per point in s.
    #[arg(long, default_value_t = 4.0)]
    integration: f64,
    #[arg(long, env = "HOM_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,
    /// Output file stem [default: dip_scan or pol_scan].
    #[arg(long)]
    name: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Dip,
    Cosine,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Scan file; `.json` is read as JSON, anything else as CSV.
    #[arg(long)]
    input: PathBuf,
    /// Fit report path [default: <input stem>.fit.json next to the input].
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the parsed data back out as CSV.
    #[arg(long)]
    emit_csv: Option<PathBuf>,
}

#[derive(Args)]
struct CoherenceArgs {
    /// Centre wavelength in nm.
    #[arg(long, default_value_t = 810.8)]
    wavelength: f64,
    /// Filter bandwidth (FWHM) in nm.
    #[arg(long, default_value_t = 10.0)]
    bandwidth: f64,
}

#[derive(Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Compare against the files on disk instead of overwriting them.
    #[arg(long)]
    check: bool,
}

enum Failure {
    Usage(String),
    Data(String),
    NotConverged,
}

impl Failure {
    fn data(e: impl std::fmt::Display) -> Self {
        Failure::Data(e.to_string())
    }

    fn usage(e: impl std::fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Input validation errors are usage errors; everything else concerns data or files.
fn classify(e: hom_core::Error) -> Failure {
    use hom_core::Error as E;
    match e {
        E::InvalidInput(_) | E::OutOfRange { .. } | E::NonFinite(_) => Failure::usage(e),
        other => Failure::data(other),
    }
}

fn probability(args: ProbabilityArgs) -> Result<(), Failure> {
    let config = match args.mode {
        Mode::Werner => ProbabilityConfig::Werner {
            points: args.points.unwrap_or(101),
        },
        Mode::Dip => ProbabilityConfig::Dip {
            wavepacket: WavepacketSpec::new(args.wavelength, args.bandwidth).map_err(classify)?,
            range: args.range,
            points: args.points.unwrap_or(121),
        },
        Mode::Polarization => ProbabilityConfig::Polarization {
            theta_deg: args.theta,
            points: args.points.unwrap_or(37),
        },
    };
    match args.output {
        None => {
            print!("{}", config.render_csv().map_err(classify)?);
            Ok(())
        }
        Some(path) => {
            config.table().map_err(classify)?;
            let (_, manifest) = execute(&RunConfig::Probability(config), vec![path.clone()])
                .map_err(Failure::data)?;
            eprintln!("wrote {} and {}", path.display(), manifest.display());
            Ok(())
        }
    }
}

fn scan_config(args: &SimulateArgs) -> Result<ScanConfig, Failure> {
    let mut detector = DetectorConfig {
        singles_rate_per_arm: args.singles,
        dark_rate: args.dark_rate,
        coincidence_window_ns: args.window_ns,
        integration_time_s: args.integration,
        rng_seed: args.seed,
        ..DetectorConfig::default()
    };
    detector.validate().map_err(classify)?;
    if !(args.ceiling.is_finite() && args.ceiling >= 0.0) {
        return Err(Failure::Usage(format!(
            "--ceiling must be nonnegative, got {}",
            args.ceiling
        )));
    }
    if !(args.accidentals.is_finite() && args.accidentals >= 0.0) {
        return Err(Failure::Usage(format!(
            "--accidentals must be nonnegative, got {}",
            args.accidentals
        )));
    }
    detector.set_ceiling(args.ceiling);
    detector.calibrate_accidentals(args.accidentals);
    if args.accidentals > 0.0 && detector.accidentals_per_point() == 0.0 {
        return Err(Failure::usage(
            "--accidentals needs nonzero singles rates and window to scale",
        ));
    }

    let scan = match args.scan {
        ScanKind::Dip => ScanSource::Dip(DipScanSpec {
            start_um: args.start,
            stop_um: args.stop,
            n_points: args.points.unwrap_or(76),
            center_um: args.center,
            wavepacket: WavepacketSpec::new(args.wavelength, args.bandwidth).map_err(classify)?,
            visibility: args.visibility.unwrap_or(0.93),
        }),
        ScanKind::Pol => ScanSource::Polarization(PolScanSpec::linspace(
            args.phi_start.to_radians(),
            args.phi_stop.to_radians(),
            args.points.unwrap_or(37),
            args.theta.to_radians(),
            args.visibility.unwrap_or(0.94),
        )),
    };
    let config = ScanConfig { scan, detector };
    config.simulate().map_err(classify)?;
    Ok(config)
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let config = scan_config(&args)?;
    let stem = args.name.clone().unwrap_or_else(|| {
        match args.scan {
            ScanKind::Dip => "dip_scan",
            ScanKind::Pol => "pol_scan",
        }
        .to_string()
    });
    let outputs = scan_output_paths(&args.output_dir, &stem);
    let (_, manifest) =
        execute(&RunConfig::Simulate(config), outputs.clone()).map_err(Failure::data)?;
    for p in outputs.iter().chain([&manifest]) {
        println!("{}", p.display());
    }
    Ok(())
}

fn default_fit_output(input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scan".into());
    input.with_file_name(format!("{stem}.fit.json"))
}

fn fit(args: FitArgs) -> Result<(), Failure> {
    let config = FitConfig {
        model: match args.model {
            ModelArg::Dip => FitModelKind::Dip,
            ModelArg::Cosine => FitModelKind::Cosine,
        },
        input: args.input.clone(),
    };
    let (_, report) = config.run().map_err(Failure::data)?;
    let mut outputs = vec![args
        .output
        .unwrap_or_else(|| default_fit_output(&args.input))];
    outputs.extend(args.emit_csv);
    execute(&RunConfig::Fit(config), outputs.clone()).map_err(Failure::data)?;
    print!("{}", report.summary());
    eprintln!("wrote {}", outputs[0].display());
    if report.converged() {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn coherence(args: CoherenceArgs) -> Result<(), Failure> {
    let spec = WavepacketSpec::new(args.wavelength, args.bandwidth).map_err(classify)?;
    println!("coherence_length_um  {:.4}", spec.coherence_length_um());
    println!("coherence_time_fs    {:.3}", spec.coherence_time_fs());
    println!("dip_fwhm_um          {:.4}", spec.predicted_dip_fwhm_um());
    Ok(())
}

fn rerun(args: RerunArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.manifest)
        .map_err(|e| Failure::Data(format!("{}: {e}", args.manifest.display())))?;
    let manifest: RunManifest = from_json_str(&text).map_err(Failure::data)?;
    let outputs = replay(&manifest).map_err(Failure::data)?;
    let mut mismatched = Vec::new();
    for (path, text) in &outputs {
        if args.check {
            let same = std::fs::read(path)
                .map(|b| b == text.as_bytes())
                .unwrap_or(false);
            if !same {
                mismatched.push(path.display().to_string());
            }
        } else {
            std::fs::write(path, text)
                .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            println!("{}", path.display());
        }
    }
    if !mismatched.is_empty() {
        return Err(Failure::Data(format!(
            "outputs differ: {}",
            mismatched.join(", ")
        )));
    }
    if args.check {
        println!("{} outputs match", outputs.len());
    }
    Ok(())
}

fn run(args: Vec<OsString>) -> Result<(), Failure> {
    let args = config_file::expand(args).map_err(Failure::Usage)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let _ = e.print();
            return Err(Failure::Usage(String::new()));
        }
    };
    match cli.command {
        Command::Probability(a) => probability(a),
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Coherence(a) => coherence(a),
        Command::Rerun(a) => rerun(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged) => {
            eprintln!("error: fit did not converge");
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
