use hom_core::detector::{
    dip_scan_means, event_stream, simulate_dip_scan, simulate_pol_scan, DetectorConfig,
    DipScanSpec, PolScanSpec,
};
use hom_core::fit::{fit_cosine, fit_dip, CurveModel, DipModel};
use hom_core::io::{read_scan_csv, read_scan_json, scan_to_csv_string, to_json_string};

fn seeded(seed: u64) -> DetectorConfig {
    DetectorConfig {
        rng_seed: seed,
        ..DetectorConfig::default()
    }
}

#[test]
fn sample_means_converge_to_model_means() {
    let spec = DipScanSpec {
        n_points: 9,
        ..DipScanSpec::default()
    };
    let means = dip_scan_means(&spec, &seeded(0)).unwrap();
    let n = 400;
    let mut sums = vec![0.0; means.len()];
    for seed in 0..n {
        let scan = simulate_dip_scan(&spec, &seeded(seed)).unwrap();
        for (s, &c) in sums.iter_mut().zip(&scan.coincidences) {
            *s += c as f64;
        }
    }
    for (s, m) in sums.iter().zip(&means) {
        let sample = s / n as f64;
        assert!(
            (sample - m).abs() < 3.0 * (m / n as f64).sqrt() + 1e-9,
            "{sample} vs {m}"
        );
    }
}

#[test]
fn dip_fits_cover_the_generating_visibility() {
    let spec = DipScanSpec::default();
    let cfg = DetectorConfig::default();
    // The accidental floor is absorbed into the baseline, so the fitted v
    // estimates the floor-diluted contrast.
    let ceiling = cfg.ceiling_counts();
    let effective_v = spec.visibility * ceiling / (ceiling + cfg.accidentals_per_point());
    let runs = 100;
    let mut covered = 0;
    for seed in 0..runs {
        let fit = fit_dip(&simulate_dip_scan(&spec, &seeded(seed)).unwrap()).unwrap();
        assert!(fit.converged);
        let sigma = fit.uncertainty.unwrap().visibility;
        if (fit.model.visibility - effective_v).abs() <= 3.0 * sigma {
            covered += 1;
        }
    }
    assert!(covered as f64 >= 0.95 * runs as f64, "{covered}/{runs}");
}

#[test]
fn cosine_fit_of_default_scan() {
    let scan = simulate_pol_scan(&PolScanSpec::default(), &seeded(3)).unwrap();
    let fit = fit_cosine(&scan).unwrap();
    assert!((fit.model.visibility - 0.94).abs() < 0.02);
    assert!(fit.model.phase.abs() < 0.02);
    assert!((0.4..2.0).contains(&fit.reduced_chi_square));
    // Maxima of the scan sit at ±45°.
    let max_at = |range: std::ops::Range<usize>| {
        range
            .max_by_key(|&i| scan.coincidences[i])
            .map(|i| scan.axis_values[i].to_degrees())
            .unwrap()
    };
    assert!((max_at(0..18) + 45.0).abs() <= 10.0);
    assert!((max_at(19..37) - 45.0).abs() <= 10.0);
}

#[test]
fn fitting_is_translation_invariant() {
    let scan = simulate_dip_scan(&DipScanSpec::default(), &seeded(11)).unwrap();
    let mut shifted = scan.clone();
    for x in &mut shifted.axis_values {
        *x += 250.0;
    }
    let a = fit_dip(&scan).unwrap().model;
    let b = fit_dip(&shifted).unwrap().model;
    assert!((b.center - a.center - 250.0).abs() < 1e-6);
    assert!((a.visibility - b.visibility).abs() < 1e-8);
    assert!((a.width - b.width).abs() < 1e-6);
}

#[test]
fn fit_minimizes_weighted_residuals() {
    let scan = simulate_dip_scan(&DipScanSpec::default(), &seeded(5)).unwrap();
    let fit = fit_dip(&scan).unwrap();
    let cost = |m: &DipModel| -> f64 {
        scan.axis_values
            .iter()
            .zip(&scan.coincidences)
            .map(|(&x, &c)| {
                let s = (c as f64).max(1.0);
                (c as f64 - m.value(x)).powi(2) / s
            })
            .sum()
    };
    let best = cost(&fit.model);
    assert!((best - fit.chi_square).abs() < 1e-9 * best);
    let p = fit.model.params();
    for j in 0..p.len() {
        for h in [-1e-3, 1e-3] {
            let mut q = p.clone();
            q[j] += h * fit.model.scales()[j];
            assert!(cost(&DipModel::from_params(&q)) >= best);
        }
    }
}

#[test]
fn simulated_scans_round_trip_through_files() {
    let scan = simulate_dip_scan(&DipScanSpec::default(), &seeded(9)).unwrap();
    let csv = scan_to_csv_string(&scan).unwrap();
    let parsed = read_scan_csv(csv.as_bytes()).unwrap();
    assert_eq!(parsed.axis_values, scan.axis_values);
    assert_eq!(parsed.coincidences, scan.coincidences);
    assert_eq!(parsed.accidental_estimate, scan.accidental_estimate);
    assert_eq!(scan_to_csv_string(&parsed).unwrap(), csv);
    assert_eq!(fit_dip(&parsed).unwrap(), fit_dip(&scan).unwrap());

    let json = to_json_string(&scan).unwrap();
    assert_eq!(read_scan_json(json.as_bytes()).unwrap(), scan);
}

#[test]
fn event_stream_limits() {
    // Every pair split, no background: one coincidence per split pair.
    let cfg = DetectorConfig {
        singles_rate_per_arm: 0.0,
        rng_seed: 4,
        ..DetectorConfig::default()
    };
    let s = event_stream(10.0, 0.5, &cfg).unwrap();
    assert_eq!(s.coincidences, s.split_pairs);
    let n = cfg.detected_pair_rate() * 10.0;
    assert!((s.coincidences as f64 - n).abs() < 5.0 * n.sqrt());
}
