//! Weighted nonlinear least squares for coincidence scans.
//!
//! Both models are fitted with a damped Gauss-Newton (Levenberg-Marquardt)
//! iteration using Poisson weights `σᵢ = √max(countᵢ, 1)`. Zero-count bins are
//! kept.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::detector::{AxisKind, ScanRecord};
use crate::error::{Error, Result};

/// Minimum number of points accepted by the scan fitters.
pub const MIN_POINTS: usize = 8;

/// `(N_max − N_min) / (N_max + N_min)`.
pub fn visibility(n_max: f64, n_min: f64) -> Result<f64> {
    if !(n_max.is_finite() && n_min.is_finite() && n_max > 0.0 && n_min >= 0.0 && n_max >= n_min) {
        return Err(Error::InvalidInput(format!(
            "visibility needs n_max >= n_min >= 0 and n_max > 0, got ({n_max}, {n_min})"
        )));
    }
    Ok((n_max - n_min) / (n_max + n_min))
}

/// `Σ (rᵢ/σᵢ)² / (n − n_params)`.
pub fn reduced_chi_square(residuals: &[f64], sigmas: &[f64], n_params: usize) -> Result<f64> {
    if residuals.len() != sigmas.len() {
        return Err(Error::DimensionMismatch {
            left: residuals.len(),
            right: sigmas.len(),
        });
    }
    if residuals.len() <= n_params {
        return Err(Error::InvalidInput(format!(
            "{} points leave no degrees of freedom for {n_params} parameters",
            residuals.len()
        )));
    }
    Ok(chi_square(residuals, sigmas) / (residuals.len() - n_params) as f64)
}

fn chi_square(residuals: &[f64], sigmas: &[f64]) -> f64 {
    residuals
        .iter()
        .zip(sigmas)
        .map(|(r, s)| (r / s) * (r / s))
        .sum()
}

/// Poisson standard deviation used as a fit weight.
pub fn poisson_sigma(count: f64) -> f64 {
    count.max(1.0).sqrt()
}

/// A parametric curve `y = f(x; p)`.
pub trait CurveModel: Sized {
    const PARAM_NAMES: &'static [&'static str];

    fn from_params(p: &[f64]) -> Self;
    fn params(&self) -> Vec<f64>;
    fn value(&self, x: f64) -> f64;

    /// `∂f/∂pⱼ` at `x`.
    fn gradient(&self, x: f64) -> Vec<f64>;

    /// Typical magnitude of each parameter, used for relative step sizes.
    fn scales(&self) -> Vec<f64>;
}

/// Inverted Gaussian `N_max [1 − v exp(−4 ln2 (x − x_c)² / w²)]`; `w` is the dip's FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipModel {
    pub baseline: f64,
    pub visibility: f64,
    pub center: f64,
    pub width: f64,
}

impl DipModel {
    /// Count level at the dip centre, `N_max (1 − v)`.
    pub fn minimum(&self) -> f64 {
        self.baseline * (1.0 - self.visibility)
    }

    /// `(N_max − N_min)/(N_max + N_min)` of the curve, which is `v / (2 − v)`.
    pub fn contrast(&self) -> f64 {
        self.visibility / (2.0 - self.visibility)
    }
}

impl CurveModel for DipModel {
    const PARAM_NAMES: &'static [&'static str] = &["baseline", "visibility", "center", "width"];

    fn from_params(p: &[f64]) -> Self {
        Self {
            baseline: p[0],
            visibility: p[1],
            center: p[2],
            width: p[3],
        }
    }

    fn params(&self) -> Vec<f64> {
        vec![self.baseline, self.visibility, self.center, self.width]
    }

    fn value(&self, x: f64) -> f64 {
        let u = x - self.center;
        let g = (-4.0 * LN_2 * u * u / (self.width * self.width)).exp();
        self.baseline * (1.0 - self.visibility * g)
    }

    fn gradient(&self, x: f64) -> Vec<f64> {
        let u = x - self.center;
        let w2 = self.width * self.width;
        let g = (-4.0 * LN_2 * u * u / w2).exp();
        let depth = self.baseline * self.visibility * g;
        vec![
            1.0 - self.visibility * g,
            -self.baseline * g,
            -depth * 8.0 * LN_2 * u / w2,
            -depth * 8.0 * LN_2 * u * u / (w2 * self.width),
        ]
    }

    fn scales(&self) -> Vec<f64> {
        let w = self.width.abs().max(f64::MIN_POSITIVE);
        vec![self.baseline.abs().max(1.0), 1.0, w, w]
    }
}

/// `A [1 − v cos²(2φ − 2θ₀)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineModel {
    pub ceiling: f64,
    pub visibility: f64,
    pub phase: f64,
}

impl CurveModel for CosineModel {
    const PARAM_NAMES: &'static [&'static str] = &["ceiling", "visibility", "phase"];

    fn from_params(p: &[f64]) -> Self {
        Self {
            ceiling: p[0],
            visibility: p[1],
            phase: p[2],
        }
    }

    fn params(&self) -> Vec<f64> {
        vec![self.ceiling, self.visibility, self.phase]
    }

    fn value(&self, phi: f64) -> f64 {
        let c = (2.0 * phi - 2.0 * self.phase).cos();
        self.ceiling * (1.0 - self.visibility * c * c)
    }

    fn gradient(&self, phi: f64) -> Vec<f64> {
        let s = 2.0 * phi - 2.0 * self.phase;
        let c = s.cos();
        vec![
            1.0 - self.visibility * c * c,
            -self.ceiling * c * c,
            -self.ceiling * self.visibility * 2.0 * (2.0 * s).sin(),
        ]
    }

    fn scales(&self) -> Vec<f64> {
        vec![self.ceiling.abs().max(1.0), 1.0, 1.0]
    }
}

/// Fitted parameters with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<M> {
    pub model: M,
    /// One-standard-deviation uncertainties from the inverse curvature matrix;
    /// absent when that matrix is singular.
    pub uncertainty: Option<M>,
    pub chi_square: f64,
    pub reduced_chi_square: f64,
    pub degrees_of_freedom: usize,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Jᵀ W r‖₂` at the returned parameters.
    pub gradient_norm: f64,
    pub residuals: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when every accepted step is below this fraction of the parameter scale.
    pub relative_step_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            relative_step_tol: 1e-8,
            initial_damping: 1e-3,
        }
    }
}

struct LmOutcome {
    params: Vec<f64>,
    iterations: usize,
    converged: bool,
    covariance: Option<DMatrix<f64>>,
    gradient_norm: f64,
}

fn weighted_cost<M: CurveModel>(p: &[f64], x: &[f64], y: &[f64], sigma: &[f64]) -> f64 {
    let m = M::from_params(p);
    x.iter()
        .zip(y)
        .zip(sigma)
        .map(|((&xi, &yi), &si)| {
            let r = (yi - m.value(xi)) / si;
            r * r
        })
        .sum()
}

/// Weighted Jacobian and residual vector restricted to the free parameters.
fn linearize<M: CurveModel>(
    p: &[f64],
    free: &[usize],
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let m = M::from_params(p);
    let mut jac = DMatrix::zeros(x.len(), free.len());
    let mut r = DVector::zeros(x.len());
    for (i, ((&xi, &yi), &si)) in x.iter().zip(y).zip(sigma).enumerate() {
        r[i] = (yi - m.value(xi)) / si;
        let g = m.gradient(xi);
        for (col, &j) in free.iter().enumerate() {
            jac[(i, col)] = g[j] / si;
        }
    }
    (jac, r)
}

fn levenberg_marquardt<M: CurveModel>(
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    start: &[f64],
    free: &[usize],
    opts: LmOptions,
) -> LmOutcome {
    let mut p = start.to_vec();
    let mut cost = weighted_cost::<M>(&p, x, y, sigma);
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let (jac, r) = linearize::<M>(&p, free, x, y, sigma);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let diag_floor = jtj.diagonal().max() * 1e-15;
        let scales = M::from_params(&p).scales();

        loop {
            let mut damped = jtj.clone();
            for k in 0..free.len() {
                damped[(k, k)] += lambda * jtj[(k, k)].max(diag_floor);
            }
            let step = damped
                .clone()
                .cholesky()
                .map(|c| c.solve(&jtr))
                .or_else(|| damped.lu().solve(&jtr));
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break 'outer;
                }
                continue;
            };
            let mut trial = p.clone();
            for (k, &j) in free.iter().enumerate() {
                trial[j] += step[k];
            }
            let trial_cost = weighted_cost::<M>(&trial, x, y, sigma);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small = free
                    .iter()
                    .enumerate()
                    .all(|(k, &j)| step[k].abs() <= opts.relative_step_tol * scales[j]);
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                if small {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No descent direction left: p is a minimum to working precision.
                converged = true;
                break 'outer;
            }
        }
    }

    let (jac, r) = linearize::<M>(&p, free, x, y, sigma);
    let jtj = jac.transpose() * &jac;
    let gradient_norm = (jac.transpose() * r).norm();
    LmOutcome {
        params: p,
        iterations,
        converged,
        covariance: jtj.try_inverse(),
        gradient_norm,
    }
}

fn finish<M: CurveModel>(
    outcome: LmOutcome,
    free: &[usize],
    x: &[f64],
    y: &[f64],
    sigmas: Vec<f64>,
    mut warnings: Vec<String>,
) -> Result<FitResult<M>> {
    let model = M::from_params(&outcome.params);
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| yi - model.value(xi))
        .collect();
    let n_params = free.len();
    let chi2 = chi_square(&residuals, &sigmas);
    let reduced = reduced_chi_square(&residuals, &sigmas, n_params)?;
    let uncertainty = outcome.covariance.and_then(|cov| {
        let mut sd = vec![0.0; outcome.params.len()];
        for (k, &j) in free.iter().enumerate() {
            let var = cov[(k, k)];
            if !(var.is_finite() && var >= 0.0) {
                return None;
            }
            sd[j] = var.sqrt();
        }
        Some(M::from_params(&sd))
    });
    if uncertainty.is_none() {
        warnings.push("curvature matrix is singular; no uncertainties".into());
    }
    if !outcome.converged {
        warnings.push(format!(
            "did not converge in {} iterations; returning best iterate",
            outcome.iterations
        ));
    }
    Ok(FitResult {
        model,
        uncertainty,
        chi_square: chi2,
        reduced_chi_square: reduced,
        degrees_of_freedom: x.len() - n_params,
        iterations: outcome.iterations,
        converged: outcome.converged,
        gradient_norm: outcome.gradient_norm,
        residuals,
        sigmas,
        warnings,
    })
}

fn check_data(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < MIN_POINTS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_POINTS} points, got {}",
            x.len()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("fit abscissa"));
    }
    if !y.iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(Error::InvalidInput(
            "counts must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

/// Mean of the largest quarter of the values.
fn top_quartile_mean(y: &[f64]) -> f64 {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = sorted.len().div_ceil(4);
    sorted[..k].iter().sum::<f64>() / k as f64
}

fn argmin(y: &[f64]) -> usize {
    y.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty")
}

fn argmax(y: &[f64]) -> usize {
    y.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("non-empty")
}

/// Sort order of the abscissa, so crossings can be searched along the axis.
fn sorted_by_x(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    (
        idx.iter().map(|&i| x[i]).collect(),
        idx.iter().map(|&i| y[i]).collect(),
    )
}

/// Starting point for a dip fit: baseline from the top quartile, centre at the
/// minimum, visibility from the extreme counts and width from the half-depth
/// crossings.
pub fn initial_dip_guess(x: &[f64], y: &[f64]) -> DipModel {
    let (xs, ys) = sorted_by_x(x, y);
    let baseline = top_quartile_mean(&ys);
    let i_min = argmin(&ys);
    let y_min = ys[i_min];
    let vis = visibility(baseline.max(y_min).max(1e-300), y_min).unwrap_or(0.0);
    let half = 0.5 * (baseline + y_min);

    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = i_min;
        for i in range {
            if ys[i] >= half {
                let (x0, y0, x1, y1) = (xs[prev], ys[prev], xs[i], ys[i]);
                let t = if y1 > y0 {
                    (half - y0) / (y1 - y0)
                } else {
                    0.0
                };
                return Some(x0 + t * (x1 - x0));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..i_min).rev());
    let right = crossing(&mut (i_min + 1..ys.len()));
    let center = xs[i_min];
    let span = xs[xs.len() - 1] - xs[0];
    let width = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (center - l),
        (None, Some(r)) => 2.0 * (r - center),
        (None, None) => 0.25 * span,
    };
    let spacing = span / (xs.len() - 1) as f64;
    DipModel {
        baseline,
        visibility: vis,
        center,
        width: width.max(spacing),
    }
}

/// Fits the inverted-Gaussian dip model to counts `y` at stage positions `x`.
///
/// A scan whose fitted visibility is not at least three standard deviations
/// from zero, or whose fitted width is not within the scanned span, is
/// treated as flat: the visibility is pinned to 0 and only the baseline is
/// reported.
pub fn fit_dip_data(x: &[f64], y: &[f64]) -> Result<FitResult<DipModel>> {
    check_data(x, y)?;
    let sigmas: Vec<f64> = y.iter().map(|&c| poisson_sigma(c)).collect();
    let guess = initial_dip_guess(x, y);
    let all = [0, 1, 2, 3];
    let outcome =
        levenberg_marquardt::<DipModel>(x, y, &sigmas, &guess.params(), &all, LmOptions::default());
    let mut fit = finish::<DipModel>(outcome, &all, x, y, sigmas.clone(), Vec::new())?;
    fit.model.width = fit.model.width.abs();
    if let Some(u) = fit.uncertainty.as_mut() {
        u.width = u.width.abs();
    }

    let span =
        x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
    let significant = fit
        .uncertainty
        .map(|u| fit.model.visibility > 3.0 * u.visibility)
        .unwrap_or(false);
    if significant && fit.model.width > 0.0 && fit.model.width <= 2.0 * span {
        return Ok(fit);
    }

    // Flat scan: fit baseline and visibility with the shape held at the
    // initial guess to get a visibility uncertainty, then report v = 0.
    log::warn!("flat dip scan; visibility pinned to 0");
    let shape = [0, 1];
    let outcome = levenberg_marquardt::<DipModel>(
        x,
        y,
        &sigmas,
        &guess.params(),
        &shape,
        LmOptions::default(),
    );
    let v_sigma = outcome
        .covariance
        .as_ref()
        .map(|c| c[(1, 1)].max(0.0).sqrt())
        .unwrap_or(f64::NAN);
    let baseline_only = [0];
    let mut start = guess.params();
    start[1] = 0.0;
    let outcome = levenberg_marquardt::<DipModel>(
        x,
        y,
        &sigmas,
        &start,
        &baseline_only,
        LmOptions::default(),
    );
    let mut pinned = finish::<DipModel>(
        outcome,
        &baseline_only,
        x,
        y,
        sigmas,
        vec!["flat scan: visibility pinned to 0".into()],
    )?;
    if let Some(u) = pinned.uncertainty.as_mut() {
        u.visibility = v_sigma;
    }
    Ok(pinned)
}

/// Starting point for a cosine fit: ceiling from the top quartile, phase from
/// the position of the maximum and visibility from the extreme counts.
pub fn initial_cosine_guess(phi: &[f64], y: &[f64]) -> CosineModel {
    let ceiling = top_quartile_mean(y);
    let i_max = argmax(y);
    let y_min = y.iter().cloned().fold(f64::MAX, f64::min);
    let vis = visibility(y[i_max].max(1e-300), y_min).unwrap_or(0.0);
    CosineModel {
        ceiling,
        visibility: vis,
        phase: wrap_phase(phi[i_max] - FRAC_PI_4),
    }
}

/// Reduces a cosine phase to `[−π/4, π/4)`, the model's period being π/2.
pub fn wrap_phase(phase: f64) -> f64 {
    (phase + FRAC_PI_4).rem_euclid(FRAC_PI_2) - FRAC_PI_4
}

/// Fits `A [1 − v cos²(2φ − 2θ₀)]` to counts `y` at plate angles `phi` (radians).
pub fn fit_cosine_data(phi: &[f64], y: &[f64]) -> Result<FitResult<CosineModel>> {
    check_data(phi, y)?;
    let sigmas: Vec<f64> = y.iter().map(|&c| poisson_sigma(c)).collect();
    let guess = initial_cosine_guess(phi, y);
    let all = [0, 1, 2];
    let outcome = levenberg_marquardt::<CosineModel>(
        phi,
        y,
        &sigmas,
        &guess.params(),
        &all,
        LmOptions::default(),
    );
    let mut fit = finish::<CosineModel>(outcome, &all, phi, y, sigmas, Vec::new())?;
    fit.model.phase = wrap_phase(fit.model.phase);
    Ok(fit)
}

fn scan_data(scan: &ScanRecord, expected: AxisKind) -> Result<(Vec<f64>, Vec<f64>)> {
    scan.validate()?;
    if scan.axis_kind != expected {
        return Err(Error::InvalidInput(format!(
            "expected a {expected:?} axis, got {:?}",
            scan.axis_kind
        )));
    }
    Ok((
        scan.axis_values.clone(),
        scan.coincidences.iter().map(|&c| c as f64).collect(),
    ))
}

/// Dip fit of a stage-position scan.
pub fn fit_dip(scan: &ScanRecord) -> Result<FitResult<DipModel>> {
    let (x, y) = scan_data(scan, AxisKind::StagePositionUm)?;
    fit_dip_data(&x, &y)
}

/// Cosine fit of a waveplate-angle scan.
pub fn fit_cosine(scan: &ScanRecord) -> Result<FitResult<CosineModel>> {
    let (x, y) = scan_data(scan, AxisKind::WaveplateAngleRad)?;
    fit_cosine_data(&x, &y)
}

/// Full width at half depth of a fitted dip.
pub fn fwhm_of_dip(model: &DipModel) -> Result<f64> {
    if model.visibility == 0.0 {
        return Err(Error::DegenerateFit(
            "dip width is undefined when the visibility is 0".into(),
        ));
    }
    Ok(model.width.abs())
}

/// Pearson chi-square test of a count series against a constant mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstancyTest {
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// Probability of a chi-square at least this large if the counts were constant.
    pub p_value: f64,
}

pub fn constancy_test(counts: &[u64]) -> Result<ConstancyTest> {
    if counts.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 counts".into()));
    }
    let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidInput("all counts are zero".into()));
    }
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2) / mean)
        .sum();
    let dof = counts.len() - 1;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidInput(format!("chi-square distribution: {e}")))?;
    Ok(ConstancyTest {
        chi_square: chi2,
        degrees_of_freedom: dof,
        p_value: dist.sf(chi2),
    })
}
