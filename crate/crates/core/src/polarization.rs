//! Polarization distinguishability with a half-wave plate in each input arm.
//!
//! The two-photon space is `momentum₁ ⊗ polarization₁ ⊗ momentum₂ ⊗ polarization₂`,
//! each factor two-dimensional with `x` before `y` and `H` before `V`. The
//! basis index of `|m₁,p₁⟩₁|m₂,p₂⟩₂` is therefore `8m₁ + 4p₁ + 2m₂ + p₂`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::{symmetric_bs, Port};
use crate::linalg::{apply, tensor_all, Operator, StateVector, ALGEBRA_TOL, C64, ZERO};

pub const POLARIZED_DIM: usize = 16;

/// Linear polarization basis states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn state(self) -> StateVector {
        StateVector::basis(2, self.index())
    }
}

/// Half-wave plate angles in radians from vertical: `theta` in arm `x`, `phi` in arm `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSetting {
    pub theta: f64,
    pub phi: f64,
}

impl WaveplateSetting {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Both angles reduced to `[0, π)`, the half-wave plate period.
    pub fn canonical(&self) -> Self {
        Self {
            theta: self.theta.rem_euclid(PI),
            phi: self.phi.rem_euclid(PI),
        }
    }
}

/// Basis index of `|m₁,p₁⟩₁|m₂,p₂⟩₂`.
pub fn basis_index(m1: Port, p1: Polarization, m2: Port, p2: Polarization) -> usize {
    8 * m1.index() + 4 * p1.index() + 2 * m2.index() + p2.index()
}

fn decompose(index: usize) -> (usize, usize, usize, usize) {
    (
        (index >> 3) & 1,
        (index >> 2) & 1,
        (index >> 1) & 1,
        index & 1,
    )
}

fn basis_labels() -> Vec<String> {
    (0..POLARIZED_DIM)
        .map(|k| {
            let (m1, p1, m2, p2) = decompose(k);
            let m = ["x", "y"];
            let p = ["H", "V"];
            format!("{},{}⊗{},{}", m[m1], p[p1], m[m2], p[p2])
        })
        .collect()
}

/// Polarization state rotated by `alpha` from vertical, `(−sin α, cos α)` in `(H, V)`.
pub fn linear_polarization(alpha: f64) -> StateVector {
    StateVector::from_real(&[-alpha.sin(), alpha.cos()]).expect("finite angle")
}

fn momentum(port: Port) -> StateVector {
    StateVector::basis(2, port.index())
}

/// `|m₁, pol₁⟩₁ |m₂, pol₂⟩₂` for arbitrary single-photon polarization states.
pub fn polarized_product(
    m1: Port,
    pol1: &StateVector,
    m2: Port,
    pol2: &StateVector,
) -> Result<StateVector> {
    tensor_all(&[momentum(m1), pol1.clone(), momentum(m2), pol2.clone()])?.relabel(basis_labels())
}

/// Both photons vertically polarized in the symmetric momentum state.
pub fn initial_polarized_state() -> StateVector {
    let mut amplitudes = vec![ZERO; POLARIZED_DIM];
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    amplitudes[basis_index(Port::X, Polarization::V, Port::Y, Polarization::V)] = h;
    amplitudes[basis_index(Port::Y, Polarization::V, Port::X, Polarization::V)] = h;
    StateVector::with_labels(amplitudes, basis_labels()).expect("16 finite amplitudes")
}

/// Swaps the `(momentum, polarization)` factor pairs of the two photons.
pub fn exchange_photons(state: &StateVector) -> Result<StateVector> {
    expect_polarized(state)?;
    let amplitudes = (0..POLARIZED_DIM)
        .map(|k| {
            let (m1, p1, m2, p2) = decompose(k);
            state.amplitude(8 * m2 + 4 * p2 + 2 * m1 + p1)
        })
        .collect();
    StateVector::with_labels(amplitudes, state.labels().to_vec())
}

/// Half-wave plate with its axis at `theta` from vertical.
pub fn hwp(theta: f64) -> Operator {
    let (s, c) = (2.0 * theta).sin_cos();
    let re = |v: f64| C64::new(v, 0.0);
    Operator::from_rows([[re(-c), re(-s)], [re(-s), re(c)]])
}

fn projector(port: Port) -> Operator {
    Operator::projector(&momentum(port))
}

/// `P_x ⊗ W_θ ⊗ P_y ⊗ W_φ + P_y ⊗ W_φ ⊗ P_x ⊗ W_θ`.
///
/// The plate in arm `x` is applied to whichever photon occupies that arm. The
/// operator annihilates states with both photons in the same arm, so it is
/// only norm-preserving on the two-arm sector.
pub fn waveplate_pair(theta: f64, phi: f64) -> Operator {
    let (wt, wp) = (hwp(theta), hwp(phi));
    let (px, py) = (projector(Port::X), projector(Port::Y));
    let first = tensor_all(&[px.clone(), wt.clone(), py.clone(), wp.clone()]);
    let second = tensor_all(&[py, wp, px, wt]);
    first
        .and_then(|a| a.add(&second?))
        .expect("16-dimensional operators")
}

/// Weight of a 16-dimensional state on patterns with both photons in one arm.
pub fn same_arm_weight(state: &StateVector) -> f64 {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let (m1, _, m2, _) = decompose(*k);
            m1 == m2
        })
        .map(|(_, z)| z.norm_sqr())
        .sum()
}

fn expect_polarized(state: &StateVector) -> Result<()> {
    if state.dim() == POLARIZED_DIM {
        Ok(())
    } else {
        Err(Error::WrongDimension {
            expected: POLARIZED_DIM,
            actual: state.dim(),
        })
    }
}

/// Applies the waveplate pair; rejects states with weight on same-arm patterns.
pub fn apply_waveplates(setting: WaveplateSetting, state: &StateVector) -> Result<StateVector> {
    expect_polarized(state)?;
    let same = same_arm_weight(state);
    if same > ALGEBRA_TOL {
        return Err(Error::SameArmState(same));
    }
    apply(&waveplate_pair(setting.theta, setting.phi), state)
}

/// `B ⊗ I ⊗ B ⊗ I`: the beamsplitter acts on momentum only.
pub fn four_slot_bs() -> Operator {
    let b = symmetric_bs();
    let i = Operator::identity(2);
    tensor_all(&[b.clone(), i.clone(), b, i]).expect("16-dimensional operator")
}

/// Probability of detections in distinct ports, summed over both polarization
/// outcomes of each photon.
pub fn polarized_coincidence_of(state: &StateVector) -> Result<f64> {
    expect_polarized(state)?;
    Ok(state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let (m1, _, m2, _) = decompose(*k);
            m1 != m2
        })
        .map(|(_, z)| z.norm_sqr())
        .sum())
}

/// Runs `state` through the waveplates and the beamsplitter.
pub fn propagate(setting: WaveplateSetting, state: &StateVector) -> Result<StateVector> {
    let rotated = apply_waveplates(setting, state)?;
    apply(&four_slot_bs(), &rotated)
}

/// Coincidence probability for plate angles `theta` (arm x) and `phi` (arm y),
/// starting from two vertically polarized photons.
pub fn polarized_coincidence(theta: f64, phi: f64) -> f64 {
    let out = propagate(
        WaveplateSetting::new(theta, phi),
        &initial_polarized_state(),
    )
    .expect("the initial state lies in the two-arm sector");
    polarized_coincidence_of(&out).expect("16-dimensional state")
}

/// `½[1 − cos²(2φ − 2θ)]`.
pub fn polarized_coincidence_closed_form(theta: f64, phi: f64) -> f64 {
    let c = (2.0 * phi - 2.0 * theta).cos();
    0.5 * (1.0 - c * c)
}

/// Probability that photon `photon` (1 or 2) leaves through `port`.
pub fn polarized_port_marginal(state: &StateVector, photon: u8, port: Port) -> Result<f64> {
    expect_polarized(state)?;
    let slot = match photon {
        1 => 3,
        2 => 1,
        _ => {
            return Err(Error::InvalidInput(format!(
                "photon must be 1 or 2, got {photon}"
            )))
        }
    };
    Ok(state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(k, _)| (k >> slot) & 1 == port.index())
        .map(|(_, z)| z.norm_sqr())
        .sum())
}
