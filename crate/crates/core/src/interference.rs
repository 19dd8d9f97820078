//! Two-photon interference at a beamsplitter in the momentum basis.
//!
//! Each photon occupies one of two momentum modes, `x` or `y`, which are also
//! the beamsplitter ports. The two-photon space is `photon₁ ⊗ photon₂`, so the
//! basis order is `x₁x₂, x₁y₂, y₁x₂, y₁y₂`. A coincidence is a detection in
//! distinct ports, i.e. the `x₁y₂` and `y₁x₂` components.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::linalg::{
    apply, conjugate_evolve, outer, tensor, trace_product, DensityMatrix, Operator, StateVector,
    ALGEBRA_TOL, C64,
};

/// Whether the two-particle wavefunction is symmetric or antisymmetric under exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExchangeSymmetry {
    Bosonic,
    Fermionic,
}

impl ExchangeSymmetry {
    fn sign(self) -> f64 {
        match self {
            ExchangeSymmetry::Bosonic => 1.0,
            ExchangeSymmetry::Fermionic => -1.0,
        }
    }
}

/// A beamsplitter port, equivalently a momentum mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Port {
    X,
    Y,
}

impl Port {
    pub fn index(self) -> usize {
        match self {
            Port::X => 0,
            Port::Y => 1,
        }
    }

    pub fn other(self) -> Port {
        match self {
            Port::X => Port::Y,
            Port::Y => Port::X,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Port::X => "x",
            Port::Y => "y",
        }
    }
}

/// Single-photon momentum state `|port⟩` for photon number `photon` (1 or 2).
pub fn momentum_state(port: Port, photon: u8) -> StateVector {
    let labels = vec![format!("x{photon}"), format!("y{photon}")];
    StateVector::basis(2, port.index())
        .relabel(labels)
        .expect("two labels for a two-dimensional state")
}

/// The product state `|first⟩₁|second⟩₂`.
pub fn product_state(first: Port, second: Port) -> StateVector {
    tensor(&momentum_state(first, 1), &momentum_state(second, 2))
        .expect("4-dimensional product is within the guard")
}

/// Transmission and reflection amplitudes of a lossless two-port beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterParams {
    pub t: C64,
    pub r: C64,
}

impl Default for BeamsplitterParams {
    fn default() -> Self {
        Self::symmetric()
    }
}

impl BeamsplitterParams {
    /// `t = 1/√2`, `r = i/√2`: the π/2 phase sits on reflection.
    pub fn symmetric() -> Self {
        Self {
            t: C64::new(FRAC_1_SQRT_2, 0.0),
            r: C64::new(0.0, FRAC_1_SQRT_2),
        }
    }

    /// Requires `|t|² + |r|² = 1` and `Re(t r*) = 0`, which together make
    /// `[[t, r], [r, t]]` unitary.
    pub fn new(t: C64, r: C64) -> Result<Self> {
        let total = t.norm_sqr() + r.norm_sqr();
        if (total - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::InvalidInput(format!(
                "|t|^2 + |r|^2 = {total}, expected 1"
            )));
        }
        let cross = (t * r.conj()).re;
        if cross.abs() > ALGEBRA_TOL {
            return Err(Error::InvalidInput(format!(
                "t and r must be in quadrature (Re(t r*) = {cross})"
            )));
        }
        Ok(Self { t, r })
    }

    pub fn operator(&self) -> Operator {
        Operator::from_rows([[self.t, self.r], [self.r, self.t]])
    }
}

/// The symmetric beamsplitter `[[t, r], [r, t]]` acting on one photon.
pub fn symmetric_bs() -> Operator {
    BeamsplitterParams::symmetric().operator()
}

/// `B ⊗ B`, the beamsplitter acting on both photons.
pub fn two_photon_bs() -> Operator {
    let b = symmetric_bs();
    tensor(&b, &b).expect("4-dimensional product is within the guard")
}

/// `(|x₁y₂⟩ ± |y₁x₂⟩)/√2`, sign set by the exchange symmetry.
pub fn initial_state(symmetry: ExchangeSymmetry) -> StateVector {
    let xy = product_state(Port::X, Port::Y);
    let yx = product_state(Port::Y, Port::X);
    xy.add(&yx.scaled(C64::new(symmetry.sign(), 0.0)))
        .expect("same dimension")
        .scaled(C64::new(FRAC_1_SQRT_2, 0.0))
}

fn expect_two_photon(dim: usize) -> Result<()> {
    if dim == 4 {
        Ok(())
    } else {
        Err(Error::WrongDimension {
            expected: 4,
            actual: dim,
        })
    }
}

/// `|⟨x₁y₂|ψ⟩|² + |⟨y₁x₂|ψ⟩|²` for a normalized two-photon state.
pub fn coincidence_probability(state: &StateVector) -> Result<f64> {
    expect_two_photon(state.dim())?;
    if !state.is_normalized() {
        return Err(Error::NotNormalized(state.norm_sqr()));
    }
    Ok(state.amplitude(1).norm_sqr() + state.amplitude(2).norm_sqr())
}

/// Runs a two-photon state through the symmetric beamsplitter.
pub fn through_beamsplitter(state: &StateVector) -> Result<StateVector> {
    apply(&two_photon_bs(), state)
}

/// `|x₁y₂⟩⟨x₁y₂|`
pub fn rho_xy() -> DensityMatrix {
    outer(&product_state(Port::X, Port::Y)).expect("basis state is normalized")
}

/// `|y₁x₂⟩⟨y₁x₂|`
pub fn rho_yx() -> DensityMatrix {
    outer(&product_state(Port::Y, Port::X)).expect("basis state is normalized")
}

/// Density matrix of the symmetric (indistinguishable) input.
pub fn rho_ind() -> DensityMatrix {
    outer(&initial_state(ExchangeSymmetry::Bosonic)).expect("initial state is normalized")
}

/// Equal mixture of the two distinguishable orderings.
pub fn rho_dis() -> DensityMatrix {
    DensityMatrix::mixture(&[(0.5, &rho_xy()), (0.5, &rho_yx())]).expect("valid mixture")
}

/// `p ρ_ind + (1 − p) ρ_dis`, a Werner-like partly indistinguishable state.
pub fn werner_state(p: f64) -> Result<DensityMatrix> {
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    DensityMatrix::mixture(&[(p, &rho_ind()), (1.0 - p, &rho_dis())])
}

/// `Tr[ρ ρ_xy] + Tr[ρ ρ_yx]` for a two-photon density matrix after the beamsplitter.
pub fn coincidence_from_density(rho_final: &DensityMatrix) -> Result<f64> {
    expect_two_photon(rho_final.dim())?;
    Ok(trace_product(rho_final, &rho_xy())? + trace_product(rho_final, &rho_yx())?)
}

/// Werner state for `p` after the symmetric beamsplitter.
pub fn evolved_werner(p: f64) -> Result<DensityMatrix> {
    conjugate_evolve(&werner_state(p)?, &two_photon_bs())
}

/// Coincidence probability of the Werner state for `p`, computed through the
/// density-matrix pipeline.
pub fn werner_coincidence(p: f64) -> Result<f64> {
    coincidence_from_density(&evolved_werner(p)?)
}

/// Probability that photon `photon` (1 or 2) exits through `port`.
pub fn port_marginal(rho: &DensityMatrix, photon: u8, port: Port) -> Result<f64> {
    expect_two_photon(rho.dim())?;
    let p = port.index();
    let indices = match photon {
        1 => [2 * p, 2 * p + 1],
        2 => [p, 2 + p],
        _ => {
            return Err(Error::InvalidInput(format!(
                "photon must be 1 or 2, got {photon}"
            )))
        }
    };
    Ok(indices.iter().map(|&i| rho.population(i)).sum())
}

/// Basis labels `x₁x₂ … y₁y₂` for display.
pub fn basis_labels() -> Vec<String> {
    [Port::X, Port::Y]
        .iter()
        .flat_map(|a| [Port::X, Port::Y].map(|b| format!("{}1⊗{}2", a.name(), b.name())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{I, ZERO};

    const TOL: f64 = 1e-12;
    const H: f64 = FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn symmetric_bs_entries() {
        let b = symmetric_bs();
        let expected = Operator::from_rows([[c(H, 0.0), c(0.0, H)], [c(0.0, H), c(H, 0.0)]]);
        assert!(b.max_abs_diff(&expected) < 1e-16);
        assert!(b.is_unitary(TOL));
        // det = t² − r² = ½ − (i/√2)² = 1
        let det = b.get(0, 0) * b.get(1, 1) - b.get(0, 1) * b.get(1, 0);
        assert!((det - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_photon_bs_matches_explicit_matrix() {
        let h = c(0.5, 0.0);
        let i = I * 0.5;
        let m = -h;
        let expected =
            Operator::from_rows([[h, i, i, m], [i, h, m, i], [i, m, h, i], [m, i, i, h]]);
        assert!(two_photon_bs().max_abs_diff(&expected) < 1e-15);
        assert!(two_photon_bs().is_unitary(TOL));
    }

    #[test]
    fn initial_states() {
        let b = initial_state(ExchangeSymmetry::Bosonic);
        let f = initial_state(ExchangeSymmetry::Fermionic);
        let bs = [0.0, H, H, 0.0];
        let fs = [0.0, H, -H, 0.0];
        for k in 0..4 {
            assert!((b.amplitude(k) - c(bs[k], 0.0)).norm() < 1e-16);
            assert!((f.amplitude(k) - c(fs[k], 0.0)).norm() < 1e-16);
        }
        assert!(b.is_normalized() && f.is_normalized());
        assert_eq!(b.labels()[1], "x1⊗y2");
    }

    #[test]
    fn bosonic_output_is_same_port_entangled_state() {
        let out = through_beamsplitter(&initial_state(ExchangeSymmetry::Bosonic)).unwrap();
        let expected = [c(0.0, H), ZERO, ZERO, c(0.0, H)];
        for (k, e) in expected.iter().enumerate() {
            assert!((out.amplitude(k) - e).norm() < TOL);
        }
    }

    #[test]
    fn coincidence_outcomes() {
        let boson = through_beamsplitter(&initial_state(ExchangeSymmetry::Bosonic)).unwrap();
        assert!(coincidence_probability(&boson).unwrap().abs() < TOL);

        let dist = through_beamsplitter(&product_state(Port::X, Port::Y)).unwrap();
        let expected = [c(0.0, 0.5), c(0.5, 0.0), c(-0.5, 0.0), c(0.0, 0.5)];
        for (k, e) in expected.iter().enumerate() {
            assert!((dist.amplitude(k) - e).norm() < TOL);
        }
        assert!((coincidence_probability(&dist).unwrap() - 0.5).abs() < TOL);

        let fermion = through_beamsplitter(&initial_state(ExchangeSymmetry::Fermionic)).unwrap();
        assert!((coincidence_probability(&fermion).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn fermionic_state_is_fixed_point() {
        let f = initial_state(ExchangeSymmetry::Fermionic);
        let out = through_beamsplitter(&f).unwrap();
        assert!(out.equals_up_to_phase(&f, TOL));
    }

    #[test]
    fn coincidence_probability_wrong_dimension() {
        let err = coincidence_probability(&StateVector::basis(2, 0)).unwrap_err();
        assert!(matches!(
            err,
            Error::WrongDimension {
                expected: 4,
                actual: 2
            }
        ));
    }

    #[test]
    fn werner_endpoints() {
        let ind = werner_state(1.0).unwrap();
        assert!(ind.as_operator().max_abs_diff(rho_ind().as_operator()) < TOL);
        let dis = werner_state(0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = if (i == 1 || i == 2) && i == j {
                    0.5
                } else {
                    0.0
                };
                assert!((dis.get(i, j) - c(e, 0.0)).norm() < TOL);
            }
        }
        let mid = werner_state(0.5).unwrap();
        assert!((mid.trace() - 1.0).abs() < TOL);
    }

    #[test]
    fn werner_rejects_out_of_range() {
        for p in [-0.01, 1.01, f64::NAN] {
            assert!(matches!(werner_state(p), Err(Error::OutOfRange { .. })));
        }
    }

    #[test]
    fn density_coincidences() {
        assert!(werner_coincidence(1.0).unwrap().abs() < TOL);
        assert!((werner_coincidence(0.0).unwrap() - 0.5).abs() < TOL);
        for p in [0.25, 0.5, 0.75] {
            assert!((werner_coincidence(p).unwrap() - (1.0 - p) / 2.0).abs() < TOL);
        }
    }

    #[test]
    fn evolved_indistinguishable_state_matches_pure_output() {
        let rho_f = conjugate_evolve(&rho_ind(), &two_photon_bs()).unwrap();
        let psi_f = through_beamsplitter(&initial_state(ExchangeSymmetry::Bosonic)).unwrap();
        let expected = outer(&psi_f).unwrap();
        assert!(rho_f.as_operator().max_abs_diff(expected.as_operator()) < TOL);
        assert!(trace_product(&rho_f, &rho_xy()).unwrap().abs() < TOL);
    }

    #[test]
    fn evolved_distinguishable_trace_terms() {
        let rho_f = conjugate_evolve(&rho_dis(), &two_photon_bs()).unwrap();
        assert!((trace_product(&rho_f, &rho_xy()).unwrap() - 0.25).abs() < TOL);
        assert!((trace_product(&rho_f, &rho_yx()).unwrap() - 0.25).abs() < TOL);
    }

    #[test]
    fn marginals_are_half() {
        for p in [0.0, 0.3, 1.0] {
            let rho = evolved_werner(p).unwrap();
            for photon in [1, 2] {
                for port in [Port::X, Port::Y] {
                    let m = port_marginal(&rho, photon, port).unwrap();
                    assert!((m - 0.5).abs() < TOL, "p={p} photon={photon} {port:?}: {m}");
                }
            }
        }
        assert!(port_marginal(&rho_ind(), 3, Port::X).is_err());
    }

    #[test]
    fn beamsplitter_params_validation() {
        assert!(BeamsplitterParams::new(c(H, 0.0), c(H, 0.0)).is_err());
        assert!(BeamsplitterParams::new(c(0.5, 0.0), c(0.0, 0.5)).is_err());
        let p = BeamsplitterParams::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        assert!(p.operator().is_unitary(TOL));
    }

    #[test]
    fn labels() {
        assert_eq!(basis_labels(), vec!["x1⊗x2", "x1⊗y2", "y1⊗x2", "y1⊗y2"]);
    }
}
