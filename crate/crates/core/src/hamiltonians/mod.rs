//! Ideal two-photon Rabi/Dicke Hamiltonians, the trapped-ion driving
//! model, and the maps and diagnostics connecting them.

mod ion;
mod params;
mod time_dependent;

pub use ion::{
    build_ion_full, build_rwa, rwa_reference, simulation_frame, simulation_picture, IonTone,
    DEFAULT_LAMB_DICKE_ORDER, MAX_LAMB_DICKE_ORDER,
};
pub use params::{
    effective_to_params, params_to_effective, EffectiveParams, EffectiveUnits, PhysicalParams,
    PhysicalParamsJson, RegimeThresholds, SignConvention,
};
pub use time_dependent::{Envelope, TdTerm, TimeDependentHamiltonian};

use crate::error::{Error, Result};
use crate::fock::{
    boson_destroy, embed_boson, embed_local, number, qubit_op, two_photon_quadrature, FockOperator,
    HilbertSpec, Pauli,
};
use crate::sparse::CsrMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

fn check_dims(params: &EffectiveParams, spec: HilbertSpec) -> Result<()> {
    params.validate()?;
    if params.n_qubits() != spec.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: spec.n_qubits,
            got: params.n_qubits(),
        });
    }
    Ok(())
}

/// Free part `ω a†a + Σ_n (ω_q^n/2) σ_z^n`.
pub fn build_free(params: &EffectiveParams, spec: HilbertSpec) -> Result<FockOperator> {
    check_dims(params, spec)?;
    let mut h = number(spec).scale_re(params.omega);
    for (site, &wq) in params.omega_q.iter().enumerate() {
        h = h.add(&qubit_op(spec, Pauli::Z, site)?.scale_re(0.5 * wq));
    }
    Ok(h)
}

/// Interaction part `s (1/N) Σ_n g_n σ^n (a² + a†²)` with `σ^n = σ_x`
/// except on `y_site`, where `σ_y` is used.
fn build_interaction(params: &EffectiveParams, spec: HilbertSpec, y_site: Option<usize>) -> Result<FockOperator> {
    let n = params.n_qubits() as f64;
    let s = params.sign_convention.factor();
    let quad = two_photon_quadrature(spec);
    let mut h = FockOperator::zero(spec);
    for (site, &g) in params.g.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let axis = if Some(site) == y_site { Pauli::Y } else { Pauli::X };
        let term = qubit_op(spec, axis, site)?.mul(&quad);
        h = h.add(&term.scale_re(s * g / n));
    }
    Ok(h)
}

/// Two-photon Dicke Hamiltonian
/// `ω a†a + Σ_n (ω_q^n/2)σ_z^n ± (1/N) Σ_n g_n σ_x^n (a² + a†²)`.
pub fn build_dicke(params: &EffectiveParams, spec: HilbertSpec) -> Result<FockOperator> {
    let free = build_free(params, spec)?;
    Ok(free.add(&build_interaction(params, spec, None)?))
}

/// The coupling operator `∂H/∂g = ± (1/N) Σ_n σ_x^n (a² + a†²)` for
/// homogeneous couplings.
pub fn coupling_operator(params: &EffectiveParams, spec: HilbertSpec) -> Result<FockOperator> {
    check_dims(params, spec)?;
    build_interaction(&params.clone().with_g(1.0), spec, None)
}

/// Readout Hamiltonian: the Dicke Hamiltonian with `σ_x → σ_y` on `site`.
pub fn build_measurement_h(params: &EffectiveParams, spec: HilbertSpec, site: usize) -> Result<FockOperator> {
    check_dims(params, spec)?;
    if site >= spec.n_qubits {
        return Err(Error::SiteOutOfRange {
            site,
            n_qubits: spec.n_qubits,
        });
    }
    let free = build_free(params, spec)?;
    Ok(free.add(&build_interaction(params, spec, Some(site))?))
}

/// Coefficients of the position/momentum form for a given collective
/// qubit projection `s_x = ⟨Ŝ_x⟩`, in units of ω with the mass scaled out:
/// `(1 − 2 s g s_x/ω, 1 + 2 s g s_x/ω)` where `s` is the sign convention.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Curvature {
    pub kinetic: f64,
    pub potential: f64,
}

impl Curvature {
    /// Both coefficients positive: a confining harmonic well.
    pub fn is_bound(&self) -> bool {
        self.kinetic > 0.0 && self.potential > 0.0
    }
}

pub fn curvature_report(params: &EffectiveParams, s_x: f64) -> Result<Curvature> {
    params.validate()?;
    let g = params
        .homogeneous_g()
        .ok_or_else(|| Error::InvalidParameter("position/momentum form needs homogeneous couplings".into()))?;
    if !(-1.0..=1.0).contains(&s_x) {
        return Err(Error::InvalidParameter(format!("s_x = {s_x} outside [-1, 1]")));
    }
    let r = 2.0 * params.sign_convention.factor() * g / params.omega;
    Ok(Curvature {
        kinetic: 1.0 - r * s_x,
        potential: 1.0 + r * s_x,
    })
}

/// Hamiltonian rebuilt from effective position and momentum operators,
/// `(mω/2)[(ω − 2g Ŝ_x) p̂²/(m²ω²) + (ω + 2g Ŝ_x) x̂²] + Σ (ω_q/2) σ_z − ω/2`,
/// with `m = 1`. The zero-point offset `ω/2` is removed so the result
/// coincides with [`build_dicke`]. The quadratures are squared on a space
/// two levels larger and then restricted, matching the truncation used for
/// the ladder-operator form.
pub fn build_xp_form(params: &EffectiveParams, spec: HilbertSpec) -> Result<FockOperator> {
    check_dims(params, spec)?;
    let g = params
        .homogeneous_g()
        .ok_or_else(|| Error::InvalidParameter("position/momentum form needs homogeneous couplings".into()))?;
    let w = params.omega;
    let m = 1.0;
    let big = spec.fock_cutoff + 2;
    let a = boson_destroy(big);
    let ad = a.adjoint();
    let x = a.add(&ad).scale_re((1.0 / (2.0 * m * w)).sqrt());
    let p = a.sub(&ad).scale(C64::new(0.0, (m * w / 2.0).sqrt()));
    let keep: Vec<usize> = (0..spec.boson_dim()).collect();
    let restrict = |op: &CsrMatrix| CsrMatrix::from_dense(&op.submatrix(&keep, &keep));
    let x2 = restrict(&x.matmul(&x));
    let p2 = restrict(&p.matmul(&p)).scale_re(1.0 / (m * m * w * w));

    let n = spec.n_qubits as f64;
    let s = params.sign_convention.factor();
    let mut sx = FockOperator::zero(spec);
    for site in 0..spec.n_qubits {
        sx = sx.add(&qubit_op(spec, Pauli::X, site)?);
    }
    let sx = sx.scale_re(s / n);

    let id = FockOperator::identity(spec);
    let kinetic = id.scale_re(w).sub(&sx.scale_re(2.0 * g)).mul(&embed_boson(spec, &p2));
    let potential = id.scale_re(w).add(&sx.scale_re(2.0 * g)).mul(&embed_boson(spec, &x2));
    let mut h = kinetic.add(&potential).scale_re(0.5 * m * w);
    for (site, &wq) in params.omega_q.iter().enumerate() {
        h = h.add(&qubit_op(spec, Pauli::Z, site)?.scale_re(0.5 * wq));
    }
    Ok(h.sub(&id.scale_re(0.5 * w)))
}

/// Validity diagnostics of the trapped-ion implementation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorBudget {
    /// `(Ω/4ν)²` from the carrier terms at `±2ν`.
    pub carrier_excitation: f64,
    /// `(ηΩ/4ν)²` from first-order Lamb-Dicke terms at `ν`.
    pub first_sideband_excitation: f64,
    /// Per tone: `|ω_j − ω_int|` and the breathing-mode detunings
    /// `Δ1 = ||ω_j − ω_int| − √3ν|`, `Δ2 = ||ω_j − ω_int| − 2√3ν|`, all in
    /// units of ν.
    pub red: ToneDetunings,
    pub blue: ToneDetunings,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ToneDetunings {
    pub drive_offset: f64,
    pub breathing_first: f64,
    pub breathing_second: f64,
}

impl ToneDetunings {
    /// Detunings from the breathing mode (`ν₂ = √3ν`) first and second
    /// sidebands for a drive offset `|ω_j − ω_int|` given in units of ν.
    pub fn from_offset(offset_over_nu: f64) -> Self {
        let nu2 = 3f64.sqrt();
        Self {
            drive_offset: offset_over_nu,
            breathing_first: (offset_over_nu - nu2).abs(),
            breathing_second: (offset_over_nu - 2.0 * nu2).abs(),
        }
    }
}

pub fn error_budget(p: &PhysicalParams) -> ErrorBudget {
    let r = p.rabi / (4.0 * p.nu);
    ErrorBudget {
        carrier_excitation: r * r,
        first_sideband_excitation: (p.eta * r).powi(2),
        red: ToneDetunings::from_offset((2.0 * p.nu - p.delta_r).abs() / p.nu),
        blue: ToneDetunings::from_offset((2.0 * p.nu + p.delta_b).abs() / p.nu),
    }
}

/// Single-qubit operator on `site` times a boson operator.
pub fn local_boson_product(spec: HilbertSpec, site: usize, q: Pauli, boson: &CsrMatrix) -> Result<FockOperator> {
    embed_local(spec, site, &q.matrix(), boson)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{Qubit, QuantumState};
    use crate::linalg::eigh;

    const E: Qubit = Qubit::Excited;
    const G: Qubit = Qubit::Ground;

    fn spec(n: usize, c: usize) -> HilbertSpec {
        HilbertSpec::new(n, c).unwrap()
    }

    #[test]
    fn decoupled_spectrum_is_exact() {
        let s = spec(1, 4);
        let p = EffectiveParams::dicke(1, 1.3, 0.0);
        let h = build_dicke(&p, s).unwrap();
        let mut expect: Vec<f64> = (0..=4)
            .flat_map(|n| [n as f64 + 0.65, n as f64 - 0.65])
            .collect();
        expect.sort_by(f64::total_cmp);
        let got = eigh(&h.to_dense()).values;
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn interaction_element_minus_convention() {
        let s = spec(1, 6);
        let g = 0.13;
        let h = build_dicke(&EffectiveParams::rabi(1.0, 2.0, g), s).unwrap();
        // brute force: −g ⟨e|σ_x|g⟩ ⟨0|a²|2⟩ via factor products
        let a = boson_destroy(6);
        let a2 = a.matmul(&a);
        let expect = -g * Pauli::X.matrix().get(0, 1).re * a2.get(0, 2).re;
        let got = h.element((&[E], 0), (&[G], 2)).unwrap();
        assert!((got.re - expect).abs() < 1e-15);
        assert!((got.re + g * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dicke_normalizes_by_qubit_count() {
        let s = spec(2, 4);
        let g = 0.3;
        let h = build_dicke(&EffectiveParams::dicke(2, 1.0, g), s).unwrap();
        // σ_x on qubit 1 only: |e,e,0⟩ ↔ |g,e,2⟩
        let v = h.element((&[E, E], 0), (&[G, E], 2)).unwrap();
        assert!((v.re - g / 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let v2 = h.element((&[E, E], 0), (&[E, G], 2)).unwrap();
        assert!((v2.re - g / 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(h.element((&[E, E], 0), (&[G, G], 2)).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn builders_are_hermitian() {
        let s = spec(3, 8);
        let mut p = EffectiveParams::dicke(3, 1.9, 0.3);
        p.g = vec![0.1, 0.2, 0.45];
        p.omega_q = vec![1.0, 2.0, 1.5];
        assert!(build_dicke(&p, s).unwrap().is_hermitian(1e-12));
        for site in 0..3 {
            assert!(build_measurement_h(&p, s, site).unwrap().is_hermitian(1e-12));
        }
        assert!(build_measurement_h(&p, s, 3).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = build_dicke(&EffectiveParams::dicke(2, 1.0, 0.1), spec(1, 4));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn xp_form_matches_ladder_form() {
        for (n, sign) in [(1, SignConvention::Plus), (1, SignConvention::Minus), (3, SignConvention::Plus)] {
            let s = spec(n, 12);
            let p = EffectiveParams::dicke(n, 1.9, 0.37).with_sign(sign);
            let a = build_dicke(&p, s).unwrap();
            let b = build_xp_form(&p, s).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-10, "N={n} {sign:?}");
        }
    }

    #[test]
    fn xp_form_rejects_inhomogeneous() {
        let mut p = EffectiveParams::dicke(2, 1.0, 0.1);
        p.g[1] = 0.2;
        assert!(build_xp_form(&p, spec(2, 4)).is_err());
        assert!(curvature_report(&p, 0.0).is_err());
    }

    #[test]
    fn curvature_at_collapse_and_beyond() {
        let c = curvature_report(&EffectiveParams::dicke(1, 1.9, 0.5), -1.0).unwrap();
        assert_eq!(c.potential, 0.0);
        let c = curvature_report(&EffectiveParams::dicke(1, 1.9, 0.6), -1.0).unwrap();
        assert!(c.potential < 0.0);
        let c = curvature_report(&EffectiveParams::dicke(1, 1.9, 0.6), 1.0).unwrap();
        assert!(c.kinetic < 0.0 && c.potential > 0.0);
        let c = curvature_report(&EffectiveParams::dicke(1, 1.9, 0.0), 0.7).unwrap();
        assert_eq!((c.kinetic, c.potential), (1.0, 1.0));
        let c = curvature_report(&EffectiveParams::dicke(1, 1.9, 0.49), 1.0).unwrap();
        assert!(c.is_bound());
    }

    #[test]
    fn spurious_excitation_probabilities() {
        let p = PhysicalParams::from_hz(1e6, 0.0, 0.0, 0.04, 100e3);
        let b = error_budget(&p);
        assert!((b.carrier_excitation - 6.25e-4).abs() < 1e-15);
        assert!((b.first_sideband_excitation - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn breathing_mode_detunings() {
        let b = error_budget(&PhysicalParams::from_hz(1e6, 0.0, 0.0, 0.04, 100e3));
        for t in [b.red, b.blue] {
            assert_eq!(t.drive_offset, 2.0);
            assert!((t.breathing_first - (2.0 - 3f64.sqrt())).abs() < 1e-15);
            assert!((t.breathing_second - (2.0 * 3f64.sqrt() - 2.0)).abs() < 1e-15);
            assert!((t.breathing_first - 0.27).abs() < 0.005);
            assert!((t.breathing_second - 1.46).abs() < 0.005);
        }
    }

    #[test]
    fn measurement_split_commutes_and_anticommutes() {
        let s = spec(1, 10);
        let p = EffectiveParams::rabi(1.0, 1.7, 0.2);
        let hm = build_measurement_h(&p, s, 0).unwrap();
        let z = qubit_op(s, Pauli::Z, 0).unwrap();
        let a_part = build_free(&p, s).unwrap();
        let b_part = hm.sub(&a_part);
        assert_eq!(a_part.commutator(&z).frobenius_norm(), 0.0);
        assert_eq!(b_part.anticommutator(&z).frobenius_norm(), 0.0);
        let expect_b = qubit_op(s, Pauli::Y, 0)
            .unwrap()
            .mul(&two_photon_quadrature(s))
            .scale_re(-0.2);
        assert!(b_part.max_abs_diff(&expect_b) < 1e-15);
    }

    #[test]
    fn measurement_h_reduces_at_zero_coupling() {
        let s = spec(2, 5);
        let p = EffectiveParams::dicke(2, 1.9, 0.0);
        assert_eq!(build_measurement_h(&p, s, 1).unwrap(), build_dicke(&p, s).unwrap());
    }

    #[test]
    fn measurement_h_only_swaps_one_axis() {
        let s = spec(2, 5);
        let p = EffectiveParams::dicke(2, 1.9, 0.3);
        let diff = build_measurement_h(&p, s, 0).unwrap().sub(&build_dicke(&p, s).unwrap());
        let quad = two_photon_quadrature(s);
        let expect = qubit_op(s, Pauli::Y, 0)
            .unwrap()
            .sub(&qubit_op(s, Pauli::X, 0).unwrap())
            .mul(&quad)
            .scale_re(0.3 / 2.0);
        assert!(diff.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn basis_energy_of_ground_qubit() {
        let s = spec(1, 3);
        let h = build_dicke(&EffectiveParams::dicke(1, 2.0, 0.0), s).unwrap();
        let st = QuantumState::basis(s, &[G], 0).unwrap();
        let v = st.as_vector().unwrap();
        assert_eq!(v.dotc(&h.apply(v)).re, -1.0);
    }
}
