//! Bichromatic second-sideband driving of a single trapped ion.
//!
//! The interaction-picture Hamiltonian is
//! `Σ_j (Ω/2) { e^{iη[a(t)+a†(t)]} e^{i(ω_int−ω_j)t} e^{iφ_j} σ_+ + h.c. }`
//! with `a(t) = a e^{−iνt}` and tones `ω_r = ω_int − 2ν + δ_r`,
//! `ω_b = ω_int + 2ν + δ_b`. The displacement exponential is expanded in
//! powers of η and regrouped by trap harmonic, so every term is a constant
//! operator times a single complex exponential.

use super::params::PhysicalParams;
use super::time_dependent::{Envelope, TdTerm, TimeDependentHamiltonian};
use crate::error::{Error, Result};
use crate::fock::{boson_destroy, boson_number, embed_boson, qubit_op, FockOperator, HilbertSpec, Pauli};
use crate::sparse::CsrMatrix;
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

pub const DEFAULT_LAMB_DICKE_ORDER: usize = 4;
pub const MAX_LAMB_DICKE_ORDER: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonTone {
    Red,
    Blue,
}

impl IonTone {
    /// `ω_int − ω_j`.
    fn offset(self, p: &PhysicalParams) -> f64 {
        match self {
            IonTone::Red => 2.0 * p.nu - p.delta_r,
            IonTone::Blue => -2.0 * p.nu - p.delta_b,
        }
    }

    fn phase(self, p: &PhysicalParams) -> f64 {
        match self {
            IonTone::Red => p.phi_r,
            IonTone::Blue => p.phi_b,
        }
    }
}

/// `D_k` such that `Σ_{m≤order} (iη X(t))^m/m! = Σ_k e^{ikνt} D_k`, where
/// `X(t) = a e^{−iνt} + a† e^{iνt}`. Built on a space padded by `order`
/// levels and then restricted to `|0⟩…|cutoff⟩`.
fn displacement_harmonics(cutoff: usize, eta: f64, order: usize) -> BTreeMap<i32, CsrMatrix> {
    let big = cutoff + order;
    let a = boson_destroy(big);
    let ad = a.adjoint();
    let dim = big + 1;
    let mut power: BTreeMap<i32, CsrMatrix> = BTreeMap::new();
    power.insert(0, CsrMatrix::identity(dim));
    let mut series = power.clone();
    let mut coef = C64::new(1.0, 0.0);
    for m in 1..=order {
        let mut next: BTreeMap<i32, CsrMatrix> = BTreeMap::new();
        for (&k, mk) in &power {
            let lowered = a.matmul(mk);
            let raised = ad.matmul(mk);
            next.entry(k - 1)
                .and_modify(|e| *e = e.add(&lowered))
                .or_insert(lowered);
            next.entry(k + 1)
                .and_modify(|e| *e = e.add(&raised))
                .or_insert(raised);
        }
        coef *= C64::new(0.0, eta) / m as f64;
        for (&k, mk) in &next {
            let scaled = mk.scale(coef);
            series
                .entry(k)
                .and_modify(|e| *e = e.add(&scaled))
                .or_insert(scaled);
        }
        power = next;
    }
    let keep: Vec<usize> = (0..=cutoff).collect();
    series
        .into_iter()
        .map(|(k, d)| (k, CsrMatrix::from_dense(&d.submatrix(&keep, &keep))))
        .filter(|(_, d)| d.nnz() > 0)
        .collect()
}

/// The `σ_+` half of the drive, one entry per (tone, harmonic).
fn ion_half_terms(p: &PhysicalParams, spec: HilbertSpec, order: usize) -> Result<Vec<(IonTone, i32, TdTerm)>> {
    p.validate()?;
    if spec.n_qubits != 1 {
        return Err(Error::InvalidParameter(
            "the ion driving model is defined for a single ion".into(),
        ));
    }
    if order < 2 {
        return Err(Error::InvalidParameter(format!(
            "Lamb-Dicke order {order} drops the two-phonon terms; need >= 2"
        )));
    }
    if order > MAX_LAMB_DICKE_ORDER {
        return Err(Error::InvalidParameter(format!(
            "Lamb-Dicke order {order} exceeds maximum {MAX_LAMB_DICKE_ORDER}"
        )));
    }
    let harmonics = displacement_harmonics(spec.fock_cutoff, p.eta, order);
    let plus = Pauli::Plus.matrix();
    let mut out = Vec::new();
    for tone in [IonTone::Red, IonTone::Blue] {
        let amp = C64::from_polar(0.5 * p.rabi, tone.phase(p));
        for (&k, d) in &harmonics {
            out.push((
                tone,
                k,
                TdTerm {
                    envelope: Envelope::Harmonic {
                        amplitude: amp,
                        frequency: k as f64 * p.nu + tone.offset(p),
                    },
                    operator: plus.kron(d),
                },
            ));
        }
    }
    Ok(out)
}

fn period_hint(terms: &[TdTerm]) -> Option<f64> {
    let f = terms.iter().map(|t| t.envelope.frequency().abs()).fold(0.0, f64::max);
    (f > 0.0).then(|| TAU / f)
}

/// Full interaction-picture ion Hamiltonian with the displacement
/// exponential expanded to `lamb_dicke_order` in η.
pub fn build_ion_full(p: &PhysicalParams, spec: HilbertSpec, lamb_dicke_order: usize) -> Result<TimeDependentHamiltonian> {
    let half: Vec<TdTerm> = ion_half_terms(p, spec, lamb_dicke_order)?
        .into_iter()
        .map(|(_, _, t)| t)
        .collect();
    let hint = period_hint(&half);
    TimeDependentHamiltonian::with_conjugates(spec, half, hint)
}

/// Second-order expansion with every term oscillating at `|f| ≥ ν/2`
/// discarded.
pub fn build_rwa(p: &PhysicalParams, spec: HilbertSpec) -> Result<TimeDependentHamiltonian> {
    let half: Vec<TdTerm> = ion_half_terms(p, spec, 2)?
        .into_iter()
        .map(|(_, _, t)| t)
        .filter(|t| t.envelope.frequency().abs() < 0.5 * p.nu)
        .collect();
    let hint = period_hint(&half);
    TimeDependentHamiltonian::with_conjugates(spec, half, hint)
}

/// Closed-form RWA Hamiltonian
/// `−(η²Ω/4)[a² e^{−iδ_r t} e^{iφ_r} + a†² e^{−iδ_b t} e^{iφ_b}] σ_+ + h.c.`,
/// written directly rather than obtained by filtering.
pub fn rwa_reference(p: &PhysicalParams, spec: HilbertSpec) -> Result<TimeDependentHamiltonian> {
    if spec.n_qubits != 1 {
        return Err(Error::InvalidParameter("single ion only".into()));
    }
    let a = boson_destroy(spec.fock_cutoff);
    let a2 = a.matmul(&a);
    let ad2 = a2.adjoint();
    let plus = Pauli::Plus.matrix();
    let g = 0.25 * p.eta * p.eta * p.rabi;
    let half = vec![
        TdTerm {
            envelope: Envelope::Harmonic {
                amplitude: C64::from_polar(-g, p.phi_r),
                frequency: -p.delta_r,
            },
            operator: plus.kron(&a2),
        },
        TdTerm {
            envelope: Envelope::Harmonic {
                amplitude: C64::from_polar(-g, p.phi_b),
                frequency: -p.delta_b,
            },
            operator: plus.kron(&ad2),
        },
    ];
    TimeDependentHamiltonian::with_conjugates(spec, half, None)
}

/// Frame generator `H₀ = ¼(δ_b − δ_r) a†a + ¼(δ_b + δ_r) σ_z`.
pub fn simulation_frame(p: &PhysicalParams, spec: HilbertSpec) -> Result<FockOperator> {
    let n = embed_boson(spec, &boson_number(spec.fock_cutoff));
    let z = qubit_op(spec, Pauli::Z, 0)?;
    Ok(n
        .scale_re(0.25 * (p.delta_b - p.delta_r))
        .add(&z.scale_re(0.25 * (p.delta_b + p.delta_r))))
}

/// Transforms the RWA Hamiltonian into the frame rotating with `H₀`:
/// `e^{iH₀t} H(t) e^{−iH₀t} − H₀`. Every surviving matrix element must be
/// stationary in that frame; otherwise an error is returned.
pub fn simulation_picture(p: &PhysicalParams, spec: HilbertSpec) -> Result<FockOperator> {
    let rwa = build_rwa(p, spec)?;
    let h0 = simulation_frame(p, spec)?;
    let e0: Vec<f64> = h0.matrix().diagonal().iter().map(|v| v.re).collect();
    let scale = p.delta_r.abs().max(p.delta_b.abs()).max(p.nu * 1e-9);
    let mut trip = Vec::new();
    for term in rwa.terms() {
        let (amp, f) = match term.envelope {
            Envelope::Harmonic { amplitude, frequency } => (amplitude, frequency),
            Envelope::Constant(c) => (c, 0.0),
            Envelope::Linear { .. } => unreachable!("ion terms are harmonic"),
        };
        for (r, c, v) in term.operator.iter() {
            let residual = f + e0[r] - e0[c];
            if residual.abs() > 1e-9 * scale {
                return Err(Error::InvalidParameter(format!(
                    "element ({r},{c}) still oscillates at {residual:.3e} in the simulation frame"
                )));
            }
            trip.push((r, c, amp * v));
        }
    }
    let m = CsrMatrix::from_triplets(spec.dim(), spec.dim(), trip);
    Ok(FockOperator::new(spec, m)?.sub(&h0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{build_dicke, params_to_effective, EffectiveParams};
    use crate::linalg::eigh;

    fn ion_params() -> PhysicalParams {
        PhysicalParams::from_hz(1e6, 0.0, -16e3, 0.04, 100e3)
    }

    fn spec(c: usize) -> HilbertSpec {
        HilbertSpec::new(1, c).unwrap()
    }

    #[test]
    fn order_two_filtered_equals_closed_form() {
        let mut p = ion_params();
        p.phi_r = 0.3;
        p.phi_b = -1.1;
        let s = spec(10);
        let filtered = build_rwa(&p, s).unwrap();
        let reference = rwa_reference(&p, s).unwrap();
        for k in 0..15 {
            let t = 1.7e-6 * k as f64;
            let d = filtered.evaluate(t).max_abs_diff(&reference.evaluate(t));
            assert!(d < 1e-12 * p.rabi, "t={t}: {d}");
        }
    }

    #[test]
    fn zero_eta_reduces_to_carrier() {
        let mut p = ion_params();
        p.eta = 0.0;
        p.phi_r = 0.4;
        p.phi_b = 1.3;
        let s = spec(4);
        let h = build_ion_full(&p, s, 4).unwrap().evaluate(0.0);
        let plus = qubit_op(s, Pauli::Plus, 0).unwrap();
        let c = (C64::from_polar(1.0, p.phi_r) + C64::from_polar(1.0, p.phi_b)) * (0.5 * p.rabi);
        let expect = plus.scale(c).add(&plus.adjoint().scale(c.conj()));
        assert!(h.max_abs_diff(&expect) < 1e-12 * p.rabi);
    }

    #[test]
    fn full_model_hermitian_at_random_times() {
        let s = spec(8);
        let h = build_ion_full(&ion_params(), s, 4).unwrap();
        let mut t = 0.123e-6;
        for _ in 0..20 {
            t = (t * 7.31 + 0.9e-6) % 3e-5;
            assert!(h.evaluate(t).hermitian_deviation() < 1e-12);
        }
    }

    #[test]
    fn order_bounds() {
        let s = spec(4);
        assert!(build_ion_full(&ion_params(), s, 1).is_err());
        assert!(build_ion_full(&ion_params(), s, MAX_LAMB_DICKE_ORDER + 1).is_err());
        assert!(build_ion_full(&ion_params(), HilbertSpec::new(2, 4).unwrap(), 2).is_err());
    }

    #[test]
    fn second_order_harmonic_matches_expansion() {
        // D_{-2} at order 2 is (iη)²/2 a² exactly
        let d = displacement_harmonics(6, 0.1, 2);
        let a = boson_destroy(6);
        let expect = a.matmul(&a).scale_re(-0.005);
        assert!(d[&-2].max_abs_diff(&expect) < 1e-15);
        // D_0 = 1 − η²/2 (2n+1)
        let n = boson_number(6);
        let expect0 = CsrMatrix::identity(7).sub(&n.scale_re(2.0).add(&CsrMatrix::identity(7)).scale_re(0.005));
        assert!(d[&0].max_abs_diff(&expect0) < 1e-15);
    }

    #[test]
    fn frame_transform_gives_effective_model() {
        let p = ion_params();
        let s = spec(12);
        let sim = simulation_picture(&p, s).unwrap();
        let eff = build_dicke(&params_to_effective(&p), s).unwrap();
        let scale = params_to_effective(&p).omega;
        assert!(sim.max_abs_diff(&eff) < 1e-12 * scale);
    }

    #[test]
    fn frame_transform_spectrum_matches_natural_units() {
        // δ_r = 0, δ_b = −4ω gives ω_q = 2ω
        let w = TAU * 4e3;
        let p = PhysicalParams {
            delta_r: 0.0,
            delta_b: -4.0 * w,
            ..ion_params()
        };
        let s = spec(14);
        let sim = eigh(&simulation_picture(&p, s).unwrap().to_dense()).values;
        let g = 0.25 * p.eta * p.eta * p.rabi / w;
        let eff = eigh(&build_dicke(&EffectiveParams::rabi(1.0, 2.0, g), s).unwrap().to_dense()).values;
        for (a, b) in sim.iter().zip(&eff) {
            assert!((a / w - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rwa_vanishes_without_drive() {
        let mut p = ion_params();
        p.rabi = 0.0;
        let h = build_rwa(&p, spec(6)).unwrap();
        assert_eq!(h.evaluate(0.3e-3).frobenius_norm(), 0.0);
    }

    #[test]
    fn rwa_is_static_on_resonance() {
        let mut p = ion_params();
        p.delta_r = 0.0;
        p.delta_b = 0.0;
        let h = build_rwa(&p, spec(6)).unwrap();
        assert_eq!(h.evaluate(0.0), h.evaluate(1.234e-3));
    }
}
