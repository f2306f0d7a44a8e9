//! Truncated qubit ⊗ boson operator algebra.
//!
//! Basis ordering is `qubit_1 ⊗ … ⊗ qubit_N ⊗ boson`, qubit 1 slowest. Each
//! qubit is stored as `[|e⟩, |g⟩]` so that `σ_z|e⟩ = +|e⟩`, `σ_z|g⟩ = −|g⟩`.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpec {
    pub n_qubits: usize,
    pub fock_cutoff: usize,
}

impl HilbertSpec {
    pub fn new(n_qubits: usize, fock_cutoff: usize) -> Result<Self> {
        let spec = Self {
            n_qubits,
            fock_cutoff,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::InvalidSpec("need at least one qubit".into()));
        }
        if self.n_qubits > 16 {
            return Err(Error::InvalidSpec(format!("{} qubits is beyond supported size", self.n_qubits)));
        }
        if self.fock_cutoff < 2 {
            return Err(Error::InvalidSpec(format!(
                "fock_cutoff must be >= 2 for two-photon terms, got {}",
                self.fock_cutoff
            )));
        }
        Ok(())
    }

    pub fn boson_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn qubit_dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.qubit_dim() * self.boson_dim()
    }

    pub fn with_cutoff(&self, fock_cutoff: usize) -> Self {
        Self {
            fock_cutoff,
            ..*self
        }
    }

    /// Flat index of `|q_1 … q_N, n⟩`.
    pub fn index(&self, qubits: &[Qubit], n: usize) -> Result<usize> {
        if qubits.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: qubits.len(),
            });
        }
        if n > self.fock_cutoff {
            return Err(Error::InvalidState(format!(
                "Fock index {n} exceeds cutoff {}",
                self.fock_cutoff
            )));
        }
        let q = qubits.iter().fold(0usize, |acc, &b| (acc << 1) | b.bit());
        Ok(q * self.boson_dim() + n)
    }

    /// Inverse of [`HilbertSpec::index`].
    pub fn labels(&self, index: usize) -> (Vec<Qubit>, usize) {
        let n = index % self.boson_dim();
        let q = index / self.boson_dim();
        let qubits = (0..self.n_qubits)
            .map(|k| Qubit::from_bit((q >> (self.n_qubits - 1 - k)) & 1))
            .collect();
        (qubits, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Qubit {
    /// Excited, `σ_z = +1`.
    #[serde(alias = "e")]
    Excited,
    /// Ground, `σ_z = −1`.
    #[serde(alias = "g")]
    Ground,
}

impl Qubit {
    fn bit(self) -> usize {
        match self {
            Qubit::Excited => 0,
            Qubit::Ground => 1,
        }
    }

    fn from_bit(b: usize) -> Self {
        if b == 0 {
            Qubit::Excited
        } else {
            Qubit::Ground
        }
    }

    pub fn sigma_z(self) -> f64 {
        match self {
            Qubit::Excited => 1.0,
            Qubit::Ground => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pauli {
    X,
    Y,
    Z,
    /// `σ_+ = (σ_x + iσ_y)/2 = |e⟩⟨g|`
    Plus,
    /// `σ_- = (σ_x − iσ_y)/2 = |g⟩⟨e|`
    Minus,
}

impl Pauli {
    pub fn matrix(self) -> CsrMatrix {
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let t = match self {
            Pauli::X => vec![(0, 1, one), (1, 0, one)],
            Pauli::Y => vec![(0, 1, -i), (1, 0, i)],
            Pauli::Z => vec![(0, 0, one), (1, 1, -one)],
            Pauli::Plus => vec![(0, 1, one)],
            Pauli::Minus => vec![(1, 0, one)],
        };
        CsrMatrix::from_triplets(2, 2, t)
    }
}

/// Sparse operator on a [`HilbertSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    spec: HilbertSpec,
    matrix: CsrMatrix,
}

impl FockOperator {
    pub fn new(spec: HilbertSpec, matrix: CsrMatrix) -> Result<Self> {
        spec.validate()?;
        if matrix.nrows() != spec.dim() || matrix.ncols() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        if !matrix.validate() {
            return Err(Error::InvalidSpec("malformed sparse structure".into()));
        }
        Ok(Self { spec, matrix })
    }

    pub fn zero(spec: HilbertSpec) -> Self {
        Self {
            spec,
            matrix: CsrMatrix::zeros(spec.dim(), spec.dim()),
        }
    }

    pub fn identity(spec: HilbertSpec) -> Self {
        Self {
            spec,
            matrix: CsrMatrix::identity(spec.dim()),
        }
    }

    pub fn spec(&self) -> HilbertSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.matrix
    }

    fn same(&self, other: &Self) {
        assert_eq!(self.spec, other.spec, "operators live on different spaces");
    }

    fn wrap(&self, matrix: CsrMatrix) -> Self {
        Self {
            spec: self.spec,
            matrix,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.same(other);
        self.wrap(self.matrix.add(&other.matrix))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.same(other);
        self.wrap(self.matrix.sub(&other.matrix))
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.same(other);
        self.wrap(self.matrix.matmul(&other.matrix))
    }

    pub fn scale(&self, s: C64) -> Self {
        self.wrap(self.matrix.scale(s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.wrap(self.matrix.scale_re(s))
    }

    pub fn adjoint(&self) -> Self {
        self.wrap(self.matrix.adjoint())
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        self.mul(other).add(&other.mul(self))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.matrix.get(r, c)
    }

    pub fn element(&self, bra: (&[Qubit], usize), ket: (&[Qubit], usize)) -> Result<C64> {
        let r = self.spec.index(bra.0, bra.1)?;
        let c = self.spec.index(ket.0, ket.1)?;
        Ok(self.get(r, c))
    }

    /// `max |H − H†|` divided by `max |H|` (zero for the zero operator).
    pub fn hermitian_deviation(&self) -> f64 {
        let scale = self.matrix.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        self.matrix.hermitian_deviation() / scale
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn ensure_hermitian(&self, tol: f64) -> Result<()> {
        let d = self.hermitian_deviation();
        if d > tol {
            Err(Error::NotHermitian { deviation: d })
        } else {
            Ok(())
        }
    }

    pub fn apply(&self, psi: &DVector<C64>) -> DVector<C64> {
        self.matrix.mul_dvec(psi)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.same(other);
        self.matrix.max_abs_diff(&other.matrix)
    }
}

/// Bosonic annihilation operator on `|0⟩…|cutoff⟩` (boson factor only).
pub fn boson_destroy(cutoff: usize) -> CsrMatrix {
    CsrMatrix::from_triplets(
        cutoff + 1,
        cutoff + 1,
        (1..=cutoff).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
    )
}

pub fn boson_number(cutoff: usize) -> CsrMatrix {
    CsrMatrix::from_diagonal(&(0..=cutoff).map(|n| C64::new(n as f64, 0.0)).collect::<Vec<_>>())
}

/// Kronecker product of factors in the given order.
pub fn kron_all(factors: &[CsrMatrix]) -> CsrMatrix {
    let mut it = factors.iter();
    let first = it.next().cloned().unwrap_or_else(|| CsrMatrix::identity(1));
    it.fold(first, |acc, f| acc.kron(f))
}

/// Kronecker-assembles factors into an operator on `spec`.
pub fn tensor_assemble(spec: HilbertSpec, factors: &[CsrMatrix]) -> Result<FockOperator> {
    if factors.iter().any(|f| !f.is_square()) {
        return Err(Error::InvalidSpec("tensor factors must be square".into()));
    }
    let dim: usize = factors.iter().map(|f| f.nrows()).product();
    if dim != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: dim,
        });
    }
    FockOperator::new(spec, kron_all(factors))
}

/// Embeds a boson-only operator as `I ⊗ … ⊗ I ⊗ B`.
pub fn embed_boson(spec: HilbertSpec, boson: &CsrMatrix) -> FockOperator {
    let mut f: Vec<CsrMatrix> = (0..spec.n_qubits).map(|_| CsrMatrix::identity(2)).collect();
    f.push(boson.clone());
    tensor_assemble(spec, &f).expect("boson factor has cutoff+1 dimension")
}

/// Embeds single-qubit `q` on `site` and boson factor `b`.
pub fn embed_local(spec: HilbertSpec, site: usize, q: &CsrMatrix, b: &CsrMatrix) -> Result<FockOperator> {
    if site >= spec.n_qubits {
        return Err(Error::SiteOutOfRange {
            site,
            n_qubits: spec.n_qubits,
        });
    }
    let mut f: Vec<CsrMatrix> = (0..spec.n_qubits)
        .map(|k| if k == site { q.clone() } else { CsrMatrix::identity(2) })
        .collect();
    f.push(b.clone());
    tensor_assemble(spec, &f)
}

pub fn destroy(spec: HilbertSpec) -> FockOperator {
    embed_boson(spec, &boson_destroy(spec.fock_cutoff))
}

pub fn create(spec: HilbertSpec) -> FockOperator {
    destroy(spec).adjoint()
}

pub fn number(spec: HilbertSpec) -> FockOperator {
    embed_boson(spec, &boson_number(spec.fock_cutoff))
}

/// `a² + a†²` embedded in `spec`.
pub fn two_photon_quadrature(spec: HilbertSpec) -> FockOperator {
    let a = boson_destroy(spec.fock_cutoff);
    let a2 = a.matmul(&a);
    embed_boson(spec, &a2.add(&a2.adjoint()))
}

pub fn qubit_op(spec: HilbertSpec, which: Pauli, site: usize) -> Result<FockOperator> {
    embed_local(spec, site, &which.matrix(), &CsrMatrix::identity(spec.boson_dim()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateData {
    Pure(DVector<C64>),
    Density(DMatrix<C64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    spec: HilbertSpec,
    data: StateData,
}

impl QuantumState {
    pub fn pure(spec: HilbertSpec, psi: DVector<C64>) -> Result<Self> {
        if psi.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: psi.len(),
            });
        }
        let n = psi.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("norm {n} differs from 1")));
        }
        Ok(Self {
            spec,
            data: StateData::Pure(psi),
        })
    }

    /// Normalizes `psi` first; fails on the zero vector.
    pub fn pure_normalized(spec: HilbertSpec, psi: DVector<C64>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::pure(spec, psi / C64::new(n, 0.0))
    }

    pub fn density(spec: HilbertSpec, rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != spec.dim() || rho.ncols() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: rho.nrows(),
            });
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let herm = (&rho - rho.adjoint()).camax();
        if herm > NORM_TOL {
            return Err(Error::InvalidState(format!("density matrix not Hermitian ({herm:.3e})")));
        }
        Ok(Self {
            spec,
            data: StateData::Density(rho),
        })
    }

    /// Product basis state `|q_1 … q_N, n⟩`.
    pub fn basis(spec: HilbertSpec, qubits: &[Qubit], n: usize) -> Result<Self> {
        let idx = spec.index(qubits, n)?;
        let mut v = DVector::zeros(spec.dim());
        v[idx] = C64::new(1.0, 0.0);
        Self::pure(spec, v)
    }

    /// Normalized superposition of product basis states.
    pub fn superposition(spec: HilbertSpec, terms: &[(C64, Vec<Qubit>, usize)]) -> Result<Self> {
        let mut v = DVector::zeros(spec.dim());
        for (amp, q, n) in terms {
            v[spec.index(q, *n)?] += *amp;
        }
        Self::pure_normalized(spec, v)
    }

    pub fn spec(&self) -> HilbertSpec {
        self.spec
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn as_vector(&self) -> Option<&DVector<C64>> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Density(_) => None,
        }
    }

    pub fn to_density(&self) -> DMatrix<C64> {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Density(r) => r.clone(),
        }
    }

    pub fn into_density_state(self) -> Self {
        let rho = self.to_density();
        Self {
            spec: self.spec,
            data: StateData::Density(rho),
        }
    }

    /// Builds a state without validation; used by integrators whose output
    /// drift is checked separately.
    pub(crate) fn from_raw(spec: HilbertSpec, data: StateData) -> Self {
        Self { spec, data }
    }

    /// Norm for pure states, real trace for density matrices.
    pub fn norm_or_trace(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.norm(),
            StateData::Density(r) => r.trace().re,
        }
    }

    /// `|⟨a|b⟩|²` for pure states, `⟨ψ|ρ|ψ⟩` when one side is mixed.
    pub fn fidelity(&self, other: &Self) -> f64 {
        match (&self.data, &other.data) {
            (StateData::Pure(a), StateData::Pure(b)) => a.dotc(b).norm_sqr(),
            (StateData::Pure(a), StateData::Density(r)) | (StateData::Density(r), StateData::Pure(a)) => {
                a.dotc(&(r * a)).re
            }
            (StateData::Density(r1), StateData::Density(r2)) => {
                // Only exact for at least one pure input; used as overlap tr(ρσ).
                (r1 * r2).trace().re
            }
        }
    }

    /// Probability of the product basis state `|q, n⟩`.
    pub fn population(&self, qubits: &[Qubit], n: usize) -> Result<f64> {
        let i = self.spec.index(qubits, n)?;
        Ok(match &self.data {
            StateData::Pure(v) => v[i].norm_sqr(),
            StateData::Density(r) => r[(i, i)].re,
        })
    }
}
