//! Generalized parity, sector-resolved eigensolves and coupling sweeps.

use crate::error::{Error, Result};
use crate::fock::{FockOperator, HilbertSpec, Qubit};
use crate::hamiltonians::{build_dicke, EffectiveParams};
use crate::linalg::eigh;
use crate::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

/// Eigenvalues of the generalized parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParityLabel {
    #[serde(rename = "+1")]
    PlusOne,
    #[serde(rename = "-1")]
    MinusOne,
    #[serde(rename = "+i")]
    PlusI,
    #[serde(rename = "-i")]
    MinusI,
}

impl ParityLabel {
    pub const ALL: [ParityLabel; 4] = [Self::PlusOne, Self::MinusOne, Self::PlusI, Self::MinusI];

    pub fn value(self) -> C64 {
        match self {
            Self::PlusOne => C64::new(1.0, 0.0),
            Self::MinusOne => C64::new(-1.0, 0.0),
            Self::PlusI => C64::new(0.0, 1.0),
            Self::MinusI => C64::new(0.0, -1.0),
        }
    }

    /// Closest label to an arbitrary complex number.
    pub fn nearest(z: C64) -> Self {
        *Self::ALL
            .iter()
            .min_by(|a, b| (a.value() - z).norm().total_cmp(&(b.value() - z).norm()))
            .expect("four labels")
    }
}

impl fmt::Display for ParityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PlusOne => "+1",
            Self::MinusOne => "-1",
            Self::PlusI => "+i",
            Self::MinusI => "-i",
        })
    }
}

/// `Π = (−1)^N ⊗_n σ_z^n exp(iπ a†a / 2)`. Diagonal in the product basis,
/// so each sector is a set of basis indices.
#[derive(Clone, Debug)]
pub struct GeneralizedParity {
    operator: FockOperator,
    labels: Vec<ParityLabel>,
}

pub fn build_parity(spec: HilbertSpec) -> GeneralizedParity {
    let sign = if spec.n_qubits % 2 == 0 { 1.0 } else { -1.0 };
    let phases = [
        C64::new(1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, -1.0),
    ];
    let diag: Vec<C64> = (0..spec.dim())
        .map(|i| {
            let (qs, n) = spec.labels(i);
            let z: f64 = qs.iter().map(|q| q.sigma_z()).product();
            phases[n % 4] * (sign * z)
        })
        .collect();
    let labels = diag.iter().map(|&z| ParityLabel::nearest(z)).collect();
    let operator = FockOperator::new(spec, CsrMatrix::from_diagonal(&diag)).expect("diagonal matches spec");
    GeneralizedParity { operator, labels }
}

impl GeneralizedParity {
    pub fn operator(&self) -> &FockOperator {
        &self.operator
    }

    pub fn spec(&self) -> HilbertSpec {
        self.operator.spec()
    }

    /// Sector of a product basis state.
    pub fn label_of(&self, qubits: &[Qubit], n: usize) -> Result<ParityLabel> {
        Ok(self.labels[self.spec().index(qubits, n)?])
    }

    pub fn label_of_index(&self, i: usize) -> ParityLabel {
        self.labels[i]
    }

    pub fn sector_indices(&self, label: ParityLabel) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// `‖[H, Π]‖_F / ‖H‖_F`.
    pub fn relative_commutator(&self, h: &FockOperator) -> f64 {
        let c = h.commutator(&self.operator).frobenius_norm();
        let n = h.frobenius_norm();
        if n == 0.0 {
            0.0
        } else {
            c / n
        }
    }

    /// Projector onto one sector applied to `v`.
    pub fn project(&self, label: ParityLabel, v: &DVector<C64>) -> DVector<C64> {
        DVector::from_iterator(
            v.len(),
            v.iter()
                .zip(&self.labels)
                .map(|(x, l)| if *l == label { *x } else { C64::new(0.0, 0.0) }),
        )
    }

    /// `⟨ψ|Π|ψ⟩` for a normalized vector.
    pub fn expectation(&self, v: &DVector<C64>) -> C64 {
        v.iter().zip(&self.labels).map(|(x, l)| x.norm_sqr() * l.value()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub label: ParityLabel,
    /// `|⟨ψ|Π|ψ⟩|`; one for a parity eigenvector.
    pub purity: f64,
    pub mixed: bool,
}

/// Parity label of a normalized vector. Vectors that straddle sectors
/// (purity below `1 − 1e-8`) are flagged as mixed.
pub fn classify(v: &DVector<C64>, parity: &GeneralizedParity) -> Classification {
    let z = parity.expectation(v);
    let purity = z.norm();
    Classification {
        label: ParityLabel::nearest(z),
        purity,
        mixed: purity < 1.0 - 1e-8,
    }
}

#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: DMatrix<C64>,
    pub labels: Vec<Classification>,
    pub max_residual: f64,
    pub norm: f64,
}

const DEGENERACY_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-10;

/// Lowest `k` eigenpairs. When `H` commutes with Π each sector is solved
/// separately, so degenerate partners from different sectors never mix.
/// Otherwise the full matrix is solved and degenerate clusters are
/// rotated onto parity eigenvectors where possible.
pub fn eigensystem(h: &FockOperator, k: usize, parity: &GeneralizedParity) -> Result<Eigensystem> {
    h.ensure_hermitian(1e-12)?;
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={dim}")));
    }
    if parity.spec() != h.spec() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: parity.spec().dim(),
        });
    }
    let (values, vectors, norm) = if parity.relative_commutator(h) <= 1e-12 {
        sector_solve(h, k, parity)
    } else {
        full_solve(h, k, parity)
    };
    let labels: Vec<Classification> = (0..k).map(|j| classify(&vectors.column(j).into_owned(), parity)).collect();
    let hd = h.matrix();
    let mut max_residual: f64 = 0.0;
    for j in 0..k {
        let v = vectors.column(j).into_owned();
        let r = hd.mul_dvec(&v) - &v * C64::new(values[j], 0.0);
        max_residual = max_residual.max(r.norm());
    }
    if max_residual > RESIDUAL_TOL * norm.max(1.0) {
        return Err(Error::EigenConvergence { residual: max_residual });
    }
    Ok(Eigensystem {
        values,
        vectors,
        labels,
        max_residual,
        norm,
    })
}

/// Lowest `k` eigenpairs restricted to one parity sector, embedded in the
/// full space.
pub fn sector_eigensystem(h: &FockOperator, label: ParityLabel, k: usize, parity: &GeneralizedParity) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let idx = parity.sector_indices(label);
    if k > idx.len() {
        return Err(Error::InvalidParameter(format!("sector {label} holds only {} states", idx.len())));
    }
    let e = eigh(&h.matrix().submatrix(&idx, &idx));
    let mut vecs = DMatrix::zeros(h.dim(), k);
    for j in 0..k {
        for (r, &i) in idx.iter().enumerate() {
            vecs[(i, j)] = e.vectors[(r, j)];
        }
    }
    Ok((e.values[..k].to_vec(), vecs))
}

fn sector_solve(h: &FockOperator, k: usize, parity: &GeneralizedParity) -> (Vec<f64>, DMatrix<C64>, f64) {
    let dim = h.dim();
    let mut cands: Vec<(f64, ParityLabel, usize, DVector<C64>)> = Vec::new();
    let mut norm: f64 = 0.0;
    for label in ParityLabel::ALL {
        let idx = parity.sector_indices(label);
        if idx.is_empty() {
            continue;
        }
        let e = eigh(&h.matrix().submatrix(&idx, &idx));
        norm = e.values.iter().fold(norm, |m, v| m.max(v.abs()));
        for j in 0..k.min(idx.len()) {
            let mut v = DVector::zeros(dim);
            for (r, &i) in idx.iter().enumerate() {
                v[i] = e.vectors[(r, j)];
            }
            cands.push((e.values[j], label, j, v));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    cands.truncate(k);
    let values = cands.iter().map(|c| c.0).collect();
    let vectors = DMatrix::from_columns(&cands.iter().map(|c| c.3.clone()).collect::<Vec<_>>());
    (values, vectors, norm)
}

fn full_solve(h: &FockOperator, k: usize, parity: &GeneralizedParity) -> (Vec<f64>, DMatrix<C64>, f64) {
    let e = eigh(&h.to_dense());
    let norm = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut values = e.values.clone();
    let mut vectors = e.vectors.clone();
    // Rotate each degenerate cluster onto sector projections.
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[end - 1] < DEGENERACY_TOL {
            end += 1;
        }
        if end - start > 1 {
            let cols: Vec<DVector<C64>> = (start..end).map(|j| e.vectors.column(j).into_owned()).collect();
            let mut projected = Vec::new();
            for label in ParityLabel::ALL {
                let p: Vec<DVector<C64>> = cols.iter().map(|c| parity.project(label, c)).collect();
                projected.extend(crate::linalg::orthonormalize(&p, 1e-6));
            }
            if projected.len() == end - start {
                let mean = values[start..end].iter().sum::<f64>() / (end - start) as f64;
                for (off, v) in projected.into_iter().enumerate() {
                    vectors.set_column(start + off, &v);
                    values[start + off] = mean;
                }
            }
        }
        start = end;
    }
    values.truncate(k);
    let vectors = vectors.columns(0, k).into_owned();
    (values, vectors, norm)
}

fn mean_photon(spec: HilbertSpec, v: &DVector<C64>) -> f64 {
    v.iter()
        .enumerate()
        .map(|(i, x)| x.norm_sqr() * (i % spec.boson_dim()) as f64)
        .sum()
}

/// Re-indexes a vector from one cutoff to a larger one (zero padded).
pub fn embed_vector(v: &DVector<C64>, from: HilbertSpec, to: HilbertSpec) -> Result<DVector<C64>> {
    if from.n_qubits != to.n_qubits || to.fock_cutoff < from.fock_cutoff || v.len() != from.dim() {
        return Err(Error::InvalidParameter("cannot embed into a smaller or different space".into()));
    }
    let mut out = DVector::zeros(to.dim());
    for (i, x) in v.iter().enumerate() {
        let q = i / from.boson_dim();
        let n = i % from.boson_dim();
        out[q * to.boson_dim() + n] = *x;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Bounded,
    /// `g = ω/2`: the discrete spectrum merges into a band.
    Collapse,
    /// `g > ω/2`: no lower bound.
    Unbounded,
}

impl Regime {
    pub fn of(params: &EffectiveParams) -> Self {
        let r = params.g.iter().fold(0.0f64, |m, g| m.max(g.abs())) / params.omega;
        if (r - 0.5).abs() < 1e-9 {
            Regime::Collapse
        } else if r > 0.5 {
            Regime::Unbounded
        } else {
            Regime::Bounded
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffPolicy {
    /// Cutoffs tried in order until the requested levels converge.
    pub schedule: Vec<usize>,
    /// Allowed energy change (units of ω) between successive cutoffs.
    pub energy_tol: f64,
    /// Allowed relative change of `⟨n̂⟩` between successive cutoffs.
    pub photon_tol: f64,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self {
            schedule: vec![100, 200, 400, 800],
            energy_tol: 1e-8,
            photon_tol: 1e-6,
        }
    }
}

impl CutoffPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.len() < 2 || self.schedule.windows(2).any(|w| w[1] <= w[0]) || self.schedule[0] < 2 {
            return Err(Error::InvalidParameter(
                "cutoff schedule needs at least two increasing cutoffs ≥ 2".into(),
            ));
        }
        if !(self.energy_tol > 0.0 && self.photon_tol > 0.0) {
            return Err(Error::InvalidParameter("convergence tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Level {
    pub energy: f64,
    pub parity: ParityLabel,
    pub mixed: bool,
    pub mean_photon: f64,
    pub converged: bool,
    /// Position among the reported levels of the same sector.
    pub sector_rank: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub g: f64,
    pub cutoff: usize,
    pub regime: Regime,
    pub converged: bool,
    pub levels: Vec<Level>,
    #[serde(skip)]
    pub vectors: DMatrix<C64>,
    #[serde(skip)]
    pub spec: HilbertSpec,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSweep {
    pub template: EffectiveParams,
    pub k: usize,
    pub policy: CutoffPolicy,
    pub points: Vec<SweepPoint>,
}

struct Solved {
    spec: HilbertSpec,
    values: Vec<f64>,
    vectors: DMatrix<C64>,
    labels: Vec<Classification>,
    photons: Vec<f64>,
}

fn solve_at(params: &EffectiveParams, n_qubits: usize, cutoff: usize, k: usize) -> Result<Solved> {
    let spec = HilbertSpec::new(n_qubits, cutoff)?;
    let h = build_dicke(params, spec)?;
    let parity = build_parity(spec);
    let es = eigensystem(&h, k, &parity)?;
    let photons = (0..k).map(|j| mean_photon(spec, &es.vectors.column(j).into_owned())).collect();
    Ok(Solved {
        spec,
        values: es.values,
        vectors: es.vectors,
        labels: es.labels,
        photons,
    })
}

fn sweep_point(template: &EffectiveParams, g: f64, k: usize, policy: &CutoffPolicy) -> Result<SweepPoint> {
    let (natural, _) = template.to_natural();
    let params = natural.with_g(g);
    let regime = Regime::of(&params);
    let n_qubits = params.n_qubits();
    let mut prev = solve_at(&params, n_qubits, policy.schedule[0], k)?;
    let mut flags = vec![false; k];
    if regime == Regime::Bounded {
        for &cutoff in &policy.schedule[1..] {
            let next = solve_at(&params, n_qubits, cutoff, k)?;
            flags = (0..k)
                .map(|j| {
                    let de = (next.values[j] - prev.values[j]).abs();
                    let dn = (next.photons[j] - prev.photons[j]).abs() / next.photons[j].abs().max(1.0);
                    de < policy.energy_tol && dn < policy.photon_tol && next.labels[j].label == prev.labels[j].label
                })
                .collect();
            prev = next;
            if flags.iter().all(|&f| f) {
                break;
            }
        }
    }
    let mut rank = std::collections::BTreeMap::new();
    let levels = (0..k)
        .map(|j| {
            let r = rank.entry(prev.labels[j].label).or_insert(0usize);
            let level = Level {
                energy: prev.values[j],
                parity: prev.labels[j].label,
                mixed: prev.labels[j].mixed,
                mean_photon: prev.photons[j],
                converged: flags[j],
                sector_rank: *r,
            };
            *r += 1;
            level
        })
        .collect();
    Ok(SweepPoint {
        g,
        cutoff: prev.spec.fock_cutoff,
        regime,
        converged: flags.iter().all(|&f| f),
        levels,
        vectors: prev.vectors,
        spec: prev.spec,
    })
}

/// Lowest `k` levels of the Dicke Hamiltonian (in units of ω) on each
/// coupling of `g_grid` (units of ω). Points are solved in parallel on the
/// current rayon pool; couplings at or beyond `ω/2` are reported at the
/// first cutoff with every level unconverged.
pub fn sweep(template: &EffectiveParams, g_grid: &[f64], k: usize, policy: &CutoffPolicy) -> Result<SpectrumSweep> {
    template.validate()?;
    policy.validate()?;
    if g_grid.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::InvalidParameter("couplings must be finite and ≥ 0".into()));
    }
    let points = g_grid
        .par_iter()
        .map(|&g| sweep_point(template, g, k, policy))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumSweep {
        template: template.clone(),
        k,
        policy: policy.clone(),
        points,
    })
}

impl SpectrumSweep {
    pub fn energies(&self, level: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.levels[level].energy).collect()
    }

    /// Follows a level through the sweep by maximal overlap with the
    /// previous point's vector among levels of the same sector. Returns
    /// the level index at every grid point.
    pub fn track(&self, start_level: usize) -> Result<Vec<usize>> {
        let first = self
            .points
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty sweep".into()))?;
        if start_level >= first.levels.len() {
            return Err(Error::InvalidParameter(format!("level {start_level} not in sweep")));
        }
        let mut path = vec![start_level];
        for w in self.points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let cur = *path.last().expect("non-empty");
            let label = a.levels[cur].parity;
            let big = if a.spec.fock_cutoff >= b.spec.fock_cutoff { a.spec } else { b.spec };
            let va = embed_vector(&a.vectors.column(cur).into_owned(), a.spec, big)?;
            let mut best = None;
            for (j, l) in b.levels.iter().enumerate() {
                if l.parity != label {
                    continue;
                }
                let vb = embed_vector(&b.vectors.column(j).into_owned(), b.spec, big)?;
                let ov = va.dotc(&vb).norm();
                if best.is_none_or(|(_, o)| ov > o) {
                    best = Some((j, ov));
                }
            }
            let (j, _) = best.ok_or_else(|| Error::InvalidParameter(format!("sector {label} lost at g = {}", b.g)))?;
            path.push(j);
        }
        Ok(path)
    }

    /// Rows `(g, level_index, energy, parity_label, mean_photon, converged)`.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["g", "level_index", "energy", "parity_label", "mean_photon", "converged"])?;
        for p in &self.points {
            for (j, l) in p.levels.iter().enumerate() {
                cw.write_record([
                    format!("{:e}", p.g),
                    j.to_string(),
                    format!("{:e}", l.energy),
                    l.parity.to_string(),
                    format!("{:e}", l.mean_photon),
                    l.converged.to_string(),
                ])?;
            }
        }
        cw.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::QuantumState;
    use crate::hamiltonians::SignConvention;
    use proptest::prelude::*;

    const E: Qubit = Qubit::Excited;
    const G: Qubit = Qubit::Ground;

    #[test]
    fn parity_of_basis_states() {
        let p = build_parity(HilbertSpec::new(1, 6).unwrap());
        assert_eq!(p.label_of(&[G], 2).unwrap(), ParityLabel::MinusOne);
        assert_eq!(p.label_of(&[E], 0).unwrap(), ParityLabel::MinusOne);
        assert_eq!(p.label_of(&[G], 0).unwrap(), ParityLabel::PlusOne);
        assert_eq!(p.label_of(&[E], 1).unwrap(), ParityLabel::MinusI);
        assert_eq!(p.label_of(&[G], 1).unwrap(), ParityLabel::PlusI);
    }

    #[test]
    fn parity_fourth_power_is_identity() {
        for n in 1..=3 {
            let s = HilbertSpec::new(n, 7).unwrap();
            let p = build_parity(s);
            let pi = p.operator();
            let p4 = pi.mul(pi).mul(pi).mul(pi);
            assert!(p4.max_abs_diff(&FockOperator::identity(s)) < 1e-12);
            let unit = pi.mul(&pi.adjoint());
            assert!(unit.max_abs_diff(&FockOperator::identity(s)) < 1e-12);
        }
    }

    #[test]
    fn parity_commutes_with_dicke() {
        for n in 1..=3 {
            let s = HilbertSpec::new(n, 12).unwrap();
            let h = build_dicke(&EffectiveParams::dicke(n, 1.9, 0.37), s).unwrap();
            assert!(build_parity(s).relative_commutator(&h) <= 1e-12);
        }
    }

    #[test]
    fn classify_examples() {
        let s = HilbertSpec::new(1, 4).unwrap();
        let p = build_parity(s);
        let g0 = QuantumState::basis(s, &[G], 0).unwrap();
        assert_eq!(classify(g0.as_vector().unwrap(), &p).label, ParityLabel::PlusOne);
        let e1 = QuantumState::basis(s, &[E], 1).unwrap();
        let c = classify(e1.as_vector().unwrap(), &p);
        assert_eq!(c.label, ParityLabel::MinusI);
        assert!(!c.mixed);
        let mix = QuantumState::superposition(s, &[(C64::new(1.0, 0.0), vec![G], 0), (C64::new(1.0, 0.0), vec![G], 1)]).unwrap();
        assert!(classify(mix.as_vector().unwrap(), &p).mixed);
    }

    #[test]
    fn decoupled_spectrum() {
        let s = HilbertSpec::new(1, 20).unwrap();
        let h = build_dicke(&EffectiveParams::dicke(1, 1.9, 0.0), s).unwrap();
        let es = eigensystem(&h, 4, &build_parity(s)).unwrap();
        let expect = [-0.95, 0.05, 0.95, 1.05];
        for (a, b) in es.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_partners_get_clean_labels() {
        // ω_q = 2 at g = 0 makes |g,n+2⟩ and |e,n⟩ degenerate but in the
        // same sector, while |g,1⟩ (+i) and |e,... ⟩ pairs cross sectors.
        let s = HilbertSpec::new(1, 20).unwrap();
        let h = build_dicke(&EffectiveParams::dicke(1, 1.0, 0.0), s).unwrap();
        let p = build_parity(s);
        let es = eigensystem(&h, 8, &p).unwrap();
        assert!(es.labels.iter().all(|c| !c.mixed));
        // The dense path must agree once degeneracies are resolved.
        let (vals, vecs, _) = full_solve(&h, 8, &p);
        for j in 0..8 {
            assert!((vals[j] - es.values[j]).abs() < 1e-10);
            assert!(!classify(&vecs.column(j).into_owned(), &p).mixed);
        }
    }

    #[test]
    fn cutoff_doubling_converges_at_moderate_coupling() {
        let params = EffectiveParams::dicke(1, 1.9, 0.3);
        let a = solve_at(&params, 1, 100, 10).unwrap();
        let b = solve_at(&params, 1, 200, 10).unwrap();
        for j in 0..10 {
            assert!((a.values[j] - b.values[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn sweep_marks_beyond_collapse() {
        let policy = CutoffPolicy {
            schedule: vec![30, 60],
            ..Default::default()
        };
        let s = sweep(&EffectiveParams::dicke(1, 1.9, 0.0), &[0.1, 0.5, 0.6], 4, &policy).unwrap();
        assert_eq!(s.points[0].regime, Regime::Bounded);
        assert!(s.points[0].converged);
        assert_eq!(s.points[1].regime, Regime::Collapse);
        assert_eq!(s.points[2].regime, Regime::Unbounded);
        assert!(s.points[1..].iter().all(|p| !p.converged && p.levels.iter().all(|l| !l.converged)));
    }

    #[test]
    fn sign_convention_leaves_spectrum() {
        let s = HilbertSpec::new(2, 30).unwrap();
        let p = build_parity(s);
        let base = EffectiveParams::dicke(2, 1.9, 0.33);
        let a = eigensystem(&build_dicke(&base, s).unwrap(), 10, &p).unwrap();
        let flipped = base.clone().with_sign(SignConvention::Minus);
        let b = eigensystem(&build_dicke(&flipped, s).unwrap(), 10, &p).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_rows() {
        let policy = CutoffPolicy {
            schedule: vec![20, 40],
            ..Default::default()
        };
        let s = sweep(&EffectiveParams::dicke(1, 1.9, 0.0), &[0.0], 2, &policy).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "g,level_index,energy,parity_label,mean_photon,converged");
        assert_eq!(lines[1], "0e0,0,-9.5e-1,+1,0e0,true");
        assert!(lines[2].starts_with("0e0,1,"));
        assert!(lines[2].ends_with(",+i,1e0,true"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn sectors_block_diagonalize(n in 1usize..=3, g in 0.0f64..0.49, wq in 0.1f64..3.0) {
            let s = HilbertSpec::new(n, 9).unwrap();
            let h = build_dicke(&EffectiveParams::dicke(n, wq, g), s).unwrap();
            let p = build_parity(s);
            let off: f64 = h.matrix().iter()
                .filter(|&(r, c, _)| p.label_of_index(r) != p.label_of_index(c))
                .map(|(_, _, v)| v.norm())
                .fold(0.0, f64::max);
            prop_assert!(off <= 1e-12 * h.matrix().max_abs());
        }

        #[test]
        fn classify_round_trip(label_ix in 0usize..4, amps in prop::collection::vec(-1.0f64..1.0, 8)) {
            let s = HilbertSpec::new(2, 5).unwrap();
            let p = build_parity(s);
            let label = ParityLabel::ALL[label_ix];
            let idx = p.sector_indices(label);
            let mut v = DVector::zeros(s.dim());
            for (k, &i) in idx.iter().enumerate() {
                v[i] = C64::new(amps[k % amps.len()], amps[(k + 3) % amps.len()]);
            }
            prop_assume!(v.norm() > 1e-3);
            let v = v.normalize();
            let c = classify(&v, &p);
            prop_assert_eq!(c.label, label);
            prop_assert!(!c.mixed);
        }
    }
}
