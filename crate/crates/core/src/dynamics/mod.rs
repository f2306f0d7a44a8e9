//! Unitary and Lindblad time evolution.

mod krylov;
mod rk;

use crate::error::{Error, Result};
use crate::fock::{number, qubit_op, FockOperator, HilbertSpec, Pauli, QuantumState, Qubit, StateData};
use crate::hamiltonians::TimeDependentHamiltonian;
use crate::linalg::eigh;
use crate::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rk::{Dp54, StepControl, StepCounters};
use serde::{Deserialize, Serialize};
use std::io::Write;

const DEFAULT_MAX_STEPS: usize = 200_000_000;
const KRYLOV_DIM: usize = 30;

/// `⟨ψ|O|ψ⟩` or `tr(Oρ)`.
pub fn expectation(op: &FockOperator, state: &QuantumState) -> Result<C64> {
    if op.spec() != state.spec() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: state.spec().dim(),
        });
    }
    Ok(match state.data() {
        StateData::Pure(v) => vector_expectation(op.matrix(), v.as_slice()),
        StateData::Density(r) => density_expectation(op.matrix(), r),
    })
}

fn vector_expectation(op: &CsrMatrix, v: &[C64]) -> C64 {
    let ov = op.mul_vec(v);
    v.iter().zip(&ov).map(|(a, b)| a.conj() * b).sum()
}

fn density_expectation(op: &CsrMatrix, rho: &DMatrix<C64>) -> C64 {
    op.iter().map(|(r, c, v)| v * rho[(c, r)]).sum()
}

/// Named operator recorded along a trajectory.
#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub operator: FockOperator,
}

impl Observable {
    pub fn new(name: impl Into<String>, operator: FockOperator) -> Self {
        Self {
            name: name.into(),
            operator,
        }
    }

    pub fn number(spec: HilbertSpec) -> Self {
        Self::new("n", number(spec))
    }

    pub fn sigma_z(spec: HilbertSpec, site: usize) -> Result<Self> {
        Ok(Self::new(format!("sz{}", site + 1), qubit_op(spec, Pauli::Z, site)?))
    }

    /// Projector onto `|q, n⟩`, named like `P_g2`.
    pub fn population(spec: HilbertSpec, qubits: &[Qubit], n: usize) -> Result<Self> {
        let i = spec.index(qubits, n)?;
        let label: String = qubits
            .iter()
            .map(|q| match q {
                Qubit::Excited => 'e',
                Qubit::Ground => 'g',
            })
            .collect();
        let m = CsrMatrix::from_triplets(spec.dim(), spec.dim(), [(i, i, C64::new(1.0, 0.0))]);
        Ok(Self::new(format!("P_{label}{n}"), FockOperator::new(spec, m)?))
    }

    /// `n̂ + 2 Σ_n σ_+^n σ_−^n`, conserved by the two-photon coupling only
    /// within the rotating-wave approximation.
    pub fn excitation_number(spec: HilbertSpec) -> Result<Self> {
        let mut op = number(spec);
        for site in 0..spec.n_qubits {
            let up = qubit_op(spec, Pauli::Plus, site)?.mul(&qubit_op(spec, Pauli::Minus, site)?);
            op = op.add(&up.scale_re(2.0));
        }
        Ok(Self::new("excitations", op))
    }

    /// Populations of `|g,2⟩`-style start state, `n̂` and every `σ_z`.
    pub fn standard_set(spec: HilbertSpec, tracked: Option<(&[Qubit], usize)>) -> Result<Vec<Self>> {
        let mut v = Vec::new();
        if let Some((q, n)) = tracked {
            v.push(Self::population(spec, q, n)?);
        }
        v.push(Self::number(spec));
        for site in 0..spec.n_qubits {
            v.push(Self::sigma_z(spec, site)?);
        }
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConstMethod {
    #[default]
    Eig,
    Krylov,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub tol: f64,
    pub store_states: bool,
    pub max_steps: usize,
}

impl EvolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            store_states: true,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub method: String,
    pub tol: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    pub max_local_error: f64,
    /// Largest `|‖ψ‖ − 1|` (pure) or `|tr ρ − 1|` (mixed) at output times.
    pub max_norm_drift: f64,
    /// Smallest eigenvalue of ρ seen at output times (mixed runs only).
    pub min_eigenvalue: Option<f64>,
    pub krylov_max_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableTrace {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// One state per output time; empty when states were not stored.
    pub states: Vec<QuantumState>,
    pub observables: Vec<ObservableTrace>,
    pub stats: IntegratorStats,
    final_state: QuantumState,
}

impl EvolutionResult {
    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables
            .iter()
            .find(|o| o.name == name)
            .map(|o| o.values.as_slice())
    }

    pub fn final_state(&self) -> &QuantumState {
        &self.final_state
    }

    /// CSV with a `t` column and one column per observable. `comments` are
    /// written first as `# ` lines.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut cw = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.observables.iter().map(|o| o.name.clone()));
        cw.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:e}")];
            row.extend(self.observables.iter().map(|o| format!("{:e}", o.values[k])));
            cw.write_record(&row)?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn to_json(&self, metadata: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "metadata": metadata,
            "integrator_stats": self.stats,
            "times": self.times,
            "observables": self.observables,
        })
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn check_pure(spec: HilbertSpec, psi0: &QuantumState) -> Result<DVector<C64>> {
    if psi0.spec() != spec {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: psi0.spec().dim(),
        });
    }
    psi0.as_vector()
        .cloned()
        .ok_or_else(|| Error::InvalidState("pure state required".into()))
}

struct Recorder<'a> {
    spec: HilbertSpec,
    observables: &'a [Observable],
    traces: Vec<Vec<f64>>,
    states: Vec<QuantumState>,
    store: bool,
    max_drift: f64,
}

impl<'a> Recorder<'a> {
    fn new(spec: HilbertSpec, observables: &'a [Observable], store: bool) -> Result<Self> {
        for o in observables {
            if o.operator.spec() != spec {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim(),
                    got: o.operator.dim(),
                });
            }
        }
        Ok(Self {
            spec,
            observables,
            traces: vec![Vec::new(); observables.len()],
            states: Vec::new(),
            store,
            max_drift: 0.0,
        })
    }

    fn record_pure(&mut self, v: &DVector<C64>) -> QuantumState {
        self.max_drift = self.max_drift.max((v.norm() - 1.0).abs());
        for (tr, o) in self.traces.iter_mut().zip(self.observables) {
            tr.push(vector_expectation(o.operator.matrix(), v.as_slice()).re);
        }
        let s = QuantumState::from_raw(self.spec, StateData::Pure(v.clone()));
        if self.store {
            self.states.push(s.clone());
        }
        s
    }

    fn record_density(&mut self, rho: &DMatrix<C64>) -> QuantumState {
        self.max_drift = self.max_drift.max((rho.trace().re - 1.0).abs());
        for (tr, o) in self.traces.iter_mut().zip(self.observables) {
            tr.push(density_expectation(o.operator.matrix(), rho).re);
        }
        let s = QuantumState::from_raw(self.spec, StateData::Density(rho.clone()));
        if self.store {
            self.states.push(s.clone());
        }
        s
    }

    fn finish(self, times: &[f64], mut stats: IntegratorStats, final_state: QuantumState) -> EvolutionResult {
        stats.max_norm_drift = self.max_drift;
        EvolutionResult {
            times: times.to_vec(),
            states: self.states,
            observables: self
                .observables
                .iter()
                .zip(self.traces)
                .map(|(o, values)| ObservableTrace {
                    name: o.name.clone(),
                    values,
                })
                .collect(),
            stats,
            final_state,
        }
    }
}

/// Evolves `psi0` (given at `t_grid[0]`) under a time-independent `H`.
///
/// `Eig` diagonalizes densely and is exact up to the eigensolver. `Krylov`
/// takes Lanczos substeps whose error estimates sum to at most `tol`.
pub fn evolve_const(
    h: &FockOperator,
    psi0: &QuantumState,
    t_grid: &[f64],
    method: ConstMethod,
    opts: &EvolveOptions,
    observables: &[Observable],
) -> Result<EvolutionResult> {
    check_grid(t_grid)?;
    h.ensure_hermitian(1e-12)?;
    let spec = h.spec();
    let v0 = check_pure(spec, psi0)?;
    let mut rec = Recorder::new(spec, observables, opts.store_states)?;
    let mut stats = IntegratorStats {
        method: format!("{method:?}").to_lowercase(),
        tol: opts.tol,
        ..Default::default()
    };
    let mut last = rec.record_pure(&v0);
    match method {
        ConstMethod::Eig => {
            let eig = eigh(&h.to_dense());
            for &t in &t_grid[1..] {
                let v = eig.propagate(&v0, t - t_grid[0]);
                last = rec.record_pure(&v);
            }
            stats.steps = t_grid.len() - 1;
        }
        ConstMethod::Krylov => {
            let m = h.matrix();
            let span = t_grid[t_grid.len() - 1] - t_grid[0];
            let mut dt = (10.0 / m.inf_norm().max(f64::MIN_POSITIVE)).min(span.max(f64::MIN_POSITIVE));
            let mut v = v0;
            let mut t = t_grid[0];
            let mut max_dim = 0;
            for &t_out in &t_grid[1..] {
                while t < t_out {
                    if stats.steps + stats.rejected_steps >= opts.max_steps {
                        return Err(Error::Budget(format!("Krylov step limit reached at t = {t:.6e}")));
                    }
                    let step = dt.min(t_out - t);
                    let out = krylov::expm_step(m, &v, step, KRYLOV_DIM);
                    stats.rhs_evaluations += out.dim;
                    if out.error > opts.tol * (step / span).min(1.0) {
                        stats.rejected_steps += 1;
                        dt = 0.5 * step;
                        if dt < 1e-12 * span {
                            return Err(Error::KrylovBreakdown { residual: out.error });
                        }
                        continue;
                    }
                    max_dim = max_dim.max(out.dim);
                    stats.steps += 1;
                    stats.max_local_error = stats.max_local_error.max(out.error);
                    v = out.result;
                    t = if step == t_out - t { t_out } else { t + step };
                    if out.error < 1e-2 * opts.tol * (step / span).min(1.0) && step == dt {
                        dt *= 1.5;
                    }
                }
                last = rec.record_pure(&v);
            }
            stats.krylov_max_dim = Some(max_dim);
        }
    }
    Ok(rec.finish(t_grid, stats, last))
}

fn rk_control(opts: &EvolveOptions, period_hint: Option<f64>, span: f64) -> StepControl {
    StepControl {
        tol: opts.tol,
        h_max: period_hint.map_or(f64::INFINITY, |p| p / 30.0),
        max_steps: opts.max_steps,
        span: span.max(f64::MIN_POSITIVE),
    }
}

fn initial_step(ctl: &StepControl, norm: f64, span: f64) -> f64 {
    (0.05 / norm.max(f64::MIN_POSITIVE)).min(ctl.h_max).min(span)
}

/// Adaptive Dormand–Prince integration of `i dψ/dt = H(t) ψ`. The step is
/// capped at one thirtieth of the Hamiltonian's period hint, and the error
/// budget `tol` is spread over the whole run.
pub fn evolve_td(
    h: &TimeDependentHamiltonian,
    psi0: &QuantumState,
    t_grid: &[f64],
    opts: &EvolveOptions,
    observables: &[Observable],
) -> Result<EvolutionResult> {
    check_grid(t_grid)?;
    let spec = h.spec();
    let v0 = check_pure(spec, psi0)?;
    let mut rec = Recorder::new(spec, observables, opts.store_states)?;
    let span = t_grid[t_grid.len() - 1] - t_grid[0];
    let ctl = rk_control(opts, h.period_hint(), span);
    let mut rk = Dp54::new(spec.dim(), initial_step(&ctl, h.norm_bound(), span.max(f64::MIN_POSITIVE)));
    let mut cnt = StepCounters::default();
    let mut f = |t: f64, y: &[C64], out: &mut [C64]| {
        h.apply_into(t, y, out);
        for o in out.iter_mut() {
            *o = C64::new(o.im, -o.re);
        }
    };
    let mut y: Vec<C64> = v0.as_slice().to_vec();
    let mut t = t_grid[0];
    let mut last = rec.record_pure(&v0);
    for &t_out in &t_grid[1..] {
        rk.advance(&mut f, &mut y, &mut t, t_out, &ctl, &mut cnt)?;
        last = rec.record_pure(&DVector::from_column_slice(&y));
    }
    let stats = IntegratorStats {
        method: "dopri54".into(),
        tol: opts.tol,
        steps: cnt.accepted,
        rejected_steps: cnt.rejected,
        rhs_evaluations: cnt.rhs_evals,
        max_local_error: cnt.max_error,
        ..Default::default()
    };
    Ok(rec.finish(t_grid, stats, last))
}

/// Dissipator `L` with rate `γ`, entering as `γ (L ρ L† − ½{L†L, ρ})`.
#[derive(Clone, Debug)]
pub struct LindbladChannel {
    pub name: String,
    pub operator: FockOperator,
    pub rate: f64,
}

impl LindbladChannel {
    pub fn new(name: impl Into<String>, operator: FockOperator, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("channel rate {rate} must be finite and ≥ 0")));
        }
        Ok(Self {
            name: name.into(),
            operator,
            rate,
        })
    }

    /// `σ_−` at rate `1/t1`.
    pub fn decay(spec: HilbertSpec, site: usize, t1: f64) -> Result<Self> {
        Self::new(format!("decay{}", site + 1), qubit_op(spec, Pauli::Minus, site)?, inverse_time(t1)?)
    }

    /// `σ_z` at rate `1/(2 t2)`: qubit coherences decay as `e^{−t/t2}`.
    pub fn dephasing(spec: HilbertSpec, site: usize, t2: f64) -> Result<Self> {
        Self::new(
            format!("dephasing{}", site + 1),
            qubit_op(spec, Pauli::Z, site)?,
            0.5 * inverse_time(t2)?,
        )
    }

    /// `a†` at rate `gamma` (phonons per unit time from the vacuum).
    pub fn heating(spec: HilbertSpec, gamma: f64) -> Result<Self> {
        Self::new("heating", crate::fock::create(spec), gamma)
    }
}

fn inverse_time(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("time constant {t} must be > 0")));
    }
    Ok(if t.is_infinite() { 0.0 } else { 1.0 / t })
}

/// Integrates `dρ/dt = −i[H,ρ] + Σ_k γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
/// Fails when the trace drifts by more than `tol` or ρ acquires an
/// eigenvalue below `−10·tol` at an output time.
pub fn evolve_lindblad(
    h: &TimeDependentHamiltonian,
    channels: &[LindbladChannel],
    rho0: &QuantumState,
    t_grid: &[f64],
    opts: &EvolveOptions,
    observables: &[Observable],
) -> Result<EvolutionResult> {
    check_grid(t_grid)?;
    let spec = h.spec();
    if rho0.spec() != spec {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: rho0.spec().dim(),
        });
    }
    for c in channels {
        if c.operator.spec() != spec {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: c.operator.dim(),
            });
        }
    }
    let dim = spec.dim();
    let rho_init = rho0.to_density();
    let mut rec = Recorder::new(spec, observables, opts.store_states)?;

    let active: Vec<(f64, &CsrMatrix)> = channels
        .iter()
        .filter(|c| c.rate > 0.0)
        .map(|c| (c.rate, c.operator.matrix()))
        .collect();
    let mut damping = CsrMatrix::zeros(dim, dim);
    for (r, l) in &active {
        damping = damping.add(&l.adjoint().matmul(l).scale(C64::new(0.0, -0.5 * r)));
    }
    let mut f = |t: f64, y: &[C64], out: &mut [C64]| {
        let rho = DMatrix::from_column_slice(dim, dim, y);
        // A = (H − i/2 Σ γ L†L) ρ
        let mut a = damping.mul_dense(&rho);
        for term in h.terms() {
            a += term.operator.mul_dense(&rho) * term.envelope.at(t);
        }
        let mut d = (&a * C64::new(0.0, -1.0)) + a.adjoint() * C64::new(0.0, 1.0);
        for (r, l) in &active {
            let b = l.mul_dense(&rho);
            d += l.mul_dense(&b.adjoint()) * C64::new(*r, 0.0);
        }
        out.copy_from_slice(d.as_slice());
    };

    let span = t_grid[t_grid.len() - 1] - t_grid[0];
    let ctl = rk_control(opts, h.period_hint(), span);
    let rate_sum: f64 = active.iter().map(|(r, l)| r * l.inf_norm().powi(2)).sum();
    let mut rk = Dp54::new(
        dim * dim,
        initial_step(&ctl, 2.0 * h.norm_bound() + rate_sum, span.max(f64::MIN_POSITIVE)),
    );
    let mut cnt = StepCounters::default();
    let mut y: Vec<C64> = rho_init.as_slice().to_vec();
    let mut t = t_grid[0];
    let mut min_eig = f64::INFINITY;
    let mut check = |rho: &DMatrix<C64>, t: f64| -> Result<()> {
        let drift = (rho.trace() - C64::new(1.0, 0.0)).norm();
        if drift > opts.tol {
            return Err(Error::TraceDrift {
                drift,
                tolerance: opts.tol,
                time: t,
            });
        }
        let lo = eigh(rho).values.first().copied().unwrap_or(0.0);
        min_eig = min_eig.min(lo);
        if lo < -10.0 * opts.tol {
            return Err(Error::InvalidState(format!(
                "density matrix lost positivity at t = {t:.6e} (eigenvalue {lo:.3e})"
            )));
        }
        Ok(())
    };
    check(&rho_init, t)?;
    let mut last = rec.record_density(&rho_init);
    for &t_out in &t_grid[1..] {
        rk.advance(&mut f, &mut y, &mut t, t_out, &ctl, &mut cnt)?;
        let rho = DMatrix::from_column_slice(dim, dim, &y);
        check(&rho, t)?;
        last = rec.record_density(&rho);
    }
    let stats = IntegratorStats {
        method: "dopri54-lindblad".into(),
        tol: opts.tol,
        steps: cnt.accepted,
        rejected_steps: cnt.rejected,
        rhs_evaluations: cnt.rhs_evals,
        max_local_error: cnt.max_error,
        min_eigenvalue: Some(min_eig),
        ..Default::default()
    };
    Ok(rec.finish(t_grid, stats, last))
}

/// Outcome of rerunning an evolution at doubled Fock cutoff.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutoffConvergence {
    pub cutoff: usize,
    pub doubled_cutoff: usize,
    pub threshold: f64,
    /// Largest pointwise change per observable.
    pub deviations: Vec<(String, f64)>,
    pub converged: bool,
}

impl CutoffConvergence {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().map(|d| d.1).fold(0.0, f64::max)
    }
}

/// Runs `run` at `spec` and at doubled cutoff and compares every shared
/// observable pointwise.
pub fn check_cutoff_convergence<F>(spec: HilbertSpec, threshold: f64, run: F) -> Result<(EvolutionResult, CutoffConvergence)>
where
    F: Fn(HilbertSpec) -> Result<EvolutionResult>,
{
    let coarse = run(spec)?;
    let fine_spec = spec.with_cutoff(2 * spec.fock_cutoff);
    let fine = run(fine_spec)?;
    if coarse.times != fine.times {
        return Err(Error::InvalidParameter("convergence runs used different time grids".into()));
    }
    let mut deviations = Vec::new();
    for o in &coarse.observables {
        if let Some(f) = fine.observable(&o.name) {
            let d = o.values.iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            deviations.push((o.name.clone(), d));
        }
    }
    let converged = deviations.iter().all(|d| d.1 < threshold);
    let report = CutoffConvergence {
        cutoff: spec.fock_cutoff,
        doubled_cutoff: fine_spec.fock_cutoff,
        threshold,
        deviations,
        converged,
    };
    Ok((coarse, report))
}

/// Evenly spaced grid with `n` points on `[t0, t1]`.
pub fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![t0],
        _ => (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect(),
    }
}
