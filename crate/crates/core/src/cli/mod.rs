//! Experiment orchestration behind the `tpr` binary.

pub mod compare;
pub mod config;

use crate::adiabatic::{duration_ladder, run_ramp, RampSchedule};
use crate::bargmann::classify_model;
use crate::dynamics::{
    check_cutoff_convergence, evolve_const, evolve_lindblad, evolve_td, EvolutionResult, EvolveOptions, LindbladChannel,
    Observable,
};
use crate::error::{Error, Result};
use crate::fock::{HilbertSpec, QuantumState};
use crate::hamiltonians::{build_dicke, build_ion_full, params_to_effective, EffectiveUnits, TimeDependentHamiltonian};
use crate::measurement::{
    interaction_via_derivative, validate_dispersive, DerivativeOptions, DispersiveDrive, ProtocolPath, ProtocolReport,
};
use crate::spectrum::{sweep, Regime};
use config::{
    AdiabaticConfig, BasisState, DispersiveConfig, DynamicsConfig, Experiment, ExperimentConfig, FullModelConfig,
    MeasureConfig, SpectrumConfig, StateTerm,
};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::KrylovBreakdown { .. }
        | Error::StepUnderflow { .. }
        | Error::TraceDrift { .. }
        | Error::EigenConvergence { .. } => EXIT_CONVERGENCE,
        Error::Budget(_) => EXIT_BUDGET,
        Error::Io(_) => EXIT_FAIL,
        _ => EXIT_CONFIG,
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// Named convergence checks; any `false` gives the convergence exit code.
    pub convergence: Vec<(String, bool)>,
    /// One-line human summary printed to stdout.
    pub summary: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.convergence.iter().all(|c| c.1) {
            EXIT_OK
        } else {
            EXIT_CONVERGENCE
        }
    }
}

struct Writer<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
    out: RunOutcome,
}

impl<'a> Writer<'a> {
    fn path(&self, suffix: &str, ext: &str) -> PathBuf {
        let stem = if suffix.is_empty() {
            self.cfg.output.name.clone()
        } else {
            format!("{}_{suffix}", self.cfg.output.name)
        };
        self.cfg.output.dir.join(format!("{stem}.{ext}"))
    }

    fn comments(&self, extra: &[String]) -> Vec<String> {
        let mut c = vec![
            format!("physics_hash={}", self.hash),
            format!("kind={}", self.cfg.experiment.name()),
        ];
        c.extend_from_slice(extra);
        c
    }

    fn create(&mut self, suffix: &str, ext: &str) -> Result<BufWriter<File>> {
        let p = self.path(suffix, ext);
        let f = File::create(&p)?;
        self.out.artifacts.push(p);
        Ok(BufWriter::new(f))
    }

    fn json(&mut self, suffix: &str, value: &serde_json::Value) -> Result<()> {
        let w = self.create(suffix, "json")?;
        serde_json::to_writer_pretty(w, value)?;
        Ok(())
    }

    fn trace(&mut self, suffix: &str, r: &EvolutionResult, extra: &[String]) -> Result<()> {
        let comments = self.comments(extra);
        let w = self.create(suffix, "csv")?;
        r.write_csv(w, &comments)
    }
}

/// Runs one experiment, writing its artifacts and a run manifest to the
/// configured output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.output.dir)?;
    let mut w = Writer {
        cfg,
        hash: cfg.physics_hash(),
        out: RunOutcome::default(),
    };
    match &cfg.experiment {
        Experiment::Dynamics(d) => run_dynamics(&mut w, d)?,
        Experiment::FullModel(f) => run_full_model(&mut w, f)?,
        Experiment::Spectrum(s) => run_spectrum(&mut w, s)?,
        Experiment::Adiabatic(a) => run_adiabatic(&mut w, a)?,
        Experiment::Measure(m) => run_measure(&mut w, m)?,
        Experiment::Classify(c) => {
            let m = classify_model(c.g, c.omega)?;
            w.out.summary.push(m.classification.to_string());
            w.json("", &serde_json::to_value(m)?)?;
        }
    }
    let manifest = serde_json::json!({
        "config": cfg,
        "physics_hash": w.hash,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "convergence": w.out.convergence,
        "warnings": w.out.warnings,
        "artifacts": w.out.artifacts,
    });
    let p = w.path("manifest", "json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&p)?), &manifest)?;
    w.out.artifacts.push(p);
    Ok(w.out)
}

fn check_dense(w: &mut Writer, dim: usize, what: &str) -> Result<()> {
    let max = w.cfg.budget.max_dense_dim;
    if dim > max {
        return Err(Error::Budget(format!("{what} needs dense dimension {dim} > budget {max}")));
    }
    if 2 * dim > max {
        w.out.warnings.push(format!("{what}: dense dimension {dim} is above half the budget {max}"));
    }
    Ok(())
}

fn basis_state(spec: HilbertSpec, b: &BasisState) -> Result<QuantumState> {
    QuantumState::basis(spec, &b.qubits, b.n)
}

fn superposition(spec: HilbertSpec, terms: &[StateTerm]) -> Result<QuantumState> {
    let t: Vec<(C64, Vec<_>, usize)> = terms
        .iter()
        .map(|t| (C64::new(t.re, t.im), t.qubits.clone(), t.n))
        .collect();
    QuantumState::superposition(spec, &t)
}

fn run_dynamics(w: &mut Writer, d: &DynamicsConfig) -> Result<()> {
    let params = d.params.effective();
    params.validate()?;
    let spec = HilbertSpec::new(params.n_qubits(), d.cutoff)?;
    let grid = d.grid.points()?;
    let opts = EvolveOptions {
        store_states: false,
        ..EvolveOptions::with_tol(d.tol)
    };
    let channels = |spec: HilbertSpec| -> Result<Vec<LindbladChannel>> {
        let Some(diss) = d.dissipation else { return Ok(vec![]) };
        let mut ch = Vec::new();
        for site in 0..spec.n_qubits {
            if let Some(t1) = diss.t1_s {
                ch.push(LindbladChannel::decay(spec, site, t1)?);
            }
            if let Some(t2) = diss.t2_s {
                ch.push(LindbladChannel::dephasing(spec, site, t2)?);
            }
        }
        if let Some(gamma) = diss.heating_per_s {
            ch.push(LindbladChannel::heating(spec, gamma)?);
        }
        Ok(ch)
    };
    if d.dissipation.is_some() {
        if params.units != EffectiveUnits::RadPerSecond {
            return Err(Error::Config("dissipation rates are in 1/s; parameters must be in rad/s".into()));
        }
        check_dense(w, spec.dim() * spec.dim(), "density-matrix evolution")?;
        if d.check_cutoff {
            check_dense(w, 4 * spec.dim() * spec.dim(), "cutoff-doubling check")?;
        }
    } else if d.method == crate::dynamics::ConstMethod::Eig {
        check_dense(w, spec.dim(), "eigendecomposition")?;
        if d.check_cutoff {
            check_dense(w, 2 * spec.dim(), "cutoff-doubling check")?;
        }
    }
    let run_at = |spec: HilbertSpec| -> Result<EvolutionResult> {
        let h = build_dicke(&params, spec)?;
        let psi0 = basis_state(spec, &d.initial)?;
        let obs = Observable::standard_set(spec, Some((&d.initial.qubits, d.initial.n)))?;
        if d.dissipation.is_some() {
            let td = TimeDependentHamiltonian::constant(&h);
            evolve_lindblad(&td, &channels(spec)?, &psi0.into_density_state(), &grid, &opts, &obs)
        } else {
            evolve_const(&h, &psi0, &grid, d.method, &opts, &obs)
        }
    };
    let (result, conv) = if d.check_cutoff {
        let (r, c) = check_cutoff_convergence(spec, d.convergence_threshold, run_at)?;
        w.out.convergence.push(("cutoff".into(), c.converged));
        (r, Some(c))
    } else {
        (run_at(spec)?, None)
    };
    w.trace("", &result, &[format!("cutoff={}", d.cutoff)])?;
    w.json("", &result.to_json(serde_json::json!({ "cutoff_convergence": conv })))?;
    w.out.summary.push(format!(
        "dynamics: {} samples, {} steps, max norm drift {:.2e}",
        grid.len(),
        result.stats.steps,
        result.stats.max_norm_drift
    ));
    Ok(())
}

fn run_full_model(w: &mut Writer, f: &FullModelConfig) -> Result<()> {
    let spec = HilbertSpec::new(1, f.cutoff)?;
    let grid = f.grid.points()?;
    check_dense(w, spec.dim(), "reference eigendecomposition")?;
    let psi0 = basis_state(spec, &f.initial)?;
    let obs = Observable::standard_set(spec, Some((&f.initial.qubits, f.initial.n)))?;
    let opts = EvolveOptions {
        store_states: false,
        ..EvolveOptions::with_tol(f.tol)
    };
    let full = evolve_td(&build_ion_full(&f.params, spec, f.lamb_dicke_order)?, &psi0, &grid, &opts, &obs)?;
    let eff = params_to_effective(&f.params);
    let exact = evolve_const(&build_dicke(&eff, spec)?, &psi0, &grid, crate::dynamics::ConstMethod::Eig, &opts, &obs)?;
    let extra = [format!("cutoff={}", f.cutoff), format!("lamb_dicke_order={}", f.lamb_dicke_order)];
    w.trace("full", &full, &extra)?;
    w.trace("exact", &exact, &extra)?;
    let mut devs = Vec::new();
    for o in &full.observables {
        let e = exact.observable(&o.name).expect("same observable set");
        let (max, rms) = compare::deviation(&o.values, e);
        devs.push(serde_json::json!({ "observable": o.name, "max": max, "rms": rms }));
    }
    w.json(
        "",
        &serde_json::json!({
            "effective_params": eff,
            "full_stats": full.stats,
            "exact_stats": exact.stats,
            "deviations": devs,
        }),
    )?;
    w.out.summary.push(format!(
        "full_model: {} RK steps, max norm drift {:.2e}",
        full.stats.steps, full.stats.max_norm_drift
    ));
    Ok(())
}

fn run_spectrum(w: &mut Writer, s: &SpectrumConfig) -> Result<()> {
    let g = s.g_grid.points()?;
    let biggest = s.cutoff_policy.schedule.iter().copied().max().unwrap_or(0);
    let sector = (biggest + 1) * (1usize << s.params.n_qubits()) / 4 + 1;
    check_dense(w, sector, "largest parity-sector block")?;
    let sw = sweep(&s.params, &g, s.levels, &s.cutoff_policy)?;
    let comments = w.comments(&[format!("levels={}", s.levels)]);
    let f = w.create("", "csv")?;
    sw.write_csv(f, &comments)?;
    w.json("", &serde_json::to_value(&sw)?)?;
    let bounded_ok = sw
        .points
        .iter()
        .filter(|p| p.regime == Regime::Bounded)
        .all(|p| p.converged);
    w.out.convergence.push(("cutoff_escalation".into(), bounded_ok));
    for p in sw.points.iter().filter(|p| p.regime != Regime::Bounded) {
        w.out.warnings.push(format!("g = {}: {:?} regime, levels not converged", p.g, p.regime));
    }
    w.out.summary.push(format!("spectrum: {} points, {} levels", sw.points.len(), s.levels));
    Ok(())
}

fn run_adiabatic(w: &mut Writer, a: &AdiabaticConfig) -> Result<()> {
    let spec = HilbertSpec::new(a.params.n_qubits(), a.cutoff)?;
    check_dense(w, spec.dim() / 4 + 1, "sector eigensolve")?;
    let mut summaries = Vec::new();
    for &n in &a.initial_indices {
        let sched = RampSchedule::linear(a.g_end, a.duration, n);
        let r = run_ramp(&sched, &a.params, spec, a.tol, a.samples)?;
        let comments = w.comments(&[format!("duration={}", a.duration), format!("initial_index={n}")]);
        let f = w.create(&format!("n{n}"), "csv")?;
        r.write_csv(f, &comments)?;
        let mut s = r.summary();
        if a.ladder_rungs > 0 {
            let lad = duration_ladder(&sched, &a.params, spec, a.tol, 1e-3, a.ladder_rungs + 1)?;
            w.out.convergence.push((format!("duration_ladder_n{n}"), lad.converged_duration.is_some()));
            s["ladder"] = serde_json::to_value(&lad)?;
        }
        w.out
            .summary
            .push(format!("adiabatic n={n}: F={:.6} index {n}->{}", r.final_fidelity, r.final_index));
        summaries.push(s);
    }
    w.json("", &serde_json::Value::Array(summaries))
}

fn drive(d: &DispersiveConfig) -> DispersiveDrive {
    DispersiveDrive {
        delta: d.delta,
        omega0: d.omega0,
        eta: d.eta,
        phase: d.phase,
        nu: d.nu,
        min_detuning_ratio: 20.0,
    }
}

fn run_measure(w: &mut Writer, m: &MeasureConfig) -> Result<()> {
    let value = match m {
        MeasureConfig::Derivative {
            params,
            cutoff,
            state,
            site,
            fd_step,
        } => {
            let spec = HilbertSpec::new(params.n_qubits(), *cutoff)?;
            check_dense(w, spec.dim(), "readout eigendecomposition")?;
            let st = superposition(spec, state)?;
            let opts = DerivativeOptions {
                fd_step: *fd_step,
                ..Default::default()
            };
            let d = interaction_via_derivative(&st, params, *site, &opts)?;
            serde_json::json!({ "report": ProtocolReport::derivative(&d), "details": d })
        }
        MeasureConfig::Parity { cutoff, state, dispersive } => {
            let spec = HilbertSpec::new(1, *cutoff)?;
            let st = superposition(spec, state)?;
            let path = match dispersive {
                None => ProtocolPath::Exact,
                Some(d) => ProtocolPath::Dispersive {
                    drive: drive(d),
                    include_squeezing: d.include_squeezing,
                },
            };
            let r = ProtocolReport::parity(&st, &path)?;
            w.out.warnings.extend(r.flags.iter().cloned());
            serde_json::json!({ "report": r })
        }
        MeasureConfig::Dispersive {
            cutoff,
            initial,
            drive: d,
            tol,
        } => {
            let spec = HilbertSpec::new(1, *cutoff)?;
            check_dense(w, spec.dim(), "effective propagator")?;
            let v = validate_dispersive(&drive(d), &basis_state(spec, initial)?, 50, *tol)?;
            w.out.warnings.extend(v.warnings.iter().cloned());
            serde_json::json!({ "validation": v })
        }
    };
    w.out.summary.push(format!("measure: {}", serde_json::to_string(&value)?));
    w.json("", &value)
}
