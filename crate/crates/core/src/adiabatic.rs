//! Linear coupling ramps that prepare eigenstates of the coupled model
//! from eigenstates of the decoupled one.

use crate::dynamics::{evolve_td, linspace, EvolveOptions};
use crate::error::{Error, Result};
use crate::fock::{FockOperator, HilbertSpec, QuantumState};
use crate::hamiltonians::{build_dicke, build_free, coupling_operator, EffectiveParams, Envelope, TdTerm, TimeDependentHamiltonian};
use crate::spectrum::{build_parity, sector_eigensystem, GeneralizedParity, ParityLabel};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Minimum number of g steps used to follow the target eigenstate.
const TRACKING_STEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RampSchedule {
    pub g_start: f64,
    pub g_end: f64,
    pub duration: f64,
    /// Energy rank of the initial eigenstate of the `g_start` Hamiltonian.
    pub initial_state_index: usize,
}

impl RampSchedule {
    pub fn linear(g_end: f64, duration: f64, initial_state_index: usize) -> Self {
        Self {
            g_start: 0.0,
            g_end,
            duration,
            initial_state_index,
        }
    }

    pub fn g_at(&self, t: f64) -> f64 {
        self.g_start + (self.g_end - self.g_start) * (t / self.duration).clamp(0.0, 1.0)
    }

    /// Ramps must stay below the collapse point `g = ω/2`.
    pub fn validate(&self, omega: f64) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter(format!("ramp duration {} must be > 0", self.duration)));
        }
        for g in [self.g_start, self.g_end] {
            if !g.is_finite() || g.abs() >= 0.5 * omega {
                return Err(Error::Regime(format!(
                    "ramp endpoint g = {g} is not below the collapse point ω/2 = {}",
                    0.5 * omega
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RampSample {
    pub t: f64,
    pub g: f64,
    pub fidelity: f64,
    /// `⟨Π⟩` of the evolving state.
    pub parity: C64,
    /// `⟨H(t)⟩` of the evolving state.
    pub energy: f64,
    /// Energy of the tracked instantaneous eigenstate.
    pub target_energy: f64,
    /// Energy rank of the tracked eigenstate across all sectors.
    pub target_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RampResult {
    pub schedule: RampSchedule,
    pub cutoff: usize,
    pub sector: ParityLabel,
    pub samples: Vec<RampSample>,
    pub final_fidelity: f64,
    pub initial_index: usize,
    pub final_index: usize,
    pub max_parity_deviation: f64,
    pub max_norm_drift: f64,
    pub steps: usize,
}

impl RampResult {
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "g", "fidelity", "parity_re", "parity_im", "energy", "target_energy", "target_index"])?;
        for s in &self.samples {
            wr.write_record([
                format!("{:e}", s.t),
                format!("{:e}", s.g),
                format!("{:e}", s.fidelity),
                format!("{:e}", s.parity.re),
                format!("{:e}", s.parity.im),
                format!("{:e}", s.energy),
                format!("{:e}", s.target_energy),
                s.target_index.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "schedule": self.schedule,
            "cutoff": self.cutoff,
            "sector": self.sector,
            "final_fidelity": self.final_fidelity,
            "index_map": { "initial": self.initial_index, "final": self.final_index },
            "max_parity_deviation": self.max_parity_deviation,
            "max_norm_drift": self.max_norm_drift,
            "steps": self.steps,
        })
    }
}

/// Eigenstate of rank `index` of `h` (over all sectors), with its sector
/// and rank inside the sector.
fn ranked_eigenstate(h: &FockOperator, parity: &GeneralizedParity, index: usize) -> Result<(DVector<C64>, f64, ParityLabel, usize)> {
    let mut all: Vec<(f64, ParityLabel, usize)> = Vec::new();
    let mut vecs = Vec::new();
    for label in ParityLabel::ALL {
        let size = parity.sector_indices(label).len();
        let k = (index + 1).min(size);
        if k == 0 {
            continue;
        }
        let (vals, v) = sector_eigensystem(h, label, k, parity)?;
        for (r, e) in vals.into_iter().enumerate() {
            all.push((e, label, r));
        }
        vecs.push((label, v));
    }
    if index >= all.len() {
        return Err(Error::InvalidParameter(format!("state index {index} exceeds the space")));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (e, label, rank) = all[index];
    let v = vecs.iter().find(|(l, _)| *l == label).expect("sector solved").1.column(rank).into_owned();
    Ok((v, e, label, rank))
}

/// Rank of energy `e` in sector `label` among all levels of `h`.
fn global_rank(h: &FockOperator, parity: &GeneralizedParity, e: f64, label: ParityLabel, rank: usize) -> Result<usize> {
    let mut below = rank;
    for other in ParityLabel::ALL {
        if other == label {
            continue;
        }
        let size = parity.sector_indices(other).len();
        let k = (rank + 8).min(size);
        if k == 0 {
            continue;
        }
        let (vals, _) = sector_eigensystem(h, other, k, parity)?;
        below += vals.iter().filter(|&&v| v < e || (v == e && other < label)).count();
    }
    Ok(below)
}

/// Runs a linear ramp from the exact eigenstate of rank
/// `initial_state_index` at `g_start` and records the fidelity against the
/// instantaneous eigenstate, followed through the ramp inside the initial
/// parity sector by maximal overlap.
pub fn run_ramp(schedule: &RampSchedule, template: &EffectiveParams, spec: HilbertSpec, tol: f64, samples: usize) -> Result<RampResult> {
    template.validate()?;
    schedule.validate(template.omega)?;
    if template.homogeneous_g().is_none() {
        return Err(Error::InvalidParameter("ramps need homogeneous couplings".into()));
    }
    let parity = build_parity(spec);
    let h_at = |g: f64| build_dicke(&template.clone().with_g(g), spec);
    let h0 = h_at(schedule.g_start)?;
    let (psi0, _, sector, mut rank) = ranked_eigenstate(&h0, &parity, schedule.initial_state_index)?;
    let lambda = sector.value();

    let free = build_free(template, spec)?;
    let coupling = coupling_operator(template, spec)?;
    let slope = (schedule.g_end - schedule.g_start) / schedule.duration;
    let h = TimeDependentHamiltonian::new(
        spec,
        vec![
            TdTerm {
                envelope: Envelope::Constant(C64::new(1.0, 0.0)),
                operator: free.matrix().clone(),
            },
            TdTerm {
                envelope: Envelope::Linear {
                    offset: schedule.g_start,
                    slope,
                    t_start: 0.0,
                    t_stop: schedule.duration,
                },
                operator: coupling.matrix().clone(),
            },
        ],
        None,
    )?;
    let times = linspace(0.0, schedule.duration, samples.max(2));
    let start = QuantumState::pure_normalized(spec, psi0.clone())?;
    let run = evolve_td(&h, &start, &times, &EvolveOptions::with_tol(tol), &[])?;

    // Follow the target through the sector by overlap with the previous one.
    let sector_size = parity.sector_indices(sector).len();
    let mut prev = psi0;
    let mut out = Vec::with_capacity(times.len());
    let mut max_parity_deviation: f64 = 0.0;
    // Output samples may be coarse; tracking steps are refined in between.
    let substeps = TRACKING_STEPS.div_ceil(times.len() - 1).max(1);
    let mut follow = |g: f64| -> Result<(Vec<f64>, DMatrix<C64>, usize)> {
        let hg = h_at(g)?;
        let kk = (rank + 4).min(sector_size);
        let (vals, vecs) = sector_eigensystem(&hg, sector, kk, &parity)?;
        let best = (0..kk)
            .max_by(|&a, &b| {
                let oa = vecs.column(a).dotc(&prev).norm();
                let ob = vecs.column(b).dotc(&prev).norm();
                oa.total_cmp(&ob)
            })
            .expect("non-empty sector");
        rank = best;
        prev = vecs.column(best).into_owned();
        Ok((vals, vecs, best))
    };
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            let t0 = times[k - 1];
            for j in 1..substeps {
                follow(schedule.g_at(t0 + (t - t0) * j as f64 / substeps as f64))?;
            }
        }
        let g = schedule.g_at(t);
        let hg = h_at(g)?;
        let (vals, vecs, best) = follow(g)?;
        let target = vecs.column(best).into_owned();
        let phi = run.states[k].as_vector().expect("pure run");
        let par = parity.expectation(phi);
        max_parity_deviation = max_parity_deviation.max((par - lambda).norm());
        let energy = phi.dotc(&(hg.matrix().mul_dvec(phi))).re;
        out.push(RampSample {
            t,
            g,
            fidelity: target.dotc(phi).norm_sqr(),
            parity: par,
            energy,
            target_energy: vals[best],
            target_index: global_rank(&hg, &parity, vals[best], sector, best)?,
        });
    }
    let last = out.last().expect("at least two samples");
    Ok(RampResult {
        schedule: *schedule,
        cutoff: spec.fock_cutoff,
        sector,
        final_fidelity: last.fidelity,
        initial_index: schedule.initial_state_index,
        final_index: last.target_index,
        max_parity_deviation,
        max_norm_drift: run.stats.max_norm_drift,
        steps: run.stats.steps,
        samples: out,
    })
}

/// Sudden-quench limit: `|⟨ψ_n(g_end)|ψ_n(g_start)⟩|²` with the final
/// state tracked by maximal overlap in the initial sector.
pub fn sudden_fidelity(schedule: &RampSchedule, template: &EffectiveParams, spec: HilbertSpec) -> Result<f64> {
    schedule.validate(template.omega)?;
    let parity = build_parity(spec);
    let h0 = build_dicke(&template.clone().with_g(schedule.g_start), spec)?;
    let h1 = build_dicke(&template.clone().with_g(schedule.g_end), spec)?;
    let (psi0, _, sector, rank) = ranked_eigenstate(&h0, &parity, schedule.initial_state_index)?;
    let k = (rank + 1).min(parity.sector_indices(sector).len());
    let (_, vecs) = sector_eigensystem(&h1, sector, k, &parity)?;
    Ok(vecs.column(rank).dotc(&psi0).norm_sqr())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderRung {
    pub duration: f64,
    pub final_fidelity: f64,
    pub final_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DurationLadder {
    pub rungs: Vec<LadderRung>,
    /// First duration whose doubling changed the final fidelity by less
    /// than `change_tol`.
    pub converged_duration: Option<f64>,
}

/// Doubles the ramp duration from `schedule.duration` until the final
/// fidelity changes by less than `change_tol`, at most `max_rungs` runs.
pub fn duration_ladder(
    schedule: &RampSchedule,
    template: &EffectiveParams,
    spec: HilbertSpec,
    tol: f64,
    change_tol: f64,
    max_rungs: usize,
) -> Result<DurationLadder> {
    let durations: Vec<f64> = (0..max_rungs).map(|k| schedule.duration * 2f64.powi(k as i32)).collect();
    // The rungs are independent; run them together and cut at convergence.
    let runs: Vec<Result<LadderRung>> = durations
        .par_iter()
        .map(|&d| {
            let s = RampSchedule { duration: d, ..*schedule };
            let r = run_ramp(&s, template, spec, tol, 2)?;
            Ok(LadderRung {
                duration: d,
                final_fidelity: r.final_fidelity,
                final_index: r.final_index,
            })
        })
        .collect();
    let mut rungs = Vec::new();
    let mut converged_duration = None;
    for r in runs {
        let r = r?;
        if let Some(prev) = rungs.last() {
            let p: &LadderRung = prev;
            if (r.final_fidelity - p.final_fidelity).abs() < change_tol {
                converged_duration = Some(p.duration);
                rungs.push(r);
                break;
            }
        }
        rungs.push(r);
    }
    Ok(DurationLadder { rungs, converged_duration })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(c: usize) -> (EffectiveParams, HilbertSpec) {
        (EffectiveParams::rabi(1.0, 1.9, 0.0), HilbertSpec::new(1, c).unwrap())
    }

    #[test]
    fn rejects_ramp_into_collapse() {
        let (p, spec) = setup(20);
        for g in [0.5, 0.7] {
            let r = run_ramp(&RampSchedule::linear(g, 10.0, 0), &p, spec, 1e-8, 5);
            assert!(matches!(r, Err(Error::Regime(_))));
        }
        assert!(run_ramp(&RampSchedule::linear(0.3, 0.0, 0), &p, spec, 1e-8, 5).is_err());
    }

    #[test]
    fn slow_ground_state_ramp() {
        let (p, spec) = setup(40);
        let r = run_ramp(&RampSchedule::linear(0.49, 100.0, 0), &p, spec, 1e-9, 40).unwrap();
        assert!(r.final_fidelity > 0.999, "{}", r.final_fidelity);
        assert!(r.max_parity_deviation < 1e-6);
        assert_eq!(r.sector, ParityLabel::PlusOne);
        assert_eq!((r.initial_index, r.final_index), (0, 0));
        for s in &r.samples {
            assert!((s.energy - s.target_energy).abs() < 0.05, "{s:?}");
        }
    }

    #[test]
    fn coarse_output_sampling_keeps_the_target() {
        let (p, spec) = setup(40);
        let sched = RampSchedule::linear(0.45, 200.0, 4);
        let coarse = run_ramp(&sched, &p, spec, 1e-9, 2).unwrap();
        let fine = run_ramp(&sched, &p, spec, 1e-9, 201).unwrap();
        assert_eq!(coarse.final_index, fine.final_index);
        assert!((coarse.final_fidelity - fine.final_fidelity).abs() < 1e-6);
    }

    #[test]
    fn sudden_quench_limit() {
        let (p, spec) = setup(40);
        let sched = RampSchedule::linear(0.49, 1e-7, 0);
        let quench = run_ramp(&sched, &p, spec, 1e-10, 2).unwrap();
        let sudden = sudden_fidelity(&sched, &p, spec).unwrap();
        assert!((quench.final_fidelity - sudden).abs() < 1e-6);
        let slow = run_ramp(&RampSchedule { duration: 50.0, ..sched }, &p, spec, 1e-8, 2).unwrap();
        assert!(sudden < slow.final_fidelity);
    }

    #[test]
    fn fourth_excited_state_is_relabelled() {
        let (p, spec) = setup(40);
        let r = run_ramp(&RampSchedule::linear(0.49, 400.0, 4), &p, spec, 1e-8, 60).unwrap();
        // |e,1⟩ starts as level 4 and ends as level 3 after crossing a
        // level from another sector.
        assert_eq!(r.sector, ParityLabel::MinusI);
        assert_eq!(r.samples[0].target_index, 4);
        assert_eq!(r.final_index, 3);
        assert!(r.max_parity_deviation < 1e-6);
    }

    #[test]
    fn doubling_ladder_approaches_one() {
        let (p, spec) = setup(30);
        let lad = duration_ladder(&RampSchedule::linear(0.4, 10.0, 0), &p, spec, 1e-9, 1e-4, 6).unwrap();
        for w in lad.rungs.windows(2) {
            assert!(w[1].final_fidelity >= w[0].final_fidelity - 1e-3, "{lad:?}");
        }
        assert!(lad.converged_duration.is_some());
    }

    #[test]
    fn csv_trace_layout() {
        let (p, spec) = setup(10);
        let r = run_ramp(&RampSchedule::linear(0.2, 1.0, 0), &p, spec, 1e-8, 3).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, &["T=1".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# T=1"));
        assert_eq!(lines.next(), Some("t,g,fidelity,parity_re,parity_im,energy,target_energy,target_index"));
        assert_eq!(lines.count(), 3);
        assert_eq!(r.summary()["index_map"]["initial"], 0);
    }
}
