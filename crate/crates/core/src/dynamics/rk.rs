//! Dormand–Prince 5(4) with FSAL and max-norm error control per unit step:
//! a step of length `h` may contribute at most `tol · h / span` of local
//! error, so the accumulated error over the run stays of order `tol`.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub(crate) struct StepControl {
    pub tol: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Total integration span used to distribute the error budget.
    pub span: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct StepCounters {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub max_error: f64,
}

pub(crate) struct Dp54 {
    k: Vec<Vec<C64>>,
    tmp: Vec<C64>,
    y_new: Vec<C64>,
    fsal_valid: bool,
    /// Proposed next step, kept across output points.
    pub h: f64,
}

impl Dp54 {
    pub fn new(n: usize, h0: f64) -> Self {
        Self {
            k: vec![vec![C64::new(0.0, 0.0); n]; 7],
            tmp: vec![C64::new(0.0, 0.0); n],
            y_new: vec![C64::new(0.0, 0.0); n],
            fsal_valid: false,
            h: h0,
        }
    }

    /// Advances `y` from `t` to `t_end`.
    pub fn advance<F>(
        &mut self,
        f: &mut F,
        y: &mut [C64],
        t: &mut f64,
        t_end: f64,
        ctl: &StepControl,
        cnt: &mut StepCounters,
    ) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = y.len();
        while *t < t_end {
            if cnt.accepted + cnt.rejected >= ctl.max_steps {
                return Err(Error::Budget(format!("step limit {} reached at t = {:.6e}", ctl.max_steps, *t)));
            }
            let remaining = t_end - *t;
            if remaining <= 1e-13 * t_end.abs() {
                *t = t_end;
                break;
            }
            let mut h = self.h.min(ctl.h_max);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h <= 1e-14 * t.abs().max(t_end.abs()).max(f64::MIN_POSITIVE) {
                return Err(Error::StepUnderflow { time: *t, step: h });
            }
            if !self.fsal_valid {
                f(*t, y, &mut self.k[0]);
                cnt.rhs_evals += 1;
                self.fsal_valid = true;
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..s {
                        if A[s][j] != 0.0 {
                            acc += self.k[j][i] * A[s][j];
                        }
                    }
                    self.tmp[i] = y[i] + acc * h;
                }
                f(*t + C[s] * h, &self.tmp, &mut self.k[s]);
                cnt.rhs_evals += 1;
                if s == 6 {
                    self.y_new.copy_from_slice(&self.tmp);
                }
            }
            let budget = ctl.tol * (h / ctl.span).min(1.0);
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut e = C64::new(0.0, 0.0);
                for (j, &w) in E.iter().enumerate() {
                    if w != 0.0 {
                        e += self.k[j][i] * w;
                    }
                }
                let scale = budget * (1.0 + y[i].norm().max(self.y_new[i].norm()));
                err = err.max((e * h).norm() / scale);
            }
            if err <= 1.0 {
                *t = if last { t_end } else { *t + h };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                cnt.accepted += 1;
                cnt.max_error = cnt.max_error.max(err * budget);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.25)).clamp(0.2, 5.0) };
                // A step clipped to hit an output time says nothing about
                // the natural step size.
                if !last || h >= self.h {
                    self.h = h * grow;
                }
            } else {
                cnt.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.25)).clamp(0.2, 1.0);
            }
        }
        Ok(())
    }
}
