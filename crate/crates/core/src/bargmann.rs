//! Characteristic exponents of the Bargmann-space equation at infinity and
//! the resulting spectral classification.
//!
//! Formal solutions grow like `exp(γ z²/2)`, with γ a root of
//! `x⁴ + (2 − ω̄²) x² + 1 = 0`, `ω̄ = ω/g`. A root with `|γ| < 1` gives a
//! normalizable solution. The qubit splitting only enters subleading
//! coefficients, so nothing here depends on it.

use crate::error::{Error, Result};
use crate::spectrum::SpectrumSweep;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const DEFAULT_COLLAPSE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumClass {
    Discrete,
    Collapse,
    ContinuousUnbounded,
}

impl std::fmt::Display for SpectrumClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Discrete => "discrete",
            Self::Collapse => "collapse",
            Self::ContinuousUnbounded => "continuous_unbounded",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentSet {
    pub omega_bar: f64,
    /// `γ₁,₂ = ω̄/2 ± √(ω̄²/4 − 1)`, `γ₃,₄ = −ω̄/2 ± √(ω̄²/4 − 1)`.
    pub gammas: [C64; 4],
    pub classification: SpectrumClass,
}

impl ExponentSet {
    /// Roots strictly inside the unit circle.
    pub fn inside(&self) -> Vec<C64> {
        self.gammas.iter().copied().filter(|g| g.norm() < 1.0 - 1e-12).collect()
    }

    /// `1 − |γ|` for the roots inside the unit circle; zero when there are
    /// none.
    pub fn margin(&self) -> f64 {
        self.inside().iter().map(|g| 1.0 - g.norm()).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v)))).unwrap_or(0.0)
    }

    /// Leading asymptotic data for one exponent.
    pub fn asymptotic(&self, which: usize) -> AsymptoticForm {
        AsymptoticForm::new(self.gammas[which])
    }
}

/// `ψ(z) ~ e^{(γ/2) z² + α z} z^ρ (c₀ + c₁/z + …)`. Only γ is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticForm {
    pub gamma: C64,
    pub alpha: Option<C64>,
    pub rho: Option<C64>,
    pub normalizable: bool,
}

impl AsymptoticForm {
    pub fn new(gamma: C64) -> Self {
        Self {
            gamma,
            alpha: None,
            rho: None,
            normalizable: gamma.norm() < 1.0,
        }
    }
}

pub fn exponents(omega_bar: f64) -> Result<ExponentSet> {
    exponents_with_tol(omega_bar, DEFAULT_COLLAPSE_TOL)
}

/// Closed-form exponents. `|ω̄ − 2| < collapse_tol` is classified as the
/// collapse point.
pub fn exponents_with_tol(omega_bar: f64, collapse_tol: f64) -> Result<ExponentSet> {
    if !(omega_bar > 0.0 && omega_bar.is_finite()) {
        return Err(Error::InvalidParameter(format!("ω̄ = {omega_bar} must be finite and > 0")));
    }
    let h = 0.5 * omega_bar;
    let s = C64::new(h * h - 1.0, 0.0).sqrt();
    let hh = C64::new(h, 0.0);
    let gammas = [hh + s, hh - s, -hh + s, -hh - s];
    let classification = if (omega_bar - 2.0).abs() < collapse_tol {
        SpectrumClass::Collapse
    } else if omega_bar > 2.0 {
        SpectrumClass::Discrete
    } else {
        SpectrumClass::ContinuousUnbounded
    };
    Ok(ExponentSet {
        omega_bar,
        gammas,
        classification,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelClass {
    pub g: f64,
    pub omega: f64,
    pub classification: SpectrumClass,
    /// Distance of the inner exponents from the unit circle; 1 for the
    /// free oscillator, 0 at and beyond collapse.
    pub margin: f64,
    /// Absent for `g = 0`, where ω̄ is infinite.
    pub exponents: Option<ExponentSet>,
}

pub fn classify_model(g: f64, omega: f64) -> Result<ModelClass> {
    if !(omega > 0.0 && omega.is_finite()) || !(g >= 0.0 && g.is_finite()) {
        return Err(Error::InvalidParameter(format!("need g ≥ 0 and ω > 0, got g = {g}, ω = {omega}")));
    }
    if g == 0.0 {
        return Ok(ModelClass {
            g,
            omega,
            classification: SpectrumClass::Discrete,
            margin: 1.0,
            exponents: None,
        });
    }
    let set = exponents(omega / g)?;
    Ok(ModelClass {
        g,
        omega,
        classification: set.classification,
        margin: set.margin(),
        exponents: Some(set),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossRow {
    pub g: f64,
    pub margin: f64,
    pub gap: f64,
    pub ground_photon: f64,
    pub first_photon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossValidation {
    pub rows: Vec<CrossRow>,
    /// Couplings skipped because the sweep did not converge there.
    pub excluded: Vec<f64>,
    pub margin_decreasing: bool,
    pub gap_decreasing: bool,
    pub photon_increasing: bool,
    /// Pearson correlation between margin and gap over the rows.
    pub margin_gap_correlation: f64,
}

/// Correlates the analytic margin with the numerical gap `E₁ − E₀` and the
/// photon numbers of the two lowest levels over the converged points.
pub fn cross_validate(sweep: &SpectrumSweep) -> Result<CrossValidation> {
    if sweep.k < 2 {
        return Err(Error::InvalidParameter("cross-validation needs at least two levels".into()));
    }
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for p in &sweep.points {
        if !p.converged {
            excluded.push(p.g);
            continue;
        }
        // Sweep couplings are in units of ω.
        let m = classify_model(p.g, 1.0)?;
        rows.push(CrossRow {
            g: p.g,
            margin: m.margin,
            gap: p.levels[1].energy - p.levels[0].energy,
            ground_photon: p.levels[0].mean_photon,
            first_photon: p.levels[1].mean_photon,
        });
    }
    let strictly = |f: &dyn Fn(&CrossRow) -> f64, down: bool| {
        rows.windows(2).all(|w| if down { f(&w[1]) < f(&w[0]) } else { f(&w[1]) > f(&w[0]) })
    };
    let margin_decreasing = strictly(&|r| r.margin, true);
    let gap_decreasing = strictly(&|r| r.gap, true);
    let photon_increasing = strictly(&|r| r.ground_photon, false) && strictly(&|r| r.first_photon, false);
    let margin_gap_correlation = pearson(
        &rows.iter().map(|r| r.margin).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.gap).collect::<Vec<_>>(),
    );
    Ok(CrossValidation {
        rows,
        excluded,
        margin_decreasing,
        gap_decreasing,
        photon_increasing,
        margin_gap_correlation,
    })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// One row per set: ω̄, real and imaginary parts of the four exponents,
/// classification and margin.
pub fn write_table<W: Write>(sets: &[ExponentSet], w: W) -> Result<()> {
    let mut cw = csv::Writer::from_writer(w);
    let mut header = vec!["omega_bar".to_string()];
    for j in 1..=4 {
        header.push(format!("gamma{j}_re"));
        header.push(format!("gamma{j}_im"));
    }
    header.push("classification".into());
    header.push("margin".into());
    cw.write_record(&header)?;
    for s in sets {
        let mut row = vec![format!("{:e}", s.omega_bar)];
        for g in &s.gammas {
            row.push(format!("{:e}", g.re));
            row.push(format!("{:e}", g.im));
        }
        row.push(s.classification.to_string());
        row.push(format!("{:e}", s.margin()));
        cw.write_record(&row)?;
    }
    cw.flush()?;
    Ok(())
}
