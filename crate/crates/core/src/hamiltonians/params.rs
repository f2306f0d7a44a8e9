use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Sign of the qubit-boson interaction term.
///
/// `Plus` is the Dicke form `+ (1/N) Σ g_n σ_x^n (a² + a†²)`, `Minus` the
/// trapped-ion effective form `− g σ_x (a² + a†²)`. The two are related by
/// conjugation with `Π_n σ_z^n`, so spectra agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    #[default]
    Plus,
    Minus,
}

impl SignConvention {
    pub fn factor(self) -> f64 {
        match self {
            SignConvention::Plus => 1.0,
            SignConvention::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            SignConvention::Plus => SignConvention::Minus,
            SignConvention::Minus => SignConvention::Plus,
        }
    }
}

/// Unit system of an [`EffectiveParams`] set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveUnits {
    /// Frequencies in units of the mode frequency (ω = 1), times in 1/ω.
    #[default]
    Natural,
    /// Frequencies in rad/s, times in s.
    RadPerSecond,
}

/// Parameters of the ideal two-photon Rabi/Dicke Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveParams {
    #[serde(default)]
    pub units: EffectiveUnits,
    pub omega: f64,
    pub omega_q: Vec<f64>,
    pub g: Vec<f64>,
    #[serde(default)]
    pub sign_convention: SignConvention,
}

impl EffectiveParams {
    /// Homogeneous N-qubit Dicke parameters in natural units, `+g` sign.
    pub fn dicke(n_qubits: usize, omega_q: f64, g: f64) -> Self {
        Self {
            units: EffectiveUnits::Natural,
            omega: 1.0,
            omega_q: vec![omega_q; n_qubits],
            g: vec![g; n_qubits],
            sign_convention: SignConvention::Plus,
        }
    }

    /// Single-qubit parameters in the trapped-ion (`−g`) convention.
    pub fn rabi(omega: f64, omega_q: f64, g: f64) -> Self {
        Self {
            units: EffectiveUnits::Natural,
            omega,
            omega_q: vec![omega_q],
            g: vec![g],
            sign_convention: SignConvention::Minus,
        }
    }

    pub fn with_sign(mut self, s: SignConvention) -> Self {
        self.sign_convention = s;
        self
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = vec![g; self.n_qubits()];
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.omega_q.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega must be > 0, got {}", self.omega)));
        }
        if self.omega_q.is_empty() {
            return Err(Error::InvalidParameter("need at least one qubit".into()));
        }
        if self.g.len() != self.omega_q.len() {
            return Err(Error::InvalidParameter(format!(
                "{} couplings for {} qubits",
                self.g.len(),
                self.omega_q.len()
            )));
        }
        if self.g.iter().chain(&self.omega_q).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        Ok(())
    }

    /// The common coupling if all `g_n` are equal.
    pub fn homogeneous_g(&self) -> Option<f64> {
        let g0 = *self.g.first()?;
        self.g.iter().all(|&g| g == g0).then_some(g0)
    }

    /// Rescales to natural units. Returns the new set and the frequency
    /// scale (ω in the original units) needed to map times back.
    pub fn to_natural(&self) -> (Self, f64) {
        let s = self.omega;
        let p = Self {
            units: EffectiveUnits::Natural,
            omega: 1.0,
            omega_q: self.omega_q.iter().map(|w| w / s).collect(),
            g: self.g.iter().map(|g| g / s).collect(),
            sign_convention: self.sign_convention,
        };
        (p, s)
    }
}

/// Trapped-ion driving parameters. Stored in rad/s; the JSON form carries
/// explicit `*_over_2pi_hz` / `*_rad` annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PhysicalParamsJson", try_from = "PhysicalParamsJson")]
pub struct PhysicalParams {
    /// Trap frequency ν.
    pub nu: f64,
    /// Internal transition frequency. Only detunings enter the dynamics.
    pub omega_int: f64,
    pub delta_r: f64,
    pub delta_b: f64,
    /// Lamb-Dicke parameter η.
    pub eta: f64,
    /// Drive strength Ω (same for both tones).
    pub rabi: f64,
    pub phi_r: f64,
    pub phi_b: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParamsJson {
    pub nu_over_2pi_hz: f64,
    #[serde(default)]
    pub omega_int_over_2pi_hz: f64,
    pub delta_r_over_2pi_hz: f64,
    pub delta_b_over_2pi_hz: f64,
    pub eta: f64,
    pub rabi_over_2pi_hz: f64,
    #[serde(default)]
    pub phi_r_rad: f64,
    #[serde(default)]
    pub phi_b_rad: f64,
}

impl From<PhysicalParams> for PhysicalParamsJson {
    fn from(p: PhysicalParams) -> Self {
        Self {
            nu_over_2pi_hz: p.nu / TAU,
            omega_int_over_2pi_hz: p.omega_int / TAU,
            delta_r_over_2pi_hz: p.delta_r / TAU,
            delta_b_over_2pi_hz: p.delta_b / TAU,
            eta: p.eta,
            rabi_over_2pi_hz: p.rabi / TAU,
            phi_r_rad: p.phi_r,
            phi_b_rad: p.phi_b,
        }
    }
}

impl TryFrom<PhysicalParamsJson> for PhysicalParams {
    type Error = Error;

    fn try_from(j: PhysicalParamsJson) -> Result<Self> {
        let p = Self {
            nu: j.nu_over_2pi_hz * TAU,
            omega_int: j.omega_int_over_2pi_hz * TAU,
            delta_r: j.delta_r_over_2pi_hz * TAU,
            delta_b: j.delta_b_over_2pi_hz * TAU,
            eta: j.eta,
            rabi: j.rabi_over_2pi_hz * TAU,
            phi_r: j.phi_r_rad,
            phi_b: j.phi_b_rad,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Thresholds used to judge whether a physical parameter set sits in the
/// regime where the effective model is trustworthy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeThresholds {
    /// Upper bound on `η² (2⟨n⟩ + 1)`.
    pub lamb_dicke: f64,
    /// Upper bound on `|δ_j|/ν` and `Ω/ν`.
    pub slow_ratio: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            lamb_dicke: 0.1,
            slow_ratio: 0.25,
        }
    }
}

impl PhysicalParams {
    /// Builds from frequencies given as `f/2π` in Hz.
    #[allow(clippy::too_many_arguments)]
    pub fn from_hz(nu_hz: f64, delta_r_hz: f64, delta_b_hz: f64, eta: f64, rabi_hz: f64) -> Self {
        Self {
            nu: nu_hz * TAU,
            omega_int: 0.0,
            delta_r: delta_r_hz * TAU,
            delta_b: delta_b_hz * TAU,
            eta,
            rabi: rabi_hz * TAU,
            phi_r: 0.0,
            phi_b: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!("trap frequency must be > 0, got {}", self.nu)));
        }
        if self.eta < 0.0 || self.rabi < 0.0 {
            return Err(Error::InvalidParameter("eta and Omega must be non-negative".into()));
        }
        let all = [
            self.nu,
            self.omega_int,
            self.delta_r,
            self.delta_b,
            self.eta,
            self.rabi,
            self.phi_r,
            self.phi_b,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        Ok(())
    }

    /// `η² (2⟨n⟩ + 1)`.
    pub fn lamb_dicke_factor(&self, mean_n: f64) -> f64 {
        self.eta * self.eta * (2.0 * mean_n + 1.0)
    }

    pub fn check_lamb_dicke(&self, mean_n: f64, th: &RegimeThresholds) -> Result<()> {
        let f = self.lamb_dicke_factor(mean_n);
        if f > th.lamb_dicke {
            return Err(Error::Regime(format!(
                "Lamb-Dicke factor η²(2⟨n⟩+1) = {f:.3e} exceeds {:.3e}",
                th.lamb_dicke
            )));
        }
        Ok(())
    }

    /// Checks `|δ_r|, |δ_b|, Ω ≪ ν` against `th.slow_ratio`.
    pub fn check_slow(&self, th: &RegimeThresholds) -> Result<()> {
        for (name, v) in [("delta_r", self.delta_r), ("delta_b", self.delta_b), ("Omega", self.rabi)] {
            let r = v.abs() / self.nu;
            if r > th.slow_ratio {
                return Err(Error::Regime(format!(
                    "|{name}|/nu = {r:.3e} exceeds {:.3e}",
                    th.slow_ratio
                )));
            }
        }
        Ok(())
    }
}

/// Maps sideband detunings and drive strength to the effective model:
/// `ω = (δ_r − δ_b)/4`, `ω_q = −(δ_r + δ_b)/2`, `g = η²Ω/4`. The result is
/// in rad/s with the `−g` sign convention.
pub fn params_to_effective(p: &PhysicalParams) -> EffectiveParams {
    EffectiveParams {
        units: EffectiveUnits::RadPerSecond,
        omega: 0.25 * (p.delta_r - p.delta_b),
        omega_q: vec![-0.5 * (p.delta_r + p.delta_b)],
        g: vec![0.25 * p.eta * p.eta * p.rabi],
        sign_convention: SignConvention::Minus,
    }
}

/// Inverse of [`params_to_effective`]. Exactly one of `eta`, `rabi` must be
/// given; the other follows from `g = η²Ω/4`.
pub fn effective_to_params(
    e: &EffectiveParams,
    nu: f64,
    eta: Option<f64>,
    rabi: Option<f64>,
) -> Result<PhysicalParams> {
    if e.n_qubits() != 1 {
        return Err(Error::InvalidParameter("the ion mapping is single-qubit".into()));
    }
    if e.units != EffectiveUnits::RadPerSecond {
        return Err(Error::InvalidParameter(
            "effective parameters must be in rad/s before mapping to the ion".into(),
        ));
    }
    let g = e.g[0];
    let (eta, rabi) = match (eta, rabi) {
        (Some(eta), None) if eta > 0.0 => (eta, 4.0 * g / (eta * eta)),
        (None, Some(rabi)) if rabi > 0.0 => ((4.0 * g / rabi).sqrt(), rabi),
        (None, None) => {
            return Err(Error::InvalidParameter(
                "mapping is underdetermined: pin eta or Omega".into(),
            ))
        }
        _ => {
            return Err(Error::InvalidParameter(
                "pin exactly one of eta, Omega with a positive value".into(),
            ))
        }
    };
    if g < 0.0 {
        return Err(Error::InvalidParameter("coupling must be non-negative".into()));
    }
    let omega_q = e.omega_q[0];
    let p = PhysicalParams {
        nu,
        omega_int: 0.0,
        delta_r: 2.0 * e.omega - omega_q,
        delta_b: -2.0 * e.omega - omega_q,
        eta,
        rabi,
        phi_r: 0.0,
        phi_b: 0.0,
    };
    p.validate()?;
    Ok(p)
}
