use crate::error::{Error, Result};
use crate::fock::{FockOperator, HilbertSpec};
use crate::sparse::CsrMatrix;
use num_complex::Complex64 as C64;

/// Scalar time profile multiplying one operator term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Envelope {
    Constant(C64),
    /// `amplitude · e^{i frequency t}`
    Harmonic { amplitude: C64, frequency: f64 },
    /// `offset + slope · t`, clamped to `[t_start, t_stop]`.
    Linear {
        offset: f64,
        slope: f64,
        t_start: f64,
        t_stop: f64,
    },
}

impl Envelope {
    pub fn at(&self, t: f64) -> C64 {
        match *self {
            Envelope::Constant(c) => c,
            Envelope::Harmonic { amplitude, frequency } => amplitude * C64::from_polar(1.0, frequency * t),
            Envelope::Linear {
                offset,
                slope,
                t_start,
                t_stop,
            } => C64::new(offset + slope * t.clamp(t_start, t_stop), 0.0),
        }
    }

    pub fn frequency(&self) -> f64 {
        match *self {
            Envelope::Harmonic { frequency, .. } => frequency,
            _ => 0.0,
        }
    }

    fn conj(&self) -> Self {
        match *self {
            Envelope::Constant(c) => Envelope::Constant(c.conj()),
            Envelope::Harmonic { amplitude, frequency } => Envelope::Harmonic {
                amplitude: amplitude.conj(),
                frequency: -frequency,
            },
            lin @ Envelope::Linear { .. } => lin,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TdTerm {
    pub envelope: Envelope,
    pub operator: CsrMatrix,
}

/// `H(t) = Σ_k f_k(t) O_k`. Hermiticity of every `H(t)` is checked at
/// construction by requiring the term list to be closed under adjoint.
#[derive(Clone, Debug)]
pub struct TimeDependentHamiltonian {
    spec: HilbertSpec,
    terms: Vec<TdTerm>,
    period_hint: Option<f64>,
}

impl TimeDependentHamiltonian {
    pub fn new(spec: HilbertSpec, terms: Vec<TdTerm>, period_hint: Option<f64>) -> Result<Self> {
        for t in &terms {
            if t.operator.nrows() != spec.dim() || t.operator.ncols() != spec.dim() {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim(),
                    got: t.operator.nrows(),
                });
            }
        }
        let h = Self {
            spec,
            terms,
            period_hint,
        };
        h.check_hermitian(&[0.0, 0.37, 1.91])?;
        Ok(h)
    }

    /// Adds `f(t) O + conj(f(t)) O†` pairs for each `(f, O)`.
    pub fn with_conjugates(spec: HilbertSpec, half: Vec<TdTerm>, period_hint: Option<f64>) -> Result<Self> {
        let mut terms = Vec::with_capacity(2 * half.len());
        for t in half {
            let adj = TdTerm {
                envelope: t.envelope.conj(),
                operator: t.operator.adjoint(),
            };
            terms.push(t);
            terms.push(adj);
        }
        Self::new(spec, terms, period_hint)
    }

    pub fn constant(h: &FockOperator) -> Self {
        Self {
            spec: h.spec(),
            terms: vec![TdTerm {
                envelope: Envelope::Constant(C64::new(1.0, 0.0)),
                operator: h.matrix().clone(),
            }],
            period_hint: None,
        }
    }

    pub fn spec(&self) -> HilbertSpec {
        self.spec
    }

    pub fn terms(&self) -> &[TdTerm] {
        &self.terms
    }

    pub fn period_hint(&self) -> Option<f64> {
        self.period_hint
    }

    pub fn evaluate(&self, t: f64) -> FockOperator {
        let dim = self.spec.dim();
        let m = CsrMatrix::from_triplets(
            dim,
            dim,
            self.terms.iter().flat_map(|term| {
                let c = term.envelope.at(t);
                term.operator.iter().map(move |(r, col, v)| (r, col, c * v))
            }),
        );
        FockOperator::new(self.spec, m).expect("terms share the spec dimension")
    }

    /// `out = H(t) ψ`.
    pub fn apply_into(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for term in &self.terms {
            term.operator.mul_vec_acc(psi, term.envelope.at(t), out);
        }
    }

    /// Upper bound on `‖H(t)‖` over all t (sum of term norms).
    pub fn norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let amp = match t.envelope {
                    Envelope::Constant(c) => c.norm(),
                    Envelope::Harmonic { amplitude, .. } => amplitude.norm(),
                    Envelope::Linear {
                        offset,
                        slope,
                        t_start,
                        t_stop,
                    } => (offset + slope * t_start).abs().max((offset + slope * t_stop).abs()),
                };
                amp * t.operator.inf_norm()
            })
            .sum()
    }

    /// Largest oscillation frequency among harmonic terms.
    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.envelope.frequency().abs()).fold(0.0, f64::max)
    }

    pub fn check_hermitian(&self, times: &[f64]) -> Result<()> {
        for &t in times {
            self.evaluate(t).ensure_hermitian(1e-12)?;
        }
        Ok(())
    }
}
