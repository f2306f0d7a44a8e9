//! Lanczos approximation of `exp(−i H dt) v` for Hermitian sparse `H`.

use crate::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

pub(crate) struct KrylovOutcome {
    pub result: DVector<C64>,
    /// A posteriori error estimate `β_m |e_mᵀ exp(−iT dt) e_1|`.
    pub error: f64,
    pub dim: usize,
}

/// One Lanczos step of size `dt` on the normalized-or-not vector `v`.
pub(crate) fn expm_step(h: &CsrMatrix, v: &DVector<C64>, dt: f64, m_max: usize) -> KrylovOutcome {
    let n = v.len();
    let beta0 = v.norm();
    if beta0 == 0.0 {
        return KrylovOutcome {
            result: v.clone(),
            error: 0.0,
            dim: 0,
        };
    }
    let m_max = m_max.min(n).max(1);
    let mut q: Vec<DVector<C64>> = vec![v / C64::new(beta0, 0.0)];
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let scale = h.inf_norm().max(f64::MIN_POSITIVE);
    let mut last_beta = 0.0;
    for j in 0..m_max {
        let mut w = h.mul_dvec(&q[j]);
        let a = q[j].dotc(&w).re;
        alpha.push(a);
        // Full reorthogonalization; subspaces are small.
        for _ in 0..2 {
            for qi in &q {
                let p = qi.dotc(&w);
                w -= qi * p;
            }
        }
        let b = w.norm();
        if b <= 1e-13 * scale {
            last_beta = 0.0;
            break;
        }
        last_beta = b;
        if j + 1 == m_max {
            break;
        }
        beta.push(b);
        q.push(w / C64::new(b, 0.0));
    }
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    // c = V exp(−iΛ dt) Vᵀ e_1
    let mut c = vec![C64::new(0.0, 0.0); m];
    for k in 0..m {
        let w = eig.eigenvectors[(0, k)] * C64::from_polar(1.0, -eig.eigenvalues[k] * dt);
        for (i, ci) in c.iter_mut().enumerate() {
            *ci += w * eig.eigenvectors[(i, k)];
        }
    }
    let mut result = DVector::zeros(n);
    for (qi, ci) in q.iter().zip(&c) {
        result += qi * *ci;
    }
    KrylovOutcome {
        result: result * C64::new(beta0, 0.0),
        error: beta0 * last_beta * c[m - 1].norm(),
        dim: m,
    }
}
