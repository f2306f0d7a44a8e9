//! Dense Hermitian eigensolves and matrix exponentials.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

/// Eigenpairs of a Hermitian matrix sorted by ascending eigenvalue.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: DMatrix<C64>,
}

/// Diagonalizes a Hermitian matrix. Real-symmetric input takes the cheaper
/// real path.
pub fn eigh(h: &DMatrix<C64>) -> HermitianEigen {
    let n = h.nrows();
    if n == 0 {
        return HermitianEigen {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let real = h.iter().all(|v| v.im == 0.0);
    let (vals, vecs): (Vec<f64>, DMatrix<C64>) = if real {
        let hr = h.map(|v| v.re);
        let hr = (&hr + hr.transpose()) * 0.5;
        let e = SymmetricEigen::new(hr);
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors.map(|v| C64::new(v, 0.0)))
    } else {
        let hs = (h + h.adjoint()) * C64::new(0.5, 0.0);
        let e = SymmetricEigen::new(hs);
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let values = order.iter().map(|&i| vals[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    HermitianEigen { values, vectors }
}

impl HermitianEigen {
    /// `exp(−i H t) ψ` from the stored decomposition.
    pub fn propagate(&self, psi: &DVector<C64>, t: f64) -> DVector<C64> {
        let coeffs = self.vectors.adjoint() * psi;
        let phased = DVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(&self.values)
                .map(|(c, &e)| c * C64::from_polar(1.0, -e * t)),
        );
        &self.vectors * phased
    }

    /// Dense `f(H) = V diag(f(λ)) V†`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &e) in self.values.iter().enumerate() {
            let fe = f(e);
            for i in 0..n {
                scaled[(i, j)] *= fe;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn residual(&self, h: &DMatrix<C64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &e) in self.values.iter().enumerate() {
            let v = self.vectors.column(j);
            let r = h * v - v * C64::new(e, 0.0);
            worst = worst.max(r.norm());
        }
        worst
    }
}

/// `exp(−i H t)` for Hermitian `H`.
pub fn unitary(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    eigh(h).apply_fn(|e| C64::from_polar(1.0, -e * t))
}

/// Spectral-norm estimate of a Hermitian matrix (largest |eigenvalue|).
pub fn hermitian_norm(h: &DMatrix<C64>) -> f64 {
    eigh(h).values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Modified Gram-Schmidt on the columns; columns whose remaining norm
/// falls below `tol` are dropped.
pub fn orthonormalize(cols: &[DVector<C64>], tol: f64) -> Vec<DVector<C64>> {
    let mut basis: Vec<DVector<C64>> = Vec::new();
    for c in cols {
        let mut v = c.clone();
        for _ in 0..2 {
            for b in &basis {
                let p = b.dotc(&v);
                v -= b * p;
            }
        }
        let n = v.norm();
        if n > tol {
            basis.push(v / C64::new(n, 0.0));
        }
    }
    basis
}
