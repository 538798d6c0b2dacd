//! Dense complex matrix helpers shared by every module.
//!
//! All matrices are `nalgebra::DMatrix<Complex64>`. Hermitian matrices are
//! treated with the real inner product `<A, B> = Re tr(Aᴴ B)`, which is the
//! inner product the solver's gradients are expressed in.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    CMat::zeros(n, m)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest entrywise deviation `|M - Mᴴ|`.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Symmetrizes `m` if it is Hermitian within `tol`, otherwise errors.
pub fn require_hermitian(m: &CMat, tol: f64) -> Result<CMat> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let dev = hermitian_deviation(m);
    let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    if dev > tol * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(hermitian_part(m))
}

/// `Re tr(Aᴴ B)`.
pub fn inner(a: &CMat, b: &CMat) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `xᴴ M x` for Hermitian `M` (real part).
pub fn quad_form(m: &CMat, x: &CVec) -> f64 {
    let mx = m * x;
    x.iter().zip(mx.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

pub fn outer(x: &CVec, y: &CVec) -> CMat {
    x * y.adjoint()
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in ascending
/// order and matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: CMat::zeros(0, 0),
            };
        }
        let eig = SymmetricEigen::new(hermitian_part(m));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    /// `V diag(f(λ)) Vᴴ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = C64::new(f(lam), 0.0);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, j: usize) -> CVec {
        self.vectors.column(j).into_owned()
    }
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky, `None` when
/// the factorization fails or a pivot is negligible relative to the diagonal.
pub fn inverse_hpd(m: &CMat) -> Option<CMat> {
    let h = hermitian_part(m);
    let max_diag = (0..h.nrows()).map(|i| h[(i, i)].re).fold(0.0, f64::max);
    if !(max_diag > 0.0) {
        return None;
    }
    let chol = nalgebra::Cholesky::new(h)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)].re.powi(2)).fold(f64::INFINITY, f64::min);
    if !(min_pivot > max_diag * 1e-14) {
        return None;
    }
    Some(hermitian_part(&chol.inverse()))
}

/// Principal square root of a Hermitian PSD matrix (negative eigenvalues clipped).
pub fn psd_sqrt(m: &CMat) -> CMat {
    HermitianEigen::new(m).reconstruct_with(|l| l.max(0.0).sqrt())
}

/// Natural-log determinant of a Hermitian positive-definite matrix.
pub fn ln_det_hpd(m: &CMat) -> f64 {
    HermitianEigen::new(m).values.iter().map(|l| l.ln()).sum()
}

/// Numerical rank: count of singular values above `rel_tol * σ_max`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

pub fn vec_norm(x: &CVec) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn real_vec(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_eigen_reconstructs() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.5, -1.0), c(0.5, 1.0), c(-1.0, 0.0)],
        );
        let eig = HermitianEigen::new(&m);
        assert!(eig.values[0] <= eig.values[1]);
        let back = eig.reconstruct_with(|l| l);
        assert!(frobenius(&(back - &m)) < 1e-12);
    }

    #[test]
    fn inverse_of_singular_is_none() {
        let v = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        assert!(inverse_hpd(&outer(&v, &v)).is_none());
        assert!(inverse_hpd(&identity(3)).is_some());
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(require_hermitian(&m, 1e-8), Err(Error::NotHermitian { .. })));
    }
}
