//! Small Hermitian helpers on top of nalgebra.

use nalgebra::{Cholesky, ComplexField, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{lit, Complex, Real};

pub type CMatrix<T = f64> = DMatrix<Complex<T>>;

/// max |M − M^H| / max |M|, zero for the zero matrix.
pub fn hermitian_defect<T: Real>(m: &CMatrix<T>) -> T {
    let scale = m.iter().map(|z| z.modulus()).fold(T::zero(), |a, b| if b > a { b } else { a });
    if scale == T::zero() {
        return T::zero();
    }
    let mut worst = T::zero();
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows() - 1) {
            let d = (m[(i, j)] - m[(j, i)].conj()).modulus();
            if d > worst {
                worst = d;
            }
        }
    }
    worst / scale
}

pub fn check_square<T: Real>(m: &CMatrix<T>, n: usize, what: &str) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("{what} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub fn check_hermitian<T: Real>(m: &CMatrix<T>, tol: f64, what: &str) -> Result<()> {
    let d = hermitian_defect(m);
    if !(d <= lit::<T>(tol)) {
        return Err(Error::invalid(format!("{what} is not Hermitian (relative defect {d})")));
    }
    Ok(())
}

/// Average of `m` and its conjugate transpose.
pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()).scale(lit::<T>(0.5))
}

/// Cholesky factorization that only succeeds for Hermitian positive-definite input.
///
/// nalgebra's complex Cholesky takes complex square roots of the pivots and so
/// "succeeds" on indefinite matrices; the pivots are checked here.
pub fn cholesky<T: Real>(m: &CMatrix<T>) -> Option<Cholesky<Complex<T>, Dyn>> {
    let c = Cholesky::new(m.clone())?;
    let l = c.l_dirty();
    let tiny = lit::<T>(1e-8);
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        if !(d.re > T::zero()) || d.im.abs() > tiny * d.re || !d.re.is_finite() {
            return None;
        }
    }
    Some(c)
}

/// ln det of a Hermitian positive-definite matrix, `None` when Cholesky fails.
pub fn log_det_hpd<T: Real>(m: &CMatrix<T>) -> Option<T> {
    let c = cholesky(m)?;
    let l = c.l_dirty();
    let mut s = T::zero();
    for i in 0..m.nrows() {
        s += l[(i, i)].re.ln();
    }
    Some(s + s)
}

/// Factor F with F·F^H = R for a Hermitian PSD `r`.
///
/// Cholesky when it succeeds with pivots clear of roundoff, otherwise an
/// eigen-decomposition with eigenvalues below `1e-10·λ_max` rejected if
/// negative and clipped to zero.
pub fn psd_factor<T: Real>(r: &CMatrix<T>) -> Result<CMatrix<T>> {
    check_hermitian(r, 1e-10, "covariance")?;
    let h = hermitian_part(r);
    if let Some(c) = cholesky(&h) {
        let l = c.l();
        let dmax = (0..h.nrows()).fold(T::zero(), |a, i| if h[(i, i)].re > a { h[(i, i)].re } else { a });
        // a rank-deficient input can still pass with pivots made of rounding noise
        if (0..h.nrows()).all(|i| l[(i, i)].re * l[(i, i)].re > lit::<T>(1e-10) * dmax) {
            return Ok(l);
        }
    }
    let eig = SymmetricEigen::new(h);
    let lmax = eig.eigenvalues.iter().fold(T::zero(), |a, &b| if b > a { b } else { a });
    let tol = lit::<T>(1e-10) * lmax;
    let mut f = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -tol {
            return Err(Error::invalid(format!("covariance is indefinite (eigenvalue {lam})")));
        }
        let s = if lam > tol { lam.sqrt() } else { T::zero() };
        f.column_mut(j).scale_mut(s);
    }
    Ok(f)
}

/// Ratio of extreme eigenvalues of a Hermitian matrix; infinite when not positive definite.
pub fn hermitian_condition<T: Real>(m: &CMatrix<T>) -> f64 {
    let ev = SymmetricEigen::new(hermitian_part(m)).eigenvalues;
    let (lo, hi) = ev.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        let x = crate::scalar::to_f64(x);
        (lo.min(x), hi.max(x))
    });
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

pub fn trace_re<T: Real>(m: &CMatrix<T>) -> T {
    (0..m.nrows().min(m.ncols())).fold(T::zero(), |s, i| s + m[(i, i)].re)
}
