//! Transmit snapshot matrices.

use std::sync::OnceLock;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{check_hermitian, check_square, psd_factor};
use crate::rng::{cscg_matrix, stream};
use crate::{CMatrix, C64};

/// Transmit snapshots X (N×L) and their sample covariance R_X = X X^H / L.
#[derive(Clone, Debug)]
pub struct Waveform {
    x: CMatrix,
    // N×N; formed on first use, as it is huge for large arrays
    r_x: OnceLock<CMatrix>,
}

impl PartialEq for Waveform {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x
    }
}

impl Waveform {
    pub fn from_matrix(x: CMatrix) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("waveform needs N >= 1 and L >= 1"));
        }
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("waveform has non-finite entries"));
        }
        Ok(Self { x, r_x: OnceLock::new() })
    }

    pub fn x(&self) -> &CMatrix {
        &self.x
    }

    pub fn sample_covariance(&self) -> &CMatrix {
        self.r_x.get_or_init(|| {
            let x = &self.x;
            let mut r_x = x * x.adjoint() / C64::from(x.ncols() as f64);
            // exact Hermitian symmetry; the product is Hermitian up to rounding only
            for j in 0..r_x.ncols() {
                r_x[(j, j)].im = 0.0;
                for i in 0..j {
                    r_x[(j, i)] = r_x[(i, j)].conj();
                }
            }
            r_x
        })
    }

    pub fn n_tx(&self) -> usize {
        self.x.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.x.ncols()
    }
}

/// Columns i.i.d. CN(0, I_N).
pub fn isotropic_waveform(n: usize, l: usize, seed: u64) -> Result<Waveform> {
    if n == 0 || l == 0 {
        return Err(Error::invalid("waveform needs N >= 1 and L >= 1"));
    }
    Waveform::from_matrix(cscg_matrix(&mut stream(seed), n, l))
}

/// Columns i.i.d. CN(0, R_target): the isotropic draws of the same seed,
/// multiplied by a square-root factor of `r_target`.
pub fn directed_waveform(r_target: &CMatrix, l: usize, seed: u64) -> Result<Waveform> {
    let n = r_target.nrows();
    check_square(r_target, n, "target covariance")?;
    if n == 0 || l == 0 {
        return Err(Error::invalid("waveform needs N >= 1 and L >= 1"));
    }
    let f = psd_factor(r_target)?;
    let w = cscg_matrix(&mut stream(seed), n, l);
    Waveform::from_matrix(f * w)
}

/// R = ½I + ½t₁t₁^H + ½t₂t₂^H with t₁ = √(3M/4)·v₁*/‖v₁‖ and t₂ = √(M/4)·v₂*/‖v₂‖.
///
/// Beams more power toward the first target. For N = M the trace is M,
/// matching the power of isotropic transmission.
pub fn build_nonisotropic_cov(v1: &DVector<C64>, v2: &DVector<C64>, m: usize) -> Result<CMatrix> {
    let n = v1.len();
    if v2.len() != n {
        return Err(Error::DimensionMismatch("steering columns differ in length".into()));
    }
    let (n1, n2) = (v1.norm(), v2.norm());
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::invalid("zero-norm steering column"));
    }
    let mf = m as f64;
    let t1 = v1.map(|z| z.conj()) * C64::from((0.75 * mf).sqrt() / n1);
    let t2 = v2.map(|z| z.conj()) * C64::from((0.25 * mf).sqrt() / n2);
    let half = C64::from(0.5);
    let r = (CMatrix::identity(n, n) + &t1 * t1.adjoint() + &t2 * t2.adjoint()) * half;
    check_hermitian(&r, 1e-12, "non-isotropic covariance")?;
    Ok(r)
}
