//! Multi-target Fisher information for positions and reflection coefficients.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::channel::{effective_reflections, steering_bundle, AmplitudeMode};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, TargetScene};
use crate::linalg::{check_hermitian, check_square, CMatrix};
use crate::scalar::{lit, to_f64, Real};

/// Sample covariance of the transmitted snapshots.
#[derive(Clone, Debug, PartialEq)]
pub enum TransmitCovariance<T: Real = f64> {
    Identity,
    Matrix(CMatrix<T>),
}

/// Receive noise covariance Q.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseCovariance<T: Real = f64> {
    /// Q = σ²·I.
    White(T),
    Full(CMatrix<T>),
}

impl<T: Real> NoiseCovariance<T> {
    pub fn dim_ok(&self, m: usize) -> Result<()> {
        match self {
            NoiseCovariance::White(s) if !(*s > T::zero()) || !s.is_finite() => {
                Err(Error::invalid("noise variance must be positive"))
            }
            NoiseCovariance::White(_) => Ok(()),
            NoiseCovariance::Full(q) => check_square(q, m, "noise covariance"),
        }
    }
}

/// Complex blocks of the FIM, already multiplied by L and whitened by Q.
///
/// `f_uv[u][v]` is K×K with (k, i) pairing target k's u-coordinate with target i's v-coordinate.
#[derive(Clone, Debug)]
pub struct FimBlocks<T: Real = f64> {
    pub f_uv: [[CMatrix<T>; 3]; 3],
    pub f_ub: [CMatrix<T>; 3],
    pub f_bb: CMatrix<T>,
}

/// Real FIM ordered [x₁..x_K, y₁..y_K, z₁..z_K, b_R1..b_RK, b_I1..b_IK].
#[derive(Clone, Debug)]
pub struct FimResult<T: Real = f64> {
    pub fim: DMatrix<T>,
    pub blocks: FimBlocks<T>,
    pub num_targets: usize,
}

impl<T: Real> FimResult<T> {
    /// Row/column of coordinate `axis` (0..3) of target `k`.
    pub fn position_index(&self, axis: usize, k: usize) -> usize {
        axis * self.num_targets + k
    }
}

/// Whitening of Q: Q = τ·L̂L̂^H with τ a power of two, so scaling Q by 2 changes τ only.
struct Whitener<T: Real> {
    inv_scale: T,
    chol_lower: Option<CMatrix<T>>,
}

fn pow2_near<T: Real>(x: T) -> T {
    let xf = to_f64(x);
    let exp = if xf.is_normal() { ((xf.to_bits() >> 52) & 0x7ff) as i32 - 1023 } else { 0 };
    lit::<T>(2.0).powi(exp)
}

impl<T: Real> Whitener<T> {
    fn new(q: &NoiseCovariance<T>) -> Result<Self> {
        match q {
            NoiseCovariance::White(s2) => Ok(Self { inv_scale: T::one() / *s2, chol_lower: None }),
            NoiseCovariance::Full(q) => {
                check_hermitian(q, 1e-12, "noise covariance")?;
                let m = q.nrows();
                let tr = crate::linalg::trace_re(q) / lit::<T>(m as f64);
                if !(tr > T::zero()) {
                    return Err(Error::invalid("noise covariance has non-positive trace"));
                }
                let tau = pow2_near(tr);
                let qh = q.map(|z| z / tau);
                let chol = crate::linalg::cholesky(&qh).ok_or_else(|| Error::SingularMatrix {
                    context: "noise covariance Cholesky".into(),
                    condition: f64::INFINITY,
                })?;
                Ok(Self { inv_scale: T::one() / tau, chol_lower: Some(chol.l()) })
            }
        }
    }

    fn apply(&self, x: &CMatrix<T>) -> CMatrix<T> {
        match &self.chol_lower {
            None => x.clone(),
            Some(l) => l.solve_lower_triangular(x).expect("Cholesky factor has a non-zero diagonal"),
        }
    }
}

fn gram<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.adjoint() * b
}

/// FIM of the position and reflection parameters for deterministic coefficients.
///
/// In constant mode the unit-magnitude steering model is used with the
/// effective reflection coefficients of [`crate::channel::effective_reflection`].
pub fn fim_multi<T: Real>(
    geometry: &ArrayGeometry<T>,
    scene: &TargetScene<T>,
    r_x: &TransmitCovariance<T>,
    q: &NoiseCovariance<T>,
    snapshots: usize,
    mode: &AmplitudeMode<T>,
) -> Result<FimResult<T>> {
    if snapshots == 0 {
        return Err(Error::invalid("snapshot count L must be at least 1"));
    }
    let (m, n, k) = (geometry.n_rx(), geometry.n_tx(), scene.len());
    q.dim_ok(m)?;
    if let TransmitCovariance::Matrix(r) = r_x {
        check_square(r, n, "transmit covariance")?;
        check_hermitian(r, 1e-12, "transmit covariance")?;
    }
    scene.check_separation(geometry)?;
    let b = effective_reflections(scene, mode)?;
    if let Some(i) = b.iter().position(|z| crate::scalar::norm_sqr(*z) == T::zero()) {
        return Err(Error::DegenerateParameter(format!("target {i} has zero reflection coefficient")));
    }

    let bundle = steering_bundle(geometry, scene, mode)?;
    let w = Whitener::new(q)?;

    // index 0 is the steering matrix itself, 1..=3 its x/y/z derivatives
    let a_w: Vec<CMatrix<T>> = std::iter::once(&bundle.a).chain(bundle.da.iter()).map(|x| w.apply(x)).collect();
    let v_all: Vec<&CMatrix<T>> = std::iter::once(&bundle.v).chain(bundle.dv.iter()).collect();
    let rv: Vec<CMatrix<T>> = v_all
        .iter()
        .map(|x| match r_x {
            TransmitCovariance::Identity => (*x).clone(),
            TransmitCovariance::Matrix(r) => r.map(|z| z.conj()) * *x,
        })
        .collect();
    let mut ga: Vec<Vec<CMatrix<T>>> = Vec::with_capacity(4);
    let mut gv: Vec<Vec<CMatrix<T>>> = Vec::with_capacity(4);
    for p in 0..4 {
        ga.push((0..4).map(|qq| gram(&a_w[p], &a_w[qq])).collect());
        gv.push((0..4).map(|qq| gram(v_all[p], &rv[qq])).collect());
    }

    let scale = lit::<T>(snapshots as f64) * w.inv_scale;
    let zero = || CMatrix::<T>::zeros(k, k);
    let mut f_uv: [[CMatrix<T>; 3]; 3] = Default::default();
    let mut f_ub: [CMatrix<T>; 3] = [zero(), zero(), zero()];
    let mut f_bb = zero();
    for r in 0..k {
        for c in 0..k {
            f_bb[(r, c)] = ga[0][0][(r, c)] * gv[0][0][(r, c)] * scale;
        }
    }
    for u in 0..3 {
        let (uu, mut fb) = (u + 1, zero());
        for r in 0..k {
            for c in 0..k {
                let t = ga[uu][0][(r, c)] * gv[0][0][(r, c)] + ga[0][0][(r, c)] * gv[uu][0][(r, c)];
                fb[(r, c)] = b[r].conj() * t * scale;
            }
        }
        f_ub[u] = fb;
        for v in 0..3 {
            let vv = v + 1;
            let mut f = zero();
            for r in 0..k {
                for c in 0..k {
                    let t = ga[uu][vv][(r, c)] * gv[0][0][(r, c)]
                        + ga[uu][0][(r, c)] * gv[0][vv][(r, c)]
                        + ga[0][vv][(r, c)] * gv[uu][0][(r, c)]
                        + ga[0][0][(r, c)] * gv[uu][vv][(r, c)];
                    f[(r, c)] = b[r].conj() * b[c] * t * scale;
                }
            }
            f_uv[u][v] = f;
        }
    }

    let blocks = FimBlocks { f_uv, f_ub, f_bb };
    let fim = assemble(&blocks, k);
    Ok(FimResult { fim, blocks, num_targets: k })
}

fn assemble<T: Real>(bl: &FimBlocks<T>, k: usize) -> DMatrix<T> {
    let two = lit::<T>(2.0);
    let mut f = DMatrix::zeros(5 * k, 5 * k);
    let (br, bi) = (3 * k, 4 * k);
    for u in 0..3 {
        for v in 0..3 {
            for r in 0..k {
                for c in 0..k {
                    f[(u * k + r, v * k + c)] = two * bl.f_uv[u][v][(r, c)].re;
                }
            }
        }
        for r in 0..k {
            for c in 0..k {
                let z = bl.f_ub[u][(r, c)];
                f[(u * k + r, br + c)] = two * z.re;
                f[(u * k + r, bi + c)] = -two * z.im;
                f[(br + c, u * k + r)] = two * z.re;
                f[(bi + c, u * k + r)] = -two * z.im;
            }
        }
    }
    for r in 0..k {
        for c in 0..k {
            let z = bl.f_bb[(r, c)];
            f[(br + r, br + c)] = two * z.re;
            f[(br + r, bi + c)] = -two * z.im;
            f[(bi + r, br + c)] = two * z.im;
            f[(bi + r, bi + c)] = two * z.re;
        }
    }
    f
}

/// Per-target position bounds (m²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisCrb<T: Real = f64> {
    pub crb_x: T,
    pub crb_y: T,
    pub crb_z: T,
    pub crb_sum: T,
}

impl<T: Real> AxisCrb<T> {
    pub fn new(crb_x: T, crb_y: T, crb_z: T) -> Self {
        Self { crb_x, crb_y, crb_z, crb_sum: crb_x + crb_y + crb_z }
    }

    pub fn axis(&self, u: usize) -> T {
        [self.crb_x, self.crb_y, self.crb_z][u]
    }
}

#[derive(Clone, Debug)]
pub struct CrbReport<T: Real = f64> {
    /// C = F⁻¹ in the FIM parameter order.
    pub covariance: DMatrix<T>,
    pub targets: Vec<AxisCrb<T>>,
    /// Condition number of the Jacobi-equilibrated FIM.
    pub fim_condition_number: f64,
}

/// Largest equilibrated condition number accepted before declaring F singular.
pub const MAX_FIM_CONDITION: f64 = 1e12;

/// Inverse of a symmetric positive-definite FIM.
///
/// F is symmetrized and equilibrated with D = diag(F)^{-1/2}; the condition
/// number of DFD is reported and must stay below [`MAX_FIM_CONDITION`].
/// Cholesky solve plus one step of iterative refinement, LU as fallback.
pub fn invert_fim<T: Real>(f: &DMatrix<T>) -> Result<(DMatrix<T>, f64)> {
    let n = f.nrows();
    if f.ncols() != n || n == 0 {
        return Err(Error::DimensionMismatch("FIM must be square and non-empty".into()));
    }
    let half = lit::<T>(0.5);
    let fs = (f + f.transpose()) * half;
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let x = fs[(i, i)];
        if !(x > T::zero()) || !x.is_finite() {
            return Err(Error::SingularMatrix { context: format!("FIM diagonal entry {i}"), condition: f64::INFINITY });
        }
        d.push(T::one() / x.sqrt());
    }
    let fe = DMatrix::from_fn(n, n, |i, j| fs[(i, j)] * d[i] * d[j]);
    let ev = SymmetricEigen::new(fe.clone()).eigenvalues;
    let (lo, hi) = ev.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(to_f64(x)), hi.max(to_f64(x)))
    });
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_FIM_CONDITION) {
        return Err(Error::SingularMatrix { context: "Fisher information matrix".into(), condition: cond });
    }
    let eye = DMatrix::<T>::identity(n, n);
    let inv_e = match nalgebra::Cholesky::new(fe.clone()) {
        Some(ch) => {
            let x0 = ch.inverse();
            let resid = &eye - &fe * &x0;
            x0 + ch.solve(&resid)
        }
        None => fe.clone().lu().try_inverse().ok_or(Error::SingularMatrix {
            context: "Fisher information matrix".into(),
            condition: cond,
        })?,
    };
    let inv = DMatrix::from_fn(n, n, |i, j| inv_e[(i, j)] * d[i] * d[j]);
    let inv = (&inv + inv.transpose()) * half;
    Ok((inv, cond))
}

/// CRB matrix and per-target position bounds from a FIM.
pub fn crb_from_fim<T: Real>(fim: &FimResult<T>) -> Result<CrbReport<T>> {
    let k = fim.num_targets;
    let (c, cond) = invert_fim(&fim.fim)?;
    let targets = (0..k).map(|t| AxisCrb::new(c[(t, t)], c[(k + t, k + t)], c[(2 * k + t, 2 * k + t)])).collect();
    Ok(CrbReport { covariance: c, targets, fim_condition_number: cond })
}

/// Convenience: FIM then CRB.
pub fn crb_multi<T: Real>(
    geometry: &ArrayGeometry<T>,
    scene: &TargetScene<T>,
    r_x: &TransmitCovariance<T>,
    q: &NoiseCovariance<T>,
    snapshots: usize,
    mode: &AmplitudeMode<T>,
) -> Result<CrbReport<T>> {
    crb_from_fim(&fim_multi(geometry, scene, r_x, q, snapshots, mode)?)
}
