//! Closed-form single-target bound under white noise.

use nalgebra::{DVector, Matrix3, Vector3};

use crate::channel::{effective_reflection, steering_derivative, steering_rx, steering_tx, AmplitudeMode};
use crate::crb::fim::{AxisCrb, TransmitCovariance};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, CarrierSpec, TargetScene};
use crate::linalg::{check_hermitian, check_square};
use crate::scalar::{lit, norm_sqr, Complex, Real};

/// Per-element derivative factors t_m − t_0, where ∂a_m/∂u = a_m·t_m.
///
/// t_m = e_m/r_m² + jν e_m/r_m with e_m = u_m − u. Differences are formed from
/// coordinate differences (r_m² − r_0² = (p_m − p_0)·(p_m + p_0 − 2l)) so the
/// small spread of t across a distant array is not lost to rounding.
fn relative_factors<T: Real>(
    positions: &[Vector3<T>],
    target: &Vector3<T>,
    nu: T,
    exact: bool,
    axis: usize,
) -> Vec<Complex<T>> {
    let two = lit::<T>(2.0);
    let p0 = positions[0];
    let r0 = (p0 - target).norm();
    let e0 = p0[axis] - target[axis];
    positions
        .iter()
        .map(|p| {
            let dp = p - p0;
            let de = dp[axis];
            let drho = (0..3).fold(T::zero(), |s, i| s + dp[i] * (p[i] + p0[i] - two * target[i]));
            let r = (p - target).norm();
            let dr = drho / (r + r0);
            let im = nu * (de * r0 - e0 * dr) / (r * r0);
            let re = if exact { (de * r0 * r0 - e0 * drho) / (r * r * r0 * r0) } else { T::zero() };
            Complex::new(re, im)
        })
        .collect()
}

fn weighted_inner<T: Real>(x: &DVector<Complex<T>>, w: Option<&nalgebra::DMatrix<Complex<T>>>, y: &DVector<Complex<T>>) -> Complex<T> {
    match w {
        None => x.dotc(y),
        Some(r) => x.dotc(&(r * y)),
    }
}

/// Terms of the single-target information in the 3×3 location block.
#[derive(Clone, Debug)]
pub struct SingleTargetTerms<T: Real = f64> {
    /// f̃_uv = ȧ_u^H ȧ_v c + ȧ_u^H a v^H R* v̇_v + a^H ȧ_v v̇_u^H R* v + ‖a‖² v̇_u^H R* v̇_v.
    pub f_tilde: Matrix3<Complex<T>>,
    /// f^R_uv = g_u g_v^* / (‖a‖² c), g_u = ȧ_u^H a c + ‖a‖² v̇_u^H R* v.
    pub f_r: Matrix3<Complex<T>>,
    /// D̃ = Re(f̃ − f^R), evaluated as a Gram matrix of derivative directions
    /// projected off a (and v), which avoids the cancellation in the difference.
    pub d_tilde: Matrix3<T>,
    /// |b|² of the (effective) reflection coefficient.
    pub b_mag2: T,
}

/// Builds f̃, f^R and D̃ for the single target of `scene`.
pub fn single_target_terms<T: Real>(
    geometry: &ArrayGeometry<T>,
    scene: &TargetScene<T>,
    r_x: &TransmitCovariance<T>,
    mode: &AmplitudeMode<T>,
) -> Result<SingleTargetTerms<T>> {
    if scene.len() != 1 {
        return Err(Error::invalid(format!("closed form needs exactly one target, got {}", scene.len())));
    }
    scene.check_separation(geometry)?;
    let rstar = match r_x {
        TransmitCovariance::Identity => None,
        TransmitCovariance::Matrix(r) => {
            check_square(r, geometry.n_tx(), "transmit covariance")?;
            check_hermitian(r, 1e-12, "transmit covariance")?;
            Some(r.map(|z| z.conj()))
        }
    };
    let target = &scene.targets()[0];
    let carrier: &CarrierSpec<T> = scene.carrier();
    let b = effective_reflection(target, carrier, mode)?;
    let b_mag2 = norm_sqr(b);
    if b_mag2 == T::zero() {
        return Err(Error::DegenerateParameter("zero reflection coefficient".into()));
    }
    let l = target.position;
    let nu = carrier.wavenumber();
    let exact = mode.is_exact();
    let a = steering_rx(geometry, &l, carrier, mode)?;
    let v = steering_tx(geometry, &l, carrier, mode)?;
    let alpha = a.norm_squared();
    let c = weighted_inner(&v, rstar.as_ref(), &v).re;

    let mut da = Vec::with_capacity(3);
    let mut dv = Vec::with_capacity(3);
    let mut pa = Vec::with_capacity(3);
    let mut qv = Vec::with_capacity(3);
    for u in 0..3 {
        let ta = relative_factors(geometry.rx(), &l, nu, exact, u);
        let tv = relative_factors(geometry.tx(), &l, nu, exact, u);
        da.push(steering_derivative(geometry.rx(), &l, carrier, exact, u)?);
        dv.push(steering_derivative(geometry.tx(), &l, carrier, exact, u)?);
        // t_0 only shifts the derivative along a (resp. v), which the projection removes
        let ya = DVector::from_iterator(a.len(), a.iter().zip(&ta).map(|(x, t)| x * t));
        let yv = DVector::from_iterator(v.len(), v.iter().zip(&tv).map(|(x, t)| x * t));
        let ma = a.dotc(&ya) / Complex::from(alpha);
        let mv = weighted_inner(&v, rstar.as_ref(), &yv) / Complex::from(c);
        pa.push(DVector::from_iterator(a.len(), a.iter().zip(&ta).map(|(x, t)| x * (t - ma))));
        qv.push(DVector::from_iterator(v.len(), v.iter().zip(&tv).map(|(x, t)| x * (t - mv))));
    }

    let ac = Complex::from(alpha);
    let cc = Complex::from(c);
    let g: Vec<Complex<T>> = (0..3)
        .map(|u| da[u].dotc(&a) * cc + ac * weighted_inner(&dv[u], rstar.as_ref(), &v))
        .collect();
    let mut f_tilde = Matrix3::zeros();
    let mut f_r = Matrix3::zeros();
    let mut d_tilde = Matrix3::zeros();
    for u in 0..3 {
        for w in 0..3 {
            f_tilde[(u, w)] = da[u].dotc(&da[w]) * cc
                + da[u].dotc(&a) * weighted_inner(&v, rstar.as_ref(), &dv[w])
                + a.dotc(&da[w]) * weighted_inner(&dv[u], rstar.as_ref(), &v)
                + ac * weighted_inner(&dv[u], rstar.as_ref(), &dv[w]);
            f_r[(u, w)] = g[u] * g[w].conj() / (ac * cc);
            d_tilde[(u, w)] = (cc * pa[u].dotc(&pa[w]) + ac * weighted_inner(&qv[u], rstar.as_ref(), &qv[w])).re;
        }
    }
    Ok(SingleTargetTerms { f_tilde, f_r, d_tilde, b_mag2 })
}

/// Position CRB of a single target in white noise from the closed-form 3×3 information.
///
/// CRB_u = σ²·cof_uu(D̃) / (2|b|² L det D̃).
pub fn crb_single_wgn<T: Real>(
    geometry: &ArrayGeometry<T>,
    scene: &TargetScene<T>,
    r_x: &TransmitCovariance<T>,
    sigma2: T,
    snapshots: usize,
    mode: &AmplitudeMode<T>,
) -> Result<AxisCrb<T>> {
    if !(sigma2 > T::zero()) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    if snapshots == 0 {
        return Err(Error::invalid("snapshot count L must be at least 1"));
    }
    let terms = single_target_terms(geometry, scene, r_x, mode)?;
    let d = &terms.d_tilde;
    let cof = |i: usize, j: usize, k: usize, l: usize| d[(i, k)] * d[(j, l)] - d[(i, l)] * d[(j, k)];
    let c11 = cof(1, 2, 1, 2);
    let c22 = cof(0, 2, 0, 2);
    let c33 = cof(0, 1, 0, 1);
    let det = d[(0, 0)] * c11 - d[(0, 1)] * cof(1, 2, 0, 2) + d[(0, 2)] * cof(1, 2, 0, 1);
    if !(det > T::zero()) {
        return Err(Error::SingularMatrix { context: "closed-form location information".into(), condition: f64::INFINITY });
    }
    let k = sigma2 / (lit::<T>(2.0) * terms.b_mag2 * lit::<T>(snapshots as f64) * det);
    Ok(AxisCrb::new(k * c11, k * c22, k * c33))
}
