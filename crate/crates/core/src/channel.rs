//! Spherical-wavefront steering vectors and their spatial derivatives.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, CarrierSpec, Target, TargetScene};
use crate::scalar::{lit, polar, Complex, Real};

/// How per-antenna path amplitudes are modeled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AmplitudeMode<T: Real = f64> {
    /// Amplitude λ/(4π·distance) per antenna.
    Exact,
    /// Unit-magnitude entries; the common amplitude is evaluated once at the
    /// reference points and folded into the reflection coefficient.
    ConstantAtReference { reference_rx: Vector3<T>, reference_tx: Vector3<T> },
}

impl<T: Real> AmplitudeMode<T> {
    /// Constant-amplitude model referenced to the array centroids.
    pub fn constant_at_centroids(geometry: &ArrayGeometry<T>) -> Self {
        AmplitudeMode::ConstantAtReference {
            reference_rx: geometry.rx_centroid(),
            reference_tx: geometry.tx_centroid(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, AmplitudeMode::Exact)
    }

    pub fn label(&self) -> &'static str {
        match self {
            AmplitudeMode::Exact => "exact",
            AmplitudeMode::ConstantAtReference { .. } => "constant",
        }
    }
}

/// Fills `out` with the steering entries of `positions` toward `target`.
///
/// `amp` is λ/(4π) in exact mode; `None` selects unit magnitude.
pub fn fill_steering<T: Real>(
    positions: &[Vector3<T>],
    target: &Vector3<T>,
    nu: T,
    amp: Option<T>,
    out: &mut [Complex<T>],
) -> Result<()> {
    debug_assert_eq!(positions.len(), out.len());
    for (o, p) in out.iter_mut().zip(positions) {
        let r = (p - target).norm();
        if !(r > T::zero()) {
            return Err(Error::Singularity("target coincides with an antenna".into()));
        }
        let mag = match amp {
            Some(c) => c / r,
            None => T::one(),
        };
        *o = polar(mag, -nu * r);
    }
    Ok(())
}

fn amplitude<T: Real>(carrier: &CarrierSpec<T>, exact: bool) -> Option<T> {
    exact.then(|| carrier.wavelength() / (lit::<T>(4.0) * T::pi()))
}

/// Steering vector over an arbitrary element list; unit magnitude unless `exact`.
pub fn steering<T: Real>(
    positions: &[Vector3<T>],
    target: &Vector3<T>,
    carrier: &CarrierSpec<T>,
    exact: bool,
) -> Result<DVector<Complex<T>>> {
    let mut out = DVector::zeros(positions.len());
    fill_steering(positions, target, carrier.wavenumber(), amplitude(carrier, exact), out.as_mut_slice())?;
    Ok(out)
}

/// Receive steering vector a(l), length M.
pub fn steering_rx<T: Real>(
    geometry: &ArrayGeometry<T>,
    target: &Vector3<T>,
    carrier: &CarrierSpec<T>,
    mode: &AmplitudeMode<T>,
) -> Result<DVector<Complex<T>>> {
    steering(geometry.rx(), target, carrier, mode.is_exact())
}

/// Transmit steering vector v(l), length N.
pub fn steering_tx<T: Real>(
    geometry: &ArrayGeometry<T>,
    target: &Vector3<T>,
    carrier: &CarrierSpec<T>,
    mode: &AmplitudeMode<T>,
) -> Result<DVector<Complex<T>>> {
    steering(geometry.tx(), target, carrier, mode.is_exact())
}

/// Derivative of a steering vector with respect to target coordinate `axis` (0=x, 1=y, 2=z).
///
/// Exact mode: a_m·((u_m − u)/r_m² + jν(u_m − u)/r_m). Constant mode keeps only the phase term.
pub fn steering_derivative<T: Real>(
    positions: &[Vector3<T>],
    target: &Vector3<T>,
    carrier: &CarrierSpec<T>,
    exact: bool,
    axis: usize,
) -> Result<DVector<Complex<T>>> {
    assert!(axis < 3, "axis index out of range");
    let nu = carrier.wavenumber();
    let a = steering(positions, target, carrier, exact)?;
    Ok(DVector::from_iterator(
        positions.len(),
        positions.iter().zip(a.iter()).map(|(p, am)| {
            let r = (p - target).norm();
            let e = p[axis] - target[axis];
            let re = if exact { e / (r * r) } else { T::zero() };
            am * Complex::new(re, nu * e / r)
        }),
    ))
}

/// Steering matrices and their derivatives for every target of a scene.
#[derive(Clone, Debug)]
pub struct SteeringBundle<T: Real = f64> {
    /// M×K receive steering matrix.
    pub a: DMatrix<Complex<T>>,
    /// N×K transmit steering matrix.
    pub v: DMatrix<Complex<T>>,
    /// ∂A/∂x, ∂A/∂y, ∂A/∂z (column k differentiates with respect to target k).
    pub da: [DMatrix<Complex<T>>; 3],
    pub dv: [DMatrix<Complex<T>>; 3],
    pub mode: AmplitudeMode<T>,
}

pub fn steering_bundle<T: Real>(
    geometry: &ArrayGeometry<T>,
    scene: &TargetScene<T>,
    mode: &AmplitudeMode<T>,
) -> Result<SteeringBundle<T>> {
    let (m, n, k) = (geometry.n_rx(), geometry.n_tx(), scene.len());
    let carrier = scene.carrier();
    let exact = mode.is_exact();
    let mut a = DMatrix::zeros(m, k);
    let mut v = DMatrix::zeros(n, k);
    let mut da = [DMatrix::zeros(m, k), DMatrix::zeros(m, k), DMatrix::zeros(m, k)];
    let mut dv = [DMatrix::zeros(n, k), DMatrix::zeros(n, k), DMatrix::zeros(n, k)];
    for (j, t) in scene.targets().iter().enumerate() {
        a.set_column(j, &steering(geometry.rx(), &t.position, carrier, exact)?);
        v.set_column(j, &steering(geometry.tx(), &t.position, carrier, exact)?);
        for u in 0..3 {
            da[u].set_column(j, &steering_derivative(geometry.rx(), &t.position, carrier, exact, u)?);
            dv[u].set_column(j, &steering_derivative(geometry.tx(), &t.position, carrier, exact, u)?);
        }
    }
    Ok(SteeringBundle { a, v, da, dv, mode: *mode })
}

/// Reflection coefficient as seen by the steering model of `mode`.
///
/// In constant mode the two path amplitudes, evaluated at the reference points,
/// are absorbed: b̃ = (λ/4π)² b / (‖l_o^r − l‖·‖l_o^t − l‖).
pub fn effective_reflection<T: Real>(
    target: &Target<T>,
    carrier: &CarrierSpec<T>,
    mode: &AmplitudeMode<T>,
) -> Result<Complex<T>> {
    match mode {
        AmplitudeMode::Exact => Ok(target.reflection),
        AmplitudeMode::ConstantAtReference { reference_rx, reference_tx } => {
            let dr = (reference_rx - target.position).norm();
            let dt = (reference_tx - target.position).norm();
            if !(dr > T::zero() && dt > T::zero()) {
                return Err(Error::Singularity("target coincides with an amplitude reference point".into()));
            }
            let c = carrier.wavelength() / (lit::<T>(4.0) * T::pi());
            Ok(target.reflection * (c * c / (dr * dt)))
        }
    }
}

/// Effective reflections of every target, in scene order.
pub fn effective_reflections<T: Real>(scene: &TargetScene<T>, mode: &AmplitudeMode<T>) -> Result<Vec<Complex<T>>> {
    scene.targets().iter().map(|t| effective_reflection(t, scene.carrier(), mode)).collect()
}
