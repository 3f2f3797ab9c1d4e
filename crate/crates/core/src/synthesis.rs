//! Noise models and received-data synthesis.

use crate::channel::{effective_reflections, steering_bundle, AmplitudeMode};
use crate::crb::NoiseCovariance;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, TargetScene};
use crate::linalg::{check_hermitian, check_square, cholesky, trace_re};
use crate::rng::{cscg_matrix, stream};
use crate::waveform::Waveform;
use crate::{CMatrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    /// Spatially white noise with power `sigma2` per antenna.
    Wgn { sigma2: f64 },
    /// Hermitian positive-definite covariance across receive antennas.
    Structured { q: CMatrix },
    /// No noise at all; for exactness checks.
    Noiseless,
}

impl NoiseModel {
    pub fn structured(q: CMatrix) -> Result<Self> {
        check_hermitian(&q, 1e-12, "noise covariance")?;
        if cholesky(&q).is_none() {
            return Err(Error::invalid("noise covariance is not positive definite"));
        }
        Ok(NoiseModel::Structured { q })
    }

    /// Average per-antenna noise power, trace(Q)/M.
    pub fn power(&self) -> f64 {
        match self {
            NoiseModel::Wgn { sigma2 } => *sigma2,
            NoiseModel::Structured { q } => trace_re(q) / q.nrows() as f64,
            NoiseModel::Noiseless => 0.0,
        }
    }

    /// Covariance for bound computations; `None` when noiseless.
    pub fn covariance(&self) -> Option<NoiseCovariance> {
        match self {
            NoiseModel::Wgn { sigma2 } => Some(NoiseCovariance::White(*sigma2)),
            NoiseModel::Structured { q } => Some(NoiseCovariance::Full(q.clone())),
            NoiseModel::Noiseless => None,
        }
    }

    /// Same shape of noise scaled to per-antenna power `power`.
    pub fn with_power(&self, power: f64) -> Self {
        match self {
            NoiseModel::Wgn { .. } => NoiseModel::Wgn { sigma2: power },
            NoiseModel::Structured { q } => {
                let s = power / (trace_re(q) / q.nrows() as f64);
                NoiseModel::Structured { q: q * C64::from(s) }
            }
            NoiseModel::Noiseless => NoiseModel::Noiseless,
        }
    }
}

/// Q[p,q] = ρ^{|p−q|}·e^{j(p−q)φ}.
pub fn structured_clutter_cov(m: usize, rho: f64, phase_step: f64) -> Result<CMatrix> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("clutter correlation must lie in (0, 1), got {rho}")));
    }
    if m == 0 || !phase_step.is_finite() {
        return Err(Error::invalid("clutter covariance needs M >= 1 and a finite phase step"));
    }
    Ok(CMatrix::from_fn(m, m, |p, q| {
        let d = p as f64 - q as f64;
        C64::from_polar(rho.powi((p as i64 - q as i64).unsigned_abs() as i32), d * phase_step)
    }))
}

/// Received snapshots Y (M×L).
#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedData {
    pub y: CMatrix,
}

/// Noise-free part A·diag(b)·V^T·X under `mode`.
pub fn signal_component(
    geometry: &ArrayGeometry,
    scene: &TargetScene,
    waveform: &Waveform,
    mode: &AmplitudeMode,
) -> Result<CMatrix> {
    if waveform.n_tx() != geometry.n_tx() {
        return Err(Error::DimensionMismatch(format!(
            "waveform has {} rows, geometry has {} transmit antennas",
            waveform.n_tx(),
            geometry.n_tx()
        )));
    }
    scene.check_separation(geometry)?;
    let bundle = steering_bundle(geometry, scene, mode)?;
    let b = effective_reflections(scene, mode)?;
    let mut ab = bundle.a.clone();
    for (k, bk) in b.iter().enumerate() {
        for z in ab.column_mut(k).iter_mut() {
            *z *= bk;
        }
    }
    Ok(ab * bundle.v.transpose() * waveform.x())
}

/// Noise matrix Z (M×L) with columns CN(0, Q), generated as L_Q·W with L_Q the
/// lower Cholesky factor (√σ²·W for white noise).
pub fn noise_matrix(noise: &NoiseModel, m: usize, l: usize, seed: u64) -> Result<CMatrix> {
    match noise {
        NoiseModel::Noiseless => Ok(CMatrix::zeros(m, l)),
        NoiseModel::Wgn { sigma2 } => {
            if !(*sigma2 > 0.0) || !sigma2.is_finite() {
                return Err(Error::invalid("noise variance must be positive"));
            }
            Ok(cscg_matrix(&mut stream(seed), m, l) * C64::from(sigma2.sqrt()))
        }
        NoiseModel::Structured { q } => {
            check_square(q, m, "noise covariance")?;
            let c = cholesky(q).ok_or_else(|| Error::SingularMatrix {
                context: "noise covariance Cholesky".into(),
                condition: f64::INFINITY,
            })?;
            Ok(c.l() * cscg_matrix(&mut stream(seed), m, l))
        }
    }
}

/// Y = A·diag(b)·V^T·X + Z.
pub fn synthesize(
    geometry: &ArrayGeometry,
    scene: &TargetScene,
    waveform: &Waveform,
    noise: &NoiseModel,
    mode: &AmplitudeMode,
    seed: u64,
) -> Result<ReceivedData> {
    let s = signal_component(geometry, scene, waveform, mode)?;
    let z = noise_matrix(noise, geometry.n_rx(), waveform.snapshots(), seed)?;
    Ok(ReceivedData { y: s + z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::isotropic_waveform;
    use crate::{build_upa, CarrierSpec, Plane, Point};

    fn setup() -> (ArrayGeometry, TargetScene) {
        let g = ArrayGeometry::new(
            build_upa(2, 2, 0.1, Point::new(0.3, 0.0, 0.0), Plane::Xy).unwrap(),
            build_upa(2, 2, 0.1, Point::new(-0.3, 0.0, 0.0), Plane::Xy).unwrap(),
        )
        .unwrap();
        let s = TargetScene::single(Point::new(0.1, 0.2, 2.0), C64::new(1.0, 0.5), CarrierSpec::new(1e9).unwrap()).unwrap();
        (g, s)
    }

    #[test]
    fn clutter_entries() {
        let q = structured_clutter_cov(4, 0.95, std::f64::consts::FRAC_PI_4).unwrap();
        for i in 0..4 {
            assert_eq!(q[(i, i)], C64::new(1.0, 0.0));
        }
        let e = C64::from_polar(0.95, -std::f64::consts::FRAC_PI_4);
        assert!((q[(0, 1)] - e).norm() < 1e-15);
        assert!((q[(1, 0)] - e.conj()).norm() < 1e-15);
        assert!(structured_clutter_cov(4, 1.0, 0.1).is_err());
        assert!(structured_clutter_cov(4, 0.0, 0.1).is_err());
    }

    #[test]
    fn clutter_is_positive_definite() {
        for m in [1, 2, 8, 36, 64] {
            let q = structured_clutter_cov(m, 0.95, std::f64::consts::FRAC_PI_4).unwrap();
            assert!(NoiseModel::structured(q).is_ok(), "M={m}");
        }
    }

    #[test]
    fn noiseless_is_pure_signal() {
        let (g, s) = setup();
        let w = isotropic_waveform(4, 8, 1).unwrap();
        let y = synthesize(&g, &s, &w, &NoiseModel::Noiseless, &AmplitudeMode::Exact, 5).unwrap();
        assert_eq!(y.y, signal_component(&g, &s, &w, &AmplitudeMode::Exact).unwrap());
    }

    #[test]
    fn linear_in_reflection() {
        let (g, s) = setup();
        let w = isotropic_waveform(4, 8, 1).unwrap();
        let n = NoiseModel::Wgn { sigma2: 0.1 };
        let y1 = synthesize(&g, &s, &w, &n, &AmplitudeMode::Exact, 9).unwrap().y;
        let s2 = TargetScene::single(s.targets()[0].position, s.targets()[0].reflection * 2.0, *s.carrier()).unwrap();
        let y2 = synthesize(&g, &s2, &w, &n, &AmplitudeMode::Exact, 9).unwrap().y;
        let z = noise_matrix(&n, 4, 8, 9).unwrap();
        let d = (&y2 - &z) - (&y1 - &z) * C64::from(2.0);
        assert!(d.norm() < 1e-15 * y1.norm());
    }

    #[test]
    fn structured_noise_covariance_and_whitening() {
        let q = structured_clutter_cov(4, 0.7, 0.3).unwrap();
        let z = noise_matrix(&NoiseModel::structured(q.clone()).unwrap(), 4, 10_000, 2).unwrap();
        let est = &z * z.adjoint() / C64::from(10_000.0);
        assert!((&est - &q).norm() / q.norm() < 0.1);
        let l = cholesky(&q).unwrap().l();
        let w = l.solve_lower_triangular(&z).unwrap();
        let white = &w * w.adjoint() / C64::from(10_000.0);
        assert!((white - CMatrix::identity(4, 4)).norm() / 2.0 < 0.1);
    }

    #[test]
    fn white_noise_power() {
        let z = noise_matrix(&NoiseModel::Wgn { sigma2: 0.3 }, 36, 10_000, 4).unwrap();
        for i in 0..36 {
            let p = z.row(i).iter().map(|c| c.norm_sqr()).sum::<f64>() / 10_000.0;
            assert!((p / 0.3 - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn pure_noise_when_reflection_is_zero() {
        let (g, _) = setup();
        let s = TargetScene::single(Point::new(0.0, 0.0, 1.0), C64::new(0.0, 0.0), CarrierSpec::new(1e9).unwrap()).unwrap();
        let w = isotropic_waveform(4, 10_000, 3).unwrap();
        let q = structured_clutter_cov(4, 0.5, 1.0).unwrap();
        let y = synthesize(&g, &s, &w, &NoiseModel::Structured { q: q.clone() }, &AmplitudeMode::Exact, 6).unwrap().y;
        let est = &y * y.adjoint() / C64::from(10_000.0);
        assert!((est - &q).norm() / q.norm() < 0.1);
    }

    #[test]
    fn dimension_mismatch() {
        let (g, s) = setup();
        let w = isotropic_waveform(3, 8, 1).unwrap();
        assert!(matches!(
            synthesize(&g, &s, &w, &NoiseModel::Noiseless, &AmplitudeMode::Exact, 0),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
