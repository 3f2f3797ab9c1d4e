//! Monte Carlo MSE-versus-SNR sweeps with CRB overlays.
//!
//! SNR is received signal power over noise power per element:
//! `10·log10(‖A·diag(b)·Vᵀ·X‖²_F / (L·M·σ²))`. Structured noise is scaled so
//! that trace(Q)/M plays the role of σ².

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::AmplitudeMode;
use crate::crb::{crb_multi, TransmitCovariance};
use crate::error::{Error, Result};
use crate::estimators::{assign_targets, localize, Criterion, LocalizeOptions};
use crate::geometry::{ArrayGeometry, TargetScene};
use crate::rng::derive_seed;
use crate::synthesis::{signal_component, structured_clutter_cov, synthesize, NoiseModel};
use crate::waveform::Waveform;

/// Shape of the noise; its power is set per SNR point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NoiseKind {
    Wgn,
    Structured { rho: f64, phase_step_rad: f64 },
}

/// Signal power that the SNR axis is measured against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SnrReference {
    /// Received signal power of this spec's own scene and waveform.
    Received,
    /// A fixed per-element power, so sweeps with different waveforms share σ².
    Power(f64),
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub geometry: ArrayGeometry,
    pub scene: TargetScene,
    /// Fixed across trials; only the noise is redrawn.
    pub waveform: Waveform,
    /// Model used to generate Y.
    pub data_mode: AmplitudeMode,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub estimators: Vec<Criterion>,
    /// Models the estimators (and the CRB) assume.
    pub amplitude_modes: Vec<AmplitudeMode>,
    pub noise_kind: NoiseKind,
    pub snr_reference: SnrReference,
    /// `criterion` and `mode` are overwritten per run.
    pub localize: LocalizeOptions,
    pub base_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("sweep needs at least one trial".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("SNR grid is empty".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) || self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("SNR grid must be finite and strictly increasing".into()));
        }
        if self.estimators.is_empty() || self.amplitude_modes.is_empty() {
            return Err(Error::Config("sweep needs at least one estimator and one amplitude mode".into()));
        }
        if let SnrReference::Power(p) = self.snr_reference {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config("reference signal power must be positive".into()));
            }
        }
        if let NoiseKind::Structured { rho, .. } = self.noise_kind {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::Config("clutter rho must lie in (0, 1)".into()));
            }
        }
        if self.localize.k_max < self.scene.len() {
            return Err(Error::Config("k_max is smaller than the number of targets".into()));
        }
        self.localize.schedule.validate()
    }

    /// Received signal power per element and snapshot.
    pub fn signal_power(&self) -> Result<f64> {
        match self.snr_reference {
            SnrReference::Power(p) => Ok(p),
            SnrReference::Received => received_power(&self.geometry, &self.scene, &self.waveform, &self.data_mode),
        }
    }

    /// Noise model at `snr_db`.
    pub fn noise_at(&self, snr_db: f64) -> Result<NoiseModel> {
        let power = self.signal_power()? / 10f64.powf(snr_db / 10.0);
        Ok(match self.noise_kind {
            NoiseKind::Wgn => NoiseModel::Wgn { sigma2: power },
            NoiseKind::Structured { rho, phase_step_rad } => {
                let q = structured_clutter_cov(self.geometry.n_rx(), rho, phase_step_rad)?;
                NoiseModel::structured(q)?.with_power(power)
            }
        })
    }

    fn runs(&self) -> impl Iterator<Item = (Criterion, &AmplitudeMode)> + '_ {
        self.estimators.iter().flat_map(move |&c| self.amplitude_modes.iter().map(move |m| (c, m)))
    }
}

/// ‖A·diag(b)·Vᵀ·X‖²_F / (L·M).
pub fn received_power(
    geometry: &ArrayGeometry,
    scene: &TargetScene,
    waveform: &Waveform,
    mode: &AmplitudeMode,
) -> Result<f64> {
    let s = signal_component(geometry, scene, waveform, mode)?;
    Ok(s.norm_squared() / s.len() as f64)
}

/// Squared errors of one estimator run, or why it failed.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub estimator: Criterion,
    pub amplitude_mode: &'static str,
    /// Per true target, ‖l̂ − l‖², after min-cost assignment.
    pub squared_errors: std::result::Result<Vec<f64>, String>,
}

/// One noise draw, every requested (estimator, mode) on the same Y.
pub fn run_trial(spec: &SweepSpec, snr_index: usize, trial: usize) -> Result<Vec<TrialResult>> {
    let snr = *spec
        .snr_grid_db
        .get(snr_index)
        .ok_or_else(|| Error::invalid(format!("SNR index {snr_index} out of range")))?;
    let noise = spec.noise_at(snr)?;
    let seed = derive_seed(spec.base_seed, &[snr_index as u64, trial as u64]);
    let y = synthesize(&spec.geometry, &spec.scene, &spec.waveform, &noise, &spec.data_mode, seed)?.y;
    let truth = spec.scene.positions();
    let carrier = spec.scene.carrier();
    let mut out = Vec::new();
    for (criterion, mode) in spec.runs() {
        let mut opts = spec.localize.clone();
        opts.criterion = criterion;
        opts.mode = *mode;
        let errors = match localize(&y, spec.waveform.x(), &spec.geometry, carrier, &opts) {
            Ok(est) => {
                let asg = assign_targets(&est.positions, &truth)?;
                Ok(truth.iter().zip(&asg).map(|(t, &j)| (est.positions[j] - t).norm_squared()).collect())
            }
            // bad inputs are the caller's problem, not a failed trial
            Err(e) if e.exit_code() == 2 => return Err(e),
            Err(e) => Err(e.to_string()),
        };
        out.push(TrialResult { estimator: criterion, amplitude_mode: mode.label(), squared_errors: errors });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub snr_db: f64,
    /// Per-element noise power (trace(Q)/M for structured noise).
    pub sigma2: f64,
    pub estimator: Criterion,
    pub amplitude_mode: String,
    pub target_index: usize,
    /// m²; NaN when every trial failed.
    pub mse: f64,
    /// crb_x + crb_y + crb_z, m².
    pub crb: f64,
    pub trials_used: usize,
    pub failed_trials: usize,
}

/// Runs every grid point and hands records to `sink` as each point completes,
/// in (snr, estimator, mode, target) order.
pub fn mse_sweep_with<F>(spec: &SweepSpec, mut sink: F) -> Result<()>
where
    F: FnMut(&SweepRecord) -> Result<()>,
{
    spec.validate()?;
    let k = spec.scene.len();
    let r_x = TransmitCovariance::Matrix(spec.waveform.sample_covariance().clone());
    let l = spec.waveform.snapshots();
    for (si, &snr) in spec.snr_grid_db.iter().enumerate() {
        let noise = spec.noise_at(snr)?;
        let q = noise.covariance().expect("sweeps always carry noise");
        let trials: Vec<Vec<TrialResult>> =
            (0..spec.trials).into_par_iter().map(|t| run_trial(spec, si, t)).collect::<Result<_>>()?;
        for (ri, (criterion, mode)) in spec.runs().enumerate() {
            let crb = crb_multi(&spec.geometry, &spec.scene, &r_x, &q, l, mode)?;
            let mut sums = vec![0.0; k];
            let mut used = 0;
            let mut failed = 0;
            let mut first_failure = None;
            // summed in trial order regardless of how trials were scheduled
            for t in &trials {
                match &t[ri].squared_errors {
                    Ok(e) => {
                        used += 1;
                        sums.iter_mut().zip(e).for_each(|(s, x)| *s += x);
                    }
                    Err(msg) => {
                        failed += 1;
                        first_failure.get_or_insert(msg.clone());
                    }
                }
            }
            if failed * 5 > spec.trials {
                return Err(Error::SweepAborted(format!(
                    "{failed} of {} trials failed at {snr} dB ({}, {}): {}",
                    spec.trials,
                    criterion.label(),
                    mode.label(),
                    first_failure.unwrap_or_default()
                )));
            }
            for (ti, s) in sums.iter().enumerate() {
                sink(&SweepRecord {
                    snr_db: snr,
                    sigma2: noise.power(),
                    estimator: criterion,
                    amplitude_mode: mode.label().to_string(),
                    target_index: ti,
                    mse: if used > 0 { s / used as f64 } else { f64::NAN },
                    crb: crb.targets[ti].crb_sum,
                    trials_used: used,
                    failed_trials: failed,
                })?;
            }
        }
    }
    Ok(())
}

pub fn mse_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::new();
    mse_sweep_with(spec, |r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Array layouts and targets of the reference experiments.
pub mod scenarios {
    use crate::error::Result;
    use crate::geometry::{build_upa, ArrayGeometry, CarrierSpec, Plane, Target, TargetScene};
    use crate::{Point, C64};

    fn scene(points: &[[f64; 3]], carrier: CarrierSpec) -> Result<TargetScene> {
        let t = points.iter().map(|p| Target::new(Point::from(*p), C64::new(1.0, 0.0))).collect();
        TargetScene::new(t, carrier)
    }

    fn pair(nx: usize, ny: usize, carrier: &CarrierSpec, tx: [f64; 3], rx: [f64; 3]) -> Result<ArrayGeometry> {
        let s = carrier.wavelength() / 2.0;
        ArrayGeometry::new(
            build_upa(nx, ny, s, Point::from(tx), Plane::Xy)?,
            build_upa(nx, ny, s, Point::from(rx), Plane::Xy)?,
        )
    }

    pub const TWO_TARGETS: [[f64; 3]; 2] = [[-1.834, 0.294, 3.657], [1.336, -0.645, 2.898]];
    pub const MISMATCH_TARGETS: [[f64; 3]; 2] = [[-0.100, -2.600, 3.500], [0.390, 2.540, 2.050]];
    pub const SNAPSHOTS: usize = 52;

    pub fn carrier() -> CarrierSpec {
        CarrierSpec::new(0.625e9).expect("positive carrier")
    }

    /// 6×6 Tx at (2.2,0,0), 6×6 Rx at (−2.2,0,0), xy plane, half-wavelength.
    pub fn setup1() -> Result<(ArrayGeometry, TargetScene)> {
        let c = carrier();
        Ok((pair(6, 6, &c, [2.2, 0.0, 0.0], [-2.2, 0.0, 0.0])?, scene(&TWO_TARGETS, c)?))
    }

    /// Face to face: 6×6 Tx at the origin, 6×6 Rx at (0,0,6).
    pub fn setup2() -> Result<(ArrayGeometry, TargetScene)> {
        let c = carrier();
        Ok((pair(6, 6, &c, [0.0; 3], [0.0, 0.0, 6.0])?, scene(&TWO_TARGETS, c)?))
    }

    /// Face to face 3×12 arrays (3 along x), targets spread along y.
    pub fn mismatch() -> Result<(ArrayGeometry, TargetScene)> {
        let c = carrier();
        Ok((pair(3, 12, &c, [0.0; 3], [0.0, 0.0, 6.0])?, scene(&MISMATCH_TARGETS, c)?))
    }

    /// 16×768 monostatic UPA at 28 GHz centred at the origin.
    pub fn large_upa() -> Result<ArrayGeometry> {
        let c = CarrierSpec::new(28e9)?;
        ArrayGeometry::monostatic(build_upa(16, 768, c.wavelength() / 2.0, Point::zeros(), Plane::Xy)?)
    }
}
