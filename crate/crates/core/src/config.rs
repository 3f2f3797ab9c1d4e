//! Scenario documents (JSON, versioned).

use serde::{Deserialize, Serialize};

use crate::channel::{steering_tx, AmplitudeMode};
use crate::error::{Error, Result};
use crate::crb::TransmitCovariance;
use crate::estimators::{Criterion, GridSchedule, LocalizeOptions, SearchRegion, DEFAULT_EPSILON, MAX_SWEEPS};
use crate::geometry::{build_upa, ArrayGeometry, CarrierSpec, Plane, Target, TargetScene};
use crate::harness::{NoiseKind, SnrReference, SweepSpec};
use crate::synthesis::{structured_clutter_cov, NoiseModel};
use crate::waveform::{build_nonisotropic_cov, directed_waveform, isotropic_waveform, Waveform};
use crate::{Point, C64};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub arrays: ArraysConfig,
    pub carrier_hz: f64,
    pub targets: Vec<TargetConfig>,
    pub waveform: WaveformConfig,
    pub noise: NoiseConfig,
    /// Model assumed by the bounds and the estimators.
    #[serde(default)]
    pub amplitude_mode: ModeConfig,
    /// Model used to generate data; exact unless stated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis_amplitude_mode: Option<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraysConfig {
    pub tx: ArrayConfig,
    pub rx: ArrayConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ArrayConfig {
    Upa {
        nx: usize,
        ny: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spacing_m: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spacing_half_wavelength: Option<bool>,
        center: [f64; 3],
        plane: Plane,
    },
    /// Explicit element list.
    Positions { positions_m: Vec<[f64; 3]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub position_m: [f64; 3],
    #[serde(default = "unit_reflection")]
    pub b: [f64; 2],
}

fn unit_reflection() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Isotropic,
    Directed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    #[serde(rename = "type")]
    pub kind: WaveformKind,
    #[serde(rename = "L")]
    pub snapshots: usize,
    pub seed: u64,
    /// Indices into `targets` to beam toward: the first gets 3/4 of the
    /// directed power, the second 1/4. One index beams all of it there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directed_targets: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseConfig {
    Wgn {
        sigma2: f64,
    },
    Structured {
        rho: f64,
        phase_step_rad: f64,
        /// Multiplies Q; sweeps override it from the SNR.
        #[serde(default = "one")]
        scale: f64,
    },
    None,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Exact,
    Constant,
}

/// `"exact"`, `"constant"`, or `{"mode": "constant", "reference_rx": [..], "reference_tx": [..]}`.
/// Constant mode references the array centroids unless points are given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeConfig {
    Name(ModeName),
    Detailed {
        mode: ModeName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_rx: Option<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_tx: Option<[f64; 3]>,
    },
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig::Name(ModeName::Exact)
    }
}

impl ModeConfig {
    pub fn resolve(&self, geometry: &ArrayGeometry) -> Result<AmplitudeMode> {
        let (name, rx, tx) = match *self {
            ModeConfig::Name(n) => (n, None, None),
            ModeConfig::Detailed { mode, reference_rx, reference_tx } => (mode, reference_rx, reference_tx),
        };
        Ok(match name {
            ModeName::Exact => AmplitudeMode::Exact,
            ModeName::Constant => {
                for p in [rx, tx].into_iter().flatten() {
                    finite3(&p, "amplitude reference point")?;
                }
                AmplitudeMode::ConstantAtReference {
                    reference_rx: rx.map(Point::from).unwrap_or_else(|| geometry.rx_centroid()),
                    reference_tx: tx.map(Point::from).unwrap_or_else(|| geometry.tx_centroid()),
                }
            }
        })
    }
}

/// One count for every axis, or `[nx, ny, nz]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisPoints {
    Uniform(usize),
    PerAxis([usize; 3]),
}

impl AxisPoints {
    pub fn counts(self) -> [usize; 3] {
        match self {
            AxisPoints::Uniform(n) => [n; 3],
            AxisPoints::PerAxis(p) => p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points_per_axis: AxisPoints,
    pub levels: usize,
    pub factor: f64,
    pub span: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(rename = "type")]
    pub criterion: Criterion,
    /// Defaults to the number of configured targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub region_m: SearchRegion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_sweeps() -> usize {
    MAX_SWEEPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Defaults to the single `estimator.type`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<Criterion>>,
    /// Defaults to the single `amplitude_mode`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_modes: Option<Vec<ModeConfig>>,
    /// Fixed per-element signal power for the SNR axis (W). Without it the
    /// received power of this scene and waveform is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_signal_power: Option<f64>,
}

fn finite3(p: &[f64; 3], what: &str) -> Result<()> {
    if p.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} has non-finite coordinates")))
    }
}

fn cfg_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn build_array(a: &ArrayConfig, carrier: &CarrierSpec, side: &str) -> Result<Vec<Point>> {
    match a {
        ArrayConfig::Upa { nx, ny, spacing_m, spacing_half_wavelength, center, plane } => {
            finite3(center, &format!("{side} center"))?;
            let s = match (spacing_m, spacing_half_wavelength) {
                (Some(s), None | Some(false)) => *s,
                (None, Some(true)) => carrier.wavelength() / 2.0,
                _ => {
                    return Err(Error::Config(format!(
                        "{side} array: give exactly one of spacing_m or spacing_half_wavelength: true"
                    )))
                }
            };
            build_upa(*nx, *ny, s, Point::from(*center), *plane).map_err(|e| Error::Config(format!("{side} array: {e}")))
        }
        ArrayConfig::Positions { positions_m } => {
            if positions_m.is_empty() {
                return Err(Error::Config(format!("{side} array has no elements")));
            }
            positions_m.iter().map(|p| finite3(p, &format!("{side} element")).map(|_| Point::from(*p))).collect()
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Everything checkable without building the waveform.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let (geometry, _) = self.scene()?;
        if self.waveform.snapshots == 0 {
            return Err(Error::Config("waveform L must be at least 1".into()));
        }
        if let Some(d) = &self.waveform.directed_targets {
            if let Some(i) = d.iter().find(|&&i| i >= self.targets.len()) {
                return Err(Error::Config(format!("directed target {i} does not exist")));
            }
        }
        if self.waveform.kind == WaveformKind::Directed
            && !self.waveform.directed_targets.as_ref().is_some_and(|d| (1..=2).contains(&d.len()))
        {
            return Err(Error::Config("directed waveform needs one or two directed_targets".into()));
        }
        match self.noise {
            NoiseConfig::Wgn { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => {
                return Err(Error::Config("noise sigma2 must be positive".into()))
            }
            NoiseConfig::Structured { rho, phase_step_rad, scale } => {
                if !(rho > 0.0 && rho < 1.0) || !phase_step_rad.is_finite() || !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Config("structured noise needs rho in (0,1), finite phase step, positive scale".into()));
                }
            }
            _ => {}
        }
        self.amplitude_mode.resolve(&geometry).map_err(cfg_err)?;
        if let Some(m) = &self.synthesis_amplitude_mode {
            m.resolve(&geometry).map_err(cfg_err)?;
        }
        if let Some(e) = &self.estimator {
            self.localize_options_for(e, &geometry)?;
        }
        if self.sweep.is_some() {
            self.check_sweep(&geometry)?;
        }
        Ok(())
    }

    /// Validated arrays and targets.
    pub fn scene(&self) -> Result<(ArrayGeometry, TargetScene)> {
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(Error::Config("carrier_hz must be positive".into()));
        }
        let carrier = CarrierSpec::new(self.carrier_hz).map_err(cfg_err)?;
        let tx = build_array(&self.arrays.tx, &carrier, "tx")?;
        let rx = build_array(&self.arrays.rx, &carrier, "rx")?;
        let geometry = ArrayGeometry::new(tx, rx).map_err(cfg_err)?;
        let mut targets = Vec::with_capacity(self.targets.len());
        for (i, t) in self.targets.iter().enumerate() {
            finite3(&t.position_m, &format!("target {i}"))?;
            if !t.b.iter().all(|x| x.is_finite()) {
                return Err(Error::Config(format!("target {i} reflection is not finite")));
            }
            targets.push(Target::new(Point::from(t.position_m), C64::new(t.b[0], t.b[1])));
        }
        let scene = TargetScene::new(targets, carrier).map_err(cfg_err)?;
        scene.check_separation(&geometry).map_err(cfg_err)?;
        Ok((geometry, scene))
    }

    /// Design covariance R_X of the configured waveform.
    pub fn transmit_covariance(&self, geometry: &ArrayGeometry, scene: &TargetScene) -> Result<TransmitCovariance> {
        match self.waveform.kind {
            WaveformKind::Isotropic => Ok(TransmitCovariance::Identity),
            WaveformKind::Directed => {
                let idx = self.waveform.directed_targets.as_deref().unwrap_or_default();
                let pos = scene.positions();
                let v = |i: usize| steering_tx(geometry, &pos[i], scene.carrier(), &AmplitudeMode::Exact);
                let v1 = v(*idx.first().ok_or_else(|| Error::Config("no directed targets".into()))?)?;
                let v2 = match idx.get(1) {
                    Some(&i) => v(i)?,
                    None => v1.clone(),
                };
                Ok(TransmitCovariance::Matrix(build_nonisotropic_cov(&v1, &v2, geometry.n_rx())?))
            }
        }
    }

    pub fn waveform(&self, geometry: &ArrayGeometry, scene: &TargetScene) -> Result<Waveform> {
        let w = &self.waveform;
        match self.transmit_covariance(geometry, scene)? {
            TransmitCovariance::Identity => isotropic_waveform(geometry.n_tx(), w.snapshots, w.seed),
            TransmitCovariance::Matrix(r) => directed_waveform(&r, w.snapshots, w.seed),
        }
    }

    pub fn noise_model(&self, m: usize) -> Result<NoiseModel> {
        match self.noise {
            NoiseConfig::Wgn { sigma2 } => Ok(NoiseModel::Wgn { sigma2 }),
            NoiseConfig::Structured { rho, phase_step_rad, scale } => {
                NoiseModel::structured(structured_clutter_cov(m, rho, phase_step_rad)? * C64::from(scale))
            }
            NoiseConfig::None => Ok(NoiseModel::Noiseless),
        }
    }

    pub fn mode(&self, geometry: &ArrayGeometry) -> Result<AmplitudeMode> {
        self.amplitude_mode.resolve(geometry)
    }

    pub fn synthesis_mode(&self, geometry: &ArrayGeometry) -> Result<AmplitudeMode> {
        self.synthesis_amplitude_mode.unwrap_or_default().resolve(geometry)
    }

    fn localize_options_for(&self, e: &EstimatorConfig, geometry: &ArrayGeometry) -> Result<LocalizeOptions> {
        e.region_m.validate().map_err(cfg_err)?;
        let mut schedule = GridSchedule::new(e.region_m);
        if let Some(g) = e.grid {
            schedule.points_per_axis = g.points_per_axis.counts();
            schedule.levels = g.levels;
            schedule.factor = g.factor;
            schedule.span = g.span;
        }
        schedule.validate().map_err(cfg_err)?;
        let k_max = e.k_max.unwrap_or(self.targets.len());
        if k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if !(e.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if e.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be at least 1".into()));
        }
        let mut o = LocalizeOptions::new(k_max, schedule, e.criterion, self.mode(geometry)?);
        o.epsilon = e.epsilon;
        o.max_sweeps = e.max_sweeps;
        Ok(o)
    }

    pub fn localize_options(&self, geometry: &ArrayGeometry) -> Result<LocalizeOptions> {
        let e = self.estimator.as_ref().ok_or_else(|| Error::Config("config has no estimator section".into()))?;
        self.localize_options_for(e, geometry)
    }

    fn check_sweep(&self, geometry: &ArrayGeometry) -> Result<()> {
        let s = self.sweep.as_ref().expect("caller checked");
        if self.estimator.is_none() {
            return Err(Error::Config("sweep needs an estimator section".into()));
        }
        if matches!(self.noise, NoiseConfig::None) {
            return Err(Error::Config("sweep needs a noise model".into()));
        }
        if let Some(ms) = &s.amplitude_modes {
            for m in ms {
                m.resolve(geometry).map_err(cfg_err)?;
            }
        }
        Ok(())
    }

    /// Sweep description; `seed` replaces `sweep.base_seed` when given.
    pub fn sweep_spec(&self, seed: Option<u64>) -> Result<SweepSpec> {
        let s = self.sweep.as_ref().ok_or_else(|| Error::Config("config has no sweep section".into()))?;
        let (geometry, scene) = self.scene()?;
        self.check_sweep(&geometry)?;
        let localize = self.localize_options(&geometry)?;
        let waveform = self.waveform(&geometry, &scene)?;
        let estimators = s.estimators.clone().unwrap_or_else(|| vec![localize.criterion]);
        let amplitude_modes = match &s.amplitude_modes {
            Some(ms) => ms.iter().map(|m| m.resolve(&geometry)).collect::<Result<_>>()?,
            None => vec![self.mode(&geometry)?],
        };
        let noise_kind = match self.noise {
            NoiseConfig::Structured { rho, phase_step_rad, .. } => NoiseKind::Structured { rho, phase_step_rad },
            _ => NoiseKind::Wgn,
        };
        let spec = SweepSpec {
            data_mode: self.synthesis_mode(&geometry)?,
            geometry,
            scene,
            waveform,
            snr_grid_db: s.snr_db.clone(),
            trials: s.trials,
            estimators,
            amplitude_modes,
            noise_kind,
            snr_reference: s.reference_signal_power.map_or(SnrReference::Received, SnrReference::Power),
            localize,
            base_seed: seed.unwrap_or(s.base_seed),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses and validates a document, returning its arrays and targets.
pub fn scene_from_config(text: &str) -> Result<(ArrayGeometry, TargetScene)> {
    ScenarioConfig::from_json(text)?.scene()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SETUP1: &str = r#"{
        "schema_version": 1,
        "arrays": {
            "tx": {"type": "upa", "nx": 6, "ny": 6, "spacing_half_wavelength": true, "center": [2.2, 0, 0], "plane": "xy"},
            "rx": {"type": "upa", "nx": 6, "ny": 6, "spacing_half_wavelength": true, "center": [-2.2, 0, 0], "plane": "xy"}
        },
        "carrier_hz": 0.625e9,
        "targets": [
            {"position_m": [-1.834, 0.294, 3.657], "b": [1, 0]},
            {"position_m": [1.336, -0.645, 2.898], "b": [1, 0]}
        ],
        "waveform": {"type": "isotropic", "L": 52, "seed": 1},
        "noise": {"type": "wgn", "sigma2": 1e-7},
        "amplitude_mode": "exact",
        "estimator": {"type": "aco", "k_max": 2, "region_m": {"min": [-3, -1.5, 1.5], "max": [3, 1.5, 5.5]}},
        "sweep": {"snr_db": [0, 10], "trials": 2, "base_seed": 5}
    }"#;

    fn edit(f: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(SETUP1).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn setup1_document() {
        let cfg = ScenarioConfig::from_json(SETUP1).unwrap();
        let (g, s) = cfg.scene().unwrap();
        assert_eq!((g.n_tx(), g.n_rx(), s.len()), (36, 36, 2));
        assert!((g.tx_centroid() - Point::new(2.2, 0.0, 0.0)).norm() < 1e-12);
        let spec = cfg.sweep_spec(Some(9)).unwrap();
        assert_eq!(spec.base_seed, 9);
        assert_eq!(spec.estimators, vec![Criterion::Aco]);
        let again = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn target_on_rx_antenna_rejected() {
        let (g, _) = ScenarioConfig::from_json(SETUP1).unwrap().scene().unwrap();
        let p = g.rx()[7];
        let text = edit(|v| v["targets"][0]["position_m"] = serde_json::json!([p.x, p.y, p.z]));
        assert!(matches!(ScenarioConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn monostatic_position_lists_accepted() {
        let pts = serde_json::json!({"type": "positions", "positions_m": [[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]]});
        let text = edit(|v| {
            v["arrays"]["tx"] = pts.clone();
            v["arrays"]["rx"] = pts.clone();
            v["waveform"]["L"] = serde_json::json!(8);
            v.as_object_mut().unwrap().remove("sweep");
        });
        let (g, _) = scene_from_config(&text).unwrap();
        assert!(g.is_monostatic());
    }

    #[test]
    fn schema_errors() {
        let bad = [
            edit(|v| v["schema_version"] = serde_json::json!(2)),
            edit(|v| v["waveform"]["type"] = serde_json::json!("directed")),
            edit(|v| v["waveform"]["directed_targets"] = serde_json::json!([5])),
            edit(|v| v["noise"] = serde_json::json!({"type": "wgn", "sigma2": -1})),
            edit(|v| v["sweep"]["snr_db"] = serde_json::json!([10, 0])),
            edit(|v| v["arrays"]["tx"]["spacing_m"] = serde_json::json!(0.1)),
            edit(|v| v["bogus"] = serde_json::json!(1)),
            "{ not json".to_string(),
        ];
        for (i, t) in bad.iter().enumerate() {
            let r = ScenarioConfig::from_json(t).and_then(|c| c.sweep_spec(None).map(|_| ()));
            assert!(matches!(r, Err(Error::Config(_))), "case {i}: {r:?}");
        }
    }

    #[test]
    fn directed_waveform_keeps_power() {
        let text = edit(|v| {
            v["waveform"]["type"] = serde_json::json!("directed");
            v["waveform"]["directed_targets"] = serde_json::json!([0, 1]);
        });
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        let (g, s) = cfg.scene().unwrap();
        let w = cfg.waveform(&g, &s).unwrap();
        assert_eq!((w.n_tx(), w.snapshots()), (36, 52));
    }

    #[test]
    fn constant_mode_defaults_to_centroids() {
        let text = edit(|v| v["amplitude_mode"] = serde_json::json!({"mode": "constant", "reference_tx": [1, 2, 3]}));
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        let (g, _) = cfg.scene().unwrap();
        match cfg.mode(&g).unwrap() {
            AmplitudeMode::ConstantAtReference { reference_rx, reference_tx } => {
                assert_eq!(reference_rx, g.rx_centroid());
                assert_eq!(reference_tx, Point::new(1.0, 2.0, 3.0));
            }
            m => panic!("{m:?}"),
        }
    }
}
