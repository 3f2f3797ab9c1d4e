//! Command-line driver: bounds, data synthesis, estimation and Monte Carlo sweeps
//! from a JSON scenario document.

pub mod container;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use nearfield_core::config::{ArrayConfig, NoiseConfig, ScenarioConfig, WaveformKind};
use nearfield_core::crb::{crb_asymptotic_far, crb_multi, crb_single_wgn, TransmitCovariance};
use nearfield_core::estimators::{assign_targets, localize, NoiseEstimate, TraceEntry};
use nearfield_core::harness::{mse_sweep_with, SweepRecord};
use nearfield_core::rng::derive_seed;
use nearfield_core::synthesis::{synthesize, NoiseModel};
use nearfield_core::waveform::Waveform;
use nearfield_core::{AmplitudeMode, ArrayGeometry, AxisCrb, Error, Point, Result, Target, TargetScene};

use container::{sidecar_path, DataFile, TruthTarget};

pub const SWEEP_HEADER: [&str; 9] =
    ["snr_db", "sigma2", "estimator", "amplitude_mode", "target", "mse_m2", "crb_m2", "trials_used", "failed_trials"];

#[derive(Debug, Parser)]
#[command(name = "nearfield", version, about = "Near-field MIMO radar 3D localization toolkit")]
pub struct Cli {
    /// Worker threads for grid searches and trials (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the config's base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Position CRBs as CSV.
    Crb {
        config: PathBuf,
        /// Move every target along its ray from the receive-array centroid.
        #[arg(long)]
        distance_sweep: bool,
        #[arg(long, default_value_t = 1.0)]
        d_min: f64,
        #[arg(long, default_value_t = 50.0)]
        d_max: f64,
        #[arg(long, default_value_t = 50)]
        d_points: usize,
        /// Emit rows for both amplitude models instead of the configured one.
        #[arg(long)]
        compare_modes: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate Y (and X) into a data container.
    Synth {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Drop the noise term.
        #[arg(long)]
        noiseless: bool,
        /// Skip the JSON sidecar.
        #[arg(long)]
        no_sidecar: bool,
    },
    /// Localize targets in a data container; JSON result.
    Estimate {
        data: PathBuf,
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo MSE against SNR; CSV.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Crb { config, distance_sweep, d_min, d_max, d_points, compare_modes, out } => {
            let sweep = distance_sweep.then_some((*d_min, *d_max, *d_points));
            let csv = cmd_crb(&load_config(config)?, sweep, *compare_modes)?;
            emit(out.as_deref(), csv.as_bytes())
        }
        Command::Synth { config, out, noiseless, no_sidecar } => {
            cmd_synth(&load_config(config)?, out, *noiseless, !*no_sidecar, cli.seed)
        }
        Command::Estimate { data, config, out } => {
            let cfg = load_config(config)?;
            let json = cmd_estimate(&DataFile::read(data)?, &cfg)?;
            emit(out.as_deref(), json.as_bytes())
        }
        Command::Sweep { config, out } => cmd_sweep(&load_config(config)?, out.as_deref(), cli.seed),
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(&std::fs::read_to_string(path)?)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(bytes)?;
            s.flush()?;
        }
    }
    Ok(())
}

/// Shortest representation that parses back to the same double.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct CrbRow {
    d_m: Option<f64>,
    target: usize,
    crb: AxisCrb,
    mode: &'static str,
    method: &'static str,
}

/// Side length and spacing of an odd square UPA shared by Tx and Rx, with a
/// single target on its boresight: the case with on-axis closed forms.
fn boresight_upa(cfg: &ScenarioConfig, scene: &TargetScene, geometry: &ArrayGeometry) -> Option<(usize, f64, Point)> {
    let ArrayConfig::Upa { nx, ny, plane, center, .. } = &cfg.arrays.tx else { return None };
    if cfg.arrays.tx != cfg.arrays.rx || nx != ny || nx % 2 == 0 || *nx < 3 || scene.len() != 1 {
        return None;
    }
    if !matches!(cfg.noise, NoiseConfig::Wgn { .. }) || cfg.waveform.kind != WaveformKind::Isotropic {
        return None;
    }
    let s = (geometry.rx()[1] - geometry.rx()[0]).norm();
    let c = Point::from(*center);
    let (u, v) = plane.axes();
    let off = scene.positions()[0] - c;
    (off[u].abs() <= 1e-12 * off.norm() && off[v].abs() <= 1e-12 * off.norm()).then_some((*nx, s, c))
}

fn crb_rows(
    cfg: &ScenarioConfig,
    geometry: &ArrayGeometry,
    scene: &TargetScene,
    r_x: &TransmitCovariance,
    modes: &[AmplitudeMode],
    d_m: Option<f64>,
    rows: &mut Vec<CrbRow>,
) -> Result<()> {
    let noise = cfg.noise_model(geometry.n_rx())?;
    let q = noise.covariance().ok_or_else(|| Error::Config("CRB needs a noise model".into()))?;
    let l = cfg.waveform.snapshots;
    for mode in modes {
        let rep = crb_multi(geometry, scene, r_x, &q, l, mode)?;
        for (k, c) in rep.targets.iter().enumerate() {
            rows.push(CrbRow { d_m, target: k, crb: *c, mode: mode.label(), method: "matrix" });
        }
        if let (1, NoiseModel::Wgn { sigma2 }) = (scene.len(), &noise) {
            let c = crb_single_wgn(geometry, scene, r_x, *sigma2, l, mode)?;
            rows.push(CrbRow { d_m, target: 0, crb: c, mode: mode.label(), method: "closed_form" });
        }
    }
    if let (Some((n, s, c)), NoiseModel::Wgn { sigma2 }) = (boresight_upa(cfg, scene, geometry), &noise) {
        if modes.iter().any(|m| m.is_exact()) {
            let t = &scene.targets()[0];
            let d = (t.position - c).norm();
            let a = crb_asymptotic_far(n, s, d, scene.carrier(), *sigma2, t.reflection.norm_sqr(), l)?;
            let crb = AxisCrb::new(a.crb_x_approx, a.crb_x_approx, a.crb_z_approx);
            rows.push(CrbRow { d_m, target: 0, crb, mode: "exact", method: "asymptotic" });
        }
    }
    Ok(())
}

/// CRB table. `distance_sweep` = (d_min, d_max, points), linear in d.
pub fn cmd_crb(cfg: &ScenarioConfig, distance_sweep: Option<(f64, f64, usize)>, compare_modes: bool) -> Result<String> {
    let (geometry, scene) = cfg.scene()?;
    let r_x = cfg.transmit_covariance(&geometry, &scene)?;
    let modes = if compare_modes {
        vec![AmplitudeMode::Exact, AmplitudeMode::constant_at_centroids(&geometry)]
    } else {
        vec![cfg.mode(&geometry)?]
    };
    let mut rows = Vec::new();
    match distance_sweep {
        None => crb_rows(cfg, &geometry, &scene, &r_x, &modes, None, &mut rows)?,
        Some((lo, hi, n)) => {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
                return Err(Error::Config("distance sweep needs 0 < d_min <= d_max and at least one point".into()));
            }
            let origin = geometry.rx_centroid();
            let dirs: Vec<Point> = scene.positions().iter().map(|p| (p - origin).normalize()).collect();
            for i in 0..n {
                let d = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
                let moved = scene
                    .targets()
                    .iter()
                    .zip(&dirs)
                    .map(|(t, u)| Target::new(origin + u * d, t.reflection))
                    .collect();
                let s = scene.with_targets(moved).map_err(|e| Error::Config(e.to_string()))?;
                s.check_separation(&geometry).map_err(|e| Error::Config(e.to_string()))?;
                crb_rows(cfg, &geometry, &s, &r_x, &modes, Some(d), &mut rows)?;
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["target", "crb_x", "crb_y", "crb_z", "crb_sum", "mode", "method"];
    if distance_sweep.is_some() {
        header.insert(0, "d_m");
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in &rows {
        let mut rec: Vec<String> = r.d_m.map(fmt_f64).into_iter().collect();
        rec.push(r.target.to_string());
        rec.extend([r.crb.crb_x, r.crb.crb_y, r.crb.crb_z, r.crb.crb_sum].map(fmt_f64));
        rec.push(r.mode.into());
        rec.push(r.method.into());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is ascii"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Seed of the noise draw in `synth`.
pub fn synth_noise_seed(cfg: &ScenarioConfig, seed: Option<u64>) -> u64 {
    let base = seed.or(cfg.sweep.as_ref().map(|s| s.base_seed)).unwrap_or(cfg.waveform.seed);
    derive_seed(base, &[0])
}

#[derive(Serialize)]
struct Sidecar<'a> {
    format: &'static str,
    m: usize,
    n: usize,
    l: usize,
    k: usize,
    noise_seed: u64,
    noiseless: bool,
    config: &'a ScenarioConfig,
}

pub fn synthesize_file(cfg: &ScenarioConfig, noiseless: bool, seed: Option<u64>) -> Result<(DataFile, Waveform)> {
    let (geometry, scene) = cfg.scene()?;
    let waveform = cfg.waveform(&geometry, &scene)?;
    let noise = if noiseless { NoiseModel::Noiseless } else { cfg.noise_model(geometry.n_rx())? };
    let mode = cfg.synthesis_mode(&geometry)?;
    let y = synthesize(&geometry, &scene, &waveform, &noise, &mode, synth_noise_seed(cfg, seed))?.y;
    let truth = scene.targets().iter().map(|t| TruthTarget { position: t.position, reflection: t.reflection }).collect();
    Ok((DataFile::new(y, waveform.x().clone(), truth)?, waveform))
}

pub fn cmd_synth(cfg: &ScenarioConfig, out: &Path, noiseless: bool, sidecar: bool, seed: Option<u64>) -> Result<()> {
    let (data, _) = synthesize_file(cfg, noiseless, seed)?;
    data.write(out)?;
    if sidecar {
        let (m, n, l, k) = data.dims();
        let meta = Sidecar {
            format: "nearfield-container-1",
            m,
            n,
            l,
            k,
            noise_seed: synth_noise_seed(cfg, seed),
            noiseless,
            config: cfg,
        };
        let mut text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
        text.push('\n');
        std::fs::write(sidecar_path(out), text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TruthError {
    target: usize,
    estimate: usize,
    squared_error_m2: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum NoiseOut {
    Sigma2(f64),
    /// Row-major, [re, im] pairs.
    QHat(Vec<Vec<[f64; 2]>>),
}

#[derive(Serialize)]
struct EstimateOut {
    criterion: &'static str,
    amplitude_mode: &'static str,
    positions: Vec<[f64; 3]>,
    coefficients: Vec<[f64; 2]>,
    objective_trace: Vec<TraceEntry>,
    noise_estimate: NoiseOut,
    converged: bool,
    evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_errors: Option<Vec<TruthError>>,
}

pub fn cmd_estimate(data: &DataFile, cfg: &ScenarioConfig) -> Result<String> {
    let (geometry, scene) = cfg.scene()?;
    let (m, n, _, _) = data.dims();
    if m != geometry.n_rx() || n != geometry.n_tx() {
        return Err(Error::Config(format!(
            "data has M={m}, N={n} but the config arrays have M={}, N={}",
            geometry.n_rx(),
            geometry.n_tx()
        )));
    }
    let opts = cfg.localize_options(&geometry)?;
    let est = localize(&data.y, &data.x, &geometry, scene.carrier(), &opts)?;
    let truth_errors = if data.truth.is_empty() {
        None
    } else {
        let truth: Vec<Point> = data.truth.iter().map(|t| t.position).collect();
        let asg = assign_targets(&est.positions, &truth)?;
        Some(
            truth
                .iter()
                .zip(asg)
                .enumerate()
                .map(|(k, (t, j))| TruthError { target: k, estimate: j, squared_error_m2: (est.positions[j] - t).norm_squared() })
                .collect(),
        )
    };
    let noise_estimate = match &est.noise_estimate {
        NoiseEstimate::Variance(s) => NoiseOut::Sigma2(*s),
        NoiseEstimate::Covariance(q) => {
            NoiseOut::QHat((0..q.nrows()).map(|i| (0..q.ncols()).map(|j| [q[(i, j)].re, q[(i, j)].im]).collect()).collect())
        }
    };
    let out = EstimateOut {
        criterion: opts.criterion.label(),
        amplitude_mode: opts.mode.label(),
        positions: est.positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
        coefficients: est.coefficients.iter().map(|b| [b.re, b.im]).collect(),
        objective_trace: est.objective_trace.clone(),
        noise_estimate,
        converged: est.converged,
        evaluations: est.evaluations,
        truth_errors,
    };
    let mut text = serde_json::to_string_pretty(&out).expect("result serializes");
    text.push('\n');
    Ok(text)
}

pub fn sweep_record_fields(r: &SweepRecord) -> [String; 9] {
    [
        fmt_f64(r.snr_db),
        fmt_f64(r.sigma2),
        r.estimator.label().to_string(),
        r.amplitude_mode.clone(),
        r.target_index.to_string(),
        fmt_f64(r.mse),
        fmt_f64(r.crb),
        r.trials_used.to_string(),
        r.failed_trials.to_string(),
    ]
}

/// Streams records as each SNR point finishes; rows written before an abort stay on disk.
pub fn cmd_sweep(cfg: &ScenarioConfig, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let spec = cfg.sweep_spec(seed)?;
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    w.flush()?;
    let res = mse_sweep_with(&spec, |r| {
        w.write_record(sweep_record_fields(r)).map_err(csv_err)?;
        w.flush()?;
        Ok(())
    });
    w.flush()?;
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-7, 3.3e-3, 123456.789, 1e300, 5e-324, 0.1 + 0.2] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(!s.contains(','));
        }
        assert_eq!(fmt_f64(1e-7), "1e-7");
        assert_eq!(fmt_f64(0.5), "0.5");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["nearfield", "bogus"]), 2);
        assert_eq!(run(["nearfield", "crb"]), 2);
    }
}
