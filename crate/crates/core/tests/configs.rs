use std::path::PathBuf;

use nearfield_core::config::ScenarioConfig;
use nearfield_core::harness::received_power;
use nearfield_core::AmplitudeMode;

fn load(name: &str) -> ScenarioConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let text = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    ScenarioConfig::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn shipped_configs_are_valid() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if !name.ends_with(".json") {
            continue;
        }
        let cfg = load(&name);
        let (g, s) = cfg.scene().unwrap();
        cfg.waveform(&g, &s).unwrap();
        if cfg.sweep.is_some() {
            cfg.sweep_spec(None).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        n += 1;
    }
    assert!(n >= 8);
}

// both arms of the waveform comparison share σ², set by the isotropic arm
#[test]
fn waveform_comparison_shares_the_isotropic_reference_power() {
    let iso = load("setup2_isotropic.json");
    let (g, s) = iso.scene().unwrap();
    let p = received_power(&g, &s, &iso.waveform(&g, &s).unwrap(), &AmplitudeMode::Exact).unwrap();
    for name in ["setup2_isotropic.json", "setup2_directed.json"] {
        let r = load(name).sweep.unwrap().reference_signal_power.unwrap();
        assert!((r - p).abs() <= 1e-12 * p, "{name}: {r:e}, isotropic received power is {p:e}");
    }
    let mut dir = load("setup2_directed.json");
    dir.waveform = iso.waveform.clone();
    assert_eq!(dir, iso, "arms differ in more than the waveform");
}
