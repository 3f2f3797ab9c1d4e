use nalgebra::{DMatrix, Vector3};
use nearfield_core::channel::{steering_bundle, AmplitudeMode};
use nearfield_core::crb::{
    crb_asymptotic_far, crb_from_fim, crb_monostatic_axis, crb_single_wgn, fim_multi, single_target_terms,
    NoiseCovariance, TransmitCovariance,
};
use nearfield_core::{build_upa, ArrayGeometry, CarrierSpec, Complex, Error, Plane, Target, TargetScene, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn random_cloud(rng: &mut ChaCha20Rng, n: usize, center: Vector3<f64>, half: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| center + Vector3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half)))
        .collect()
}

fn random_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize) -> DMatrix<C64> {
    DMatrix::from_fn(r, c, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_hpd(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<C64> {
    let g = random_matrix(rng, n, n + 2);
    &g * g.adjoint() / Complex::from((n + 2) as f64) + DMatrix::identity(n, n) * Complex::from(0.1)
}

fn random_scene(rng: &mut ChaCha20Rng, k: usize) -> (ArrayGeometry, TargetScene) {
    let m = rng.random_range(2..=12);
    let n = rng.random_range(2..=12);
    let tx = random_cloud(rng, n, Vector3::new(0.4, 0.0, 0.0), 0.3);
    let rx = random_cloud(rng, m, Vector3::new(-0.4, 0.0, 0.0), 0.3);
    let carrier = CarrierSpec::new(rng.random_range(0.5e9..6e9)).unwrap();
    let targets = (0..k)
        .map(|_| {
            let p = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(1.0..3.0));
            Target::new(p, Complex::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..6.28)))
        })
        .collect();
    (ArrayGeometry::new(tx, rx).unwrap(), TargetScene::new(targets, carrier).unwrap())
}

/// F_ij = 2 Re tr(D_i^H Q^{-1} D_j) with D_i = ∂(A B V^T X)/∂θ_i formed column by column.
fn brute_force_fim(
    geometry: &ArrayGeometry,
    scene: &TargetScene,
    x: &DMatrix<C64>,
    q: &DMatrix<C64>,
) -> DMatrix<f64> {
    let k = scene.len();
    let bundle = steering_bundle(geometry, scene, &AmplitudeMode::Exact).unwrap();
    let qinv = q.clone().try_inverse().unwrap();
    let mut d: Vec<DMatrix<C64>> = vec![DMatrix::zeros(0, 0); 5 * k];
    for t in 0..k {
        let b = scene.targets()[t].reflection;
        let a = bundle.a.column(t).into_owned();
        let v = bundle.v.column(t).into_owned();
        for u in 0..3 {
            let da = bundle.da[u].column(t).into_owned();
            let dv = bundle.dv[u].column(t).into_owned();
            d[u * k + t] = (&da * v.transpose() + &a * dv.transpose()) * x * b;
        }
        d[3 * k + t] = &a * v.transpose() * x;
        d[4 * k + t] = &a * v.transpose() * x * Complex::new(0.0, 1.0);
    }
    DMatrix::from_fn(5 * k, 5 * k, |i, j| 2.0 * (d[i].adjoint() * &qinv * &d[j]).trace().re)
}

#[test]
fn fim_matches_trace_formula_with_complex_waveform_and_colored_noise() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for k in 1..=3 {
        let (g, s) = random_scene(&mut rng, k);
        let l = 7;
        let x = random_matrix(&mut rng, g.n_tx(), l);
        let rx = &x * x.adjoint() / Complex::from(l as f64);
        let q = random_hpd(&mut rng, g.n_rx());
        let f = fim_multi(&g, &s, &TransmitCovariance::Matrix(rx), &NoiseCovariance::Full(q.clone()), l, &AmplitudeMode::Exact)
            .unwrap();
        let want = brute_force_fim(&g, &s, &x, &q);
        let scale = want.amax();
        assert!((&f.fim - &want).amax() < 1e-10 * scale, "K={k}: {}", (&f.fim - &want).amax() / scale);
    }
}

#[test]
fn cached_blocks_are_the_complex_entries_of_the_real_fim() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (g, s) = random_scene(&mut rng, 2);
    let f = fim_multi(&g, &s, &TransmitCovariance::Identity, &NoiseCovariance::White(0.3), 4, &AmplitudeMode::Exact).unwrap();
    let k = 2;
    assert!((f.fim[(f.position_index(1, 0), f.position_index(2, 1))] - 2.0 * f.blocks.f_uv[1][2][(0, 1)].re).abs() < 1e-30_f64.max(1e-15 * f.fim.amax()));
    assert_eq!(f.fim[(0, 3 * k + 1)], 2.0 * f.blocks.f_ub[0][(0, 1)].re);
    assert_eq!(f.fim[(0, 4 * k + 1)], -2.0 * f.blocks.f_ub[0][(0, 1)].im);
    assert_eq!(f.fim[(4 * k, 4 * k + 1)], 2.0 * f.blocks.f_bb[(0, 1)].re);
}

#[test]
fn closed_form_matches_matrix_route_on_random_scenes() {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    for trial in 0..20 {
        let (g, s) = random_scene(&mut rng, 1);
        let rx = if trial % 2 == 0 {
            TransmitCovariance::Identity
        } else {
            TransmitCovariance::Matrix(random_hpd(&mut rng, g.n_tx()))
        };
        let mode = if trial % 3 == 0 { AmplitudeMode::constant_at_centroids(&g) } else { AmplitudeMode::Exact };
        let sigma2 = rng.random_range(1e-4..1.0);
        let l = rng.random_range(1..100);
        let closed = crb_single_wgn(&g, &s, &rx, sigma2, l, &mode).unwrap();
        let matrix = crb_from_fim(&fim_multi(&g, &s, &rx, &NoiseCovariance::White(sigma2), l, &mode).unwrap()).unwrap();
        let m = matrix.targets[0];
        for u in 0..3 {
            assert!(rel(closed.axis(u), m.axis(u)) < 1e-8, "trial {trial} axis {u}: {} vs {}", closed.axis(u), m.axis(u));
        }
    }
}

#[test]
fn projected_gram_equals_real_part_of_direct_terms() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for _ in 0..10 {
        let (g, s) = random_scene(&mut rng, 1);
        let rx = TransmitCovariance::Matrix(random_hpd(&mut rng, g.n_tx()));
        let t = single_target_terms(&g, &s, &rx, &AmplitudeMode::Exact).unwrap();
        let direct = (t.f_tilde - t.f_r).map(|z| z.re);
        assert!((direct - t.d_tilde).amax() < 1e-9 * t.d_tilde.amax());
    }
}

fn upa_scene(n: usize, d: f64, carrier: CarrierSpec) -> (ArrayGeometry, TargetScene) {
    let s = carrier.wavelength() / 2.0;
    let g = ArrayGeometry::monostatic(build_upa(n, n, s, Vector3::zeros(), Plane::Xy).unwrap()).unwrap();
    let scene = TargetScene::single(Vector3::new(0.0, 0.0, d), Complex::new(1.0, 0.0), carrier).unwrap();
    (g, scene)
}

// 50-digit evaluation of σ²/(4|b|²L‖a‖²‖ȧ_x‖²) and σ²/(4|b|²L(‖a‖²‖ȧ_z‖² − |ȧ_z^H a|²))
// from the explicit steering vectors, σ² = |b|² = L = 1, 28 GHz, s = λ/2.
const UPA_REFERENCE: [(usize, f64, f64, f64); 8] = [
    (3, 1.0, 890209233.21147158972, 186375460811561.41384),
    (3, 5.0, 13907772312687.444946, 72792043047638242101.0),
    (35, 1.0, 321.02693237617350835, 278280.4536096389204),
    (35, 5.0, 4910913.794050756039, 105301868430.26952889),
    (35, 10.0, 314089270.93776613281, 26930333510073.438922),
    (5, 5.0, 600822743323.39566214, 748731236096259428.74),
    (15, 5.0, 794854482.98759831624, 94129554493699.611711),
    (75, 5.0, 50852.352416690672028, 237238155.02618362551),
];

#[test]
fn on_axis_sums_match_high_precision_reference() {
    let c = CarrierSpec::<f64>::new(28e9).unwrap();
    for &(n, d, cx, cz) in &UPA_REFERENCE {
        let got = crb_monostatic_axis(n, c.wavelength() / 2.0, d, &c, 1.0, 1.0, 1).unwrap();
        assert!(rel(got.crb_x, cx) < 1e-12, "n={n} d={d} x: {}", rel(got.crb_x, cx));
        assert_eq!(got.crb_x, got.crb_y);
        assert!(rel(got.crb_z, cz) < 1e-12, "n={n} d={d} z: {}", rel(got.crb_z, cz));
    }
}

#[test]
fn closed_form_matches_high_precision_reference_on_axis() {
    let c = CarrierSpec::<f64>::new(28e9).unwrap();
    for &(n, d, cx, cz) in &UPA_REFERENCE[..5] {
        let (g, s) = upa_scene(n, d, c);
        let got = crb_single_wgn(&g, &s, &TransmitCovariance::Identity, 1.0, 1, &AmplitudeMode::Exact).unwrap();
        assert!(rel(got.crb_x, cx) < 1e-11, "n={n} d={d} x: {}", rel(got.crb_x, cx));
        assert!(rel(got.crb_y, cx) < 1e-11);
        assert!(rel(got.crb_z, cz) < 1e-11, "n={n} d={d} z: {}", rel(got.crb_z, cz));
    }
}

#[test]
fn crb_decreases_with_aperture() {
    let c = CarrierSpec::<f64>::new(28e9).unwrap();
    let s = c.wavelength() / 2.0;
    let sums: Vec<f64> = [5, 15, 35, 75]
        .iter()
        .map(|&n| crb_monostatic_axis(n, s, 5.0, &c, 1.0, 1.0, 1).unwrap().crb_sum)
        .collect();
    assert!(sums.windows(2).all(|w| w[1] < w[0]), "{sums:?}");
}

#[test]
fn closed_form_scalings_are_exact() {
    let c = CarrierSpec::<f64>::new(10e9).unwrap();
    let (g, s) = upa_scene(5, 0.7, c);
    let rx = TransmitCovariance::Identity;
    let m = AmplitudeMode::Exact;
    let base = crb_single_wgn(&g, &s, &rx, 0.01, 16, &m).unwrap();
    let s2 = crb_single_wgn(&g, &s, &rx, 0.02, 16, &m).unwrap();
    let l2 = crb_single_wgn(&g, &s, &rx, 0.01, 32, &m).unwrap();
    let twice_b = TargetScene::single(s.targets()[0].position, Complex::new(2.0, 0.0), c).unwrap();
    let b2 = crb_single_wgn(&g, &twice_b, &rx, 0.01, 16, &m).unwrap();
    for u in 0..3 {
        assert_eq!(s2.axis(u), 2.0 * base.axis(u));
        assert_eq!(l2.axis(u), base.axis(u) / 2.0);
        assert_eq!(b2.axis(u), base.axis(u) / 4.0);
    }
    assert_eq!(base.crb_x, base.crb_y);
}

#[test]
fn asymptotic_law_converges() {
    let c = CarrierSpec::<f64>::new(28e9).unwrap();
    let s = c.wavelength() / 2.0;
    let d = 50.0 * 35.0 * s;
    let exact = crb_monostatic_axis(35, s, d, &c, 1.0, 1.0, 1).unwrap();
    let approx = crb_asymptotic_far(35, s, d, &c, 1.0, 1.0, 1).unwrap();
    assert!((approx.crb_x_approx / exact.crb_x - 1.0).abs() < 0.05);
    assert!((approx.crb_z_approx / exact.crb_z - 1.0).abs() < 0.05);
}

#[test]
fn coincident_targets_are_unidentifiable() {
    let c = CarrierSpec::<f64>::new(3e9).unwrap();
    let g = ArrayGeometry::monostatic(build_upa(3, 3, 0.05, Vector3::zeros(), Plane::Xy).unwrap()).unwrap();
    let p = Vector3::new(0.1, 0.2, 1.5);
    let s = TargetScene::new(vec![Target::new(p, Complex::new(1.0, 0.0)), Target::new(p, Complex::new(0.5, 0.5))], c).unwrap();
    let f = fim_multi(&g, &s, &TransmitCovariance::Identity, &NoiseCovariance::White(1.0), 10, &AmplitudeMode::Exact).unwrap();
    match crb_from_fim(&f) {
        Err(Error::SingularMatrix { condition, .. }) => assert!(condition > 1e12),
        other => panic!("expected singular FIM, got {other:?}"),
    }
}

#[test]
fn zero_reflection_is_rejected() {
    let c = CarrierSpec::<f64>::new(3e9).unwrap();
    let g = ArrayGeometry::monostatic(build_upa(2, 2, 0.05, Vector3::zeros(), Plane::Xy).unwrap()).unwrap();
    let s = TargetScene::single(Vector3::new(0.0, 0.0, 1.0), Complex::new(0.0, 0.0), c).unwrap();
    let r = fim_multi(&g, &s, &TransmitCovariance::Identity, &NoiseCovariance::White(1.0), 1, &AmplitudeMode::Exact);
    assert!(matches!(r, Err(Error::DegenerateParameter(_))));
    let r = crb_single_wgn(&g, &s, &TransmitCovariance::Identity, 1.0, 1, &AmplitudeMode::Exact);
    assert!(matches!(r, Err(Error::DegenerateParameter(_))));
}

#[test]
fn synthetic_fim_inverse() {
    let f = DMatrix::<f64>::identity(5, 5) * 2.0;
    let (c, cond) = nearfield_core::crb::invert_fim(&f).unwrap();
    assert!((cond - 1.0).abs() < 1e-12);
    for i in 0..5 {
        assert!((c[(i, i)] - 0.5).abs() < 1e-15);
    }
}

#[test]
fn generic_over_f32() {
    let c = CarrierSpec::<f32>::new(3e9).unwrap();
    let g = ArrayGeometry::monostatic(build_upa::<f32>(3, 3, 0.05, Vector3::zeros(), Plane::Xy).unwrap()).unwrap();
    let s = TargetScene::single(Vector3::new(0.1f32, 0.0, 0.5), Complex::new(1.0f32, 0.0), c).unwrap();
    let a = crb_single_wgn(&g, &s, &TransmitCovariance::Identity, 1e-3f32, 10, &AmplitudeMode::Exact).unwrap();
    let cd = CarrierSpec::<f64>::new(3e9).unwrap();
    let gd = ArrayGeometry::monostatic(build_upa(3, 3, 0.05, Vector3::zeros(), Plane::Xy).unwrap()).unwrap();
    let sd = TargetScene::single(Vector3::new(0.1, 0.0, 0.5), Complex::new(1.0, 0.0), cd).unwrap();
    let b = crb_single_wgn(&gd, &sd, &TransmitCovariance::Identity, 1e-3, 10, &AmplitudeMode::Exact).unwrap();
    assert!(rel(a.crb_sum as f64, b.crb_sum) < 1e-3);
}
