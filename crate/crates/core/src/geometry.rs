//! Antenna layouts, carrier and target scenes.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Complex, Real};

/// Speed of light in vacuum (m/s), exact by definition of the metre.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Axis-aligned plane for planar arrays. The first named axis is the fast index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Xy,
    Xz,
    Yz,
}

impl Plane {
    pub fn axes(self) -> (usize, usize) {
        match self {
            Plane::Xy => (0, 1),
            Plane::Xz => (0, 2),
            Plane::Yz => (1, 2),
        }
    }

    pub fn normal_axis(self) -> usize {
        3 - self.axes().0 - self.axes().1
    }
}

/// Regular `n_x` by `n_y` grid in `plane`, symmetric about `center`.
///
/// Ordering is row-major with the first in-plane axis varying fastest, so
/// element `ix + n_x * iy` sits at in-plane offset `(ix - (n_x-1)/2, iy - (n_y-1)/2) * spacing`.
pub fn build_upa<T: Real>(
    n_x: usize,
    n_y: usize,
    spacing: T,
    center: Vector3<T>,
    plane: Plane,
) -> Result<Vec<Vector3<T>>> {
    if n_x == 0 || n_y == 0 {
        return Err(Error::invalid(format!("UPA needs positive counts, got {n_x}x{n_y}")));
    }
    if !(spacing > T::zero()) || !spacing.is_finite() {
        return Err(Error::invalid("UPA spacing must be positive and finite"));
    }
    if !center.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("UPA center must be finite"));
    }
    let (ax, ay) = plane.axes();
    let half = spacing * lit::<T>(0.5);
    // (2i - (n-1)) * s/2 keeps the grid exactly symmetric and puts the middle
    // element of an odd grid exactly on the center.
    let offset = |i: usize, n: usize| -> T {
        let twice = 2 * i as i64 - (n as i64 - 1);
        lit::<T>(twice as f64) * half
    };
    let mut out = Vec::with_capacity(n_x * n_y);
    for iy in 0..n_y {
        for ix in 0..n_x {
            let mut p = center;
            p[ax] += offset(ix, n_x);
            p[ay] += offset(iy, n_y);
            out.push(p);
        }
    }
    Ok(out)
}

/// Positions of the transmit and receive antennas.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry<T: Real = f64> {
    tx: Vec<Vector3<T>>,
    rx: Vec<Vector3<T>>,
}

impl<T: Real> ArrayGeometry<T> {
    pub fn new(tx: Vec<Vector3<T>>, rx: Vec<Vector3<T>>) -> Result<Self> {
        check_array(&tx, "tx")?;
        check_array(&rx, "rx")?;
        Ok(Self { tx, rx })
    }

    /// Co-located transmit and receive arrays.
    pub fn monostatic(positions: Vec<Vector3<T>>) -> Result<Self> {
        Self::new(positions.clone(), positions)
    }

    pub fn tx(&self) -> &[Vector3<T>] {
        &self.tx
    }

    pub fn rx(&self) -> &[Vector3<T>] {
        &self.rx
    }

    /// Number of transmit antennas (N).
    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }

    /// Number of receive antennas (M).
    pub fn n_rx(&self) -> usize {
        self.rx.len()
    }

    pub fn is_monostatic(&self) -> bool {
        self.tx == self.rx
    }

    pub fn tx_centroid(&self) -> Vector3<T> {
        centroid(&self.tx)
    }

    pub fn rx_centroid(&self) -> Vector3<T> {
        centroid(&self.rx)
    }

    /// Smallest antenna-to-point distance over both arrays.
    pub fn min_distance_to(&self, p: &Vector3<T>) -> T {
        self.tx
            .iter()
            .chain(self.rx.iter())
            .map(|a| (a - p).norm())
            .fold(T::max_value().unwrap_or_else(T::one), |m, d| if d < m { d } else { m })
    }
}

fn centroid<T: Real>(pts: &[Vector3<T>]) -> Vector3<T> {
    let mut s = Vector3::zeros();
    for p in pts {
        s += p;
    }
    s / lit::<T>(pts.len() as f64)
}

fn check_array<T: Real>(pts: &[Vector3<T>], name: &str) -> Result<()> {
    if pts.is_empty() {
        return Err(Error::invalid(format!("{name} array is empty")));
    }
    if let Some(i) = pts.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::invalid(format!("{name} antenna {i} has a non-finite coordinate")));
    }
    // Duplicate detection by sorting indices lexicographically: O(n log n)
    // instead of the pairwise scan, which matters for 10^4-element arrays.
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        let (pa, pb) = (&pts[a], &pts[b]);
        (0..3)
            .map(|k| pa[k].partial_cmp(&pb[k]).unwrap())
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for w in idx.windows(2) {
        if pts[w[0]] == pts[w[1]] {
            return Err(Error::invalid(format!(
                "{name} antennas {} and {} share a position",
                w[0].min(w[1]),
                w[0].max(w[1])
            )));
        }
    }
    Ok(())
}

/// Carrier frequency with derived wavelength and wavenumber.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarrierSpec<T: Real = f64> {
    carrier_hz: T,
}

impl<T: Real> CarrierSpec<T> {
    pub fn new(carrier_hz: T) -> Result<Self> {
        if !(carrier_hz > T::zero()) || !carrier_hz.is_finite() {
            return Err(Error::invalid("carrier frequency must be positive and finite"));
        }
        Ok(Self { carrier_hz })
    }

    pub fn carrier_hz(&self) -> T {
        self.carrier_hz
    }

    /// λ = c / f_c.
    pub fn wavelength(&self) -> T {
        lit::<T>(SPEED_OF_LIGHT) / self.carrier_hz
    }

    /// ν = 2π / λ.
    pub fn wavenumber(&self) -> T {
        T::two_pi() / self.wavelength()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target<T: Real = f64> {
    pub position: Vector3<T>,
    pub reflection: Complex<T>,
}

impl<T: Real> Target<T> {
    pub fn new(position: Vector3<T>, reflection: Complex<T>) -> Self {
        Self { position, reflection }
    }
}

/// Targets plus the carrier they are observed at.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetScene<T: Real = f64> {
    targets: Vec<Target<T>>,
    carrier: CarrierSpec<T>,
}

impl<T: Real> TargetScene<T> {
    pub fn new(targets: Vec<Target<T>>, carrier: CarrierSpec<T>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("scene needs at least one target"));
        }
        for (k, t) in targets.iter().enumerate() {
            if !t.position.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(format!("target {k} position is not finite")));
            }
            if !(t.reflection.re.is_finite() && t.reflection.im.is_finite()) {
                return Err(Error::invalid(format!("target {k} reflection is not finite")));
            }
        }
        Ok(Self { targets, carrier })
    }

    /// Scene with a single target.
    pub fn single(position: Vector3<T>, reflection: Complex<T>, carrier: CarrierSpec<T>) -> Result<Self> {
        Self::new(vec![Target::new(position, reflection)], carrier)
    }

    pub fn targets(&self) -> &[Target<T>] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn carrier(&self) -> &CarrierSpec<T> {
        &self.carrier
    }

    pub fn positions(&self) -> Vec<Vector3<T>> {
        self.targets.iter().map(|t| t.position).collect()
    }

    pub fn reflections(&self) -> Vec<Complex<T>> {
        self.targets.iter().map(|t| t.reflection).collect()
    }

    /// Same scene with every target replaced; used for distance sweeps.
    pub fn with_targets(&self, targets: Vec<Target<T>>) -> Result<Self> {
        Self::new(targets, self.carrier)
    }

    /// Every target must be strictly away from every antenna.
    pub fn check_separation(&self, geometry: &ArrayGeometry<T>) -> Result<()> {
        for (k, t) in self.targets.iter().enumerate() {
            let d = geometry.min_distance_to(&t.position);
            if !(d > T::zero()) {
                return Err(Error::Singularity(format!("target {k} coincides with an antenna")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_element_grid() {
        let p = build_upa(1, 1, 0.3, Vector3::zeros(), Plane::Xy).unwrap();
        assert_eq!(p, vec![Vector3::zeros()]);
    }

    #[test]
    fn three_by_three_unit_grid() {
        let p = build_upa(3, 3, 1.0, Vector3::zeros(), Plane::Xy).unwrap();
        assert_eq!(p.len(), 9);
        for q in &p {
            assert!([-1.0, 0.0, 1.0].contains(&q.x));
            assert!([-1.0, 0.0, 1.0].contains(&q.y));
            assert_eq!(q.z, 0.0);
        }
        // x is the fast index
        assert_eq!(p[0], Vector3::new(-1.0, -1.0, 0.0));
        assert_eq!(p[1], Vector3::new(0.0, -1.0, 0.0));
        assert_eq!(p[3], Vector3::new(-1.0, 0.0, 0.0));
        assert_eq!(p[4], Vector3::zeros());
    }

    #[test]
    fn large_upa_extent() {
        let lambda = SPEED_OF_LIGHT / 28e9;
        let p = build_upa(16, 768, lambda / 2.0, Vector3::zeros(), Plane::Xy).unwrap();
        let span = |k: usize| {
            let lo = p.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min);
            let hi = p.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        };
        // 15 and 767 half-wavelength gaps
        assert!((span(0) - 0.0803).abs() < 5e-4, "{}", span(0));
        assert!((span(1) - 4.107).abs() < 5e-3, "{}", span(1));
    }

    #[test]
    fn plane_selection() {
        let p = build_upa(2, 1, 2.0, Vector3::new(0.0, 5.0, 1.0), Plane::Yz).unwrap();
        assert_eq!(p[0], Vector3::new(0.0, 4.0, 1.0));
        assert_eq!(p[1], Vector3::new(0.0, 6.0, 1.0));
        assert_eq!(Plane::Yz.normal_axis(), 0);
    }

    #[test]
    fn bad_upa_arguments() {
        assert!(build_upa(0, 3, 1.0, Vector3::zeros(), Plane::Xy).is_err());
        assert!(build_upa(3, 3, 0.0, Vector3::zeros(), Plane::Xy).is_err());
        assert!(build_upa(3, 3, -1.0, Vector3::zeros(), Plane::Xy).is_err());
    }

    #[test]
    fn duplicate_antennas_rejected() {
        let p = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 0.0)];
        let err = ArrayGeometry::new(p.clone(), vec![Vector3::zeros()]).unwrap_err();
        assert!(err.to_string().contains("0 and 2"), "{err}");
        assert!(ArrayGeometry::new(vec![], p).is_err());
    }

    #[test]
    fn monostatic_accepted() {
        let p = build_upa(3, 3, 0.1, Vector3::zeros(), Plane::Xy).unwrap();
        let g = ArrayGeometry::monostatic(p).unwrap();
        assert!(g.is_monostatic());
        assert_eq!(g.n_tx(), 9);
    }

    #[test]
    fn carrier_relations() {
        let c = CarrierSpec::new(28e9).unwrap();
        assert!((c.wavelength() * c.wavenumber() - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert!(CarrierSpec::new(0.0).is_err());
        assert!(CarrierSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn target_on_antenna_rejected() {
        let g = ArrayGeometry::monostatic(vec![Vector3::new(1.0, 2.0, 3.0)]).unwrap();
        let s = TargetScene::single(Vector3::new(1.0, 2.0, 3.0), Complex::new(1.0, 0.0), CarrierSpec::new(1e9).unwrap())
            .unwrap();
        assert!(matches!(s.check_separation(&g), Err(Error::Singularity(_))));
    }

    #[test]
    fn f32_grid() {
        let p = build_upa::<f32>(3, 1, 0.5, Vector3::zeros(), Plane::Xz).unwrap();
        assert_eq!(p[2], Vector3::new(0.5f32, 0.0, 0.0));
    }

    proptest! {
        #[test]
        fn upa_is_centered(nx in 1usize..12, ny in 1usize..12, s in 1e-3f64..2.0,
                           cx in -5.0f64..5.0, cy in -5.0f64..5.0, cz in -5.0f64..5.0) {
            let c = Vector3::new(cx, cy, cz);
            let p = build_upa(nx, ny, s, c, Plane::Xy).unwrap();
            let mean = p.iter().fold(Vector3::zeros(), |a, q| a + q) / p.len() as f64;
            prop_assert!((mean - c).norm() <= 1e-12 * s.max(c.norm()));
        }

        #[test]
        fn upa_nearest_neighbour_is_spacing(nx in 1usize..8, ny in 1usize..8, s in 1e-3f64..2.0) {
            prop_assume!(nx * ny >= 2);
            let p = build_upa(nx, ny, s, Vector3::zeros(), Plane::Xz).unwrap();
            for (i, a) in p.iter().enumerate() {
                let nn = p.iter().enumerate().filter(|(j, _)| *j != i)
                    .map(|(_, b)| (a - b).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!((nn - s).abs() <= 4.0 * f64::EPSILON * s);
            }
        }

        #[test]
        fn upa_transpose_is_relabeling(nx in 1usize..7, ny in 1usize..7, s in 0.01f64..1.0) {
            let a = build_upa(nx, ny, s, Vector3::zeros(), Plane::Xy).unwrap();
            let b = build_upa(ny, nx, s, Vector3::zeros(), Plane::Xy).unwrap();
            for iy in 0..ny {
                for ix in 0..nx {
                    let p = a[ix + nx * iy];
                    let q = b[iy + ny * ix];
                    prop_assert_eq!(p.x, q.y);
                    prop_assert_eq!(p.y, q.x);
                }
            }
        }
    }
}
