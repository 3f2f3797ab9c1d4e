//! Monostatic square UPA with the target on the boresight axis.

use crate::crb::fim::AxisCrb;
use crate::error::{Error, Result};
use crate::geometry::CarrierSpec;
use crate::scalar::{lit, Real};

/// The scalar sums entering the on-axis bound for an odd n×n array at distance d.
///
/// Point set: the center element plus the quadrant (i = 0..h, k = 1..h), the
/// latter counted four times, with h = (n−1)/2 and ρ = d² + (i² + k²)s².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpaSums<T: Real = f64> {
    /// D_a = Σ w/ρ = 4ν²‖a‖².
    pub d_a: T,
    pub d1x: T,
    pub d2x: T,
    pub d1z: T,
    pub d2z: T,
    pub d3z: T,
    /// D₁ᶻD_a − (D₂ᶻ)², accumulated pairwise as ½ΣΣ w w' (ρ−ρ')²/(ρ³ρ'³).
    pub gap1z: T,
    /// D₂ᶻD_a − (D₃ᶻ)², accumulated pairwise as ½ΣΣ w w' (√ρ−√ρ')²/(ρ²ρ'²).
    pub gap2z: T,
}

fn check_odd(n: usize) -> Result<usize> {
    if n == 0 || n % 2 == 0 {
        return Err(Error::invalid(format!("array size n must be odd and positive, got {n}")));
    }
    Ok((n - 1) / 2)
}

pub fn upa_sums<T: Real>(n: usize, s: T, d: T) -> Result<UpaSums<T>> {
    let h = check_odd(n)?;
    if !(s > T::zero() && d > T::zero()) {
        return Err(Error::invalid("spacing and distance must be positive"));
    }
    let (s2, d2) = (s * s, d * d);
    let (two, four) = (lit::<T>(2.0), lit::<T>(4.0));

    // (q = i²+k², weight)
    let mut pts: Vec<(u64, T)> = vec![(0, T::one())];
    for i in 0..=h as u64 {
        for k in 1..=h as u64 {
            pts.push((i * i + k * k, four));
        }
    }
    let rho = |q: u64| d2 + lit::<T>(q as f64) * s2;

    let mut sums = UpaSums {
        d_a: T::zero(),
        d1x: T::zero(),
        d2x: T::zero(),
        d1z: T::zero(),
        d2z: T::zero(),
        d3z: T::zero(),
        gap1z: T::zero(),
        gap2z: T::zero(),
    };
    for &(q, w) in &pts {
        let r = rho(q);
        sums.d_a += w / r;
        sums.d1z += w / (r * r * r);
        sums.d2z += w / (r * r);
        sums.d3z += w / (r * r.sqrt());
    }
    for i in 0..=h as u64 {
        for k in 1..=h as u64 {
            let ks = lit::<T>((k * k) as f64) * s2;
            let r = rho(i * i + k * k);
            let wgt = if i == 0 { two } else { four };
            sums.d1x += wgt * ks / (r * r * r);
            sums.d2x += wgt * ks / (r * r);
        }
    }
    for (a, &(qa, wa)) in pts.iter().enumerate() {
        let ra = rho(qa);
        for &(qb, wb) in &pts[a + 1..] {
            if qa == qb {
                continue;
            }
            let rb = rho(qb);
            let dq = lit::<T>((qa as i64 - qb as i64) as f64) * s2;
            let ww = wa * wb;
            let t1 = dq / (ra * rb);
            sums.gap1z += ww * t1 * t1 / (ra * rb);
            let t2 = dq / ((ra.sqrt() + rb.sqrt()) * ra * rb);
            sums.gap2z += ww * t2 * t2;
        }
    }
    Ok(sums)
}

/// On-axis CRB for a monostatic odd n×n half-aperture-symmetric UPA with R_X = I.
///
/// CRB_x = CRB_y = σ²/(4|b|²L‖a‖²‖ȧ_x‖²), CRB_z = σ²/(4|b|²L(‖a‖²‖ȧ_z‖² − |ȧ_z^H a|²)).
/// n = 1 gives infinite bounds (no lateral or range information from a single element).
pub fn crb_monostatic_axis<T: Real>(
    n: usize,
    s: T,
    d: T,
    carrier: &CarrierSpec<T>,
    sigma2: T,
    b_mag2: T,
    snapshots: usize,
) -> Result<AxisCrb<T>> {
    let sums = upa_sums(n, s, d)?;
    check_scalars(sigma2, b_mag2, snapshots)?;
    let nu = carrier.wavenumber();
    let nu2 = nu * nu;
    let four = lit::<T>(4.0);
    let a2 = sums.d_a / (four * nu2);
    let dax2 = (sums.d1x + nu2 * sums.d2x) / (four * nu2);
    let gap_z = d * d / (lit::<T>(16.0) * nu2 * nu2) * (sums.gap1z + nu2 * sums.gap2z);
    let k = sigma2 / (four * b_mag2 * lit::<T>(snapshots as f64));
    let inf = T::one() / T::zero();
    let cx = if dax2 > T::zero() { k / (a2 * dax2) } else { inf };
    let cz = if gap_z > T::zero() { k / gap_z } else { inf };
    Ok(AxisCrb::new(cx, cx, cz))
}

/// Large-distance approximations of the on-axis bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticCrb<T: Real = f64> {
    pub crb_x_approx: T,
    pub crb_z_approx: T,
}

/// CRB_x ≈ 48σ²ν²d⁶/(|b|²L(n²−1)n⁴s²), CRB_z ≈ 1440σ²ν²d⁸/(|b|²L(n²−1)n⁴(n²−4)s⁴).
pub fn crb_asymptotic_far<T: Real>(
    n: usize,
    s: T,
    d: T,
    carrier: &CarrierSpec<T>,
    sigma2: T,
    b_mag2: T,
    snapshots: usize,
) -> Result<AsymptoticCrb<T>> {
    check_odd(n)?;
    if n < 3 {
        return Err(Error::invalid("asymptotic bounds need n >= 3 (n²−1 and n²−4 vanish otherwise)"));
    }
    if !(s > T::zero() && d > T::zero()) {
        return Err(Error::invalid("spacing and distance must be positive"));
    }
    check_scalars(sigma2, b_mag2, snapshots)?;
    let nf = lit::<T>(n as f64);
    let nu = carrier.wavenumber();
    let base = sigma2 * nu * nu / (b_mag2 * lit::<T>(snapshots as f64));
    let n4 = nf.powi(4);
    let (d2, s2) = (d * d, s * s);
    let n2m1 = nf * nf - T::one();
    let n2m4 = nf * nf - lit::<T>(4.0);
    let crb_x_approx = lit::<T>(48.0) * base * d2 * d2 * d2 / (n2m1 * n4 * s2);
    let crb_z_approx = lit::<T>(1440.0) * base * d2 * d2 * d2 * d2 / (n2m1 * n4 * n2m4 * s2 * s2);
    Ok(AsymptoticCrb { crb_x_approx, crb_z_approx })
}

fn check_scalars<T: Real>(sigma2: T, b_mag2: T, snapshots: usize) -> Result<()> {
    if !(sigma2 > T::zero()) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    if !(b_mag2 > T::zero()) {
        return Err(Error::DegenerateParameter("zero reflection coefficient".into()));
    }
    if snapshots == 0 {
        return Err(Error::invalid("snapshot count L must be at least 1"));
    }
    Ok(())
}
