//! Concentrated likelihoods of the two estimators and their coefficient fits.
//!
//! The public functions evaluate the formulas directly from Y, X and the
//! candidate locations. [`Objective`] is the prepared form used inside grid
//! searches: data products are formed once and each candidate location only
//! contributes one steering column.

use nalgebra::DMatrix;

use crate::channel::{fill_steering, AmplitudeMode};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, CarrierSpec};
use crate::linalg::{cholesky, hermitian_condition, hermitian_part, log_det_hpd, trace_re};
use crate::{CMatrix, CVector, Point, C64};

/// Condition number of J above which it is regularized.
pub const J_CONDITION_LIMIT: f64 = 1e12;

/// Which concentrated likelihood drives the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Criterion {
    /// Unknown noise covariance Q (approximate ML with cyclic optimization).
    #[serde(rename = "aco")]
    Aco,
    /// White noise of unknown power.
    #[serde(rename = "co-wgn")]
    CoWgn,
}

impl Criterion {
    pub fn label(self) -> &'static str {
        match self {
            Criterion::Aco => "aco",
            Criterion::CoWgn => "co-wgn",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aco" | "ACO" => Ok(Criterion::Aco),
            "co-wgn" | "CO-WGN" | "cowgn" | "wgn" => Ok(Criterion::CoWgn),
            _ => Err(Error::invalid(format!("unknown estimator {s:?} (expected aco or co-wgn)"))),
        }
    }
}

fn amplitude(carrier: &CarrierSpec, mode: &AmplitudeMode) -> Option<f64> {
    mode.is_exact().then(|| carrier.wavelength() / (4.0 * std::f64::consts::PI))
}

/// A (M×K) and V (N×K) for candidate locations under `mode`.
pub fn steering_matrices(
    geometry: &ArrayGeometry,
    carrier: &CarrierSpec,
    mode: &AmplitudeMode,
    locations: &[Point],
) -> Result<(CMatrix, CMatrix)> {
    let nu = carrier.wavenumber();
    let amp = amplitude(carrier, mode);
    let mut a = CMatrix::zeros(geometry.n_rx(), locations.len());
    let mut v = CMatrix::zeros(geometry.n_tx(), locations.len());
    for (k, l) in locations.iter().enumerate() {
        let mut col = vec![C64::default(); geometry.n_rx()];
        fill_steering(geometry.rx(), l, nu, amp, &mut col)?;
        a.set_column(k, &CVector::from_vec(col));
        let mut col = vec![C64::default(); geometry.n_tx()];
        fill_steering(geometry.tx(), l, nu, amp, &mut col)?;
        v.set_column(k, &CVector::from_vec(col));
    }
    Ok((a, v))
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
/// `None` when a pivot falls below 1e-13 of the largest entry (numerically singular).
fn solve_small(m: &CMatrix, rhs: &[C64]) -> Option<Vec<C64>> {
    let k = m.nrows();
    let mut a = m.clone();
    let mut b = rhs.to_vec();
    let scale = a.iter().fold(0.0f64, |s, z| s.max(z.norm()));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    for c in 0..k {
        let piv = (c..k).max_by(|&i, &j| a[(i, c)].norm().total_cmp(&a[(j, c)].norm()))?;
        if !(a[(piv, c)].norm() > 1e-13 * scale) {
            return None;
        }
        if piv != c {
            a.swap_rows(piv, c);
            b.swap(piv, c);
        }
        let d = a[(c, c)];
        for i in c + 1..k {
            let f = a[(i, c)] / d;
            for j in c..k {
                let t = a[(c, j)];
                a[(i, j)] -= f * t;
            }
            let t = b[c];
            b[i] -= f * t;
        }
    }
    for c in (0..k).rev() {
        let mut s = b[c];
        for j in c + 1..k {
            s -= a[(c, j)] * b[j];
        }
        b[c] = s / a[(c, c)];
    }
    Some(b)
}

/// Hadamard system [(A^H J⁻¹ A) ⊙ P^T] b = vecd(Ψ).
fn hadamard_solve(phi: &CMatrix, p: &CMatrix, psi: &CMatrix) -> Result<Vec<C64>> {
    let k = phi.nrows();
    let m = CMatrix::from_fn(k, k, |i, j| phi[(i, j)] * p[(j, i)]);
    let rhs: Vec<C64> = (0..k).map(|i| psi[(i, i)]).collect();
    solve_small(&m, &rhs).ok_or_else(|| Error::DegenerateScene("coefficient system is singular (coincident candidate locations?)".into()))
}

fn small_inverse(m: &CMatrix) -> Option<CMatrix> {
    let k = m.nrows();
    let mut inv = CMatrix::zeros(k, k);
    for j in 0..k {
        let mut e = vec![C64::default(); k];
        e[j] = C64::new(1.0, 0.0);
        inv.set_column(j, &CVector::from_vec(solve_small(m, &e)?));
    }
    Some(inv)
}

fn check_gram(p: &CMatrix) -> Result<()> {
    let c = hermitian_condition(p);
    if !(c <= J_CONDITION_LIMIT) {
        return Err(Error::RankDeficient(format!("S·S^H is singular (condition {c:.3e}); the waveform does not excite every candidate")));
    }
    Ok(())
}

/// Regularization level for J: 1e-12 of the average received power per antenna.
fn j_delta(r: &CMatrix, l: usize) -> f64 {
    let t = trace_re(r) / (l as f64 * r.nrows() as f64);
    if t > 0.0 {
        1e-12 * t
    } else {
        1e-18
    }
}

struct AcoFit {
    b: Vec<C64>,
    /// L·ln det W with W = L·J_reg + H P H^H.
    f3: f64,
    /// W/L, the noise covariance estimate (carries δI when J was regularized).
    w: CMatrix,
}

/// Direct AML fit from the data products R = YY^H, G = YS^H, P = SS^H.
fn aco_direct(a: &CMatrix, g: &CMatrix, p: &CMatrix, r: &CMatrix, l: usize, want_w: bool) -> Result<AcoFit> {
    let m = a.nrows();
    let lf = l as f64;
    let pinv = small_inverse(p).ok_or_else(|| Error::RankDeficient("S·S^H is singular".into()))?;
    let mut lj = hermitian_part(&(r - g * &pinv * g.adjoint()));
    let j = &lj / C64::from(lf);
    let bad_diag = (0..m).any(|i| !(j[(i, i)].re > 0.0));
    if bad_diag || hermitian_condition(&j) > J_CONDITION_LIMIT {
        let delta = j_delta(r, l);
        for i in 0..m {
            lj[(i, i)] += C64::from(lf * delta);
        }
    }
    let chol = cholesky(&lj).ok_or_else(|| Error::SingularMatrix { context: "residual covariance J".into(), condition: f64::INFINITY })?;
    let ja = chol.solve(a);
    let jg = chol.solve(g);
    let phi = a.adjoint() * &ja;
    let psi = a.adjoint() * &jg;
    let b = hadamard_solve(&phi, p, &psi)?;
    let bm = CMatrix::from_diagonal(&CVector::from_vec(b.clone()));
    let h = g * &pinv - a * &bm;
    let w = hermitian_part(&(lj + &h * p * h.adjoint()));
    let ld = log_det_hpd(&w).ok_or_else(|| Error::SingularMatrix { context: "residual Gram matrix".into(), condition: f64::INFINITY })?;
    Ok(AcoFit { b, f3: lf * ld, w: if want_w { w / C64::from(lf) } else { CMatrix::zeros(0, 0) } })
}

/// AML reflection estimates b = [(A^H J⁻¹ A) ⊙ (SS^H)^T]⁻¹ vecd(A^H J⁻¹ Y S^H),
/// J = (YY^H − YS^H(SS^H)⁻¹SY^H)/L.
///
/// J is replaced by J + δI, δ = 1e-12·tr(YY^H)/(LM), when its condition number
/// exceeds 1e12 or a diagonal entry is not positive (noiseless data).
pub fn aml_coefficients(a: &CMatrix, s: &CMatrix, y: &CMatrix) -> Result<Vec<C64>> {
    check_dims(a, s, y)?;
    let p = hermitian_part(&(s * s.adjoint()));
    check_gram(&p)?;
    let g = y * s.adjoint();
    let r = hermitian_part(&(y * y.adjoint()));
    Ok(aco_direct(a, &g, &p, &r, y.ncols(), false)?.b)
}

fn check_dims(a: &CMatrix, s: &CMatrix, y: &CMatrix) -> Result<()> {
    if a.nrows() != y.nrows() || a.ncols() != s.nrows() || s.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, S is {}x{}, Y is {}x{}",
            a.nrows(),
            a.ncols(),
            s.nrows(),
            s.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(())
}

/// Value of the ACO concentrated negative log-likelihood.
#[derive(Clone, Debug)]
pub struct AcoValue {
    /// f₃ = L·ln det W; `-inf` when `perfect_fit`.
    pub f3: f64,
    /// The residual Y − A·diag(b)·S vanished (noiseless data at the true locations).
    pub perfect_fit: bool,
    pub coefficients: Vec<C64>,
    /// Q̂ = W/L.
    pub q_hat: CMatrix,
}

/// Residuals below this fraction of ‖Y‖_F count as a perfect fit.
pub const PERFECT_FIT_TOL: f64 = 1e-10;

/// f₃ = L·ln det[(Y − A diag(b) S)(Y − A diag(b) S)^H] with AML coefficients.
///
/// When J needs regularization the same δ enters W as L·δ·I, which keeps f₃
/// finite on noiseless data; an exactly fitting candidate set is reported
/// through `perfect_fit` with f₃ = −∞.
pub fn concentrated_nll_aco(
    geometry: &ArrayGeometry,
    carrier: &CarrierSpec,
    mode: &AmplitudeMode,
    locations: &[Point],
    x: &CMatrix,
    y: &CMatrix,
) -> Result<AcoValue> {
    check_data(geometry, x, y)?;
    let (a, v) = steering_matrices(geometry, carrier, mode, locations)?;
    let s = v.transpose() * x;
    let p = hermitian_part(&(&s * s.adjoint()));
    check_gram(&p)?;
    let g = y * s.adjoint();
    let r = hermitian_part(&(y * y.adjoint()));
    let fit = aco_direct(&a, &g, &p, &r, y.ncols(), true)?;
    let e = y - &a * CMatrix::from_diagonal(&CVector::from_vec(fit.b.clone())) * &s;
    let perfect_fit = e.norm() <= PERFECT_FIT_TOL * y.norm();
    Ok(AcoValue {
        f3: if perfect_fit { f64::NEG_INFINITY } else { fit.f3 },
        perfect_fit,
        coefficients: fit.b,
        q_hat: fit.w,
    })
}

fn check_data(geometry: &ArrayGeometry, x: &CMatrix, y: &CMatrix) -> Result<()> {
    if x.nrows() != geometry.n_tx() || y.nrows() != geometry.n_rx() || x.ncols() != y.ncols() || x.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "X is {}x{} and Y is {}x{} for N={} transmit and M={} receive antennas",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols(),
            geometry.n_tx(),
            geometry.n_rx()
        )));
    }
    Ok(())
}

/// Σ and λ of the white-noise stationarity conditions Σb = λ.
///
/// λ_i = a_i^H Y X^H v_i* / (‖a_i‖² v_i^T XX^H v_i*),
/// β_ik = a_i^H a_k v_k^T XX^H v_i* / (‖a_i‖² v_i^T XX^H v_i*), Σ_ii = 1.
pub fn wgn_system(a: &CMatrix, v: &CMatrix, x: &CMatrix, y: &CMatrix) -> Result<(CMatrix, Vec<C64>)> {
    let k = a.ncols();
    let xv = x.adjoint() * v.map(|z| z.conj()); // L×K, column i = X^H v_i*
    let yxv = y * &xv; // M×K
    let mut sigma = CMatrix::zeros(k, k);
    let mut lambda = vec![C64::default(); k];
    for i in 0..k {
        let den = a.column(i).norm_squared() * xv.column(i).norm_squared();
        if !(den > 0.0) {
            return Err(Error::DegenerateScene("candidate receives no transmit power".into()));
        }
        lambda[i] = a.column(i).dotc(&yxv.column(i)) / den;
        for kk in 0..k {
            sigma[(i, kk)] = if i == kk {
                C64::new(1.0, 0.0)
            } else {
                // v_k^T X X^H v_i* = (X^H v_k*)^H (X^H v_i*)
                a.column(i).dotc(&a.column(kk)) * xv.column(kk).dotc(&xv.column(i)) / den
            };
        }
    }
    Ok((sigma, lambda))
}

/// b = Σ⁻¹λ for the white-noise criterion.
pub fn wgn_coefficients(
    geometry: &ArrayGeometry,
    carrier: &CarrierSpec,
    mode: &AmplitudeMode,
    locations: &[Point],
    x: &CMatrix,
    y: &CMatrix,
) -> Result<Vec<C64>> {
    check_data(geometry, x, y)?;
    let (a, v) = steering_matrices(geometry, carrier, mode, locations)?;
    let (sigma, lambda) = wgn_system(&a, &v, x, y)?;
    solve_small(&sigma, &lambda).ok_or_else(|| Error::DegenerateScene("Σ is singular (coincident candidate locations?)".into()))
}

#[derive(Clone, Debug)]
pub struct WgnValue {
    /// f₃^WGN: summed squared residual at b = Σ⁻¹λ.
    pub f3: f64,
    /// σ̂² = f₃^WGN/(LM).
    pub sigma2_hat: f64,
    pub coefficients: Vec<C64>,
}

pub fn concentrated_nll_wgn(
    geometry: &ArrayGeometry,
    carrier: &CarrierSpec,
    mode: &AmplitudeMode,
    locations: &[Point],
    x: &CMatrix,
    y: &CMatrix,
) -> Result<WgnValue> {
    let b = wgn_coefficients(geometry, carrier, mode, locations, x, y)?;
    let (a, v) = steering_matrices(geometry, carrier, mode, locations)?;
    let e = y - a * CMatrix::from_diagonal(&CVector::from_vec(b.clone())) * v.transpose() * x;
    let f3 = e.norm_squared();
    Ok(WgnValue { f3, sigma2_hat: f3 / (y.len() as f64), coefficients: b })
}

/// Steering data of one candidate location, reusable across evaluations.
#[derive(Clone, Debug)]
pub struct Column {
    pub location: Point,
    a: CVector,
    v: CVector,
    /// Y X^H v*.
    g: CVector,
    /// X X^H v*.
    rxv: CVector,
    /// R⁻¹ g and R⁻¹ a (fast ACO path only).
    tg: Option<CVector>,
    ta: Option<CVector>,
}

enum AcoPrep {
    None,
    /// R = YY^H well conditioned: Woodbury form around R⁻¹.
    Fast { r: CMatrix, r_inv: CMatrix, d: CMatrix, ln_det_r: f64 },
    /// Ill-conditioned R (noiseless data): J formed per candidate.
    Direct { r: CMatrix },
}

/// Prepared concentrated likelihood for grid searches.
pub struct Objective<'a> {
    geometry: &'a ArrayGeometry,
    nu: f64,
    amp: Option<f64>,
    criterion: Criterion,
    l: usize,
    y_norm2: f64,
    c_yx: CMatrix,
    r_xx: CMatrix,
    aco: AcoPrep,
}

impl<'a> Objective<'a> {
    pub fn new(
        geometry: &'a ArrayGeometry,
        carrier: &CarrierSpec,
        mode: &AmplitudeMode,
        criterion: Criterion,
        x: &CMatrix,
        y: &CMatrix,
    ) -> Result<Self> {
        check_data(geometry, x, y)?;
        let c_yx = y * x.adjoint();
        let r_xx = hermitian_part(&(x * x.adjoint()));
        let aco = match criterion {
            Criterion::CoWgn => AcoPrep::None,
            Criterion::Aco => {
                let r = hermitian_part(&(y * y.adjoint()));
                let ln_det_r = log_det_hpd(&r);
                match ln_det_r {
                    Some(ld) if hermitian_condition(&r) <= J_CONDITION_LIMIT => {
                        let r_inv = cholesky(&r).expect("factorized above").inverse();
                        let r_inv = hermitian_part(&r_inv);
                        let d = &r_inv * &c_yx;
                        AcoPrep::Fast { r, r_inv, d, ln_det_r: ld }
                    }
                    _ => AcoPrep::Direct { r },
                }
            }
        };
        Ok(Self {
            geometry,
            nu: carrier.wavenumber(),
            amp: amplitude(carrier, mode),
            criterion,
            l: y.ncols(),
            y_norm2: y.norm_squared(),
            c_yx,
            r_xx,
            aco,
        })
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn snapshots(&self) -> usize {
        self.l
    }

    pub fn column(&self, location: &Point) -> Result<Column> {
        let g = self.geometry;
        let mut a = CVector::zeros(g.n_rx());
        fill_steering(g.rx(), location, self.nu, self.amp, a.as_mut_slice())?;
        let mut v = CVector::zeros(g.n_tx());
        fill_steering(g.tx(), location, self.nu, self.amp, v.as_mut_slice())?;
        let vc = v.map(|z| z.conj());
        let gcol = &self.c_yx * &vc;
        let rxv = &self.r_xx * &vc;
        let (tg, ta) = match &self.aco {
            AcoPrep::Fast { r_inv, d, .. } => (Some(d * &vc), Some(r_inv * &a)),
            _ => (None, None),
        };
        Ok(Column { location: *location, a, v, g: gcol, rxv, tg, ta })
    }

    fn gram_p(cols: &[&Column]) -> CMatrix {
        let k = cols.len();
        let p = CMatrix::from_fn(k, k, |i, j| cols[i].v.dot(&cols[j].rxv));
        hermitian_part(&p)
    }

    /// Criterion value (f₃ or f₃^WGN) for the candidate set `cols`.
    pub fn evaluate(&self, cols: &[&Column]) -> Result<f64> {
        Ok(self.fit(cols)?.0)
    }

    /// Value and coefficient estimates.
    pub fn fit(&self, cols: &[&Column]) -> Result<(f64, Vec<C64>)> {
        match self.criterion {
            Criterion::CoWgn => self.fit_wgn(cols),
            Criterion::Aco => self.fit_aco(cols),
        }
    }

    fn fit_wgn(&self, cols: &[&Column]) -> Result<(f64, Vec<C64>)> {
        let k = cols.len();
        let p = Self::gram_p(cols);
        let sigma = CMatrix::from_fn(k, k, |i, j| cols[i].a.dotc(&cols[j].a) * p[(j, i)]);
        let h: Vec<C64> = cols.iter().map(|c| c.a.dotc(&c.g)).collect();
        let b = solve_small(&sigma, &h).ok_or_else(|| Error::DegenerateScene("Σ is singular".into()))?;
        let fit: f64 = h.iter().zip(&b).map(|(hi, bi)| (hi.conj() * bi).re).sum();
        Ok((self.y_norm2 - fit, b))
    }

    fn fit_aco(&self, cols: &[&Column]) -> Result<(f64, Vec<C64>)> {
        let k = cols.len();
        let p = Self::gram_p(cols);
        let mut a = CMatrix::zeros(self.geometry.n_rx(), k);
        let mut g = CMatrix::zeros(self.geometry.n_rx(), k);
        for (j, c) in cols.iter().enumerate() {
            a.set_column(j, &c.a);
            g.set_column(j, &c.g);
        }
        let (r, fast) = match &self.aco {
            AcoPrep::Fast { r, ln_det_r, .. } => (r, Some(*ln_det_r)),
            AcoPrep::Direct { r } => (r, None),
            AcoPrep::None => unreachable!("ACO objective without ACO preparation"),
        };
        if let Some(ld) = fast {
            if let Some(res) = self.fit_aco_fast(cols, &p, ld) {
                return res;
            }
            // Ω not positive definite: fall through to the direct form
        }
        check_gram(&p)?;
        let fit = aco_direct(&a, &g, &p, r, self.l, false)?;
        Ok((fit.f3, fit.b))
    }

    /// Woodbury evaluation: everything reduces to K×K products of a, g, R⁻¹a, R⁻¹g.
    fn fit_aco_fast(&self, cols: &[&Column], p: &CMatrix, ln_det_r: f64) -> Option<Result<(f64, Vec<C64>)>> {
        let k = cols.len();
        let ta = |j: usize| cols[j].ta.as_ref().expect("fast column");
        let tg = |j: usize| cols[j].tg.as_ref().expect("fast column");
        let ata = hermitian_part(&CMatrix::from_fn(k, k, |i, j| cols[i].a.dotc(ta(j))));
        let atg = CMatrix::from_fn(k, k, |i, j| cols[i].a.dotc(tg(j)));
        let gtg = hermitian_part(&CMatrix::from_fn(k, k, |i, j| cols[i].g.dotc(tg(j))));
        let omega = hermitian_part(&(p - &gtg));
        let ld_omega = log_det_hpd(&omega)?;
        let ld_p = match log_det_hpd(p) {
            Some(v) => v,
            None => return Some(Err(Error::RankDeficient("S·S^H is singular".into()))),
        };
        let om_inv = small_inverse(&omega)?;
        let p_inv = match small_inverse(p) {
            Some(v) => v,
            None => return Some(Err(Error::RankDeficient("S·S^H is singular".into()))),
        };
        let phi = &ata + &atg * &om_inv * atg.adjoint();
        let psi = &atg + &atg * &om_inv * &gtg;
        let b = match hadamard_solve(&phi, p, &psi) {
            Ok(b) => b,
            Err(e) => return Some(Err(e)),
        };
        let bm = CMatrix::from_diagonal(&CVector::from_vec(b.clone()));
        let bh = bm.adjoint();
        let gta = atg.adjoint();
        let hrh = &p_inv * &gtg * &p_inv - &p_inv * &gta * &bm - &bh * &atg * &p_inv + &bh * &ata * &bm;
        let tgh = &gtg * &p_inv - &gta * &bm;
        let z = hrh + tgh.adjoint() * &om_inv * &tgh;
        let det = (DMatrix::<C64>::identity(k, k) + z * p).determinant();
        let ld_extra = det.norm().ln();
        if !ld_extra.is_finite() {
            return None;
        }
        let f3 = self.l as f64 * (ln_det_r + ld_omega - ld_p + ld_extra);
        Some(Ok((f3, b)))
    }
}
