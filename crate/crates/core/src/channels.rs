//! Line-of-sight channel synthesis, transmit signal and received signals.
//!
//! All three channels are rank one, so they are stored in factored form
//! (`gain * left * right^H`) and only materialized when a dense matrix is
//! explicitly requested. The localization and spectral-efficiency loops use
//! the Kronecker-factored shortcuts; the dense paths exist to check them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex;
use rand::Rng;

use crate::error::{check_dim, invalid, Result};
use crate::geometry::{
    axis_len, axis_response, ula_steering, AngleDeg, ArrayKind, DirectionCosine,
};
use crate::linalg::{inner_h, kron_vec, outer_h};
use crate::scalar::{complex_gaussian, dbm_to_watts, Real};

/// How the large-scale gain is derived from distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathlossModel {
    /// `(eta0 / d)^alpha` with `eta0 = 10^(eta0_dB / 10)`.
    #[default]
    Literal,
    /// `eta0 * d^(-alpha)`.
    Standard,
}

impl PathlossModel {
    pub fn gain(self, d: f64, alpha: f64, eta0_db: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(invalid(format!("distance must be positive, got {d}")));
        }
        let eta0 = 10f64.powf(eta0_db / 10.0);
        Ok(match self {
            PathlossModel::Literal => (eta0 / d).powf(alpha),
            PathlossModel::Standard => eta0 * d.powf(-alpha),
        })
    }
}

/// Large-scale gain `(eta0 / d)^alpha`, evaluated literally.
pub fn pathloss(d: f64, alpha: f64, eta0_db: f64) -> Result<f64> {
    PathlossModel::Literal.gain(d, alpha, eta0_db)
}

/// Transmit power split in watts; `total == p_r + p_u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub total_w: f64,
    pub p_r_w: f64,
    pub p_u_w: f64,
}

impl PowerSplit {
    /// Equal split, `P = 0.5 I`.
    pub fn equal(total_w: f64) -> Self {
        Self {
            total_w,
            p_r_w: 0.5 * total_w,
            p_u_w: 0.5 * total_w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_r_w >= 0.0 && self.p_u_w >= 0.0 && self.total_w >= 0.0) {
            return Err(invalid("powers must be non-negative"));
        }
        let sum = self.p_r_w + self.p_u_w;
        if (sum - self.total_w).abs() > 1e-9 * self.total_w.abs().max(f64::MIN_POSITIVE) {
            return Err(invalid(format!(
                "p_r + p_u = {sum} W does not equal the total power {} W",
                self.total_w
            )));
        }
        Ok(())
    }

    /// Same ratio, new total.
    pub fn rescaled(&self, total_w: f64) -> Self {
        let frac = if self.total_w > 0.0 {
            self.p_r_w / self.total_w
        } else {
            0.5
        };
        Self {
            total_w,
            p_r_w: frac * total_w,
            p_u_w: (1.0 - frac) * total_w,
        }
    }
}

/// Physical scenario: array sizes, geometry, pathloss, noise and power.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_b: usize,
    pub n_u: usize,
    pub n_ris: usize,
    /// Direction-cosine grid size `D` per axis.
    pub grid_size: usize,
    /// RIS element spacing in wavelengths.
    pub ris_spacing: f64,
    pub theta_r: AngleDeg,
    pub theta_u: AngleDeg,
    pub zeta_b: AngleDeg,
    pub zeta_r: AngleDeg,
    pub v_b: DirectionCosine<f64>,
    pub v_u: DirectionCosine<f64>,
    pub v_t: DirectionCosine<f64>,
    pub d_bu: f64,
    pub d_br: f64,
    pub d_ru: f64,
    pub d_rt: f64,
    pub alpha_bu: f64,
    pub alpha_br: f64,
    pub alpha_ru: f64,
    pub alpha_rt: f64,
    pub sigma_b2_dbm: f64,
    pub sigma_u2_dbm: f64,
    pub eta0_db: f64,
    pub pathloss_model: PathlossModel,
    pub power: PowerSplit,
}

impl ScenarioConfig {
    /// The reference scenario (64-element DFBS, 16-element UE, 64x64 RIS, D = 32)
    /// at P = 6 dBm, equally split.
    pub fn reference() -> Self {
        let a = |d: f64| AngleDeg::new(d).expect("finite");
        Self {
            n_b: 64,
            n_u: 16,
            n_ris: 64 * 64,
            grid_size: 32,
            ris_spacing: 0.25,
            theta_r: a(45.0),
            theta_u: a(-25.0),
            zeta_b: a(-30.0),
            zeta_r: a(25.0),
            v_b: DirectionCosine { vx: 0.133, vy: -0.112 },
            v_u: DirectionCosine { vx: 0.105, vy: -0.343 },
            v_t: DirectionCosine { vx: -0.4127, vy: 0.5397 },
            d_bu: 20.0,
            d_br: 10.0,
            d_ru: 10.0,
            d_rt: 5.0,
            alpha_bu: 3.5,
            alpha_br: 2.5,
            alpha_ru: 2.8,
            alpha_rt: 2.8,
            sigma_b2_dbm: -94.0,
            sigma_u2_dbm: -80.0,
            eta0_db: -30.0,
            pathloss_model: PathlossModel::Literal,
            power: PowerSplit::equal(dbm_to_watts(6.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_b == 0 || self.n_u == 0 {
            return Err(invalid("n_b and n_u must be positive"));
        }
        axis_len(self.n_ris)?;
        if self.grid_size < 2 || !self.grid_size.is_power_of_two() {
            return Err(invalid(format!("grid_size must be a power of two >= 2, got {}", self.grid_size)));
        }
        if !(self.ris_spacing > 0.0 && self.ris_spacing <= 0.5) {
            return Err(invalid(format!("ris_spacing must be in (0, 0.5], got {}", self.ris_spacing)));
        }
        for (name, angle) in [
            ("theta_r", self.theta_r),
            ("theta_u", self.theta_u),
            ("zeta_b", self.zeta_b),
            ("zeta_r", self.zeta_r),
        ] {
            if !angle.is_ula_angle() {
                return Err(invalid(format!("{name} must lie in (-90, 90) degrees, got {}", angle.degrees())));
            }
        }
        for (name, v) in [("v_b", self.v_b), ("v_u", self.v_u), ("v_t", self.v_t)] {
            DirectionCosine::new(v.vx, v.vy).map_err(|e| invalid(format!("{name}: {e}")))?;
        }
        for (name, d) in [("d_bu", self.d_bu), ("d_br", self.d_br), ("d_ru", self.d_ru), ("d_rt", self.d_rt)] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {d}")));
            }
        }
        for (name, x) in [
            ("alpha_bu", self.alpha_bu),
            ("alpha_br", self.alpha_br),
            ("alpha_ru", self.alpha_ru),
            ("alpha_rt", self.alpha_rt),
            ("sigma_b2_dbm", self.sigma_b2_dbm),
            ("sigma_u2_dbm", self.sigma_u2_dbm),
            ("eta0_db", self.eta0_db),
        ] {
            if !x.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        self.power.validate()
    }

    pub fn n_axis(&self) -> usize {
        axis_len(self.n_ris).unwrap_or(0)
    }

    /// Number of hierarchical stages, `log2 D`.
    pub fn n_stages(&self) -> usize {
        self.grid_size.trailing_zeros() as usize
    }

    pub fn with_total_power(&self, total_w: f64) -> Self {
        Self {
            power: self.power.rescaled(total_w),
            ..self.clone()
        }
    }

    pub fn with_target(&self, v_t: DirectionCosine<f64>) -> Self {
        Self { v_t, ..self.clone() }
    }

    pub fn eta(&self) -> Result<LargeScale> {
        let m = self.pathloss_model;
        Ok(LargeScale {
            bu: m.gain(self.d_bu, self.alpha_bu, self.eta0_db)?,
            br: m.gain(self.d_br, self.alpha_br, self.eta0_db)?,
            ru: m.gain(self.d_ru, self.alpha_ru, self.eta0_db)?,
            rt: m.gain(self.d_rt, self.alpha_rt, self.eta0_db)?,
        })
    }
}

/// Large-scale gains of the four links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScale {
    pub bu: f64,
    pub br: f64,
    pub ru: f64,
    pub rt: f64,
}

/// Everything about a scenario that does not change between Monte Carlo
/// trials, precomputed in the working precision.
#[derive(Debug, Clone)]
pub struct Scene<T> {
    pub n_b: usize,
    pub n_u: usize,
    pub n_axis: usize,
    pub grid_size: usize,
    pub spacing: T,
    /// `b(θ_r)`, `b(θ_u)`.
    pub b_r: Array1<Complex<T>>,
    pub b_u: Array1<Complex<T>>,
    /// `u(ζ_b)`, `u(ζ_r)`.
    pub u_b: Array1<Complex<T>>,
    pub u_r: Array1<Complex<T>>,
    pub v_b: DirectionCosine<T>,
    pub v_u: DirectionCosine<T>,
    pub v_t: DirectionCosine<T>,
    pub eta_bu: T,
    pub eta_br: T,
    pub eta_ru: T,
    pub eta_rt: T,
    pub sigma_b2: T,
    pub sigma_u2: T,
    pub p_r: T,
    pub p_u: T,
}

impl<T: Real> Scene<T> {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let eta = cfg.eta()?;
        Ok(Self {
            n_b: cfg.n_b,
            n_u: cfg.n_u,
            n_axis: cfg.n_axis(),
            grid_size: cfg.grid_size,
            spacing: T::lit(cfg.ris_spacing),
            b_r: ula_steering(cfg.theta_r, cfg.n_b, ArrayKind::UlaDfbs)?.entries,
            b_u: ula_steering(cfg.theta_u, cfg.n_b, ArrayKind::UlaDfbs)?.entries,
            u_b: ula_steering(cfg.zeta_b, cfg.n_u, ArrayKind::UlaUe)?.entries,
            u_r: ula_steering(cfg.zeta_r, cfg.n_u, ArrayKind::UlaUe)?.entries,
            v_b: cfg.v_b.cast(),
            v_u: cfg.v_u.cast(),
            v_t: cfg.v_t.cast(),
            eta_bu: T::lit(eta.bu),
            eta_br: T::lit(eta.br),
            eta_ru: T::lit(eta.ru),
            eta_rt: T::lit(eta.rt),
            sigma_b2: T::lit(dbm_to_watts(cfg.sigma_b2_dbm)),
            sigma_u2: T::lit(dbm_to_watts(cfg.sigma_u2_dbm)),
            p_r: T::lit(cfg.power.p_r_w),
            p_u: T::lit(cfg.power.p_u_w),
        })
    }

    pub fn n_ris(&self) -> usize {
        self.n_axis * self.n_axis
    }

    pub fn with_target(&self, v_t: DirectionCosine<T>) -> Self {
        Self { v_t, ..self.clone() }
    }

    pub fn with_powers(&self, p_r: T, p_u: T) -> Self {
        Self {
            p_r,
            p_u,
            ..self.clone()
        }
    }

    /// Horizontal/vertical RIS axis responses toward `v`.
    pub fn axis_pair(&self, v: DirectionCosine<T>) -> (Array1<Complex<T>>, Array1<Complex<T>>) {
        (
            axis_response(v.vx, self.n_axis, self.spacing),
            axis_response(v.vy, self.n_axis, self.spacing),
        )
    }

    /// Full RIS response `r(v)`.
    pub fn ris_response(&self, v: DirectionCosine<T>) -> Array1<Complex<T>> {
        let (x, y) = self.axis_pair(v);
        kron_vec(x.view(), y.view())
    }
}

/// Small-scale fading and radar cross section of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fading<T> {
    pub beta_br: Complex<T>,
    pub beta_bu: Complex<T>,
    pub beta_ru: Complex<T>,
    pub rho: Complex<T>,
}

impl<T: Real> Fading<T> {
    /// All coefficients equal to one.
    pub fn unit() -> Self {
        let one = Complex::new(T::one(), T::zero());
        Self {
            beta_br: one,
            beta_bu: one,
            beta_ru: one,
            rho: one,
        }
    }
}

/// Four i.i.d. CN(0, 1) draws, in the order `beta_br, beta_bu, beta_ru, rho`.
pub fn draw_fading<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Fading<T> {
    Fading {
        beta_br: complex_gaussian(rng, T::one()),
        beta_bu: complex_gaussian(rng, T::one()),
        beta_ru: complex_gaussian(rng, T::one()),
        rho: complex_gaussian(rng, T::one()),
    }
}

/// `gain * left * right^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Channel<T> {
    pub gain: Complex<T>,
    pub left: Array1<Complex<T>>,
    pub right: Array1<Complex<T>>,
}

impl<T: Real> Rank1Channel<T> {
    pub fn shape(&self) -> (usize, usize) {
        (self.left.len(), self.right.len())
    }

    pub fn to_dense(&self) -> Array2<Complex<T>> {
        outer_h(self.left.view(), self.right.view()).mapv(|z| z * self.gain)
    }

    pub fn zeroed(&self) -> Self {
        Self {
            gain: Complex::new(T::zero(), T::zero()),
            ..self.clone()
        }
    }
}

/// `H_bu`, `H_br`, `H_ru` and the target scattering coefficient of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T> {
    /// `N_u x N_b`.
    pub h_bu: Rank1Channel<T>,
    /// `N_r x N_b`.
    pub h_br: Rank1Channel<T>,
    /// `N_u x N_r`.
    pub h_ru: Rank1Channel<T>,
    /// `rho * eta_rt^2`.
    pub gamma: Complex<T>,
}

impl<T: Real> ChannelSet<T> {
    pub fn g_bu(&self) -> Complex<T> {
        self.h_bu.gain
    }

    pub fn g_br(&self) -> Complex<T> {
        self.h_br.gain
    }

    pub fn g_ru(&self) -> Complex<T> {
        self.h_ru.gain
    }
}

pub fn build_channels<T: Real>(scene: &Scene<T>, fading: &Fading<T>) -> ChannelSet<T> {
    ChannelSet {
        h_bu: Rank1Channel {
            gain: fading.beta_bu * scene.eta_bu,
            left: scene.u_b.clone(),
            right: scene.b_u.clone(),
        },
        h_br: Rank1Channel {
            gain: fading.beta_br * scene.eta_br,
            left: scene.ris_response(scene.v_b),
            right: scene.b_r.clone(),
        },
        h_ru: Rank1Channel {
            gain: fading.beta_ru * scene.eta_ru,
            left: scene.u_r.clone(),
            right: scene.ris_response(scene.v_u),
        },
        gamma: fading.rho * scene.eta_rt * scene.eta_rt,
    }
}

/// Dense target response `gamma * conj(r(v_t)) r(v_t)^H`, `N_r x N_r`.
pub fn target_response<T: Real>(
    v_t: DirectionCosine<T>,
    gamma: Complex<T>,
    n_ris: usize,
    spacing: T,
) -> Result<Array2<Complex<T>>> {
    let r = crate::geometry::ris_full_steering(v_t, n_ris, spacing)?.entries;
    let rc = r.mapv(|z| z.conj());
    Ok(outer_h(rc.view(), r.view()).mapv(|z| z * gamma))
}

/// Kronecker-factored RIS configuration `omega = omega_x ⊗ omega_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile<T> {
    pub wx: Array1<Complex<T>>,
    pub wy: Array1<Complex<T>>,
}

impl<T: Real> PhaseProfile<T> {
    pub fn new(wx: Array1<Complex<T>>, wy: Array1<Complex<T>>) -> Result<Self> {
        check_dim("PhaseProfile axes", wx.len(), wy.len())?;
        let tol = T::lit(1e-6).max(T::epsilon() * T::lit(64.0));
        if wx.iter().chain(wy.iter()).any(|z| (z.norm() - T::one()).abs() > tol) {
            return Err(invalid("RIS phase shifts must have unit modulus"));
        }
        Ok(Self { wx, wy })
    }

    /// All phases zero.
    pub fn uniform(n_axis: usize) -> Self {
        let one = Array1::from_elem(n_axis, Complex::new(T::one(), T::zero()));
        Self {
            wx: one.clone(),
            wy: one,
        }
    }

    pub fn n_axis(&self) -> usize {
        self.wx.len()
    }

    pub fn omega(&self) -> Array1<Complex<T>> {
        kron_vec(self.wx.view(), self.wy.view())
    }

    /// `r^H(v_out) diag(omega) r(v_in)`, evaluated per axis.
    pub fn cascade_gain(&self, v_out: DirectionCosine<T>, v_in: DirectionCosine<T>, spacing: T) -> Complex<T> {
        axis_gain(self.wx.view(), v_out.vx, v_in.vx, spacing) * axis_gain(self.wy.view(), v_out.vy, v_in.vy, spacing)
    }
}

/// `r^H(v_out) diag(w) r(v_in)` for one RIS axis.
pub fn axis_gain<T: Real>(w: ArrayView1<Complex<T>>, v_out: T, v_in: T, spacing: T) -> Complex<T> {
    let step = T::TAU() * spacing * (v_in - v_out);
    w.iter().enumerate().fold(Complex::new(T::zero(), T::zero()), |acc, (n, wn)| {
        acc + wn * Complex::from_polar(T::one(), step * T::from_usize_lossy(n))
    })
}

/// `[r^H(v_scan) diag(w) r(v_incident)]^2`.
pub fn squared_spatial_response<T: Real>(w_axis: ArrayView1<Complex<T>>, v_scan: T, v_incident: T, spacing: T) -> Complex<T> {
    let c = axis_gain(w_axis, v_scan, v_incident, spacing);
    c * c
}

/// Transmitted symbols and the DFBS output `X = F P S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitBlock<T> {
    pub s_r: Array1<Complex<T>>,
    pub s_u: Array1<Complex<T>>,
    /// `N_b x T_s`.
    pub x: Array2<Complex<T>>,
}

impl<T: Real> TransmitBlock<T> {
    pub fn snapshots(&self) -> usize {
        self.s_r.len()
    }
}

/// Unit-modulus QPSK symbol.
pub fn qpsk<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let k: u8 = rng.random_range(0..4);
    let quarter = T::FRAC_PI_2();
    Complex::from_polar(T::one(), T::FRAC_PI_4() + quarter * T::from_usize_lossy(k as usize))
}

pub fn make_transmit_block<T: Real, R: Rng + ?Sized>(scene: &Scene<T>, t_s: usize, rng: &mut R) -> Result<TransmitBlock<T>> {
    if t_s == 0 {
        return Err(invalid("snapshot count must be at least 1"));
    }
    let mut s_r = Array1::from_elem(t_s, Complex::new(T::zero(), T::zero()));
    let mut s_u = s_r.clone();
    for m in 0..t_s {
        s_r[m] = qpsk(rng);
        s_u[m] = qpsk(rng);
    }
    let x = assemble_transmit(scene, s_r.view(), s_u.view());
    Ok(TransmitBlock { s_r, s_u, x })
}

/// `sqrt(p_r/N_b) b(θ_r) s_r^T + sqrt(p_u/N_b) b(θ_u) s_u^T`.
pub fn assemble_transmit<T: Real>(
    scene: &Scene<T>,
    s_r: ArrayView1<Complex<T>>,
    s_u: ArrayView1<Complex<T>>,
) -> Array2<Complex<T>> {
    let nb = T::from_usize_lossy(scene.n_b);
    let ar = (scene.p_r / nb).sqrt();
    let au = (scene.p_u / nb).sqrt();
    Array2::from_shape_fn((scene.n_b, s_r.len()), |(n, m)| {
        scene.b_r[n] * s_r[m] * ar + scene.b_u[n] * s_u[m] * au
    })
}

fn add_noise<T: Real, R: Rng + ?Sized>(y: &mut Array2<Complex<T>>, variance: T, rng: &mut R) {
    if variance > T::zero() {
        y.mapv_inplace(|z| z + complex_gaussian(rng, variance));
    }
}

/// Dense radar echo `H_br^T Ω^T T Ω H_br X + N`.
pub fn radar_receive<T: Real, R: Rng + ?Sized>(
    x: &TransmitBlock<T>,
    omega: &PhaseProfile<T>,
    target: ArrayView2<Complex<T>>,
    h_br: ArrayView2<Complex<T>>,
    sigma_b2: T,
    rng: &mut R,
) -> Result<Array2<Complex<T>>> {
    let om = omega.omega();
    let n_r = om.len();
    check_dim("radar_receive: H_br rows", n_r, h_br.nrows())?;
    check_dim("radar_receive: target response", n_r, target.nrows())?;
    check_dim("radar_receive: target response", n_r, target.ncols())?;
    check_dim("radar_receive: X rows", h_br.ncols(), x.x.nrows())?;
    let mut oh = h_br.to_owned();
    for (mut row, w) in oh.rows_mut().into_iter().zip(om.iter()) {
        row.mapv_inplace(|z| z * w);
    }
    // (Ω H_br)^T T (Ω H_br) X
    let inner = target.dot(&oh.dot(&x.x));
    let mut y = oh.t().dot(&inner);
    add_noise(&mut y, sigma_b2, rng);
    Ok(y)
}

/// Factored radar echo `γ c_x c_y B(θ_r) X + N` with
/// `B(θ_r) = g_br^2 conj(b(θ_r)) b(θ_r)^H`.
pub fn radar_receive_factored<T: Real, R: Rng + ?Sized>(
    scene: &Scene<T>,
    x: &TransmitBlock<T>,
    cx: Complex<T>,
    cy: Complex<T>,
    channels: &ChannelSet<T>,
    sigma_b2: T,
    rng: &mut R,
) -> Array2<Complex<T>> {
    let g = channels.g_br();
    let coef = channels.gamma * cx * cy * g * g;
    // b^H X, one entry per snapshot
    let bh_x: Array1<Complex<T>> = x
        .x
        .columns()
        .into_iter()
        .map(|col| inner_h(scene.b_r.view(), col))
        .collect();
    let mut y = Array2::from_shape_fn((scene.n_b, x.snapshots()), |(n, m)| scene.b_r[n].conj() * bh_x[m] * coef);
    add_noise(&mut y, sigma_b2, rng);
    y
}

/// Composite DFBS-to-UE channel `H_bu + H_ru Ω H_br` (without the RIS term when
/// `omega` is `None`), as a dense `N_u x N_b` matrix.
pub fn composite_ue_channel<T: Real>(
    scene: &Scene<T>,
    channels: &ChannelSet<T>,
    omega: Option<&PhaseProfile<T>>,
) -> Array2<Complex<T>> {
    let mut h = channels.h_bu.to_dense();
    if let Some(profile) = omega {
        let ris = profile.cascade_gain(scene.v_u, scene.v_b, scene.spacing) * channels.g_ru() * channels.g_br();
        h += &outer_h(channels.h_ru.left.view(), channels.h_br.right.view()).mapv(|z| z * ris);
    }
    h
}

/// `Y_u = (H_bu + H_ru Ω H_br) X + N_u`.
pub fn ue_receive<T: Real, R: Rng + ?Sized>(
    scene: &Scene<T>,
    x: &TransmitBlock<T>,
    channels: &ChannelSet<T>,
    omega: Option<&PhaseProfile<T>>,
    sigma_u2: T,
    rng: &mut R,
) -> Result<Array2<Complex<T>>> {
    if let Some(p) = omega {
        check_dim("ue_receive: RIS axis", scene.n_axis, p.n_axis())?;
    }
    check_dim("ue_receive: X rows", scene.n_b, x.x.nrows())?;
    let mut y = composite_ue_channel(scene, channels, omega).dot(&x.x);
    add_noise(&mut y, sigma_u2, rng);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> ScenarioConfig {
        ScenarioConfig {
            n_b: 8,
            n_u: 4,
            n_ris: 16,
            grid_size: 4,
            ..ScenarioConfig::reference()
        }
    }

    #[test]
    fn pathloss_examples() {
        assert!((pathloss(1e-3, 2.7, -30.0).unwrap() - 1.0).abs() < 1e-12);
        let lit = pathloss(10.0, 2.5, -30.0).unwrap();
        assert!((lit / 1e-10 - 1.0).abs() < 1e-12, "{lit}");
        assert!((pathloss(1.0, 1.0, -30.0).unwrap() - 1e-3).abs() < 1e-15);
        assert!(pathloss(0.0, 2.0, -30.0).is_err());
        assert!(pathloss(-1.0, 2.0, -30.0).is_err());
        let std = PathlossModel::Standard.gain(10.0, 2.5, -30.0).unwrap();
        assert!((std - 1e-3 * 10f64.powf(-2.5)).abs() < 1e-18);
    }

    #[test]
    fn power_split_must_add_up() {
        let mut p = PowerSplit::equal(2.0);
        assert!(p.validate().is_ok());
        p.p_u_w = 0.9;
        assert!(p.validate().is_err());
        let r = PowerSplit { total_w: 4.0, p_r_w: 1.0, p_u_w: 3.0 }.rescaled(8.0);
        assert!((r.p_r_w - 2.0).abs() < 1e-15 && (r.p_u_w - 6.0).abs() < 1e-15);
    }

    #[test]
    fn unit_fading_gives_eta_magnitudes() {
        let cfg = small_config();
        let scene = Scene::<f64>::from_config(&cfg).unwrap();
        let ch = build_channels(&scene, &Fading::unit());
        let hbr = ch.h_br.to_dense();
        assert_eq!(hbr.dim(), (16, 8));
        let eta = cfg.eta().unwrap().br;
        assert!(hbr.iter().all(|z| (z.norm() / eta - 1.0).abs() < 1e-12));
        assert_eq!(ch.h_bu.shape(), (4, 8));
        assert_eq!(ch.h_ru.shape(), (4, 16));
        let rt = cfg.eta().unwrap().rt;
        assert!((ch.gamma.norm() - rt * rt).abs() <= 1e-12 * rt * rt);
    }

    #[test]
    fn reference_h_br_shape() {
        let scene = Scene::<f64>::from_config(&ScenarioConfig::reference()).unwrap();
        let ch = build_channels(&scene, &Fading::unit());
        assert_eq!(ch.h_br.shape(), (4096, 64));
    }

    #[test]
    fn target_response_trace() {
        let v = DirectionCosine::new(0.3f64, -0.2).unwrap();
        let gamma = Complex::new(0.5, -1.5);
        let t = target_response(v, gamma, 16, 0.25).unwrap();
        let r = crate::geometry::ris_full_steering(v, 16, 0.25).unwrap().entries;
        let direct: Complex<f64> = r.iter().map(|z| z.conj() * z.conj()).sum::<Complex<f64>>() * gamma;
        let trace: Complex<f64> = (0..16).map(|i| t[[i, i]]).sum();
        assert!((trace - direct).norm() < 1e-12);
        let zero = target_response(v, Complex::new(0.0, 0.0), 16, 0.25).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn transmit_block_shape_and_rank_one_without_user_stream() {
        let cfg = small_config();
        let scene = Scene::<f64>::from_config(&cfg).unwrap().with_powers(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let blk = make_transmit_block(&scene, 6, &mut rng).unwrap();
        assert_eq!(blk.x.dim(), (8, 6));
        assert!(blk.s_r.iter().chain(blk.s_u.iter()).all(|s| (s.norm() - 1.0).abs() < 1e-15));
        // every column is a multiple of b(θ_r)
        for m in 0..6 {
            let ratio = blk.x[[0, m]] / scene.b_r[0];
            for n in 0..8 {
                assert!((blk.x[[n, m]] - scene.b_r[n] * ratio).norm() < 1e-12);
            }
        }
        assert!(make_transmit_block(&scene, 0, &mut rng).is_err());
    }

    #[test]
    fn matched_phases_give_full_squared_gain() {
        let l = 12;
        let (vs, vi, sp) = (0.31f64, -0.2, 0.25);
        let w = Array1::from_shape_fn(l, |n| {
            let ri = Complex::from_polar(1.0, std::f64::consts::TAU * sp * vi * n as f64);
            let rs = Complex::from_polar(1.0, std::f64::consts::TAU * sp * vs * n as f64);
            ri.conj() * rs
        });
        let c = squared_spatial_response(w.view(), vs, vi, sp);
        assert!((c - Complex::new((l * l) as f64, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn ue_receive_without_cascade_is_direct_path() {
        let cfg = small_config();
        let scene = Scene::<f64>::from_config(&cfg).unwrap();
        let mut ch = build_channels(&scene, &Fading::unit());
        ch.h_ru = ch.h_ru.zeroed();
        ch.h_br = ch.h_br.zeroed();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let blk = make_transmit_block(&scene, 3, &mut rng).unwrap();
        let ones = PhaseProfile::uniform(4);
        let y = ue_receive(&scene, &blk, &ch, Some(&ones), 0.0, &mut rng).unwrap();
        let direct = ch.h_bu.to_dense().dot(&blk.x);
        assert!(max_abs_diff(y.view(), direct.view()) < 1e-30);
    }
}
