//! Downlink spectral efficiency of the two-stream DFBS-UE link.

use ndarray::Array2;
use num_complex::Complex;
use rayon::prelude::*;

use crate::channels::{build_channels, composite_ue_channel, ChannelSet, Fading, PhaseProfile, Scene};
use crate::codebook::{design_comm_phases, Codebook};
use crate::error::{check_dim, invalid, Result};
use crate::localization::{beam_containing, true_cell};
use crate::rng::StreamKey;
use crate::scalar::{complex_gaussian, Real};
use crate::stats::{mean_ci, MeanEstimate};

/// Precoder, combiner and stream powers.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMatrices<T> {
    /// `N_b^{-1/2} [b(θ_r) b(θ_u)]`.
    pub f: Array2<Complex<T>>,
    /// `N_u^{-1/2} [u(ζ_r) u(ζ_b)]`.
    pub c: Array2<Complex<T>>,
    /// Diagonal of `P`: `(sqrt(p_r), sqrt(p_u))`.
    pub p: [T; 2],
}

pub fn build_link_matrices<T: Real>(scene: &Scene<T>) -> LinkMatrices<T> {
    let fb = T::one() / T::from_usize_lossy(scene.n_b).sqrt();
    let fu = T::one() / T::from_usize_lossy(scene.n_u).sqrt();
    let f = Array2::from_shape_fn((scene.n_b, 2), |(n, k)| if k == 0 { scene.b_r[n] } else { scene.b_u[n] } * fb);
    let c = Array2::from_shape_fn((scene.n_u, 2), |(n, k)| if k == 0 { scene.u_r[n] } else { scene.u_b[n] } * fu);
    LinkMatrices {
        f,
        c,
        p: [scene.p_r.sqrt(), scene.p_u.sqrt()],
    }
}

/// `C^H (H_bu + H_ru Ω H_br) F P`; `omega = None` drops the RIS term.
pub fn effective_channel<T: Real>(
    scene: &Scene<T>,
    channels: &ChannelSet<T>,
    omega: Option<&PhaseProfile<T>>,
    link: &LinkMatrices<T>,
) -> Result<Array2<Complex<T>>> {
    check_dim("effective_channel: precoder rows", scene.n_b, link.f.nrows())?;
    check_dim("effective_channel: combiner rows", scene.n_u, link.c.nrows())?;
    if let Some(p) = omega {
        check_dim("effective_channel: RIS axis", scene.n_axis, p.n_axis())?;
    }
    let h = composite_ue_channel(scene, channels, omega);
    let ch = link.c.t().mapv(|z| z.conj());
    let mut out = ch.dot(&h).dot(&link.f);
    for (mut col, &p) in out.columns_mut().into_iter().zip(link.p.iter()) {
        col.mapv_inplace(|z| z * p);
    }
    Ok(out)
}

/// `log2 det(I_2 + H H^H / sigma_u^2)` for a 2x2 `H`.
pub fn spectral_efficiency<T: Real>(h_eff: &Array2<Complex<T>>, sigma_u2: T) -> Result<T> {
    if !(sigma_u2 > T::zero()) {
        return Err(invalid("noise power must be positive"));
    }
    check_dim("spectral_efficiency: rows", 2, h_eff.nrows())?;
    check_dim("spectral_efficiency: cols", 2, h_eff.ncols())?;
    let row_dot = |i: usize, j: usize| -> Complex<T> {
        (0..2).fold(Complex::new(T::zero(), T::zero()), |acc, k| acc + h_eff[[i, k]] * h_eff[[j, k]].conj())
    };
    let a11 = row_dot(0, 0).re / sigma_u2;
    let a22 = row_dot(1, 1).re / sigma_u2;
    let a12 = row_dot(0, 1) / sigma_u2;
    let det = (T::one() + a11) * (T::one() + a22) - a12.norm_sqr();
    Ok(det.max(T::one()).log2())
}

/// Small-scale fading model used by the SE average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FadingMode {
    #[default]
    Rayleigh,
    /// All coefficients fixed to 1.
    Unit,
}

/// Link fading of one trial: the three `beta` coefficients, drawn in the
/// order br, bu, ru. The radar cross section is not used.
pub fn draw_link_fading<T: Real>(key: &StreamKey, mode: FadingMode) -> Fading<T> {
    match mode {
        FadingMode::Unit => Fading::unit(),
        FadingMode::Rayleigh => {
            let mut rng = key.rng();
            let one = T::one();
            Fading {
                beta_br: complex_gaussian(&mut rng, one),
                beta_bu: complex_gaussian(&mut rng, one),
                beta_ru: complex_gaussian(&mut rng, one),
                rho: Complex::new(one, T::zero()),
            }
        }
    }
}

/// Monte Carlo mean SE over `trials` fading draws; trial `n` uses
/// `key.child(n)`, so scenarios sharing `key` see identical fading.
pub fn average_se<T: Real>(
    scene: &Scene<T>,
    omega: Option<&PhaseProfile<T>>,
    trials: u64,
    key: &StreamKey,
    mode: FadingMode,
) -> Result<MeanEstimate> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let link = build_link_matrices(scene);
    let samples = (0..trials)
        .into_par_iter()
        .map(|n| {
            let fading = draw_link_fading::<T>(&key.child(n), mode);
            let channels = build_channels(scene, &fading);
            let h = effective_channel(scene, &channels, omega, &link)?;
            spectral_efficiency(&h, scene.sigma_u2).map(|se| se.to_f64_lossy())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_ci(&samples))
}

/// RIS configurations compared in the SE sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SeScenario {
    /// Whole surface phased toward the UE, no sensing.
    Benchmark,
    /// Stage-`s` beam covering the target cell.
    Stage(usize),
    /// RIS cascade removed.
    NoRis,
}

impl SeScenario {
    pub fn tag(&self) -> String {
        match self {
            Self::Benchmark => "benchmark".into(),
            Self::Stage(s) => format!("stage-{s}"),
            Self::NoRis => "no-ris".into(),
        }
    }
}

/// Communication-only profile over all axis elements.
pub fn benchmark_profile<T: Real>(scene: &Scene<T>) -> Result<PhaseProfile<T>> {
    let n = scene.n_axis;
    Ok(PhaseProfile {
        wx: design_comm_phases(n, n, scene.v_b.vx, scene.v_u.vx, scene.spacing)?,
        wy: design_comm_phases(n, n, scene.v_b.vy, scene.v_u.vy, scene.spacing)?,
    })
}

/// Phase profile the RIS holds under `scenario`; `None` for no RIS.
pub fn scenario_profile<T: Real>(scene: &Scene<T>, codebook: &Codebook<T>, scenario: SeScenario) -> Result<Option<PhaseProfile<T>>> {
    match scenario {
        SeScenario::Benchmark => benchmark_profile(scene).map(Some),
        SeScenario::NoRis => Ok(None),
        SeScenario::Stage(s) => {
            if s == 0 || s > codebook.n_stages() {
                return Err(invalid(format!("stage {s} outside 1..={}", codebook.n_stages())));
            }
            let cell = true_cell(&codebook.grid, scene);
            let k = beam_containing(s, cell, codebook.grid_size());
            Ok(Some(codebook.stage(s).beam_profile(k)))
        }
    }
}

/// Nominal SNR of the RIS-reflected stream with the benchmark profile and
/// unit fading: `N_u N_r^2 N_b p_r eta_ru^2 eta_br^2 / sigma_u^2`.
pub fn nominal_ris_stream_snr<T: Real>(scene: &Scene<T>) -> f64 {
    let nr = scene.n_ris() as f64;
    let e = (scene.eta_ru * scene.eta_br).to_f64_lossy();
    scene.n_u as f64 * nr * nr * scene.n_b as f64 * scene.p_r.to_f64_lossy() * e * e / scene.sigma_u2.to_f64_lossy()
}

/// `p_r` (watts) at which `nominal_ris_stream_snr` equals `snr` (linear).
pub fn radar_power_for_ris_snr<T: Real>(scene: &Scene<T>, snr: f64) -> f64 {
    snr / nominal_ris_stream_snr(&scene.with_powers(T::one(), scene.p_u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ScenarioConfig;

    fn scene() -> Scene<f64> {
        Scene::from_config(&ScenarioConfig::reference()).unwrap()
    }

    #[test]
    fn precoder_columns_have_unit_norm() {
        let link = build_link_matrices(&scene());
        for col in link.f.columns().into_iter().chain(link.c.columns()) {
            let n: f64 = col.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let cross: Complex<f64> = link.f.column(0).iter().zip(link.f.column(1)).map(|(a, b)| a.conj() * b).sum();
        assert!(cross.norm() < 0.05);
    }

    #[test]
    fn se_examples() {
        let zero = Array2::<Complex<f64>>::zeros((2, 2));
        assert_eq!(spectral_efficiency(&zero, 1.0).unwrap(), 0.0);
        let s2 = 0.3f64;
        let eye = Array2::from_shape_fn((2, 2), |(i, j)| if i == j { Complex::new(s2.sqrt(), 0.0) } else { Complex::new(0.0, 0.0) });
        assert!((spectral_efficiency(&eye, s2).unwrap() - 2.0).abs() < 1e-12);
        let (a, b) = (1.7, 0.4);
        let d = Array2::from_shape_fn((2, 2), |(i, j)| match (i, j) {
            (0, 0) => Complex::new(a, 0.0),
            (1, 1) => Complex::new(0.0, b),
            _ => Complex::new(0.0, 0.0),
        });
        let expected = (1.0 + a * a / s2).log2() + (1.0 + b * b / s2).log2();
        assert!((spectral_efficiency(&d, s2).unwrap() - expected).abs() < 1e-12);
        assert!(spectral_efficiency(&d, 0.0).is_err());
    }

    #[test]
    fn unit_fading_has_zero_spread() {
        let sc = scene();
        let est = average_se(&sc, None, 5, &StreamKey::new(1), FadingMode::Unit).unwrap();
        assert_eq!(est.half_width, 0.0);
        assert_eq!(est.samples, 5);
    }

    #[test]
    fn effective_channel_scales_with_sqrt_power() {
        let sc = scene();
        let ch = build_channels(&sc, &Fading::unit());
        let prof = benchmark_profile(&sc).unwrap();
        let h1 = effective_channel(&sc, &ch, Some(&prof), &build_link_matrices(&sc)).unwrap();
        let sc4 = sc.with_powers(sc.p_r * 4.0, sc.p_u * 4.0);
        let h4 = effective_channel(&sc4, &ch, Some(&prof), &build_link_matrices(&sc4)).unwrap();
        for (a, b) in h1.iter().zip(h4.iter()) {
            assert!((a * 2.0 - b).norm() <= 1e-12 * b.norm().max(1e-300));
        }
    }
}
