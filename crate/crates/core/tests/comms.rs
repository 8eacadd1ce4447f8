//! Link-level spectral efficiency checks.

use ndarray::Array1;

use ris_jrc::channels::{build_channels, Fading, PhaseProfile, ScenarioConfig, Scene};
use ris_jrc::codebook::design_comm_phases;
use ris_jrc::comms::{
    average_se, benchmark_profile, build_link_matrices, effective_channel, radar_power_for_ris_snr, FadingMode,
};
use ris_jrc::geometry::ris_axis_steering;
use ris_jrc::rng::StreamKey;

fn scene(n_axis: usize) -> Scene<f64> {
    let cfg = ScenarioConfig {
        n_ris: n_axis * n_axis,
        ..ScenarioConfig::reference()
    };
    Scene::from_config(&cfg).unwrap()
}

#[test]
fn zero_channels_give_zero_effective_channel() {
    let sc = scene(8);
    let ch = build_channels(&sc, &Fading::unit());
    let zero = ris_jrc::channels::ChannelSet {
        h_bu: ch.h_bu.zeroed(),
        h_br: ch.h_br.zeroed(),
        h_ru: ch.h_ru.zeroed(),
        gamma: ch.gamma,
    };
    let h = effective_channel(&sc, &zero, Some(&PhaseProfile::uniform(8)), &build_link_matrices(&sc)).unwrap();
    assert!(h.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn matched_cascade_reaches_full_array_gain() {
    let sc = scene(16);
    let mut ch = build_channels(&sc, &Fading::unit());
    ch.h_bu = ch.h_bu.zeroed();
    let prof = benchmark_profile(&sc).unwrap();
    let h = effective_channel(&sc, &ch, Some(&prof), &build_link_matrices(&sc)).unwrap();
    let expected = (sc.n_u as f64).sqrt() * ch.g_ru().norm() * sc.n_ris() as f64 * ch.g_br().norm()
        * (sc.n_b as f64).sqrt()
        * sc.p_r.sqrt();
    assert!((h[[0, 0]].norm() - expected).abs() <= 1e-9 * expected);
}

#[test]
fn se_grows_with_power() {
    let sc = scene(16);
    let prof = benchmark_profile(&sc).unwrap();
    let key = StreamKey::new(4);
    let mut last = f64::NEG_INFINITY;
    for snr in [1.0, 10.0, 100.0] {
        let p = radar_power_for_ris_snr(&sc, snr);
        let est = average_se(&sc.with_powers(p, p), Some(&prof), 2000, &key, FadingMode::Rayleigh).unwrap();
        assert!(est.mean > last);
        last = est.mean;
    }
}

#[test]
fn more_comm_elements_never_hurt() {
    let sc = scene(32);
    let p = radar_power_for_ris_snr(&sc, 10.0);
    let sc = sc.with_powers(p, p);
    let key = StreamKey::new(8);
    let n = sc.n_axis;
    let axis = |c: usize, v_b: f64, v_u: f64| {
        let rb = ris_axis_steering(v_b, n, 0.25).unwrap().entries;
        let h = design_comm_phases(c, n, v_b, v_u, 0.25).unwrap();
        Array1::from_shape_fn(n, |k| {
            if k < n - c {
                rb[k].conj() * if k % 2 == 0 { 1.0 } else { -1.0 }
            } else {
                h[k - (n - c)]
            }
        })
    };
    let mut last = f64::NEG_INFINITY;
    for c in [0, 8, 16, 24, 32] {
        let prof = PhaseProfile::new(axis(c, sc.v_b.vx, sc.v_u.vx), axis(c, sc.v_b.vy, sc.v_u.vy)).unwrap();
        let est = average_se(&sc, Some(&prof), 10_000, &key, FadingMode::Rayleigh).unwrap();
        assert!(est.mean >= last, "C = {c}: {} < {last}", est.mean);
        last = est.mean;
    }
}
