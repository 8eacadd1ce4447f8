//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`cargo test --test acceptance`) so the lines are
//! printed in order with timings; the process fails if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use ris_jrc::channels::{
    axis_gain, build_channels, composite_ue_channel, draw_fading, make_transmit_block, radar_receive,
    radar_receive_factored, target_response, PhaseProfile, ScenarioConfig, Scene,
};
use ris_jrc::codebook::{
    beam_quality, build_codebook, design_comm_phases, oracle_codebook, stage_half_power_width, Axis, Grid,
    QualityGates, SolverParams,
};
use ris_jrc::geometry::{ris_axis_steering, ris_full_steering, DirectionCosine};
use ris_jrc::linalg::{diag, khatri_rao, kron_vec, vec_col_major};
use ris_jrc::localization::{
    exhaustive_localize, exhaustive_transmissions, hierarchical_localize, rule_kappa, snapshot_rule,
    snapshot_rule_literal, RuleVariant, SnapshotSchedule,
};
use ris_jrc::rng::{SimRng, StreamKey};
use ris_jrc::{Scene64, C64};
use ris_jrc_harness::config::Config;
use ris_jrc_harness::experiment::{design_codebook, run_experiment, ExperimentKind, ExperimentPlan};
use ris_jrc_harness::output::{write_results, ResultTable};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn random_unit(rng: &mut SimRng, n: usize) -> Array1<C64> {
    Array1::from_shape_fn(n, |_| C64::from_polar(1.0, rng.random_range(-3.2..3.2)))
}

fn random_matrix(rng: &mut SimRng, r: usize, c: usize) -> Array2<C64> {
    Array2::from_shape_fn((r, c), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn scene(n_axis: usize, d: usize) -> Scene64 {
    let cfg = ScenarioConfig {
        n_ris: n_axis * n_axis,
        grid_size: d,
        ..ScenarioConfig::reference()
    };
    Scene::from_config(&cfg).expect("valid scene")
}

fn analytic_identities() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = StreamKey::new(1).rng();
    let mut worst = 0.0f64;

    for _ in 0..20 {
        let v = DirectionCosine::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).unwrap();
        let n = rng.random_range(2..40usize);
        let full = ris_full_steering(v, n * n, 0.25).unwrap().entries;
        let x = ris_axis_steering(v.vx, n, 0.25).unwrap().entries;
        let y = ris_axis_steering(v.vy, n, 0.25).unwrap().entries;
        let direct: Vec<C64> = (0..n * n)
            .map(|k| C64::from_polar(1.0, std::f64::consts::TAU * 0.25 * ((k / n) as f64 * v.vx + (k % n) as f64 * v.vy)))
            .collect();
        let e = rel(full.as_slice().unwrap(), &direct).max(rel(kron_vec(x.view(), y.view()).as_slice().unwrap(), &direct));
        worst = worst.max(e);
        ensure(e < TOL, || format!("Kronecker steering off by {e:e}"))?;
    }

    for _ in 0..20 {
        let (m, n, p) = (rng.random_range(1..8), rng.random_range(1..8), rng.random_range(1..8));
        let a = random_matrix(&mut rng, m, n);
        let b = random_matrix(&mut rng, n, p);
        let g = random_matrix(&mut rng, n, 1).column(0).to_owned();
        let lhs = vec_col_major(a.dot(&diag(g.view())).dot(&b).view());
        let rhs = khatri_rao(b.t(), a.view()).dot(&g);
        let e = rel(lhs.as_slice().unwrap(), rhs.as_slice().unwrap());
        worst = worst.max(e);
        ensure(e < TOL, || format!("Khatri-Rao identity off by {e:e}"))?;
    }

    let n = 64;
    let (v_b, v_u) = (0.133, -0.343);
    let rb = ris_axis_steering(v_b, n, 0.25).unwrap().entries;
    let ru = ris_axis_steering(v_u, n, 0.25).unwrap().entries;
    for c_s in [1, 16, 48, 56, 60, 64] {
        let h = design_comm_phases(c_s, n, v_b, v_u, 0.25).unwrap();
        let gain: C64 = (0..c_s).map(|k| ru[n - c_s + k].conj() * h[k] * rb[n - c_s + k]).sum();
        let e = (gain.norm() - c_s as f64).abs() / c_s as f64;
        worst = worst.max(e);
        ensure(e < TOL, || format!("comm gain {} != C_s = {c_s}", gain.norm()))?;
    }

    let sc = ScenarioConfig {
        n_b: 16,
        n_u: 8,
        n_ris: 256,
        grid_size: 16,
        ..ScenarioConfig::reference()
    };
    let sc = Scene64::from_config(&sc).unwrap();
    let cb = build_codebook(&sc, &[4, 8, 16, 16], &SolverParams::default()).unwrap();
    for k in [1, 6, 11, 16] {
        let ch = build_channels(&sc, &draw_fading(&mut rng));
        let profile = cb.stage(2).beam_profile(k);
        let block = make_transmit_block(&sc, 4, &mut rng).unwrap();
        let t = target_response(sc.v_t, ch.gamma, sc.n_ris(), sc.spacing).unwrap();
        let dense = radar_receive(&block, &profile, t.view(), ch.h_br.to_dense().view(), 0.0, &mut rng).unwrap();
        let cx = axis_gain(profile.wx.view(), sc.v_t.vx, sc.v_b.vx, sc.spacing);
        let cy = axis_gain(profile.wy.view(), sc.v_t.vy, sc.v_b.vy, sc.spacing);
        let fact = radar_receive_factored(&sc, &block, cx * cx, cy * cy, &ch, 0.0, &mut rng);
        let e = rel(fact.as_slice().unwrap(), dense.as_slice().unwrap());
        worst = worst.max(e);
        ensure(e < TOL, || format!("factored echo off by {e:e} for beam {k}"))?;

        let p = PhaseProfile::new(random_unit(&mut rng, 16), random_unit(&mut rng, 16)).unwrap();
        let om = p.omega();
        let dense = ch.h_bu.to_dense() + ch.h_ru.to_dense().dot(&diag(om.view())).dot(&ch.h_br.to_dense());
        let fact = composite_ue_channel(&sc, &ch, Some(&p));
        let e = rel(fact.as_slice().unwrap(), dense.as_slice().unwrap());
        worst = worst.max(e);
        ensure(e < TOL, || format!("factored UE cascade off by {e:e}"))?;
    }
    Ok(format!("worst relative error {worst:.2e}"))
}

fn noiseless_oracle() -> Outcome {
    let d = 16;
    let mut base = scene(16, d);
    base.sigma_b2 = 0.0;
    let cb = oracle_codebook(&base, &[4, 8, 16, 16]).map_err(|e| e.to_string())?;
    let schedule = SnapshotSchedule::manual(&[1, 1, 1, 1]).unwrap();
    let grid = Grid::<f64>::uniform(d);
    let key = StreamKey::new(2);
    let (mut hier, mut exh) = (0, 0);
    for (a, &vx) in grid.points().iter().enumerate() {
        for (b, &vy) in grid.points().iter().enumerate() {
            let sc = base.with_target(DirectionCosine::new(vx, vy).unwrap());
            let mut rng = key.child((a * d + b) as u64).rng();
            let ch = build_channels(&sc, &draw_fading(&mut rng));
            let h = hierarchical_localize(&sc, &ch, &cb, &schedule, &mut rng).map_err(|e| e.to_string())?;
            let e = exhaustive_localize(&sc, &ch, &mut rng, 1).map_err(|e| e.to_string())?;
            hier += usize::from(h.success);
            exh += usize::from(e.success && e.estimate == h.estimate);
        }
    }
    ensure(hier == d * d && exh == d * d, || format!("hierarchical {hier}/256, exhaustive agreeing {exh}/256"))?;
    Ok(format!("hierarchical {hier}/256, exhaustive agrees {exh}/256"))
}

fn transmission_counts() -> Outcome {
    let s = SnapshotSchedule::manual(&[36, 1, 1, 1, 1]).unwrap();
    let h = s.total_transmissions();
    let e = exhaustive_transmissions(32, 1);
    // the same count from an actual search
    let sc = scene(32, 32);
    let cb = oracle_codebook(&sc, &[4, 8, 16, 16, 16]).map_err(|e| e.to_string())?;
    let mut rng = StreamKey::new(3).rng();
    let ch = build_channels(&sc, &draw_fading(&mut rng));
    let run = hierarchical_localize(&sc, &ch, &cb, &s, &mut rng).map_err(|e| e.to_string())?;
    let ex = exhaustive_localize(&sc, &ch, &mut rng, 1).map_err(|e| e.to_string())?;
    ensure(h == 160 && run.transmissions == 160 && e == 1024 && ex.transmissions == 1024, || {
        format!("hierarchical {h}/{}, exhaustive {e}/{}", run.transmissions, ex.transmissions)
    })?;
    Ok("hierarchical 160, exhaustive 1024".into())
}

/// Desk-size localization setup: `N_r = 32 x 32`, `D = 16`.
fn desk_config(extra: &str) -> Config {
    let text = format!(
        "[scenario]\nn_ris = 1024\ngrid_size = 16\n[codebook]\nsensing_lengths = [4, 8, 16, 16]\n\
         [experiment]\nseed = 2024\ntrials = 10000\ndelta = 0.05\nsweep_axis = \"radar-snr\"\n\
         snapshot_source = \"calibrated\"\nsnapshots = [1, 1, 1, 1]\nse_stages = [1, 4]\n{extra}"
    );
    Config::from_toml_str(&text, "desk").expect("desk config")
}

fn stagewise_run() -> Result<ResultTable, String> {
    let cfg = desk_config("sweep = [10.0]\n");
    let cb = design_codebook(&cfg).map_err(|e| e.to_string())?;
    let plan = ExperimentPlan::from_config(ExperimentKind::OverallError, &cfg);
    Ok(run_experiment(&plan, &cfg, &cb).map_err(|e| e.to_string())?.table)
}

fn stagewise_error(table: &ResultTable) -> Outcome {
    let delta = 0.05;
    let mut parts = Vec::new();
    for s in 1..=4 {
        let t = table.get(0, &format!("T-s{s}")).ok_or("no schedule (calibration infeasible)")?;
        let r = table.get(0, &format!("stage-error-s{s}")).unwrap();
        parts.push(format!("s{s}: T={} err={:.4}±{:.4}", t.value, r.value, r.ci_half_width));
        ensure(r.value <= delta + r.ci_half_width, || format!("stage {s} error {} > {delta} + {}", r.value, r.ci_half_width))?;
    }
    let o = table.get(0, "overall-error").unwrap();
    parts.push(format!("overall {:.4}±{:.4} (bound {})", o.value, o.ci_half_width, 4.0 * delta));
    ensure(o.value <= 4.0 * delta + o.ci_half_width, || format!("overall error {} > {}", o.value, 4.0 * delta))?;
    Ok(parts.join(", "))
}

fn snapshot_monotonicity() -> Outcome {
    let cfg = desk_config("sweep = [5.0, 10.0, 15.0, 20.0, 30.0]\n");
    let cb = design_codebook(&cfg).map_err(|e| e.to_string())?;
    let plan = ExperimentPlan::from_config(ExperimentKind::Snapshots, &cfg);
    let table = run_experiment(&plan, &cfg, &cb).map_err(|e| e.to_string())?.table;
    let n = cfg.plan.sweep.len();
    let mut counts = Vec::new();
    for p in 0..n {
        let mut ts = Vec::new();
        for s in 1..=4 {
            let r = table.get(p, &format!("calibrated-T-s{s}")).unwrap();
            ensure(r.status == "ok", || format!("stage {s} infeasible at point {p}"))?;
            ts.push(r.value as usize);
        }
        counts.push(ts);
    }
    let shown = format!("T per point (5..30 dB nominal SNR): {counts:?}");
    for (p, ts) in counts.iter().enumerate() {
        ensure(ts[0] >= ts[1] && ts[1] >= ts[2], || format!("T1 >= T2 >= T3 broken at point {p}; {shown}"))?;
    }
    for w in counts.windows(2) {
        ensure(w[1].iter().zip(&w[0]).all(|(a, b)| a <= b), || format!("T rose with power; {shown}"))?;
    }
    ensure(counts[n - 1][2..].iter().all(|&t| t == 1), || format!("stages >= 3 not at T = 1 at top power; {shown}"))?;
    Ok(shown)
}

fn se_ordering() -> Outcome {
    let cfg = Config::from_toml_str(
        "[experiment]\nse_trials = 2000\nse_stages = [1, 5]\nse_sweep_axis = \"ris-snr\"\nse_sweep = [0.0, 7.5, 15.0, 22.5, 30.0]\n",
        "table1",
    )
    .unwrap();
    let cb = design_codebook(&cfg).map_err(|e| e.to_string())?;
    let plan = ExperimentPlan::from_config(ExperimentKind::Se, &cfg);
    let t = run_experiment(&plan, &cfg, &cb).map_err(|e| e.to_string())?.table;
    let n = plan.sweep.len();
    let se = |p: usize, tag: &str| t.get(p, &format!("se-{tag}")).unwrap().value;
    let mut lines = Vec::new();
    for p in 0..n {
        let v = [se(p, "benchmark"), se(p, "stage-1"), se(p, "stage-5"), se(p, "no-ris")];
        lines.push(format!("[{:.2} {:.2} {:.2} {:.2}]", v[0], v[1], v[2], v[3]));
        ensure(v.windows(2).all(|w| w[0] >= w[1]), || format!("ordering broken at point {p}: {v:?}"))?;
        ensure(v[0] - v[1] <= 1.0, || format!("stage-1 {:.3} bits below benchmark at point {p}", v[0] - v[1]))?;
    }
    let top = n - 1;
    let gap = se(top, "stage-5") - se(top, "no-ris");
    ensure(gap >= 2.0, || format!("no-RIS only {gap:.3} bits below the weakest RIS case at the top point"))?;
    Ok(format!("bench/s1/s5/no-RIS: {}; top-point no-RIS gap {gap:.2}", lines.join(" ")))
}

fn codebook_quality() -> Outcome {
    let sc = scene(32, 32);
    let cb = build_codebook(&sc, &[4, 8, 16, 16, 16], &SolverParams::default()).map_err(|e| e.to_string())?;
    let gates = QualityGates::default();
    let mut failures = Vec::new();
    let mut beams = 0;
    for st in &cb.stages {
        for axis in [Axis::X, Axis::Y] {
            for i in 1..=st.axis_beams(axis).len() {
                beams += 1;
                let q = beam_quality(&cb, st.stage, axis, i).map_err(|e| e.to_string())?;
                if !q.passes(&gates) {
                    failures.push(format!("s{} {axis:?}{i}: on {:.2} off {:.2}", st.stage, q.on_mean, q.off_mean));
                }
            }
        }
    }
    let widths: Vec<f64> = (1..=3).map(|s| stage_half_power_width(&cb, s, 20_001)).collect();
    ensure(failures.is_empty(), || format!("{} of {beams} beams fail the gates: {}", failures.len(), failures.join("; ")))?;
    ensure(widths[0] > widths[1] && widths[1] > widths[2], || format!("half-power widths not decreasing: {widths:?}"))?;
    Ok(format!("{beams} axis beams pass; half-power widths s1..s3 {:.4} {:.4} {:.4}", widths[0], widths[1], widths[2]))
}

fn snapshot_rule_check() -> Outcome {
    let delta = 0.05;
    let kappa = rule_kappa(delta);
    ensure((kappa - 1.9333).abs() <= 1e-4, || format!("kappa = {kappa}"))?;
    let sc = Scene64::from_config(&ScenarioConfig::reference()).unwrap();
    let (nb, br, rt, s2) = (sc.n_b, sc.eta_br, sc.eta_rt, sc.sigma_b2);
    let lit = snapshot_rule_literal(delta, sc.p_r, 4, nb, br, rt, s2).map_err(|e| e.to_string())?;
    ensure(lit.product < 0.0 && !lit.physical && lit.snapshots.is_none(), || format!("literal product {lit:?} not flagged"))?;
    let m8 = snapshot_rule(delta, 1.0, 8, nb, br, rt, s2, RuleVariant::Magnitude).map_err(|e| e.to_string())?;
    let p_r = m8.product / 1000.0;
    let t8 = snapshot_rule(delta, p_r, 8, nb, br, rt, s2, RuleVariant::Magnitude).unwrap().snapshots.unwrap();
    let t4 = snapshot_rule(delta, p_r, 4, nb, br, rt, s2, RuleVariant::Magnitude).unwrap().snapshots.unwrap();
    // each count is a ceiling, so the ratio is exact up to that rounding
    ensure(t8 > 0.0 && (t4 - 256.0 * t8).abs() <= 256.0, || format!("T(4) = {t4}, T(8) = {t8}"))?;
    ensure((t4 / t8).round() == 256.0, || format!("T(4)/T(8) = {}", t4 / t8))?;
    Ok(format!("kappa {kappa:.6}, literal product {:.3e} flagged, T(4)/T(8) = {t4}/{t8}", lit.product))
}

fn csv_bytes(t: &ResultTable) -> Vec<u8> {
    let mut buf = Vec::new();
    write_results(t, &mut buf).expect("in-memory write");
    buf
}

fn determinism(first: &ResultTable) -> Outcome {
    let a = csv_bytes(first);
    let b = csv_bytes(&stagewise_run()?);
    ensure(a == b, || "two runs with the same seed differ".into())?;
    let threads = if rayon::current_num_threads() == 1 { 2 } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let c = csv_bytes(&pool.install(stagewise_run)?);
    ensure(a == c, || format!("{threads}-thread run differs"))?;
    Ok(format!(
        "{} bytes identical across reruns and {} vs {threads} threads",
        a.len(),
        rayon::current_num_threads()
    ))
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {id} [{name}]: {tag} ({secs:.1} s) {detail}");
    outcome.is_ok()
}

fn main() {
    // honour `cargo test -- <filter>` loosely: any argument selects by number
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |id: usize| wanted.is_empty() || wanted.contains(&id);
    let mut ok = true;
    if run(1) {
        ok &= report(1, "analytic identities", analytic_identities);
    }
    if run(2) {
        ok &= report(2, "noiseless oracle localization", noiseless_oracle);
    }
    if run(3) {
        ok &= report(3, "transmission counts", transmission_counts);
    }
    if run(4) || run(9) {
        let start = Instant::now();
        let table = stagewise_run();
        let setup = start.elapsed().as_secs_f64();
        if run(4) {
            ok &= report(4, "stagewise error control", || {
                table.as_ref().map_err(Clone::clone).and_then(stagewise_error).map(|d| format!("{d} [run {setup:.1} s]"))
            });
        }
        if run(5) {
            ok &= report(5, "snapshot monotonicity", snapshot_monotonicity);
        }
        if run(9) {
            ok &= report(9, "determinism", || table.as_ref().map_err(Clone::clone).and_then(determinism));
        }
    } else if run(5) {
        ok &= report(5, "snapshot monotonicity", snapshot_monotonicity);
    }
    if run(6) {
        ok &= report(6, "SE ordering", se_ordering);
    }
    if run(7) {
        ok &= report(7, "codebook design quality", codebook_quality);
    }
    if run(8) {
        ok &= report(8, "snapshot rule evaluation", snapshot_rule_check);
    }
    if !ok {
        println!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
