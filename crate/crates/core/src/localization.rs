//! Hierarchical and exhaustive radar beam search over the RIS codebook,
//! the closed-form snapshot rule, and the Monte Carlo snapshot calibrator.
//!
//! Each stage transmits four candidate beams for `T_s` snapshots, matched
//! filters the echo with `b(θ_r)` and the radar symbols, and keeps the beam
//! with the largest `|mean(z)|^2`. Stage 1 scans the four quadrants; stage
//! `s > 1` scans the four children of the previous choice.

use ndarray::{Array1, ArrayView1, ArrayView2};
use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use crate::channels::{
    axis_gain, build_channels, draw_fading, make_transmit_block, radar_receive_factored, ChannelSet, PhaseProfile,
    Scene,
};
use crate::codebook::{pencil_beam, stage_count, Codebook, Grid};
use crate::error::{check_dim, invalid, Result};
use crate::rng::StreamKey;
use crate::scalar::Real;
use crate::stats::{wilson, WilsonInterval, Z95};

/// `|mean_m z_m|^2` with `z = (b^T(θ_r) Y diag(conj(s_r)))^T`.
pub fn beam_statistic<T: Real>(
    y_r: ArrayView2<Complex<T>>,
    s_r: ArrayView1<Complex<T>>,
    b_r: ArrayView1<Complex<T>>,
) -> Result<T> {
    check_dim("beam_statistic: receive rows", b_r.len(), y_r.nrows())?;
    check_dim("beam_statistic: snapshots", s_r.len(), y_r.ncols())?;
    if s_r.is_empty() {
        return Ok(T::zero());
    }
    let z = correlate(y_r, s_r, b_r);
    Ok(mean_power(z.iter().copied()))
}

fn correlate<T: Real>(y_r: ArrayView2<Complex<T>>, s_r: ArrayView1<Complex<T>>, b_r: ArrayView1<Complex<T>>) -> Array1<Complex<T>> {
    Array1::from_shape_fn(y_r.ncols(), |m| {
        let bt_y = b_r.iter().zip(y_r.column(m)).fold(Complex::new(T::zero(), T::zero()), |acc, (b, y)| acc + b * y);
        bt_y * s_r[m].conj()
    })
}

fn mean_power<T: Real>(z: impl ExactSizeIterator<Item = Complex<T>>) -> T {
    let n = T::from_usize_lossy(z.len());
    let sum = z.fold(Complex::new(T::zero(), T::zero()), |a, b| a + b);
    (sum / n).norm_sqr()
}

/// Where a snapshot schedule came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleSource {
    LiteralRule,
    Calibrated,
    Manual,
}

/// Snapshot counts `T_1..T_{N_s}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotSchedule {
    counts: Vec<usize>,
    pub source: ScheduleSource,
}

impl SnapshotSchedule {
    pub fn new(counts: Vec<usize>, source: ScheduleSource) -> Result<Self> {
        if counts.is_empty() || counts.contains(&0) {
            return Err(invalid("snapshot counts must be non-empty and at least 1"));
        }
        Ok(Self { counts, source })
    }

    pub fn manual(counts: &[usize]) -> Result<Self> {
        Self::new(counts.to_vec(), ScheduleSource::Manual)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `T_s`, 1-based.
    pub fn at(&self, s: usize) -> usize {
        self.counts[s - 1]
    }

    /// `sum_s 4 T_s`.
    pub fn total_transmissions(&self) -> usize {
        self.counts.iter().map(|t| 4 * t).sum()
    }
}

/// One stage of a search.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDecision {
    pub stage: usize,
    /// 2-D beam indices scanned, ascending.
    pub candidates: [usize; 4],
    pub statistics: [f64; 4],
    /// Position (1..=4) of the winner within `candidates`.
    pub chosen: usize,
    pub snapshots: usize,
}

impl StageDecision {
    pub fn chosen_beam(&self) -> usize {
        self.candidates[self.chosen - 1]
    }
}

/// Outcome of one localization run. Cells are 1-based `(x, y)` grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub true_cell: (usize, usize),
    pub estimate: (usize, usize),
    pub stages: Vec<StageDecision>,
    pub transmissions: usize,
    pub success: bool,
}

/// Grid cell nearest to `v_t` (exact cell for on-grid targets).
pub fn true_cell<T: Real>(grid: &Grid<T>, scene: &Scene<T>) -> (usize, usize) {
    (grid.nearest(scene.v_t.vx), grid.nearest(scene.v_t.vy))
}

/// The four stage-`s` beams under stage-`(s-1)` beam `parent` (row-major).
/// Stage 1 has no parent and returns `[1, 2, 3, 4]`.
pub fn child_beams(stage: usize, parent: Option<usize>) -> [usize; 4] {
    match parent {
        None => [1, 2, 3, 4],
        Some(k) => {
            let n_prev = 1usize << (stage - 1);
            let (a, b) = ((k - 1) / n_prev + 1, (k - 1) % n_prev + 1);
            let n = n_prev * 2;
            let join = |a: usize, b: usize| (a - 1) * n + b;
            [join(2 * a - 1, 2 * b - 1), join(2 * a - 1, 2 * b), join(2 * a, 2 * b - 1), join(2 * a, 2 * b)]
        }
    }
}

/// Stage-`s` beam whose partition contains `cell`.
pub fn beam_containing(stage: usize, cell: (usize, usize), d: usize) -> usize {
    let width = d >> stage;
    let n = 1usize << stage;
    let (a, b) = ((cell.0 - 1) / width + 1, (cell.1 - 1) / width + 1);
    (a - 1) * n + b
}

/// `[r^H(v_t) diag(w) r(v_b)]^2` for both axes of a profile.
fn squared_responses<T: Real>(scene: &Scene<T>, profile: &PhaseProfile<T>) -> (Complex<T>, Complex<T>) {
    let cx = axis_gain(profile.wx.view(), scene.v_t.vx, scene.v_b.vx, scene.spacing);
    let cy = axis_gain(profile.wy.view(), scene.v_t.vy, scene.v_b.vy, scene.spacing);
    (cx * cx, cy * cy)
}

/// Transmits one beam for `t_s` snapshots and returns its statistic.
pub fn probe_beam<T: Real, R: Rng + ?Sized>(
    scene: &Scene<T>,
    channels: &ChannelSet<T>,
    profile: &PhaseProfile<T>,
    t_s: usize,
    rng: &mut R,
) -> Result<T> {
    let (cx, cy) = squared_responses(scene, profile);
    let block = make_transmit_block(scene, t_s, rng)?;
    let y = radar_receive_factored(scene, &block, cx, cy, channels, scene.sigma_b2, rng);
    beam_statistic(y.view(), block.s_r.view(), scene.b_r.view())
}

/// Lowest-index argmax.
fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Runs the full hierarchical search for the target in `scene`.
pub fn hierarchical_localize<T: Real, R: Rng + ?Sized>(
    scene: &Scene<T>,
    channels: &ChannelSet<T>,
    codebook: &Codebook<T>,
    schedule: &SnapshotSchedule,
    rng: &mut R,
) -> Result<TrialRecord> {
    codebook.check_compatible(scene)?;
    check_dim("hierarchical_localize: schedule length", codebook.n_stages(), schedule.counts().len())?;
    let d = codebook.grid_size();
    let truth = true_cell(&codebook.grid, scene);
    let mut parent = None;
    let mut stages = Vec::with_capacity(codebook.n_stages());
    for st in &codebook.stages {
        let t_s = schedule.at(st.stage);
        let candidates = child_beams(st.stage, parent);
        let mut statistics = [0.0; 4];
        for (slot, &k) in candidates.iter().enumerate() {
            statistics[slot] = probe_beam(scene, channels, &st.beam_profile(k), t_s, rng)?.to_f64_lossy();
        }
        let chosen = argmax(&statistics) + 1;
        parent = Some(candidates[chosen - 1]);
        stages.push(StageDecision {
            stage: st.stage,
            candidates,
            statistics,
            chosen,
            snapshots: t_s,
        });
    }
    let last = codebook.stage(codebook.n_stages());
    let estimate = last.split_index(parent.expect("at least one stage"));
    debug_assert_eq!(last.partitions_per_axis(), d);
    Ok(TrialRecord {
        true_cell: truth,
        estimate,
        success: estimate == truth,
        transmissions: schedule.total_transmissions(),
        stages,
    })
}

/// Scans all `D x D` full-aperture pencil beams, `t_per_beam` snapshots each.
pub fn exhaustive_localize<T: Real, R: Rng + ?Sized>(
    scene: &Scene<T>,
    channels: &ChannelSet<T>,
    rng: &mut R,
    t_per_beam: usize,
) -> Result<TrialRecord> {
    let d = scene.grid_size;
    let grid = Grid::<T>::uniform(d);
    let truth = true_cell(&grid, scene);
    let xs: Vec<_> = grid.points().iter().map(|&v| pencil_beam(scene.v_b.vx, v, scene.n_axis, scene.spacing)).collect();
    let ys: Vec<_> = grid.points().iter().map(|&v| pencil_beam(scene.v_b.vy, v, scene.n_axis, scene.spacing)).collect();
    let mut best = (T::neg_infinity(), (0, 0));
    for (a, wx) in xs.iter().enumerate() {
        for (b, wy) in ys.iter().enumerate() {
            let profile = PhaseProfile {
                wx: wx.clone(),
                wy: wy.clone(),
            };
            let stat = probe_beam(scene, channels, &profile, t_per_beam, rng)?;
            if stat > best.0 {
                best = (stat, (a + 1, b + 1));
            }
        }
    }
    Ok(TrialRecord {
        true_cell: truth,
        estimate: best.1,
        success: best.1 == truth,
        stages: Vec::new(),
        transmissions: exhaustive_transmissions(d, t_per_beam),
    })
}

pub fn exhaustive_transmissions(d: usize, t_per_beam: usize) -> usize {
    d * d * t_per_beam
}

/// Reading of the closed-form snapshot rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleVariant {
    /// `kappa / (1 - kappa)`, negative for every admissible `delta`.
    Literal,
    /// `kappa / (kappa - 1)`.
    Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRule {
    pub kappa: f64,
    /// Signed `kappa`-dependent factor actually used.
    pub factor: f64,
    /// `p_r T_s` in watt-snapshots.
    pub product: f64,
    /// `ceil(product / p_r)` when the product is positive.
    pub snapshots: Option<f64>,
    /// False when the product is not positive.
    pub physical: bool,
}

/// `kappa = 2 (1 - 2 delta / 3)`.
pub fn rule_kappa(delta: f64) -> f64 {
    2.0 * (1.0 - 2.0 * delta / 3.0)
}

/// `p_r T_s = f(kappa) sigma^2 / (N_b^2 L_s^8 eta_br^2 eta_rt^2)`.
#[allow(clippy::too_many_arguments)]
pub fn snapshot_rule(
    delta: f64,
    p_r: f64,
    l_s: usize,
    n_b: usize,
    eta_br: f64,
    eta_rt: f64,
    sigma_b2: f64,
    variant: RuleVariant,
) -> Result<SnapshotRule> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("stage error target {delta} must lie in (0, 1)")));
    }
    if !(p_r > 0.0) || l_s == 0 || n_b == 0 {
        return Err(invalid("snapshot rule needs p_r > 0, L_s >= 1 and N_b >= 1"));
    }
    let kappa = rule_kappa(delta);
    let factor = match variant {
        RuleVariant::Literal => kappa / (1.0 - kappa),
        RuleVariant::Magnitude => kappa / (kappa - 1.0),
    };
    let denom = (n_b as f64).powi(2) * (l_s as f64).powi(8) * eta_br.powi(2) * eta_rt.powi(2);
    let product = factor * sigma_b2 / denom;
    let physical = product > 0.0;
    Ok(SnapshotRule {
        kappa,
        factor,
        product,
        snapshots: physical.then(|| (product / p_r).ceil()),
        physical,
    })
}

/// The rule exactly as stated (literal sign).
#[allow(clippy::too_many_arguments)]
pub fn snapshot_rule_literal(
    delta: f64,
    p_r: f64,
    l_s: usize,
    n_b: usize,
    eta_br: f64,
    eta_rt: f64,
    sigma_b2: f64,
) -> Result<SnapshotRule> {
    snapshot_rule(delta, p_r, l_s, n_b, eta_br, eta_rt, sigma_b2, RuleVariant::Literal)
}

/// Schedule from the closed-form rule for every stage of `sensing_lengths`.
/// Fails for non-physical (non-positive) products.
pub fn rule_schedule<T: Real>(scene: &Scene<T>, sensing_lengths: &[usize], delta: f64, variant: RuleVariant) -> Result<SnapshotSchedule> {
    let mut counts = Vec::with_capacity(sensing_lengths.len());
    for &l_s in sensing_lengths {
        let rule = snapshot_rule(
            delta,
            scene.p_r.to_f64_lossy(),
            l_s,
            scene.n_b,
            scene.eta_br.to_f64_lossy(),
            scene.eta_rt.to_f64_lossy(),
            scene.sigma_b2.to_f64_lossy(),
            variant,
        )?;
        let t = rule
            .snapshots
            .ok_or_else(|| invalid(format!("snapshot rule is non-physical for L_s = {l_s} (product {:e})", rule.product)))?;
        counts.push(t.clamp(1.0, usize::MAX as f64) as usize);
    }
    SnapshotSchedule::new(counts, ScheduleSource::LiteralRule)
}

/// `N_s delta`.
pub fn overall_error_bound(delta: f64, n_s: usize) -> f64 {
    n_s as f64 * delta
}

/// Per-snapshot SNR of the matched-filter statistic for an ideal beam of
/// `l_s` elements per axis with unit small-scale fading:
/// `eta_rt^4 eta_br^4 L_s^8 N_b^2 p_r / sigma_b^2`.
pub fn nominal_snapshot_snr<T: Real>(scene: &Scene<T>, l_s: usize) -> f64 {
    let e = (scene.eta_rt * scene.eta_br).to_f64_lossy();
    let sigma = scene.sigma_b2.to_f64_lossy();
    e.powi(4) * (l_s as f64).powi(8) * (scene.n_b as f64).powi(2) * scene.p_r.to_f64_lossy() / sigma
}

/// `p_r` (watts) at which `nominal_snapshot_snr` equals `snr` (linear).
pub fn radar_power_for_snr<T: Real>(scene: &Scene<T>, l_s: usize, snr: f64) -> f64 {
    let unit = scene.with_powers(T::one(), scene.p_u);
    snr / nominal_snapshot_snr(&unit, l_s)
}

/// Error counts of isolated stage decisions, indexed by `T - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorCurve {
    pub stage: usize,
    pub trials: u64,
    pub errors: Vec<u64>,
}

impl ErrorCurve {
    pub fn max_snapshots(&self) -> usize {
        self.errors.len()
    }

    pub fn rate(&self, t: usize) -> f64 {
        self.errors[t - 1] as f64 / self.trials as f64
    }

    pub fn interval(&self, t: usize) -> WilsonInterval {
        wilson(self.errors[t - 1], self.trials, Z95)
    }
}

/// Single-snapshot shortcut of `make_transmit_block(.., 1, ..)` followed by
/// `radar_receive_factored` and the correlation. Consumes the random stream
/// in the same order, so both paths see the same symbols and noise.
struct EchoConstants<T> {
    /// `sqrt(p_r / N_b) N_b`.
    radar: T,
    /// `sqrt(p_u / N_b) b_r^H b_u`.
    leak: Complex<T>,
    n_b: T,
    noise: bool,
}

impl<T: Real> EchoConstants<T> {
    fn new(scene: &Scene<T>) -> Self {
        let nb = T::from_usize_lossy(scene.n_b);
        let cross = crate::linalg::inner_h(scene.b_r.view(), scene.b_u.view());
        Self {
            radar: (scene.p_r / nb).sqrt() * nb,
            leak: cross * (scene.p_u / nb).sqrt(),
            n_b: nb,
            noise: scene.sigma_b2 > T::zero(),
        }
    }

    fn snapshot_correlation<R: Rng + ?Sized>(&self, scene: &Scene<T>, coef: Complex<T>, rng: &mut R) -> Complex<T> {
        let s_r: Complex<T> = crate::channels::qpsk(rng);
        let s_u: Complex<T> = crate::channels::qpsk(rng);
        let bh_x = s_r * self.radar + s_u * self.leak;
        let mut bt_y = coef * bh_x * self.n_b;
        if self.noise {
            for b in scene.b_r.iter() {
                bt_y += b * crate::scalar::complex_gaussian(rng, scene.sigma_b2);
            }
        }
        bt_y * s_r.conj()
    }
}

/// One isolated decision at `stage` with correct ancestors, evaluated for
/// every `T = 1..=t_hi` on common random numbers: snapshot `m` of candidate
/// `j` comes from stream `(key, 1 + j)` regardless of `T`, and fading from
/// `(key, 0)`. Returns one error flag per `T`.
pub fn isolated_stage_errors<T: Real>(
    scene: &Scene<T>,
    codebook: &Codebook<T>,
    stage: usize,
    t_hi: usize,
    key: &StreamKey,
) -> Result<Vec<bool>> {
    let d = codebook.grid_size();
    let truth = true_cell(&codebook.grid, scene);
    let parent = (stage > 1).then(|| beam_containing(stage - 1, truth, d));
    let correct = beam_containing(stage, truth, d);
    let candidates = child_beams(stage, parent);
    let fading = draw_fading::<T, _>(&mut key.child(0).rng());
    let channels = build_channels(scene, &fading);
    let st = codebook.stage(stage);

    let echo = EchoConstants::new(scene);
    let mut sums: Vec<Vec<_>> = (0..4).map(|_| Vec::with_capacity(t_hi)).collect();
    for (j, &k) in candidates.iter().enumerate() {
        let profile = st.beam_profile(k);
        let (cx, cy) = squared_responses(scene, &profile);
        let g = channels.g_br();
        let coef = channels.gamma * cx * cy * g * g;
        let mut rng = key.child(1 + j as u64).rng();
        let mut acc = Complex::new(T::zero(), T::zero());
        for _ in 0..t_hi {
            acc += echo.snapshot_correlation(scene, coef, &mut rng);
            sums[j].push(acc);
        }
    }
    Ok((0..t_hi)
        .map(|m| {
            // T = m + 1; common 1/T^2 scale does not change the argmax
            let stats: Vec<T> = sums.iter().map(|s| s[m].norm_sqr()).collect();
            candidates[argmax(&stats)] != correct
        })
        .collect())
}

/// Isolated-stage error counts over `trials` Monte Carlo draws, trial `n`
/// using stream `key.child(n)`.
pub fn stage_error_curve<T: Real>(
    scene: &Scene<T>,
    codebook: &Codebook<T>,
    stage: usize,
    t_hi: usize,
    trials: u64,
    key: &StreamKey,
) -> Result<ErrorCurve> {
    codebook.check_compatible(scene)?;
    if stage == 0 || stage > codebook.n_stages() {
        return Err(invalid(format!("stage {stage} outside 1..={}", codebook.n_stages())));
    }
    if t_hi == 0 || trials == 0 {
        return Err(invalid("need at least one snapshot and one trial"));
    }
    let errors = (0..trials)
        .into_par_iter()
        .map(|n| {
            isolated_stage_errors(scene, codebook, stage, t_hi, &key.child(n))
                .map(|flags| flags.into_iter().map(u64::from).collect::<Vec<_>>())
        })
        .try_reduce(|| vec![0u64; t_hi], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            Ok(a)
        })?;
    Ok(ErrorCurve {
        stage,
        trials,
        errors,
    })
}

/// Result of calibrating one stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Calibration {
    Feasible {
        snapshots: usize,
        error: WilsonInterval,
        curve: ErrorCurve,
    },
    Infeasible {
        t_max: usize,
        error_at_t_max: WilsonInterval,
        curve: ErrorCurve,
    },
}

impl Calibration {
    pub fn snapshots(&self) -> Option<usize> {
        match self {
            Self::Feasible { snapshots, .. } => Some(*snapshots),
            Self::Infeasible { .. } => None,
        }
    }

    pub fn curve(&self) -> &ErrorCurve {
        match self {
            Self::Feasible { curve, .. } | Self::Infeasible { curve, .. } => curve,
        }
    }
}

pub const MIN_CALIBRATION_TRIALS: u64 = 1000;

/// Smallest `T_s <= t_max` whose isolated stage error is at most `delta`
/// with 95% confidence (upper Wilson bound). Taking the first `T` whose
/// point estimate crosses `delta` would leave the true error at or just above
/// the target, since the crossing is selected on the same noisy sample. The curve is evaluated on a window that doubles from 16 until a
/// feasible `T` appears or `t_max` is reached; common random numbers keep
/// the windows consistent.
pub fn calibrate_snapshots<T: Real>(
    scene: &Scene<T>,
    codebook: &Codebook<T>,
    stage: usize,
    delta: f64,
    trials: u64,
    t_max: usize,
    key: &StreamKey,
) -> Result<Calibration> {
    if trials < MIN_CALIBRATION_TRIALS {
        return Err(invalid(format!("calibration needs at least {MIN_CALIBRATION_TRIALS} trials, got {trials}")));
    }
    if t_max == 0 {
        return Err(invalid("t_max must be at least 1"));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid(format!("stage error target {delta} must lie in [0, 1)")));
    }
    let mut window = t_max.min(16);
    loop {
        let curve = stage_error_curve(scene, codebook, stage, window, trials, key)?;
        if let Some(m) = curve.errors.iter().position(|&e| wilson(e, trials, Z95).upper() <= delta) {
            let snapshots = m + 1;
            return Ok(Calibration::Feasible {
                snapshots,
                error: curve.interval(snapshots),
                curve,
            });
        }
        if window == t_max {
            return Ok(Calibration::Infeasible {
                t_max,
                error_at_t_max: curve.interval(t_max),
                curve,
            });
        }
        window = (window * 2).min(t_max);
    }
}

/// Calibrates every stage; `None` if any stage is infeasible.
pub fn calibrate_schedule<T: Real>(
    scene: &Scene<T>,
    codebook: &Codebook<T>,
    delta: f64,
    trials: u64,
    t_max: usize,
    key: &StreamKey,
) -> Result<(Vec<Calibration>, Option<SnapshotSchedule>)> {
    let n = stage_count(codebook.grid_size())?;
    let cals = (1..=n)
        .map(|s| calibrate_snapshots(scene, codebook, s, delta, trials, t_max, &key.child(s as u64)))
        .collect::<Result<Vec<_>>>()?;
    let counts: Option<Vec<usize>> = cals.iter().map(Calibration::snapshots).collect();
    let schedule = counts.map(|c| SnapshotSchedule::new(c, ScheduleSource::Calibrated)).transpose()?;
    Ok((cals, schedule))
}

/// Full hierarchical runs; trial `n` draws fading then noise from
/// `key.child(n)`. Output is in trial order.
pub fn run_hierarchical_trials<T: Real>(
    scene: &Scene<T>,
    codebook: &Codebook<T>,
    schedule: &SnapshotSchedule,
    trials: u64,
    key: &StreamKey,
) -> Result<Vec<TrialRecord>> {
    (0..trials)
        .into_par_iter()
        .map(|n| {
            let mut rng = key.child(n).rng();
            let fading = draw_fading::<T, _>(&mut rng);
            let channels = build_channels(scene, &fading);
            hierarchical_localize(scene, &channels, codebook, schedule, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{Fading, ScenarioConfig};
    use ndarray::Array2;

    #[test]
    fn children_follow_row_major_quadrants() {
        assert_eq!(child_beams(2, Some(3)), [9, 10, 13, 14]);
        assert_eq!(child_beams(2, Some(1)), [1, 2, 5, 6]);
        assert_eq!(child_beams(1, None), [1, 2, 3, 4]);
        assert_eq!(child_beams(3, Some(16)), [55, 56, 63, 64]);
        assert_eq!(beam_containing(1, (20, 3), 32), 3);
        assert_eq!(beam_containing(2, (20, 3), 32), 9);
    }

    #[test]
    fn schedule_accounting() {
        let s = SnapshotSchedule::manual(&[36, 1, 1, 1, 1]).unwrap();
        assert_eq!(s.total_transmissions(), 160);
        assert!(SnapshotSchedule::manual(&[1, 0]).is_err());
        assert_eq!(exhaustive_transmissions(32, 1), 1024);
        assert_eq!(exhaustive_transmissions(16, 1), 256);
    }

    #[test]
    fn statistic_of_zero_and_rotation() {
        let b = Array1::from_elem(4, Complex::new(1.0f64, 0.0));
        let s = Array1::from_vec(vec![Complex::new(0.0, 1.0), Complex::new(1.0, 0.0)]);
        let zero = Array2::<Complex<f64>>::zeros((4, 2));
        assert_eq!(beam_statistic(zero.view(), s.view(), b.view()).unwrap(), 0.0);
        let y = Array2::from_shape_fn((4, 2), |(n, m)| Complex::new(n as f64 + 1.0, m as f64 - 0.5) * s[m]);
        let base = beam_statistic(y.view(), s.view(), b.view()).unwrap();
        let rot = Complex::from_polar(1.0, 0.7);
        let s2 = s.mapv(|z| z * rot);
        let y2 = y.mapv(|z| z * rot);
        assert!((beam_statistic(y2.view(), s2.view(), b.view()).unwrap() - base).abs() < 1e-12 * base);
    }

    #[test]
    fn literal_rule_values() {
        let r = snapshot_rule_literal(0.05, 1.0, 4, 64, 1e-3, 1e-3, 1e-14).unwrap();
        assert!((r.kappa - 1.933_333_333).abs() < 1e-9);
        assert!((r.factor + 2.071_428_571).abs() < 1e-9);
        assert!(!r.physical && r.snapshots.is_none());
        let r2 = snapshot_rule_literal(0.05, 1.0, 8, 64, 1e-3, 1e-3, 1e-14).unwrap();
        assert!((r.product / r2.product - 256.0).abs() < 1e-9);
        assert!(snapshot_rule_literal(0.0, 1.0, 4, 64, 1.0, 1.0, 1.0).is_err());
        assert!(snapshot_rule_literal(1.0, 1.0, 4, 64, 1.0, 1.0, 1.0).is_err());
        let m = snapshot_rule(0.05, 1.0, 4, 64, 1e-3, 1e-3, 1e-14, RuleVariant::Magnitude).unwrap();
        assert!(m.physical && m.snapshots.unwrap() >= 1.0);
        assert_eq!(overall_error_bound(0.05, 5), 0.25);
        assert_eq!(overall_error_bound(0.0, 7), 0.0);
    }

    #[test]
    fn noiseless_statistic_matches_closed_form() {
        let cfg = ScenarioConfig {
            n_ris: 256,
            grid_size: 16,
            ..ScenarioConfig::reference()
        };
        let mut scene = Scene::<f64>::from_config(&cfg).unwrap();
        scene.sigma_b2 = 0.0;
        scene.p_u = 0.0;
        let channels = build_channels(&scene, &Fading::unit());
        let profile = PhaseProfile::uniform(16);
        let (cx, cy) = squared_responses(&scene, &profile);
        let mut rng = StreamKey::new(3).rng();
        let stat = probe_beam(&scene, &channels, &profile, 3, &mut rng).unwrap();
        let g = channels.g_br();
        let nb = scene.n_b as f64;
        let expected = (channels.gamma * cx * cy * g * g * nb * (scene.p_r / nb).sqrt() * nb).norm_sqr();
        assert!((stat - expected).abs() <= 1e-9 * expected, "{stat} vs {expected}");
    }

    #[test]
    fn snapshot_shortcut_matches_generic_path() {
        let cfg = ScenarioConfig {
            n_b: 16,
            n_ris: 64,
            grid_size: 8,
            ..ScenarioConfig::reference()
        };
        let scene = Scene::<f64>::from_config(&cfg).unwrap();
        let p = radar_power_for_snr(&scene, 4, 2.0);
        let scene = scene.with_powers(p, p);
        let channels = build_channels(&scene, &draw_fading(&mut StreamKey::new(9).rng()));
        let profile = PhaseProfile::uniform(8);
        let (cx, cy) = squared_responses(&scene, &profile);
        let g = channels.g_br();
        let coef = channels.gamma * cx * cy * g * g;
        let echo = EchoConstants::new(&scene);
        let (mut r1, mut r2) = (StreamKey::new(10).rng(), StreamKey::new(10).rng());
        for _ in 0..20 {
            let fast = echo.snapshot_correlation(&scene, coef, &mut r1);
            let block = make_transmit_block(&scene, 1, &mut r2).unwrap();
            let y = radar_receive_factored(&scene, &block, cx, cy, &channels, scene.sigma_b2, &mut r2);
            let slow = correlate(y.view(), block.s_r.view(), scene.b_r.view())[0];
            assert!((fast - slow).norm() <= 1e-9 * slow.norm(), "{fast} vs {slow}");
        }
    }

    #[test]
    fn nominal_snr_inverts() {
        let scene = Scene::<f64>::from_config(&ScenarioConfig::reference()).unwrap();
        let p = radar_power_for_snr(&scene, 4, 10.0);
        let s2 = scene.with_powers(p, p);
        assert!((nominal_snapshot_snr(&s2, 4) - 10.0).abs() < 1e-9);
    }
}
