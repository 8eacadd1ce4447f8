//! Experiment plans and their execution.
//!
//! Random streams follow `master -> experiment id -> point index -> trial`,
//! so every number in a result table is fixed by the configuration and the
//! master seed, whatever the thread count.

use ris_jrc::codebook::{beam_quality, build_codebook, stage_half_power_width, Axis, Codebook};
use ris_jrc::comms::{average_se, radar_power_for_ris_snr, scenario_profile, FadingMode, SeScenario};
use ris_jrc::localization::{
    beam_containing, calibrate_schedule, exhaustive_transmissions, overall_error_bound, radar_power_for_snr,
    rule_schedule, run_hierarchical_trials, Calibration, RuleVariant, SnapshotSchedule, TrialRecord,
    MIN_CALIBRATION_TRIALS,
};
use ris_jrc::rng::StreamKey;
use ris_jrc::stats::{wilson, Z95};
use ris_jrc::{Codebook64, Scene64};

use crate::config::{Config, SnapshotSource, SweepAxis};
use crate::output::{ResultRow, ResultTable, SeRow, TrialRow};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] ris_jrc::Error),
    #[error("{0}")]
    Plan(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    StageError,
    Snapshots,
    OverallError,
    Se,
    TransmissionCount,
    CodebookReport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::StageError => "stage-error",
            Self::Snapshots => "snapshots",
            Self::OverallError => "overall-error",
            Self::Se => "se",
            Self::TransmissionCount => "transmission-count",
            Self::CodebookReport => "codebook-report",
        }
    }

    /// Stream id under the master key. Calibration has its own id so that
    /// every experiment needing a calibrated schedule sees the same one.
    fn stream_id(self) -> u64 {
        match self {
            Self::StageError => 1,
            Self::Snapshots | Self::TransmissionCount => CALIBRATION_STREAM,
            Self::OverallError => 3,
            Self::Se => 4,
            Self::CodebookReport => 6,
        }
    }
}

const CALIBRATION_STREAM: u64 = 2;
/// Stream id of single verbose trials.
pub const LOCALIZE_STREAM: u64 = 5;

/// What to run, over which points.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub axis: SweepAxis,
    pub sweep: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub source: SnapshotSource,
}

impl ExperimentPlan {
    pub fn from_config(kind: ExperimentKind, cfg: &Config) -> Self {
        let p = &cfg.plan;
        let (axis, sweep, trials) = match kind {
            ExperimentKind::Se => (p.se_sweep_axis, p.se_sweep.clone(), p.se_trials),
            _ => (p.sweep_axis, p.sweep.clone(), p.trials),
        };
        Self {
            kind,
            axis,
            sweep,
            trials,
            seed: p.seed,
            source: p.snapshot_source,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(HarnessError::Plan("trials must be at least 1".into()));
        }
        if self.sweep.is_empty() {
            return Err(HarnessError::Plan("power sweep is empty".into()));
        }
        Ok(())
    }

    fn key(&self) -> StreamKey {
        StreamKey::new(self.seed).child(self.kind.stream_id())
    }
}

/// One resolved sweep point.
#[derive(Debug, Clone)]
pub struct PowerPoint {
    pub index: usize,
    /// Sweep value in the axis' own unit.
    pub value: f64,
    pub total_w: f64,
    pub p_dbm: f64,
    pub scene: Scene64,
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Maps sweep values to total powers. SNR axes fix `p_r` and keep the
/// configured radar/communication split.
pub fn resolve_points(cfg: &Config, axis: SweepAxis, sweep: &[f64]) -> Result<Vec<PowerPoint>> {
    let base = Scene64::from_config(&cfg.scenario)?;
    let split = cfg.scenario.power;
    let frac = split.p_r_w / split.total_w;
    sweep
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            let total_w = match axis {
                SweepAxis::Power => cfg.power_unit.to_watts(value),
                SweepAxis::RadarSnr | SweepAxis::RisSnr => {
                    if !(frac > 0.0) {
                        return Err(HarnessError::Plan("SNR sweeps need a non-zero radar power share".into()));
                    }
                    let snr = 10f64.powf(value / 10.0);
                    let p_r = match axis {
                        SweepAxis::RadarSnr => radar_power_for_snr(&base, cfg.sensing_lengths[0], snr),
                        _ => radar_power_for_ris_snr(&base, snr),
                    };
                    p_r / frac
                }
            };
            let scene = Scene64::from_config(&cfg.scenario.with_total_power(total_w))?;
            Ok(PowerPoint {
                index,
                value,
                total_w,
                p_dbm: watts_to_dbm(total_w),
                scene,
            })
        })
        .collect()
}

/// Designs the configured codebook (power does not enter the design).
pub fn design_codebook(cfg: &Config) -> Result<Codebook64> {
    let scene = Scene64::from_config(&cfg.scenario)?;
    Ok(build_codebook(&scene, &cfg.sensing_lengths, &cfg.solver)?)
}

/// Rejects a loaded codebook built for another geometry or schedule.
pub fn check_codebook(cfg: &Config, cb: &Codebook64) -> Result<()> {
    let scene = Scene64::from_config(&cfg.scenario)?;
    cb.check_compatible(&scene)?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    if !close(cb.spacing, scene.spacing) || !close(cb.v_b.0, scene.v_b.vx) || !close(cb.v_b.1, scene.v_b.vy) {
        return Err(HarnessError::Plan("codebook was designed for a different RIS spacing or incident direction".into()));
    }
    if cb.schedule != cfg.sensing_lengths {
        return Err(HarnessError::Plan(format!(
            "codebook sensing lengths {:?} differ from the configured {:?}",
            cb.schedule, cfg.sensing_lengths
        )));
    }
    Ok(())
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub trials: Vec<TrialRow>,
    pub se: Vec<SeRow>,
}

struct Rows<'a> {
    experiment: &'static str,
    point: &'a PowerPoint,
    out: Vec<ResultRow>,
}

impl<'a> Rows<'a> {
    fn new(experiment: &'static str, point: &'a PowerPoint) -> Self {
        Self {
            experiment,
            point,
            out: Vec::new(),
        }
    }

    fn push(&mut self, metric: impl Into<String>, value: f64, ci: f64, trials: u64, status: &str) {
        self.out.push(ResultRow {
            experiment: self.experiment.into(),
            point: self.point.index,
            p_dbm: self.point.p_dbm,
            metric: metric.into(),
            value,
            ci_half_width: ci,
            trials,
            status: status.into(),
        });
    }

    fn rate(&mut self, metric: impl Into<String>, errors: u64, trials: u64) {
        let w = wilson(errors, trials, Z95);
        self.push(metric, w.estimate, w.half_width, trials, "ok");
    }
}

/// How the snapshot schedule at one point was obtained.
enum ScheduleOutcome {
    Ready(SnapshotSchedule),
    /// No usable schedule; `status` names why.
    Unavailable { status: &'static str },
}

fn resolve_schedule(cfg: &Config, plan: &ExperimentPlan, cb: &Codebook64, pt: &PowerPoint, rows: &mut Rows) -> Result<ScheduleOutcome> {
    let p = &cfg.plan;
    let rule = |variant| match rule_schedule(&pt.scene, &cfg.sensing_lengths, p.delta, variant) {
        Ok(s) if s.counts().iter().all(|&t| t <= p.t_max) => Ok(ScheduleOutcome::Ready(s)),
        Ok(_) => Ok(ScheduleOutcome::Unavailable {
            status: "exceeds-t-max",
        }),
        Err(ris_jrc::Error::InvalidInput(_)) => Ok(ScheduleOutcome::Unavailable {
            status: "non-physical",
        }),
        Err(e) => Err(HarnessError::Core(e)),
    };
    match plan.source {
        SnapshotSource::Manual => Ok(ScheduleOutcome::Ready(SnapshotSchedule::manual(&p.snapshots)?)),
        SnapshotSource::LiteralRule => rule(RuleVariant::Literal),
        SnapshotSource::MagnitudeRule => rule(RuleVariant::Magnitude),
        SnapshotSource::Calibrated => {
            let trials = plan.trials.max(MIN_CALIBRATION_TRIALS);
            let key = StreamKey::new(plan.seed).child(CALIBRATION_STREAM).child(pt.index as u64);
            let (cals, schedule) = calibrate_schedule(&pt.scene, cb, p.delta, trials, p.t_max, &key)?;
            for (i, cal) in cals.iter().enumerate() {
                let s = i + 1;
                match cal {
                    Calibration::Feasible { snapshots, error, .. } => {
                        rows.push(format!("calibrated-T-s{s}"), *snapshots as f64, 0.0, trials, "ok");
                        rows.push(format!("calibration-error-s{s}"), error.estimate, error.half_width, trials, "ok");
                    }
                    Calibration::Infeasible { t_max, error_at_t_max, .. } => {
                        rows.push(format!("calibrated-T-s{s}"), *t_max as f64, 0.0, trials, "infeasible");
                        rows.push(
                            format!("calibration-error-s{s}"),
                            error_at_t_max.estimate,
                            error_at_t_max.half_width,
                            trials,
                            "infeasible",
                        );
                    }
                }
            }
            Ok(match schedule {
                Some(s) => ScheduleOutcome::Ready(s),
                None => ScheduleOutcome::Unavailable { status: "infeasible" },
            })
        }
    }
}

/// Snapshot schedule at one point under the plan's source; `None` when the
/// source yields no usable schedule there.
pub fn schedule_at(cfg: &Config, plan: &ExperimentPlan, cb: &Codebook64, pt: &PowerPoint) -> Result<Option<SnapshotSchedule>> {
    let mut rows = Rows::new(plan.kind.name(), pt);
    Ok(match resolve_schedule(cfg, plan, cb, pt, &mut rows)? {
        ScheduleOutcome::Ready(s) => Some(s),
        ScheduleOutcome::Unavailable { .. } => None,
    })
}

/// Per-stage error conditional on all earlier stages being right, plus the
/// overall error.
pub fn conditional_stage_errors(records: &[TrialRecord], d: usize, n_stages: usize) -> (Vec<(u64, u64)>, u64) {
    let mut per_stage = vec![(0u64, 0u64); n_stages];
    for rec in records {
        for st in &rec.stages {
            let (errors, reached) = &mut per_stage[st.stage - 1];
            *reached += 1;
            if st.chosen_beam() != beam_containing(st.stage, rec.true_cell, d) {
                *errors += 1;
                break;
            }
        }
    }
    let overall = records.iter().filter(|r| !r.success).count() as u64;
    (per_stage, overall)
}

fn run_point(cfg: &Config, plan: &ExperimentPlan, cb: &Codebook64, pt: &PowerPoint, out: &mut ExperimentOutput) -> Result<()> {
    let p = &cfg.plan;
    let key = plan.key().child(pt.index as u64);
    let mut rows = Rows::new(plan.kind.name(), pt);
    match plan.kind {
        ExperimentKind::StageError => {
            for &s in &p.stages {
                let curve = ris_jrc::localization::stage_error_curve(
                    &pt.scene,
                    cb,
                    s,
                    p.fixed_snapshots,
                    plan.trials,
                    &key.child(s as u64),
                )?;
                rows.rate(format!("stage-error-s{s}"), curve.errors[p.fixed_snapshots - 1], plan.trials);
            }
        }
        ExperimentKind::Snapshots => {
            let plan = ExperimentPlan {
                source: SnapshotSource::Calibrated,
                ..plan.clone()
            };
            if let ScheduleOutcome::Ready(s) = resolve_schedule(cfg, &plan, cb, pt, &mut rows)? {
                rows.push("total-transmissions", s.total_transmissions() as f64, 0.0, plan.trials, "ok");
            }
        }
        ExperimentKind::TransmissionCount => {
            let exhaustive = exhaustive_transmissions(cb.grid_size(), p.exhaustive_snapshots);
            rows.push("exhaustive-transmissions", exhaustive as f64, 0.0, 0, "ok");
            match resolve_schedule(cfg, plan, cb, pt, &mut rows)? {
                ScheduleOutcome::Ready(s) => {
                    rows.push("hierarchical-transmissions", s.total_transmissions() as f64, 0.0, 0, "ok")
                }
                ScheduleOutcome::Unavailable { status } => rows.push("hierarchical-transmissions", f64::NAN, 0.0, 0, status),
            }
        }
        ExperimentKind::OverallError => {
            let schedule = match resolve_schedule(cfg, plan, cb, pt, &mut rows)? {
                ScheduleOutcome::Ready(s) => s,
                ScheduleOutcome::Unavailable { status } => {
                    rows.push("overall-error", f64::NAN, f64::NAN, 0, status);
                    out.table.extend(rows.out);
                    return Ok(());
                }
            };
            let records = run_hierarchical_trials(&pt.scene, cb, &schedule, plan.trials, &key)?;
            let n_stages = cb.n_stages();
            let (per_stage, overall) = conditional_stage_errors(&records, cb.grid_size(), n_stages);
            for (i, &(errors, reached)) in per_stage.iter().enumerate() {
                let s = i + 1;
                rows.rate(format!("stage-error-s{s}"), errors, reached);
                rows.push(format!("T-s{s}"), schedule.at(s) as f64, 0.0, plan.trials, "ok");
            }
            rows.rate("overall-error", overall, plan.trials);
            rows.push("union-bound", overall_error_bound(p.delta, n_stages), 0.0, plan.trials, "ok");
            rows.push("total-transmissions", schedule.total_transmissions() as f64, 0.0, plan.trials, "ok");
            out.trials.extend(records.into_iter().enumerate().map(|(t, record)| TrialRow {
                point: pt.index,
                p_dbm: pt.p_dbm,
                trial: t as u64,
                record,
            }));
        }
        ExperimentKind::Se => {
            let mut scenarios = vec![SeScenario::Benchmark];
            scenarios.extend(p.se_stages.iter().map(|&s| SeScenario::Stage(s)));
            scenarios.push(SeScenario::NoRis);
            for sc in scenarios {
                let profile = scenario_profile(&pt.scene, cb, sc)?;
                // one key for every scenario: identical fading across them
                let est = average_se(&pt.scene, profile.as_ref(), plan.trials, &key, FadingMode::Rayleigh)?;
                rows.push(format!("se-{}", sc.tag()), est.mean, est.half_width, plan.trials, "ok");
                out.se.push(SeRow {
                    point: pt.index,
                    p_dbm: pt.p_dbm,
                    scenario: sc.tag(),
                    mean_se: est.mean,
                    ci_half_width: est.half_width,
                    trials: plan.trials,
                });
            }
        }
        ExperimentKind::CodebookReport => codebook_rows(cfg, cb, &mut rows)?,
    }
    out.table.extend(rows.out);
    Ok(())
}

fn codebook_rows(cfg: &Config, cb: &Codebook64, rows: &mut Rows) -> Result<()> {
    for st in &cb.stages {
        let s = st.stage;
        let mut failures = 0u64;
        let (mut min_on, mut max_off) = (f64::INFINITY, 0.0f64);
        let mut n = 0u64;
        for axis in [Axis::X, Axis::Y] {
            for i in 1..=st.axis_beams(axis).len() {
                let q = beam_quality(cb, s, axis, i)?;
                let l = st.sensing_len as f64;
                min_on = min_on.min(q.on_mean / l);
                max_off = max_off.max(q.off_mean / l);
                failures += u64::from(!q.passes(&cfg.gates));
                n += 1;
            }
        }
        rows.push(format!("half-power-width-s{s}"), stage_half_power_width(cb, s, cfg.plan.pattern_points), 0.0, 0, "ok");
        rows.push(format!("min-on-fraction-s{s}"), min_on, 0.0, n, "ok");
        rows.push(format!("max-off-fraction-s{s}"), max_off, 0.0, n, "ok");
        let status = if failures == 0 { "ok" } else { "gate-failure" };
        rows.push(format!("gate-failures-s{s}"), failures as f64, 0.0, n, status);
    }
    rows.push("design-warnings", cb.warnings.len() as f64, 0.0, 0, "ok");
    Ok(())
}

/// Runs `plan` against `cb`. The codebook report ignores the sweep and
/// emits a single point at the configured power.
pub fn run_experiment(plan: &ExperimentPlan, cfg: &Config, cb: &Codebook<f64>) -> Result<ExperimentOutput> {
    plan.validate()?;
    check_codebook(cfg, cb)?;
    let mut out = ExperimentOutput {
        table: ResultTable::new(plan.seed, cfg.hash()),
        trials: Vec::new(),
        se: Vec::new(),
    };
    if plan.kind == ExperimentKind::CodebookReport {
        let total_w = cfg.scenario.power.total_w;
        let pt = PowerPoint {
            index: 0,
            value: total_w,
            total_w,
            p_dbm: watts_to_dbm(total_w),
            scene: Scene64::from_config(&cfg.scenario)?,
        };
        run_point(cfg, plan, cb, &pt, &mut out)?;
        return Ok(out);
    }
    // points run in order; trials inside each point are parallel
    for pt in resolve_points(cfg, plan.axis, &plan.sweep)? {
        run_point(cfg, plan, cb, &pt, &mut out)?;
    }
    Ok(out)
}
