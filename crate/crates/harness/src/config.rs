//! TOML configuration: scenario, power, codebook design and experiment plan.
//!
//! Every section and key is optional; omitted values fall back to the
//! reference scenario (see `configs/table1.toml`, which spells them all out).
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use ris_jrc::channels::{PathlossModel, PowerSplit, ScenarioConfig};
use ris_jrc::codebook::{MaskTarget, MaskWeighting, QualityGates, SolverParams};
use ris_jrc::geometry::{AngleDeg, DirectionCosine};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The shipped reference configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/table1.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {origin}")]
    Parse {
        origin: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub n_b: usize,
    pub n_u: usize,
    pub n_ris: usize,
    pub grid_size: usize,
    pub ris_spacing: f64,
    pub theta_r_deg: f64,
    pub theta_u_deg: f64,
    pub zeta_b_deg: f64,
    pub zeta_r_deg: f64,
    pub v_b: [f64; 2],
    pub v_u: [f64; 2],
    pub v_t: [f64; 2],
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
    /// "literal" or "standard".
    pub pathloss_model: String,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let r = ScenarioConfig::reference();
        Self {
            n_b: r.n_b,
            n_u: r.n_u,
            n_ris: r.n_ris,
            grid_size: r.grid_size,
            ris_spacing: r.ris_spacing,
            theta_r_deg: r.theta_r.degrees(),
            theta_u_deg: r.theta_u.degrees(),
            zeta_b_deg: r.zeta_b.degrees(),
            zeta_r_deg: r.zeta_r.degrees(),
            v_b: [r.v_b.vx, r.v_b.vy],
            v_u: [r.v_u.vx, r.v_u.vy],
            v_t: [r.v_t.vx, r.v_t.vy],
            d_bu: r.d_bu,
            d_br: r.d_br,
            d_ru: r.d_ru,
            d_rt: r.d_rt,
            alpha_bu: r.alpha_bu,
            alpha_br: r.alpha_br,
            alpha_ru: r.alpha_ru,
            alpha_rt: r.alpha_rt,
            sigma_b2_dbm: r.sigma_b2_dbm,
            sigma_u2_dbm: r.sigma_u2_dbm,
            eta0_db: r.eta0_db,
            pathloss_model: "literal".into(),
        }
    }
}

/// Power levels in `unit` ("dbm" or "db", i.e. dBW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    pub unit: String,
    pub total: f64,
    /// Optional explicit split; when given, both must be present and sum to `total`.
    pub p_r: Option<f64>,
    pub p_u: Option<f64>,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            unit: "dbm".into(),
            total: 6.0,
            p_r: None,
            p_u: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookSection {
    pub sensing_lengths: Vec<usize>,
    pub step_scale: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// "magnitude" or "complex".
    pub mask: String,
    /// "balanced" or "uniform".
    pub weighting: String,
    pub init_perturbation: f64,
    pub init_seed: u64,
    pub residual_ceiling: f64,
    pub gate_on: f64,
    pub gate_off: f64,
}

impl Default for CodebookSection {
    fn default() -> Self {
        let p = SolverParams::default();
        let g = QualityGates::default();
        Self {
            sensing_lengths: vec![4, 8, 16, 16, 16],
            step_scale: p.step_scale,
            max_iters: p.max_iters,
            tol: p.tol,
            mask: "magnitude".into(),
            weighting: "balanced".into(),
            init_perturbation: p.init_perturbation,
            init_seed: p.init_seed,
            residual_ceiling: p.residual_ceiling,
            gate_on: g.min_on,
            gate_off: g.max_off,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub trials: u64,
    /// "power": values are total power in the power unit.
    /// "radar-snr": nominal stage-1 radar snapshot SNR in dB.
    /// "ris-snr": nominal RIS-stream SNR of the communication benchmark in dB.
    pub sweep_axis: String,
    pub sweep: Vec<f64>,
    pub delta: f64,
    pub t_max: usize,
    /// "calibrated", "manual", "literal-rule" or "magnitude-rule".
    pub snapshot_source: String,
    pub snapshots: Vec<usize>,
    /// Snapshot count for the fixed-T stage-error sweep.
    pub fixed_snapshots: usize,
    /// Stages reported by the stage-error sweep.
    pub stages: Vec<usize>,
    pub se_trials: u64,
    pub se_stages: Vec<usize>,
    /// Sweep of the SE experiment, same conventions as `sweep_axis`/`sweep`.
    pub se_sweep_axis: String,
    pub se_sweep: Vec<f64>,
    pub exhaustive_snapshots: usize,
    /// Resolution of the half-power width and beampattern grids.
    pub pattern_points: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 2024,
            trials: 10_000,
            sweep_axis: "radar-snr".into(),
            sweep: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            delta: 0.05,
            t_max: 1024,
            snapshot_source: "calibrated".into(),
            snapshots: vec![36, 1, 1, 1, 1],
            fixed_snapshots: 1,
            stages: vec![1, 2],
            se_trials: 2000,
            se_stages: vec![1, 5],
            se_sweep_axis: "ris-snr".into(),
            se_sweep: vec![0.0, 7.5, 15.0, 22.5, 30.0],
            exhaustive_snapshots: 1,
            pattern_points: 2001,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub scenario: ScenarioSection,
    pub power: PowerSection,
    pub codebook: CodebookSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerUnit {
    Dbm,
    Db,
}

impl PowerUnit {
    pub fn to_watts(self, level: f64) -> f64 {
        match self {
            PowerUnit::Dbm => 10f64.powf((level - 30.0) / 10.0),
            PowerUnit::Db => 10f64.powf(level / 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Power,
    RadarSnr,
    RisSnr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotSource {
    Calibrated,
    Manual,
    LiteralRule,
    MagnitudeRule,
}

/// Validated experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSettings {
    pub seed: u64,
    pub trials: u64,
    pub sweep_axis: SweepAxis,
    pub sweep: Vec<f64>,
    pub delta: f64,
    pub t_max: usize,
    pub snapshot_source: SnapshotSource,
    pub snapshots: Vec<usize>,
    pub fixed_snapshots: usize,
    pub stages: Vec<usize>,
    pub se_trials: u64,
    pub se_stages: Vec<usize>,
    pub se_sweep_axis: SweepAxis,
    pub se_sweep: Vec<f64>,
    pub exhaustive_snapshots: usize,
    pub pattern_points: usize,
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub raw: RawConfig,
    pub scenario: ScenarioConfig,
    pub power_unit: PowerUnit,
    pub sensing_lengths: Vec<usize>,
    pub solver: SolverParams,
    pub gates: QualityGates,
    pub plan: PlanSettings,
}

impl Config {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            source: Box::new(e),
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn shipped_default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG, "configs/table1.toml").expect("shipped config is valid")
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let scenario = build_scenario(&raw)?;
        let power_unit = match raw.power.unit.as_str() {
            "dbm" => PowerUnit::Dbm,
            "db" => PowerUnit::Db,
            other => return Err(bad("power.unit", format!("expected \"dbm\" or \"db\", got {other:?}"))),
        };
        let c = &raw.codebook;
        let n_stages = scenario.n_stages();
        if c.sensing_lengths.len() != n_stages {
            return Err(bad(
                "codebook.sensing_lengths",
                format!("needs {n_stages} entries (log2 grid_size), got {}", c.sensing_lengths.len()),
            ));
        }
        if c.sensing_lengths.iter().any(|&l| l == 0 || l > scenario.n_axis()) {
            return Err(bad("codebook.sensing_lengths", format!("entries must lie in 1..={}", scenario.n_axis())));
        }
        if c.sensing_lengths.windows(2).any(|w| w[0] > w[1]) {
            return Err(bad("codebook.sensing_lengths", "must be non-decreasing"));
        }
        let solver = SolverParams {
            step_scale: c.step_scale,
            max_iters: c.max_iters,
            tol: c.tol,
            mask: match c.mask.as_str() {
                "magnitude" => MaskTarget::Magnitude,
                "complex" => MaskTarget::Complex,
                other => return Err(bad("codebook.mask", format!("expected \"magnitude\" or \"complex\", got {other:?}"))),
            },
            weighting: match c.weighting.as_str() {
                "balanced" => MaskWeighting::Balanced,
                "uniform" => MaskWeighting::Uniform,
                other => {
                    return Err(bad("codebook.weighting", format!("expected \"balanced\" or \"uniform\", got {other:?}")))
                }
            },
            init_perturbation: c.init_perturbation,
            init_seed: c.init_seed,
            residual_ceiling: c.residual_ceiling,
        };
        solver.validate().map_err(|e| bad("codebook", e.to_string()))?;
        let gates = QualityGates {
            min_on: c.gate_on,
            max_off: c.gate_off,
        };
        let plan = build_plan(&raw.experiment, n_stages)?;
        let sensing_lengths = c.sensing_lengths.clone();
        Ok(Self {
            scenario,
            power_unit,
            sensing_lengths,
            solver,
            gates,
            plan,
            raw,
        })
    }

    /// Hex SHA-256 of the normalized configuration (first 16 hex digits).
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(&self.raw).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn build_scenario(raw: &RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let s = &raw.scenario;
    let angle = |field: &str, v: f64| AngleDeg::new(v).map_err(|e| bad(field, e.to_string()));
    let cosine =
        |field: &str, v: [f64; 2]| DirectionCosine::new(v[0], v[1]).map_err(|e| bad(field, e.to_string()));
    let unit = match raw.power.unit.as_str() {
        "db" => PowerUnit::Db,
        _ => PowerUnit::Dbm,
    };
    let total_w = unit.to_watts(raw.power.total);
    let power = match (raw.power.p_r, raw.power.p_u) {
        (None, None) => PowerSplit::equal(total_w),
        (Some(r), Some(u)) => {
            let split = PowerSplit {
                total_w,
                p_r_w: unit.to_watts(r),
                p_u_w: unit.to_watts(u),
            };
            let sum = split.p_r_w + split.p_u_w;
            if (sum - total_w).abs() > 1e-6 * total_w {
                return Err(bad(
                    "power.p_r",
                    format!("p_r + p_u = {sum:e} W differs from total {total_w:e} W"),
                ));
            }
            PowerSplit { total_w: sum, ..split }
        }
        _ => return Err(bad("power.p_r", "give both p_r and p_u, or neither")),
    };
    let cfg = ScenarioConfig {
        n_b: s.n_b,
        n_u: s.n_u,
        n_ris: s.n_ris,
        grid_size: s.grid_size,
        ris_spacing: s.ris_spacing,
        theta_r: angle("scenario.theta_r_deg", s.theta_r_deg)?,
        theta_u: angle("scenario.theta_u_deg", s.theta_u_deg)?,
        zeta_b: angle("scenario.zeta_b_deg", s.zeta_b_deg)?,
        zeta_r: angle("scenario.zeta_r_deg", s.zeta_r_deg)?,
        v_b: cosine("scenario.v_b", s.v_b)?,
        v_u: cosine("scenario.v_u", s.v_u)?,
        v_t: cosine("scenario.v_t", s.v_t)?,
        d_bu: s.d_bu,
        d_br: s.d_br,
        d_ru: s.d_ru,
        d_rt: s.d_rt,
        alpha_bu: s.alpha_bu,
        alpha_br: s.alpha_br,
        alpha_ru: s.alpha_ru,
        alpha_rt: s.alpha_rt,
        sigma_b2_dbm: s.sigma_b2_dbm,
        sigma_u2_dbm: s.sigma_u2_dbm,
        eta0_db: s.eta0_db,
        pathloss_model: match s.pathloss_model.as_str() {
            "literal" => PathlossModel::Literal,
            "standard" => PathlossModel::Standard,
            other => {
                return Err(bad(
                    "scenario.pathloss_model",
                    format!("expected \"literal\" or \"standard\", got {other:?}"),
                ))
            }
        },
        power,
    };
    cfg.validate().map_err(|e| bad("scenario", e.to_string()))?;
    Ok(cfg)
}

fn build_plan(e: &ExperimentSection, n_stages: usize) -> Result<PlanSettings, ConfigError> {
    if e.trials == 0 {
        return Err(bad("experiment.trials", "must be at least 1"));
    }
    if e.se_trials == 0 {
        return Err(bad("experiment.se_trials", "must be at least 1"));
    }
    if e.sweep.is_empty() || e.sweep.iter().any(|p| !p.is_finite()) {
        return Err(bad("experiment.sweep", "needs at least one finite value"));
    }
    if !(e.delta > 0.0 && e.delta < 1.0) {
        return Err(bad("experiment.delta", "must lie in (0, 1)"));
    }
    if e.t_max == 0 || e.fixed_snapshots == 0 || e.exhaustive_snapshots == 0 {
        return Err(bad("experiment", "snapshot counts must be at least 1"));
    }
    let sweep_axis = parse_axis("experiment.sweep_axis", &e.sweep_axis)?;
    let se_sweep_axis = parse_axis("experiment.se_sweep_axis", &e.se_sweep_axis)?;
    if e.se_sweep.is_empty() || e.se_sweep.iter().any(|p| !p.is_finite()) {
        return Err(bad("experiment.se_sweep", "needs at least one finite value"));
    }
    let snapshot_source = match e.snapshot_source.as_str() {
        "calibrated" => SnapshotSource::Calibrated,
        "manual" => SnapshotSource::Manual,
        "literal-rule" => SnapshotSource::LiteralRule,
        "magnitude-rule" => SnapshotSource::MagnitudeRule,
        other => return Err(bad("experiment.snapshot_source", format!("unknown source {other:?}"))),
    };
    if snapshot_source == SnapshotSource::Manual && (e.snapshots.len() != n_stages || e.snapshots.contains(&0)) {
        return Err(bad(
            "experiment.snapshots",
            format!("manual schedule needs {n_stages} positive entries"),
        ));
    }
    for (field, list) in [("experiment.stages", &e.stages), ("experiment.se_stages", &e.se_stages)] {
        if list.iter().any(|&s| s == 0 || s > n_stages) {
            return Err(bad(field, format!("stages must lie in 1..={n_stages}")));
        }
    }
    if e.pattern_points < 2 {
        return Err(bad("experiment.pattern_points", "must be at least 2"));
    }
    Ok(PlanSettings {
        seed: e.seed,
        trials: e.trials,
        sweep_axis,
        sweep: e.sweep.clone(),
        delta: e.delta,
        t_max: e.t_max,
        snapshot_source,
        snapshots: e.snapshots.clone(),
        fixed_snapshots: e.fixed_snapshots,
        stages: e.stages.clone(),
        se_trials: e.se_trials,
        se_stages: e.se_stages.clone(),
        se_sweep_axis,
        se_sweep: e.se_sweep.clone(),
        exhaustive_snapshots: e.exhaustive_snapshots,
        pattern_points: e.pattern_points,
    })
}

fn parse_axis(field: &str, value: &str) -> Result<SweepAxis, ConfigError> {
    match value {
        "power" => Ok(SweepAxis::Power),
        "radar-snr" => Ok(SweepAxis::RadarSnr),
        "ris-snr" => Ok(SweepAxis::RisSnr),
        other => Err(bad(field, format!("expected \"power\", \"radar-snr\" or \"ris-snr\", got {other:?}"))),
    }
}
