use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ris_jrc::channels::{build_channels, draw_fading};
use ris_jrc::codebook::{beampattern, io as cbio, Axis};
use ris_jrc::localization::hierarchical_localize;
use ris_jrc::rng::StreamKey;
use ris_jrc::Codebook64;
use ris_jrc_harness::config::Config;
use ris_jrc_harness::experiment::{
    check_codebook, design_codebook, resolve_points, run_experiment, schedule_at, ExperimentKind, ExperimentPlan, LOCALIZE_STREAM,
};
use ris_jrc_harness::output::{self, fmt_f64};

#[derive(Parser)]
#[command(name = "ris-jrc", version, about = "RIS-assisted joint radar-communication simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; the built-in reference scenario when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per point (overrides the configuration).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Load the codebook from this file instead of designing it.
    #[arg(long, global = true)]
    codebook: Option<PathBuf>,
    /// Worker threads; all available cores by default.
    #[arg(long, global = true)]
    parallel: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Design the hierarchical codebook and write it to --out.
    DesignCodebook {
        /// Also write the design-quality report as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// One hierarchical search with a per-stage trace.
    Localize {
        /// Sweep point to use (0-based).
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Trial index selecting the random stream.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Isolated stage error at a fixed snapshot count over the sweep.
    StageError,
    /// Calibrated snapshot counts over the sweep.
    Calibrate,
    /// End-to-end search error over the sweep.
    OverallError {
        /// Per-trial, per-stage record CSV.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Mean spectral efficiency of each RIS configuration.
    SeSweep,
    /// Hierarchical vs exhaustive transmission counts.
    CountTransmissions,
    /// Axis-beam response magnitudes for plotting.
    Beampattern,
}

fn load_config(c: &Common) -> anyhow::Result<Config> {
    let cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::shipped_default(),
    };
    if c.seed.is_none() && c.trials.is_none() {
        return Ok(cfg);
    }
    let mut raw = cfg.raw;
    if let Some(seed) = c.seed {
        raw.experiment.seed = seed;
    }
    if let Some(trials) = c.trials {
        raw.experiment.trials = trials;
        raw.experiment.se_trials = trials;
    }
    Ok(Config::from_raw(raw)?)
}

fn codebook(c: &Common, cfg: &Config) -> anyhow::Result<Codebook64> {
    match &c.codebook {
        Some(p) => {
            let cb = cbio::load(p).with_context(|| format!("loading codebook {}", p.display()))?;
            check_codebook(cfg, &cb)?;
            Ok(cb)
        }
        None => Ok(design_codebook(cfg)?),
    }
}

/// Opens `--out` or stdout.
fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_table(out: &Option<PathBuf>, table: &output::ResultTable) -> anyhow::Result<()> {
    match out {
        Some(p) => output::emit_csv(table, p)?,
        None => output::write_results(table, std::io::stdout().lock())?,
    }
    Ok(())
}

fn experiment(kind: ExperimentKind, c: &Common, cfg: &Config, records: Option<&Path>) -> anyhow::Result<()> {
    let cb = codebook(c, cfg)?;
    let plan = ExperimentPlan::from_config(kind, cfg);
    let mut out = run_experiment(&plan, cfg, &cb)?;
    match kind {
        ExperimentKind::Se => output::write_se(&mut out.se, plan.seed, &out.table.config_hash, sink(&c.out)?)?,
        _ => write_table(&c.out, &out.table)?,
    }
    if let Some(p) = records {
        output::emit_trials(&mut out.trials, plan.seed, &out.table.config_hash, p)?;
    }
    Ok(())
}

fn localize(c: &Common, cfg: &Config, point: usize, trial: u64) -> anyhow::Result<()> {
    let cb = codebook(c, cfg)?;
    let points = resolve_points(cfg, cfg.plan.sweep_axis, &cfg.plan.sweep)?;
    let Some(pt) = points.get(point) else {
        bail!("point {point} outside the sweep (0..{})", points.len());
    };
    let plan = ExperimentPlan::from_config(ExperimentKind::OverallError, cfg);
    let Some(schedule) = schedule_at(cfg, &plan, &cb, pt)? else {
        bail!("no usable snapshot schedule at point {point}");
    };
    let key = StreamKey::new(cfg.plan.seed).child(LOCALIZE_STREAM).child(point as u64).child(trial);
    let mut rng = key.rng();
    let ch = build_channels(&pt.scene, &draw_fading(&mut rng));
    let rec = hierarchical_localize(&pt.scene, &ch, &cb, &schedule, &mut rng)?;
    let mut w = sink(&c.out)?;
    writeln!(w, "P = {} dBm, schedule {:?}", fmt_f64(pt.p_dbm), schedule.counts())?;
    writeln!(w, "true cell {:?}", rec.true_cell)?;
    for st in &rec.stages {
        let stats: Vec<String> = st.statistics.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(
            w,
            "stage {}: T = {}, beams {:?}, statistics [{}] -> beam {}",
            st.stage,
            st.snapshots,
            st.candidates,
            stats.join(", "),
            st.chosen_beam()
        )?;
    }
    writeln!(
        w,
        "estimate {:?} ({}), {} transmissions",
        rec.estimate,
        if rec.success { "correct" } else { "wrong" },
        rec.transmissions
    )?;
    Ok(())
}

fn beampattern_csv(c: &Common, cfg: &Config) -> anyhow::Result<()> {
    let cb = codebook(c, cfg)?;
    let mut w = csv::Writer::from_writer(sink(&c.out)?);
    w.write_record(["stage", "axis", "beam", "v", "sensing", "full", "config_hash"])?;
    let hash = cfg.hash();
    for p in beampattern(&cb, cfg.plan.pattern_points) {
        let axis = match p.axis {
            Axis::X => "x",
            Axis::Y => "y",
        };
        w.write_record([
            p.stage.to_string(),
            axis.to_string(),
            p.beam.to_string(),
            fmt_f64(p.v),
            fmt_f64(p.sensing),
            fmt_f64(p.full),
            hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn design(c: &Common, cfg: &Config, report: Option<&Path>) -> anyhow::Result<()> {
    let Some(out) = &c.out else {
        bail!("design-codebook needs --out");
    };
    let cb = design_codebook(cfg)?;
    cbio::save(&cb, out).with_context(|| format!("writing {}", out.display()))?;
    for w in &cb.warnings {
        eprintln!(
            "warning: stage {} {:?} beam {} normalized residual {}",
            w.stage, w.axis, w.index, w.normalized_residual
        );
    }
    if let Some(p) = report {
        let plan = ExperimentPlan::from_config(ExperimentKind::CodebookReport, cfg);
        output::emit_csv(&run_experiment(&plan, cfg, &cb)?.table, p)?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let c = &cli.common;
    let cfg = load_config(c)?;
    match cli.command {
        Command::DesignCodebook { report } => design(c, &cfg, report.as_deref()),
        Command::Localize { point, trial } => localize(c, &cfg, point, trial),
        Command::StageError => experiment(ExperimentKind::StageError, c, &cfg, None),
        Command::Calibrate => experiment(ExperimentKind::Snapshots, c, &cfg, None),
        Command::OverallError { records } => experiment(ExperimentKind::OverallError, c, &cfg, records.as_deref()),
        Command::SeSweep => experiment(ExperimentKind::Se, c, &cfg, None),
        Command::CountTransmissions => experiment(ExperimentKind::TransmissionCount, c, &cfg, None),
        Command::Beampattern => beampattern_csv(c, &cfg),
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.common.parallel {
        Some(0) => bail!("--parallel must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            pool.install(|| run(cli))
        }
        None => run(cli),
    }
}
