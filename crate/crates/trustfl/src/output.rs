//! Run artifacts: manifest, per-round CSV, JSON summary, and plots.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use trustfl_core::engine::{EmpiricalConstants, ExperimentResult};
use trustfl_core::oracle::{regret_bound, violation_bound};
use trustfl_core::topology::build_topology;
use trustfl_core::BoundConstants;

use crate::config::{emit_config, RunConfig, CONFIG_FORMAT};
use crate::error::{CliError, Result};
use crate::plot;

pub const CSV_HEADER: [&str; 6] = [
    "round",
    "timeavg_regret",
    "timeavg_violation_mean",
    "timeavg_violation_max",
    "misclass_honest",
    "misclass_byz",
];

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CSV_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REGRET_PLOT: &str = "regret.svg";
pub const VIOLATION_PLOT: &str = "violation.svg";

/// Which artifacts to write besides the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub plot: bool,
}

impl Formats {
    /// Parses a comma-separated list such as `csv,json,plot`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut f = Formats::default();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "csv" => f.csv = true,
                "json" => f.json = true,
                "plot" => f.plot = true,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown format `{other}`, expected csv, json, or plot"
                    )))
                }
            }
        }
        Ok(f)
    }
}

impl std::str::FromStr for Formats {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Formats::parse(s)
    }
}

/// Files written for one run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutputBundle {
    pub manifest: PathBuf,
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub plots: Vec<PathBuf>,
}

impl OutputBundle {
    pub fn files(&self) -> Vec<&Path> {
        let mut v = vec![self.manifest.as_path()];
        v.extend(self.csv.as_deref());
        v.extend(self.summary.as_deref());
        v.extend(self.plots.iter().map(PathBuf::as_path));
        v
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    core_version: &'static str,
    config_format: &'static str,
    command: &'a str,
    seed: u64,
    variant: String,
    realizations: usize,
    horizon: usize,
    config: String,
    files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct FinalMetrics {
    cumulative_regret: f64,
    timeavg_regret: f64,
    cumulative_violation_mean: f64,
    timeavg_violation_mean: f64,
    timeavg_violation_max: f64,
    misclass_honest: f64,
    misclass_byz: f64,
}

#[derive(Debug, Serialize)]
struct RealizationSummary {
    index: u64,
    cumulative_regret: f64,
    cumulative_violation_mean: f64,
    comparator_objective: f64,
    comparator_max_constraint_residual: f64,
    comparator_iterations: usize,
    tf: Option<usize>,
}

#[derive(Debug, Serialize)]
struct TfStats {
    finite: usize,
    realizations: usize,
    min: Option<usize>,
    median: Option<usize>,
    max: Option<usize>,
    mean: Option<f64>,
}

/// Bound curves at the horizon with the constants used to evaluate them.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Constants G, C, B are trajectory estimates, not a-priori bounds.
    pub constants: BoundConstants,
    pub regret_bound: f64,
    pub violation_bound: f64,
    pub measured_cumulative_regret: f64,
    pub measured_cumulative_violation_mean: f64,
    /// Whether the mean cumulative regret stayed below `regret_bound(t)` for
    /// every `t`.
    pub regret_below_bound_every_round: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    variant: String,
    horizon: usize,
    realizations: usize,
    final_metrics: Option<FinalMetrics>,
    empirical_constants: EmpiricalConstants,
    bounds: Option<BoundReport>,
    tf: TfStats,
    per_realization: Vec<RealizationSummary>,
}

/// Evaluates the bound curves with constants estimated from `result`.
///
/// `V` and `m` count honest clients and honest edges.
pub fn bound_report(rc: &RunConfig, result: &ExperimentResult) -> Result<Option<BoundReport>> {
    let horizon = result.horizon;
    if horizon == 0 {
        return Ok(None);
    }
    let g = build_topology(&rc.sim.topology).map_err(CliError::from_core)?;
    let k = BoundConstants {
        a: rc.a,
        zeta: rc.bounds.zeta,
        beta: rc.bounds.beta,
        edges: g.honest_edges().len() as f64,
        c: result.constants.c,
        g: result.constants.g,
        b: result.constants.b,
        radius: rc.sim.algorithm.radius,
        clients: g.honest().len() as f64,
    };
    let mut below = true;
    for (i, &r) in result.mean.cumulative_regret.iter().enumerate() {
        if r > regret_bound(&k, i + 1)? {
            below = false;
            break;
        }
    }
    Ok(Some(BoundReport {
        constants: k,
        regret_bound: regret_bound(&k, horizon)?,
        violation_bound: violation_bound(&k, horizon)?,
        measured_cumulative_regret: result.mean.cumulative_regret[horizon - 1],
        measured_cumulative_violation_mean: result.mean.cumulative_violation_mean[horizon - 1],
        regret_below_bound_every_round: below,
    }))
}

fn tf_stats(result: &ExperimentResult) -> TfStats {
    let mut finite: Vec<usize> = result.tf_values().into_iter().flatten().collect();
    finite.sort_unstable();
    let n = finite.len();
    TfStats {
        finite: n,
        realizations: result.realizations.len(),
        min: finite.first().copied(),
        median: (n > 0).then(|| finite[n / 2]),
        max: finite.last().copied(),
        mean: (n > 0).then(|| finite.iter().sum::<usize>() as f64 / n as f64),
    }
}

fn summary(rc: &RunConfig, result: &ExperimentResult) -> Result<Summary> {
    let m = &result.mean;
    let final_metrics = (result.horizon > 0).then(|| {
        let t = result.horizon - 1;
        FinalMetrics {
            cumulative_regret: m.cumulative_regret[t],
            timeavg_regret: m.timeavg_regret[t],
            cumulative_violation_mean: m.cumulative_violation_mean[t],
            timeavg_violation_mean: m.timeavg_violation_mean[t],
            timeavg_violation_max: m.timeavg_violation_max[t],
            misclass_honest: m.misclass_honest[t],
            misclass_byz: m.misclass_byz[t],
        }
    });
    Ok(Summary {
        variant: result.variant.name().to_owned(),
        horizon: result.horizon,
        realizations: result.realizations.len(),
        final_metrics,
        empirical_constants: result.constants,
        bounds: bound_report(rc, result)?,
        tf: tf_stats(result),
        per_realization: result
            .realizations
            .iter()
            .map(|r| RealizationSummary {
                index: r.index,
                cumulative_regret: r.series.cumulative_regret.last().copied().unwrap_or(0.0),
                cumulative_violation_mean: r.series.cumulative_violation_mean.last().copied().unwrap_or(0.0),
                comparator_objective: r.comparator.achieved_objective,
                comparator_max_constraint_residual: r.comparator.max_constraint_residual,
                comparator_iterations: r.comparator.iterations,
                tf: r.tf,
            })
            .collect(),
    })
}

/// Formats a value with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the per-round CSV of realization-averaged series.
pub fn write_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    let m = &result.mean;
    for t in 0..result.horizon {
        w.write_record([
            (t + 1).to_string(),
            fmt17(m.timeavg_regret[t]),
            fmt17(m.timeavg_violation_mean[t]),
            fmt17(m.timeavg_violation_max[t]),
            fmt17(m.misclass_honest[t]),
            fmt17(m.misclass_byz[t]),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Fails unless `dir` exists (or can be created) and accepts new files.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    let unwritable = |reason: String| CliError::Unwritable {
        path: dir.to_path_buf(),
        reason,
    };
    fs::create_dir_all(dir).map_err(|e| unwritable(e.to_string()))?;
    let probe = dir.join(".trustfl-write-probe");
    let mut f = fs::File::create(&probe).map_err(|e| unwritable(e.to_string()))?;
    f.write_all(b"ok").map_err(|e| unwritable(e.to_string()))?;
    drop(f);
    fs::remove_file(&probe).map_err(|e| unwritable(e.to_string()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Writes the manifest plus the requested artifacts for one run.
pub fn emit_outputs(
    rc: &RunConfig,
    result: &ExperimentResult,
    out_dir: &Path,
    formats: Formats,
    command: &str,
) -> Result<OutputBundle> {
    ensure_writable(out_dir)?;
    let mut bundle = OutputBundle {
        manifest: out_dir.join(MANIFEST_FILE),
        ..OutputBundle::default()
    };
    // Plots are drawn from the CSV, so asking for plots implies writing it.
    if formats.csv || formats.plot {
        let p = out_dir.join(CSV_FILE);
        write_csv(&p, result)?;
        bundle.csv = Some(p);
    }
    if formats.json {
        let p = out_dir.join(SUMMARY_FILE);
        write_json(&p, &summary(rc, result)?)?;
        bundle.summary = Some(p);
    }
    if formats.plot {
        let csv = bundle.csv.clone().expect("csv written above");
        let label = result.variant.name();
        let regret = out_dir.join(REGRET_PLOT);
        let violation = out_dir.join(VIOLATION_PLOT);
        plot::plot_from_csv(&[(label, csv.as_path())], plot::Figure::Regret, &regret)?;
        plot::plot_from_csv(&[(label, csv.as_path())], plot::Figure::Violation, &violation)?;
        bundle.plots = vec![regret, violation];
    }
    write_manifest(rc, result, &bundle, command)?;
    Ok(bundle)
}

fn write_manifest(rc: &RunConfig, result: &ExperimentResult, bundle: &OutputBundle, command: &str) -> Result<()> {
    let base = bundle.manifest.parent().unwrap_or(Path::new("."));
    let files = bundle
        .files()
        .iter()
        .map(|p| p.strip_prefix(base).unwrap_or(p).display().to_string())
        .collect();
    let manifest = Manifest {
        software: "trustfl",
        version: env!("CARGO_PKG_VERSION"),
        core_version: trustfl_core::VERSION,
        config_format: CONFIG_FORMAT,
        command,
        seed: rc.sim.seed,
        variant: rc.sim.variant.name().to_owned(),
        realizations: rc.sim.realizations,
        horizon: result.horizon,
        config: emit_config(rc),
        files,
    };
    write_json(&bundle.manifest, &manifest)
}

/// Reads the config echoed in a manifest.
pub fn config_from_manifest(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let cfg = v
        .get("config")
        .and_then(|c| c.as_str())
        .ok_or_else(|| CliError::Usage(format!("{}: no config recorded", path.display())))?;
    crate::config::parse_config_str(cfg, &[])
}

/// Two-variant comparison: `proposed/` and `baseline/` runs plus plots with
/// one curve per variant.
pub fn emit_comparison(
    proposed: (&RunConfig, &ExperimentResult),
    baseline: (&RunConfig, &ExperimentResult),
    out_dir: &Path,
    formats: Formats,
    command: &str,
) -> Result<Vec<OutputBundle>> {
    ensure_writable(out_dir)?;
    let sub = Formats {
        csv: formats.csv || formats.plot,
        json: formats.json,
        plot: false,
    };
    let p = emit_outputs(proposed.0, proposed.1, &out_dir.join("proposed"), sub, command)?;
    let b = emit_outputs(baseline.0, baseline.1, &out_dir.join("baseline"), sub, command)?;
    let mut bundles = vec![p, b];
    if formats.plot {
        let pc = bundles[0].csv.clone().expect("csv written");
        let bc = bundles[1].csv.clone().expect("csv written");
        let series = [("proposed", pc.as_path()), ("OLD baseline", bc.as_path())];
        let regret = out_dir.join(REGRET_PLOT);
        let violation = out_dir.join(VIOLATION_PLOT);
        plot::plot_from_csv(&series, plot::Figure::Regret, &regret)?;
        plot::plot_from_csv(&series, plot::Figure::Violation, &violation)?;
        bundles[0].plots = vec![regret, violation];
    }
    Ok(bundles)
}
