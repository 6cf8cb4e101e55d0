//! TOML configuration files and dotted-key overrides.
//!
//! Every section and key is optional; missing values take the defaults of
//! [`SimConfig::default`]. Unknown keys are rejected with their full dotted
//! path. `algorithm.eta` follows `a / sqrt(horizon)` unless pinned, and
//! `algorithm.delta` follows `1 / (4 eta^2)` unless pinned.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use trustfl_core::learner::{default_delta, default_eta};
use trustfl_core::{
    AlgorithmParams, AttackKind, AttackStrategy, ClientId, ComparatorSettings, ConstraintParams, SimConfig,
    TaskParams, TopologyKind, TopologySpec, TrustModel, Variant,
};

use crate::error::{CliError, Result};

/// Name of the configuration dialect, recorded in run manifests.
pub const CONFIG_FORMAT: &str = "toml";

/// Parameters of the bound curves that are not part of the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSettings {
    pub zeta: f64,
    pub beta: f64,
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self { zeta: 0.1, beta: 0.5 }
    }
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    /// Stepsize scale `a` in `eta = a / sqrt(T)`.
    pub a: f64,
    pub bounds: BoundSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            a: 1.0,
            bounds: BoundSettings::default(),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    topology: Option<TopologySection>,
    trust: Option<TrustSection>,
    task: Option<TaskSection>,
    constraint: Option<ConstraintSection>,
    algorithm: Option<AlgorithmSection>,
    attack: Option<AttackSection>,
    run: Option<RunSection>,
    comparator: Option<ComparatorSection>,
    bounds: Option<BoundsSection>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    kind: Option<String>,
    clients: Option<usize>,
    byzantine: Option<usize>,
    byzantine_ids: Option<Vec<usize>>,
    edges: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrustSection {
    mean_honest: Option<f64>,
    mean_byzantine: Option<f64>,
    spread: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskSection {
    dim: Option<usize>,
    drift_rate: Option<f64>,
    heterogeneity: Option<f64>,
    label_noise: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeKappa {
    a: usize,
    b: usize,
    kappa: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSection {
    kappa: Option<f64>,
    edge_kappa: Option<Vec<EdgeKappa>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlgorithmSection {
    horizon: Option<usize>,
    a: Option<f64>,
    eta: Option<f64>,
    delta: Option<f64>,
    radius: Option<f64>,
    clip_received: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackSection {
    kind: Option<String>,
    magnitude: Option<f64>,
    dual: Option<f64>,
    direction: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    variant: Option<String>,
    realizations: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComparatorSection {
    tol: Option<f64>,
    max_iterations: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsSection {
    zeta: Option<f64>,
    beta: Option<f64>,
}

/// Every accepted dotted key.
pub const KNOWN_KEYS: &[&str] = &[
    "topology.kind",
    "topology.clients",
    "topology.byzantine",
    "topology.byzantine_ids",
    "topology.edges",
    "trust.mean_honest",
    "trust.mean_byzantine",
    "trust.spread",
    "task.dim",
    "task.drift_rate",
    "task.heterogeneity",
    "task.label_noise",
    "constraint.kappa",
    "constraint.edge_kappa",
    "algorithm.horizon",
    "algorithm.a",
    "algorithm.eta",
    "algorithm.delta",
    "algorithm.radius",
    "algorithm.clip_received",
    "attack.kind",
    "attack.magnitude",
    "attack.dual",
    "attack.direction",
    "run.variant",
    "run.realizations",
    "run.seed",
    "comparator.tol",
    "comparator.max_iterations",
    "bounds.zeta",
    "bounds.beta",
];

fn check_keys(table: &Table) -> Result<()> {
    for (section, value) in table {
        let Some(inner) = value.as_table() else {
            return Err(CliError::config(section, "expected a table"));
        };
        for key in inner.keys() {
            let dotted = format!("{section}.{key}");
            if !KNOWN_KEYS.contains(&dotted.as_str()) {
                return Err(CliError::config(&dotted, "unknown key"));
            }
        }
    }
    Ok(())
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_owned())),
        Err(_) => Value::String(raw.to_owned()),
    }
}

/// Applies `section.key=value` overrides to a raw table.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(item, "override must look like section.key=value"))?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::config(key, "unknown key"));
        }
        let (section, field) = key.split_once('.').expect("known keys are dotted");
        let entry = table
            .entry(section.to_owned())
            .or_insert_with(|| Value::Table(Table::new()));
        let inner = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(section, "expected a table"))?;
        inner.insert(field.to_owned(), parse_value(raw.trim()));
    }
    Ok(())
}

/// Builds a run config from TOML text plus overrides.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::config("<file>", e.message()))?;
    check_keys(&table)?;
    apply_overrides(&mut table, overrides)?;
    let file: FileConfig = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(&failing_key(&table, &e), e.message()))?;
    resolve(file)
}

/// Finds the key whose value alone fails to deserialize.
fn failing_key(table: &Table, e: &toml::de::Error) -> String {
    for (section, value) in table {
        let Some(inner) = value.as_table() else {
            return section.clone();
        };
        for (key, v) in inner {
            let mut probe = Table::new();
            probe.insert(section.clone(), Value::Table(Table::from_iter([(key.clone(), v.clone())])));
            if probe.try_into::<FileConfig>().is_err() {
                return format!("{section}.{key}");
            }
        }
    }
    e.message().split('`').nth(1).unwrap_or("<file>").to_owned()
}

/// Reads a config file (or the defaults when `path` is `None`) and applies
/// overrides.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Io {
            path: p.to_path_buf(),
            source: e,
        })?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

fn resolve(file: FileConfig) -> Result<RunConfig> {
    let mut rc = RunConfig::default();

    let t = file.topology.unwrap_or_default();
    let clients = t.clients.unwrap_or(rc.sim.topology.clients);
    let kind = match t.kind.as_deref().unwrap_or("complete") {
        "complete" => TopologyKind::Complete,
        "ring" => TopologyKind::Ring,
        "custom" => TopologyKind::Custom(
            t.edges
                .clone()
                .ok_or_else(|| CliError::config("topology.edges", "required for a custom topology"))?
                .into_iter()
                .map(|[a, b]| (a, b))
                .collect(),
        ),
        other => {
            return Err(CliError::config(
                "topology.kind",
                &format!("unknown kind `{other}`, expected complete, ring, or custom"),
            ))
        }
    };
    if t.edges.is_some() && !matches!(kind, TopologyKind::Custom(_)) {
        return Err(CliError::config("topology.edges", "only valid with kind = \"custom\""));
    }
    let byzantine = match (&t.byzantine_ids, t.byzantine) {
        (Some(ids), Some(b)) if ids.len() != b => {
            return Err(CliError::config(
                "topology.byzantine",
                &format!("is {b} but topology.byzantine_ids lists {} clients", ids.len()),
            ))
        }
        (Some(ids), _) => ids.len(),
        (None, Some(b)) => b,
        (None, None) => rc.sim.topology.byzantine,
    };
    rc.sim.topology = TopologySpec {
        kind,
        clients,
        byzantine,
        byzantine_ids: t.byzantine_ids,
    };

    let tr = file.trust.unwrap_or_default();
    let d = TrustModel::default();
    rc.sim.trust = TrustModel {
        mean_honest: tr.mean_honest.unwrap_or(d.mean_honest),
        mean_byzantine: tr.mean_byzantine.unwrap_or(d.mean_byzantine),
        spread: tr.spread.unwrap_or(d.spread),
    };

    let tk = file.task.unwrap_or_default();
    let d = TaskParams::default();
    rc.sim.task = TaskParams {
        dim: tk.dim.unwrap_or(d.dim),
        drift_rate: tk.drift_rate.unwrap_or(d.drift_rate),
        heterogeneity: tk.heterogeneity.unwrap_or(d.heterogeneity),
        label_noise: tk.label_noise.unwrap_or(d.label_noise),
    };

    let c = file.constraint.unwrap_or_default();
    let mut constraint = ConstraintParams::uniform(c.kappa.unwrap_or(ConstraintParams::default().kappa));
    for e in c.edge_kappa.unwrap_or_default() {
        constraint.set_edge_kappa(ClientId(e.a), ClientId(e.b), e.kappa);
    }
    rc.sim.constraint = constraint;

    let al = file.algorithm.unwrap_or_default();
    let horizon = al.horizon.unwrap_or(rc.sim.algorithm.horizon);
    rc.a = al.a.unwrap_or(1.0);
    if !(rc.a > 0.0) || !rc.a.is_finite() {
        return Err(CliError::config("algorithm.a", "must be a positive number"));
    }
    let eta = al.eta.unwrap_or_else(|| default_eta(horizon, rc.a));
    rc.sim.algorithm = AlgorithmParams {
        eta,
        delta: al.delta.unwrap_or_else(|| default_delta(eta)),
        radius: al.radius.unwrap_or(1.0),
        horizon,
        clip_received: al.clip_received.unwrap_or(false),
    };

    let at = file.attack.unwrap_or_default();
    let kind: AttackKind = match at.kind.as_deref() {
        Some(k) => k.parse().map_err(|_| {
            CliError::config(
                "attack.kind",
                &format!(
                    "unknown attack `{k}`, expected one of {}",
                    AttackKind::ALL.map(|k| k.name()).join(", ")
                ),
            )
        })?,
        None => AttackKind::GaussianNoise,
    };
    rc.sim.attack = AttackStrategy {
        kind,
        magnitude: at.magnitude.unwrap_or(10.0 * rc.sim.algorithm.radius),
        dual: at.dual,
        direction: at.direction,
    };

    let run = file.run.unwrap_or_default();
    if let Some(v) = run.variant {
        rc.sim.variant = v.parse().map_err(|_| {
            CliError::config(
                "run.variant",
                &format!(
                    "unknown variant `{v}`, expected one of {}",
                    Variant::ALL.map(|v| v.name()).join(", ")
                ),
            )
        })?;
    }
    rc.sim.realizations = run.realizations.unwrap_or(rc.sim.realizations);
    rc.sim.seed = run.seed.unwrap_or(rc.sim.seed);

    let cmp = file.comparator.unwrap_or_default();
    let d = ComparatorSettings::default();
    rc.sim.comparator = ComparatorSettings {
        tol: cmp.tol.unwrap_or(d.tol),
        max_iterations: cmp.max_iterations.unwrap_or(d.max_iterations),
    };

    let b = file.bounds.unwrap_or_default();
    let d = BoundSettings::default();
    rc.bounds = BoundSettings {
        zeta: b.zeta.unwrap_or(d.zeta),
        beta: b.beta.unwrap_or(d.beta),
    };

    validate(&rc)?;
    Ok(rc)
}

/// Runs the core validation and maps failures to config diagnostics.
pub fn validate(rc: &RunConfig) -> Result<()> {
    rc.sim.validate().map_err(CliError::from_core)?;
    let k = &rc.bounds;
    if !(k.beta > 0.0 && k.beta < 1.0) {
        return Err(CliError::config("bounds.beta", "must lie in (0, 1)"));
    }
    if !(k.zeta > 0.0 && k.zeta < 1.0 / k.beta - 1.0) {
        return Err(CliError::config(
            "bounds.zeta",
            &format!("must lie in (0, {}) for bounds.beta = {}", 1.0 / k.beta - 1.0, k.beta),
        ));
    }
    Ok(())
}

/// Writes every resolved value explicitly, so parsing the output yields
/// the same config.
pub fn emit_config(rc: &RunConfig) -> String {
    let sim = &rc.sim;
    let (kind, edges) = match &sim.topology.kind {
        TopologyKind::Complete => ("complete", None),
        TopologyKind::Ring => ("ring", None),
        TopologyKind::Custom(e) => ("custom", Some(e.iter().map(|&(a, b)| [a, b]).collect())),
    };
    let edge_kappa: Vec<EdgeKappa> = sim
        .constraint
        .edge_overrides()
        .map(|((a, b), kappa)| EdgeKappa { a: a.0, b: b.0, kappa })
        .collect();
    let file = FileConfig {
        topology: Some(TopologySection {
            kind: Some(kind.to_owned()),
            clients: Some(sim.topology.clients),
            byzantine: Some(sim.topology.byzantine),
            byzantine_ids: sim.topology.byzantine_ids.clone(),
            edges,
        }),
        trust: Some(TrustSection {
            mean_honest: Some(sim.trust.mean_honest),
            mean_byzantine: Some(sim.trust.mean_byzantine),
            spread: Some(sim.trust.spread),
        }),
        task: Some(TaskSection {
            dim: Some(sim.task.dim),
            drift_rate: Some(sim.task.drift_rate),
            heterogeneity: Some(sim.task.heterogeneity),
            label_noise: Some(sim.task.label_noise),
        }),
        constraint: Some(ConstraintSection {
            kappa: Some(sim.constraint.kappa),
            edge_kappa: (!edge_kappa.is_empty()).then_some(edge_kappa),
        }),
        algorithm: Some(AlgorithmSection {
            horizon: Some(sim.algorithm.horizon),
            a: Some(rc.a),
            eta: Some(sim.algorithm.eta),
            delta: Some(sim.algorithm.delta),
            radius: Some(sim.algorithm.radius),
            clip_received: Some(sim.algorithm.clip_received),
        }),
        attack: Some(AttackSection {
            kind: Some(sim.attack.kind.name().to_owned()),
            magnitude: Some(sim.attack.magnitude),
            dual: sim.attack.dual,
            direction: sim.attack.direction.clone(),
        }),
        run: Some(RunSection {
            variant: Some(sim.variant.name().to_owned()),
            realizations: Some(sim.realizations),
            seed: Some(sim.seed),
        }),
        comparator: Some(ComparatorSection {
            tol: Some(sim.comparator.tol),
            max_iterations: Some(sim.comparator.max_iterations),
        }),
        bounds: Some(BoundsSection {
            zeta: Some(rc.bounds.zeta),
            beta: Some(rc.bounds.beta),
        }),
    };
    toml::to_string(&file).expect("config sections always serialize")
}

/// Overrides implied by the dedicated command-line flags.
pub fn flag_overrides(
    seed: Option<u64>,
    realizations: Option<usize>,
    variant: Option<&str>,
    attack: Option<&str>,
) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(s) = seed {
        out.push(format!("run.seed={s}"));
    }
    if let Some(r) = realizations {
        out.push(format!("run.realizations={r}"));
    }
    if let Some(v) = variant {
        out.push(format!("run.variant=\"{v}\""));
    }
    if let Some(a) = attack {
        out.push(format!("attack.kind=\"{a}\""));
    }
    out
}

/// Flat `key -> value` view of a config, for manifests.
pub fn flatten(rc: &RunConfig) -> BTreeMap<String, String> {
    let table: Table = emit_config(rc).parse().expect("emitted config parses");
    let mut out = BTreeMap::new();
    for (section, value) in &table {
        if let Some(inner) = value.as_table() {
            for (k, v) in inner {
                out.insert(format!("{section}.{k}"), v.to_string());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let rc = parse_config_str("", &[]).unwrap();
        assert_eq!(rc, RunConfig::default());
        assert_eq!(rc.sim.topology.clients, 45);
        assert_eq!(rc.sim.topology.byzantine, 30);
        assert_eq!(rc.sim.realizations, 50);
        assert!((rc.sim.algorithm.eta - 1.0 / 1000f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn horizon_override_recomputes_eta() {
        let rc = parse_config_str("", &["algorithm.horizon=100".into()]).unwrap();
        assert!((rc.sim.algorithm.eta - 0.1).abs() < 1e-15);
        assert!((rc.sim.algorithm.delta - 25.0).abs() < 1e-9);
        let pinned = parse_config_str("[algorithm]\neta = 0.3\n", &["algorithm.horizon=100".into()]).unwrap();
        assert_eq!(pinned.sim.algorithm.eta, 0.3);
    }

    #[test]
    fn rejects_all_byzantine() {
        let err = parse_config_str("[topology]\nclients = 45\nbyzantine = 45\n", &[]).unwrap_err();
        assert!(err.to_string().contains("topology"), "{err}");
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config_str("[task]\ndimension = 3\n", &[]).unwrap_err();
        assert!(err.to_string().contains("task.dimension"), "{err}");
        let err = parse_config_str("", &["trust.mean=0.6".into()]).unwrap_err();
        assert!(err.to_string().contains("trust.mean"), "{err}");
        let err = parse_config_str("[extra]\nx = 1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn out_of_range_values_are_named() {
        let err = parse_config_str("[trust]\nspread = 1.5\n", &[]).unwrap_err();
        assert!(err.to_string().contains("trust"), "{err}");
        let err = parse_config_str("[bounds]\nzeta = 1.5\n", &[]).unwrap_err();
        assert!(err.to_string().contains("bounds.zeta"), "{err}");
        let err = parse_config_str("[task]\ndim = \"five\"\n", &[]).unwrap_err();
        assert!(err.to_string().contains("dim"), "{err}");
    }

    #[test]
    fn round_trip() {
        let text = r#"
[topology]
kind = "custom"
clients = 5
byzantine_ids = [0, 3]
edges = [[0, 1], [1, 2], [2, 3], [3, 4], [4, 0], [1, 4]]

[constraint]
kappa = 0.4
edge_kappa = [{ a = 1, b = 2, kappa = 0.25 }]

[attack]
kind = "fixed-vector"
magnitude = 2.5
direction = [1.0, 0.0, 0.0, 0.0, 0.0]

[run]
variant = "oracle-filter"
seed = 99
"#;
        let rc = parse_config_str(text, &["algorithm.horizon=37".into()]).unwrap();
        let again = parse_config_str(&emit_config(&rc), &[]).unwrap();
        assert_eq!(rc, again);
        let d = RunConfig::default();
        assert_eq!(parse_config_str(&emit_config(&d), &[]).unwrap(), d);
    }
}
