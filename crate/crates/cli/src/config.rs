//! JSON run configuration: loading, preset resolution and flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dimesim::{DimeDistributionTable, ModelParams, NetworkParams, Preset, SweepAxes};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Edges attached per new node.
    pub m: usize,
    /// Expected triad-formation edges per new node.
    pub m_t: f64,
    /// Seed clique size.
    pub n0: usize,
    /// Run every replicate on one graph drawn from the base seed.
    pub shared_graph: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let d = NetworkParams::default();
        NetworkConfig {
            m: d.edges_per_node,
            m_t: d.triad_edges,
            n0: d.seed_clique,
            shared_graph: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Windows {
    pub steady_state: usize,
    pub rolling: usize,
}

impl Default for Windows {
    fn default() -> Self {
        Windows {
            steady_state: 500,
            rolling: 20,
        }
    }
}

/// Fully resolved configuration. This is what gets written to
/// `config.json` and embedded in summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub name: String,
    pub label: Option<String>,
    pub outdir: PathBuf,
    pub preset: Option<Preset>,
    pub model: ModelParams,
    pub network: NetworkConfig,
    /// Edge list to use as the shared graph instead of generating one.
    pub graph: Option<PathBuf>,
    pub table: DimeDistributionTable,
    pub replicates: usize,
    pub windows: Windows,
    /// Write every `stride`-th step to the time-series files.
    pub stride: usize,
    pub sweep: Option<SweepAxes>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            name: "run".into(),
            label: None,
            outdir: PathBuf::from("results"),
            preset: None,
            model: ModelParams::default(),
            network: NetworkConfig::default(),
            graph: None,
            table: DimeDistributionTable::default(),
            replicates: 20,
            windows: Windows::default(),
            stride: 1,
            sweep: None,
        }
    }
}

/// Shape check only: catches unknown keys and type errors with line and
/// column before any merging happens.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct RawConfig {
    schema_version: u32,
    name: Option<String>,
    label: Option<String>,
    outdir: Option<PathBuf>,
    preset: Option<Preset>,
    model: Option<ModelParams>,
    network: Option<NetworkConfig>,
    graph: Option<PathBuf>,
    table: Option<Value>,
    replicates: Option<usize>,
    windows: Option<Windows>,
    stride: Option<usize>,
    sweep: Option<SweepAxes>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub name: Option<String>,
    pub label: Option<String>,
    pub outdir: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub p: Option<f64>,
    pub f: Option<f64>,
    pub phi: Option<f64>,
    pub r: Option<u32>,
    pub n: Option<usize>,
    pub t: Option<usize>,
    pub stride: Option<usize>,
    pub graph: Option<PathBuf>,
}

/// Recursively overlays `patch` on `base`. Every key in `patch` must already
/// exist in `base`, so typos are reported with their dotted path.
fn merge(base: &mut Value, patch: &Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let child = format!("{path}.{k}");
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v, &child)?,
                    None => bail!("{child}: unknown key"),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

fn object<'a>(root: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    root.get(key).filter(|v| !v.is_null())
}

impl RunConfig {
    /// Parses a config file; `name` defaults to `default_name`.
    pub fn from_json(text: &str, default_name: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        if raw.schema_version != SCHEMA_VERSION {
            bail!(
                "schema_version: unsupported value {} (this build reads {SCHEMA_VERSION})",
                raw.schema_version
            );
        }
        let root: Map<String, Value> = serde_json::from_str(text)?;
        let d = RunConfig::default();

        let base_model = match raw.preset {
            Some(p) => p.apply(d.model),
            None => d.model,
        };
        let mut model = serde_json::to_value(base_model)?;
        if let Some(patch) = object(&root, "model") {
            merge(&mut model, patch, "model")?;
        }
        let mut table = serde_json::to_value(d.table)?;
        if let Some(patch) = object(&root, "table") {
            merge(&mut table, patch, "table")?;
        }

        Ok(RunConfig {
            schema_version: raw.schema_version,
            name: raw.name.unwrap_or_else(|| default_name.to_string()),
            label: raw.label,
            outdir: raw.outdir.unwrap_or(d.outdir),
            preset: raw.preset,
            model: serde_json::from_value(model).context("model")?,
            network: raw.network.unwrap_or(d.network),
            graph: raw.graph,
            table: serde_json::from_value(table).context("table")?,
            replicates: raw.replicates.unwrap_or(d.replicates),
            windows: raw.windows.unwrap_or(d.windows),
            stride: raw.stride.unwrap_or(d.stride),
            sweep: raw.sweep,
        })
    }

    pub fn load(path: &Path, default_name: &str) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        RunConfig::from_json(&text, default_name)
            .with_context(|| format!("invalid config {}", path.display()))
    }

    /// Loads `path` if given, otherwise starts from defaults, then applies
    /// the overrides and validates.
    pub fn resolve(path: Option<&Path>, default_name: &str, o: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => RunConfig::load(p, default_name)?,
            None => RunConfig {
                name: default_name.to_string(),
                ..RunConfig::default()
            },
        };
        cfg.apply(o);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = o.preset {
            self.preset = Some(p);
            self.model = p.apply(self.model);
        }
        let m = &mut self.model;
        if let Some(v) = o.seed {
            m.seed = v;
        }
        if let Some(v) = o.p {
            m.failure_prob = v;
        }
        if let Some(v) = o.f {
            m.individual_threshold = v;
        }
        if let Some(v) = o.phi {
            m.collective_threshold = v;
        }
        if let Some(v) = o.r {
            m.rounds = v;
        }
        if let Some(v) = o.n {
            m.agents = v;
        }
        if let Some(v) = o.t {
            m.steps = v;
        }
        if let Some(v) = o.replicates {
            self.replicates = v;
        }
        if let Some(v) = &o.name {
            self.name = v.clone();
        }
        if let Some(v) = &o.label {
            self.label = Some(v.clone());
        }
        if let Some(v) = &o.outdir {
            self.outdir = v.clone();
        }
        if let Some(v) = o.stride {
            self.stride = v;
        }
        if let Some(v) = &o.graph {
            self.graph = Some(v.clone());
        }
    }

    pub fn network_params(&self) -> NetworkParams {
        NetworkParams {
            nodes: self.model.agents,
            edges_per_node: self.network.m,
            triad_edges: self.network.m_t,
            seed_clique: self.network.n0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().context("model")?;
        self.table.validate()?;
        if self.graph.is_none() {
            self.network_params().validate().context("network")?;
        }
        if self.replicates < 1 {
            bail!("replicates: must be >= 1");
        }
        if self.windows.steady_state < 1 || self.windows.rolling < 1 {
            bail!("windows: steady_state and rolling must be >= 1");
        }
        if self.stride < 1 {
            bail!("stride: must be >= 1");
        }
        for (what, s) in [("name", Some(&self.name)), ("label", self.label.as_ref())] {
            if let Some(s) = s {
                if s.is_empty() || s.contains(['/', '\\']) || s == "." || s == ".." {
                    bail!("{what}: {s:?} is not a valid directory name");
                }
            }
        }
        Ok(())
    }

    /// True when every replicate runs on the same graph.
    pub fn uses_shared_graph(&self) -> bool {
        self.network.shared_graph || self.graph.is_some()
    }
}
