use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use dimesim::engine::replicate_graph;
use dimesim::experiments::BatteryRow;
use dimesim::network::{generate_erdos_renyi, generate_holme_kim, graph_stats};
use dimesim::output::{
    steady_state_table, write_atomic_with, write_battery_csv, write_json_atomic, write_sweep_csv,
    write_timeseries_csv, SteadyStateRecord,
};
use dimesim::rng::network_rng;
use dimesim::{
    initial_condition_battery, rolling_average, run_replicates, run_sweep, AgentType, GraphSource,
    GraphStats, NetworkParams, PopulationSnapshot, RunOptions, SocialGraph, SweepCell, SweepSpec,
};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SCHEMA_VERSION};

/// `YYYYMMDDTHHMMSSZ` for the current UTC time.
pub fn timestamp() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string()
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    let label = cfg.label.clone().unwrap_or_else(timestamp);
    cfg.outdir.join(&cfg.name).join(label)
}

fn options(cfg: &RunConfig, workers: Option<usize>) -> RunOptions {
    RunOptions {
        steady_window: cfg.windows.steady_state,
        workers,
    }
}

/// Builds a run directory under a `.partial` name and renames it into place
/// once `fill` succeeds; on failure the partial directory is removed.
fn staged_dir(final_dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if final_dir.exists() {
        bail!(
            "output directory {} already exists; choose another --label",
            final_dir.display()
        );
    }
    let mut name = final_dir
        .file_name()
        .context("output directory has no name")?
        .to_os_string();
    name.push(".partial");
    let partial = final_dir.with_file_name(name);
    if partial.exists() {
        fs::remove_dir_all(&partial)
            .with_context(|| format!("cannot clear {}", partial.display()))?;
    }
    fs::create_dir_all(&partial).with_context(|| format!("cannot create {}", partial.display()))?;
    match fill(&partial) {
        Ok(()) => fs::rename(&partial, final_dir)
            .with_context(|| format!("cannot rename into {}", final_dir.display())),
        Err(e) => {
            let _ = fs::remove_dir_all(&partial);
            Err(e)
        }
    }
}

fn write_csv(path: &Path, snapshots: &[PopulationSnapshot], stride: usize) -> Result<()> {
    write_atomic_with(path, |w| write_timeseries_csv(w, snapshots, stride))
        .with_context(|| format!("cannot write {}", path.display()))
}

fn write_edges(path: &Path, graph: &SocialGraph) -> Result<()> {
    write_atomic_with(path, |w| graph.write_edge_list(w).map_err(io::Error::other))
        .with_context(|| format!("cannot write {}", path.display()))
}

fn shared_graph(cfg: &RunConfig) -> Result<Option<SocialGraph>> {
    if let Some(path) = &cfg.graph {
        let file = fs::File::open(path)
            .with_context(|| format!("cannot open graph {}", path.display()))?;
        let g = SocialGraph::read_edge_list(io::BufReader::new(file))
            .with_context(|| format!("cannot read graph {}", path.display()))?;
        if g.node_count() != cfg.model.agents {
            bail!(
                "graph {} has {} nodes but n = {}",
                path.display(),
                g.node_count(),
                cfg.model.agents
            );
        }
        return Ok(Some(g));
    }
    if cfg.network.shared_graph {
        return Ok(Some(replicate_graph(
            &cfg.network_params(),
            cfg.model.seed,
        )?));
    }
    Ok(None)
}

#[derive(Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub seed: u64,
    pub steady_state: SteadyStateRecord,
}

#[derive(Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    /// Mean over replicates of the per-replicate steady states.
    pub steady_state: SteadyStateRecord,
    /// Sample standard deviation over replicates of each type fraction.
    pub steady_state_sd: BTreeMap<String, f64>,
    pub replicates: Vec<ReplicateSummary>,
    pub wall_time_seconds: f64,
}

fn fraction_sd(states: &[PopulationSnapshot]) -> BTreeMap<String, f64> {
    AgentType::ALL
        .iter()
        .map(|&ty| {
            let xs: Vec<f64> = states.iter().map(|s| s.fraction(ty)).collect();
            let k = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / k;
            let var = if xs.len() > 1 {
                xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            (ty.name().to_string(), var.sqrt())
        })
        .collect()
}

pub fn cmd_run(cfg: &RunConfig, workers: Option<usize>) -> Result<()> {
    let started = Instant::now();
    let shared = shared_graph(cfg)?;
    let net = cfg.network_params();
    let source = match &shared {
        Some(g) => GraphSource::Shared(g),
        None => GraphSource::Generate(net),
    };
    let set = run_replicates(
        &cfg.model,
        cfg.replicates,
        &cfg.table,
        source,
        &options(cfg, workers),
    )?;
    let final_dir = output_dir(cfg);

    staged_dir(&final_dir, |dir| {
        let snaps = &set.aggregate.snapshots;
        write_csv(&dir.join("timeseries.csv"), snaps, cfg.stride)?;
        write_csv(
            &dir.join("timeseries_smoothed.csv"),
            &rolling_average(snaps, cfg.windows.rolling),
            cfg.stride,
        )?;
        let rep_dir = dir.join("replicates");
        fs::create_dir_all(&rep_dir)?;
        for (r, rep) in set.replicates.iter().enumerate() {
            write_csv(
                &rep_dir.join(format!("replicate-{r:03}.csv")),
                &rep.snapshots,
                cfg.stride,
            )?;
        }
        let graph = match shared {
            Some(g) => g,
            None => replicate_graph(&net, cfg.model.seed)?,
        };
        write_edges(&dir.join("graph.edges"), &graph)?;
        write_json_atomic(&dir.join("config.json"), cfg)?;

        let steady: Vec<_> = set.replicates.iter().map(|r| r.steady_state).collect();
        let summary = RunSummary {
            schema_version: SCHEMA_VERSION,
            command: "run".into(),
            config: cfg.clone(),
            steady_state: SteadyStateRecord::from(&set.aggregate.steady_state),
            steady_state_sd: fraction_sd(&steady),
            replicates: set
                .replicates
                .iter()
                .map(|r| ReplicateSummary {
                    seed: r.seed,
                    steady_state: SteadyStateRecord::from(&r.steady_state),
                })
                .collect(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
        };
        write_json_atomic(&dir.join("summary.json"), &summary)?;
        Ok(())
    })?;

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "steady state over the last {} steps, mean of {} replicate(s):",
        cfg.windows.steady_state, cfg.replicates
    )?;
    write!(out, "{}", steady_state_table(&set.aggregate.steady_state))?;
    writeln!(out, "wrote {}", final_dir.display())?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct SweepManifest {
    pub schema_version: u32,
    pub config: RunConfig,
    pub total_cells: usize,
    pub completed_cells: usize,
    pub complete: bool,
    /// Finished cells in completion order.
    pub cells: Vec<SweepCell>,
}

fn sweep_spec(cfg: &RunConfig) -> Result<SweepSpec> {
    let Some(axes) = cfg.sweep.clone() else {
        bail!("sweep: the config has no sweep axes");
    };
    if cfg.uses_shared_graph() {
        bail!("sweeps generate a graph per replicate; shared graphs are not supported");
    }
    let spec = SweepSpec {
        axes,
        base: cfg.model,
        replicates: cfg.replicates,
        network: cfg.network_params(),
    };
    spec.validate().context("sweep")?;
    Ok(spec)
}

pub fn cmd_sweep(cfg: &RunConfig, workers: Option<usize>) -> Result<()> {
    let spec = sweep_spec(cfg)?;
    let dir = output_dir(cfg);
    let manifest_path = dir.join("manifest.json");
    let mut done: Vec<SweepCell> = Vec::new();
    if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path)?;
        let manifest: SweepManifest = serde_json::from_str(&text)
            .with_context(|| format!("corrupt manifest {}", manifest_path.display()))?;
        if manifest.config != *cfg {
            bail!(
                "{} was written by a different configuration; choose another --label",
                manifest_path.display()
            );
        }
        done = manifest.cells;
    } else {
        if dir.exists() && fs::read_dir(&dir)?.next().is_some() {
            bail!(
                "output directory {} exists and has no manifest",
                dir.display()
            );
        }
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_json_atomic(&dir.join("config.json"), cfg)?;
    }
    let total = spec.cells().len();
    let skipped = done.len();

    let mut manifest = SweepManifest {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        total_cells: total,
        completed_cells: done.len(),
        complete: false,
        cells: done.clone(),
    };
    let cells = run_sweep(&spec, &cfg.table, &options(cfg, workers), &done, |cell| {
        manifest.cells.push(cell.clone());
        manifest.completed_cells = manifest.cells.len();
        write_json_atomic(&manifest_path, &manifest)?;
        eprintln!(
            "[{}/{}] {} -> {} {:.3}",
            manifest.completed_cells,
            total,
            cell.coordinates.label(),
            cell.dominant_type.abbreviation(),
            cell.dominant_fraction
        );
        Ok(())
    })?;

    let sweep_csv = dir.join("sweep.csv");
    write_atomic_with(&sweep_csv, |w| write_sweep_csv(w, &cells))
        .with_context(|| format!("cannot write {}", sweep_csv.display()))?;
    manifest.complete = true;
    write_json_atomic(&manifest_path, &manifest)?;

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:>6} {:>6} {:>6} {:>4}  dominant",
        "p", "F", "phi", "R"
    )?;
    for c in &cells {
        let k = &c.coordinates;
        writeln!(
            out,
            "{:>6} {:>6} {:>6} {:>4}  {} {:.3}",
            k.failure_prob,
            k.individual_threshold,
            k.collective_threshold,
            k.rounds,
            c.dominant_type.abbreviation(),
            c.dominant_fraction
        )?;
    }
    if skipped > 0 {
        writeln!(
            out,
            "resumed: {skipped} of {total} cells were already complete"
        )?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct BatterySummary {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub rows: Vec<BatteryRow>,
}

pub fn cmd_battery(cfg: &RunConfig, workers: Option<usize>) -> Result<()> {
    if cfg.uses_shared_graph() {
        bail!("the battery generates a graph per replicate; shared graphs are not supported");
    }
    let rows = initial_condition_battery(
        &cfg.model,
        cfg.replicates,
        &cfg.table,
        &cfg.network_params(),
        &options(cfg, workers),
    )?;
    let final_dir = output_dir(cfg);
    staged_dir(&final_dir, |dir| {
        write_atomic_with(&dir.join("battery.csv"), |w| write_battery_csv(w, &rows))?;
        write_json_atomic(&dir.join("config.json"), cfg)?;
        let summary = BatterySummary {
            schema_version: SCHEMA_VERSION,
            command: "battery".into(),
            config: cfg.clone(),
            rows: rows.clone(),
        };
        write_json_atomic(&dir.join("summary.json"), &summary)?;
        Ok(())
    })?;

    let mut out = io::stdout().lock();
    write!(out, "{:<26}", "initial_condition")?;
    for ty in AgentType::ALL {
        write!(out, " {:>6}", ty.abbreviation())?;
    }
    writeln!(out, "  dominant")?;
    for row in &rows {
        write!(out, "{:<26}", row.initial_condition.name())?;
        for f in row.steady_state.type_fractions {
            write!(out, " {f:>6.3}")?;
        }
        writeln!(out, "  {}", row.dominant_type.abbreviation())?;
    }
    writeln!(out, "wrote {}", final_dir.display())?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    HolmeKim,
    ErdosRenyi,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetworkRequest {
    pub generator: Generator,
    pub network: NetworkParams,
    pub edge_prob: f64,
    pub seed: u64,
    pub samples: usize,
}

#[derive(Serialize)]
struct NetworkReport<'a> {
    request: &'a NetworkRequest,
    mean_clustering: f64,
    mean_path_length: f64,
    samples: &'a [GraphStats],
}

pub fn cmd_network(req: &NetworkRequest, outdir: Option<&Path>, label: Option<&str>) -> Result<()> {
    if req.samples < 1 {
        bail!("--samples must be >= 1");
    }
    let mut graphs = Vec::with_capacity(req.samples);
    let mut stats = Vec::with_capacity(req.samples);
    for s in 0..req.samples {
        let mut rng = network_rng(req.seed.wrapping_add(s as u64));
        let g = match req.generator {
            Generator::HolmeKim => generate_holme_kim(&req.network, &mut rng)?,
            Generator::ErdosRenyi => {
                generate_erdos_renyi(req.network.nodes, req.edge_prob, &mut rng)?
            }
        };
        stats.push(graph_stats(&g)?);
        if s == 0 {
            graphs.push(g);
        }
    }
    let k = stats.len() as f64;
    let mean_clustering = stats.iter().map(|s| s.global_clustering).sum::<f64>() / k;
    let mean_path_length = stats
        .iter()
        .map(|s| s.characteristic_path_length)
        .sum::<f64>()
        / k;

    if let Some(outdir) = outdir {
        let label = label.map(str::to_string).unwrap_or_else(timestamp);
        let final_dir = outdir.join("network").join(label);
        staged_dir(&final_dir, |dir| {
            write_atomic_with(&dir.join("degree_histogram.csv"), |w| {
                stats[0]
                    .write_degree_histogram_csv(w)
                    .map_err(io::Error::other)
            })?;
            write_edges(&dir.join("graph.edges"), &graphs[0])?;
            let report = NetworkReport {
                request: req,
                mean_clustering,
                mean_path_length,
                samples: &stats,
            };
            write_json_atomic(&dir.join("stats.json"), &report)?;
            Ok(())
        })?;
    }

    let first = &stats[0];
    let mut out = io::stdout().lock();
    let name = match req.generator {
        Generator::HolmeKim => "holme-kim",
        Generator::ErdosRenyi => "erdos-renyi",
    };
    writeln!(out, "generator                   {name}")?;
    writeln!(out, "nodes                       {}", first.nodes)?;
    writeln!(out, "edges                       {}", first.edges)?;
    writeln!(out, "mean_degree                 {}", first.mean_degree)?;
    writeln!(out, "max_degree                  {}", first.max_degree)?;
    writeln!(out, "connected                   {}", first.connected)?;
    writeln!(
        out,
        "global_clustering           {:.4}",
        first.global_clustering
    )?;
    writeln!(
        out,
        "characteristic_path_length  {:.4}",
        first.characteristic_path_length
    )?;
    if req.samples > 1 {
        writeln!(
            out,
            "mean_clustering ({} graphs)  {mean_clustering:.4}",
            req.samples
        )?;
        writeln!(
            out,
            "mean_path_length ({} graphs) {mean_path_length:.4}",
            req.samples
        )?;
    }
    Ok(())
}
