//! `dimesim` command-line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use dimesim::{NetworkParams, Preset};

mod commands;
mod config;

use commands::{Generator, NetworkRequest};
use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "dimesim",
    version,
    about = "Agent-based simulation of protest dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo replicates of one parameter set.
    Run(RunArgs),
    /// Run a parameter grid given by the config's `sweep` axes.
    Sweep(RunArgs),
    /// Run one scenario from each of the five initial-condition variants.
    Battery(RunArgs),
    /// Generate a graph and report its statistics.
    Network(NetworkArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all available cores). Never changes results.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    outdir: Option<PathBuf>,
    /// Experiment name, the first directory level under --outdir.
    #[arg(long)]
    name: Option<String>,
    /// Run directory name (default: UTC timestamp).
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Probability the authority signals failure.
    #[arg(long)]
    p: Option<f64>,
    /// Individual re-framing threshold.
    #[arg(long = "F")]
    f: Option<f64>,
    /// Collective re-framing threshold.
    #[arg(long)]
    phi: Option<f64>,
    /// Collective re-framing rounds.
    #[arg(long = "R")]
    r: Option<u32>,
    /// Number of agents.
    #[arg(long)]
    n: Option<usize>,
    /// Number of time steps.
    #[arg(long = "T")]
    t: Option<usize>,
    /// Write every k-th step to the time-series files.
    #[arg(long)]
    stride: Option<usize>,
    /// Edge list to use as a shared graph for every replicate.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct NetworkArgs {
    #[arg(long, value_enum, default_value = "holme-kim")]
    generator: Generator,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    m: usize,
    #[arg(long = "m-t", default_value_t = 5.0)]
    m_t: f64,
    #[arg(long, default_value_t = 13)]
    n0: usize,
    /// Edge probability for erdos-renyi.
    #[arg(long = "edge-prob", default_value_t = 0.01)]
    edge_prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of graphs (seeds seed, seed+1, ...) to average over.
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Also write stats.json, degree_histogram.csv and graph.edges here.
    #[arg(long)]
    outdir: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: dimesim::Error| e.to_string())
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            name: self.name.clone(),
            label: self.label.clone(),
            outdir: self.outdir.clone(),
            preset: self.preset,
            seed: self.seed,
            replicates: self.replicates,
            p: self.p,
            f: self.f,
            phi: self.phi,
            r: self.r,
            n: self.n,
            t: self.t,
            stride: self.stride,
            graph: self.graph.clone(),
        }
    }

    fn resolve(&self, default_name: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::resolve(self.config.as_deref(), default_name, &self.overrides())?;
        cfg.label.get_or_insert_with(commands::timestamp);
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => a
            .resolve("run")
            .and_then(|cfg| commands::cmd_run(&cfg, a.workers)),
        Command::Sweep(a) => a
            .resolve("sweep")
            .and_then(|cfg| commands::cmd_sweep(&cfg, a.workers)),
        Command::Battery(a) => a
            .resolve("battery")
            .and_then(|cfg| commands::cmd_battery(&cfg, a.workers)),
        Command::Network(a) => {
            let req = NetworkRequest {
                generator: a.generator,
                network: NetworkParams {
                    nodes: a.n,
                    edges_per_node: a.m,
                    triad_edges: a.m_t,
                    seed_clique: a.n0,
                },
                edge_prob: a.edge_prob,
                seed: a.seed,
                samples: a.samples,
            };
            commands::cmd_network(&req, a.outdir.as_deref(), a.label.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
