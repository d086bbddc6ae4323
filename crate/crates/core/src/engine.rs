//! Single runs, Monte Carlo replicates and per-step metrics.
//!
//! Draw order within a replicate's dynamics stream is fixed:
//!
//! 1. initialisation: coefficients (12 normals per run, or per agent in index
//!    order), then for each agent in index order its random initial flags
//!    (only for [`InitialCondition::Random`]: act, innovate, last action) and
//!    its four initial DIME normals;
//! 2. each step: one uniform for the authority, one uniform `Z` per agent in
//!    index order, then four uniforms `omega` (D, I, M, E) per agent in index
//!    order. The decision phase draws nothing.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ActivationTie, AgentState, AgentType, Dime, DimeCoefficients, DimeDistributionTable, Tactic,
};
use crate::network::{generate_holme_kim, NetworkParams, SocialGraph};
use crate::rng::{dynamics_rng, network_rng, SimRng};
use crate::signal::{authority_signal, individual_reframe, CollectiveReframer, Signal};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoeffMode {
    /// One coefficient draw shared by every agent.
    PerRun,
    /// Every agent draws its own coefficients.
    #[default]
    PerAgent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCondition {
    #[default]
    AllActiveConventional,
    AllLatentConventional,
    AllActiveRadical,
    AllLatentRadical,
    Random,
}

impl InitialCondition {
    pub const ALL: [InitialCondition; 5] = [
        InitialCondition::AllActiveConventional,
        InitialCondition::AllLatentConventional,
        InitialCondition::AllActiveRadical,
        InitialCondition::AllLatentRadical,
        InitialCondition::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitialCondition::AllActiveConventional => "all-active-conventional",
            InitialCondition::AllLatentConventional => "all-latent-conventional",
            InitialCondition::AllActiveRadical => "all-active-radical",
            InitialCondition::AllLatentRadical => "all-latent-radical",
            InitialCondition::Random => "random",
        }
    }

    /// `(will_act, will_innovate, last_active)` for the fixed variants.
    fn fixed_flags(self) -> Option<(bool, bool, Tactic)> {
        match self {
            InitialCondition::AllActiveConventional => Some((true, false, Tactic::Conventional)),
            InitialCondition::AllLatentConventional => Some((false, false, Tactic::Conventional)),
            InitialCondition::AllActiveRadical => Some((true, false, Tactic::Radical)),
            InitialCondition::AllLatentRadical => Some((false, false, Tactic::Radical)),
            InitialCondition::Random => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// `omega ~ U[0, 1]`.
    #[default]
    UnitUniform,
    /// `omega ~ U[-0.5, 0.5]`, for sensitivity analysis.
    Centered,
}

/// Model parameters. Serialised with the conventional short names
/// (`p`, `F`, `phi`, `R`, `n`, `T`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Probability that the authority signals failure.
    #[serde(rename = "p")]
    pub failure_prob: f64,
    /// Threshold for individual re-framing.
    #[serde(rename = "F")]
    pub individual_threshold: f64,
    /// Threshold for collective re-framing.
    #[serde(rename = "phi")]
    pub collective_threshold: f64,
    /// Collective re-framing rounds per step.
    #[serde(rename = "R")]
    pub rounds: u32,
    #[serde(rename = "n")]
    pub agents: usize,
    #[serde(rename = "T")]
    pub steps: usize,
    pub seed: u64,
    pub coeff_mode: CoeffMode,
    pub initial_condition: InitialCondition,
    pub noise_mode: NoiseMode,
    pub activation_tie: ActivationTie,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            failure_prob: 0.5,
            individual_threshold: 0.5,
            collective_threshold: 0.5,
            rounds: 10,
            agents: 1000,
            steps: 10_000,
            seed: 0,
            coeff_mode: CoeffMode::default(),
            initial_condition: InitialCondition::default(),
            noise_mode: NoiseMode::default(),
            activation_tie: ActivationTie::default(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p", self.failure_prob),
            ("F", self.individual_threshold),
            ("phi", self.collective_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.rounds < 1 {
            return Err(Error::config("R must be >= 1"));
        }
        if self.agents < 2 {
            return Err(Error::config(format!(
                "n = {} but at least 2 agents are needed",
                self.agents
            )));
        }
        if self.steps < 1 {
            return Err(Error::config("T must be >= 1"));
        }
        Ok(())
    }
}

/// Population composition after one step (or an average of such).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSnapshot {
    pub step: usize,
    /// Indexed by [`AgentType::index`].
    pub type_fractions: [f64; 6],
    /// Mean D, I, M, E.
    pub mean_dime: [f64; 4],
    /// Numeric authority signal (-1 success, +1 failure); a mean once averaged.
    pub authority_signal: f64,
    /// Fraction of agents perceiving success after re-framing.
    pub success_fraction: f64,
}

impl PopulationSnapshot {
    const WIDTH: usize = 12;

    pub fn fraction(&self, ty: AgentType) -> f64 {
        self.type_fractions[ty.index()]
    }

    fn values(&self) -> [f64; Self::WIDTH] {
        let mut v = [0.0; Self::WIDTH];
        v[..6].copy_from_slice(&self.type_fractions);
        v[6..10].copy_from_slice(&self.mean_dime);
        v[10] = self.authority_signal;
        v[11] = self.success_fraction;
        v
    }

    fn from_values(step: usize, v: [f64; Self::WIDTH]) -> Self {
        PopulationSnapshot {
            step,
            type_fractions: v[..6].try_into().unwrap(),
            mean_dime: v[6..10].try_into().unwrap(),
            authority_signal: v[10],
            success_fraction: v[11],
        }
    }

    /// Element-wise arithmetic mean; `step` is taken from the last element.
    /// Panics on an empty slice.
    pub fn mean(snapshots: &[PopulationSnapshot]) -> PopulationSnapshot {
        let last = snapshots.last().expect("mean of no snapshots");
        let mut acc = [0.0; Self::WIDTH];
        for s in snapshots {
            for (a, v) in acc.iter_mut().zip(s.values()) {
                *a += v;
            }
        }
        let k = snapshots.len() as f64;
        PopulationSnapshot::from_values(last.step, acc.map(|a| a / k))
    }
}

/// Each point becomes the mean over the previous `min(window, t + 1)` points,
/// itself included. `window` must be at least 1.
pub fn rolling_average(series: &[PopulationSnapshot], window: usize) -> Vec<PopulationSnapshot> {
    assert!(window >= 1, "rolling window must be >= 1");
    (0..series.len())
        .map(|t| {
            let start = (t + 1).saturating_sub(window);
            let mut s = PopulationSnapshot::mean(&series[start..=t]);
            s.step = series[t].step;
            s
        })
        .collect()
}

#[derive(Clone, Debug)]
enum Coefficients {
    Shared(DimeCoefficients),
    PerAgent(Vec<DimeCoefficients>),
}

impl Coefficients {
    #[inline]
    fn get(&self, agent: usize) -> &DimeCoefficients {
        match self {
            Coefficients::Shared(c) => c,
            Coefficients::PerAgent(v) => &v[agent],
        }
    }
}

/// State of one run in progress.
pub struct Simulation<'g> {
    params: ModelParams,
    graph: &'g SocialGraph,
    agents: Vec<AgentState>,
    coefficients: Coefficients,
    rng: SimRng,
    reframer: CollectiveReframer,
    after_individual: Vec<Signal>,
    time: usize,
}

impl<'g> Simulation<'g> {
    /// Initialises a run from `params.seed`.
    pub fn new(
        params: &ModelParams,
        graph: &'g SocialGraph,
        table: &DimeDistributionTable,
    ) -> Result<Self> {
        Self::with_rng(params, graph, table, dynamics_rng(params.seed))
    }

    pub fn with_rng(
        params: &ModelParams,
        graph: &'g SocialGraph,
        table: &DimeDistributionTable,
        mut rng: SimRng,
    ) -> Result<Self> {
        params.validate()?;
        table.validate()?;
        if graph.node_count() != params.agents {
            return Err(Error::SizeMismatch {
                graph: graph.node_count(),
                expected: params.agents,
            });
        }
        let n = params.agents;
        let coefficients = match params.coeff_mode {
            CoeffMode::PerRun => Coefficients::Shared(table.sample_coefficients(&mut rng)),
            CoeffMode::PerAgent => Coefficients::PerAgent(
                (0..n)
                    .map(|_| table.sample_coefficients(&mut rng))
                    .collect(),
            ),
        };
        let agents = (0..n)
            .map(|_| {
                let (act, innovate, last) =
                    params.initial_condition.fixed_flags().unwrap_or_else(|| {
                        let act = rng.random::<bool>();
                        let innovate = rng.random::<bool>();
                        let last = if rng.random::<bool>() {
                            Tactic::Conventional
                        } else {
                            Tactic::Radical
                        };
                        (act, innovate, last)
                    });
                AgentState::new(table.sample_initial(&mut rng), act, innovate, last)
            })
            .collect();
        Ok(Simulation {
            params: *params,
            graph,
            agents,
            coefficients,
            rng,
            reframer: CollectiveReframer::new(n),
            after_individual: vec![Signal::Success; n],
            time: 0,
        })
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// Fractions of the six agent types in the current state.
    pub fn composition(&self) -> [f64; 6] {
        let mut counts = [0usize; 6];
        for a in &self.agents {
            counts[a.classify().index()] += 1;
        }
        let n = self.agents.len() as f64;
        counts.map(|c| c as f64 / n)
    }

    /// Advances one time step: broadcast, individual re-framing, collective
    /// re-framing, DIME update, decision, action update.
    pub fn step(&mut self) -> PopulationSnapshot {
        let p = &self.params;
        let authority = authority_signal(p.failure_prob, &mut self.rng);

        for (slot, agent) in self.after_individual.iter_mut().zip(&self.agents) {
            let z: f64 = self.rng.random();
            *slot = individual_reframe(
                authority,
                agent.dime.disidentification(),
                p.individual_threshold,
                z,
            );
        }

        let perceived: &[Signal] = if authority.is_success() {
            &self.after_individual
        } else {
            self.reframer.run(
                &self.after_individual,
                self.graph,
                p.collective_threshold,
                p.rounds,
            )
        };

        let offset = match p.noise_mode {
            NoiseMode::UnitUniform => 0.0,
            NoiseMode::Centered => 0.5,
        };
        let mut counts = [0usize; 6];
        let mut dime_sum = [0.0; 4];
        let mut successes = 0usize;
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let noise: [f64; 4] = std::array::from_fn(|_| self.rng.random::<f64>() - offset);
            let b = perceived[i];
            agent.update_dime(self.coefficients.get(i), b, noise);
            agent.perceived = b;
            let decision = agent.decide(p.activation_tie);
            agent.apply_decision(decision);

            counts[agent.classify().index()] += 1;
            for (s, v) in dime_sum.iter_mut().zip(agent.dime.0) {
                *s += v;
            }
            successes += b.is_success() as usize;
        }

        self.time += 1;
        let n = self.agents.len() as f64;
        PopulationSnapshot {
            step: self.time,
            type_fractions: counts.map(|c| c as f64 / n),
            mean_dime: dime_sum.map(|s| s / n),
            authority_signal: authority.value(),
            success_fraction: successes as f64 / n,
        }
    }

    pub fn mean_dime(&self) -> Dime {
        let n = self.agents.len() as f64;
        let mut sum = [0.0; 4];
        for a in &self.agents {
            for (s, v) in sum.iter_mut().zip(a.dime.0) {
                *s += v;
            }
        }
        Dime(sum.map(|s| s / n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    /// Trailing steps averaged into the steady state.
    pub steady_window: usize,
    /// Worker threads for replicates; `None` uses every available core.
    pub workers: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            steady_window: 500,
            workers: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub params: ModelParams,
    pub seed: u64,
    pub snapshots: Vec<PopulationSnapshot>,
    pub steady_state: PopulationSnapshot,
}

/// Runs `params.steps` steps on `graph`, recording every step.
pub fn run(
    params: &ModelParams,
    graph: &SocialGraph,
    table: &DimeDistributionTable,
    options: &RunOptions,
) -> Result<RunResult> {
    if options.steady_window < 1 {
        return Err(Error::config("steady-state window must be >= 1"));
    }
    let mut sim = Simulation::new(params, graph, table)?;
    let snapshots: Vec<_> = (0..params.steps).map(|_| sim.step()).collect();
    let tail = snapshots.len().saturating_sub(options.steady_window);
    let steady_state = PopulationSnapshot::mean(&snapshots[tail..]);
    Ok(RunResult {
        params: *params,
        seed: params.seed,
        snapshots,
        steady_state,
    })
}

/// Where each replicate's interaction graph comes from.
#[derive(Clone, Copy, Debug)]
pub enum GraphSource<'a> {
    /// A fresh Holme-Kim graph per replicate, drawn from the replicate's
    /// network stream.
    Generate(NetworkParams),
    /// One fixed graph shared by every replicate.
    Shared(&'a SocialGraph),
}

/// The Holme-Kim graph replicate `seed` runs on under [`GraphSource::Generate`].
pub fn replicate_graph(network: &NetworkParams, seed: u64) -> Result<SocialGraph> {
    generate_holme_kim(network, &mut network_rng(seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSet {
    /// Element-wise mean over replicates; `seed` is the base seed.
    pub aggregate: RunResult,
    pub replicates: Vec<RunResult>,
}

/// Runs `count` replicates with seeds `params.seed + r`, in parallel over at
/// most `options.workers` threads. Output does not depend on the worker count.
pub fn run_replicates(
    params: &ModelParams,
    count: usize,
    table: &DimeDistributionTable,
    graphs: GraphSource<'_>,
    options: &RunOptions,
) -> Result<ReplicateSet> {
    if count < 1 {
        return Err(Error::config("replicate count must be >= 1"));
    }
    params.validate()?;
    if let GraphSource::Generate(net) = graphs {
        if net.nodes != params.agents {
            return Err(Error::SizeMismatch {
                graph: net.nodes,
                expected: params.agents,
            });
        }
    }

    let one = |r: usize| -> Result<RunResult> {
        let mut p = *params;
        p.seed = params.seed.wrapping_add(r as u64);
        match graphs {
            GraphSource::Generate(net) => run(&p, &replicate_graph(&net, p.seed)?, table, options),
            GraphSource::Shared(g) => run(&p, g, table, options),
        }
    };
    let replicates: Vec<RunResult> = with_workers(options.workers, || {
        (0..count)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(ReplicateSet {
        aggregate: aggregate(params, &replicates),
        replicates,
    })
}

fn aggregate(params: &ModelParams, replicates: &[RunResult]) -> RunResult {
    let steps = replicates[0].snapshots.len();
    let mut column = Vec::with_capacity(replicates.len());
    let snapshots = (0..steps)
        .map(|t| {
            column.clear();
            column.extend(replicates.iter().map(|r| r.snapshots[t]));
            PopulationSnapshot::mean(&column)
        })
        .collect();
    let steady: Vec<_> = replicates.iter().map(|r| r.steady_state).collect();
    RunResult {
        params: *params,
        seed: params.seed,
        snapshots,
        steady_state: PopulationSnapshot::mean(&steady),
    }
}

/// Runs `f` inside a dedicated pool when a worker count is given.
pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}
