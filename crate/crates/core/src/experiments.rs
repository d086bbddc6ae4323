//! Named scenarios, grid sweeps and initial-condition batteries.

use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    run_replicates, with_workers, GraphSource, InitialCondition, ModelParams, PopulationSnapshot,
    RunOptions,
};
use crate::error::{Error, Result};
use crate::model::{AgentType, DimeDistributionTable};
use crate::network::NetworkParams;
use crate::rng::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Mostly success signals, easy individual and collective re-framing.
    Responsive,
    /// Mostly failure signals, hard re-framing.
    Intransigent,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Responsive => "responsive",
            Preset::Intransigent => "intransigent",
        }
    }

    /// Overwrites `p`, `F`, `phi` and `R` in `base`.
    pub fn apply(self, base: ModelParams) -> ModelParams {
        let v = match self {
            Preset::Responsive => 0.2,
            Preset::Intransigent => 0.8,
        };
        ModelParams {
            failure_prob: v,
            individual_threshold: v,
            collective_threshold: v,
            rounds: 10,
            ..base
        }
    }

    pub fn params(self) -> ModelParams {
        self.apply(ModelParams::default())
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "responsive" => Ok(Preset::Responsive),
            "intransigent" => Ok(Preset::Intransigent),
            other => Err(Error::config(format!(
                "unknown preset {other:?} (expected responsive or intransigent)"
            ))),
        }
    }
}

/// Values to sweep per parameter. A missing axis keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(rename = "p", default, skip_serializing_if = "Option::is_none")]
    pub failure_prob: Option<Vec<f64>>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub individual_threshold: Option<Vec<f64>>,
    #[serde(rename = "phi", default, skip_serializing_if = "Option::is_none")]
    pub collective_threshold: Option<Vec<f64>>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: SweepAxes,
    /// Parameters shared by every cell; `seed` is the sweep's base seed.
    pub base: ModelParams,
    pub replicates: usize,
    pub network: NetworkParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCoordinates {
    #[serde(rename = "p")]
    pub failure_prob: f64,
    #[serde(rename = "F")]
    pub individual_threshold: f64,
    #[serde(rename = "phi")]
    pub collective_threshold: f64,
    #[serde(rename = "R")]
    pub rounds: u32,
}

impl CellCoordinates {
    /// Base seed for the cell's replicates, a pure function of the sweep seed
    /// and the coordinates.
    pub fn seed(&self, sweep_seed: u64) -> u64 {
        derive_seed(
            sweep_seed,
            &[
                self.failure_prob.to_bits(),
                self.individual_threshold.to_bits(),
                self.collective_threshold.to_bits(),
                self.rounds as u64,
            ],
        )
    }

    pub fn apply(&self, base: &ModelParams) -> ModelParams {
        ModelParams {
            failure_prob: self.failure_prob,
            individual_threshold: self.individual_threshold,
            collective_threshold: self.collective_threshold,
            rounds: self.rounds,
            seed: self.seed(base.seed),
            ..*base
        }
    }

    pub fn label(&self) -> String {
        format!(
            "p={} F={} phi={} R={}",
            self.failure_prob, self.individual_threshold, self.collective_threshold, self.rounds
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub coordinates: CellCoordinates,
    /// Mean over replicates of each replicate's steady state.
    pub steady_state: PopulationSnapshot,
    /// Per-replicate steady states, for spread estimates.
    pub replicate_steady_states: Vec<PopulationSnapshot>,
    pub dominant_type: AgentType,
    pub dominant_fraction: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::config("replicates must be >= 1"));
        }
        let unit = [
            ("p", &self.axes.failure_prob),
            ("F", &self.axes.individual_threshold),
            ("phi", &self.axes.collective_threshold),
        ];
        for (name, axis) in unit {
            if let Some(values) = axis {
                if values.is_empty() {
                    return Err(Error::config(format!("axes.{name} is empty")));
                }
                if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::config(format!(
                        "axes.{name} value {v} outside [0, 1]"
                    )));
                }
            }
        }
        if let Some(rounds) = &self.axes.rounds {
            if rounds.is_empty() {
                return Err(Error::config("axes.R is empty"));
            }
            if rounds.contains(&0) {
                return Err(Error::config("axes.R values must be >= 1"));
            }
        }
        self.base.validate()?;
        if self.network.nodes != self.base.agents {
            return Err(Error::SizeMismatch {
                graph: self.network.nodes,
                expected: self.base.agents,
            });
        }
        self.network.validate()
    }

    /// Grid cells in row-major order over (p, F, phi, R).
    pub fn cells(&self) -> Vec<CellCoordinates> {
        let b = &self.base;
        let ps = self
            .axes
            .failure_prob
            .clone()
            .unwrap_or_else(|| vec![b.failure_prob]);
        let fs = self
            .axes
            .individual_threshold
            .clone()
            .unwrap_or_else(|| vec![b.individual_threshold]);
        let phis = self
            .axes
            .collective_threshold
            .clone()
            .unwrap_or_else(|| vec![b.collective_threshold]);
        let rs = self.axes.rounds.clone().unwrap_or_else(|| vec![b.rounds]);
        let mut cells = Vec::with_capacity(ps.len() * fs.len() * phis.len() * rs.len());
        for &p in &ps {
            for &f in &fs {
                for &phi in &phis {
                    for &r in &rs {
                        cells.push(CellCoordinates {
                            failure_prob: p,
                            individual_threshold: f,
                            collective_threshold: phi,
                            rounds: r,
                        });
                    }
                }
            }
        }
        cells
    }
}

/// Arg-max over the six fractions. Ties go to the earliest type in
/// [`AgentType::ALL`] order.
pub fn dominant_type(fractions: &[f64; 6]) -> (AgentType, f64) {
    let mut best = 0;
    for k in 1..6 {
        if fractions[k] > fractions[best] {
            best = k;
        }
    }
    (AgentType::ALL[best], fractions[best])
}

pub fn run_cell(
    spec: &SweepSpec,
    coordinates: CellCoordinates,
    table: &DimeDistributionTable,
    options: &RunOptions,
) -> Result<SweepCell> {
    let params = coordinates.apply(&spec.base);
    let inner = RunOptions {
        workers: None,
        ..*options
    };
    let set = run_replicates(
        &params,
        spec.replicates,
        table,
        GraphSource::Generate(spec.network),
        &inner,
    )
    .map_err(|e| Error::Cell {
        cell: coordinates.label(),
        source: Box::new(e),
    })?;
    let steady_state = set.aggregate.steady_state;
    let (dominant_type, dominant_fraction) = dominant_type(&steady_state.type_fractions);
    Ok(SweepCell {
        coordinates,
        steady_state,
        replicate_steady_states: set.replicates.iter().map(|r| r.steady_state).collect(),
        dominant_type,
        dominant_fraction,
    })
}

/// Runs every grid cell not already present in `completed`. Cells execute
/// on up to `options.workers` threads; `on_cell` is called from the calling
/// thread once per newly finished cell, in completion order. Returns all
/// cells, completed ones included, in grid order.
pub fn run_sweep<F>(
    spec: &SweepSpec,
    table: &DimeDistributionTable,
    options: &RunOptions,
    completed: &[SweepCell],
    mut on_cell: F,
) -> Result<Vec<SweepCell>>
where
    F: FnMut(&SweepCell) -> Result<()>,
{
    spec.validate()?;
    table.validate()?;
    let grid = spec.cells();
    let pending: Vec<CellCoordinates> = grid
        .iter()
        .copied()
        .filter(|c| !completed.iter().any(|done| done.coordinates == *c))
        .collect();

    let mut finished: Vec<SweepCell> = Vec::with_capacity(pending.len());
    let (tx, rx) = mpsc::channel::<Result<SweepCell>>();
    let outcome = std::thread::scope(|scope| -> Result<()> {
        let worker = scope.spawn(|| {
            with_workers(options.workers, || {
                pending.par_iter().try_for_each_with(tx, |tx, &c| {
                    let cell = run_cell(spec, c, table, options);
                    let failed = cell.is_err();
                    // receiver only hangs up after an error
                    let _ = tx.send(cell);
                    if failed {
                        Err(())
                    } else {
                        Ok(())
                    }
                })
            })
        });
        let mut first_error = None;
        for cell in rx {
            match cell {
                Ok(cell) if first_error.is_none() => {
                    if let Err(e) = on_cell(&cell) {
                        first_error = Some(e);
                    }
                    finished.push(cell);
                }
                Ok(_) => {}
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        let _ = worker.join();
        first_error.map_or(Ok(()), Err)
    });
    outcome?;

    let mut all: Vec<SweepCell> = Vec::with_capacity(grid.len());
    for c in &grid {
        let cell = completed
            .iter()
            .chain(&finished)
            .find(|cell| cell.coordinates == *c)
            .expect("every grid cell finished");
        all.push(cell.clone());
    }
    Ok(all)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryRow {
    pub initial_condition: InitialCondition,
    pub steady_state: PopulationSnapshot,
    pub dominant_type: AgentType,
    pub dominant_fraction: f64,
}

/// Runs `scenario` from each of the five initial-condition variants with the
/// same seeds and replicate count.
pub fn initial_condition_battery(
    scenario: &ModelParams,
    replicates: usize,
    table: &DimeDistributionTable,
    network: &NetworkParams,
    options: &RunOptions,
) -> Result<Vec<BatteryRow>> {
    InitialCondition::ALL
        .iter()
        .map(|&ic| {
            let params = ModelParams {
                initial_condition: ic,
                ..*scenario
            };
            let set = run_replicates(
                &params,
                replicates,
                table,
                GraphSource::Generate(*network),
                options,
            )?;
            let steady_state = set.aggregate.steady_state;
            let (dominant_type, dominant_fraction) = dominant_type(&steady_state.type_fractions);
            Ok(BatteryRow {
                initial_condition: ic,
                steady_state,
                dominant_type,
                dominant_fraction,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{replicate_graph, run};

    fn tiny_spec() -> SweepSpec {
        let base = ModelParams {
            agents: 30,
            steps: 40,
            seed: 99,
            ..Default::default()
        };
        SweepSpec {
            axes: SweepAxes {
                failure_prob: Some(vec![0.2, 0.8]),
                individual_threshold: Some(vec![0.3, 0.7]),
                ..Default::default()
            },
            base,
            replicates: 2,
            network: NetworkParams {
                nodes: 30,
                edges_per_node: 2,
                triad_edges: 1.0,
                seed_clique: 3,
            },
        }
    }

    fn options() -> RunOptions {
        RunOptions {
            steady_window: 10,
            workers: Some(2),
        }
    }

    #[test]
    fn dominant_type_examples() {
        assert_eq!(
            dominant_type(&[0.1, 0.1, 0.1, 0.1, 0.1, 0.5]),
            (AgentType::LatentRadical, 0.5)
        );
        let u = 1.0 / 6.0;
        assert_eq!(dominant_type(&[u; 6]), (AgentType::ActiveConventional, u));
        assert_eq!(
            dominant_type(&[0.1, 0.3, 0.0, 0.3, 0.2, 0.1]).0,
            AgentType::ActiveInnovator
        );
    }

    #[test]
    fn presets() {
        let r = Preset::Responsive.params();
        assert_eq!(
            (
                r.failure_prob,
                r.individual_threshold,
                r.collective_threshold,
                r.rounds
            ),
            (0.2, 0.2, 0.2, 10)
        );
        let i: Preset = "intransigent".parse().unwrap();
        let i = i.params();
        assert_eq!(
            (
                i.failure_prob,
                i.individual_threshold,
                i.collective_threshold,
                i.rounds
            ),
            (0.8, 0.8, 0.8, 10)
        );
        assert!("lenient".parse::<Preset>().is_err());
    }

    #[test]
    fn grid_enumeration() {
        let spec = tiny_spec();
        let cells = spec.cells();
        assert_eq!(cells.len(), 4);
        assert_eq!(
            (cells[1].failure_prob, cells[1].individual_threshold),
            (0.2, 0.7)
        );
        assert!(cells
            .iter()
            .all(|c| c.collective_threshold == 0.5 && c.rounds == 10));
    }

    #[test]
    fn invalid_axes_rejected() {
        let mut spec = tiny_spec();
        spec.axes.collective_threshold = Some(vec![1.5]);
        assert!(spec.validate().is_err());
        let mut spec = tiny_spec();
        spec.axes.rounds = Some(vec![0]);
        assert!(spec.validate().is_err());
        let mut spec = tiny_spec();
        spec.axes.failure_prob = Some(vec![]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn one_cell_sweep_equals_replicates() {
        let mut spec = tiny_spec();
        spec.axes = SweepAxes::default();
        let table = DimeDistributionTable::default();
        let cells = run_sweep(&spec, &table, &options(), &[], |_| Ok(())).unwrap();
        assert_eq!(cells.len(), 1);
        let params = cells[0].coordinates.apply(&spec.base);
        let set = run_replicates(
            &params,
            2,
            &table,
            GraphSource::Generate(spec.network),
            &options(),
        )
        .unwrap();
        assert_eq!(cells[0].steady_state, set.aggregate.steady_state);
    }

    #[test]
    fn cells_independent_of_execution_order_and_resume() {
        let spec = tiny_spec();
        let table = DimeDistributionTable::default();
        let mut seen = 0;
        let full = run_sweep(&spec, &table, &options(), &[], |_| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, 4);

        // resume with two cells already done, serially
        let serial = RunOptions {
            workers: Some(1),
            ..options()
        };
        let done = vec![full[3].clone(), full[0].clone()];
        let mut fresh = Vec::new();
        let resumed = run_sweep(&spec, &table, &serial, &done, |c| {
            fresh.push(c.coordinates);
            Ok(())
        })
        .unwrap();
        assert_eq!(fresh, vec![full[1].coordinates, full[2].coordinates]);
        assert_eq!(resumed, full);

        // a single cell computed in isolation matches too
        let c = full[2].coordinates;
        let params = c.apply(&spec.base);
        let g = replicate_graph(&spec.network, params.seed).unwrap();
        let r = run(&params, &g, &table, &options()).unwrap();
        assert_eq!(r.steady_state, full[2].replicate_steady_states[0]);
    }

    #[test]
    fn callback_error_aborts() {
        let spec = tiny_spec();
        let err = run_sweep(
            &spec,
            &DimeDistributionTable::default(),
            &options(),
            &[],
            |_| Err(Error::config("disk full")),
        )
        .unwrap_err();
        assert!(err.to_string().contains("disk full"));
    }

    #[test]
    fn battery_covers_every_variant() {
        let spec = tiny_spec();
        let rows = initial_condition_battery(
            &spec.base,
            1,
            &DimeDistributionTable::default(),
            &spec.network,
            &options(),
        )
        .unwrap();
        let ics: Vec<_> = rows.iter().map(|r| r.initial_condition).collect();
        assert_eq!(ics, InitialCondition::ALL.to_vec());
    }
}
