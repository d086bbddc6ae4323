//! Authority broadcast and the re-framing pipeline.
//!
//! A failure broadcast passes through two stages before it reaches an agent's
//! DIME update: individual re-framing (a random test against the agent's
//! identification) and then `R` synchronous rounds of collective re-framing
//! over the social graph. Re-framing only ever turns failure into success.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::network::SocialGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    Success,
    Failure,
}

impl Signal {
    /// -1 for success, +1 for failure.
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Signal::Success => -1.0,
            Signal::Failure => 1.0,
        }
    }

    #[inline]
    pub fn is_success(self) -> bool {
        self == Signal::Success
    }
}

/// Failure with probability `p`. Consumes exactly one uniform draw.
pub fn authority_signal<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Signal {
    if rng.random::<f64>() < p {
        Signal::Failure
    } else {
        Signal::Success
    }
}

/// Success if the authority said so, or if `(100 - D) * z / 100 > F`.
#[inline]
pub fn individual_reframe(
    authority: Signal,
    disidentification: f64,
    threshold: f64,
    z: f64,
) -> Signal {
    if authority.is_success() || (100.0 - disidentification) * z / 100.0 > threshold {
        Signal::Success
    } else {
        Signal::Failure
    }
}

/// Fraction of `agent`'s neighbours at success in `round`; 0 when isolated.
#[inline]
pub fn neighbourhood_success_fraction(agent: usize, round: &[Signal], graph: &SocialGraph) -> f64 {
    let neighbours = graph.neighbours(agent);
    if neighbours.is_empty() {
        return 0.0;
    }
    let successes = neighbours
        .iter()
        .filter(|&&k| round[k as usize].is_success())
        .count();
    successes as f64 / neighbours.len() as f64
}

/// Runs `rounds` synchronous collective re-framing rounds and returns the
/// final perceived signals.
pub fn collective_reframe(
    after_individual: &[Signal],
    graph: &SocialGraph,
    phi: f64,
    rounds: u32,
) -> Vec<Signal> {
    let mut reframer = CollectiveReframer::new(after_individual.len());
    reframer.run(after_individual, graph, phi, rounds).to_vec()
}

/// Double-buffered collective re-framing, reusable across time steps.
#[derive(Clone, Debug)]
pub struct CollectiveReframer {
    current: Vec<Signal>,
    next: Vec<Signal>,
    last_flip_rounds: u32,
}

impl CollectiveReframer {
    pub fn new(agents: usize) -> Self {
        CollectiveReframer {
            current: vec![Signal::Success; agents],
            next: vec![Signal::Success; agents],
            last_flip_rounds: 0,
        }
    }

    /// Round `j + 1` reads only round `j`. Stops early once a round produces
    /// no flips: every later round would be identical.
    pub fn run(
        &mut self,
        initial: &[Signal],
        graph: &SocialGraph,
        phi: f64,
        rounds: u32,
    ) -> &[Signal] {
        debug_assert_eq!(initial.len(), graph.node_count());
        self.current.clear();
        self.current.extend_from_slice(initial);
        self.next.resize(initial.len(), Signal::Success);
        self.last_flip_rounds = 0;

        for _ in 0..rounds {
            let mut flipped = false;
            for (i, slot) in self.next.iter_mut().enumerate() {
                let q = self.current[i];
                *slot = if q == Signal::Failure
                    && neighbourhood_success_fraction(i, &self.current, graph) > phi
                {
                    flipped = true;
                    Signal::Success
                } else {
                    q
                };
            }
            if !flipped {
                break;
            }
            self.last_flip_rounds += 1;
            std::mem::swap(&mut self.current, &mut self.next);
        }
        &self.current
    }

    /// Number of rounds in the last call that flipped at least one agent.
    pub fn last_flip_rounds(&self) -> u32 {
        self.last_flip_rounds
    }
}
