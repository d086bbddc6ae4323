//! Agent state, the DIME regression update and the decision rules.
//!
//! DIME scalars live on `[0, 100]`. Each step an agent adds a linear response
//! to its perceived outcome `B`, its orientation `x^c` and their product,
//! plus noise, then saturates back into range:
//!
//! ```text
//! X' = clamp(X + beta_X * B + lambda_X * x^c + gamma_X * B * x^c + omega_X, 0, 100)
//! ```

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

pub const DIME_MIN: f64 = 0.0;
pub const DIME_MAX: f64 = 100.0;

/// Saturation into `[0, 100]`.
#[inline]
pub fn saturate(x: f64) -> f64 {
    x.clamp(DIME_MIN, DIME_MAX)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dimension {
    Disidentification,
    Innovation,
    Moralisation,
    Energisation,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Disidentification,
        Dimension::Innovation,
        Dimension::Moralisation,
        Dimension::Energisation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Dimension::Disidentification => 'D',
            Dimension::Innovation => 'I',
            Dimension::Moralisation => 'M',
            Dimension::Energisation => 'E',
        }
    }
}

/// The four DIME scalars of one agent, in D, I, M, E order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dime(pub [f64; 4]);

impl Dime {
    pub fn new(
        disidentification: f64,
        innovation: f64,
        moralisation: f64,
        energisation: f64,
    ) -> Self {
        Dime([disidentification, innovation, moralisation, energisation])
    }

    pub fn disidentification(&self) -> f64 {
        self.0[0]
    }

    pub fn innovation(&self) -> f64 {
        self.0[1]
    }

    pub fn moralisation(&self) -> f64 {
        self.0[2]
    }

    pub fn energisation(&self) -> f64 {
        self.0[3]
    }

    pub fn saturated(self) -> Self {
        Dime(self.0.map(saturate))
    }

    pub fn in_range(&self) -> bool {
        self.0.iter().all(|v| (DIME_MIN..=DIME_MAX).contains(v))
    }
}

impl Index<Dimension> for Dime {
    type Output = f64;

    fn index(&self, dim: Dimension) -> &f64 {
        &self.0[dim.index()]
    }
}

impl IndexMut<Dimension> for Dime {
    fn index_mut(&mut self, dim: Dimension) -> &mut f64 {
        &mut self.0[dim.index()]
    }
}

/// Protest tactic: the orientation an agent holds, or the last one it used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tactic {
    Radical,
    Conventional,
}

impl Tactic {
    /// -1 for radical, +1 for conventional.
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Tactic::Radical => -1.0,
            Tactic::Conventional => 1.0,
        }
    }

    #[inline]
    pub fn flipped(self) -> Tactic {
        match self {
            Tactic::Radical => Tactic::Conventional,
            Tactic::Conventional => Tactic::Radical,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Radical,
    Inactive,
    Conventional,
}

impl Action {
    /// -1, 0 or +1.
    pub fn value(self) -> i8 {
        match self {
            Action::Radical => -1,
            Action::Inactive => 0,
            Action::Conventional => 1,
        }
    }

    pub fn tactic(self) -> Option<Tactic> {
        match self {
            Action::Radical => Some(Tactic::Radical),
            Action::Inactive => None,
            Action::Conventional => Some(Tactic::Conventional),
        }
    }

    pub fn from_tactic(tactic: Tactic) -> Action {
        match tactic {
            Tactic::Radical => Action::Radical,
            Tactic::Conventional => Action::Conventional,
        }
    }
}

/// How the activation rule treats `D == mean(I, M, E)`.
///
/// `Strict` is the rule as written (`D > mean` means latent, so a tie acts).
/// `Inclusive` makes a tie latent; it exists for sensitivity analysis only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationTie {
    #[default]
    Strict,
    Inclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub will_act: bool,
    pub will_innovate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentState {
    pub dime: Dime,
    pub perceived: Signal,
    pub orientation: Tactic,
    pub action: Action,
    pub last_active: Tactic,
    pub will_act: bool,
    pub will_innovate: bool,
}

impl AgentState {
    /// Builds the `t = 0` state from the initial decision flags: orientation
    /// is `C * x^h` and the action is the orientation when acting.
    pub fn new(dime: Dime, will_act: bool, will_innovate: bool, last_active: Tactic) -> Self {
        let orientation = if will_innovate {
            last_active.flipped()
        } else {
            last_active
        };
        let action = if will_act {
            Action::from_tactic(orientation)
        } else {
            Action::Inactive
        };
        AgentState {
            dime: dime.saturated(),
            perceived: Signal::Success,
            orientation,
            action,
            last_active,
            will_act,
            will_innovate,
        }
    }

    /// Applies the regression update using the orientation held before this
    /// step's decision phase. Leaves every other field untouched.
    #[inline]
    pub fn update_dime(&mut self, coeffs: &DimeCoefficients, perceived: Signal, noise: [f64; 4]) {
        let b = perceived.value();
        let xc = self.orientation.value();
        let bx = b * xc;
        for k in 0..4 {
            let delta =
                coeffs.beta[k] * b + coeffs.lambda[k] * xc + coeffs.gamma[k] * bx + noise[k];
            self.dime.0[k] = saturate(self.dime.0[k] + delta);
        }
    }

    #[inline]
    pub fn decide(&self, tie: ActivationTie) -> Decision {
        decide(&self.dime, tie)
    }

    /// Records the decision and advances last-active action, orientation and
    /// action, in that order. `self.action` must still hold the previous
    /// step's action.
    #[inline]
    pub fn apply_decision(&mut self, decision: Decision) {
        if let Some(tactic) = self.action.tactic() {
            self.last_active = tactic;
        }
        self.orientation = if decision.will_innovate {
            self.last_active.flipped()
        } else {
            self.last_active
        };
        self.action = if decision.will_act {
            Action::from_tactic(self.orientation)
        } else {
            Action::Inactive
        };
        self.will_act = decision.will_act;
        self.will_innovate = decision.will_innovate;
    }

    #[inline]
    pub fn classify(&self) -> AgentType {
        AgentType::classify(self.will_act, self.will_innovate, self.last_active)
    }
}

/// Activation and innovation decisions from freshly updated DIME values.
#[inline]
pub fn decide(dime: &Dime, tie: ActivationTie) -> Decision {
    let d = dime.disidentification();
    let threshold = (dime.innovation() + dime.moralisation() + dime.energisation()) / 3.0;
    let latent = match tie {
        ActivationTie::Strict => d > threshold,
        ActivationTie::Inclusive => d >= threshold,
    };
    Decision {
        will_act: !latent,
        will_innovate: dime.innovation() > (dime.moralisation() + dime.energisation()) / 2.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    ActiveConventional,
    ActiveInnovator,
    ActiveRadical,
    LatentConventional,
    LatentInnovator,
    LatentRadical,
}

impl AgentType {
    /// Enum order; also the tie-break order for dominance.
    pub const ALL: [AgentType; 6] = [
        AgentType::ActiveConventional,
        AgentType::ActiveInnovator,
        AgentType::ActiveRadical,
        AgentType::LatentConventional,
        AgentType::LatentInnovator,
        AgentType::LatentRadical,
    ];

    pub fn classify(will_act: bool, will_innovate: bool, last_active: Tactic) -> AgentType {
        match (will_act, will_innovate, last_active) {
            (true, true, _) => AgentType::ActiveInnovator,
            (true, false, Tactic::Conventional) => AgentType::ActiveConventional,
            (true, false, Tactic::Radical) => AgentType::ActiveRadical,
            (false, true, _) => AgentType::LatentInnovator,
            (false, false, Tactic::Conventional) => AgentType::LatentConventional,
            (false, false, Tactic::Radical) => AgentType::LatentRadical,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            AgentType::ActiveConventional => "AcCo",
            AgentType::ActiveInnovator => "AcIn",
            AgentType::ActiveRadical => "AcRa",
            AgentType::LatentConventional => "LaCo",
            AgentType::LatentInnovator => "LaIn",
            AgentType::LatentRadical => "LaRa",
        }
    }

    /// Snake-case name used in CSV headers and rows.
    pub fn name(self) -> &'static str {
        match self {
            AgentType::ActiveConventional => "active_conventional",
            AgentType::ActiveInnovator => "active_innovator",
            AgentType::ActiveRadical => "active_radical",
            AgentType::LatentConventional => "latent_conventional",
            AgentType::LatentInnovator => "latent_innovator",
            AgentType::LatentRadical => "latent_radical",
        }
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Regression gradients for one agent (or one run), indexed D, I, M, E.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimeCoefficients {
    /// Response to the perceived outcome.
    pub beta: [f64; 4],
    /// Response to orientation.
    pub lambda: [f64; 4],
    /// Response to outcome x orientation.
    pub gamma: [f64; 4],
}

impl DimeCoefficients {
    /// Deterministic increment excluding noise.
    pub fn increment(&self, perceived: Signal, orientation: Tactic) -> [f64; 4] {
        let b = perceived.value();
        let xc = orientation.value();
        std::array::from_fn(|k| self.beta[k] * b + self.lambda[k] * xc + self.gamma[k] * b * xc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalParams {
    pub mean: f64,
    pub sd: f64,
}

impl NormalParams {
    pub const fn new(mean: f64, sd: f64) -> Self {
        NormalParams { mean, sd }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // validated up front; sd >= 0 and finite
        Normal::new(self.mean, self.sd)
            .expect("validated normal parameters")
            .sample(rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionDistribution {
    pub initial: NormalParams,
    pub beta: NormalParams,
    pub lambda: NormalParams,
    pub gamma: NormalParams,
}

/// Normal distributions for initial DIME values and regression gradients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimeDistributionTable {
    #[serde(rename = "D")]
    pub disidentification: DimensionDistribution,
    #[serde(rename = "I")]
    pub innovation: DimensionDistribution,
    #[serde(rename = "M")]
    pub moralisation: DimensionDistribution,
    #[serde(rename = "E")]
    pub energisation: DimensionDistribution,
}

impl Default for DimeDistributionTable {
    fn default() -> Self {
        const fn row(
            init: (f64, f64),
            beta: (f64, f64),
            lambda: (f64, f64),
            gamma: (f64, f64),
        ) -> DimensionDistribution {
            DimensionDistribution {
                initial: NormalParams::new(init.0, init.1),
                beta: NormalParams::new(beta.0, beta.1),
                lambda: NormalParams::new(lambda.0, lambda.1),
                gamma: NormalParams::new(gamma.0, gamma.1),
            }
        }
        DimeDistributionTable {
            disidentification: row((25.0, 20.0), (2.33, 1.0), (-7.33, 1.0), (-0.67, 1.0)),
            innovation: row((16.67, 30.0), (0.0, 0.67), (0.33, 0.67), (1.67, 0.67)),
            moralisation: row((58.33, 21.67), (1.33, 1.0), (-0.33, 1.0), (0.33, 1.0)),
            energisation: row((66.67, 15.0), (3.33, 0.67), (1.67, 0.67), (1.67, 0.67)),
        }
    }
}

impl DimeDistributionTable {
    pub fn rows(&self) -> [&DimensionDistribution; 4] {
        [
            &self.disidentification,
            &self.innovation,
            &self.moralisation,
            &self.energisation,
        ]
    }

    pub fn row_mut(&mut self, dim: Dimension) -> &mut DimensionDistribution {
        match dim {
            Dimension::Disidentification => &mut self.disidentification,
            Dimension::Innovation => &mut self.innovation,
            Dimension::Moralisation => &mut self.moralisation,
            Dimension::Energisation => &mut self.energisation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (dim, row) in Dimension::ALL.iter().zip(self.rows()) {
            for (name, p) in [
                ("initial", row.initial),
                ("beta", row.beta),
                ("lambda", row.lambda),
                ("gamma", row.gamma),
            ] {
                if !p.mean.is_finite() || !p.sd.is_finite() || p.sd < 0.0 {
                    return Err(Error::config(format!(
                        "table.{}.{name}: need finite mean and finite sd >= 0, got mean={} sd={}",
                        dim.letter(),
                        p.mean,
                        p.sd
                    )));
                }
            }
        }
        Ok(())
    }

    /// The mean gradients, i.e. the coefficients an "average" agent would get.
    pub fn mean_coefficients(&self) -> DimeCoefficients {
        let rows = self.rows();
        DimeCoefficients {
            beta: rows.map(|r| r.beta.mean),
            lambda: rows.map(|r| r.lambda.mean),
            gamma: rows.map(|r| r.gamma.mean),
        }
    }

    /// Draws 12 normals: beta for D, I, M, E, then lambda, then gamma.
    pub fn sample_coefficients<R: Rng + ?Sized>(&self, rng: &mut R) -> DimeCoefficients {
        let rows = self.rows();
        let beta = rows.map(|r| r.beta.sample(rng));
        let lambda = rows.map(|r| r.lambda.sample(rng));
        let gamma = rows.map(|r| r.gamma.sample(rng));
        DimeCoefficients {
            beta,
            lambda,
            gamma,
        }
    }

    /// Draws D, I, M, E initial values and saturates them.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Dime {
        Dime(self.rows().map(|r| saturate(r.initial.sample(rng))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(dime: Dime, orientation: Tactic) -> AgentState {
        let mut s = AgentState::new(dime, true, false, orientation);
        s.orientation = orientation;
        s
    }

    #[test]
    fn disidentification_update_with_mean_coefficients() {
        let coeffs = DimeDistributionTable::default().mean_coefficients();
        let mut s = agent(Dime::new(50.0, 50.0, 50.0, 50.0), Tactic::Conventional);
        s.update_dime(&coeffs, Signal::Success, [0.0; 4]);
        // 50 - 2.33 - 7.33 + 0.67
        assert!((s.dime.disidentification() - 41.01).abs() < 1e-9);
    }

    #[test]
    fn update_saturates_both_ends() {
        let coeffs = DimeCoefficients {
            beta: [5.0, -5.0, 0.0, 0.0],
            lambda: [0.0; 4],
            gamma: [0.0; 4],
        };
        let mut s = agent(Dime::new(99.9, 0.5, 10.0, 10.0), Tactic::Conventional);
        s.update_dime(&coeffs, Signal::Failure, [0.0; 4]);
        assert_eq!(s.dime.disidentification(), 100.0);
        assert_eq!(s.dime.innovation(), 0.0);
    }

    #[test]
    fn update_leaves_other_fields_alone() {
        let coeffs = DimeDistributionTable::default().mean_coefficients();
        let before = agent(Dime::new(30.0, 40.0, 50.0, 60.0), Tactic::Radical);
        let mut after = before;
        after.update_dime(&coeffs, Signal::Failure, [0.3, 0.1, 0.9, 0.5]);
        assert_eq!(after.orientation, before.orientation);
        assert_eq!(after.action, before.action);
        assert_eq!(after.last_active, before.last_active);
        assert_eq!(after.perceived, before.perceived);
        assert_eq!(
            (after.will_act, after.will_innovate),
            (before.will_act, before.will_innovate)
        );
    }

    #[test]
    fn opposite_outcomes_net_to_twice_the_orientation_gradient() {
        let coeffs = DimeDistributionTable::default().mean_coefficients();
        for orientation in [Tactic::Conventional, Tactic::Radical] {
            let mut s = agent(Dime::new(50.0, 50.0, 50.0, 50.0), orientation);
            s.update_dime(&coeffs, Signal::Failure, [0.0; 4]);
            s.update_dime(&coeffs, Signal::Success, [0.0; 4]);
            for k in 0..4 {
                let expected = 50.0 + 2.0 * coeffs.lambda[k] * orientation.value();
                assert!((s.dime.0[k] - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn activation_is_strict() {
        let d = decide(&Dime::new(50.0, 50.0, 50.0, 50.0), ActivationTie::Strict);
        assert!(d.will_act);
        let d = decide(&Dime::new(50.0, 50.0, 50.0, 50.0), ActivationTie::Inclusive);
        assert!(!d.will_act);
        let d = decide(&Dime::new(80.0, 10.0, 60.0, 65.0), ActivationTie::Strict);
        assert!(!d.will_act);
    }

    #[test]
    fn innovation_is_strict() {
        assert!(decide(&Dime::new(0.0, 60.0, 50.0, 50.0), ActivationTie::Strict).will_innovate);
        assert!(!decide(&Dime::new(0.0, 50.0, 50.0, 50.0), ActivationTie::Strict).will_innovate);
    }

    #[test]
    fn innovating_from_conventional_acts_radically() {
        let mut s = AgentState::new(Dime::default(), true, false, Tactic::Conventional);
        assert_eq!(s.action, Action::Conventional);
        s.apply_decision(Decision {
            will_act: true,
            will_innovate: true,
        });
        assert_eq!(s.last_active, Tactic::Conventional);
        assert_eq!(s.orientation, Tactic::Radical);
        assert_eq!(s.action, Action::Radical);
    }

    #[test]
    fn inactivity_preserves_last_active() {
        let mut s = AgentState::new(Dime::default(), false, false, Tactic::Radical);
        assert_eq!(s.action, Action::Inactive);
        s.apply_decision(Decision {
            will_act: false,
            will_innovate: false,
        });
        assert_eq!(s.last_active, Tactic::Radical);
        assert_eq!(s.orientation, Tactic::Radical);
        assert_eq!(s.action, Action::Inactive);
    }

    #[test]
    fn keeping_radical_stays_radical() {
        let mut s = AgentState::new(Dime::default(), true, false, Tactic::Radical);
        s.apply_decision(Decision {
            will_act: true,
            will_innovate: false,
        });
        assert_eq!(s.action, Action::Radical);
    }

    #[test]
    fn last_active_updates_from_previous_action_before_flip() {
        // previous action radical, last active conventional: x^h must pick up
        // the radical action first, then innovation flips it back.
        let mut s = AgentState::new(Dime::default(), true, true, Tactic::Conventional);
        assert_eq!(s.action, Action::Radical);
        s.apply_decision(Decision {
            will_act: true,
            will_innovate: true,
        });
        assert_eq!(s.last_active, Tactic::Radical);
        assert_eq!(s.action, Action::Conventional);
    }

    #[test]
    fn classification_rows() {
        use AgentType::*;
        assert_eq!(
            AgentType::classify(true, false, Tactic::Conventional),
            ActiveConventional
        );
        assert_eq!(
            AgentType::classify(false, false, Tactic::Radical),
            LatentRadical
        );
        assert_eq!(
            AgentType::classify(true, true, Tactic::Radical),
            ActiveInnovator
        );
        assert_eq!(
            AgentType::classify(true, true, Tactic::Conventional),
            ActiveInnovator
        );
        assert_eq!(
            AgentType::classify(true, false, Tactic::Radical),
            ActiveRadical
        );
        assert_eq!(
            AgentType::classify(false, false, Tactic::Conventional),
            LatentConventional
        );
        assert_eq!(
            AgentType::classify(false, true, Tactic::Radical),
            LatentInnovator
        );
    }

    #[test]
    fn default_table_matches_published_values() {
        let t = DimeDistributionTable::default();
        t.validate().unwrap();
        let init: Vec<_> = t
            .rows()
            .iter()
            .map(|r| (r.initial.mean, r.initial.sd))
            .collect();
        assert_eq!(
            init,
            vec![(25.0, 20.0), (16.67, 30.0), (58.33, 21.67), (66.67, 15.0)]
        );
        let c = t.mean_coefficients();
        assert_eq!(c.beta, [2.33, 0.0, 1.33, 3.33]);
        assert_eq!(c.lambda, [-7.33, 0.33, -0.33, 1.67]);
        assert_eq!(c.gamma, [-0.67, 1.67, 0.33, 1.67]);
        let sds: Vec<_> = t
            .rows()
            .iter()
            .map(|r| (r.beta.sd, r.lambda.sd, r.gamma.sd))
            .collect();
        assert_eq!(
            sds,
            vec![
                (1.0, 1.0, 1.0),
                (0.67, 0.67, 0.67),
                (1.0, 1.0, 1.0),
                (0.67, 0.67, 0.67)
            ]
        );
    }

    #[test]
    fn negative_sd_rejected() {
        let mut t = DimeDistributionTable::default();
        t.row_mut(Dimension::Moralisation).gamma.sd = -1.0;
        let err = t.validate().unwrap_err().to_string();
        assert!(err.contains("table.M.gamma"), "{err}");
    }
}
