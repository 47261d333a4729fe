use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pair::{evaluate_pair_seats, PairStats};
use super::report::ReportRow;
use super::EvalError;
use crate::env::Layout;
use crate::math::{mean, std_dev};
use crate::policy::Policy;
use crate::population::{PartnerPopulation, Tier};

pub const DEFAULT_EVAL_EPISODES: usize = 5;

/// A held-out partner population and the pairings to play against it.
#[derive(Clone, Debug)]
pub struct EvalSuite {
    pub population: PartnerPopulation,
    pub tiers: Vec<Tier>,
    /// Episodes per (member, tier, seat).
    pub episodes: usize,
    pub seats: Vec<usize>,
    pub horizon: u32,
    pub seed: u64,
}

impl EvalSuite {
    /// All three tiers, both seats, five episodes per pairing. Fails when the
    /// held-out population shares a training seed with `training_seeds`.
    pub fn new(population: PartnerPopulation, training_seeds: &[u64], horizon: u32) -> Result<Self, EvalError> {
        let suite = Self {
            population,
            tiers: Tier::ALL.to_vec(),
            episodes: DEFAULT_EVAL_EPISODES,
            seats: vec![0, 1],
            horizon,
            seed: 0,
        };
        suite.check_disjoint(training_seeds)?;
        Ok(suite)
    }

    pub fn check_disjoint(&self, training_seeds: &[u64]) -> Result<(), EvalError> {
        let shared: Vec<u64> = self.population.seeds().into_iter().filter(|s| training_seeds.contains(s)).collect();
        if shared.is_empty() {
            Ok(())
        } else {
            Err(EvalError::SeedOverlap(shared))
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.episodes == 0 {
            return Err(EvalError::NoEpisodes);
        }
        if self.population.is_empty() || self.tiers.is_empty() || self.seats.is_empty() {
            return Err(EvalError::InvalidSuite("suite needs members, tiers and seats".into()));
        }
        if self.seats.iter().any(|&s| s > 1) {
            return Err(EvalError::InvalidSuite(format!("seats must be 0 or 1, got {:?}", self.seats)));
        }
        Ok(())
    }
}

/// Returns of one (member, tier) pairing over every requested seat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub member: usize,
    pub tier: Tier,
    pub returns: Vec<f64>,
    pub agent_seats: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    /// One row per tier, then the `all` aggregate.
    pub rows: Vec<ReportRow>,
    pub cells: Vec<EvalCell>,
}

impl EvalOutcome {
    pub fn row(&self, partner_type: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.partner_type == partner_type)
    }
}

/// Play `agent` with every member of the suite at every tier, in every seat.
pub fn evaluate_vs_population(
    agent: &mut dyn Policy,
    method: &str,
    layout: &Layout,
    suite: &EvalSuite,
) -> Result<EvalOutcome, EvalError> {
    suite.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let mut cells = Vec::new();
    for member in 0..suite.population.len() {
        for &tier in &suite.tiers {
            let mut partner = suite.population.policy(member, tier);
            let PairStats { returns, agent_seats } = evaluate_pair_seats(
                agent,
                &mut partner,
                layout,
                suite.horizon,
                suite.episodes,
                rng.random(),
                &suite.seats,
            )?;
            cells.push(EvalCell { member, tier, returns, agent_seats });
        }
    }

    let row = |partner_type: &str, returns: Vec<f64>| ReportRow {
        layout: layout.name.clone(),
        method: method.to_string(),
        partner_type: partner_type.to_string(),
        mean: mean(&returns),
        std: std_dev(&returns),
        n: returns.len(),
    };
    let mut rows = Vec::new();
    for &tier in &suite.tiers {
        let returns: Vec<f64> = cells.iter().filter(|c| c.tier == tier).flat_map(|c| c.returns.clone()).collect();
        rows.push(row(tier.name(), returns));
    }
    rows.push(row("all", cells.iter().flat_map(|c| c.returns.clone()).collect()));
    Ok(EvalOutcome { rows, cells })
}
