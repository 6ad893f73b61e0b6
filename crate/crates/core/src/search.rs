//! Search strategies wrapped with principle filtering, with evaluation
//! and cost accounting.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricTable;
use crate::principles::{passes_filters, Principle};
use crate::space::{Architecture, Space};
use crate::surrogate::SurrogateModel;

/// Accuracy-like score of an architecture; may be called from many threads.
pub trait Scorer: Sync {
    fn score(&self, space: &Space, arch: &Architecture) -> Result<f64>;
}

impl Scorer for SurrogateModel {
    fn score(&self, space: &Space, arch: &Architecture) -> Result<f64> {
        Ok(SurrogateModel::score(self, space, arch))
    }
}

impl Scorer for MetricTable {
    fn score(&self, space: &Space, arch: &Architecture) -> Result<f64> {
        let id = space.arch_id(arch);
        self.accuracy(id).ok_or(Error::MissingMetric(id))
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Evolution,
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub budget: usize,
    pub seed: u64,
    pub per_arch_hours: f64,
    pub population: usize,
    pub tournament: usize,
    /// Consecutive filtered-out mutants before evolution proposes a random
    /// architecture instead.
    pub max_consecutive_discards: usize,
}

impl SearchConfig {
    pub fn new(strategy: Strategy, budget: usize, seed: u64) -> Self {
        SearchConfig {
            strategy,
            budget,
            seed,
            per_arch_hours: 1.0,
            population: 50,
            tournament: 10,
            max_consecutive_discards: 100,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct Evaluated {
    pub arch_id: u64,
    pub score: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SearchTrace {
    pub version: u32,
    pub strategy: Strategy,
    pub seed: u64,
    pub budget: usize,
    /// Ids of the filter-mode principles applied.
    pub filters: Vec<String>,
    /// In proposal order.
    pub evaluated: Vec<Evaluated>,
    /// Proposals rejected by a filter, in proposal order.
    pub discarded: Vec<u64>,
    pub discarded_by_filter: usize,
    pub best_so_far: Vec<f64>,
    pub best: Option<Evaluated>,
    pub per_arch_hours: f64,
    pub estimated_cost: f64,
}

impl SearchTrace {
    /// 1-based count of evaluations after which the best score first
    /// reached `target`.
    pub fn evaluations_to_reach(&self, target: f64) -> Option<usize> {
        self.best_so_far.iter().position(|&b| b >= target).map(|i| i + 1)
    }
}

/// Candidates violating a filter-mode principle are discarded before
/// scoring and use no budget. Stops after `budget` evaluations or when the
/// random proposal stream runs dry.
pub fn filtered_search(
    space: &Space,
    scorer: &dyn Scorer,
    principles: &[Principle],
    config: &SearchConfig,
) -> Result<SearchTrace> {
    if config.budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    let mut run = Run {
        space,
        scorer,
        principles,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        proposals: Proposals::new(space.size()),
        trace: SearchTrace {
            version: 1,
            strategy: config.strategy,
            seed: config.seed,
            budget: config.budget,
            filters: principles
                .iter()
                .filter(|p| p.mode == crate::principles::Mode::Filter)
                .map(|p| p.id.clone())
                .collect(),
            evaluated: Vec::new(),
            discarded: Vec::new(),
            discarded_by_filter: 0,
            best_so_far: Vec::new(),
            best: None,
            per_arch_hours: config.per_arch_hours,
            estimated_cost: 0.0,
        },
    };
    match config.strategy {
        Strategy::Random => {
            run.random_phase(config.budget)?;
        }
        Strategy::Evolution => run.evolve(config)?,
    }
    if run.trace.evaluated.is_empty() {
        return Err(Error::ExhaustedSpace);
    }
    let t = &mut run.trace;
    t.estimated_cost = t.evaluated.len() as f64 * t.per_arch_hours;
    Ok(run.trace)
}

const BATCH: usize = 64;

struct Run<'a> {
    space: &'a Space,
    scorer: &'a dyn Scorer,
    principles: &'a [Principle],
    rng: ChaCha8Rng,
    proposals: Proposals,
    trace: SearchTrace,
}

impl Run<'_> {
    fn admit(&mut self, arch: &Architecture) -> bool {
        if passes_filters(self.space, arch, self.principles) {
            true
        } else {
            self.trace.discarded.push(self.space.arch_id(arch));
            self.trace.discarded_by_filter += 1;
            false
        }
    }

    fn record(&mut self, arch_id: u64, score: f64) {
        let e = Evaluated { arch_id, score };
        if self.trace.best.is_none_or(|b| score > b.score) {
            self.trace.best = Some(e);
        }
        self.trace.evaluated.push(e);
        self.trace.best_so_far.push(self.trace.best.expect("just set").score);
    }

    /// Uniform proposals without replacement until `count` more evaluations
    /// or the space runs out. Returns the newly evaluated entries.
    fn random_phase(&mut self, count: usize) -> Result<Vec<Evaluated>> {
        let mut out = Vec::new();
        while out.len() < count {
            let mut batch = Vec::new();
            while batch.len() < (count - out.len()).min(BATCH) {
                let Some(index) = self.proposals.next(&mut self.rng) else { break };
                let arch = self.space.nth(index)?;
                if self.admit(&arch) {
                    batch.push(arch);
                }
            }
            if batch.is_empty() {
                break;
            }
            let scores: Vec<Result<f64>> =
                batch.par_iter().map(|a| self.scorer.score(self.space, a)).collect();
            for (arch, s) in batch.iter().zip(scores) {
                let e = Evaluated { arch_id: self.space.arch_id(arch), score: s? };
                self.record(e.arch_id, e.score);
                out.push(e);
            }
        }
        Ok(out)
    }

    /// Regularized evolution: tournament parent, one-edit mutant, oldest
    /// member retired.
    fn evolve(&mut self, config: &SearchConfig) -> Result<()> {
        let initial = self.random_phase(config.population.min(config.budget))?;
        let mut population: VecDeque<Evaluated> = initial.into_iter().collect();
        if population.is_empty() {
            return Ok(());
        }
        let mut discards = 0usize;
        while self.trace.evaluated.len() < config.budget {
            let child = if discards >= config.max_consecutive_discards {
                discards = 0;
                match self.random_phase(1)?.pop() {
                    Some(e) => e,
                    None => break,
                }
            } else {
                let pool: Vec<&Evaluated> = population
                    .iter()
                    .collect::<Vec<_>>()
                    .choose_multiple(&mut self.rng, config.tournament.min(population.len()))
                    .copied()
                    .collect();
                let parent = pool
                    .iter()
                    .max_by(|a, b| a.score.total_cmp(&b.score))
                    .expect("nonempty tournament");
                let arch = self.space.decode(parent.arch_id)?;
                let neighbors = self.space.neighbors(&arch);
                if neighbors.is_empty() {
                    discards = config.max_consecutive_discards;
                    continue;
                }
                let mutant = neighbors[self.rng.gen_range(0..neighbors.len())].0.clone();
                if !self.admit(&mutant) {
                    discards += 1;
                    continue;
                }
                discards = 0;
                let e = Evaluated {
                    arch_id: self.space.arch_id(&mutant),
                    score: self.scorer.score(self.space, &mutant)?,
                };
                self.record(e.arch_id, e.score);
                e
            };
            population.push_back(child);
            if population.len() > config.population {
                population.pop_front();
            }
        }
        Ok(())
    }
}

/// Uniform sampling of enumeration indices without replacement, by a
/// Fisher–Yates shuffle whose swaps are kept in a map.
struct Proposals {
    remaining: u128,
    swapped: HashMap<u128, u128>,
}

impl Proposals {
    fn new(size: u128) -> Self {
        Proposals { remaining: size, swapped: HashMap::new() }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> Option<u64> {
        if self.remaining == 0 {
            return None;
        }
        let last = self.remaining - 1;
        let pick = rng.gen_range(0..=last);
        let value = *self.swapped.get(&pick).unwrap_or(&pick);
        let tail = *self.swapped.get(&last).unwrap_or(&last);
        self.swapped.insert(pick, tail);
        self.swapped.remove(&last);
        self.remaining = last;
        Some(value as u64)
    }
}

/// Plain-text comparison table: one row per labeled run.
pub fn render_table(runs: &[(String, &SearchTrace)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>10} {:>10} {:>12} {:>10}", "run", "strategy", "archs", "est. hours", "best");
    for (label, t) in runs {
        let strategy = match t.strategy {
            Strategy::Random => "random",
            Strategy::Evolution => "evolution",
        };
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>10} {:>12.1} {:>10.4}",
            label,
            strategy,
            t.evaluated.len(),
            t.estimated_cost,
            t.best.map_or(f64::NAN, |b| b.score)
        );
    }
    out
}
