//! Gradient-free policy search: a genetic algorithm over flattened GNN
//! parameter vectors, maximizing mean episode reward across a fixed set of
//! training environments.
//!
//! Every genome in a run is evaluated on the same episode realizations
//! (seeds derived from (base, environment index, repeat index)), so fitness
//! comparisons are paired and elitism makes the best-per-generation history
//! non-decreasing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::{self, BudgetMode, Controller};
use crate::error::Result;
use crate::net::SharedScenario;
use crate::policy::{ActorGnn, PolicyGenome};
use crate::rng::{self, episode_seed, tag};

/// Genetic-algorithm settings. Defaults: 100 generations,
/// population 50, elite ratio 0.01, crossover probability 0.5, mutation
/// probability 0.1. Selection scheme and mutation magnitude are ours:
/// tournament of 2 and per-gene N(0, 0.1) noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub generations: usize,
    pub population: usize,
    pub elite_ratio: f64,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub mutation_sigma: f64,
    pub init_sigma: f64,
    /// Episodes per environment per evaluation.
    pub repeats: usize,
    /// Hidden width of the evolved actor.
    pub hidden: usize,
    /// Number of graph-conv layers.
    pub layers: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            generations: 100,
            population: 50,
            elite_ratio: 0.01,
            crossover_prob: 0.5,
            mutation_prob: 0.1,
            mutation_sigma: 0.1,
            init_sigma: 0.5,
            repeats: 8,
            hidden: 8,
            layers: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn elite_count(&self) -> usize {
        ((self.elite_ratio * self.population as f64).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.population < 2 {
            return Err(Error::InvalidConfig("population must be >= 2".into()));
        }
        for (name, p) in [
            ("elite_ratio", self.elite_ratio),
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1]")));
            }
        }
        if self.generations == 0 || self.repeats == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(Error::InvalidConfig(
                "generations, repeats, hidden and layers must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Fitness of one genome: mean cumulative reward over every environment and
/// repeat, plus the per-environment means. `genome_id` is a caller-managed
/// slot for tracking population members; `evaluate_genome` leaves it 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessRecord {
    pub genome_id: usize,
    pub mean_reward: f64,
    pub per_env: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub best: PolicyGenome,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
}

/// Mean episode reward of `genome` over `env_set` x `repeats` episodes with
/// common random numbers: episode seeds depend only on (seed_base, env
/// index, repeat index), never on the genome.
pub fn evaluate_genome(
    genome: &PolicyGenome,
    env_set: &[SharedScenario],
    repeats: usize,
    seed_base: u64,
) -> Result<FitnessRecord> {
    let mut actor = ActorGnn::from_genome(genome)?;
    let mut per_env = Vec::with_capacity(env_set.len());
    for (env_idx, scenario) in env_set.iter().enumerate() {
        let mut total = 0.0;
        for rep in 0..repeats {
            let seed = episode_seed(seed_base, env_idx as u64, rep as u64);
            let outcome = env::run_episode(
                SharedScenario::clone(scenario),
                seed,
                BudgetMode::Stochastic,
                &mut actor,
            )?;
            total += outcome.cumulative_reward;
        }
        per_env.push(total / repeats as f64);
    }
    let mean_reward = per_env.iter().sum::<f64>() / per_env.len().max(1) as f64;
    Ok(FitnessRecord {
        genome_id: 0,
        mean_reward,
        per_env,
    })
}

/// Uniform per-gene crossover.
pub fn crossover(a: &PolicyGenome, b: &PolicyGenome, rng: &mut impl Rng) -> Result<PolicyGenome> {
    if a.values.len() != b.values.len() || a.layout != b.layout {
        return Err(crate::error::Error::GenomeLength {
            got: b.values.len(),
            want: a.values.len(),
        });
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&ga, &gb)| if rng.random_bool(0.5) { ga } else { gb })
        .collect();
    Ok(PolicyGenome {
        layout: a.layout,
        values,
    })
}

/// Adds N(0, sigma) noise to each gene independently with probability `prob`.
pub fn mutate(genome: &mut PolicyGenome, prob: f64, sigma: f64, rng: &mut impl Rng) {
    for v in &mut genome.values {
        if rng.random_bool(prob) {
            *v += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

fn evaluate_population(
    population: &[PolicyGenome],
    env_set: &[SharedScenario],
    repeats: usize,
    seed_base: u64,
) -> Result<Vec<f64>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        population
            .par_iter()
            .map(|g| evaluate_genome(g, env_set, repeats, seed_base).map(|r| r.mean_reward))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        population
            .iter()
            .map(|g| evaluate_genome(g, env_set, repeats, seed_base).map(|r| r.mean_reward))
            .collect()
    }
}

/// Rank order, best first; ties break toward the lower index.
fn rank(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| {
        fitness[b]
            .partial_cmp(&fitness[a])
            .expect("finite fitness")
            .then(a.cmp(&b))
    });
    order
}

/// Size-2 tournament: draw two individuals, keep the fitter.
fn tournament(fitness: &[f64], rng: &mut impl Rng) -> usize {
    let a = rng.random_range(0..fitness.len());
    let b = rng.random_range(0..fitness.len());
    if fitness[b] > fitness[a] {
        b
    } else {
        a
    }
}

/// Runs the generational loop and returns the best genome with the
/// per-generation convergence history.
pub fn evolve(config: &GaConfig, env_set: &[SharedScenario]) -> Result<TrainResult> {
    config.validate()?;
    if env_set.is_empty() {
        return Err(crate::error::Error::InvalidConfig(
            "evolve needs at least one training environment".into(),
        ));
    }

    let mut init_rng = rng::stream(config.seed, &[tag::GA_INIT]);
    let mut population: Vec<PolicyGenome> = (0..config.population)
        .map(|_| {
            ActorGnn::random(
                config.hidden,
                config.layers,
                config.init_sigma,
                &mut init_rng,
            )
            .genome()
        })
        .collect();

    let mut breed_rng: ChaCha8Rng = rng::stream(config.seed, &[tag::GA_BREED]);
    let eval_seed_base = rng::mix(config.seed, &[0xe7a1]);
    let elite_count = config.elite_count().min(config.population);

    let mut history = Vec::with_capacity(config.generations);
    let mut best_ever: Option<(f64, PolicyGenome)> = None;

    for generation in 0..config.generations {
        let fitness = evaluate_population(&population, env_set, config.repeats, eval_seed_base)?;
        let order = rank(&fitness);
        let best_fitness = fitness[order[0]];
        let mean_fitness = fitness.iter().sum::<f64>() / fitness.len() as f64;
        history.push(GenerationStats {
            generation,
            best_fitness,
            mean_fitness,
        });
        if best_ever.as_ref().is_none_or(|(f, _)| best_fitness > *f) {
            best_ever = Some((best_fitness, population[order[0]].clone()));
        }

        if generation + 1 == config.generations {
            break;
        }

        let mut next: Vec<PolicyGenome> = order[..elite_count]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < config.population {
            let pa = tournament(&fitness, &mut breed_rng);
            let pb = tournament(&fitness, &mut breed_rng);
            let mut child = if breed_rng.random_bool(config.crossover_prob) {
                crossover(&population[pa], &population[pb], &mut breed_rng)?
            } else {
                population[pa].clone()
            };
            mutate(
                &mut child,
                config.mutation_prob,
                config.mutation_sigma,
                &mut breed_rng,
            );
            next.push(child);
        }
        population = next;
    }

    let (best_fitness, best) = best_ever.expect("at least one generation ran");
    Ok(TrainResult {
        best,
        best_fitness,
        history,
    })
}

/// Convenience: mean reward of an arbitrary controller over the same
/// common-random-number episode grid used for genome evaluation.
pub fn evaluate_controller(
    controller: &mut dyn Controller,
    env_set: &[SharedScenario],
    repeats: usize,
    seed_base: u64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (env_idx, scenario) in env_set.iter().enumerate() {
        for rep in 0..repeats {
            let seed = episode_seed(seed_base, env_idx as u64, rep as u64);
            let outcome = env::run_episode(
                SharedScenario::clone(scenario),
                seed,
                BudgetMode::Stochastic,
                controller,
            )?;
            total += outcome.cumulative_reward;
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}
