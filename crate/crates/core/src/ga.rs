//! Genetic-algorithm search for the maximum-likelihood cluster configuration.
//!
//! Each generation evaluates fitness concurrently, keeps the elite, and breeds
//! the rest of the population by tournament selection, uniform crossover and
//! single-gene mutation. Every child draws its random decisions from a stream
//! keyed by `(master_seed, generation, slot)`, so the result is bit-identical
//! for any number of worker threads.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::likelihood::{canonical_log_likelihood, canonicalize_in_place, ClusterConfiguration};
use crate::rng::{stream, Domain};

/// Absolute tolerance below which a best-fitness change counts as a stall.
pub const STALL_TOLERANCE: f64 = 1e-12;

/// Largest N the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_N: usize = 12;

/// Where a mutated gene may be sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationTarget {
    /// Uniform over every label `1..=N`; most draws open a new singleton.
    AnyLabel,
    /// Uniform over the child's `K` clusters plus one fresh label.
    ExistingOrNew,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub stall_generations: usize,
    /// Per-individual probability of a single-gene mutation.
    pub mutation_probability: f64,
    pub crossover_probability: f64,
    pub elite_count: usize,
    pub tournament_size: usize,
    pub mutation_target: MutationTarget,
    pub master_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self::for_scale(15).expect("15 is a supported scale")
    }
}

impl GaConfig {
    /// Defaults per bar width in minutes.
    pub fn for_scale(minutes: u32) -> Result<Self> {
        let (population_size, stall_generations) = match minutes {
            5 => (4000, 1000),
            15 => (1000, 500),
            30 => (800, 500),
            60 => (600, 500),
            other => {
                return Err(Error::Config { key: "scale".into(), message: format!("{other} not in {{5, 15, 30, 60}}") })
            }
        };
        Ok(Self {
            population_size,
            max_generations: 4000,
            stall_generations,
            mutation_probability: 0.09,
            crossover_probability: 0.9,
            elite_count: 1,
            tournament_size: 2,
            mutation_target: MutationTarget::ExistingOrNew,
            master_seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| Err(Error::Config { key: key.into(), message: message.into() });
        if self.elite_count == 0 {
            return bad("ga.elite_count", "must be at least 1");
        }
        if self.population_size < 2 * self.elite_count {
            return bad("ga.population_size", "must be at least twice elite_count");
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return bad("ga.mutation_probability", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return bad("ga.crossover_probability", "must lie in [0, 1]");
        }
        if self.stall_generations > self.max_generations {
            return bad("ga.stall_generations", "must not exceed max_generations");
        }
        if self.tournament_size == 0 {
            return bad("ga.tournament_size", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stall,
    MaxGenerations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best: ClusterConfiguration,
    pub best_fitness: f64,
    /// Breeding rounds after the initial population.
    pub generations: usize,
    pub termination: Termination,
    /// Best fitness of the initial population and of each later generation.
    pub trajectory: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Individual {
    genes: Vec<u32>,
    fitness: f64,
}

/// Random canonical label vectors, each gene uniform on `1..=N`.
pub fn init_population(n: usize, config: &GaConfig) -> Vec<ClusterConfiguration> {
    (0..config.population_size)
        .map(|k| ClusterConfiguration::new(random_genes(n, config.master_seed, k)).expect("labels in range"))
        .collect()
}

fn random_genes(n: usize, seed: u64, slot: usize) -> Vec<u32> {
    let mut rng = stream(seed, Domain::GaInit, 0, slot as u64);
    let mut genes: Vec<u32> = (0..n).map(|_| rng.random_range(1..=n as u32)).collect();
    canonicalize_in_place(&mut genes);
    genes
}

fn tournament<R: Rng>(rng: &mut R, pop: &[Individual], size: usize) -> usize {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let k = rng.random_range(0..pop.len());
        if pop[k].fitness > pop[best].fitness || (pop[k].fitness == pop[best].fitness && k < best) {
            best = k;
        }
    }
    best
}

fn breed(pop: &[Individual], config: &GaConfig, generation: usize, slot: usize) -> Vec<u32> {
    let mut rng = stream(config.master_seed, Domain::GaGeneration, generation as u64, slot as u64);
    let a = tournament(&mut rng, pop, config.tournament_size);
    let b = tournament(&mut rng, pop, config.tournament_size);
    let n = pop[a].genes.len();
    let mut child = pop[a].genes.clone();
    if rng.random_bool(config.crossover_probability) {
        for (gene, &other) in child.iter_mut().zip(&pop[b].genes) {
            if rng.random_bool(0.5) {
                *gene = other;
            }
        }
    }
    canonicalize_in_place(&mut child);
    if rng.random_bool(config.mutation_probability) {
        let i = rng.random_range(0..n);
        let top = match config.mutation_target {
            MutationTarget::AnyLabel => n as u32,
            // canonical, so the labels in use are exactly 1..=K
            MutationTarget::ExistingOrNew => (child.iter().copied().max().unwrap_or(0) + 1).min(n as u32),
        };
        child[i] = rng.random_range(1..=top);
        canonicalize_in_place(&mut child);
    }
    child
}

/// Index of the fittest individual; ties go to the lowest index.
fn best_index(pop: &[Individual]) -> usize {
    (1..pop.len()).fold(0, |best, k| if pop[k].fitness > pop[best].fitness { k } else { best })
}

/// Maximizes `L_c` over cluster configurations of the matrix's objects.
pub fn evolve(c: &CorrelationMatrix, config: &GaConfig) -> Result<GaResult> {
    config.validate()?;
    let n = c.n();
    if n < 2 {
        return Ok(GaResult {
            best: ClusterConfiguration::singletons(n),
            best_fitness: 0.0,
            generations: 0,
            termination: Termination::MaxGenerations,
            trajectory: vec![0.0],
        });
    }
    let mut pop: Vec<Individual> = (0..config.population_size)
        .into_par_iter()
        .map(|k| {
            let genes = random_genes(n, config.master_seed, k);
            let fitness = canonical_log_likelihood(c, &genes);
            Individual { genes, fitness }
        })
        .collect();

    let mut best = best_index(&pop);
    let mut trajectory = vec![pop[best].fitness];
    let mut stall = 0;
    let mut generation = 0;
    let termination = loop {
        if stall >= config.stall_generations {
            break Termination::Stall;
        }
        if generation >= config.max_generations {
            break Termination::MaxGenerations;
        }
        generation += 1;

        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&x, &y| pop[y].fitness.total_cmp(&pop[x].fitness).then(x.cmp(&y)));
        let elites: Vec<Individual> = order[..config.elite_count].iter().map(|&k| pop[k].clone()).collect();
        let children: Vec<Individual> = (config.elite_count..config.population_size)
            .into_par_iter()
            .map(|slot| {
                let genes = breed(&pop, config, generation, slot);
                let fitness = canonical_log_likelihood(c, &genes);
                Individual { genes, fitness }
            })
            .collect();
        pop = elites.into_iter().chain(children).collect();

        let previous = trajectory[trajectory.len() - 1];
        best = best_index(&pop);
        let current = pop[best].fitness;
        if current > previous + STALL_TOLERANCE {
            stall = 0;
        } else {
            stall += 1;
        }
        trajectory.push(current);
    };

    let winner = &pop[best];
    Ok(GaResult {
        best: ClusterConfiguration::new(winner.genes.clone())?,
        best_fitness: winner.fitness,
        generations: generation,
        termination,
        trajectory,
    })
}

/// Runs [`evolve`] on a dedicated pool with `threads` workers.
pub fn evolve_with_threads(c: &CorrelationMatrix, config: &GaConfig, threads: usize) -> Result<GaResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config { key: "workers".into(), message: e.to_string() })?;
    pool.install(|| evolve(c, config))
}

/// Exhaustive search over all set partitions (restricted growth strings).
/// Exact ties prefer more clusters, then the first partition enumerated.
pub fn brute_force_best(c: &CorrelationMatrix) -> Result<(ClusterConfiguration, f64)> {
    let n = c.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge(n));
    }
    if n == 0 {
        return Ok((ClusterConfiguration::singletons(0), 0.0));
    }
    // restricted growth string a[0] = 1, a[i] <= 1 + max(a[..i])
    let mut a = vec![1u32; n];
    let mut best = (a.clone(), canonical_log_likelihood(c, &a), 1u32);
    let mut prefix_max = vec![1u32; n];
    while let Some(i) = (1..n).rev().find(|&i| a[i] <= prefix_max[i - 1]) {
        a[i] += 1;
        prefix_max[i] = prefix_max[i - 1].max(a[i]);
        for j in i + 1..n {
            a[j] = 1;
            prefix_max[j] = prefix_max[i];
        }
        let f = canonical_log_likelihood(c, &a);
        let k = prefix_max[n - 1];
        if f > best.1 || (f == best.1 && k > best.2) {
            best = (a.clone(), f, k);
        }
    }
    Ok((ClusterConfiguration::new(best.0)?, best.1))
}
