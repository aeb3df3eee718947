//! Deployment search: a cardinality-preserving genetic algorithm (roulette
//! selection, equal-count window crossover, 0/1 swap mutation, optional
//! elitism) plus an exhaustive brute-force oracle for small instances.
//!
//! Every random decision flows from one 64-bit seed through numbered
//! ChaCha8 streams: stream 0 seeds initialization and streams 3s+1, 3s+2,
//! 3s+3 seed selection, crossover, and mutation of production step s.
//! Fitness evaluation runs in parallel but never touches an RNG, so results
//! are identical for any thread count.

use std::fmt::Write as _;
use std::path::Path;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::Trip;
use crate::evaluation::{deployment_score, fitness, Deployment, EvalParams};
use crate::network::Network;

/// Fixed-cardinality 0/1 station vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chromosome {
    bits: Vec<u8>,
}

impl Chromosome {
    /// Wraps a 0/1 bit vector. Panics on values other than 0 or 1.
    pub fn new(bits: Vec<u8>) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "chromosome bits must be 0 or 1");
        Chromosome { bits }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Count of 1-bits (the deployment size k).
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn to_deployment(&self) -> Deployment {
        Deployment::from_chromosome(&self.bits)
    }

    pub fn from_deployment(deployment: &Deployment, n: usize) -> Self {
        Chromosome { bits: deployment.to_chromosome(n) }
    }
}

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("cannot place k={k} stations on {n} nodes")]
    InvalidCardinality { k: usize, n: usize },
    #[error("invalid GA config: {0}")]
    InvalidConfig(String),
    #[error("total fit value is not positive")]
    ZeroTotalFit,
    #[error("search space C(n,k) = {combinations} exceeds cap {cap}")]
    SearchSpaceTooLarge { combinations: u128, cap: usize },
}

/// GA hyperparameters. Defaults: pop 50, 200 generations, pc 0.8, pm 0.1,
/// window max(2, N/5), elitism on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub pop_size: usize,
    pub generations: usize,
    pub pc: f64,
    pub pm: f64,
    pub window_len: usize,
    pub k: usize,
    pub elitism: bool,
    pub seed: u64,
}

impl GaConfig {
    /// Default hyperparameters for an N-node network.
    pub fn with_defaults(n: usize, k: usize, seed: u64) -> Self {
        GaConfig {
            pop_size: 50,
            generations: 200,
            pc: 0.8,
            pm: 0.1,
            window_len: Self::default_window_len(n),
            k,
            elitism: true,
            seed,
        }
    }

    pub fn default_window_len(n: usize) -> usize {
        ((n as f64 / 5.0).round() as usize).max(2)
    }

    pub fn validate(&self, n: usize) -> Result<(), OptimizerError> {
        if self.k > n {
            return Err(OptimizerError::InvalidCardinality { k: self.k, n });
        }
        if self.pop_size == 0 {
            return Err(OptimizerError::InvalidConfig("pop_size must be >= 1".into()));
        }
        if self.generations == 0 {
            return Err(OptimizerError::InvalidConfig("generations must be >= 1".into()));
        }
        for (name, p) in [("pc", self.pc), ("pm", self.pm)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(OptimizerError::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        if self.window_len < 2 || self.window_len >= n {
            return Err(OptimizerError::InvalidConfig(format!(
                "window_len must satisfy 2 <= window < {n}, got {}",
                self.window_len
            )));
        }
        Ok(())
    }
}

/// Outcome of a GA run: the best deployment ever evaluated, its total
/// unsatisfied SOC, and the per-generation fitness curve.
#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub best: Deployment,
    pub best_u: f64,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub generation: usize,
    pub best_fit: f64,
    pub mean_fit: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `pop_size` uniformly random k-subset chromosomes of length `n`.
pub fn init_population(
    n: usize,
    k: usize,
    pop_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Chromosome>, OptimizerError> {
    if k > n {
        return Err(OptimizerError::InvalidCardinality { k, n });
    }
    Ok((0..pop_size)
        .map(|_| {
            let mut bits = vec![0u8; n];
            for i in rand::seq::index::sample(rng, n, k) {
                bits[i] = 1;
            }
            Chromosome { bits }
        })
        .collect())
}

/// Roulette wheel: `count` draws with replacement, each index drawn with
/// probability fit_i / total fit.
pub fn select_indices(
    fits: &[f64],
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, OptimizerError> {
    let mut cumulative = Vec::with_capacity(fits.len());
    let mut total = 0.0;
    for &f in fits {
        total += f;
        cumulative.push(total);
    }
    if total <= 0.0 || !total.is_finite() {
        return Err(OptimizerError::ZeroTotalFit);
    }
    Ok((0..count)
        .map(|_| {
            let x = rng.gen_range(0.0..total);
            cumulative.partition_point(|&c| c <= x).min(fits.len() - 1)
        })
        .collect())
}

/// Draws a new population of the same size by fitness roulette; duplicates
/// are expected.
pub fn select(
    population: &[Chromosome],
    fits: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<Chromosome>, OptimizerError> {
    let indices = select_indices(fits, population.len(), rng)?;
    Ok(indices.into_iter().map(|i| population[i].clone()).collect())
}

/// Deterministic crossover core: starting at `start`, scan all N window
/// positions cyclically (windows wrap around the end); at the first window
/// where both parents hold the same number of 1s, swap the windows.
/// Returns `None` when no window qualifies.
pub fn crossover_at(
    a: &Chromosome,
    b: &Chromosome,
    window_len: usize,
    start: usize,
) -> Option<(Chromosome, Chromosome)> {
    let n = a.len();
    assert_eq!(n, b.len(), "parents must have equal length");
    for offset in 0..n {
        let pos = (start + offset) % n;
        let window = |j: usize| (pos + j) % n;
        let count = |c: &Chromosome| (0..window_len).filter(|&j| c.bits[window(j)] == 1).count();
        if count(a) == count(b) {
            let mut child_a = a.clone();
            let mut child_b = b.clone();
            for j in 0..window_len {
                let i = window(j);
                std::mem::swap(&mut child_a.bits[i], &mut child_b.bits[i]);
            }
            return Some((child_a, child_b));
        }
    }
    None
}

/// Crossover operator: with probability `pc`, swap the first equal-count
/// window found from a random start; otherwise (or when no window
/// qualifies) return the parents unchanged. Both children keep exactly k
/// ones.
pub fn crossover_pair(
    a: &Chromosome,
    b: &Chromosome,
    pc: f64,
    window_len: usize,
    rng: &mut impl Rng,
) -> (Chromosome, Chromosome) {
    if !rng.gen_bool(pc) {
        return (a.clone(), b.clone());
    }
    let start = rng.gen_range(0..a.len());
    crossover_at(a, b, window_len, start).unwrap_or_else(|| (a.clone(), b.clone()))
}

/// Mutation operator: with probability `pm`, swap one random 1-bit with one
/// random 0-bit; the count of 1s never changes. All-zero and all-one
/// chromosomes pass through untouched.
pub fn mutate(c: &Chromosome, pm: f64, rng: &mut impl Rng) -> Chromosome {
    if !rng.gen_bool(pm) {
        return c.clone();
    }
    let ones: Vec<usize> = (0..c.len()).filter(|&i| c.bits[i] == 1).collect();
    let zeros: Vec<usize> = (0..c.len()).filter(|&i| c.bits[i] == 0).collect();
    if ones.is_empty() || zeros.is_empty() {
        return c.clone();
    }
    let from = ones[rng.gen_range(0..ones.len())];
    let to = zeros[rng.gen_range(0..zeros.len())];
    let mut child = c.clone();
    child.bits[from] = 0;
    child.bits[to] = 1;
    child
}

fn parallel_scores(
    net: &Network,
    trips: &[Trip],
    population: &[Chromosome],
    params: &EvalParams,
) -> Vec<f64> {
    population
        .par_iter()
        .map(|c| deployment_score(net, trips, &c.to_deployment(), params))
        .collect()
}

/// First index with minimal value (the generation's best individual).
fn best_index(us: &[f64]) -> usize {
    let mut best = 0;
    for (i, &u) in us.iter().enumerate() {
        if u < us[best] {
            best = i;
        }
    }
    best
}

/// First index with maximal value (the elitism replacement target).
fn worst_index(us: &[f64]) -> usize {
    let mut worst = 0;
    for (i, &u) in us.iter().enumerate() {
        if u > us[worst] {
            worst = i;
        }
    }
    worst
}

fn curve_point(generation: usize, us: &[f64], fits: &[f64]) -> CurvePoint {
    let mean: f64 = fits.iter().sum::<f64>() / fits.len() as f64;
    CurvePoint { generation, best_fit: fits[best_index(us)], mean_fit: mean }
}

/// Runs the genetic algorithm: per generation evaluate, roulette-select,
/// crossover adjacent pairs, mutate; with elitism the previous generation's
/// best replaces the new worst when strictly better. Generation 0 is the
/// evaluated initial population. Fully deterministic given the seed.
pub fn run_ga(
    net: &Network,
    trips: &[Trip],
    params: &EvalParams,
    cfg: &GaConfig,
) -> Result<GaResult, OptimizerError> {
    cfg.validate(net.node_count())?;
    params.validate().map_err(|e| OptimizerError::InvalidConfig(e.to_string()))?;

    let mut pop = init_population(
        net.node_count(),
        cfg.k,
        cfg.pop_size,
        &mut stream_rng(cfg.seed, 0),
    )?;
    let mut us = parallel_scores(net, trips, &pop, params);
    let mut fits: Vec<f64> = us.iter().map(|&u| fitness(u)).collect();

    let b = best_index(&us);
    let mut elite = (pop[b].clone(), us[b]);
    let mut best_ever = elite.clone();
    let mut curve = vec![curve_point(0, &us, &fits)];

    for step in 0..cfg.generations - 1 {
        let parents = select(&pop, &fits, &mut stream_rng(cfg.seed, 3 * step as u64 + 1))?;

        let mut children = Vec::with_capacity(parents.len());
        let mut crossover_rng = stream_rng(cfg.seed, 3 * step as u64 + 2);
        for pair in parents.chunks(2) {
            if let [a, b] = pair {
                let (ca, cb) = crossover_pair(a, b, cfg.pc, cfg.window_len, &mut crossover_rng);
                children.push(ca);
                children.push(cb);
            } else {
                // odd population: the last individual has no partner
                children.push(pair[0].clone());
            }
        }

        let mut mutation_rng = stream_rng(cfg.seed, 3 * step as u64 + 3);
        pop = children.iter().map(|c| mutate(c, cfg.pm, &mut mutation_rng)).collect();
        us = parallel_scores(net, trips, &pop, params);

        if cfg.elitism {
            let w = worst_index(&us);
            if elite.1 < us[w] {
                pop[w] = elite.0.clone();
                us[w] = elite.1;
            }
        }
        fits = us.iter().map(|&u| fitness(u)).collect();

        let b = best_index(&us);
        elite = (pop[b].clone(), us[b]);
        if elite.1 < best_ever.1 {
            best_ever = elite.clone();
        }
        curve.push(curve_point(step + 1, &us, &fits));
    }

    Ok(GaResult { best: best_ever.0.to_deployment(), best_u: best_ever.1, curve })
}

/// Default enumeration cap for [`brute_force`].
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 1_000_000;

/// Exact optimum over all k-subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub best: Deployment,
    pub best_u: f64,
    /// Number of deployments enumerated, C(N,k).
    pub evaluated: usize,
}

/// C(n, k), saturating at u128::MAX.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 1..=k {
        let factor = (n - k + i) as u128;
        match result.checked_mul(factor) {
            Some(v) => result = v / i as u128,
            None => return u128::MAX,
        }
    }
    result
}

/// Enumerates every k-subset in lexicographic order and returns the one
/// with minimal U; ties keep the lexicographically smallest subset.
pub fn brute_force(
    net: &Network,
    trips: &[Trip],
    k: usize,
    params: &EvalParams,
    cap: usize,
) -> Result<BruteForceResult, OptimizerError> {
    let n = net.node_count();
    if k > n {
        return Err(OptimizerError::InvalidCardinality { k, n });
    }
    let combinations = binomial(n, k);
    if combinations > cap as u128 {
        return Err(OptimizerError::SearchSpaceTooLarge { combinations, cap });
    }

    let subsets: Vec<Vec<usize>> = (0..n).combinations(k).collect();
    let scores: Vec<f64> = subsets
        .par_iter()
        .map(|subset| {
            let deployment = Deployment::new(subset.iter().copied(), net).expect("valid ids");
            deployment_score(net, trips, &deployment, params)
        })
        .collect();

    let mut best = 0;
    for (i, &u) in scores.iter().enumerate() {
        if u < scores[best] {
            best = i;
        }
    }
    Ok(BruteForceResult {
        best: Deployment::new(subsets[best].iter().copied(), net).expect("valid ids"),
        best_u: scores[best],
        evaluated: subsets.len(),
    })
}

/// Fitness-curve CSV: `generation,best_fit,mean_fit` per row, floats in
/// shortest round-trip form.
pub fn curve_csv_string(curve: &[CurvePoint]) -> String {
    let mut out = String::from("generation,best_fit,mean_fit\n");
    for p in curve {
        let _ = writeln!(out, "{},{},{}", p.generation, p.best_fit, p.mean_fit);
    }
    out
}

pub fn save_curve_csv(curve: &[CurvePoint], path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, curve_csv_string(curve))
}
