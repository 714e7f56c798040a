//! Latin hypercube designs improved for maximin distance by a permutation
//! genetic algorithm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{shuffled, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population: 50,
            generations: 30,
            mutation_rate: 0.1,
        }
    }
}

/// A design: `columns[k][i]` is the bin of point `i` in dimension `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OlhDesign {
    pub columns: Vec<Vec<usize>>,
    /// Best maximin distance in the initial population.
    pub initial_fitness: f64,
    /// Maximin distance of the returned design.
    pub fitness: f64,
}

impl OlhDesign {
    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    /// Bin centers in the unit cube.
    pub fn unit_points(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|i| {
                self.columns
                    .iter()
                    .map(|c| (c[i] as f64 + 0.5) / n as f64)
                    .collect()
            })
            .collect()
    }
}

/// Smallest pairwise Euclidean distance between bin centers.
fn maximin(columns: &[Vec<usize>]) -> f64 {
    let n = columns.first().map_or(0, |c| c.len());
    if n < 2 {
        return 0.0;
    }
    let scale = 1.0 / n as f64;
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let mut d2 = 0.0;
            for c in columns {
                let d = (c[i] as f64 - c[j] as f64) * scale;
                d2 += d * d;
                if d2 >= best {
                    break;
                }
            }
            if d2 < best {
                best = d2;
            }
        }
    }
    best.sqrt()
}

/// Runs the GA for an `n × p` design.
pub fn olh_design(n: usize, p: usize, seed: u64, params: GaParams) -> OlhDesign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pop_size = params.population.max(2);
    let mut population: Vec<Vec<Vec<usize>>> = (0..pop_size)
        .map(|_| (0..p).map(|_| shuffled(n, &mut rng)).collect())
        .collect();
    let mut fitness: Vec<f64> = population.par_iter().map(|d| maximin(d)).collect();
    let initial_fitness = fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    for _ in 0..params.generations {
        let elite = argmax(&fitness);
        let mut next = vec![population[elite].clone()];
        while next.len() < pop_size {
            let a = tournament(&fitness, &mut rng);
            let b = tournament(&fitness, &mut rng);
            // Column-wise uniform crossover keeps every column a permutation.
            let mut child: Vec<Vec<usize>> = (0..p)
                .map(|k| {
                    if rng.gen_bool(0.5) {
                        population[a][k].clone()
                    } else {
                        population[b][k].clone()
                    }
                })
                .collect();
            for col in child.iter_mut() {
                if n >= 2 && rng.gen_bool(params.mutation_rate) {
                    let i = rng.gen_range(0..n);
                    let j = rng.gen_range(0..n);
                    col.swap(i, j);
                }
            }
            next.push(child);
        }
        population = next;
        fitness = population.par_iter().map(|d| maximin(d)).collect();
    }
    let best = argmax(&fitness);
    OlhDesign {
        columns: population.swap_remove(best),
        initial_fitness,
        fitness: fitness[best],
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn tournament(fitness: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.gen_range(0..fitness.len());
    let b = rng.gen_range(0..fitness.len());
    if fitness[b] > fitness[a] {
        b
    } else {
        a
    }
}

/// OLH design scaled into the box.
pub fn olh_samples(lower: &[f64], upper: &[f64], n: usize, seed: u64) -> SampleSet {
    let design = olh_design(n, lower.len(), seed, GaParams::default());
    let mut set = SampleSet::empty(lower.to_vec(), upper.to_vec());
    set.points = design
        .unit_points()
        .iter()
        .map(|z| set.denormalize(z))
        .collect();
    set
}
