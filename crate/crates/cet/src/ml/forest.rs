//! Bagged forest of CART trees with per-split feature subsampling.
//! Every tree draws its bag and feature choices from its own seeded
//! stream, so parallel and serial fits produce identical forests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{expand_bag, fit_tree_from_lists, presort, DecisionTree, Presort};
use super::{FeatureSubsample, Hyperparams, TrainSet};
use crate::sim::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Mean of the tree scores.
    pub fn score(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.score(row)).sum();
        sum / self.trees.len() as f64
    }
}

fn fit_one_tree(ts: &TrainSet, hp: &Hyperparams, sorted: &Presort, tree_seed: u64) -> DecisionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
    let n = ts.len();
    let lists = if hp.bootstrap {
        let bag_size = ((hp.bag_fraction * n as f64).round() as usize).max(1);
        let mut multiplicity = vec![0u32; n];
        for _ in 0..bag_size {
            multiplicity[rng.gen_range(0..n)] += 1;
        }
        expand_bag(sorted, &multiplicity)
    } else {
        sorted.lists.clone()
    };
    let m = match hp.feature_subsample {
        FeatureSubsample::All => None,
        FeatureSubsample::Sqrt => Some(((ts.d as f64).sqrt().round() as usize).max(1)),
    };
    fit_tree_from_lists(ts, hp, lists, m, Some(&mut rng))
}

/// Fits the forest, parallel across trees when compiled with the
/// `parallel` feature (identical output either way).
pub fn fit_forest(ts: &TrainSet, hp: &Hyperparams, seed: u64) -> RandomForest {
    fit_forest_mode(ts, hp, seed, cfg!(feature = "parallel"))
}

/// Explicit parallel/serial selection; the serial path is the benchmark
/// baseline and the fallback when rayon is compiled out.
pub fn fit_forest_mode(ts: &TrainSet, hp: &Hyperparams, seed: u64, parallel: bool) -> RandomForest {
    let sorted = presort(ts);
    let seeds: Vec<u64> = (0..hp.n_trees.max(1))
        .map(|i| derive_seed(seed, 0x7000 + i as u64))
        .collect();
    let trees: Vec<DecisionTree> = if parallel {
        #[cfg(feature = "parallel")]
        {
            seeds.par_iter().map(|&s| fit_one_tree(ts, hp, &sorted, s)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            seeds.iter().map(|&s| fit_one_tree(ts, hp, &sorted, s)).collect()
        }
    } else {
        seeds.iter().map(|&s| fit_one_tree(ts, hp, &sorted, s)).collect()
    };
    RandomForest { n_features: ts.d, trees }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_set(n: usize, d: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let mut sum = 0.0;
            for _ in 0..d {
                let v: f64 = rng.gen_range(-1.0..1.0);
                sum += v;
                x.push(v);
            }
            y.push(sum + rng.gen_range(-0.3..0.3) > 0.0);
        }
        (x, y)
    }

    #[test]
    fn single_tree_without_bootstrap_equals_decision_tree() {
        let (x, y) = random_set(200, 6, 42);
        let ts = TrainSet::new(&x, 6, &y).unwrap();
        let hp = Hyperparams {
            n_trees: 1,
            bootstrap: false,
            feature_subsample: FeatureSubsample::All,
            ..Default::default()
        };
        let forest = fit_forest(&ts, &hp, 7);
        let tree = super::super::tree::fit_tree(&ts, &hp);
        assert_eq!(forest.trees.len(), 1);
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn parallel_and_serial_fits_identical() {
        let (x, y) = random_set(150, 5, 9);
        let ts = TrainSet::new(&x, 5, &y).unwrap();
        let hp = Hyperparams { n_trees: 12, max_depth: 6, ..Default::default() };
        let a = fit_forest_mode(&ts, &hp, 31, true);
        let b = fit_forest_mode(&ts, &hp, 31, false);
        assert_eq!(a, b);
    }

    #[test]
    fn seed_changes_forest() {
        let (x, y) = random_set(150, 5, 9);
        let ts = TrainSet::new(&x, 5, &y).unwrap();
        let hp = Hyperparams { n_trees: 5, max_depth: 6, ..Default::default() };
        let a = fit_forest(&ts, &hp, 1);
        let b = fit_forest(&ts, &hp, 2);
        assert_ne!(a, b);
    }

    #[test]
    fn forest_beats_chance_on_learnable_data() {
        let (x, y) = random_set(400, 4, 3);
        let ts = TrainSet::new(&x, 4, &y).unwrap();
        let hp = Hyperparams { n_trees: 20, max_depth: 8, ..Default::default() };
        let forest = fit_forest(&ts, &hp, 5);
        let correct = (0..ts.len())
            .filter(|&i| (forest.score(ts.row(i)) >= 0.5) == y[i])
            .count();
        assert!(correct as f64 / ts.len() as f64 > 0.9);
    }

    #[test]
    fn bag_fraction_shrinks_leaves() {
        let (x, y) = random_set(300, 4, 11);
        let ts = TrainSet::new(&x, 4, &y).unwrap();
        let full = Hyperparams { n_trees: 3, bag_fraction: 1.0, ..Default::default() };
        let tiny = Hyperparams { n_trees: 3, bag_fraction: 0.1, ..Default::default() };
        let leaves = |f: &RandomForest| f.trees.iter().map(|t| t.n_leaves()).sum::<usize>();
        assert!(leaves(&fit_forest(&ts, &tiny, 2)) < leaves(&fit_forest(&ts, &full, 2)));
    }
}
