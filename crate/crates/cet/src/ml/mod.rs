//! Five binary classifiers implemented from first principles, sharing one
//! training interface and a versioned on-disk format. Scores live in
//! [0, 1]; the positive decision threshold is 0.5 everywhere.

pub mod forest;
pub mod linear;
pub mod nb;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{CetError, Result};
use crate::pipeline::WindowSet;

pub use forest::RandomForest;
pub use linear::LinearModel;
pub use nb::GaussianNb;
pub use tree::DecisionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DecisionTree,
    RandomForest,
    LogisticRegression,
    LinearSvm,
    GaussianNb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::DecisionTree,
        Algorithm::RandomForest,
        Algorithm::LogisticRegression,
        Algorithm::LinearSvm,
        Algorithm::GaussianNb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::RandomForest => "random_forest",
            Algorithm::LogisticRegression => "logistic_regression",
            Algorithm::LinearSvm => "linear_svm",
            Algorithm::GaussianNb => "gaussian_nb",
        }
    }

    pub fn parse(s: &str) -> Result<Algorithm> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CetError::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Which features a tree split may consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    All,
    /// round(sqrt(d)) random features per split.
    Sqrt,
}

/// Flat hyperparameter block; each algorithm reads the fields it uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub n_trees: usize,
    pub bag_fraction: f64,
    /// Off = every tree sees the full training set; the single-tree,
    /// all-features forest then reduces exactly to the decision tree.
    pub bootstrap: bool,
    pub feature_subsample: FeatureSubsample,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub variance_floor: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            max_depth: 12,
            min_samples_split: 2,
            n_trees: 30,
            bag_fraction: 1.0,
            bootstrap: true,
            feature_subsample: FeatureSubsample::Sqrt,
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
            variance_floor: 1e-9,
        }
    }
}

/// Borrowed view of a labeled training matrix (row-major, `d` columns).
#[derive(Debug, Clone, Copy)]
pub struct TrainSet<'a> {
    pub x: &'a [f64],
    pub d: usize,
    pub y: &'a [bool],
}

impl<'a> TrainSet<'a> {
    pub fn new(x: &'a [f64], d: usize, y: &'a [bool]) -> Result<TrainSet<'a>> {
        if d == 0 || x.len() != d * y.len() {
            return Err(CetError::DimensionMismatch { expected: d * y.len(), got: x.len() });
        }
        Ok(TrainSet { x, d, y })
    }

    pub fn from_windows(ws: &'a WindowSet) -> Result<TrainSet<'a>> {
        TrainSet::new(ws.features(), ws.width(), &ws.labels)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    fn check_finite(&self) -> Result<()> {
        for i in 0..self.len() {
            for (j, v) in self.row(i).iter().enumerate() {
                if !v.is_finite() {
                    return Err(CetError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

/// A fitted classifier of any of the five families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    Tree(DecisionTree),
    Forest(RandomForest),
    Logistic(LinearModel),
    Svm(LinearModel),
    Nb(GaussianNb),
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::Tree(_) => Algorithm::DecisionTree,
            TrainedModel::Forest(_) => Algorithm::RandomForest,
            TrainedModel::Logistic(_) => Algorithm::LogisticRegression,
            TrainedModel::Svm(_) => Algorithm::LinearSvm,
            TrainedModel::Nb(_) => Algorithm::GaussianNb,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Tree(m) => m.n_features,
            TrainedModel::Forest(m) => m.n_features,
            TrainedModel::Logistic(m) | TrainedModel::Svm(m) => m.weights.len(),
            TrainedModel::Nb(m) => m.n_features(),
        }
    }

    /// Positive-class score in [0, 1].
    pub fn predict_score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features() {
            return Err(CetError::DimensionMismatch {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        Ok(match self {
            TrainedModel::Tree(m) => m.score(row),
            TrainedModel::Forest(m) => m.score(row),
            TrainedModel::Logistic(m) | TrainedModel::Svm(m) => m.score(row),
            TrainedModel::Nb(m) => m.score(row),
        })
    }

    /// Hard decision: score >= 0.5 is positive (ties resolve positive).
    pub fn predict(&self, row: &[f64]) -> Result<bool> {
        Ok(self.predict_score(row)? >= 0.5)
    }
}

/// Trains the chosen algorithm. `seed` only affects the stochastic
/// families (forest bagging and feature subsampling).
pub fn train(
    algorithm: Algorithm,
    hp: &Hyperparams,
    ts: &TrainSet,
    seed: u64,
) -> Result<TrainedModel> {
    ts.check_finite()?;
    if !ts.y.iter().any(|&l| l) {
        return Err(CetError::SingleClass(1));
    }
    if ts.y.iter().all(|&l| l) {
        return Err(CetError::SingleClass(0));
    }
    Ok(match algorithm {
        Algorithm::DecisionTree => TrainedModel::Tree(tree::fit_tree(ts, hp)),
        Algorithm::RandomForest => TrainedModel::Forest(forest::fit_forest(ts, hp, seed)),
        Algorithm::LogisticRegression => TrainedModel::Logistic(linear::fit_logistic(ts, hp)),
        Algorithm::LinearSvm => TrainedModel::Svm(linear::fit_svm(ts, hp)),
        Algorithm::GaussianNb => TrainedModel::Nb(nb::fit_nb(ts, hp)),
    })
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub hyperparams: Hyperparams,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(hp: Hyperparams, model: TrainedModel) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            algorithm: model.algorithm(),
            hyperparams: hp,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CetError::Data(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<ModelFile> {
        let file: ModelFile =
            serde_json::from_str(s).map_err(|e| CetError::Data(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(CetError::Data(format!(
                "unsupported model format version {} (expected {})",
                file.format_version, MODEL_FORMAT_VERSION
            )));
        }
        if file.algorithm != file.model.algorithm() {
            return Err(CetError::Data("algorithm tag does not match model family".into()));
        }
        Ok(file)
    }
}
