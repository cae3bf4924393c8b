//! Experiment configuration: one serializable struct covering generation,
//! training and the sweep, readable from JSON or a flat `key = value` text
//! format with dotted section keys.

use std::fmt;
use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arch::ArchConfig;
use crate::attacks::UseCaseConfig;
use crate::error::{CetError, Result};
use crate::eval::SweepGrid;
use crate::ml::{Algorithm, Hyperparams};
use crate::pipeline::ScaleMethod;

/// Train/validation/test fractions, written `0.6/0.2/0.2` in both formats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn parse(s: &str) -> Result<SplitFractions> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(CetError::Config(format!(
                "split must be train/val/test, got `{s}`"
            )));
        }
        let mut f = [0.0f64; 3];
        for (i, p) in parts.iter().enumerate() {
            f[i] = p
                .trim()
                .parse()
                .map_err(|_| CetError::Config(format!("bad split fraction `{p}`")))?;
        }
        Ok(SplitFractions { train: f[0], val: f[1], test: f[2] })
    }

    pub fn tuple(self) -> (f64, f64, f64) {
        (self.train, self.val, self.test)
    }
}

impl fmt::Display for SplitFractions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.train, self.val, self.test)
    }
}

impl Serialize for SplitFractions {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SplitFractions {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SplitFractions::parse(&s).map_err(D::Error::custom)
    }
}

/// Unwraps config errors so nested wrapping doesn't repeat the prefix.
fn plain_msg(e: CetError) -> String {
    match e {
        CetError::Config(msg) => msg,
        other => other.to_string(),
    }
}

fn parse_scale(s: &str) -> Result<ScaleMethod> {
    match s {
        "standard" => Ok(ScaleMethod::Standard),
        "min_max" | "minmax" => Ok(ScaleMethod::MinMax),
        other => Err(CetError::Config(format!(
            "unknown scale method `{other}` (expected standard or min_max)"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowCfg {
    pub len: usize,
    pub step: usize,
}

impl Default for WindowCfg {
    fn default() -> Self {
        WindowCfg { len: 20, step: 1 }
    }
}

/// Negative-to-positive training ratios per level; evaluation ratios stay
/// pinned to the reference values regardless of these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalanceCfg {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl Default for BalanceCfg {
    fn default() -> Self {
        BalanceCfg { l1: 20.0, l2: 20.0, l3: 1.0 / 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestCfg {
    pub trees: usize,
    pub depth: usize,
    pub bag_fraction: f64,
    pub bootstrap: bool,
}

impl Default for ForestCfg {
    fn default() -> Self {
        let hp = Hyperparams::default();
        ForestCfg {
            trees: hp.n_trees,
            depth: hp.max_depth,
            bag_fraction: hp.bag_fraction,
            bootstrap: hp.bootstrap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdCfg {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for GdCfg {
    fn default() -> Self {
        let hp = Hyperparams::default();
        GdCfg { learning_rate: hp.learning_rate, epochs: hp.epochs, l2: hp.l2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbCfg {
    pub variance_floor: f64,
}

impl Default for NbCfg {
    fn default() -> Self {
        NbCfg { variance_floor: Hyperparams::default().variance_floor }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepCfg {
    pub algorithms: Vec<Algorithm>,
    pub window_lens: Vec<usize>,
    pub steps: Vec<usize>,
    pub train_balances: Vec<f64>,
    pub scalings: Vec<ScaleMethod>,
    pub splits: Vec<SplitFractions>,
}

impl Default for SweepCfg {
    fn default() -> Self {
        let g = SweepGrid::reference();
        SweepCfg {
            algorithms: g.algorithms,
            window_lens: g.window_lens,
            steps: g.steps,
            train_balances: g.train_balances,
            scalings: g.scalings,
            splits: g
                .splits
                .into_iter()
                .map(|(train, val, test)| SplitFractions { train, val, test })
                .collect(),
        }
    }
}

/// Everything a command needs besides paths: fixed config + seed determines
/// every output byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Normal-operation corpus length, hours.
    pub normal_hours: f64,
    pub abnormal_duration_s: usize,
    pub n_trips: usize,
    pub pulse_period_s: usize,
    /// Also generate the held-out attack combination absent from training.
    pub out_of_training: bool,
    pub window: WindowCfg,
    pub scale: ScaleMethod,
    pub split: SplitFractions,
    pub balance: BalanceCfg,
    pub algorithm: Algorithm,
    pub forest: ForestCfg,
    pub gd: GdCfg,
    pub nb: NbCfg,
    pub sweep: SweepCfg,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            normal_hours: 4.0,
            abnormal_duration_s: 1560,
            n_trips: 13,
            pulse_period_s: 20,
            out_of_training: false,
            window: WindowCfg::default(),
            scale: ScaleMethod::Standard,
            split: SplitFractions { train: 0.6, val: 0.2, test: 0.2 },
            balance: BalanceCfg::default(),
            algorithm: Algorithm::RandomForest,
            forest: ForestCfg::default(),
            gd: GdCfg::default(),
            nb: NbCfg::default(),
            sweep: SweepCfg::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads JSON (`.json` extension or leading `{`) or the flat key=value
    /// format.
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e == "json")
            || text.trim_start().starts_with('{');
        let cfg = if is_json {
            serde_json::from_str(&text)
                .map_err(|e| CetError::Config(format!("{}: {e}", path.display())))?
        } else {
            Self::parse_kv(&text)
                .map_err(|e| CetError::Config(format!("{}: {}", path.display(), plain_msg(e))))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Flat format: one `key = value` per line, `#` comments, dotted keys
    /// for sections, comma-separated lists for the sweep axes.
    pub fn parse_kv(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CetError::Config(format!("line {lineno}: expected key = value"))
            })?;
            cfg.apply(key.trim(), value.trim())
                .map_err(|e| CetError::Config(format!("line {lineno}: {}", plain_msg(e))))?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| CetError::Config(format!("bad value `{v}` for {key}")))
        }
        fn list<T, F: Fn(&str) -> Result<T>>(v: &str, f: F) -> Result<Vec<T>> {
            v.split(',').map(|p| f(p.trim())).collect()
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "normal_hours" => self.normal_hours = num(key, value)?,
            "abnormal_duration_s" => self.abnormal_duration_s = num(key, value)?,
            "n_trips" => self.n_trips = num(key, value)?,
            "pulse_period_s" => self.pulse_period_s = num(key, value)?,
            "out_of_training" => self.out_of_training = num(key, value)?,
            "window.len" => self.window.len = num(key, value)?,
            "window.step" => self.window.step = num(key, value)?,
            "scale" => self.scale = parse_scale(value)?,
            "split" => self.split = SplitFractions::parse(value)?,
            "balance.l1" => self.balance.l1 = num(key, value)?,
            "balance.l2" => self.balance.l2 = num(key, value)?,
            "balance.l3" => self.balance.l3 = num(key, value)?,
            "algorithm" => self.algorithm = Algorithm::parse(value)?,
            "forest.trees" => self.forest.trees = num(key, value)?,
            "forest.depth" => self.forest.depth = num(key, value)?,
            "forest.bag_fraction" => self.forest.bag_fraction = num(key, value)?,
            "forest.bootstrap" => self.forest.bootstrap = num(key, value)?,
            "gd.learning_rate" => self.gd.learning_rate = num(key, value)?,
            "gd.epochs" => self.gd.epochs = num(key, value)?,
            "gd.l2" => self.gd.l2 = num(key, value)?,
            "nb.variance_floor" => self.nb.variance_floor = num(key, value)?,
            "sweep.algorithms" => self.sweep.algorithms = list(value, Algorithm::parse)?,
            "sweep.window_lens" => self.sweep.window_lens = list(value, |p| num(key, p))?,
            "sweep.steps" => self.sweep.steps = list(value, |p| num(key, p))?,
            "sweep.train_balances" => {
                self.sweep.train_balances = list(value, |p| num(key, p))?
            }
            "sweep.scalings" => self.sweep.scalings = list(value, parse_scale)?,
            "sweep.splits" => self.sweep.splits = list(value, SplitFractions::parse)?,
            other => {
                return Err(CetError::Config(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.normal_hours <= 0.0 {
            return Err(CetError::Config("normal_hours must be positive".into()));
        }
        if self.abnormal_duration_s == 0 || self.n_trips == 0 || self.pulse_period_s == 0 {
            return Err(CetError::Config(
                "abnormal_duration_s, n_trips and pulse_period_s must be positive".into(),
            ));
        }
        if self.window.len == 0 || self.window.step == 0 {
            return Err(CetError::Config("window.len and window.step must be positive".into()));
        }
        let s = self.split;
        if s.train <= 0.0 || s.val < 0.0 || s.test < 0.0 || (s.train + s.val + s.test - 1.0).abs() > 1e-9 {
            return Err(CetError::Config(format!("split fractions {s} must sum to 1")));
        }
        for (name, b) in [("l1", self.balance.l1), ("l2", self.balance.l2), ("l3", self.balance.l3)] {
            if b <= 0.0 || !b.is_finite() {
                return Err(CetError::Config(format!("balance.{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn use_case_config(&self) -> UseCaseConfig {
        let mut c = UseCaseConfig::desk_default(self.normal_hours);
        c.abnormal_duration_s = self.abnormal_duration_s;
        c.n_trips = self.n_trips;
        c.pulse_period_s = self.pulse_period_s;
        c
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            n_trees: self.forest.trees,
            max_depth: self.forest.depth,
            bag_fraction: self.forest.bag_fraction,
            bootstrap: self.forest.bootstrap,
            learning_rate: self.gd.learning_rate,
            epochs: self.gd.epochs,
            l2: self.gd.l2,
            variance_floor: self.nb.variance_floor,
            ..Hyperparams::default()
        }
    }

    pub fn arch_config(&self) -> ArchConfig {
        let mut a = ArchConfig::reference(self.algorithm, self.seed);
        a.window_len = self.window.len;
        a.step = self.window.step;
        a.scale = self.scale;
        a.split = self.split.tuple();
        a.l1.train_balance = self.balance.l1;
        a.l2.train_balance = self.balance.l2;
        a.l3.train_balance = self.balance.l3;
        a.hyperparams = self.hyperparams();
        a
    }

    pub fn sweep_grid(&self) -> SweepGrid {
        SweepGrid {
            algorithms: self.sweep.algorithms.clone(),
            window_lens: self.sweep.window_lens.clone(),
            steps: self.sweep.steps.clone(),
            train_balances: self.sweep.train_balances.clone(),
            scalings: self.sweep.scalings.clone(),
            splits: self.sweep.splits.iter().map(|s| s.tuple()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_match_reference() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let arch = cfg.arch_config();
        assert_eq!(arch, ArchConfig::reference(Algorithm::RandomForest, 7));
        assert_eq!(cfg.sweep_grid().combos().len(), 64);
    }

    #[test]
    fn kv_overrides_and_comments() {
        let text = "\
# experiment
seed = 42
window.len = 10   # shorter windows
scale = min_max
split = 0.5/0.3/0.2
balance.l3 = 0.5
algorithm = linear_svm
forest.trees = 5
sweep.window_lens = 20
sweep.algorithms = decision_tree, gaussian_nb
";
        let cfg = ExperimentConfig::parse_kv(text).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.window, WindowCfg { len: 10, step: 1 });
        assert_eq!(cfg.scale, ScaleMethod::MinMax);
        assert_eq!(cfg.split.tuple(), (0.5, 0.3, 0.2));
        assert_eq!(cfg.balance.l3, 0.5);
        assert_eq!(cfg.algorithm, Algorithm::LinearSvm);
        assert_eq!(cfg.forest.trees, 5);
        assert_eq!(cfg.sweep.window_lens, vec![20]);
        assert_eq!(
            cfg.sweep.algorithms,
            vec![Algorithm::DecisionTree, Algorithm::GaussianNb]
        );
        let arch = cfg.arch_config();
        assert_eq!(arch.window_len, 10);
        assert_eq!(arch.hyperparams.n_trees, 5);
        // Evaluation ratios stay pinned.
        assert_eq!(arch.l1.eval_balance, 30.0);
        assert_eq!(arch.l3.eval_balance, 1.0 / 3.0);
    }

    #[test]
    fn unknown_key_reports_line_number() {
        let err = ExperimentConfig::parse_kv("seed = 1\nwibble = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("wibble"), "{msg}");
    }

    #[test]
    fn bad_value_reports_line_number() {
        let err = ExperimentConfig::parse_kv("window.len = banana\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = 9;
        cfg.split = SplitFractions { train: 0.7, val: 0.2, test: 0.1 };
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(json.contains("\"0.7/0.2/0.1\""));
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn json_file_detection_and_partial_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, "{\"seed\": 3, \"normal_hours\": 0.5}").unwrap();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.normal_hours, 0.5);
        assert_eq!(cfg.window.len, 20);
    }

    #[test]
    fn invalid_split_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.split = SplitFractions { train: 0.9, val: 0.2, test: 0.2 };
        assert!(cfg.validate().is_err());
    }
}
