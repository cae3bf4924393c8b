//! The layered detection architecture: three gated binary levels fused
//! through the truth table, plus a single combined-input baseline model
//! over all 78 signals.
//!
//! Level 1 watches plant telemetry for any abnormality, level 2 watches
//! network telemetry for traffic floods, and level 3 — consulted only
//! when level 1 fires — separates falsified-data events from other
//! abnormalities.

use serde::{Deserialize, Serialize};

use crate::attacks::UseCaseBundle;
use crate::error::{CetError, Result};
use crate::frame::{SignalMatrix, TelemetryFrame};
use crate::ml::{self, Algorithm, Hyperparams, TrainSet, TrainedModel};
use crate::model::{fuse_levels, FusedClass, LevelOutputs, ScenarioState};
use crate::pipeline::{
    self, CleanPolicy, LabelRule, ScaleMethod, ScalerParams, SplitSpec, WindowSet,
};
use crate::sim::derive_seed;

/// Per-timestep positive definitions of the three levels.
pub fn l1_positive(s: &ScenarioState) -> bool {
    !s.trip_available
}

pub fn l2_positive(s: &ScenarioState) -> bool {
    s.dos_level != crate::model::DosLevel::None
}

pub fn l3_positive(s: &ScenarioState) -> bool {
    s.fdi_level > 0
}

/// Balance ratios of one level: the training ratio is tunable, the
/// validation/test ratio is pinned so metrics are comparable across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub train_balance: f64,
    pub eval_balance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub window_len: usize,
    pub step: usize,
    pub scale: ScaleMethod,
    /// Train/validation/test fractions.
    pub split: (f64, f64, f64),
    pub l1: LevelSpec,
    pub l2: LevelSpec,
    pub l3: LevelSpec,
    pub algorithm: Algorithm,
    pub hyperparams: Hyperparams,
    pub clean: CleanPolicy,
    pub seed: u64,
}

impl ArchConfig {
    /// Reference configuration: 20 s windows, 1 s step, standard scaling,
    /// 60/20/20 split, training balance 20 on the watch levels and 1:3 on
    /// the falsification level.
    pub fn reference(algorithm: Algorithm, seed: u64) -> ArchConfig {
        ArchConfig {
            window_len: 20,
            step: 1,
            scale: ScaleMethod::Standard,
            split: (0.6, 0.2, 0.2),
            l1: LevelSpec { train_balance: 20.0, eval_balance: 30.0 },
            l2: LevelSpec { train_balance: 20.0, eval_balance: 30.0 },
            l3: LevelSpec { train_balance: 1.0 / 3.0, eval_balance: 1.0 / 3.0 },
            algorithm,
            hyperparams: Hyperparams::default(),
            clean: CleanPolicy::default(),
            seed,
        }
    }
}

/// One fitted level: the classifier plus the scaler its inputs go through.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelModel {
    pub model: TrainedModel,
    pub scaler: ScalerParams,
}

impl LevelModel {
    pub fn predict_raw(&self, raw_window: &[f64]) -> Result<bool> {
        let mut row = raw_window.to_vec();
        self.scaler.apply_row(&mut row)?;
        self.model.predict(&row)
    }

    pub fn score_raw(&self, raw_window: &[f64]) -> Result<f64> {
        let mut row = raw_window.to_vec();
        self.scaler.apply_row(&mut row)?;
        self.model.predict_score(&row)
    }
}

/// The trained three-level system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThreeLevelClassifier {
    pub l1: LevelModel,
    pub l2: LevelModel,
    pub l3: LevelModel,
    pub window_len: usize,
    pub step: usize,
}

/// Scaled, balanced partitions of one level.
#[derive(Debug, Clone)]
pub struct LevelSets {
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
}

#[derive(Debug, Clone)]
pub struct ArchSets {
    pub l1: LevelSets,
    pub l2: LevelSets,
    pub l3: LevelSets,
}

/// States resampled onto the network-telemetry clock.
pub fn it_states(frame: &TelemetryFrame) -> Vec<ScenarioState> {
    (0..frame.it.n_steps).map(|j| frame.states[frame.it_to_ot_step(j)]).collect()
}

/// Balances a partition to the exact ratio; when negatives are too few to
/// honor it, positives are subsampled first so the ratio still holds.
fn balance_partition(ws: &WindowSet, ratio: f64, seed: u64) -> Result<WindowSet> {
    match pipeline::rebalance(ws, ratio, seed) {
        Err(CetError::InsufficientData { .. }) => {
            let max_pos = ((ws.negatives() as f64 / ratio).floor() as usize).max(1);
            let capped = cap_positives(ws, max_pos, derive_seed(seed, 0xCA9));
            pipeline::rebalance(&capped, ratio, seed)
        }
        other => other,
    }
}

/// Deterministically subsamples positives down to `max_pos`.
pub fn cap_positives(ws: &WindowSet, max_pos: usize, seed: u64) -> WindowSet {
    let pos: Vec<usize> = (0..ws.len()).filter(|&i| ws.labels[i]).collect();
    if pos.len() <= max_pos {
        return ws.clone();
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = pos.clone();
    shuffled.shuffle(&mut rng);
    let mut keep: Vec<usize> = (0..ws.len()).filter(|&i| !ws.labels[i]).collect();
    keep.extend_from_slice(&shuffled[..max_pos]);
    keep.sort_unstable();
    ws.subset(&keep)
}

/// Caps, splits and balances one level's window pool into its three
/// partitions (unscaled). Fully deterministic given the config.
pub fn prepare_level_partitions(
    windows: &WindowSet,
    spec: &LevelSpec,
    cfg: &ArchConfig,
    salt: u64,
) -> Result<(WindowSet, WindowSet, WindowSet)> {
    // Global cap keeps every partition balanceable.
    let worst = spec.train_balance.max(spec.eval_balance);
    let max_pos = ((windows.negatives() as f64 / worst).floor() as usize).max(1);
    let pool = cap_positives(windows, max_pos, derive_seed(cfg.seed, salt));
    let split_spec = SplitSpec::new(
        cfg.split.0,
        cfg.split.1,
        cfg.split.2,
        derive_seed(cfg.seed, salt ^ 0x51),
    )?;
    let (train, val, test) = pipeline::split(&pool, &split_spec)?;
    let train = balance_partition(&train, spec.train_balance, derive_seed(cfg.seed, salt ^ 0x52))?;
    let val = balance_partition(&val, spec.eval_balance, derive_seed(cfg.seed, salt ^ 0x53))?;
    let test = balance_partition(&test, spec.eval_balance, derive_seed(cfg.seed, salt ^ 0x54))?;
    Ok((train, val, test))
}

/// Level salts used when deriving per-level seeds.
pub const LEVEL_SALTS: [u64; 3] = [0x1000, 0x2000, 0x3000];

/// Splits, balances and scales one level's window pool, then fits the
/// classifier on the training partition.
fn fit_level(
    windows: &WindowSet,
    spec: &LevelSpec,
    cfg: &ArchConfig,
    salt: u64,
) -> Result<(LevelModel, LevelSets)> {
    let (train, val, test) = prepare_level_partitions(windows, spec, cfg, salt)?;
    let scaler = pipeline::fit_scaler(&train, cfg.scale);
    let train = pipeline::apply_scaler(&scaler, &train)?;
    let val = pipeline::apply_scaler(&scaler, &val)?;
    let test = pipeline::apply_scaler(&scaler, &test)?;
    let ts = TrainSet::from_windows(&train)?;
    let model = ml::train(cfg.algorithm, &cfg.hyperparams, &ts, derive_seed(cfg.seed, salt ^ 0x55))?;
    Ok((LevelModel { model, scaler }, LevelSets { train, val, test }))
}

/// Assembles the per-level window pools from the use-case bundle.
pub fn level_window_pools(
    bundle: &UseCaseBundle,
    cfg: &ArchConfig,
) -> Result<(WindowSet, WindowSet, WindowSet)> {
    let mut l1_pool: Option<WindowSet> = None;
    let mut l2_pool: Option<WindowSet> = None;
    let mut l3_pool: Option<WindowSet> = None;
    let add = |pool: &mut Option<WindowSet>, ws: WindowSet| -> Result<()> {
        match pool {
            None => *pool = Some(ws),
            Some(p) => p.append(&ws)?,
        }
        Ok(())
    };
    for ds in bundle.all_frames() {
        let frame = pipeline::clean(&ds.frame, &cfg.clean)?;
        let is_l3_frame = matches!(ds.id.as_str(), "fdi1" | "fdi2" | "fdi3" | "other_training");
        let ot = pipeline::windowize(
            &frame.ot,
            &frame.states,
            &l1_positive,
            cfg.window_len,
            cfg.step,
            LabelRule::AnyPositive,
            &ds.id,
        )?;
        // The falsification level trains on the falsified datasets against
        // the relabeled trip-unavailable pool only.
        if is_l3_frame {
            let l3 = pipeline::windowize(
                &frame.ot,
                &frame.states,
                &l3_positive,
                cfg.window_len,
                cfg.step,
                LabelRule::AnyPositive,
                &ds.id,
            )?;
            add(&mut l3_pool, l3)?;
        }
        add(&mut l1_pool, ot)?;
        let it_states = it_states(&frame);
        let it = pipeline::windowize(
            &frame.it,
            &it_states,
            &l2_positive,
            cfg.window_len,
            cfg.step,
            LabelRule::AnyPositive,
            &ds.id,
        )?;
        add(&mut l2_pool, it)?;
    }
    Ok((
        l1_pool.ok_or_else(|| CetError::Data("no datasets in bundle".into()))?,
        l2_pool.ok_or_else(|| CetError::Data("no datasets in bundle".into()))?,
        l3_pool.ok_or_else(|| CetError::Data("no falsification datasets in bundle".into()))?,
    ))
}

/// Trains all three levels and returns the classifier plus the partitions
/// it was fitted and evaluated on.
pub fn train_architecture(
    bundle: &UseCaseBundle,
    cfg: &ArchConfig,
) -> Result<(ThreeLevelClassifier, ArchSets)> {
    let (l1_pool, l2_pool, l3_pool) = level_window_pools(bundle, cfg)?;
    let (l1, l1_sets) = fit_level(&l1_pool, &cfg.l1, cfg, LEVEL_SALTS[0])?;
    let (l2, l2_sets) = fit_level(&l2_pool, &cfg.l2, cfg, LEVEL_SALTS[1])?;
    let (l3, l3_sets) = fit_level(&l3_pool, &cfg.l3, cfg, LEVEL_SALTS[2])?;
    Ok((
        ThreeLevelClassifier { l1, l2, l3, window_len: cfg.window_len, step: cfg.step },
        ArchSets { l1: l1_sets, l2: l2_sets, l3: l3_sets },
    ))
}

/// Rebuilds all three levels' unscaled partitions without training, for
/// evaluating a stored classifier against its recorded configuration.
pub fn prepare_partitions(
    bundle: &UseCaseBundle,
    cfg: &ArchConfig,
) -> Result<[(WindowSet, WindowSet, WindowSet); 3]> {
    let (l1_pool, l2_pool, l3_pool) = level_window_pools(bundle, cfg)?;
    Ok([
        prepare_level_partitions(&l1_pool, &cfg.l1, cfg, LEVEL_SALTS[0])?,
        prepare_level_partitions(&l2_pool, &cfg.l2, cfg, LEVEL_SALTS[1])?,
        prepare_level_partitions(&l3_pool, &cfg.l3, cfg, LEVEL_SALTS[2])?,
    ])
}

/// One classified window of a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowVerdict {
    /// Timestamp (seconds) of the window's last plant-telemetry sample.
    pub t_end: usize,
    pub l1: bool,
    pub l2: bool,
    pub l3: bool,
    pub l3_evaluated: bool,
    pub predicted: FusedClass,
    pub truth: FusedClass,
}

impl ThreeLevelClassifier {
    /// Runs the gated levels on one raw window pair and fuses the bits.
    pub fn classify_window(&self, ot_window: &[f64], it_window: &[f64]) -> Result<(LevelOutputs, FusedClass)> {
        let l1 = self.l1.predict_raw(ot_window)?;
        let l2 = self.l2.predict_raw(it_window)?;
        let l3 = if l1 { self.l3.predict_raw(ot_window)? } else { false };
        let lo = LevelOutputs::gated(l1, l2, l3);
        let fused = fuse_levels(lo)?;
        Ok((lo, fused))
    }

    /// Classifies every window of a frame. Each plant-telemetry window is
    /// paired with the latest network-telemetry window that ends no later
    /// than it does.
    pub fn classify_frame(&self, frame: &TelemetryFrame, clean: &CleanPolicy) -> Result<Vec<WindowVerdict>> {
        let frame = pipeline::clean(frame, clean)?;
        let w = self.window_len;
        let ot_windows = pipeline::windowize(
            &frame.ot,
            &frame.states,
            &l1_positive,
            w,
            self.step,
            LabelRule::AnyPositive,
            "stream",
        )?;
        if frame.it.n_steps < w {
            return Err(CetError::TooShort { len: frame.it.n_steps, window: w });
        }
        let n_it_windows = pipeline::window_count(frame.it.n_steps, w, 1);
        let it_window_at = |j: usize| -> Vec<f64> {
            let mut row = Vec::with_capacity(frame.it.n_signals * w);
            for s in 0..frame.it.n_signals {
                row.extend_from_slice(&frame.it.row(s)[j..j + w]);
            }
            row
        };
        let mut out = Vec::with_capacity(ot_windows.len());
        for i in 0..ot_windows.len() {
            let start = i * self.step;
            let t_end = start + w - 1;
            // Latest IT window whose last sample is at or before t_end.
            let last_sample = (t_end as f64 / frame.it_period_s).floor() as isize;
            let j = (last_sample - (w as isize - 1)).clamp(0, n_it_windows as isize - 1) as usize;
            let it_row = it_window_at(j);
            let (lo, fused) = self.classify_window(ot_windows.row(i), &it_row)?;
            out.push(WindowVerdict {
                t_end,
                l1: lo.l1,
                l2: lo.l2,
                l3: lo.l3,
                l3_evaluated: lo.l3_evaluated,
                predicted: fused,
                truth: ot_windows.classes[i],
            });
        }
        Ok(out)
    }
}

/// Stacks plant rows with network rows resampled (hold-last) onto the
/// 1 Hz plant clock: the combined 78-signal view.
pub fn align_ot_it(frame: &TelemetryFrame) -> SignalMatrix {
    let n = frame.ot.n_steps;
    let total = frame.ot.n_signals + frame.it.n_signals;
    let mut m = SignalMatrix::zeros(total, n);
    for s in 0..frame.ot.n_signals {
        for t in 0..n {
            m.set(s, t, frame.ot.raw(s, t));
        }
    }
    for s in 0..frame.it.n_signals {
        let mut j = 0usize;
        for t in 0..n {
            while j + 1 < frame.it.n_steps && frame.it_time(j + 1) <= t as f64 {
                j += 1;
            }
            m.set(frame.ot.n_signals + s, t, frame.it.raw(s, j));
        }
    }
    m
}

/// Single-model baseline over the combined signal view: one binary
/// normal-vs-abnormal classifier, balance ratio 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombinedClassifier {
    pub model: TrainedModel,
    pub scaler: ScalerParams,
    pub window_len: usize,
    pub step: usize,
}

pub fn combined_positive(s: &ScenarioState) -> bool {
    !s.is_normal()
}

pub fn train_combined(
    bundle: &UseCaseBundle,
    cfg: &ArchConfig,
) -> Result<(CombinedClassifier, LevelSets)> {
    let mut pool: Option<WindowSet> = None;
    for ds in bundle.all_frames() {
        let frame = pipeline::clean(&ds.frame, &cfg.clean)?;
        let aligned = align_ot_it(&frame);
        let ws = pipeline::windowize(
            &aligned,
            &frame.states,
            &combined_positive,
            cfg.window_len,
            cfg.step,
            LabelRule::AnyPositive,
            &ds.id,
        )?;
        match &mut pool {
            None => pool = Some(ws),
            Some(p) => p.append(&ws)?,
        }
    }
    let pool = pool.ok_or_else(|| CetError::Data("no datasets in bundle".into()))?;
    let spec = LevelSpec { train_balance: 1.0, eval_balance: 1.0 };
    let (level, sets) = fit_level(&pool, &spec, cfg, 0x4000)?;
    Ok((
        CombinedClassifier {
            model: level.model,
            scaler: level.scaler,
            window_len: cfg.window_len,
            step: cfg.step,
        },
        sets,
    ))
}

impl CombinedClassifier {
    pub fn predict_raw(&self, window: &[f64]) -> Result<bool> {
        let mut row = window.to_vec();
        self.scaler.apply_row(&mut row)?;
        self.model.predict(&row)
    }
}
