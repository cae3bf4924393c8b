//! Turns labeled frames into ML-ready window matrices: cleaning,
//! per-signal normalization, windowing/flattening, class rebalancing and
//! train/validation/test splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CetError, Result};
use crate::frame::{SignalMatrix, TelemetryFrame};
use crate::model::{true_class, FusedClass, ScenarioState};

const STD_FLOOR: f64 = 1e-12;

/// Null-imputation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanPolicy {
    /// Clip cells further than `k` median absolute deviations from the
    /// signal median. Off by default.
    pub outlier_clip_mad: Option<f64>,
}

impl Default for CleanPolicy {
    fn default() -> Self {
        CleanPolicy { outlier_clip_mad: None }
    }
}

fn clean_matrix(m: &SignalMatrix, policy: &CleanPolicy) -> Result<SignalMatrix> {
    let mut out = m.clone();
    for s in 0..m.n_signals {
        // Hold-last-value imputation; leading nulls take the first valid value.
        let first_valid = (0..m.n_steps)
            .find(|&t| !m.is_null(s, t))
            .ok_or(CetError::AllNull { signal: s })?;
        let mut last = m.raw(s, first_valid);
        for t in 0..m.n_steps {
            if out.is_null(s, t) {
                out.set(s, t, last);
            } else {
                last = out.raw(s, t);
            }
        }
        if let Some(k) = policy.outlier_clip_mad {
            let mut vals: Vec<f64> = (0..m.n_steps).map(|t| out.raw(s, t)).collect();
            vals.sort_by(|a, b| a.total_cmp(b));
            let median = vals[vals.len() / 2];
            let mut devs: Vec<f64> = vals.iter().map(|v| (v - median).abs()).collect();
            devs.sort_by(|a, b| a.total_cmp(b));
            let mad = devs[devs.len() / 2].max(STD_FLOOR);
            let (lo, hi) = (median - k * mad, median + k * mad);
            for t in 0..m.n_steps {
                let v = out.raw(s, t);
                if v < lo {
                    out.set(s, t, lo);
                } else if v > hi {
                    out.set(s, t, hi);
                }
            }
        }
    }
    Ok(out)
}

/// Imputes nulls (hold-last-value) and optionally clips outliers on both
/// the OT and IT matrices.
pub fn clean(frame: &TelemetryFrame, policy: &CleanPolicy) -> Result<TelemetryFrame> {
    let mut out = frame.clone();
    out.ot = clean_matrix(&frame.ot, policy)?;
    out.it = clean_matrix(&frame.it, policy)?;
    Ok(out)
}

/// Normalization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMethod {
    MinMax,
    Standard,
}

/// Per-signal normalization statistics fit on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub method: ScaleMethod,
    pub n_signals: usize,
    pub window_len: usize,
    /// (min, max) or (mean, std) per signal depending on the method.
    pub stats: Vec<(f64, f64)>,
}

/// How a window's binary label aggregates per-timestep flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Positive if any in-window timestep is positive (default).
    AnyPositive,
    /// Positive if the last in-window timestep is positive.
    LastTimestep,
}

/// Where a window came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOrigin {
    pub frame_id: String,
    pub start: usize,
}

/// Flattened fixed-length windows with binary labels; the unit of ML input.
/// Features are stored signal-major: the `window_len` samples of signal 0,
/// then signal 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub n_signals: usize,
    pub window_len: usize,
    pub step: usize,
    features: Vec<f64>,
    pub labels: Vec<bool>,
    /// Ground-truth event class per window (class of the latest abnormal
    /// in-window timestep, `Normal` if none).
    pub classes: Vec<FusedClass>,
    pub origins: Vec<WindowOrigin>,
}

impl WindowSet {
    pub fn width(&self) -> usize {
        self.n_signals * self.window_len
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.features[i * w..(i + 1) * w]
    }

    /// Flat row-major feature storage.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn empty_like(&self) -> WindowSet {
        WindowSet {
            n_signals: self.n_signals,
            window_len: self.window_len,
            step: self.step,
            features: Vec::new(),
            labels: Vec::new(),
            classes: Vec::new(),
            origins: Vec::new(),
        }
    }

    /// New set holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> WindowSet {
        let w = self.width();
        let mut out = self.empty_like();
        for &i in indices {
            out.features.extend_from_slice(&self.features[i * w..(i + 1) * w]);
            out.labels.push(self.labels[i]);
            out.classes.push(self.classes[i]);
            out.origins.push(self.origins[i].clone());
        }
        out
    }

    /// Appends all rows of `other`; geometries must match.
    pub fn append(&mut self, other: &WindowSet) -> Result<()> {
        if other.width() != self.width() {
            return Err(CetError::DimensionMismatch { expected: self.width(), got: other.width() });
        }
        self.features.extend_from_slice(&other.features);
        self.labels.extend_from_slice(&other.labels);
        self.classes.extend_from_slice(&other.classes);
        self.origins.extend_from_slice(&other.origins);
        Ok(())
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }
}

/// Number of windows produced by the sliding geometry.
pub fn window_count(len: usize, window_len: usize, step: usize) -> usize {
    (len - window_len) / step + 1
}

/// Slices a matrix into flattened windows. `states` carries per-timestep
/// ground truth on the matrix clock; `positive` defines the binary label
/// of a timestep for the consuming level.
pub fn windowize(
    matrix: &SignalMatrix,
    states: &[ScenarioState],
    positive: &dyn Fn(&ScenarioState) -> bool,
    window_len: usize,
    step: usize,
    rule: LabelRule,
    frame_id: &str,
) -> Result<WindowSet> {
    let n = matrix.n_steps;
    if window_len == 0 || step == 0 {
        return Err(CetError::Config("window length and step must be >= 1".into()));
    }
    if n < window_len {
        return Err(CetError::TooShort { len: n, window: window_len });
    }
    debug_assert_eq!(states.len(), n);
    let n_windows = window_count(n, window_len, step);
    let width = matrix.n_signals * window_len;
    let mut features = Vec::with_capacity(n_windows * width);
    let mut labels = Vec::with_capacity(n_windows);
    let mut classes = Vec::with_capacity(n_windows);
    let mut origins = Vec::with_capacity(n_windows);
    for i in 0..n_windows {
        let start = i * step;
        for s in 0..matrix.n_signals {
            let row = matrix.row(s);
            features.extend_from_slice(&row[start..start + window_len]);
        }
        let span = &states[start..start + window_len];
        let label = match rule {
            LabelRule::AnyPositive => span.iter().any(positive),
            LabelRule::LastTimestep => positive(&span[window_len - 1]),
        };
        labels.push(label);
        let class = span
            .iter()
            .rev()
            .find(|st| !st.is_normal())
            .map(true_class)
            .unwrap_or(FusedClass::Normal);
        classes.push(class);
        origins.push(WindowOrigin { frame_id: frame_id.to_string(), start });
    }
    Ok(WindowSet {
        n_signals: matrix.n_signals,
        window_len,
        step,
        features,
        labels,
        classes,
        origins,
    })
}

/// Fits per-signal normalization statistics on a training window set.
pub fn fit_scaler(train: &WindowSet, method: ScaleMethod) -> ScalerParams {
    let mut stats = Vec::with_capacity(train.n_signals);
    let w = train.window_len;
    for s in 0..train.n_signals {
        let mut count = 0usize;
        let mut sum = 0.0f64;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in 0..train.len() {
            for &v in &train.row(i)[s * w..(s + 1) * w] {
                count += 1;
                sum += v;
                min = min.min(v);
                max = max.max(v);
            }
        }
        match method {
            ScaleMethod::MinMax => stats.push((min, max)),
            ScaleMethod::Standard => {
                let mean = sum / count as f64;
                let mut var = 0.0f64;
                for i in 0..train.len() {
                    for &v in &train.row(i)[s * w..(s + 1) * w] {
                        var += (v - mean) * (v - mean);
                    }
                }
                let std = (var / count as f64).sqrt();
                stats.push((mean, std));
            }
        }
    }
    ScalerParams { method, n_signals: train.n_signals, window_len: w, stats }
}

impl ScalerParams {
    fn transform(&self, signal: usize, v: f64) -> f64 {
        let (a, b) = self.stats[signal];
        match self.method {
            ScaleMethod::MinMax => {
                let range = b - a;
                if range.abs() < STD_FLOOR {
                    0.0
                } else {
                    (v - a) / range
                }
            }
            ScaleMethod::Standard => {
                if b < STD_FLOOR {
                    0.0
                } else {
                    (v - a) / b
                }
            }
        }
    }

    /// Inverse of the min-max transform for non-degenerate signals.
    pub fn invert(&self, signal: usize, v: f64) -> f64 {
        let (a, b) = self.stats[signal];
        match self.method {
            ScaleMethod::MinMax => v * (b - a) + a,
            ScaleMethod::Standard => v * b + a,
        }
    }

    /// Scales a raw feature vector in place.
    pub fn apply_row(&self, row: &mut [f64]) -> Result<()> {
        let expected = self.n_signals * self.window_len;
        if row.len() != expected {
            return Err(CetError::DimensionMismatch { expected, got: row.len() });
        }
        for s in 0..self.n_signals {
            for v in &mut row[s * self.window_len..(s + 1) * self.window_len] {
                *v = self.transform(s, *v);
            }
        }
        Ok(())
    }
}

/// Applies fitted scaler statistics to a window set.
pub fn apply_scaler(params: &ScalerParams, data: &WindowSet) -> Result<WindowSet> {
    if params.n_signals != data.n_signals || params.window_len != data.window_len {
        return Err(CetError::DimensionMismatch {
            expected: params.n_signals * params.window_len,
            got: data.width(),
        });
    }
    let mut out = data.clone();
    let w = out.window_len;
    let width = out.width();
    for i in 0..out.len() {
        for s in 0..out.n_signals {
            for j in s * w..(s + 1) * w {
                let v = out.features[i * width + j];
                out.features[i * width + j] = params.transform(s, v);
            }
        }
    }
    Ok(out)
}

/// Subsamples the negative class without replacement so that
/// `negatives / positives == balance_ratio`. Positives are never dropped.
pub fn rebalance(windows: &WindowSet, balance_ratio: f64, seed: u64) -> Result<WindowSet> {
    let pos: Vec<usize> = (0..windows.len()).filter(|&i| windows.labels[i]).collect();
    let neg: Vec<usize> = (0..windows.len()).filter(|&i| !windows.labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(CetError::SingleClass(if pos.is_empty() { 1 } else { 0 }));
    }
    let wanted = (balance_ratio * pos.len() as f64).round() as usize;
    if wanted > neg.len() {
        return Err(CetError::InsufficientData {
            requested: balance_ratio,
            achievable: neg.len() as f64 / pos.len() as f64,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = neg.clone();
    shuffled.shuffle(&mut rng);
    let mut keep: Vec<usize> = pos.iter().copied().chain(shuffled[..wanted].iter().copied()).collect();
    keep.sort_unstable();
    Ok(windows.subset(&keep))
}

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<SplitSpec> {
        let spec = SplitSpec { train, val, test, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for f in [self.train, self.val, self.test] {
            if f <= 0.0 {
                return Err(CetError::BadSplit(format!("fraction {f} must be positive")));
            }
        }
        if ((self.train + self.val + self.test) - 1.0).abs() > 1e-9 {
            return Err(CetError::BadSplit("fractions must sum to 1".into()));
        }
        Ok(())
    }
}

/// Shuffled stratified split at window granularity.
pub fn split(windows: &WindowSet, spec: &SplitSpec) -> Result<(WindowSet, WindowSet, WindowSet)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..windows.len()).filter(|&i| windows.labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = (spec.train * n as f64).round() as usize;
        let n_val = (spec.val * n as f64).round() as usize;
        let n_val = n_val.min(n - n_train);
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(CetError::BadSplit(format!(
                "class with {n} windows yields an empty partition"
            )));
        }
        train_idx.extend_from_slice(&idx[..n_train]);
        val_idx.extend_from_slice(&idx[n_train..n_train + n_val]);
        test_idx.extend_from_slice(&idx[n_train + n_val..]);
    }
    for part in [&mut train_idx, &mut val_idx, &mut test_idx] {
        part.sort_unstable();
    }
    Ok((windows.subset(&train_idx), windows.subset(&val_idx), windows.subset(&test_idx)))
}
