//! On-disk formats: wide per-dataset CSV telemetry (one file per clock),
//! sparse artifact-mask CSV, the bundle manifest, classifier files and
//! the sweep result table. All writers are deterministic so reruns with
//! the same seed produce byte-identical trees.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::{ArchConfig, ThreeLevelClassifier};
use crate::attacks::{Dataset, DatasetRecord, UseCaseBundle};
use crate::catalog::SignalCatalog;
use crate::error::{CetError, Result};
use crate::eval::SweepRow;
use crate::frame::{ArtifactKind, CellMask, Mode, SignalMatrix, TelemetryFrame};
use crate::model::{DosLevel, ScenarioState, TripCause};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const CLASSIFIER_FORMAT_VERSION: u32 = 1;

fn cause_str(c: TripCause) -> &'static str {
    match c {
        TripCause::None => "none",
        TripCause::Cyber => "cyber",
        TripCause::Malfunction => "malfunction",
    }
}

fn parse_cause(s: &str) -> Result<TripCause> {
    match s {
        "none" => Ok(TripCause::None),
        "cyber" => Ok(TripCause::Cyber),
        "malfunction" => Ok(TripCause::Malfunction),
        _ => Err(CetError::Data(format!("unknown trip cause '{s}'"))),
    }
}

fn dos_str(d: DosLevel) -> &'static str {
    match d {
        DosLevel::None => "none",
        DosLevel::Low => "low",
        DosLevel::High => "high",
    }
}

fn parse_dos(s: &str) -> Result<DosLevel> {
    match s {
        "none" => Ok(DosLevel::None),
        "low" => Ok(DosLevel::Low),
        "high" => Ok(DosLevel::High),
        _ => Err(CetError::Data(format!("unknown dos level '{s}'"))),
    }
}

fn kind_str(k: ArtifactKind) -> &'static str {
    match k {
        ArtifactKind::Outlier => "outlier",
        ArtifactKind::Null => "null",
        ArtifactKind::Falsified => "falsified",
        ArtifactKind::Dos => "dos",
    }
}

fn parse_kind(s: &str) -> Result<ArtifactKind> {
    match s {
        "outlier" => Ok(ArtifactKind::Outlier),
        "null" => Ok(ArtifactKind::Null),
        "falsified" => Ok(ArtifactKind::Falsified),
        "dos" => Ok(ArtifactKind::Dos),
        _ => Err(CetError::Data(format!("unknown artifact kind '{s}'"))),
    }
}

/// Writes one clock's matrix as wide CSV:
/// `t,<signal names...>,state_trip,state_cause,state_fdi,state_dos,mode`.
/// Null cells become empty fields.
fn write_matrix_csv(
    path: &Path,
    matrix: &SignalMatrix,
    names: &[String],
    times: impl Fn(usize) -> f64,
    state_of: impl Fn(usize) -> ScenarioState,
    mode_of: impl Fn(usize) -> Mode,
) -> Result<()> {
    if names.len() != matrix.n_signals {
        return Err(CetError::DimensionMismatch { expected: matrix.n_signals, got: names.len() });
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().cloned());
    header.extend(
        ["state_trip", "state_cause", "state_fdi", "state_dos", "mode"].map(str::to_string),
    );
    w.write_record(&header)?;
    for t in 0..matrix.n_steps {
        let mut row = Vec::with_capacity(header.len());
        row.push(format_time(times(t)));
        for s in 0..matrix.n_signals {
            match matrix.get(s, t) {
                Some(v) => row.push(format_float(v)),
                None => row.push(String::new()),
            }
        }
        let st = state_of(t);
        row.push(if st.trip_available { "1" } else { "0" }.to_string());
        row.push(cause_str(st.trip_cause).to_string());
        row.push(st.fdi_level.to_string());
        row.push(dos_str(st.dos_level).to_string());
        row.push(match mode_of(t) {
            Mode::Operating => "operating".to_string(),
            Mode::Shutdown => "shutdown".to_string(),
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}


fn format_float(v: f64) -> String {
    // Shortest round-trip representation: stable and lossless.
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

fn format_time(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("{}", t as u64)
    } else {
        format!("{t}")
    }
}

struct MatrixCsv {
    matrix: SignalMatrix,
    times: Vec<f64>,
    states: Vec<ScenarioState>,
    modes: Vec<Mode>,
}

fn read_matrix_csv(path: &Path, expected_signals: usize) -> Result<MatrixCsv> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let n_cols = header.len();
    if n_cols != expected_signals + 6 {
        return Err(CetError::DimensionMismatch { expected: expected_signals + 6, got: n_cols });
    }
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in r.records() {
        rows.push(rec?);
    }
    let n_steps = rows.len();
    let mut matrix = SignalMatrix::zeros(expected_signals, n_steps);
    let mut times = Vec::with_capacity(n_steps);
    let mut states = Vec::with_capacity(n_steps);
    let mut modes = Vec::with_capacity(n_steps);
    let parse_f = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| CetError::Data(format!("bad number '{s}': {e}")))
    };
    for (t, rec) in rows.iter().enumerate() {
        times.push(parse_f(&rec[0])?);
        for s in 0..expected_signals {
            let cell = &rec[1 + s];
            if cell.is_empty() {
                matrix.set_null(s, t);
            } else {
                matrix.set(s, t, parse_f(cell)?);
            }
        }
        let base = 1 + expected_signals;
        let trip_available = &rec[base] == "1";
        let trip_cause = parse_cause(&rec[base + 1])?;
        let fdi_level: u8 = rec[base + 2]
            .parse()
            .map_err(|_| CetError::Data(format!("bad fdi level '{}'", &rec[base + 2])))?;
        let dos_level = parse_dos(&rec[base + 3])?;
        states.push(ScenarioState { trip_available, trip_cause, fdi_level, dos_level });
        modes.push(match &rec[base + 4] {
            "operating" => Mode::Operating,
            "shutdown" => Mode::Shutdown,
            other => return Err(CetError::Data(format!("unknown mode '{other}'"))),
        });
    }
    Ok(MatrixCsv { matrix, times, states, modes })
}

/// Sparse mask CSV: `signal,t,kind,original`.
fn write_mask_csv(path: &Path, mask: &CellMask) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["signal", "t", "kind", "original"])?;
    for e in &mask.entries {
        w.write_record([
            e.signal.to_string(),
            e.t.to_string(),
            kind_str(e.kind).to_string(),
            format_float(e.original),
        ])
        ?;
    }
    w.flush()?;
    Ok(())
}

fn read_mask_csv(path: &Path) -> Result<CellMask> {
    let mut mask = CellMask::default();
    let mut r = csv::Reader::from_path(path)?;
    for rec in r.records() {
        let rec = rec?;
        let signal: usize =
            rec[0].parse().map_err(|_| CetError::Data(format!("bad signal '{}'", &rec[0])))?;
        let t: usize =
            rec[1].parse().map_err(|_| CetError::Data(format!("bad timestep '{}'", &rec[1])))?;
        let kind = parse_kind(&rec[2])?;
        let original: f64 =
            rec[3].parse().map_err(|_| CetError::Data(format!("bad value '{}'", &rec[3])))?;
        mask.push(signal, t, kind, original);
    }
    Ok(mask)
}

/// Dataset role within the bundle layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    State,
    OtherTraining,
    DosOnNormal,
    /// Held-out attack variant absent from training.
    OutOfTraining,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub role: DatasetRole,
    #[serde(flatten)]
    pub record: DatasetRecord,
}

/// Bundle manifest. Carries no timestamps: a bundle regenerated from the
/// same seed is byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub entries: Vec<ManifestEntry>,
}

fn dataset_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{id}_ot.csv")),
        dir.join(format!("{id}_it.csv")),
        dir.join(format!("{id}_ot_mask.csv")),
        dir.join(format!("{id}_it_mask.csv")),
    )
}

fn save_dataset(dir: &Path, ds: &Dataset, catalog: &SignalCatalog) -> Result<()> {
    let (ot_path, it_path, ot_mask, it_mask) = dataset_paths(dir, &ds.id);
    let f = &ds.frame;
    write_matrix_csv(
        &ot_path,
        &f.ot,
        &catalog.ot_names(),
        |t| t as f64,
        |t| f.states[t],
        |t| f.modes[t],
    )?;
    write_matrix_csv(
        &it_path,
        &f.it,
        &catalog.it_names(),
        |i| f.it_time(i),
        |i| f.states[f.it_to_ot_step(i)],
        |i| f.modes[f.it_to_ot_step(i)],
    )?;
    write_mask_csv(&ot_mask, &f.ot_mask)?;
    write_mask_csv(&it_mask, &f.it_mask)?;
    Ok(())
}

fn load_dataset(dir: &Path, rec: &DatasetRecord, catalog: &SignalCatalog) -> Result<Dataset> {
    let (ot_path, it_path, ot_mask, it_mask) = dataset_paths(dir, &rec.id);
    let mut ot = read_matrix_csv(&ot_path, catalog.n_ot())?;
    let it = read_matrix_csv(&it_path, catalog.n_it())?;
    let it_period_s = if it.times.len() >= 2 { it.times[1] - it.times[0] } else { 1.0 };
    let ot_mask = read_mask_csv(&ot_mask)?;
    // Null cells serialize as empty fields; the pre-null raw value is
    // recoverable from the mask, making the round trip exact.
    for e in &ot_mask.entries {
        if e.kind == ArtifactKind::Null {
            ot.matrix.set(e.signal, e.t, e.original);
            ot.matrix.set_null(e.signal, e.t);
        }
    }
    let frame = TelemetryFrame {
        ot: ot.matrix,
        it: it.matrix,
        it_period_s,
        states: ot.states,
        modes: ot.modes,
        ot_mask,
        it_mask: read_mask_csv(&it_mask)?,
    };
    Ok(Dataset { id: rec.id.clone(), state: rec.state, seed: rec.seed, frame })
}

/// Writes the whole bundle under `dir`: per-dataset telemetry and mask
/// CSVs plus `manifest.json`.
pub fn save_bundle(dir: &Path, bundle: &UseCaseBundle, catalog: &SignalCatalog) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    let mut push = |role: DatasetRole, ds: &Dataset| -> Result<()> {
        save_dataset(dir, ds, catalog)?;
        entries.push(ManifestEntry {
            role,
            record: DatasetRecord {
                id: ds.id.clone(),
                state: ds.state,
                seed: ds.seed,
                ot_points: ds.frame.ot.cells(),
                it_points: ds.frame.it.cells(),
            },
        });
        Ok(())
    };
    for ds in &bundle.datasets {
        push(DatasetRole::State, ds)?;
    }
    push(DatasetRole::OtherTraining, &bundle.other_training)?;
    for ds in &bundle.dos_on_normal {
        push(DatasetRole::DosOnNormal, ds)?;
    }
    let manifest = BundleManifest { format_version: BUNDLE_FORMAT_VERSION, entries };
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| CetError::Data(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn load_bundle(dir: &Path, catalog: &SignalCatalog) -> Result<UseCaseBundle> {
    let json = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: BundleManifest =
        serde_json::from_str(&json).map_err(|e| CetError::Data(e.to_string()))?;
    if manifest.format_version != BUNDLE_FORMAT_VERSION {
        return Err(CetError::Data(format!(
            "unsupported bundle format version {} (expected {})",
            manifest.format_version, BUNDLE_FORMAT_VERSION
        )));
    }
    let mut datasets = Vec::new();
    let mut other_training = None;
    let mut dos_on_normal = Vec::new();
    for entry in &manifest.entries {
        let ds = load_dataset(dir, &entry.record, catalog)?;
        match entry.role {
            DatasetRole::State => datasets.push(ds),
            DatasetRole::OtherTraining => other_training = Some(ds),
            DatasetRole::DosOnNormal => dos_on_normal.push(ds),
            DatasetRole::OutOfTraining => {
                return Err(CetError::Data(format!(
                    "dataset {} has out-of-training role inside a bundle manifest",
                    entry.record.id
                )))
            }
        }
    }
    let other_training =
        other_training.ok_or_else(|| CetError::MissingDataset("other_training".into()))?;
    let manifest_records = manifest.entries.iter().map(|e| e.record.clone()).collect();
    Ok(UseCaseBundle { datasets, other_training, dos_on_normal, manifest: manifest_records })
}

/// Persists standalone datasets (the held-out attack variants) in the
/// bundle layout, with their own manifest.
pub fn save_datasets(dir: &Path, datasets: &[Dataset], catalog: &SignalCatalog) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for ds in datasets {
        save_dataset(dir, ds, catalog)?;
        entries.push(ManifestEntry {
            role: DatasetRole::OutOfTraining,
            record: DatasetRecord {
                id: ds.id.clone(),
                state: ds.state,
                seed: ds.seed,
                ot_points: ds.frame.ot.cells(),
                it_points: ds.frame.it.cells(),
            },
        });
    }
    let manifest = BundleManifest { format_version: BUNDLE_FORMAT_VERSION, entries };
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| CetError::Data(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn load_datasets(dir: &Path, catalog: &SignalCatalog) -> Result<Vec<Dataset>> {
    let json = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: BundleManifest =
        serde_json::from_str(&json).map_err(|e| CetError::Data(e.to_string()))?;
    if manifest.format_version != BUNDLE_FORMAT_VERSION {
        return Err(CetError::Data(format!(
            "unsupported bundle format version {} (expected {})",
            manifest.format_version, BUNDLE_FORMAT_VERSION
        )));
    }
    manifest.entries.iter().map(|e| load_dataset(dir, &e.record, catalog)).collect()
}

/// On-disk trained-system container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierFile {
    pub format_version: u32,
    pub config: ArchConfig,
    pub classifier: ThreeLevelClassifier,
}

pub fn save_classifier(path: &Path, cfg: &ArchConfig, clf: &ThreeLevelClassifier) -> Result<()> {
    let file = ClassifierFile {
        format_version: CLASSIFIER_FORMAT_VERSION,
        config: cfg.clone(),
        classifier: clf.clone(),
    };
    let json = serde_json::to_string(&file).map_err(|e| CetError::Data(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_classifier(path: &Path) -> Result<ClassifierFile> {
    let json = fs::read_to_string(path)?;
    let file: ClassifierFile =
        serde_json::from_str(&json).map_err(|e| CetError::Data(e.to_string()))?;
    if file.format_version != CLASSIFIER_FORMAT_VERSION {
        return Err(CetError::Data(format!(
            "unsupported classifier format version {} (expected {})",
            file.format_version, CLASSIFIER_FORMAT_VERSION
        )));
    }
    Ok(file)
}

/// Sweep table CSV. When `with_wall_time` is false the timing column is
/// omitted, leaving a fully deterministic file.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow], with_wall_time: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "rank", "index", "algorithm", "window_len", "step", "train_balance", "scaling", "split",
        "val_f1_l1", "val_f1_l2", "val_f1_l3", "mean_val_f1", "test_f1_l1", "test_f1_l2",
        "test_f1_l3",
    ];
    if with_wall_time {
        header.push("wall_ms");
    }
    w.write_record(&header)?;
    for (rank, row) in rows.iter().enumerate() {
        let c = &row.combo;
        let mut rec = vec![
            rank.to_string(),
            row.index.to_string(),
            c.algorithm.name().to_string(),
            c.window_len.to_string(),
            c.step.to_string(),
            format_float(c.train_balance),
            format!("{:?}", c.scale).to_lowercase(),
            format!("{}/{}/{}", c.split.0, c.split.1, c.split.2),
            format_float(row.val_f1[0]),
            format_float(row.val_f1[1]),
            format_float(row.val_f1[2]),
            format_float(row.mean_val_f1),
            format_float(row.test_f1[0]),
            format_float(row.test_f1[1]),
            format_float(row.test_f1[2]),
        ];
        if with_wall_time {
            rec.push(row.wall_ms.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Confusion-matrix CSV: header row and column of class names.
pub fn write_confusion_csv(
    path: &Path,
    cm: &crate::eval::ConfusionMatrix,
    class_names: &[&str],
) -> Result<()> {
    if class_names.len() != cm.k {
        return Err(CetError::DimensionMismatch { expected: cm.k, got: class_names.len() });
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["truth\\pred".to_string()];
    header.extend(class_names.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for t in 0..cm.k {
        let mut row = vec![class_names[t].to_string()];
        for p in 0..cm.k {
            row.push(cm.count(t, p).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Minimal SVG polyline chart (used for ROC curves).
pub fn write_svg_curve(path: &Path, title: &str, points: &[(f64, f64)]) -> Result<()> {
    let (w, h, pad) = (480.0, 480.0, 40.0);
    let sx = |x: f64| pad + x * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - y * (h - 2.0 * pad);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"monospace\">{title}</text>\n",
        w / 2.0
    ));
    // Axes and the chance diagonal.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        sx(0.0), sy(0.0), sx(1.0), sy(0.0)
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        sx(0.0), sy(0.0), sx(0.0), sy(1.0)
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"lightgray\" stroke-dasharray=\"4\"/>\n",
        sx(0.0), sy(0.0), sx(1.0), sy(1.0)
    ));
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", sx(*x), sy(*y))).collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n",
        pts.join(" ")
    ));
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}
