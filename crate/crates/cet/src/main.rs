//! Command-line front end: generate / train / eval / sweep / classify /
//! report over the testbed library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use cet::arch;
use cet::attacks::{build_out_of_training, build_use_case};
use cet::catalog::SignalCatalog;
use cet::config::ExperimentConfig;
use cet::error::CetError;
use cet::eval::{self, binary_metrics, ConfusionMatrix};
use cet::io;
use cet::ml::TrainedModel;
use cet::pipeline::{self, WindowSet};
use cet::Result;

#[derive(Parser)]
#[command(name = "cet", version, about = "Layered cyber-event characterization testbed")]
struct Cli {
    /// Configuration file (flat key=value or JSON); defaults apply if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Progress messages on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelBundle {
    /// Trained classifier JSON.
    #[arg(long)]
    model: PathBuf,
    /// Dataset bundle directory.
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesizes the dataset bundle (and optional held-out variants) to disk.
    Generate,
    /// Trains the three-level system on a bundle and saves it.
    Train {
        /// Dataset bundle directory.
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Evaluates a trained system: confusion matrices and metric CSVs.
    Eval {
        #[command(flatten)]
        mb: ModelBundle,
        /// Also emit ROC curves as SVG.
        #[arg(long)]
        plots: bool,
    },
    /// Runs the hyperparameter grid and writes the ranked table.
    Sweep {
        /// Dataset bundle directory.
        #[arg(long)]
        bundle: PathBuf,
        /// Omit the wall-time column so reruns are byte-identical.
        #[arg(long)]
        no_wall_time: bool,
    },
    /// Streams per-window verdicts for one dataset to stdout.
    Classify {
        #[command(flatten)]
        mb: ModelBundle,
        /// Dataset id within the bundle (e.g. normal, fdi2, dos_high).
        #[arg(long)]
        id: String,
    },
    /// Out-of-training robustness report.
    Report {
        #[command(flatten)]
        mb: ModelBundle,
        /// Directory with the held-out datasets (default: <bundle>/out_of_training).
        #[arg(long)]
        held_out: Option<PathBuf>,
    },
}

fn exit_code_of(e: &CetError) -> u8 {
    match e {
        CetError::Config(_) => 2,
        CetError::Io(_) | CetError::Csv(_) | CetError::Data(_) | CetError::MissingDataset(_) => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_of(&e))
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(feature = "parallel")]
fn configure_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CetError::Config(format!("--jobs: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_jobs(_jobs: Option<usize>) -> Result<()> {
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    configure_jobs(cli.jobs)?;
    let cfg = load_config(cli)?;
    let catalog = SignalCatalog::default_catalog();
    let say = |msg: &str| {
        if cli.verbose {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Generate => cmd_generate(&cfg, &catalog, &cli.out, &say),
        Command::Train { bundle } => cmd_train(&cfg, &catalog, bundle, &cli.out, &say),
        Command::Eval { mb, plots } => cmd_eval(&catalog, mb, &cli.out, *plots, &say),
        Command::Sweep { bundle, no_wall_time } => {
            cmd_sweep(&cfg, &catalog, bundle, &cli.out, !*no_wall_time, &say)
        }
        Command::Classify { mb, id } => cmd_classify(&catalog, mb, id),
        Command::Report { mb, held_out } => cmd_report(&catalog, mb, held_out.as_deref(), &cli.out),
    }
}

fn cmd_generate(
    cfg: &ExperimentConfig,
    catalog: &SignalCatalog,
    out: &Path,
    say: &dyn Fn(&str),
) -> Result<()> {
    let uc = cfg.use_case_config();
    say("building use-case bundle");
    let bundle = build_use_case(catalog, &uc, cfg.seed)?;
    say(&format!("writing bundle to {}", out.display()));
    io::save_bundle(out, &bundle, catalog)?;
    if cfg.out_of_training {
        let unseen = build_out_of_training(catalog, &uc, cfg.seed)?;
        io::save_datasets(&out.join("out_of_training"), &unseen, catalog)?;
    }
    println!("wrote {} datasets to {}", bundle.manifest.len(), out.display());
    Ok(())
}

fn cmd_train(
    cfg: &ExperimentConfig,
    catalog: &SignalCatalog,
    bundle_dir: &Path,
    out: &Path,
    say: &dyn Fn(&str),
) -> Result<()> {
    let bundle = io::load_bundle(bundle_dir, catalog)?;
    let arch_cfg = cfg.arch_config();
    say("training three-level system");
    let start = Instant::now();
    let (clf, sets) = arch::train_architecture(&bundle, &arch_cfg)?;
    say(&format!("trained in {:.1}s", start.elapsed().as_secs_f64()));
    std::fs::create_dir_all(out)?;
    let path = out.join("classifier.json");
    io::save_classifier(&path, &arch_cfg, &clf)?;
    for (name, model, sets) in [
        ("level1", &clf.l1.model, &sets.l1),
        ("level2", &clf.l2.model, &sets.l2),
        ("level3", &clf.l3.model, &sets.l3),
    ] {
        let f1 = binary_metrics(&eval::binary_confusion(model, &sets.val)?)?.f1;
        println!("{name}: validation F1 {f1:.4}");
    }
    println!("saved {}", path.display());
    Ok(())
}

/// Scores every row of a scaled window set.
fn scores_of(model: &TrainedModel, ws: &WindowSet) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut scores = Vec::with_capacity(ws.len());
    for i in 0..ws.len() {
        scores.push(model.predict_score(ws.row(i))?);
    }
    Ok((scores, ws.labels.clone()))
}

fn write_metrics_csv(
    path: &Path,
    level_cms: &[(&str, ConfusionMatrix)],
    overall: &ConfusionMatrix,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scope", "accuracy", "precision", "recall", "f1"])?;
    for (name, cm) in level_cms {
        let m = binary_metrics(cm)?;
        w.write_record([
            name.to_string(),
            format!("{:.6}", m.accuracy),
            format!("{:.6}", m.precision),
            format!("{:.6}", m.recall),
            format!("{:.6}", m.f1),
        ])?;
    }
    let k = overall.k;
    let macro_of = |f: &dyn Fn(usize) -> f64| (0..k).map(f).sum::<f64>() / k as f64;
    w.write_record([
        "overall".to_string(),
        format!("{:.6}", overall.accuracy()),
        format!("{:.6}", macro_of(&|c| overall.class_metrics(c).precision)),
        format!("{:.6}", macro_of(&|c| overall.class_metrics(c).recall)),
        format!("{:.6}", overall.macro_f1()),
    ])?;
    w.flush()?;
    Ok(())
}

fn cmd_eval(
    catalog: &SignalCatalog,
    mb: &ModelBundle,
    out: &Path,
    plots: bool,
    say: &dyn Fn(&str),
) -> Result<()> {
    let file = io::load_classifier(&mb.model)?;
    let bundle = io::load_bundle(&mb.bundle, catalog)?;
    let clf = &file.classifier;
    say("re-deriving evaluation partitions");
    let parts = arch::prepare_partitions(&bundle, &file.config)?;
    std::fs::create_dir_all(out)?;
    let mut level_cms = Vec::new();
    let level_names = ["level1", "level2", "level3"];
    let models = [&clf.l1, &clf.l2, &clf.l3];
    for (i, (name, level)) in level_names.iter().zip(models).enumerate() {
        let test = pipeline::apply_scaler(&level.scaler, &parts[i].2)?;
        let cm = eval::binary_confusion(&level.model, &test)?;
        io::write_confusion_csv(&out.join(format!("{name}_cm.csv")), &cm, &["negative", "positive"])?;
        if plots {
            let (scores, labels) = scores_of(&level.model, &test)?;
            let (points, auc) = eval::roc(&scores, &labels)?;
            io::write_svg_curve(
                &out.join(format!("{name}_roc.svg")),
                &format!("{name} ROC (AUC {auc:.4})"),
                &points,
            )?;
        }
        level_cms.push((*name, cm));
    }
    say("running full-system fused evaluation");
    let overall = eval::fused_confusion(clf, bundle.all_frames().map(|d| &d.frame), &file.config.clean)?;
    let class_names: Vec<&str> =
        cet::model::FusedClass::ALL.iter().map(|c| c.name()).collect();
    io::write_confusion_csv(&out.join("overall_cm.csv"), &overall, &class_names)?;
    write_metrics_csv(&out.join("metrics.csv"), &level_cms, &overall)?;
    for (name, cm) in &level_cms {
        println!("{name}: test F1 {:.4}", binary_metrics(cm)?.f1);
    }
    println!("overall: 6-class accuracy {:.4}", overall.accuracy());
    println!("reports in {}", out.display());
    Ok(())
}

fn cmd_sweep(
    cfg: &ExperimentConfig,
    catalog: &SignalCatalog,
    bundle_dir: &Path,
    out: &Path,
    with_wall_time: bool,
    say: &dyn Fn(&str),
) -> Result<()> {
    let bundle = io::load_bundle(bundle_dir, catalog)?;
    let grid = cfg.sweep_grid();
    say(&format!("sweeping {} combinations", grid.len()));
    let rows = eval::sweep(&bundle, &grid, &cfg.hyperparams(), &cfg.arch_config().clean, cfg.seed)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("sweep.csv");
    io::write_sweep_csv(&path, &rows, with_wall_time)?;
    let best = &rows[0];
    println!(
        "best: {} W={} step={} balance={} (mean validation F1 {:.4})",
        best.combo.algorithm.name(),
        best.combo.window_len,
        best.combo.step,
        best.combo.train_balance,
        best.mean_val_f1
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_classify(catalog: &SignalCatalog, mb: &ModelBundle, id: &str) -> Result<()> {
    let file = io::load_classifier(&mb.model)?;
    let bundle = io::load_bundle(&mb.bundle, catalog)?;
    let ds = bundle.dataset(id)?;
    let verdicts = file.classifier.classify_frame(&ds.frame, &file.config.clean)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    use std::io::Write as _;
    for v in &verdicts {
        writeln!(
            lock,
            "{},{},{},{},{}",
            v.t_end,
            v.l1 as u8,
            v.l2 as u8,
            v.l3 as u8,
            v.predicted.name()
        )?;
    }
    Ok(())
}

fn cmd_report(
    catalog: &SignalCatalog,
    mb: &ModelBundle,
    held_out: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let file = io::load_classifier(&mb.model)?;
    let bundle = io::load_bundle(&mb.bundle, catalog)?;
    let dir = held_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| mb.bundle.join("out_of_training"));
    let unseen = io::load_datasets(&dir, catalog)?;
    let report =
        eval::out_of_training_eval(&file.classifier, &bundle, &unseen, &file.config.clean)?;
    std::fs::create_dir_all(out)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CetError::Data(e.to_string()))?;
    std::fs::write(out.join("out_of_training.json"), &json)?;
    println!("flood detection F1 on unseen rate: {:.4}", report.l2_f1);
    println!("abnormality detection rate on unseen falsification: {:.4}", report.l1_detection_rate);
    println!("falsification recall on unseen channels: {:.4}", report.l3_recall_unseen);
    Ok(())
}
