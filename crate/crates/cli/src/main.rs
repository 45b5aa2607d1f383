//! `gwspectra`: synthesize datasets, train graph wavelet autoencoders,
//! score signals and evaluate detection quality.
//!
//! Human-readable progress goes to stderr; every file written is printed on
//! stdout, one path per line. Exit codes: 2 configuration, 3 data,
//! 4 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gwspectra_core::detection::{anomaly_scores, classify, ScoringMode};
use gwspectra_core::experiment::export::{
    svg_line_chart, write_history, write_report, write_roc, write_scores, write_svg, write_sweep,
};
use gwspectra_core::experiment::{
    build_samples, graph_level_scores, group_windows, load_manifest, load_signals, prepare, run_eval, run_single,
    sweep_scales, write_manifest, Checkpoint, DataSource, ExperimentConfig, GraphSample, PreparedData, ScoreUnit,
};
use gwspectra_core::metrics::{aggregate_runs, roc_curve};
use gwspectra_core::model::ModelKind;
use gwspectra_core::{Error, Exec, Result};

#[derive(Parser)]
#[command(name = "gwspectra", version, about = "Graph wavelet autoencoder fault detection")]
struct Cli {
    /// Run single-threaded even when built with the parallel feature.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset (CSV files plus manifest.json).
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model and fit its detection threshold.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score graphs with a trained checkpoint.
    Detect {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Score every graph in this manifest instead of the training data.
        #[arg(long)]
        data: Option<PathBuf>,
        /// WAV channel for multi-channel files in `--data`.
        #[arg(long)]
        channel: Option<usize>,
        /// Partition of the training data to score (ignored with `--data`).
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute AUC, accuracy and F1, from a checkpoint or by retraining per seed.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Score-only evaluation of this checkpoint.
        #[arg(long, conflicts_with = "retrain")]
        checkpoint: Option<PathBuf>,
        /// Train a fresh model for every seed.
        #[arg(long)]
        retrain: bool,
        /// Comma-separated seeds for `--retrain`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Average node scores per graph before metrics.
        #[arg(long)]
        graph_level: bool,
    },
    /// Train and evaluate once per number of wavelet scales.
    SweepScales {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        j_min: usize,
        #[arg(long, default_value_t = 10)]
        j_max: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// Run seed (data seed for `synth`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Gwae,
    Gwvae,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Split {
    All,
    Train,
    Val,
    Test,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = self.model {
            cfg.model.kind = match m {
                Model::Gwae => ModelKind::Gwae,
                Model::Gwvae => ModelKind::Gwvae,
            };
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn run_seed(&self, cfg: &ExperimentConfig) -> u64 {
        self.seed.unwrap_or(cfg.seeds[0])
    }
}

/// Collects output paths so they can be printed once the command succeeds.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::File {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn print(&self) {
        for p in &self.written {
            println!("{}", p.display());
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Data(e.to_string()))
}

fn synth(common: &Common, out: &mut Outputs) -> Result<()> {
    let cfg = common.config()?;
    let DataSource::Synthetic { data_seed, spec } = &cfg.data else {
        return Err(Error::Config("`synth` needs a synthetic data source".into()));
    };
    let seed = common.seed.unwrap_or(*data_seed);
    let signals = load_signals(&DataSource::Synthetic {
        data_seed: seed,
        spec: spec.clone(),
    })?;
    let manifest = write_manifest(&out.dir, &signals, Some((seed, spec.clone())))?;
    let abnormal = signals.iter().filter(|s| s.label.is_abnormal()).count();
    eprintln!("wrote {} normal and {abnormal} abnormal signals", signals.len() - abnormal);
    out.written.push(manifest);
    Ok(())
}

fn train(common: &Common, exec: Exec, out: &mut Outputs) -> Result<()> {
    let cfg = common.config()?;
    let seed = common.run_seed(&cfg);
    if cfg.train.epochs == 0 {
        eprintln!("warning: epochs = 0, the checkpoint holds the initial parameters");
    }
    let signals = load_signals(&cfg.data)?;
    let data = prepare(&cfg, &signals, seed, exec)?;
    eprintln!(
        "training {} on {} graphs ({} validation, {} test), seed {seed}",
        cfg.model.kind.as_str(),
        data.train.len(),
        data.val.len(),
        data.test.len()
    );
    let run = run_single(&cfg, &data, seed, exec)?;
    if let Some(last) = run.history.last() {
        eprintln!("epoch {}: train loss {:.4}, val recon {:.4}", last.epoch, last.train_loss, last.val_recon);
    }
    let ck = Checkpoint::from_run(&cfg, data.stats, &run)?;
    ck.save(&out.path("checkpoint.json"))?;
    write_history(&out.path("history.csv"), &run.history)?;
    if !run.history.is_empty() {
        let pts = |f: fn(&gwspectra_core::training::EpochRecord) -> f64| {
            run.history.iter().map(|h| (h.epoch as f64, f(h))).collect::<Vec<_>>()
        };
        let svg = svg_line_chart(
            "Training history",
            "epoch",
            "loss",
            &[("train loss", pts(|h| h.train_loss)), ("val recon", pts(|h| h.val_recon))],
        );
        write_svg(&out.path("history.svg"), &svg)?;
    }
    write_text(&out.path("threshold.json"), &to_json(&ck.detection.threshold)?)?;
    write_text(&out.path("config.toml"), &cfg.to_toml()?)?;
    let t = run.evaluation.threshold;
    match run.evaluation.metrics {
        Some(m) => eprintln!("threshold {:.6} at delta {}; test AUC {:.4}", t.xi_delta, t.delta, m.auc),
        None => eprintln!("threshold {:.6} at delta {}; test set has one class, no AUC", t.xi_delta, t.delta),
    }
    Ok(())
}

/// Graphs to score for `detect`, rebuilt with the checkpoint's
/// preprocessing.
fn detect_graphs(ck: &Checkpoint, data: Option<&Path>, channel: Option<usize>, split: Split, exec: Exec) -> Result<Vec<GraphSample>> {
    if let Some(manifest) = data {
        let signals = load_manifest(manifest, channel)?;
        let (mut graphs, abnormal) = group_windows(&signals, &ck.window)?;
        graphs.extend(abnormal);
        return build_samples(&graphs, &ck.normalization, &ck.kernel, exec);
    }
    let signals = load_signals(&ck.experiment.data)?;
    let prepared = prepare(&ck.experiment, &signals, ck.training.seed, exec)?;
    if prepared.stats != ck.normalization {
        return Err(Error::Data("training data changed since the checkpoint was written".into()));
    }
    let PreparedData { train, val, test, .. } = prepared;
    Ok(match split {
        Split::Train => train,
        Split::Val => val,
        Split::Test => test,
        Split::All => train.into_iter().chain(val).chain(test).collect(),
    })
}

fn detect(
    checkpoint: &Path,
    data: Option<&Path>,
    channel: Option<usize>,
    split: Split,
    exec: Exec,
    out: &mut Outputs,
) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let params = ck.params()?;
    let graphs = detect_graphs(&ck, data, channel, split, exec)?;
    if graphs.is_empty() {
        return Err(Error::Data("nothing to score: the selected set is empty".into()));
    }
    let labels: Vec<bool> = graphs.iter().map(GraphSample::is_abnormal).collect();
    let mode = ScoringMode::from_draws(ck.training.seed, ck.experiment.detect.latent_draws);
    let mut scores = anomaly_scores(&params, &PreparedData::inputs(&graphs), &labels, mode, exec)?;
    if ck.detection.unit == ScoreUnit::Graph {
        scores = graph_level_scores(&scores);
    }
    let xi: Vec<f64> = scores.iter().map(|s| s.xi).collect();
    let predicted = classify(&xi, &ck.detection.threshold);
    write_scores(&out.path("scores.csv"), &scores, &predicted)?;

    let labels_path = out.path("labels.csv");
    let mut w = csv::Writer::from_path(&labels_path).map_err(|e| Error::File {
        path: labels_path.clone(),
        message: e.to_string(),
    })?;
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(["graph_id", "source_id", "true", "flagged_units", "predicted"]).map_err(csv_err)?;
    for (g, sample) in graphs.iter().enumerate() {
        let flagged = scores.iter().zip(&predicted).filter(|(s, &p)| s.graph_id == g && p).count();
        w.write_record([
            g.to_string(),
            sample.graph.source_id.clone(),
            (sample.is_abnormal() as u8).to_string(),
            flagged.to_string(),
            ((flagged > 0) as u8).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    let flagged = predicted.iter().filter(|&&p| p).count();
    eprintln!(
        "scored {} graphs, {} units; {flagged} flagged ({:.1}%) at threshold {:.6}",
        graphs.len(),
        scores.len(),
        100.0 * flagged as f64 / scores.len() as f64,
        ck.detection.threshold.xi_delta
    );
    Ok(())
}

fn roc_chart(curves: &[(String, Vec<(f64, f64)>)]) -> String {
    let series: Vec<(&str, Vec<(f64, f64)>)> = curves.iter().map(|(n, p)| (n.as_str(), p.clone())).collect();
    svg_line_chart("ROC", "false positive rate", "true positive rate", &series)
}

fn eval(
    common: &Common,
    checkpoint: Option<&Path>,
    retrain: bool,
    seeds: Option<Vec<u64>>,
    graph_level: bool,
    exec: Exec,
    out: &mut Outputs,
) -> Result<()> {
    let mut curves = Vec::new();
    let report = if retrain {
        let mut cfg = common.config()?;
        if let Some(s) = seeds.or(common.seed.map(|s| vec![s])) {
            cfg.seeds = s;
        }
        cfg.detect.graph_level |= graph_level;
        cfg.validate()?;
        let signals = load_signals(&cfg.data)?;
        eprintln!("retraining {} for seeds {:?}", cfg.model.kind.as_str(), cfg.seeds);
        let (runs, report) = run_eval(&cfg, &signals, exec)?;
        for run in &runs {
            let e = &run.evaluation;
            write_scores(&out.path(&format!("scores_seed{}.csv", run.seed)), &e.test_scores, &e.predicted)?;
            let xi: Vec<f64> = e.test_scores.iter().map(|s| s.xi).collect();
            let truth: Vec<bool> = e.test_scores.iter().map(|s| s.abnormal).collect();
            let roc = roc_curve(&xi, &truth)?;
            write_roc(&out.path(&format!("roc_seed{}.csv", run.seed)), &roc)?;
            curves.push((format!("seed {}", run.seed), roc.iter().map(|p| (p.fpr, p.tpr)).collect()));
        }
        report
    } else {
        let path = checkpoint.ok_or_else(|| Error::Config("eval needs --checkpoint or --retrain".into()))?;
        let ck = Checkpoint::load(path)?;
        let params = ck.params()?;
        let mut cfg = ck.experiment.clone();
        cfg.detect.graph_level |= graph_level;
        let seed = ck.training.seed;
        let signals = load_signals(&cfg.data)?;
        let data = prepare(&cfg, &signals, seed, exec)?;
        let e = gwspectra_core::experiment::evaluate(&params, &data, &cfg.detect, seed, exec)?;
        write_scores(&out.path("scores.csv"), &e.test_scores, &e.predicted)?;
        let xi: Vec<f64> = e.test_scores.iter().map(|s| s.xi).collect();
        let truth: Vec<bool> = e.test_scores.iter().map(|s| s.abnormal).collect();
        let roc = roc_curve(&xi, &truth)?;
        write_roc(&out.path("roc.csv"), &roc)?;
        curves.push((format!("seed {seed}"), roc.iter().map(|p| (p.fpr, p.tpr)).collect()));
        aggregate_runs(vec![e.metrics()?], vec![seed], cfg.hash())?
    };
    write_report(&out.dir, &report)?;
    out.written.push(out.dir.join("report.json"));
    out.written.push(out.dir.join("report.csv"));
    write_svg(&out.path("roc.svg"), &roc_chart(&curves))?;
    eprintln!(
        "AUC {}  Acc {}  F1 {}  ({} run{})",
        report.auc.percent(),
        report.acc.percent(),
        report.f1.percent(),
        report.runs.len(),
        if report.single_run { ", std not meaningful" } else { "s" }
    );
    Ok(())
}

fn sweep(common: &Common, j_min: usize, j_max: usize, exec: Exec, out: &mut Outputs) -> Result<()> {
    let cfg = common.config()?;
    if j_min == 0 || j_max < j_min {
        return Err(Error::Config(format!("invalid scale range {j_min}..={j_max}")));
    }
    let seed = common.run_seed(&cfg);
    let signals = load_signals(&cfg.data)?;
    let rows = sweep_scales(&cfg, &signals, j_min..=j_max, seed, exec)?;
    write_sweep(&out.path("sweep.csv"), &rows)?;
    let pts = |f: fn(&gwspectra_core::experiment::SweepRow) -> f64| {
        rows.iter().map(|r| (r.scales as f64, f(r))).collect::<Vec<_>>()
    };
    let svg = svg_line_chart(
        "Decomposition scale sweep",
        "scales J",
        "metric",
        &[("AUC", pts(|r| r.auc)), ("Acc", pts(|r| r.acc)), ("F1", pts(|r| r.f1))],
    );
    write_svg(&out.path("sweep.svg"), &svg)?;
    for r in &rows {
        eprintln!("J = {:2}: AUC {:.4}  Acc {:.4}  F1 {:.4}", r.scales, r.auc, r.acc, r.f1);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outputs> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let out_dir = match &cli.command {
        Command::Synth { common } | Command::Train { common } | Command::Eval { common, .. } => common.out.clone(),
        Command::SweepScales { common, .. } => common.out.clone(),
        Command::Detect { out, .. } => out.clone(),
    };
    let mut out = Outputs::new(&out_dir)?;
    match cli.command {
        Command::Synth { common } => synth(&common, &mut out)?,
        Command::Train { common } => train(&common, exec, &mut out)?,
        Command::Detect {
            checkpoint,
            data,
            channel,
            split,
            ..
        } => detect(&checkpoint, data.as_deref(), channel, split, exec, &mut out)?,
        Command::Eval {
            common,
            checkpoint,
            retrain,
            seeds,
            graph_level,
        } => eval(&common, checkpoint.as_deref(), retrain, seeds, graph_level, exec, &mut out)?,
        Command::SweepScales { common, j_min, j_max } => sweep(&common, j_min, j_max, exec, &mut out)?,
    }
    Ok(out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            out.print();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
