use serde::{Deserialize, Serialize};

use super::data::{prepare, PreparedData};
use super::{DetectConfig, ExperimentConfig};
use crate::detection::{anomaly_scores, classify, fit_kde, solve_threshold, AnomalyScore, KdeModel, ScoringMode, Threshold};
use crate::ingest::RawSignal;
use crate::metrics::{aggregate_runs, confusion_metrics, MetricSet, RunReport};
use crate::model::ModelParams;
use crate::parallel::Exec;
use crate::training::{train, EpochRecord, TrainConfig};
use crate::Result;

/// Granularity at which scores are thresholded and evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreUnit {
    Node,
    /// Mean node score per graph.
    Graph,
}

/// Mean node score per graph, one entry per graph with `node_index = 0`.
pub fn graph_level_scores(scores: &[AnomalyScore]) -> Vec<AnomalyScore> {
    let mut out: Vec<AnomalyScore> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for s in scores {
        match out.last_mut() {
            Some(last) if last.graph_id == s.graph_id => {
                last.xi += s.xi;
                *counts.last_mut().expect("paired") += 1;
            }
            _ => {
                out.push(AnomalyScore { node_index: 0, ..*s });
                counts.push(1);
            }
        }
    }
    for (s, c) in out.iter_mut().zip(counts) {
        s.xi /= c as f64;
    }
    out
}

/// Threshold fitted on validation scores and applied to test scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub unit: ScoreUnit,
    pub kde: KdeModel,
    pub threshold: Threshold,
    pub val_scores: Vec<AnomalyScore>,
    pub test_scores: Vec<AnomalyScore>,
    pub predicted: Vec<bool>,
    /// `None` when the test set lacks normal or abnormal units.
    pub metrics: Option<MetricSet>,
}

impl Evaluation {
    /// Test metrics, or an error when the test set has a single class.
    pub fn metrics(&self) -> Result<MetricSet> {
        self.metrics.ok_or_else(|| {
            crate::Error::Data("test set needs both normal and abnormal graphs to compute metrics".into())
        })
    }

    pub fn val_flagged_fraction(&self) -> f64 {
        let xi: Vec<f64> = self.val_scores.iter().map(|s| s.xi).collect();
        classify(&xi, &self.threshold).iter().filter(|&&f| f).count() as f64 / xi.len() as f64
    }
}

/// Score `data.val` and `data.test`. `seed` keys GWVAE scoring noise.
pub fn evaluate(
    params: &ModelParams,
    data: &PreparedData,
    detect: &DetectConfig,
    seed: u64,
    exec: Exec,
) -> Result<Evaluation> {
    let graph_level = detect.graph_level;
    let delta = detect.delta;
    let mode = ScoringMode::from_draws(seed, detect.latent_draws);
    let score = |part: &[super::GraphSample]| {
        let labels: Vec<bool> = part.iter().map(|s| s.is_abnormal()).collect();
        let scores = anomaly_scores(params, &PreparedData::inputs(part), &labels, mode, exec)?;
        Ok::<_, crate::Error>(if graph_level { graph_level_scores(&scores) } else { scores })
    };
    let val_scores = score(&data.val)?;
    let test_scores = score(&data.test)?;
    let val_xi: Vec<f64> = val_scores.iter().map(|s| s.xi).collect();
    let kde = fit_kde(&val_xi)?;
    let threshold = solve_threshold(&kde, delta)?;
    let test_xi: Vec<f64> = test_scores.iter().map(|s| s.xi).collect();
    let truth: Vec<bool> = test_scores.iter().map(|s| s.abnormal).collect();
    let predicted = classify(&test_xi, &threshold);
    let two_classes = truth.iter().any(|&t| t) && truth.iter().any(|&t| !t);
    let metrics = if two_classes {
        Some(confusion_metrics(&test_xi, &predicted, &truth, threshold.xi_delta)?)
    } else {
        None
    };
    Ok(Evaluation {
        unit: if graph_level { ScoreUnit::Graph } else { ScoreUnit::Node },
        kde,
        threshold,
        val_scores,
        test_scores,
        predicted,
        metrics,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub epochs_completed: usize,
    pub final_lr: f64,
    pub steps: u64,
    pub evaluation: Evaluation,
}

/// Train on `data.train` from a fresh initialization and evaluate.
pub fn run_single(cfg: &ExperimentConfig, data: &PreparedData, seed: u64, exec: Exec) -> Result<RunOutput> {
    cfg.validate()?;
    let params = ModelParams::init(&cfg.model, &cfg.kernel, seed)?;
    let train_cfg = TrainConfig {
        seed,
        exec,
        ..cfg.train.clone()
    };
    let outcome = train(
        params,
        &PreparedData::inputs(&data.train),
        &PreparedData::inputs(&data.val),
        &train_cfg,
    )?;
    let evaluation = evaluate(&outcome.params, data, &cfg.detect, seed, exec)?;
    Ok(RunOutput {
        seed,
        params: outcome.params,
        history: outcome.history,
        epochs_completed: outcome.epochs_completed,
        final_lr: outcome.final_lr,
        steps: outcome.steps,
        evaluation,
    })
}

/// One full run per configured seed (split, init, batching and noise all
/// follow the seed), aggregated into a report. Seeds run concurrently under
/// the parallel strategy; results do not depend on the strategy.
pub fn run_eval(cfg: &ExperimentConfig, signals: &[RawSignal], exec: Exec) -> Result<(Vec<RunOutput>, RunReport)> {
    cfg.validate()?;
    let inner = if exec.is_parallel() && cfg.seeds.len() > 1 { Exec::Sequential } else { exec };
    let runs: Vec<RunOutput> = exec
        .map(&cfg.seeds, |&seed| {
            let data = prepare(cfg, signals, seed, inner)?;
            run_single(cfg, &data, seed, inner)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let report = aggregate_runs(
        runs.iter().map(|r| r.evaluation.metrics()).collect::<Result<_>>()?,
        cfg.seeds.clone(),
        cfg.hash(),
    )?;
    Ok((runs, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scales: usize,
    pub auc: f64,
    pub acc: f64,
    pub f1: f64,
    pub threshold: f64,
    pub final_train_loss: f64,
}

/// Train and evaluate once per number of band-pass scales, at one seed.
pub fn sweep_scales(
    cfg: &ExperimentConfig,
    signals: &[RawSignal],
    scales: std::ops::RangeInclusive<usize>,
    seed: u64,
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    if scales.is_empty() || *scales.start() == 0 {
        return Err(crate::Error::Config(format!("invalid scale range {scales:?}")));
    }
    let mut data = prepare(cfg, signals, seed, exec)?;
    let mut rows = Vec::new();
    for j in scales {
        let mut c = cfg.clone();
        c.kernel.scales = j;
        data.rebuild_operators(&c.kernel, exec)?;
        let run = run_single(&c, &data, seed, exec)?;
        let m = run.evaluation.metrics()?;
        rows.push(SweepRow {
            scales: j,
            auc: m.auc,
            acc: m.acc,
            f1: m.f1,
            threshold: m.threshold,
            final_train_loss: run.history.last().map_or(f64::NAN, |h| h.train_loss),
        });
    }
    Ok(rows)
}
