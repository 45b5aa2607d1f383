//! Threshold-free and thresholded detection metrics, plus aggregation over
//! repeated runs.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Area under the ROC curve via the rank-sum statistic. Tied scores get
/// their average rank. `labels[i] == true` marks the positive (abnormal)
/// class.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("AUC labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("AUC scores".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data("AUC is undefined with a single class".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * order[i..j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve with one point per distinct score, from the strictest
/// threshold down, preceded by the origin.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    auc(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint { threshold: t, fpr: fp / neg, tpr: tp / pos });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[bool], truth: &[bool]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::shape("confusion labels", truth.len(), predicted.len()));
        }
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Harmonic mean of precision and recall. When there are neither actual
    /// nor predicted positives the prediction is perfect and F1 is 1.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            return 1.0;
        }
        2.0 * self.tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auc: f64,
    pub acc: f64,
    pub f1: f64,
    pub threshold: f64,
    pub confusion: Confusion,
}

pub fn confusion_metrics(scores: &[f64], predicted: &[bool], truth: &[bool], threshold: f64) -> Result<MetricSet> {
    let confusion = Confusion::from_predictions(predicted, truth)?;
    Ok(MetricSet {
        auc: auc(scores, truth)?,
        acc: confusion.accuracy(),
        f1: confusion.f1(),
        threshold,
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and sample standard deviation; one value gives std 0.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Summary::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Summary { mean, std }
    }

    /// Percent with two decimals, e.g. `99.78±0.15`.
    pub fn percent(&self) -> String {
        format!("{:.2}±{:.2}", 100.0 * self.mean, 100.0 * self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seeds: Vec<u64>,
    pub config_hash: String,
    pub runs: Vec<MetricSet>,
    pub auc: Summary,
    pub acc: Summary,
    pub f1: Summary,
    /// Set when only one run was aggregated, so the spread carries no
    /// information.
    pub single_run: bool,
}

pub fn aggregate_runs(runs: Vec<MetricSet>, seeds: Vec<u64>, config_hash: String) -> Result<RunReport> {
    if runs.is_empty() {
        return Err(Error::Data("no runs to aggregate".into()));
    }
    if runs.len() != seeds.len() {
        return Err(Error::shape("run seeds", runs.len(), seeds.len()));
    }
    let pick = |f: fn(&MetricSet) -> f64| Summary::of(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(RunReport {
        auc: pick(|m| m.auc),
        acc: pick(|m| m.acc),
        f1: pick(|m| m.f1),
        single_run: runs.len() == 1,
        seeds,
        config_hash,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(auc(&[0.1], &[true, false]).is_err());
        assert!(auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn confusion_example() {
        let truth: Vec<bool> = (0..20).map(|i| i < 9).collect();
        let mut pred = truth.clone();
        pred[0] = false; // one miss
        pred[19] = true; // one false alarm
        let c = Confusion::from_predictions(&pred, &truth).unwrap();
        assert_eq!(c, Confusion { tp: 8, fp: 1, tn: 10, fn_: 1 });
        assert!((c.accuracy() - 0.9).abs() < 1e-15);
        assert!((c.f1() - 8.0 / 9.0).abs() < 1e-15);
        let perfect = Confusion::from_predictions(&truth, &truth).unwrap();
        assert_eq!((perfect.accuracy(), perfect.f1()), (1.0, 1.0));
        let none = Confusion::from_predictions(&[false; 3], &[true; 3]).unwrap();
        assert_eq!(none.f1(), 0.0);
    }

    #[test]
    fn roc_endpoints() {
        let roc = roc_curve(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!((roc[0].fpr, roc[0].tpr), (0.0, 0.0));
        let last = roc.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(roc.len(), 5);
    }

    #[test]
    fn aggregation() {
        let m = |auc| MetricSet { auc, acc: 0.9, f1: 0.8, threshold: 1.0, confusion: Confusion::default() };
        let r = aggregate_runs(vec![m(0.9), m(1.0)], vec![0, 1], "h".into()).unwrap();
        assert!((r.auc.mean - 0.95).abs() < 1e-15);
        assert!((r.auc.std - 0.005f64.sqrt()).abs() < 1e-15);
        assert!(!r.single_run);
        let one = aggregate_runs(vec![m(0.9)], vec![7], "h".into()).unwrap();
        assert!(one.single_run && one.auc.std == 0.0);
        assert!(aggregate_runs(vec![], vec![], "h".into()).is_err());
        assert_eq!(Summary { mean: 0.9978, std: 0.0015 }.percent(), "99.78±0.15");
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![(-5i32..5).prop_map(f64::from), -5.0f64..5.0], n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("two classes", |(_, l)| l.iter().any(|&b| b) && l.iter().any(|&b| !b))
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_count((s, l) in scored()) {
            let a = auc(&s, &l).unwrap();
            prop_assert!((a - brute_auc(&s, &l)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn auc_invariant_under_monotone_map((s, l) in scored(), k in 0.1f64..10.0, c in -3.0f64..3.0) {
            let t: Vec<f64> = s.iter().map(|v| (k * v + c).exp()).collect();
            prop_assert!((auc(&s, &l).unwrap() - auc(&t, &l).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn flipping_labels_complements((s, l) in scored()) {
            let f: Vec<bool> = l.iter().map(|b| !b).collect();
            prop_assert!((auc(&s, &l).unwrap() + auc(&s, &f).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
