use serde::{Deserialize, Serialize};

use super::{make_batch, predict, NetworkParams, Scalar};
use crate::grasp_image::{DatasetStats, GraspDataset};
use crate::{Error, Result};

const ROC_THRESHOLDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub num_records: usize,
    pub num_positive: usize,
    /// Fraction of records whose prediction `q > 0.5` agrees with the label.
    pub accuracy: f64,
    /// Fraction of positives among records with `q > 0.5`; `None` if there are none.
    pub precision: Option<f64>,
    /// `None` when the split has a single class.
    pub roc: Option<Vec<RocPoint>>,
    pub auc: Option<f64>,
}

/// Rates at thresholds `0, 1/99, ..., 1`, predicting success when `q >= threshold`.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::RocUndefined);
    }
    Ok((0..ROC_THRESHOLDS)
        .map(|i| {
            let t = i as f64 / (ROC_THRESHOLDS - 1) as f64;
            let (mut tp, mut fp) = (0usize, 0usize);
            for (&q, &l) in scores.iter().zip(labels) {
                if q >= t {
                    if l {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            RocPoint {
                threshold: t,
                false_positive_rate: fp as f64 / neg as f64,
                true_positive_rate: tp as f64 / pos as f64,
            }
        })
        .collect())
}

fn auc(roc: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = roc.iter().map(|p| (p.false_positive_rate, p.true_positive_rate)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite rates"));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

pub fn roc_csv(roc: &[RocPoint]) -> String {
    let mut s = String::from("threshold,fpr,tpr\n");
    for p in roc {
        s.push_str(&format!("{},{},{}\n", p.threshold, p.false_positive_rate, p.true_positive_rate));
    }
    s
}

pub fn evaluate_scores(scores: &[f64], labels: &[bool]) -> Result<EvalReport> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::InvalidArgument("evaluation needs one score per label".into()));
    }
    let correct = scores.iter().zip(labels).filter(|&(&q, &l)| (q > 0.5) == l).count();
    let predicted: Vec<bool> = scores.iter().zip(labels).filter(|&(&q, _)| q > 0.5).map(|(_, &l)| l).collect();
    let precision = (!predicted.is_empty()).then(|| predicted.iter().filter(|&&l| l).count() as f64 / predicted.len() as f64);
    let roc = roc_curve(scores, labels).ok();
    Ok(EvalReport {
        num_records: scores.len(),
        num_positive: labels.iter().filter(|&&l| l).count(),
        accuracy: correct as f64 / scores.len() as f64,
        precision,
        auc: roc.as_deref().map(auc),
        roc,
    })
}

/// Scores clean crops of `indices` and reports classification metrics.
pub fn evaluate<S: Scalar>(
    params: &NetworkParams<S>,
    dataset: &GraspDataset,
    indices: &[usize],
    stats: &DatasetStats,
) -> Result<EvalReport> {
    let mut scores = Vec::with_capacity(indices.len());
    let mut labels = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(512) {
        let b = make_batch::<S>(dataset, chunk, stats, None)?;
        scores.extend(predict(params, &b.images, &b.depths)?);
        labels.extend(b.labels);
    }
    evaluate_scores(&scores, &labels)
}
