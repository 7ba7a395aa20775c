//! Full-batch training with Adam, evaluation metrics and best-epoch selection.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use flexdiff_core::stats::average_ranks;
use flexdiff_core::{Dataset, Error, Result};

use crate::model::{Metric, Model, ModelConfig, DROPOUT_STREAM};
use crate::tensor::Tensor;

/// Fraction of listed rows whose argmax (lowest class on ties) equals the label.
pub fn accuracy(probs: &Tensor, labels: &[usize], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::usage("accuracy over an empty mask"));
    }
    let correct = rows
        .iter()
        .filter(|&&r| {
            let row = probs.row(r);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best == labels[r]
        })
        .count();
    Ok(correct as f64 / rows.len() as f64)
}

/// Mean `-ln p[label]` over the listed rows, probabilities clamped at 1e-12.
pub fn cross_entropy(probs: &Tensor, labels: &[usize], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::usage("cross-entropy over an empty mask"));
    }
    let total: f64 = rows.iter().map(|&r| -probs.get(r, labels[r]).max(1e-12).ln()).sum();
    Ok(total / rows.len() as f64)
}

/// Rank-based two-class AUC of the class-1 probability.
pub fn roc_auc(probs: &Tensor, labels: &[usize], rows: &[usize]) -> Result<f64> {
    if probs.cols() != 2 {
        return Err(Error::usage(format!("ROC AUC needs 2 classes, got {}", probs.cols())));
    }
    let scores: Vec<f64> = rows.iter().map(|&r| probs.get(r, 1)).collect();
    binary_auc(&scores, &rows.iter().map(|&r| labels[r] == 1).collect::<Vec<_>>())
}

/// Mann-Whitney AUC with average ranks for tied scores.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::data("ROC AUC needs both classes present"));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

pub fn evaluate(model: &Model, data: &Dataset, rows: &[usize], metric: Metric) -> Result<f64> {
    let probs = model.predict(&to_tensor(data))?;
    score(&probs, &data.labels, rows, metric)
}

fn score(probs: &Tensor, labels: &[usize], rows: &[usize], metric: Metric) -> Result<f64> {
    match metric {
        Metric::Accuracy => accuracy(probs, labels, rows),
        Metric::RocAuc => roc_auc(probs, labels, rows),
    }
}

pub fn to_tensor(data: &Dataset) -> Tensor {
    Tensor::from_vec(data.features.rows(), data.features.cols(), data.features.as_slice().to_vec())
}

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let pd = p.data_mut();
            for k in 0..pd.len() {
                let gk = g.data()[k] + self.weight_decay * pd[k];
                let mk = &mut m.data_mut()[k];
                *mk = self.beta1 * *mk + (1.0 - self.beta1) * gk;
                let vk = &mut v.data_mut()[k];
                *vk = self.beta2 * *vk + (1.0 - self.beta2) * gk * gk;
                let mhat = m.data()[k] / bc1;
                let vhat = v.data()[k] / bc2;
                pd[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: ModelConfig,
    pub train_loss: Vec<f64>,
    pub train_metric: Vec<f64>,
    pub val_metric: Vec<f64>,
    pub test_metric: Vec<f64>,
    /// Zero-based epoch with the highest validation metric (earliest on ties).
    pub best_epoch: usize,
    pub best_val: f64,
    pub test_at_best: f64,
    /// Excluded from serialized reports so they stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// `epoch,train_loss,train_metric,val_metric,test_metric` rows.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_metric,val_metric,test_metric\n");
        for e in 0..self.train_loss.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e, self.train_loss[e], self.train_metric[e], self.val_metric[e], self.test_metric[e]
            ));
        }
        out
    }
}

/// Trains a fresh model on `data` and returns it with the report. The
/// returned model holds the final-epoch parameters.
pub fn train(cfg: &ModelConfig, data: &Dataset) -> Result<(Model, TrainReport)> {
    data.validate()?;
    if data.splits.train.is_empty() || data.splits.val.is_empty() || data.splits.test.is_empty() {
        return Err(Error::data("train, validation and test splits must be non-empty"));
    }
    let start = Instant::now();
    let mut model = Model::new(cfg, &data.graph, data.features.cols(), data.num_classes)?;
    let x = to_tensor(data);
    let labels = Arc::new(data.labels.clone());
    let train_rows = Arc::new(data.splits.train.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(DROPOUT_STREAM);
    let mut adam = Adam::new(cfg.lr, cfg.weight_decay, model.params());

    let mut report = TrainReport {
        config: cfg.clone(),
        train_loss: Vec::with_capacity(cfg.epochs),
        train_metric: Vec::with_capacity(cfg.epochs),
        val_metric: Vec::with_capacity(cfg.epochs),
        test_metric: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_val: f64::NEG_INFINITY,
        test_at_best: f64::NAN,
        wall_time_secs: 0.0,
    };
    for epoch in 0..cfg.epochs {
        let (loss, grads) = model.loss_and_grad(model.params(), &x, &labels, &train_rows, Some(&mut rng))?;
        if !loss.is_finite() || grads.iter().any(|g| g.data().iter().any(|v| !v.is_finite())) {
            let recent: Vec<f64> = report.train_loss.iter().rev().take(5).rev().copied().collect();
            return Err(Error::numerical(format!(
                "non-finite loss or gradient at epoch {epoch} (loss {loss}, previous losses {recent:?})"
            )));
        }
        adam.step(model.params_mut(), &grads);
        let probs = model.predict(&x)?;
        let tr = score(&probs, &data.labels, &data.splits.train, cfg.metric)?;
        let va = score(&probs, &data.labels, &data.splits.val, cfg.metric)?;
        let te = score(&probs, &data.labels, &data.splits.test, cfg.metric)?;
        report.train_loss.push(loss);
        report.train_metric.push(tr);
        report.val_metric.push(va);
        report.test_metric.push(te);
        if va > report.best_val {
            report.best_val = va;
            report.best_epoch = epoch;
            report.test_at_best = te;
        }
    }
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((model, report))
}
