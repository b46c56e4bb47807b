use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{evaluate, init_params, loss_and_gradients, Batch, NetworkParams, NetworkSpec, Scalar};
use crate::grasp_image::{DatasetStats, GraspDataset, Symmetry};
use crate::render::{corrupt_image, DepthImage, NoiseModel};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub learning_rate: f64,
    /// Factor applied to the learning rate every `decay_step` epochs.
    pub decay_rate: f64,
    pub decay_step: usize,
    pub epochs: usize,
    /// Noise injected into each training crop.
    pub noise: NoiseModel,
    /// Replace each training crop by a random one of its four symmetric variants.
    pub augment: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            momentum: 0.9,
            learning_rate: 0.01,
            decay_rate: 0.95,
            decay_step: 1,
            epochs: 10,
            noise: NoiseModel::default(),
            augment: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size >= 1
            && (0.0..1.0).contains(&self.momentum)
            && self.learning_rate > 0.0
            && self.decay_rate > 0.0
            && self.decay_rate <= 1.0
            && self.decay_step >= 1;
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid training config {self:?}")));
        }
        self.noise.validate()
    }
}

/// Stochastic gradient descent with classical momentum.
#[derive(Debug, Clone)]
pub struct Sgd<S> {
    pub momentum: f64,
    velocity: Vec<Vec<S>>,
}

impl<S: Scalar> Sgd<S> {
    pub fn new(params: &NetworkParams<S>, momentum: f64) -> Self {
        Self {
            momentum,
            velocity: params.tensors.iter().map(|t| vec![S::ZERO; t.data.len()]).collect(),
        }
    }

    /// `v <- momentum * v + g`, `theta <- theta - lr * v`.
    pub fn step(&mut self, params: &mut NetworkParams<S>, grads: &[Vec<S>], learning_rate: f64) {
        let (mu, lr) = (S::from_f64(self.momentum), S::from_f64(learning_rate));
        for ((t, g), v) in params.tensors.iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((w, &gi), vi) in t.data.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = mu * *vi + gi;
                *w -= lr * *vi;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_accuracy: Option<f64>,
    pub learning_rate: f64,
}

pub fn training_log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,loss,val_accuracy,learning_rate\n");
    for e in log {
        let acc = e.validation_accuracy.map(|a| a.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, acc, e.learning_rate));
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub params: NetworkParams<S>,
    pub log: Vec<EpochLog>,
}

/// Normalised network inputs for `indices`; with an rng, each crop is replaced by a random
/// symmetric variant (if `augment`) and corrupted by `noise`.
pub fn make_batch<S: Scalar>(
    dataset: &GraspDataset,
    indices: &[usize],
    stats: &DatasetStats,
    perturb: Option<(&NoiseModel, bool, &mut Rng)>,
) -> Result<Batch<S>> {
    let size = dataset.crop_size;
    let mut batch = Batch {
        images: Vec::with_capacity(indices.len() * size * size),
        depths: Vec::with_capacity(indices.len()),
        labels: Vec::with_capacity(indices.len()),
    };
    let mut perturb = perturb;
    for &i in indices {
        let rec = &dataset.records[i];
        let image = match perturb.as_mut() {
            Some((noise, augment, r)) => {
                let sym = if *augment { Symmetry::ALL[r.random_range(0..4)] } else { Symmetry::Identity };
                let crop = sym.apply(&rec.image, size);
                if noise.sigma > 0.0 || noise.gamma_scale > 0.0 {
                    corrupt_image(&DepthImage::new(size, size, crop)?, noise, r).data().to_vec()
                } else {
                    crop
                }
            }
            None => rec.image.clone(),
        };
        batch.images.extend(stats.normalize_image(&image).into_iter().map(S::from_f64));
        batch.depths.push(S::from_f64(stats.normalize_depth(rec.depth as f64)));
        batch.labels.push(rec.label);
    }
    Ok(batch)
}

/// Trains freshly initialised parameters of `spec`.
pub fn train<S: Scalar>(
    dataset: &GraspDataset,
    train_idx: &[usize],
    val_idx: &[usize],
    stats: &DatasetStats,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<S>> {
    if spec.input_size != dataset.crop_size {
        return Err(Error::Spec(format!(
            "network input {} does not match {0}x{0} crops",
            dataset.crop_size
        )));
    }
    let params = init_params(spec, cfg.seed)?;
    train_from(params, dataset, train_idx, val_idx, stats, cfg)
}

/// Shuffled minibatch SGD with on-the-fly augmentation and noise; the learning rate decays
/// every `decay_step` epochs. Validation accuracy is measured on clean crops.
pub fn train_from<S: Scalar>(
    mut params: NetworkParams<S>,
    dataset: &GraspDataset,
    train_idx: &[usize],
    val_idx: &[usize],
    stats: &DatasetStats,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<S>> {
    cfg.validate()?;
    let positives = train_idx.iter().filter(|&&i| dataset.records[i].label).count();
    if positives == 0 || positives == train_idx.len() {
        return Err(Error::InvalidArgument("the training split must contain both classes".into()));
    }
    let mut sgd = Sgd::new(&params, cfg.momentum);
    let mut lr = cfg.learning_rate;
    let mut initial: Option<f64> = None;
    let mut log = Vec::new();
    let mut batch_id = 0usize;
    for epoch in 0..cfg.epochs {
        let mut order = train_idx.to_vec();
        order.shuffle(&mut rng::stream(cfg.seed, &[0x5f, epoch as u64]));
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut r = rng::stream(cfg.seed, &[0xba, epoch as u64, b as u64]);
            let batch = make_batch(dataset, chunk, stats, Some((&cfg.noise, cfg.augment, &mut r)))?;
            let (loss, grads) = loss_and_gradients(&params, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { batch: batch_id, loss });
            }
            initial.get_or_insert(loss);
            total += loss * chunk.len() as f64;
            sgd.step(&mut params, &grads, lr);
            batch_id += 1;
            if b % 25 == 24 {
                log::debug!("epoch {epoch} batch {}: loss {loss:.5}", b + 1);
            }
        }
        let mean = total / order.len().max(1) as f64;
        let initial = initial.unwrap_or(mean);
        if mean > 10.0 * initial {
            return Err(Error::Divergence { epoch, loss: mean, initial });
        }
        let validation_accuracy = if val_idx.is_empty() {
            None
        } else {
            Some(evaluate(&params, dataset, val_idx, stats)?.accuracy)
        };
        log::info!(
            "epoch {epoch}: loss {mean:.5}, validation accuracy {}, learning rate {lr:.6}",
            validation_accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| "n/a".into())
        );
        log.push(EpochLog {
            epoch,
            train_loss: mean,
            validation_accuracy,
            learning_rate: lr,
        });
        if (epoch + 1) % cfg.decay_step == 0 {
            lr *= cfg.decay_rate;
        }
    }
    Ok(TrainOutcome { params, log })
}
