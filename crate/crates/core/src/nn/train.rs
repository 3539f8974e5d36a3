//! Mini-batch training loop with Adam.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Batch, Model, Params};
use super::optim::{adam_step, AdamConfig, AdamState};
use crate::error::{config, Error, Result};
use crate::metrics::loss_mse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { adam: AdamConfig::default(), batch_size: 470, epochs: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightLogEntry {
    pub epoch: usize,
    pub probe: usize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: Params,
    /// Mean mini-batch MSE per epoch.
    pub train_loss: Vec<f64>,
    /// Validation MSE after each epoch; empty without a validation set.
    pub val_loss: Vec<f64>,
    pub weight_log: Vec<WeightLogEntry>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("training aborted in epoch {epoch}: {cause}")]
pub struct TrainError {
    pub epoch: usize,
    pub cause: Error,
    /// Parameters at the end of the last completed epoch.
    pub last_good: Params,
}

pub fn train(
    model: &Model,
    init: Params,
    train_set: &Batch,
    val_set: Option<&Batch>,
    cfg: &TrainConfig,
    probes: Option<&Batch>,
) -> core::result::Result<TrainOutcome, TrainError> {
    let fail = |epoch, cause, last_good: &Params| TrainError { epoch, cause, last_good: last_good.clone() };
    if train_set.is_empty() || cfg.batch_size == 0 {
        return Err(fail(0, config("training needs samples and a positive batch size"), &init));
    }
    let mut params = init;
    let mut last_good = params.clone();
    let mut state = AdamState::new(model.param_count);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len).collect();
    let mut out = TrainOutcome {
        params: params.clone(),
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::new(),
        weight_log: Vec::new(),
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let step = model
                .loss_and_grad(&params, train_set, chunk)
                .and_then(|(loss, grads)| {
                    adam_step(&mut params.values, &grads, &mut state, &cfg.adam).map(|_| loss)
                });
            match step {
                Ok(loss) => weighted += loss * chunk.len() as f64,
                Err(e) => return Err(fail(epoch, e, &last_good)),
            }
        }
        let epoch_loss = weighted / train_set.len as f64;
        if !epoch_loss.is_finite() || params.values.iter().any(|v| !v.is_finite()) {
            return Err(fail(epoch, crate::error::domain("loss diverged"), &last_good));
        }
        out.train_loss.push(epoch_loss);

        if let Some(val) = val_set.filter(|v| !v.is_empty()) {
            let pred = model.predict(&params, val).map_err(|e| fail(epoch, e, &last_good))?;
            let mse = loss_mse(&pred, &val.y).map_err(|e| fail(epoch, e, &last_good))?;
            out.val_loss.push(mse);
        }
        if let Some(pb) = probes {
            let fwd = model.forward(&params, pb, true).map_err(|e| fail(epoch, e, &last_good))?;
            for (probe, weights) in fwd.weights.unwrap_or_default().into_iter().enumerate() {
                out.weight_log.push(WeightLogEntry { epoch, probe, weights });
            }
        }
        last_good.values.copy_from_slice(&params.values);
    }
    out.params = params;
    Ok(out)
}

/// MSE of the model on a whole batch.
pub fn evaluate(model: &Model, params: &Params, batch: &Batch) -> Result<f64> {
    let pred = model.predict(params, batch)?;
    loss_mse(&pred, &batch.y)
}
