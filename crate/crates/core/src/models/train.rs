use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::encode::{EncodedSession, EncodedSessions};
use super::predictor::{Predictor, SessionModel};
use crate::error::{Error, Result};
use crate::metrics::{auc, ScoredSet};
use crate::nn::init::seeded_rng;
use crate::nn::{Adam, AdamConfig, Gradients};
use crate::parallel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Sessions per gradient work unit inside a batch. Partial gradients are
    /// summed in chunk order, so results do not depend on the thread count.
    pub chunk_size: usize,
    /// Stop after this many epochs without a validation AUC improvement.
    pub patience: Option<usize>,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { max_epochs: 20, batch_size: 128, chunk_size: 32, patience: None, adam: AdamConfig::default(), seed: 1 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 || self.chunk_size == 0 {
            return Err(Error::Config("max_epochs, batch_size and chunk_size must be positive".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be positive when set".into()));
        }
        self.adam.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training BCE over the epoch.
    pub train_loss: f64,
    pub val_auc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation-AUC epoch.
    pub model: Predictor,
    pub trace: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best_val_auc(&self) -> f64 {
        self.trace[self.best_epoch - 1].val_auc
    }
}

/// Logits for every encoded session, in order.
pub fn score_sessions<M: SessionModel + ?Sized>(model: &M, data: &EncodedSessions) -> Result<Vec<f64>> {
    let refs: Vec<&EncodedSession> = data.sessions.iter().collect();
    let parts = parallel::map_chunks(&refs, 256, |chunk| model.logits(chunk, data));
    let mut out = Vec::with_capacity(refs.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn validation_auc(model: &Predictor, val: &EncodedSessions) -> Result<f64> {
    let set = ScoredSet::new(score_sessions(model, val)?, val.labels())?;
    auc(&set)
}

/// Mini-batch BCE training with Adam. Validation AUC is recorded after every
/// epoch and the best epoch's parameters are returned (earliest on ties).
pub fn train_predictor(
    mut model: Predictor,
    train: &EncodedSessions,
    val: &EncodedSessions,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    ScoredSet::new(vec![0.0; val.len()], val.labels())?.require_both_classes("validation AUC")?;

    let mut adam = Adam::new(cfg.adam.clone())?;
    let mut rng = seeded_rng(cfg.seed, 1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::new();
    let mut best: Option<(f64, usize, Predictor)> = None;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let refs: Vec<&EncodedSession> = batch.iter().map(|&i| &train.sessions[i]).collect();
            let parts = parallel::map_chunks(&refs, cfg.chunk_size, |chunk| model.loss_and_grads(chunk, train));
            let mut sum: Option<Gradients> = None;
            for part in parts {
                let (loss, g) = part?;
                total += loss;
                match &mut sum {
                    Some(s) => s.add_assign(&g),
                    None => sum = Some(g),
                }
            }
            let mut grads = sum.expect("non-empty batch");
            grads.scale(1.0 / batch.len() as f64);
            grads.store(&mut model);
            adam.step(&mut model)?;
        }
        let val_auc = validation_auc(&model, val)?;
        let train_loss = total / train.len() as f64;
        log::info!("{} epoch {epoch}: train loss {train_loss:.5}, validation AUC {val_auc:.4}", model.kind());
        trace.push(EpochRecord { epoch, train_loss, val_auc });
        if best.as_ref().is_none_or(|(b, _, _)| val_auc > *b) {
            best = Some((val_auc, epoch, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if cfg.patience.is_some_and(|p| epoch - best_epoch >= p) {
            break;
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, trace, best_epoch })
}
