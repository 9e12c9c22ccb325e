use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dims;
use crate::data::{item_text, Catalog, Item, ItemId, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::init::seeded_rng;
use crate::nn::{
    softmax_cross_entropy_batch, Activation, Adam, AdamConfig, Dense, Embedding, Gradients, Gru, Matrix, ParamTensor,
    Parameterized,
};
use crate::parallel;

/// Word lookup, GRU over the item text, `Dense_1` (tanh) and, while
/// training, a softmax category head.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingComponent {
    pub words: Embedding,
    pub gru: Gru,
    pub dense1: Dense,
    /// `None` once detached after training.
    pub head: Option<Dense>,
}

impl EmbeddingComponent {
    pub fn new(vocab_size: usize, n_categories: usize, dims: &Dims, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, 0);
        let words = Embedding::new(vocab_size, dims.word_dim, &mut rng);
        let gru = Gru::new(dims.word_dim, dims.gru_hidden, &mut rng);
        let dense1 = Dense::new(dims.gru_hidden, dims.item_dim, Activation::Tanh, &mut rng);
        let head = Dense::new(dims.item_dim, n_categories, Activation::Identity, &mut rng);
        EmbeddingComponent { words, gru, dense1, head: Some(head) }
    }

    pub fn item_dim(&self) -> usize {
        self.dense1.output_dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.words.count()
    }

    pub fn is_detached(&self) -> bool {
        self.head.is_none()
    }

    /// Removes the softmax head; the component then only produces item vectors.
    pub fn detach_head(&mut self) {
        self.head = None;
    }

    /// Step-major token ids for equal-length sequences.
    fn stacked_ids(seqs: &[&[u32]]) -> Result<(Vec<usize>, usize)> {
        let steps = seqs.first().map_or(0, |s| s.len());
        if steps == 0 || seqs.iter().any(|s| s.len() != steps) {
            return Err(Error::Shape("a batch needs non-empty sequences of equal length".into()));
        }
        let mut ids = Vec::with_capacity(steps * seqs.len());
        for t in 0..steps {
            ids.extend(seqs.iter().map(|s| s[t] as usize));
        }
        Ok((ids, steps))
    }

    /// Item vectors (`Dense_1` outputs) for equal-length token sequences.
    pub fn encode_batch(&self, seqs: &[&[u32]]) -> Result<Matrix> {
        let (ids, _) = Self::stacked_ids(seqs)?;
        let x = self.words.forward(&ids)?;
        let h = self.gru.forward(x, seqs.len(), None)?.last_hidden();
        Ok(self.dense1.forward(h)?.output)
    }

    /// Category logits for equal-length token sequences.
    pub fn logits(&self, seqs: &[&[u32]]) -> Result<Matrix> {
        let head = self.head.as_ref().ok_or_else(|| Error::State("softmax head already detached".into()))?;
        Ok(head.forward(self.encode_batch(seqs)?)?.output)
    }

    /// Summed cross-entropy over equal-length sequences and its gradient,
    /// laid out like [`Parameterized::named_params`].
    pub fn loss_and_grads(&self, seqs: &[&[u32]], targets: &[usize]) -> Result<(f64, Gradients)> {
        let head = self.head.as_ref().ok_or_else(|| Error::State("softmax head already detached".into()))?;
        let (ids, _) = Self::stacked_ids(seqs)?;
        let batch = seqs.len();
        let x = self.words.forward(&ids)?;
        let gru_cache = self.gru.forward(x, batch, None)?;
        let d1 = self.dense1.forward(gru_cache.last_hidden())?;
        let hc = head.forward(d1.output.clone())?;
        let (loss, d_logits) = softmax_cross_entropy_batch(&hc.output, targets)?;

        // dense1 [0,1], gru [2..11], head [11,12], words [13]
        let mut grads = Gradients::zeros_like(self);
        let g = &mut grads.0;
        let d_emb = head.backward(&hc, &d_logits, &mut g[11..13])?;
        let d_h = self.dense1.backward(&d1, &d_emb, &mut g[0..2])?;
        let (dx, _) = self.gru.backward(&gru_cache, &d_h, &mut g[2..11])?;
        self.words.backward(&ids, &dx, &mut g[13..14])?;
        Ok((loss, grads))
    }
}

impl Parameterized for EmbeddingComponent {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        let mut out: Vec<(String, &ParamTensor)> = Vec::new();
        out.extend(crate::nn::prefixed("dense1", self.dense1.named_params()));
        out.extend(crate::nn::prefixed("gru", self.gru.named_params()));
        if let Some(head) = &self.head {
            out.extend(crate::nn::prefixed("head", head.named_params()));
        }
        out.extend(crate::nn::prefixed("words", self.words.named_params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = self.dense1.params_mut();
        out.extend(self.gru.params_mut());
        if let Some(head) = &mut self.head {
            out.extend(head.params_mut());
        }
        out.extend(self.words.params_mut());
        out
    }
}

/// Frozen item vector: GRU over the item text from a zero state, then
/// `Dense_1`. Depends on the text only, never on the item id.
pub fn embed_item(component: &EmbeddingComponent, item: &Item) -> Result<Vec<f64>> {
    let tokens = item_text(item);
    Ok(component.encode_batch(&[&tokens])?.into_data())
}

/// Resolves every catalog record against `vocab`, in id order.
pub fn resolve_items(catalog: &Catalog, vocab: &Vocabulary) -> Vec<Item> {
    catalog.records().map(|r| r.resolve(vocab)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedTrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Share of items held out for snapshot selection.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig { max_epochs: 20, batch_size: 16, adam: AdamConfig::default(), holdout_fraction: 0.1, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// Accuracy on the held-out items (training items when none are held out).
    pub holdout_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedTrainReport {
    pub epochs: Vec<EmbedEpoch>,
    pub best_epoch: usize,
    pub holdout_items: usize,
}

impl EmbedTrainReport {
    pub fn best(&self) -> &EmbedEpoch {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Groups item indices into equal-length batches of at most `batch_size`.
fn length_buckets(items: &[(Vec<u32>, usize)], order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in order {
        by_len.entry(items[i].0.len()).or_default().push(i);
    }
    by_len.into_values().flat_map(|v| v.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect::<Vec<_>>()).collect()
}

fn accuracy(component: &EmbeddingComponent, data: &[(Vec<u32>, usize)], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for batch in length_buckets(data, idx, 64) {
        let seqs: Vec<&[u32]> = batch.iter().map(|&i| data[i].0.as_slice()).collect();
        let logits = component.logits(&seqs)?;
        for (r, &i) in batch.iter().enumerate() {
            let row = logits.row(r);
            let pred = (0..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b });
            correct += usize::from(pred == data[i].1);
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Trains the component to predict each item's category from its text and
/// returns the snapshot with the best held-out accuracy (earliest on ties),
/// with its softmax head detached.
///
/// Batches contain items of equal text length, so no masking is needed.
pub fn train_embedding_component(
    items: &[Item],
    vocab_size: usize,
    n_categories: usize,
    dims: &Dims,
    cfg: &EmbedTrainConfig,
) -> Result<(EmbeddingComponent, EmbedTrainReport)> {
    if n_categories < 2 {
        return Err(Error::Config(format!("category prediction needs at least 2 categories, got {n_categories}")));
    }
    if items.is_empty() {
        return Err(Error::Data("cannot train the embedding component on an empty catalog".into()));
    }
    if cfg.max_epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("max_epochs and batch_size must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(Error::Config(format!("holdout_fraction {} outside [0, 1)", cfg.holdout_fraction)));
    }
    dims.validate()?;
    let mut data = Vec::with_capacity(items.len());
    for item in items {
        let c = item.category.index();
        if c >= n_categories {
            return Err(Error::Data(format!("item {} has category {} beyond {n_categories}", item.item_id, item.category)));
        }
        data.push((item_text(item), c));
    }

    let mut rng = seeded_rng(cfg.seed, 1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = (cfg.holdout_fraction * data.len() as f64).floor() as usize;
    let (hold, train) = order.split_at(n_hold);
    let (hold, mut train) = (hold.to_vec(), train.to_vec());
    train.sort_unstable();

    let mut model = EmbeddingComponent::new(vocab_size, n_categories, dims, cfg.seed);
    let mut adam = Adam::new(cfg.adam.clone())?;
    let mut best: Option<(f64, EmbeddingComponent)> = None;
    let mut report = EmbedTrainReport { epochs: Vec::new(), best_epoch: 1, holdout_items: hold.len() };
    for epoch in 1..=cfg.max_epochs {
        let mut shuffled = train.clone();
        shuffled.shuffle(&mut rng);
        let mut batches = length_buckets(&data, &shuffled, cfg.batch_size);
        batches.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in &batches {
            let seqs: Vec<&[u32]> = batch.iter().map(|&i| data[i].0.as_slice()).collect();
            let targets: Vec<usize> = batch.iter().map(|&i| data[i].1).collect();
            let (loss, mut grads) = model.loss_and_grads(&seqs, &targets)?;
            total += loss;
            grads.scale(1.0 / batch.len() as f64);
            grads.store(&mut model);
            adam.step(&mut model)?;
        }
        let train_accuracy = accuracy(&model, &data, &train)?;
        let holdout_accuracy = if hold.is_empty() { train_accuracy } else { accuracy(&model, &data, &hold)? };
        log::debug!("embedding epoch {epoch}: loss {:.5} holdout accuracy {holdout_accuracy:.4}", total / train.len() as f64);
        report.epochs.push(EmbedEpoch { epoch, train_loss: total / train.len() as f64, train_accuracy, holdout_accuracy });
        if best.as_ref().is_none_or(|(acc, _)| holdout_accuracy > *acc) {
            best = Some((holdout_accuracy, model.clone()));
            report.best_epoch = epoch;
        }
    }
    let (_, mut component) = best.expect("at least one epoch");
    component.detach_head();
    Ok((component, report))
}

/// Item vectors keyed by id. The PAD vector is all zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemEmbeddingTable {
    pub dim: usize,
    pub vectors: BTreeMap<ItemId, Vec<f64>>,
}

impl ItemEmbeddingTable {
    pub fn get(&self, id: ItemId) -> Option<&[f64]> {
        self.vectors.get(&id).map(Vec::as_slice)
    }

    pub fn pad_vector(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// [`embed_item`] for every item.
pub fn build_embedding_table(component: &EmbeddingComponent, items: &[Item]) -> Result<ItemEmbeddingTable> {
    let vectors: Vec<Result<Vec<f64>>> = parallel::map(items, |item| embed_item(component, item));
    let mut table = ItemEmbeddingTable { dim: component.item_dim(), vectors: BTreeMap::new() };
    for (item, v) in items.iter().zip(vectors) {
        table.vectors.insert(item.item_id, v?);
    }
    Ok(table)
}

/// Everything a content branch needs to turn item ids into vectors.
#[derive(Clone, Debug)]
pub struct ContentFeatures {
    pub component: EmbeddingComponent,
    pub vocabulary: Vocabulary,
    pub items: BTreeMap<ItemId, Item>,
    pub table: ItemEmbeddingTable,
}

impl ContentFeatures {
    /// Resolves the catalog with the component's vocabulary and embeds every item.
    pub fn new(component: EmbeddingComponent, vocabulary: Vocabulary, catalog: &Catalog) -> Result<Self> {
        if vocabulary.len() != component.vocab_size() {
            return Err(Error::Format(format!(
                "vocabulary has {} words but the component expects {}",
                vocabulary.len(),
                component.vocab_size()
            )));
        }
        let resolved = resolve_items(catalog, &vocabulary);
        let table = build_embedding_table(&component, &resolved)?;
        let items = resolved.into_iter().map(|i| (i.item_id, i)).collect();
        Ok(ContentFeatures { component, vocabulary, items, table })
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    /// Table vector, else embedded on demand from the item text, else (for
    /// ids outside the catalog) the zero vector.
    pub fn vector(&self, id: ItemId) -> Result<Vec<f64>> {
        if let Some(v) = self.table.get(id) {
            return Ok(v.to_vec());
        }
        match self.items.get(&id) {
            Some(item) => embed_item(&self.component, item),
            None => Ok(self.table.pad_vector()),
        }
    }
}
