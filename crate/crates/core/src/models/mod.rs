//! The three purchase predictors and the text embedding component.
//!
//! - [`EmbeddingComponent`]: word lookup, GRU, `Dense_1` (tanh) and a softmax
//!   category head used only while training. After training the head is
//!   dropped and `Dense_1` outputs serve as frozen item vectors.
//! - [`ContentPredictor`]: LSTM over the item vectors of a padded session.
//! - [`BaselinePredictor`]: LSTM over learned item-id embeddings.
//! - [`IntegratedPredictor`]: the content LSTM and an id LSTM (user embedding
//!   first, then item ids) concatenated into a tanh merge layer.

mod check;
mod component;
mod encode;
mod persist;
mod predictor;
mod train;

use serde::{Deserialize, Serialize};

pub use check::{gradient_check, tiny_dims};
pub use component::{
    build_embedding_table, embed_item, resolve_items, train_embedding_component, ContentFeatures, EmbedEpoch, EmbedTrainConfig,
    EmbedTrainReport, EmbeddingComponent, ItemEmbeddingTable,
};
pub use encode::{encode_sessions, EncodedSession, EncodedSessions, IdIndex, IdMaps};
pub use persist::{load_component, load_predictor, save_component, save_predictor, ModelFile, PredictorBundle, FORMAT_VERSION};
pub use predictor::{predict_session, BaselinePredictor, ContentPredictor, IntegratedPredictor, Predictor, SessionModel};
pub use train::{score_sessions, train_predictor, EpochRecord, TrainConfig, TrainOutcome};

/// Tag stored in every model file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    EmbeddingComponent,
    Content,
    Integrated,
    Baseline,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::EmbeddingComponent => "embedding_component",
            ModelKind::Content => "content",
            ModelKind::Integrated => "integrated",
            ModelKind::Baseline => "baseline",
        }
    }

    /// Predictors only (the embedding component is not one).
    pub fn predictors() -> [ModelKind; 3] {
        [ModelKind::Content, ModelKind::Integrated, ModelKind::Baseline]
    }

    pub fn uses_content(self) -> bool {
        matches!(self, ModelKind::Content | ModelKind::Integrated)
    }

    pub fn uses_ids(self) -> bool {
        matches!(self, ModelKind::Integrated | ModelKind::Baseline)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "embedding_component" => Ok(ModelKind::EmbeddingComponent),
            "content" => Ok(ModelKind::Content),
            "integrated" => Ok(ModelKind::Integrated),
            "baseline" => Ok(ModelKind::Baseline),
            other => Err(crate::Error::Argument(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Layer sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dims {
    /// Word embedding width `d_w`.
    pub word_dim: usize,
    /// GRU hidden size `d_g` in the embedding component.
    pub gru_hidden: usize,
    /// Item vector width `d_e` (`Dense_1` output).
    pub item_dim: usize,
    /// Item and user id embedding width `d_i`.
    pub id_dim: usize,
    /// LSTM hidden size of every predictor branch.
    pub lstm_hidden: usize,
    /// Merge layer width `d_m` of the integrated model.
    pub merge_dim: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims { word_dim: 64, gru_hidden: 100, item_dim: 50, id_dim: 64, lstm_hidden: 150, merge_dim: 100 }
    }
}

impl Dims {
    pub fn validate(&self) -> crate::Result<()> {
        let all = [self.word_dim, self.gru_hidden, self.item_dim, self.id_dim, self.lstm_hidden, self.merge_dim];
        if all.contains(&0) {
            return Err(crate::Error::Config(format!("all layer sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}
