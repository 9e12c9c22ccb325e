use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::component::EmbeddingComponent;
use super::encode::IdMaps;
use super::predictor::{Predictor, SessionModel};
use super::{Dims, ModelKind};
use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::nn::{Matrix, Parameterized};
use crate::serial;

/// Current model file version; other versions are rejected on load.
pub const FORMAT_VERSION: u32 = 1;

/// On-disk model document. Parameters are keyed by their dotted names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub model_kind: ModelKind,
    pub dims: Dims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
    pub params: BTreeMap<String, Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<Vocabulary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_maps: Option<IdMaps>,
    /// Embedding component used by content-reading predictors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Box<ModelFile>>,
}

/// A trained predictor with everything needed to score sessions again.
#[derive(Clone, Debug)]
pub struct PredictorBundle {
    pub predictor: Predictor,
    pub dims: Dims,
    pub max_len: usize,
    pub id_maps: Option<IdMaps>,
    pub embedding: Option<(EmbeddingComponent, Vocabulary)>,
}

fn params_of<M: Parameterized + ?Sized>(model: &M) -> BTreeMap<String, Matrix> {
    model.named_params().into_iter().map(|(n, p)| (n, p.value.clone())).collect()
}

/// Copies `params` into `model`, requiring identical names and shapes.
fn fill_params<M: Parameterized + ?Sized>(model: &mut M, params: &BTreeMap<String, Matrix>, kind: ModelKind) -> Result<()> {
    let expected: Vec<(String, (usize, usize))> = model.named_params().into_iter().map(|(n, p)| (n, p.shape())).collect();
    if expected.len() != params.len() {
        let names: Vec<&str> = params.keys().map(String::as_str).collect();
        return Err(Error::Format(format!(
            "{kind} model expects {} parameter tensors, file has {} ({})",
            expected.len(),
            params.len(),
            names.join(", ")
        )));
    }
    for (name, shape) in &expected {
        let m = params.get(name).ok_or_else(|| Error::Format(format!("{kind} model file lacks parameter {name}")))?;
        if m.shape() != *shape {
            return Err(Error::Format(format!(
                "parameter {name} has shape {:?}, the declared dimensions imply {shape:?}",
                m.shape()
            )));
        }
    }
    for (name, p) in expected.iter().map(|(n, _)| n).zip(model.params_mut()) {
        p.value = params[name].clone();
    }
    Ok(())
}

fn check_header(file: &ModelFile, expected: Option<ModelKind>) -> Result<()> {
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "model format version {} is not supported (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    if let Some(kind) = expected {
        if file.model_kind != kind {
            return Err(Error::Format(format!("expected a {kind} model, found {}", file.model_kind)));
        }
    }
    file.dims.validate().map_err(|e| Error::Format(e.to_string()))
}

impl ModelFile {
    pub fn from_component(component: &EmbeddingComponent, vocabulary: &Vocabulary, dims: &Dims) -> Result<Self> {
        if !component.is_detached() {
            return Err(Error::State("only a detached embedding component can be saved".into()));
        }
        Ok(ModelFile {
            format_version: FORMAT_VERSION,
            model_kind: ModelKind::EmbeddingComponent,
            dims: *dims,
            max_len: None,
            params: params_of(component),
            vocabulary: Some(vocabulary.clone()),
            id_maps: None,
            embedding: None,
        })
    }

    pub fn into_component(self) -> Result<(EmbeddingComponent, Vocabulary, Dims)> {
        check_header(&self, Some(ModelKind::EmbeddingComponent))?;
        let vocabulary = self.vocabulary.ok_or_else(|| Error::Format("embedding component file lacks its vocabulary".into()))?;
        let mut component = EmbeddingComponent::new(vocabulary.len(), 2, &self.dims, 0);
        component.detach_head();
        fill_params(&mut component, &self.params, ModelKind::EmbeddingComponent)?;
        Ok((component, vocabulary, self.dims))
    }

    pub fn from_predictor(bundle: &PredictorBundle) -> Result<Self> {
        let kind = bundle.predictor.kind();
        let embedding = match (&bundle.embedding, kind.uses_content()) {
            (Some((c, v)), true) => Some(Box::new(ModelFile::from_component(c, v, &bundle.dims)?)),
            (None, true) => return Err(Error::State(format!("{kind} model bundle lacks its embedding component"))),
            (_, false) => None,
        };
        if kind.uses_ids() && bundle.id_maps.is_none() {
            return Err(Error::State(format!("{kind} model bundle lacks its id maps")));
        }
        Ok(ModelFile {
            format_version: FORMAT_VERSION,
            model_kind: kind,
            dims: bundle.dims,
            max_len: Some(bundle.max_len),
            params: params_of(&bundle.predictor),
            vocabulary: None,
            id_maps: if kind.uses_ids() { bundle.id_maps.clone() } else { None },
            embedding,
        })
    }

    pub fn into_predictor(self, expected: Option<ModelKind>) -> Result<PredictorBundle> {
        check_header(&self, expected)?;
        let kind = self.model_kind;
        if kind == ModelKind::EmbeddingComponent {
            return Err(Error::Format("expected a predictor, found an embedding component".into()));
        }
        let max_len = self.max_len.ok_or_else(|| Error::Format("predictor file lacks max_len".into()))?;
        let embedding = match (self.embedding, kind.uses_content()) {
            (Some(file), true) => {
                let (c, v, d) = file.into_component()?;
                if d.item_dim != self.dims.item_dim {
                    return Err(Error::Format(format!(
                        "embedding component produces {}-d vectors but the predictor declares {}",
                        d.item_dim, self.dims.item_dim
                    )));
                }
                Some((c, v))
            }
            (None, true) => return Err(Error::Format(format!("{kind} model file lacks its embedding component"))),
            (_, false) => None,
        };
        if kind.uses_ids() && self.id_maps.is_none() {
            return Err(Error::Format(format!("{kind} model file lacks id maps")));
        }
        let mut predictor = Predictor::new(kind, &self.dims, self.dims.item_dim, self.id_maps.as_ref(), 0)?;
        fill_params(&mut predictor, &self.params, kind)?;
        Ok(PredictorBundle { predictor, dims: self.dims, max_len, id_maps: self.id_maps, embedding })
    }
}

pub fn save_component(path: &Path, component: &EmbeddingComponent, vocabulary: &Vocabulary, dims: &Dims) -> Result<()> {
    serial::write_file(path, &ModelFile::from_component(component, vocabulary, dims)?)
}

pub fn load_component(path: &Path) -> Result<(EmbeddingComponent, Vocabulary, Dims)> {
    let file: ModelFile = serial::read_file(path)?;
    file.into_component()
}

pub fn save_predictor(path: &Path, bundle: &PredictorBundle) -> Result<()> {
    serial::write_file(path, &ModelFile::from_predictor(bundle)?)
}

/// Loads a predictor, rejecting other kinds when `expected` is given.
pub fn load_predictor(path: &Path, expected: Option<ModelKind>) -> Result<PredictorBundle> {
    let file: ModelFile = serial::read_file(path)?;
    file.into_predictor(expected)
}
