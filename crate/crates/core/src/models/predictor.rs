use super::component::ContentFeatures;
use super::encode::{EncodedSession, EncodedSessions, IdMaps};
use super::{Dims, ModelKind};
use crate::data::{PaddedSequence, UserId};
use crate::error::{Error, Result};
use crate::nn::init::seeded_rng;
use crate::nn::{
    prefixed, sigmoid, sigmoid_bce_batch, Activation, Dense, DenseCache, Embedding, Gradients, Lstm, LstmCache, Matrix,
    ParamTensor, Parameterized,
};

/// Batch interface shared by the three predictors.
pub trait SessionModel: Parameterized + Sync + Send {
    fn kind(&self) -> ModelKind;

    /// Purchase logits for `batch`.
    fn logits(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<Vec<f64>>;

    /// Summed BCE over `batch` and its gradient in parameter order.
    fn loss_and_grads(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<(f64, Gradients)>;
}

fn steps_of(batch: &[&EncodedSession], data: &EncodedSessions) -> Result<usize> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    Ok(data.max_len)
}

/// Step-major content inputs, `T·B x d_e`.
fn content_inputs(batch: &[&EncodedSession], data: &EncodedSessions) -> Result<Matrix> {
    let steps = steps_of(batch, data)?;
    let dim = data.content_rows.cols();
    if dim == 0 {
        return Err(Error::State("sessions were encoded without content features".into()));
    }
    let mut x = Matrix::zeros(steps * batch.len(), dim);
    for t in 0..steps {
        for (b, s) in batch.iter().enumerate() {
            let slot = *s.content_slots.get(t).ok_or_else(|| Error::Shape("content slots shorter than max_len".into()))?;
            x.row_mut(t * batch.len() + b).copy_from_slice(data.content_rows.row(slot as usize));
        }
    }
    Ok(x)
}

/// Step-major item-id rows.
fn id_inputs(batch: &[&EncodedSession], data: &EncodedSessions) -> Result<Vec<usize>> {
    let steps = steps_of(batch, data)?;
    let mut ids = Vec::with_capacity(steps * batch.len());
    for t in 0..steps {
        for s in batch {
            let slot = *s.id_slots.get(t).ok_or_else(|| Error::State("sessions were encoded without id maps".into()))?;
            ids.push(slot as usize);
        }
    }
    Ok(ids)
}

/// Rows below this index (padding and unknown items) read as zero vectors.
const ITEM_RESERVED: usize = 2;
/// The unknown-user row reads as a zero vector.
const USER_RESERVED: usize = 1;

/// Embedding lookup in which reserved rows contribute nothing, so an unseen
/// id carries no more information than padding.
fn lookup(table: &Embedding, ids: &[usize], reserved: usize) -> Result<Matrix> {
    let mut x = table.forward(ids)?;
    for (r, &id) in ids.iter().enumerate() {
        if id < reserved {
            x.row_mut(r).fill(0.0);
        }
    }
    Ok(x)
}

fn lookup_backward(table: &Embedding, ids: &[usize], reserved: usize, d_out: &Matrix, grads: &mut [Matrix]) -> Result<()> {
    let mut d = d_out.clone();
    for (r, &id) in ids.iter().enumerate() {
        if id < reserved {
            d.row_mut(r).fill(0.0);
        }
    }
    table.backward(ids, &d, grads)
}

fn labels_of(batch: &[&EncodedSession]) -> Vec<f64> {
    batch.iter().map(|s| if s.label { 1.0 } else { 0.0 }).collect()
}

fn column(m: &Matrix) -> Vec<f64> {
    m.data().to_vec()
}

/// LSTM over frozen item vectors, then a single logit.
#[derive(Clone, Debug, PartialEq)]
pub struct ContentPredictor {
    pub lstm: Lstm,
    pub out: Dense,
}

impl ContentPredictor {
    pub fn new(item_dim: usize, dims: &Dims, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, 0);
        let lstm = Lstm::new(item_dim, dims.lstm_hidden, &mut rng);
        let out = Dense::new(dims.lstm_hidden, 1, Activation::Identity, &mut rng);
        ContentPredictor { lstm, out }
    }

    fn forward(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<(LstmCache, DenseCache)> {
        let x = content_inputs(batch, data)?;
        let cache = self.lstm.forward(x, batch.len(), None)?;
        let out = self.out.forward(cache.last_hidden())?;
        Ok((cache, out))
    }
}

impl Parameterized for ContentPredictor {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        prefixed("lstm", self.lstm.named_params()).chain(prefixed("out", self.out.named_params())).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = self.lstm.params_mut();
        v.extend(self.out.params_mut());
        v
    }
}

impl SessionModel for ContentPredictor {
    fn kind(&self) -> ModelKind {
        ModelKind::Content
    }

    fn logits(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<Vec<f64>> {
        Ok(column(&self.forward(batch, data)?.1.output))
    }

    fn loss_and_grads(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<(f64, Gradients)> {
        let (cache, out) = self.forward(batch, data)?;
        let (loss, d_logit) = sigmoid_bce_batch(&out.output, &labels_of(batch))?;
        // lstm [0..3], out [3..5]
        let mut grads = Gradients::zeros_like(self);
        let dh = self.out.backward(&out, &d_logit, &mut grads.0[3..5])?;
        self.lstm.backward(&cache, &dh, &mut grads.0[0..3])?;
        Ok((loss, grads))
    }
}

/// LSTM over learned item-id embeddings; reads no text.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselinePredictor {
    pub items: Embedding,
    pub lstm: Lstm,
    pub out: Dense,
}

impl BaselinePredictor {
    pub fn new(item_rows: usize, dims: &Dims, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, 0);
        let items = Embedding::new(item_rows, dims.id_dim, &mut rng);
        let lstm = Lstm::new(dims.id_dim, dims.lstm_hidden, &mut rng);
        let out = Dense::new(dims.lstm_hidden, 1, Activation::Identity, &mut rng);
        BaselinePredictor { items, lstm, out }
    }

    fn forward(&self, ids: &[usize], batch: usize) -> Result<(LstmCache, DenseCache)> {
        let x = lookup(&self.items, ids, ITEM_RESERVED)?;
        let cache = self.lstm.forward(x, batch, None)?;
        let out = self.out.forward(cache.last_hidden())?;
        Ok((cache, out))
    }
}

impl Parameterized for BaselinePredictor {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        prefixed("items", self.items.named_params())
            .chain(prefixed("lstm", self.lstm.named_params()))
            .chain(prefixed("out", self.out.named_params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = self.items.params_mut();
        v.extend(self.lstm.params_mut());
        v.extend(self.out.params_mut());
        v
    }
}

impl SessionModel for BaselinePredictor {
    fn kind(&self) -> ModelKind {
        ModelKind::Baseline
    }

    fn logits(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<Vec<f64>> {
        let ids = id_inputs(batch, data)?;
        Ok(column(&self.forward(&ids, batch.len())?.1.output))
    }

    fn loss_and_grads(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<(f64, Gradients)> {
        let ids = id_inputs(batch, data)?;
        let (cache, out) = self.forward(&ids, batch.len())?;
        let (loss, d_logit) = sigmoid_bce_batch(&out.output, &labels_of(batch))?;
        // items [0], lstm [1..4], out [4..6]
        let mut grads = Gradients::zeros_like(self);
        let dh = self.out.backward(&out, &d_logit, &mut grads.0[4..6])?;
        let lg = self.lstm.backward(&cache, &dh, &mut grads.0[1..4])?;
        lookup_backward(&self.items, &ids, ITEM_RESERVED, &lg.dx, &mut grads.0[0..1])?;
        Ok((loss, grads))
    }
}

/// Content branch and id branch, concatenated (content first) into a tanh
/// merge layer. The id branch reads the user embedding at step 0 and the
/// item-id embeddings at steps `1..=max_len`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedPredictor {
    pub content_lstm: Lstm,
    pub id_lstm: Lstm,
    pub items: Embedding,
    pub merge: Dense,
    pub out: Dense,
    pub users: Embedding,
}

struct IntegratedCache {
    ids: Vec<usize>,
    users: Vec<usize>,
    content: LstmCache,
    id: LstmCache,
    merge: DenseCache,
    out: DenseCache,
}

impl IntegratedPredictor {
    pub fn new(item_dim: usize, item_rows: usize, user_rows: usize, dims: &Dims, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, 0);
        let content_lstm = Lstm::new(item_dim, dims.lstm_hidden, &mut rng);
        let id_lstm = Lstm::new(dims.id_dim, dims.lstm_hidden, &mut rng);
        let items = Embedding::new(item_rows, dims.id_dim, &mut rng);
        let users = Embedding::new(user_rows, dims.id_dim, &mut rng);
        let merge = Dense::new(2 * dims.lstm_hidden, dims.merge_dim, Activation::Tanh, &mut rng);
        let out = Dense::new(dims.merge_dim, 1, Activation::Identity, &mut rng);
        IntegratedPredictor { content_lstm, id_lstm, items, merge, out, users }
    }

    fn forward(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<IntegratedCache> {
        let b = batch.len();
        let content = self.content_lstm.forward(content_inputs(batch, data)?, b, None)?;

        let ids = id_inputs(batch, data)?;
        let users: Vec<usize> = batch.iter().map(|s| s.user as usize).collect();
        let user_x = lookup(&self.users, &users, USER_RESERVED)?;
        let item_x = lookup(&self.items, &ids, ITEM_RESERVED)?;
        let d = self.items.dim();
        let mut x = Matrix::zeros(b + ids.len(), d);
        x.data_mut()[..b * d].copy_from_slice(user_x.data());
        x.data_mut()[b * d..].copy_from_slice(item_x.data());
        let id = self.id_lstm.forward(x, b, None)?;

        let hc = content.last_hidden();
        let hi = id.last_hidden();
        let h = self.content_lstm.hidden_size();
        let mut joined = Matrix::zeros(b, 2 * h);
        for r in 0..b {
            joined.row_mut(r)[..h].copy_from_slice(hc.row(r));
            joined.row_mut(r)[h..].copy_from_slice(hi.row(r));
        }
        let merge = self.merge.forward(joined)?;
        let out = self.out.forward(merge.output.clone())?;
        Ok(IntegratedCache { ids, users, content, id, merge, out })
    }
}

impl Parameterized for IntegratedPredictor {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        prefixed("content_lstm", self.content_lstm.named_params())
            .chain(prefixed("id_lstm", self.id_lstm.named_params()))
            .chain(prefixed("items", self.items.named_params()))
            .chain(prefixed("merge", self.merge.named_params()))
            .chain(prefixed("out", self.out.named_params()))
            .chain(prefixed("users", self.users.named_params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = self.content_lstm.params_mut();
        v.extend(self.id_lstm.params_mut());
        v.extend(self.items.params_mut());
        v.extend(self.merge.params_mut());
        v.extend(self.out.params_mut());
        v.extend(self.users.params_mut());
        v
    }
}

impl SessionModel for IntegratedPredictor {
    fn kind(&self) -> ModelKind {
        ModelKind::Integrated
    }

    fn logits(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<Vec<f64>> {
        Ok(column(&self.forward(batch, data)?.out.output))
    }

    fn loss_and_grads(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<(f64, Gradients)> {
        let c = self.forward(batch, data)?;
        let (loss, d_logit) = sigmoid_bce_batch(&c.out.output, &labels_of(batch))?;
        // content_lstm [0..3], id_lstm [3..6], items [6], merge [7..9], out [9..11], users [11]
        let mut grads = Gradients::zeros_like(self);
        let g = &mut grads.0;
        let d_merge = self.out.backward(&c.out, &d_logit, &mut g[9..11])?;
        let d_joined = self.merge.backward(&c.merge, &d_merge, &mut g[7..9])?;
        let b = batch.len();
        let h = self.content_lstm.hidden_size();
        let mut dhc = Matrix::zeros(b, h);
        let mut dhi = Matrix::zeros(b, h);
        for r in 0..b {
            dhc.row_mut(r).copy_from_slice(&d_joined.row(r)[..h]);
            dhi.row_mut(r).copy_from_slice(&d_joined.row(r)[h..]);
        }
        self.content_lstm.backward(&c.content, &dhc, &mut g[0..3])?;
        let lg = self.id_lstm.backward(&c.id, &dhi, &mut g[3..6])?;
        let d = self.items.dim();
        let d_users = Matrix::from_vec(b, d, lg.dx.data()[..b * d].to_vec())?;
        let d_items = Matrix::from_vec(c.ids.len(), d, lg.dx.data()[b * d..].to_vec())?;
        lookup_backward(&self.users, &c.users, USER_RESERVED, &d_users, &mut g[11..12])?;
        lookup_backward(&self.items, &c.ids, ITEM_RESERVED, &d_items, &mut g[6..7])?;
        Ok((loss, grads))
    }
}

/// Any of the three predictors.
#[derive(Clone, Debug, PartialEq)]
pub enum Predictor {
    Content(ContentPredictor),
    Integrated(IntegratedPredictor),
    Baseline(BaselinePredictor),
}

impl Predictor {
    /// Freshly initialised predictor. Id-based kinds need `ids`.
    pub fn new(kind: ModelKind, dims: &Dims, item_dim: usize, ids: Option<&IdMaps>, seed: u64) -> Result<Self> {
        dims.validate()?;
        let need_ids = || ids.ok_or_else(|| Error::Argument(format!("{kind} model needs id maps")));
        Ok(match kind {
            ModelKind::Content => Predictor::Content(ContentPredictor::new(item_dim, dims, seed)),
            ModelKind::Baseline => Predictor::Baseline(BaselinePredictor::new(need_ids()?.items.rows(), dims, seed)),
            ModelKind::Integrated => {
                let maps = need_ids()?;
                Predictor::Integrated(IntegratedPredictor::new(item_dim, maps.items.rows(), maps.users.rows(), dims, seed))
            }
            ModelKind::EmbeddingComponent => {
                return Err(Error::Argument("the embedding component is not a session predictor".into()))
            }
        })
    }

    fn inner(&self) -> &dyn SessionModel {
        match self {
            Predictor::Content(m) => m,
            Predictor::Integrated(m) => m,
            Predictor::Baseline(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn SessionModel {
        match self {
            Predictor::Content(m) => m,
            Predictor::Integrated(m) => m,
            Predictor::Baseline(m) => m,
        }
    }
}

impl Parameterized for Predictor {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        self.inner().named_params()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.inner_mut().params_mut()
    }
}

impl SessionModel for Predictor {
    fn kind(&self) -> ModelKind {
        self.inner().kind()
    }

    fn logits(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<Vec<f64>> {
        self.inner().logits(batch, data)
    }

    fn loss_and_grads(&self, batch: &[&EncodedSession], data: &EncodedSessions) -> Result<(f64, Gradients)> {
        self.inner().loss_and_grads(batch, data)
    }
}

/// Purchase probability for one padded session, kept strictly inside (0, 1).
///
/// Content slots use the table vector, else an on-demand text embedding,
/// else zeros; id slots use the PAD/UNKNOWN rows where needed.
pub fn predict_session(
    model: &Predictor,
    padded: &PaddedSequence,
    max_len: usize,
    content: Option<&ContentFeatures>,
    ids: Option<&IdMaps>,
    user: UserId,
) -> Result<f64> {
    if padded.max_len() != max_len {
        return Err(Error::Shape(format!("padded sequence of length {} where {max_len} is expected", padded.max_len())));
    }
    let kind = model.kind();
    let mut content_rows = Matrix::zeros(1, 0);
    let mut content_slots = Vec::new();
    if kind.uses_content() {
        let features = content.ok_or_else(|| Error::Argument(format!("{kind} model needs content features")))?;
        content_rows = Matrix::zeros(max_len + 1, features.dim());
        for (t, slot) in padded.slots.iter().enumerate() {
            match slot {
                Some(id) => {
                    content_rows.row_mut(t + 1).copy_from_slice(&features.vector(*id)?);
                    content_slots.push(t as u32 + 1);
                }
                None => content_slots.push(0),
            }
        }
    }
    let (id_slots, user_row) = match (kind.uses_ids(), ids) {
        (true, Some(maps)) => (padded.slots.iter().map(|&s| maps.item_row(s) as u32).collect(), maps.user_row(user) as u32),
        (true, None) => return Err(Error::Argument(format!("{kind} model needs id maps"))),
        (false, _) => (Vec::new(), 0),
    };
    let session = EncodedSession { session_id: 0, label: false, content_slots, id_slots, user: user_row };
    let data = EncodedSessions { max_len, content_rows, sessions: Vec::new() };
    let logit = model.logits(&[&session], &data)?[0];
    Ok(sigmoid(logit).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
}
