use rand::Rng;

use super::component::EmbeddingComponent;
use super::encode::{EncodedSession, EncodedSessions};
use super::predictor::{BaselinePredictor, ContentPredictor, IntegratedPredictor, Predictor, SessionModel};
use super::{Dims, ModelKind};
use crate::error::Result;
use crate::nn::init::seeded_rng;
use crate::nn::{grad_check, GradCheckReport, Gradients, Matrix, Parameterized};

/// Widths small enough that a full finite-difference sweep is cheap.
pub fn tiny_dims() -> Dims {
    Dims { word_dim: 4, gru_hidden: 3, item_dim: 3, id_dim: 3, lstm_hidden: 3, merge_dim: 3 }
}

const VOCAB: usize = 7;
const CATEGORIES: usize = 3;
const ITEM_ROWS: usize = 6;
const USER_ROWS: usize = 4;
const STEPS: usize = 4;
const BATCH: usize = 3;

fn randomize<M: Parameterized + ?Sized>(model: &mut M, rng: &mut impl Rng) {
    for p in model.params_mut() {
        for v in p.value.data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
}

/// Random sessions over `ITEM_ROWS` content and id rows, PAD and UNKNOWN
/// slots included.
fn random_sessions(dims: &Dims, rng: &mut impl Rng) -> EncodedSessions {
    let mut content_rows = Matrix::zeros(ITEM_ROWS, dims.item_dim);
    for r in 1..ITEM_ROWS {
        for v in content_rows.row_mut(r) {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let sessions = (0..BATCH)
        .map(|b| EncodedSession {
            session_id: b as u64,
            label: b % 2 == 0,
            content_slots: (0..STEPS).map(|_| rng.gen_range(0..ITEM_ROWS as u32)).collect(),
            id_slots: (0..STEPS).map(|_| rng.gen_range(0..ITEM_ROWS as u32)).collect(),
            user: rng.gen_range(0..USER_ROWS as u32),
        })
        .collect();
    EncodedSessions { max_len: STEPS, content_rows, sessions }
}

/// Builds a seeded tiny instance of `kind` with random parameters and
/// inputs, then compares its analytic gradient with central differences.
pub fn gradient_check(kind: ModelKind, seed: u64, epsilon: f64) -> Result<GradCheckReport> {
    let dims = tiny_dims();
    let mut rng = seeded_rng(seed, 11);
    if kind == ModelKind::EmbeddingComponent {
        let mut model = EmbeddingComponent::new(VOCAB, CATEGORIES, &dims, seed);
        randomize(&mut model, &mut rng);
        let seqs: Vec<Vec<u32>> = (0..BATCH).map(|_| (0..5).map(|_| rng.gen_range(0..VOCAB as u32)).collect()).collect();
        let views: Vec<&[u32]> = seqs.iter().map(Vec::as_slice).collect();
        let targets: Vec<usize> = (0..BATCH).map(|_| rng.gen_range(0..CATEGORIES)).collect();
        let (_, grads) = model.loss_and_grads(&views, &targets)?;
        return Ok(check(&mut model, &grads, epsilon, |m: &EmbeddingComponent| m.loss_and_grads(&views, &targets).map(|r| r.0)));
    }
    let mut model = match kind {
        ModelKind::Content => Predictor::Content(ContentPredictor::new(dims.item_dim, &dims, seed)),
        ModelKind::Baseline => Predictor::Baseline(BaselinePredictor::new(ITEM_ROWS, &dims, seed)),
        _ => Predictor::Integrated(IntegratedPredictor::new(dims.item_dim, ITEM_ROWS, USER_ROWS, &dims, seed)),
    };
    randomize(&mut model, &mut rng);
    let data = random_sessions(&dims, &mut rng);
    let batch: Vec<&EncodedSession> = data.sessions.iter().collect();
    let (_, grads) = model.loss_and_grads(&batch, &data)?;
    Ok(check(&mut model, &grads, epsilon, |m: &Predictor| m.loss_and_grads(&batch, &data).map(|r| r.0)))
}

fn check<M: Parameterized>(model: &mut M, grads: &Gradients, epsilon: f64, loss: impl Fn(&M) -> Result<f64>) -> GradCheckReport {
    grad_check(model, grads, epsilon, |m| loss(m).unwrap_or(f64::NAN))
}
