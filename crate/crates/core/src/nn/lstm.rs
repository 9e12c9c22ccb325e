use rand::Rng;

use super::init::glorot_uniform;
use super::loss::sigmoid;
use super::matrix::{gemm, Matrix};
use super::param::{ParamTensor, Parameterized};
use crate::error::{Error, Result};

/// LSTM layer without peepholes.
///
/// Gate blocks are stacked in the order input, forget, candidate, output:
/// `w_x` is `4H x in`, `w_h` is `4H x H`, `b` is `1 x 4H`.
///
/// ```text
/// i = σ(.)  f = σ(.)  g = tanh(.)  o = σ(.)
/// c_t = f ⊙ c_{t-1} + i ⊙ g
/// h_t = o ⊙ tanh(c_t)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub w_x: ParamTensor,
    pub w_h: ParamTensor,
    pub b: ParamTensor,
    hidden: usize,
}

/// Forward activations kept for backpropagation through time.
pub struct LstmCache {
    batch: usize,
    steps: usize,
    x: Matrix,
    /// Activated gates, `T·B x 4H`.
    gates: Matrix,
    c: Matrix,
    tanh_c: Matrix,
    h: Matrix,
    h0: Matrix,
    c0: Matrix,
}

pub struct LstmGrads {
    pub dx: Matrix,
    pub dh0: Matrix,
    pub dc0: Matrix,
}

impl LstmCache {
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Hidden state after the last step, `B x H`.
    pub fn last_hidden(&self) -> Matrix {
        let hidden = self.h.cols();
        Matrix::from_vec(self.batch, hidden, self.h.row_block((self.steps - 1) * self.batch, self.batch).to_vec())
            .expect("block shape")
    }

    pub fn last_cell(&self) -> Matrix {
        let hidden = self.c.cols();
        Matrix::from_vec(self.batch, hidden, self.c.row_block((self.steps - 1) * self.batch, self.batch).to_vec())
            .expect("block shape")
    }
}

impl Lstm {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut b = ParamTensor::zeros(1, 4 * hidden);
        b.value.data_mut()[hidden..2 * hidden].fill(1.0);
        Lstm {
            w_x: ParamTensor::new(glorot_uniform(4 * hidden, input, rng)),
            w_h: ParamTensor::new(glorot_uniform(4 * hidden, hidden, rng)),
            b,
            hidden,
        }
    }

    pub fn from_weights(w_x: Matrix, w_h: Matrix, b: Matrix) -> Result<Self> {
        let hidden = w_h.cols();
        if w_h.rows() != 4 * hidden || w_x.rows() != 4 * hidden || b.shape() != (1, 4 * hidden) {
            return Err(Error::Shape(format!(
                "inconsistent LSTM weights: w_x {:?}, w_h {:?}, b {:?}",
                w_x.shape(),
                w_h.shape(),
                b.shape()
            )));
        }
        Ok(Lstm { w_x: ParamTensor::new(w_x), w_h: ParamTensor::new(w_h), b: ParamTensor::new(b), hidden })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn input_size(&self) -> usize {
        self.w_x.value.cols()
    }

    /// Runs the layer over a step-major stacked sequence (`T·B x in`).
    /// `init` supplies `(h0, c0)`; zeros otherwise.
    pub fn forward(&self, x: Matrix, batch: usize, init: Option<(&Matrix, &Matrix)>) -> Result<LstmCache> {
        let h_size = self.hidden;
        if x.cols() != self.input_size() {
            return Err(Error::Shape(format!("LSTM expects {} inputs, got {}", self.input_size(), x.cols())));
        }
        if batch == 0 || x.rows() == 0 || x.rows() % batch != 0 {
            return Err(Error::Shape(format!("{} stacked rows do not split into batches of {batch}", x.rows())));
        }
        let steps = x.rows() / batch;
        let (h0, c0) = match init {
            Some((h, c)) => {
                if h.shape() != (batch, h_size) || c.shape() != (batch, h_size) {
                    return Err(Error::Shape("LSTM initial state shape".into()));
                }
                (h.clone(), c.clone())
            }
            None => (Matrix::zeros(batch, h_size), Matrix::zeros(batch, h_size)),
        };

        let mut gates = Matrix::zeros(x.rows(), 4 * h_size);
        for r in 0..x.rows() {
            gates.row_mut(r).copy_from_slice(self.b.value.data());
        }
        gemm(gates.data_mut(), x.view(), self.w_x.value.view_t(), 1.0, 1.0);

        let mut c = Matrix::zeros(x.rows(), h_size);
        let mut tanh_c = Matrix::zeros(x.rows(), h_size);
        let mut h = Matrix::zeros(x.rows(), h_size);
        for t in 0..steps {
            let h_prev = if t == 0 { h0.view() } else { h.block_view((t - 1) * batch, batch) };
            gemm(gates.row_block_mut(t * batch, batch), h_prev, self.w_h.value.view_t(), 1.0, 1.0);
            for r in 0..batch {
                let row = t * batch + r;
                let g = gates.row_mut(row);
                let (gi, rest) = g.split_at_mut(h_size);
                let (gf, rest) = rest.split_at_mut(h_size);
                let (gg, go) = rest.split_at_mut(h_size);
                for k in 0..h_size {
                    gi[k] = sigmoid(gi[k]);
                    gf[k] = sigmoid(gf[k]);
                    gg[k] = gg[k].tanh();
                    go[k] = sigmoid(go[k]);
                }
                let c_prev = if t == 0 { c0.row(r) } else { c.row(row - batch) };
                let mut c_new = vec![0.0; h_size];
                for k in 0..h_size {
                    c_new[k] = gf[k] * c_prev[k] + gi[k] * gg[k];
                }
                let tc: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
                let h_row = h.row_mut(row);
                for k in 0..h_size {
                    h_row[k] = go[k] * tc[k];
                }
                c.row_mut(row).copy_from_slice(&c_new);
                tanh_c.row_mut(row).copy_from_slice(&tc);
            }
        }
        Ok(LstmCache { batch, steps, x, gates, c, tanh_c, h, h0, c0 })
    }

    /// Backpropagation through time from a gradient on the final hidden
    /// state. Accumulates `[db, dw_h, dw_x]` into `grads`.
    pub fn backward(&self, cache: &LstmCache, dh_last: &Matrix, grads: &mut [Matrix]) -> Result<LstmGrads> {
        let h_size = self.hidden;
        let batch = cache.batch;
        if dh_last.shape() != (batch, h_size) {
            return Err(Error::Shape("LSTM backward: hidden gradient shape".into()));
        }
        if grads.len() != 3 {
            return Err(Error::State("LSTM backward needs three gradient buffers".into()));
        }
        let rows = cache.x.rows();
        let mut da = Matrix::zeros(rows, 4 * h_size);
        let mut dh = dh_last.clone();
        let mut dc = Matrix::zeros(batch, h_size);
        for t in (0..cache.steps).rev() {
            for r in 0..batch {
                let row = t * batch + r;
                let g = cache.gates.row(row);
                let (gi, gf, gg, go) = (&g[..h_size], &g[h_size..2 * h_size], &g[2 * h_size..3 * h_size], &g[3 * h_size..]);
                let tc = cache.tanh_c.row(row);
                let c_prev = if t == 0 { cache.c0.row(r) } else { cache.c.row(row - batch) };
                let dh_r = dh.row(r).to_vec();
                let dc_r = dc.row_mut(r);
                let da_r = da.row_mut(row);
                for k in 0..h_size {
                    let d_o = dh_r[k] * tc[k];
                    let dct = dc_r[k] + dh_r[k] * go[k] * (1.0 - tc[k] * tc[k]);
                    let di = dct * gg[k];
                    let dg = dct * gi[k];
                    let df = dct * c_prev[k];
                    dc_r[k] = dct * gf[k];
                    da_r[k] = di * gi[k] * (1.0 - gi[k]);
                    da_r[h_size + k] = df * gf[k] * (1.0 - gf[k]);
                    da_r[2 * h_size + k] = dg * (1.0 - gg[k] * gg[k]);
                    da_r[3 * h_size + k] = d_o * go[k] * (1.0 - go[k]);
                }
            }
            gemm(dh.data_mut(), da.block_view(t * batch, batch), self.w_h.value.view(), 1.0, 0.0);
        }

        let (gb, rest) = grads.split_at_mut(1);
        let (gwh, gwx) = rest.split_at_mut(1);
        gb[0].add_col_sums(&da);
        gemm(gwx[0].data_mut(), da.view_t(), cache.x.view(), 1.0, 1.0);
        gemm(gwh[0].data_mut(), da.block_view_t(0, batch), cache.h0.view(), 1.0, 1.0);
        if cache.steps > 1 {
            let n = (cache.steps - 1) * batch;
            gemm(gwh[0].data_mut(), da.block_view_t(batch, n), cache.h.block_view(0, n), 1.0, 1.0);
        }
        let mut dx = Matrix::zeros(rows, self.input_size());
        gemm(dx.data_mut(), da.view(), self.w_x.value.view(), 1.0, 0.0);
        Ok(LstmGrads { dx, dh0: dh, dc0: dc })
    }
}

impl Parameterized for Lstm {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        vec![("b".into(), &self.b), ("w_h".into(), &self.w_h), ("w_x".into(), &self.w_x)]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.b, &mut self.w_h, &mut self.w_x]
    }
}

/// One LSTM step for a single example. Returns `(h_t, c_t)`.
pub fn lstm_step(x: &[f64], h_prev: &[f64], c_prev: &[f64], layer: &Lstm) -> Result<(Vec<f64>, Vec<f64>)> {
    let h0 = Matrix::row_vector(h_prev);
    let c0 = Matrix::row_vector(c_prev);
    let cache = layer.forward(Matrix::row_vector(x), 1, Some((&h0, &c0)))?;
    Ok((cache.last_hidden().into_data(), cache.last_cell().into_data()))
}
