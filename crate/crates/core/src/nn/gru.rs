use rand::Rng;

use super::init::glorot_uniform;
use super::loss::sigmoid;
use super::matrix::{gemm, Matrix};
use super::param::{ParamTensor, Parameterized};
use crate::error::{Error, Result};

/// GRU layer.
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h~ = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 - z) ⊙ h + z ⊙ h~
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Gru {
    pub w_z: ParamTensor,
    pub w_r: ParamTensor,
    pub w_h: ParamTensor,
    pub u_z: ParamTensor,
    pub u_r: ParamTensor,
    pub u_h: ParamTensor,
    pub b_z: ParamTensor,
    pub b_r: ParamTensor,
    pub b_h: ParamTensor,
    hidden: usize,
}

pub struct GruCache {
    batch: usize,
    steps: usize,
    x: Matrix,
    z: Matrix,
    r: Matrix,
    cand: Matrix,
    rh: Matrix,
    h: Matrix,
    h0: Matrix,
}

impl GruCache {
    pub fn last_hidden(&self) -> Matrix {
        let hidden = self.h.cols();
        Matrix::from_vec(self.batch, hidden, self.h.row_block((self.steps - 1) * self.batch, self.batch).to_vec())
            .expect("block shape")
    }
}

fn input_projection(x: &Matrix, w: &ParamTensor, b: &ParamTensor) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), w.value.rows());
    for r in 0..x.rows() {
        out.row_mut(r).copy_from_slice(b.value.data());
    }
    gemm(out.data_mut(), x.view(), w.value.view_t(), 1.0, 1.0);
    out
}

impl Gru {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut w = || ParamTensor::new(glorot_uniform(hidden, input, rng));
        let (w_z, w_r, w_h) = (w(), w(), w());
        let mut u = || ParamTensor::new(glorot_uniform(hidden, hidden, rng));
        let (u_z, u_r, u_h) = (u(), u(), u());
        Gru {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z: ParamTensor::zeros(1, hidden),
            b_r: ParamTensor::zeros(1, hidden),
            b_h: ParamTensor::zeros(1, hidden),
            hidden,
        }
    }

    /// All-zero parameters.
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || ParamTensor::zeros(hidden, input);
        let u = || ParamTensor::zeros(hidden, hidden);
        let b = || ParamTensor::zeros(1, hidden);
        Gru { w_z: w(), w_r: w(), w_h: w(), u_z: u(), u_r: u(), u_h: u(), b_z: b(), b_r: b(), b_h: b(), hidden }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn input_size(&self) -> usize {
        self.w_z.value.cols()
    }

    /// Checks that all nine tensors agree on the input and hidden sizes.
    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden, self.input_size());
        let ok = [&self.w_z, &self.w_r, &self.w_h].iter().all(|p| p.shape() == (h, i))
            && [&self.u_z, &self.u_r, &self.u_h].iter().all(|p| p.shape() == (h, h))
            && [&self.b_z, &self.b_r, &self.b_h].iter().all(|p| p.shape() == (1, h));
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("inconsistent GRU parameter shapes".into()))
        }
    }

    pub fn forward(&self, x: Matrix, batch: usize, h0: Option<&Matrix>) -> Result<GruCache> {
        let hs = self.hidden;
        if x.cols() != self.input_size() {
            return Err(Error::Shape(format!("GRU expects {} inputs, got {}", self.input_size(), x.cols())));
        }
        if batch == 0 || x.rows() == 0 || x.rows() % batch != 0 {
            return Err(Error::Shape(format!("{} stacked rows do not split into batches of {batch}", x.rows())));
        }
        let steps = x.rows() / batch;
        let h0 = match h0 {
            Some(h) if h.shape() == (batch, hs) => h.clone(),
            Some(_) => return Err(Error::Shape("GRU initial state shape".into())),
            None => Matrix::zeros(batch, hs),
        };
        let mut z = input_projection(&x, &self.w_z, &self.b_z);
        let mut r = input_projection(&x, &self.w_r, &self.b_r);
        let mut cand = input_projection(&x, &self.w_h, &self.b_h);
        let mut rh = Matrix::zeros(x.rows(), hs);
        let mut h = Matrix::zeros(x.rows(), hs);
        for t in 0..steps {
            let start = t * batch;
            {
                let h_prev = if t == 0 { h0.view() } else { h.block_view(start - batch, batch) };
                gemm(z.row_block_mut(start, batch), h_prev, self.u_z.value.view_t(), 1.0, 1.0);
                gemm(r.row_block_mut(start, batch), h_prev, self.u_r.value.view_t(), 1.0, 1.0);
            }
            for v in z.row_block_mut(start, batch) {
                *v = sigmoid(*v);
            }
            for v in r.row_block_mut(start, batch) {
                *v = sigmoid(*v);
            }
            for b in 0..batch {
                let row = start + b;
                let hp = if t == 0 { h0.row(b) } else { h.row(row - batch) };
                let vals: Vec<f64> = r.row(row).iter().zip(hp).map(|(a, c)| a * c).collect();
                rh.row_mut(row).copy_from_slice(&vals);
            }
            gemm(cand.row_block_mut(start, batch), rh.block_view(start, batch), self.u_h.value.view_t(), 1.0, 1.0);
            for v in cand.row_block_mut(start, batch) {
                *v = v.tanh();
            }
            for b in 0..batch {
                let row = start + b;
                let hp: Vec<f64> = if t == 0 { h0.row(b).to_vec() } else { h.row(row - batch).to_vec() };
                let zr = z.row(row);
                let cr = cand.row(row);
                let out = h.row_mut(row);
                for k in 0..hs {
                    out[k] = (1.0 - zr[k]) * hp[k] + zr[k] * cr[k];
                }
            }
        }
        Ok(GruCache { batch, steps, x, z, r, cand, rh, h, h0 })
    }

    /// BPTT from a gradient on the final hidden state. Accumulates gradients
    /// in `named_params` order and returns `(dx, dh0)`.
    pub fn backward(&self, cache: &GruCache, dh_last: &Matrix, grads: &mut [Matrix]) -> Result<(Matrix, Matrix)> {
        let hs = self.hidden;
        let batch = cache.batch;
        if dh_last.shape() != (batch, hs) {
            return Err(Error::Shape("GRU backward: hidden gradient shape".into()));
        }
        if grads.len() != 9 {
            return Err(Error::State("GRU backward needs nine gradient buffers".into()));
        }
        let rows = cache.x.rows();
        let mut da_z = Matrix::zeros(rows, hs);
        let mut da_r = Matrix::zeros(rows, hs);
        let mut da_h = Matrix::zeros(rows, hs);
        let mut dh = dh_last.clone();
        let mut dh_prev = Matrix::zeros(batch, hs);
        let mut d_rh = Matrix::zeros(batch, hs);
        for t in (0..cache.steps).rev() {
            let start = t * batch;
            for b in 0..batch {
                let row = start + b;
                let hp = if t == 0 { cache.h0.row(b) } else { cache.h.row(row - batch) };
                let (zr, cr) = (cache.z.row(row), cache.cand.row(row));
                let dh_r = dh.row(b);
                let dhp = dh_prev.row_mut(b);
                let (daz, dah) = (da_z.row_mut(row), da_h.row_mut(row));
                for k in 0..hs {
                    let dz = dh_r[k] * (cache.cand.get(row, k) - hp[k]);
                    dhp[k] = dh_r[k] * (1.0 - zr[k]);
                    daz[k] = dz * zr[k] * (1.0 - zr[k]);
                    dah[k] = dh_r[k] * zr[k] * (1.0 - cr[k] * cr[k]);
                }
            }
            gemm(d_rh.data_mut(), da_h.block_view(start, batch), self.u_h.value.view(), 1.0, 0.0);
            for b in 0..batch {
                let row = start + b;
                let hp = if t == 0 { cache.h0.row(b) } else { cache.h.row(row - batch) };
                let rr = cache.r.row(row);
                let drh = d_rh.row(b);
                let dar = da_r.row_mut(row);
                let dhp = dh_prev.row_mut(b);
                for k in 0..hs {
                    let dr = drh[k] * hp[k];
                    dhp[k] += drh[k] * rr[k];
                    dar[k] = dr * rr[k] * (1.0 - rr[k]);
                }
            }
            gemm(dh_prev.data_mut(), da_z.block_view(start, batch), self.u_z.value.view(), 1.0, 1.0);
            gemm(dh_prev.data_mut(), da_r.block_view(start, batch), self.u_r.value.view(), 1.0, 1.0);
            std::mem::swap(&mut dh, &mut dh_prev);
        }

        // order: b_h, b_r, b_z, u_h, u_r, u_z, w_h, w_r, w_z
        grads[0].add_col_sums(&da_h);
        grads[1].add_col_sums(&da_r);
        grads[2].add_col_sums(&da_z);
        gemm(grads[3].data_mut(), da_h.view_t(), cache.rh.view(), 1.0, 1.0);
        for (gi, da) in [(4, &da_r), (5, &da_z)] {
            gemm(grads[gi].data_mut(), da.block_view_t(0, batch), cache.h0.view(), 1.0, 1.0);
            if cache.steps > 1 {
                let n = (cache.steps - 1) * batch;
                gemm(grads[gi].data_mut(), da.block_view_t(batch, n), cache.h.block_view(0, n), 1.0, 1.0);
            }
        }
        gemm(grads[6].data_mut(), da_h.view_t(), cache.x.view(), 1.0, 1.0);
        gemm(grads[7].data_mut(), da_r.view_t(), cache.x.view(), 1.0, 1.0);
        gemm(grads[8].data_mut(), da_z.view_t(), cache.x.view(), 1.0, 1.0);

        let mut dx = Matrix::zeros(rows, self.input_size());
        gemm(dx.data_mut(), da_z.view(), self.w_z.value.view(), 1.0, 0.0);
        gemm(dx.data_mut(), da_r.view(), self.w_r.value.view(), 1.0, 1.0);
        gemm(dx.data_mut(), da_h.view(), self.w_h.value.view(), 1.0, 1.0);
        Ok((dx, dh))
    }
}

impl Parameterized for Gru {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        vec![
            ("b_h".into(), &self.b_h),
            ("b_r".into(), &self.b_r),
            ("b_z".into(), &self.b_z),
            ("u_h".into(), &self.u_h),
            ("u_r".into(), &self.u_r),
            ("u_z".into(), &self.u_z),
            ("w_h".into(), &self.w_h),
            ("w_r".into(), &self.w_r),
            ("w_z".into(), &self.w_z),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![
            &mut self.b_h,
            &mut self.b_r,
            &mut self.b_z,
            &mut self.u_h,
            &mut self.u_r,
            &mut self.u_z,
            &mut self.w_h,
            &mut self.w_r,
            &mut self.w_z,
        ]
    }
}

/// One GRU step for a single example.
pub fn gru_step(x: &[f64], h_prev: &[f64], layer: &Gru) -> Result<Vec<f64>> {
    let h0 = Matrix::row_vector(h_prev);
    let cache = layer.forward(Matrix::row_vector(x), 1, Some(&h0))?;
    Ok(cache.last_hidden().into_data())
}
