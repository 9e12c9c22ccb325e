use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::glorot_uniform;
use super::matrix::{gemm, Matrix};
use super::param::{ParamTensor, Parameterized};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => super::loss::sigmoid(x),
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Fully connected layer `y = act(W x + b)` with `W: out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: ParamTensor,
    pub b: ParamTensor,
    pub activation: Activation,
}

pub struct DenseCache {
    pub input: Matrix,
    pub output: Matrix,
}

impl Dense {
    pub fn new(input: usize, output: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Dense { w: ParamTensor::new(glorot_uniform(output, input, rng)), b: ParamTensor::zeros(1, output), activation }
    }

    pub fn from_weights(w: Matrix, b: Vec<f64>, activation: Activation) -> Result<Self> {
        if b.len() != w.rows() {
            return Err(Error::Shape(format!("bias of length {} for a layer with {} outputs", b.len(), w.rows())));
        }
        Ok(Dense { w: ParamTensor::new(w), b: ParamTensor::new(Matrix::row_vector(&b)), activation })
    }

    pub fn input_dim(&self) -> usize {
        self.w.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.value.rows()
    }

    /// Batch forward pass: `x` is `B x in`.
    pub fn forward(&self, x: Matrix) -> Result<DenseCache> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!("dense layer expects {} inputs, got {}", self.input_dim(), x.cols())));
        }
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        for r in 0..x.rows() {
            out.row_mut(r).copy_from_slice(self.b.value.data());
        }
        gemm(out.data_mut(), x.view(), self.w.value.view_t(), 1.0, 1.0);
        let act = self.activation;
        out.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        Ok(DenseCache { input: x, output: out })
    }

    /// Accumulates `[db, dW]` into `grads` and returns the input gradient.
    pub fn backward(&self, cache: &DenseCache, d_out: &Matrix, grads: &mut [Matrix]) -> Result<Matrix> {
        if d_out.shape() != cache.output.shape() {
            return Err(Error::Shape("dense backward: output gradient shape".into()));
        }
        let act = self.activation;
        let mut d_pre = d_out.clone();
        for (d, y) in d_pre.data_mut().iter_mut().zip(cache.output.data()) {
            *d *= act.derivative_from_output(*y);
        }
        let (gb, gw) = grads.split_at_mut(1);
        gemm(gw[0].data_mut(), d_pre.view_t(), cache.input.view(), 1.0, 1.0);
        gb[0].add_col_sums(&d_pre);
        let mut dx = Matrix::zeros(cache.input.rows(), self.input_dim());
        gemm(dx.data_mut(), d_pre.view(), self.w.value.view(), 1.0, 0.0);
        Ok(dx)
    }

    /// Single-vector forward pass.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(Matrix::row_vector(x))?.output.into_data())
    }
}

impl Parameterized for Dense {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        vec![("b".into(), &self.b), ("w".into(), &self.w)]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.b, &mut self.w]
    }
}

/// `activation(W·x + b)` for one input vector.
pub fn dense_forward(x: &[f64], layer: &Dense) -> Result<Vec<f64>> {
    layer.apply(x)
}
