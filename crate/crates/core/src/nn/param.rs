use super::matrix::Matrix;

/// A trainable weight with its gradient and Adam moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub value: Matrix,
    pub grad: Matrix,
    pub adam_m: Matrix,
    pub adam_v: Matrix,
}

impl ParamTensor {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        ParamTensor { value, grad: Matrix::zeros(r, c), adam_m: Matrix::zeros(r, c), adam_v: Matrix::zeros(r, c) }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ParamTensor::new(Matrix::zeros(rows, cols))
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything owning [`ParamTensor`]s.
///
/// `named_params` and `params_mut` must list tensors in the same order; that
/// order also defines the layout of [`Gradients`].
pub trait Parameterized {
    fn named_params(&self) -> Vec<(String, &ParamTensor)>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.value.len()).sum()
    }

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Prefixes child parameter names, e.g. `lstm` + `w_x` -> `lstm.w_x`.
pub(crate) fn prefixed<'a>(
    prefix: &str,
    child: Vec<(String, &'a ParamTensor)>,
) -> impl Iterator<Item = (String, &'a ParamTensor)> + 'a {
    let prefix = prefix.to_string();
    child.into_iter().map(move |(n, p)| (format!("{prefix}.{n}"), p))
}

/// Gradient buffers laid out like a model's parameter list.
///
/// Kept separate from [`ParamTensor::grad`] so several workers can
/// accumulate into their own buffers before an ordered reduction.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<Matrix>);

impl Gradients {
    pub fn zeros_like<M: Parameterized + ?Sized>(model: &M) -> Self {
        Gradients(
            model
                .named_params()
                .iter()
                .map(|(_, p)| {
                    let (r, c) = p.shape();
                    Matrix::zeros(r, c)
                })
                .collect(),
        )
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.0.len(), other.0.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for m in &mut self.0 {
            m.scale(s);
        }
    }

    /// Writes these gradients into the model's `grad` fields (overwriting).
    pub fn store<M: Parameterized + ?Sized>(&self, model: &mut M) {
        let params = model.params_mut();
        assert_eq!(params.len(), self.0.len(), "gradient layout does not match model");
        for (p, g) in params.into_iter().zip(&self.0) {
            p.grad.data_mut().copy_from_slice(g.data());
        }
    }

    /// Reads the model's `grad` fields.
    pub fn from_model<M: Parameterized + ?Sized>(model: &M) -> Self {
        Gradients(model.named_params().iter().map(|(_, p)| p.grad.clone()).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flat_map(|m| m.data().iter()).fold(0.0, |a: f64, &b| a.max(b.abs()))
    }
}
