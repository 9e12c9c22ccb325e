use rand::Rng;

use super::init::glorot_uniform;
use super::matrix::Matrix;
use super::param::{ParamTensor, Parameterized};
use crate::error::{Error, Result};

/// Lookup table equivalent to multiplying one-hot rows by `table`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub table: ParamTensor,
}

impl Embedding {
    pub fn new(count: usize, dim: usize, rng: &mut impl Rng) -> Self {
        Embedding { table: ParamTensor::new(glorot_uniform(count, dim, rng)) }
    }

    pub fn from_matrix(table: Matrix) -> Self {
        Embedding { table: ParamTensor::new(table) }
    }

    pub fn count(&self) -> usize {
        self.table.value.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    /// Gathers rows `ids` into an `ids.len() x dim` matrix.
    pub fn forward(&self, ids: &[usize]) -> Result<Matrix> {
        let dim = self.dim();
        let mut out = Matrix::zeros(ids.len(), dim);
        for (r, &id) in ids.iter().enumerate() {
            if id >= self.count() {
                return Err(Error::Index(format!("embedding id {id} with {} rows", self.count())));
            }
            out.row_mut(r).copy_from_slice(self.table.value.row(id));
        }
        Ok(out)
    }

    /// Scatter-adds `d_out` rows into the rows of `grads[0]` they came from.
    pub fn backward(&self, ids: &[usize], d_out: &Matrix, grads: &mut [Matrix]) -> Result<()> {
        if d_out.rows() != ids.len() || d_out.cols() != self.dim() {
            return Err(Error::Shape("embedding backward: gradient shape".into()));
        }
        let g = &mut grads[0];
        for (r, &id) in ids.iter().enumerate() {
            for (a, b) in g.row_mut(id).iter_mut().zip(d_out.row(r)) {
                *a += b;
            }
        }
        Ok(())
    }
}

impl Parameterized for Embedding {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        vec![("table".into(), &self.table)]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.table]
    }
}

/// Row `token_id` of `table`.
pub fn embedding_lookup(token_id: usize, table: &Matrix) -> Result<Vec<f64>> {
    if token_id >= table.rows() {
        return Err(Error::Index(format!("token {token_id} with vocabulary of {}", table.rows())));
    }
    Ok(table.row(token_id).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_table_gives_one_hot() {
        let e = Matrix::identity(5);
        assert_eq!(embedding_lookup(3, &e).unwrap(), vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(embedding_lookup(5, &e), Err(Error::Index(_))));
    }

    #[test]
    fn repeated_token_accumulates() {
        let emb = Embedding::from_matrix(Matrix::zeros(4, 2));
        let ids = [2, 0, 2];
        let d = Matrix::from_rows(&[vec![1.0, 2.0], vec![5.0, 5.0], vec![0.5, -1.0]]).unwrap();
        let mut g = vec![Matrix::zeros(4, 2)];
        emb.backward(&ids, &d, &mut g).unwrap();
        assert_eq!(g[0].row(2), &[1.5, 1.0]);
        assert_eq!(g[0].row(0), &[5.0, 5.0]);
        assert_eq!(g[0].row(1), &[0.0, 0.0]);
    }
}
