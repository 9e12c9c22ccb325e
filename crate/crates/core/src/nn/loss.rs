use super::matrix::Matrix;
use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax cross-entropy for one example.
///
/// Returns `(loss, probabilities, d loss / d logits)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::Index(format!("target class {target} with {} logits", logits.len())));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numeric("softmax logits".into()));
    }
    let arg_max = (0..logits.len()).fold(0, |best, k| if logits[k] > logits[best] { k } else { best });
    let max = logits[arg_max];
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    // Sum of the non-maximal terms, so ln(1 + rest) keeps precision when rest is tiny.
    let rest: f64 = exps.iter().enumerate().filter(|&(k, _)| k != arg_max).map(|(_, e)| e).sum();
    let total = 1.0 + rest;
    let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let loss = rest.ln_1p() - (logits[target] - max);
    let mut grad = probs.clone();
    grad[target] -= 1.0;
    Ok((loss, probs, grad))
}

/// Summed softmax cross-entropy over the rows of `logits`; the returned
/// gradient is for the sum.
pub fn softmax_cross_entropy_batch(logits: &Matrix, targets: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != targets.len() {
        return Err(Error::Shape(format!("{} logit rows for {} targets", logits.rows(), targets.len())));
    }
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let (loss, _, g) = softmax_cross_entropy(logits.row(r), t)?;
        total += loss;
        grad.row_mut(r).copy_from_slice(&g);
    }
    Ok((total, grad))
}

/// Binary cross-entropy on a sigmoid unit, in the overflow-free form
/// `max(z, 0) - z·y + ln(1 + e^{-|z|})`.
///
/// Returns `(loss, probability, d loss / d logit)`.
pub fn sigmoid_bce(logit: f64, label: f64) -> (f64, f64, f64) {
    let prob = sigmoid(logit);
    let loss = logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p();
    (loss, prob, prob - label)
}

/// Summed BCE over a `B x 1` logit column.
pub fn sigmoid_bce_batch(logits: &Matrix, labels: &[f64]) -> Result<(f64, Matrix)> {
    if logits.cols() != 1 || logits.rows() != labels.len() {
        return Err(Error::Shape("bce expects a B x 1 logit column matching the labels".into()));
    }
    let mut grad = Matrix::zeros(logits.rows(), 1);
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let (l, _, g) = sigmoid_bce(logits.get(r, 0), y);
        total += l;
        grad.set(r, 0, g);
    }
    Ok((total, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_over_thirteen_classes() {
        let (loss, probs, grad) = softmax_cross_entropy(&[0.7; 13], 4).unwrap();
        assert!((loss - 13f64.ln()).abs() < 1e-12);
        assert!((loss - 2.564_949_357_461_536_7).abs() < 1e-12);
        assert!(probs.iter().all(|p| (p - 1.0 / 13.0).abs() < 1e-15));
        assert!(grad.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn confident_logits_do_not_underflow() {
        let (loss, probs, _) = softmax_cross_entropy(&[10.0, -10.0], 0).unwrap();
        // ln(1 + e^-20)
        let expect = (-20f64).exp().ln_1p();
        assert!((loss - expect).abs() < 1e-20);
        assert!((loss - 2.061_153_620_314_381e-9).abs() < 1e-18);
        assert!((probs[1] - 2.061_153_618_190_203_3e-9).abs() < 1e-18);
    }

    #[test]
    fn out_of_range_target() {
        assert!(matches!(softmax_cross_entropy(&[1.0, 2.0], 2), Err(Error::Index(_))));
    }

    #[test]
    fn bce_reference_values() {
        let (l, p, g) = sigmoid_bce(0.0, 1.0);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(p, 0.5);
        assert_eq!(g, -0.5);
        let (l0, _, g0) = sigmoid_bce(0.0, 0.0);
        assert_eq!(l0, l);
        assert_eq!(g0, 0.5);
        let (big, p, _) = sigmoid_bce(100.0, 0.0);
        assert!(big.is_finite());
        assert!((big - 100.0).abs() < 1e-12);
        assert!(p <= 1.0);
        let (small, _, _) = sigmoid_bce(-1000.0, 1.0);
        assert!((small - 1000.0).abs() < 1e-9);
    }
}
