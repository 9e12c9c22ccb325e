//! Layers, losses and the optimizer against scalar re-implementations and
//! finite differences.

use pisa_core::nn::init::seeded_rng;
use pisa_core::nn::*;
use proptest::prelude::*;
use rand::Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn randomize<M: Parameterized>(model: &mut M, rng: &mut impl Rng) {
    for p in model.params_mut() {
        for v in p.value.data_mut() {
            *v = rng.gen_range(-0.8..0.8);
        }
    }
}

/// `Σ_k W[row,k]·x[k]` with a plain loop.
fn dot_row(w: &Matrix, row: usize, x: &[f64]) -> f64 {
    (0..w.cols()).map(|k| w.get(row, k) * x[k]).sum()
}

#[test]
fn dense_identity_and_constant() {
    let d = Dense::from_weights(Matrix::identity(2), vec![0.0, 0.0], Activation::Identity).unwrap();
    assert_eq!(dense_forward(&[3.0, -1.0], &d).unwrap(), vec![3.0, -1.0]);
    let d = Dense::from_weights(Matrix::zeros(1, 3), vec![0.5], Activation::Sigmoid).unwrap();
    let y = dense_forward(&[7.0, -2.0, 1.0], &d).unwrap();
    assert!((y[0] - 0.622_459_331_201_854_6).abs() < 1e-15);
}

#[test]
fn dense_matches_triple_loop() {
    let mut rng = seeded_rng(11, 0);
    for _ in 0..20 {
        let w = random_matrix(3, 4, &mut rng);
        let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = random_matrix(5, 4, &mut rng);
        let layer = Dense::from_weights(w.clone(), b.clone(), Activation::Identity).unwrap();
        let out = layer.forward(x.clone()).unwrap().output;
        for r in 0..5 {
            for o in 0..3 {
                let mut acc = b[o];
                for k in 0..4 {
                    acc += w.get(o, k) * x.get(r, k);
                }
                assert!((out.get(r, o) - acc).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn gru_zero_parameters() {
    let gru = Gru::zeros(2, 3);
    assert_eq!(gru_step(&[1.0, -2.0], &[0.0; 3], &gru).unwrap(), vec![0.0; 3]);
    let h = gru_step(&[1.0, -2.0], &[0.4, -1.0, 2.0], &gru).unwrap();
    assert_eq!(h, vec![0.2, -0.5, 1.0]);
}

fn gru_scalar_oracle(g: &Gru, x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = h.len();
    let z: Vec<f64> =
        (0..n).map(|j| sig(dot_row(&g.w_z.value, j, x) + dot_row(&g.u_z.value, j, h) + g.b_z.value.data()[j])).collect();
    let r: Vec<f64> =
        (0..n).map(|j| sig(dot_row(&g.w_r.value, j, x) + dot_row(&g.u_r.value, j, h) + g.b_r.value.data()[j])).collect();
    let rh: Vec<f64> = (0..n).map(|j| r[j] * h[j]).collect();
    (0..n)
        .map(|j| {
            let cand = (dot_row(&g.w_h.value, j, x) + dot_row(&g.u_h.value, j, &rh) + g.b_h.value.data()[j]).tanh();
            (1.0 - z[j]) * h[j] + z[j] * cand
        })
        .collect()
}

#[test]
fn gru_step_matches_scalar_loop() {
    let mut rng = seeded_rng(5, 0);
    for _ in 0..20 {
        let mut gru = Gru::new(2, 3, &mut rng);
        randomize(&mut gru, &mut rng);
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = gru_step(&x, &h, &gru).unwrap();
        for (a, b) in got.iter().zip(gru_scalar_oracle(&gru, &x, &h)) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }
}

#[test]
fn lstm_zero_parameters() {
    let zero = || Matrix::zeros(12, 3);
    let lstm = Lstm::from_weights(Matrix::zeros(12, 2), zero(), Matrix::zeros(1, 12)).unwrap();
    let (h, c) = lstm_step(&[1.0, 1.0], &[0.0; 3], &[0.0; 3], &lstm).unwrap();
    assert_eq!((h, c), (vec![0.0; 3], vec![0.0; 3]));
    let v = [0.8, -2.0, 4.0];
    let (h, c) = lstm_step(&[1.0, 1.0], &[0.3; 3], &v, &lstm).unwrap();
    for j in 0..3 {
        assert_eq!(c[j], 0.5 * v[j]);
        assert!((h[j] - 0.5 * (0.5 * v[j]).tanh()).abs() < 1e-15);
    }
}

fn lstm_scalar_oracle(l: &Lstm, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let pre = |row: usize| dot_row(&l.w_x.value, row, x) + dot_row(&l.w_h.value, row, h) + l.b.value.data()[row];
    let mut h_out = vec![0.0; n];
    let mut c_out = vec![0.0; n];
    for j in 0..n {
        let i = sig(pre(j));
        let f = sig(pre(n + j));
        let g = pre(2 * n + j).tanh();
        let o = sig(pre(3 * n + j));
        c_out[j] = f * c[j] + i * g;
        h_out[j] = o * c_out[j].tanh();
    }
    (h_out, c_out)
}

#[test]
fn lstm_step_matches_scalar_loop() {
    let mut rng = seeded_rng(6, 0);
    for _ in 0..20 {
        let mut lstm = Lstm::new(2, 3, &mut rng);
        randomize(&mut lstm, &mut rng);
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (gh, gc) = lstm_step(&x, &h, &c, &lstm).unwrap();
        let (oh, oc) = lstm_scalar_oracle(&lstm, &x, &h, &c);
        for (a, b) in gh.iter().chain(&gc).zip(oh.iter().chain(&oc)) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}

#[test]
fn lstm_forget_bias_starts_at_one() {
    let lstm = Lstm::new(2, 4, &mut seeded_rng(1, 0));
    let b = lstm.b.value.data();
    assert!(b[..4].iter().all(|&v| v == 0.0));
    assert!(b[4..8].iter().all(|&v| v == 1.0));
    assert!(b[8..].iter().all(|&v| v == 0.0));
}

/// `Σ w ⊙ h_T` over a stacked sequence.
fn weighted_last(h: &Matrix, w: &Matrix) -> f64 {
    h.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

#[test]
fn gru_sequence_gradients_match_finite_differences() {
    let mut rng = seeded_rng(21, 0);
    for _ in 0..5 {
        let (batch, steps) = (2, 3);
        let mut gru = Gru::new(3, 4, &mut rng);
        randomize(&mut gru, &mut rng);
        let x = random_matrix(batch * steps, 3, &mut rng);
        let w = random_matrix(batch, 4, &mut rng);
        let cache = gru.forward(x.clone(), batch, None).unwrap();
        let mut grads = Gradients::zeros_like(&gru);
        gru.backward(&cache, &w, &mut grads.0).unwrap();
        let report =
            grad_check(&mut gru, &grads, 1e-5, |g| weighted_last(&g.forward(x.clone(), batch, None).unwrap().last_hidden(), &w));
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}

#[test]
fn lstm_sequence_gradients_match_finite_differences() {
    let mut rng = seeded_rng(22, 0);
    for _ in 0..5 {
        let (batch, steps) = (2, 3);
        let mut lstm = Lstm::new(3, 4, &mut rng);
        randomize(&mut lstm, &mut rng);
        let x = random_matrix(batch * steps, 3, &mut rng);
        let w = random_matrix(batch, 4, &mut rng);
        let cache = lstm.forward(x.clone(), batch, None).unwrap();
        let mut grads = Gradients::zeros_like(&lstm);
        let lg = lstm.backward(&cache, &w, &mut grads.0).unwrap();
        let report =
            grad_check(&mut lstm, &grads, 1e-5, |l| weighted_last(&l.forward(x.clone(), batch, None).unwrap().last_hidden(), &w));
        assert!(report.max_rel_error < 1e-4, "{report:?}");

        // Input gradient, entry by entry.
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[k] += 1e-5;
            let mut xm = x.clone();
            xm.data_mut()[k] -= 1e-5;
            let f = |m: Matrix| weighted_last(&lstm.forward(m, batch, None).unwrap().last_hidden(), &w);
            let numeric = (f(xp) - f(xm)) / 2e-5;
            let a = lg.dx.data()[k];
            assert!((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8) < 1e-4);
        }
    }
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradients() {
    let mut rng = seeded_rng(3, 0);
    let gru = Gru::new(2, 3, &mut rng);
    let x = random_matrix(6, 2, &mut rng);
    let cache = gru.forward(x.clone(), 2, None).unwrap();
    let mut g = Gradients::zeros_like(&gru);
    gru.backward(&cache, &Matrix::zeros(2, 3), &mut g.0).unwrap();
    assert_eq!(g.max_abs(), 0.0);

    let lstm = Lstm::new(2, 3, &mut rng);
    let cache = lstm.forward(x, 2, None).unwrap();
    let mut g = Gradients::zeros_like(&lstm);
    lstm.backward(&cache, &Matrix::zeros(2, 3), &mut g.0).unwrap();
    assert_eq!(g.max_abs(), 0.0);
}

#[test]
fn single_step_lstm_gradient_matches_closed_form() {
    // One step from a zero state: c = i·g, h = o·tanh(c); only w_x and b
    // receive gradient since h_{t-1} = 0.
    let mut rng = seeded_rng(8, 0);
    let mut lstm = Lstm::new(2, 2, &mut rng);
    randomize(&mut lstm, &mut rng);
    let x = [0.7, -0.4];
    let cache = lstm.forward(Matrix::row_vector(&x), 1, None).unwrap();
    let dh = [1.0, -0.5];
    let mut grads = Gradients::zeros_like(&lstm);
    lstm.backward(&cache, &Matrix::row_vector(&dh), &mut grads.0).unwrap();
    let n = 2;
    let pre = |row: usize| dot_row(&lstm.w_x.value, row, &x) + lstm.b.value.data()[row];
    let mut db = vec![0.0; 4 * n];
    for j in 0..n {
        let (i, g, o) = (sig(pre(j)), pre(2 * n + j).tanh(), sig(pre(3 * n + j)));
        let c = i * g;
        let dc = dh[j] * o * (1.0 - c.tanh().powi(2));
        db[j] = dc * g * i * (1.0 - i);
        db[n + j] = 0.0;
        db[2 * n + j] = dc * i * (1.0 - g * g);
        db[3 * n + j] = dh[j] * c.tanh() * o * (1.0 - o);
    }
    // Layout: b, w_h, w_x.
    for (a, b) in grads.0[0].data().iter().zip(&db) {
        assert!((a - b).abs() < 1e-14);
    }
    assert_eq!(grads.0[1].data().iter().map(|v| v.abs()).sum::<f64>(), 0.0);
    for row in 0..4 * n {
        for k in 0..2 {
            assert!((grads.0[2].get(row, k) - db[row] * x[k]).abs() < 1e-14);
        }
    }
}

#[test]
fn softmax_and_bce_reference_values() {
    let (loss, probs, _) = softmax_cross_entropy(&[0.3; 13], 4).unwrap();
    assert!((loss - 13f64.ln()).abs() < 1e-12);
    assert!(probs.iter().all(|p| (p - 1.0 / 13.0).abs() < 1e-15));
    let (loss, probs, _) = softmax_cross_entropy(&[10.0, -10.0], 0).unwrap();
    let expected = (-20f64).exp().ln_1p();
    assert!((loss - expected).abs() < 1e-15 * expected && (loss - 2.061e-9).abs() < 1e-12);
    assert!((probs[1] - 2.061_153_618_190_203e-9).abs() < 1e-20);

    let (l, p, g) = sigmoid_bce(0.0, 1.0);
    assert!((l - std::f64::consts::LN_2).abs() < 1e-15 && p == 0.5 && g == -0.5);
    let (l0, _, g0) = sigmoid_bce(0.0, 0.0);
    assert_eq!((l0, g0), (l, 0.5));
    let (l, _, _) = sigmoid_bce(100.0, 0.0);
    assert!(l.is_finite() && (l - (100.0 + (-100f64).exp().ln_1p())).abs() < 1e-12);
    let (l, _, _) = sigmoid_bce(-800.0, 1.0);
    assert!((l - 800.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn softmax_gradient_sums_to_zero(logits in prop::collection::vec(-30.0f64..30.0, 2..20), t in 0usize..20) {
        let target = t % logits.len();
        let (loss, probs, grad) = softmax_cross_entropy(&logits, target).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
    }
}

struct Scalar(ParamTensor);

impl Parameterized for Scalar {
    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        vec![("x".into(), &self.0)]
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.0]
    }
}

#[test]
fn adam_first_step_and_zero_gradient() {
    let mut p = Scalar(ParamTensor::new(Matrix::row_vector(&[2.0])));
    let mut adam = Adam::new(AdamConfig::default()).unwrap();
    adam.step(&mut p).unwrap();
    assert_eq!(p.0.value.data()[0], 2.0);
    assert_eq!(adam.t, 1);

    let mut p = Scalar(ParamTensor::new(Matrix::row_vector(&[2.0])));
    let mut adam = Adam::new(AdamConfig::default()).unwrap();
    p.0.grad.data_mut()[0] = 0.3;
    adam.step(&mut p).unwrap();
    assert!((p.0.value.data()[0] - (2.0 - 0.001)).abs() < 1e-10);
}

#[test]
fn adam_matches_scalar_recurrences() {
    let cfg = AdamConfig { alpha: 0.01, ..AdamConfig::default() };
    let mut p = Scalar(ParamTensor::new(Matrix::row_vector(&[1.0])));
    let mut adam = Adam::new(cfg.clone()).unwrap();
    let (mut theta, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    for (t, g) in [0.5, 0.5, 0.5, -1.2, 0.01].into_iter().enumerate() {
        p.0.grad.data_mut()[0] = g;
        adam.step(&mut p).unwrap();
        let t = t as i32 + 1;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        let m_hat = m / (1.0 - cfg.beta1.powi(t));
        let v_hat = v / (1.0 - cfg.beta2.powi(t));
        theta -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.epsilon);
        assert!((p.0.value.data()[0] - theta).abs() < 1e-14, "step {t}");
        assert_eq!(p.0.grad.data()[0], 0.0);
    }
}

#[test]
fn adam_rejects_non_finite_gradient_without_touching_state() {
    let mut p = Scalar(ParamTensor::new(Matrix::row_vector(&[1.0])));
    let mut adam = Adam::new(AdamConfig::default()).unwrap();
    p.0.grad.data_mut()[0] = f64::NAN;
    assert!(adam.step(&mut p).is_err());
    assert_eq!((p.0.value.data()[0], adam.t), (1.0, 0));
}

#[test]
fn grad_check_on_linear_layer_and_corruption() {
    let mut rng = seeded_rng(4, 0);
    let mut layer = Dense::new(3, 2, Activation::Identity, &mut rng);
    let x = random_matrix(4, 3, &mut rng);
    let target = random_matrix(4, 2, &mut rng);
    let loss = |l: &Dense| -> f64 {
        let y = l.forward(x.clone()).unwrap().output;
        0.5 * y.data().iter().zip(target.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    };
    let cache = layer.forward(x.clone()).unwrap();
    let mut d = cache.output.clone();
    for (v, t) in d.data_mut().iter_mut().zip(target.data()) {
        *v -= t;
    }
    let mut grads = Gradients::zeros_like(&layer);
    layer.backward(&cache, &d, &mut grads.0).unwrap();
    let report = grad_check(&mut layer, &grads, 1e-5, loss);
    assert!(report.max_rel_error < 1e-9, "{report:?}");

    grads.0[1].data_mut()[2] *= 2.0;
    let report = grad_check(&mut layer, &grads, 1e-5, loss);
    assert!(report.max_rel_error > 0.3);
    assert_eq!(report.worst, Some(("w".to_string(), 2)));
}

#[test]
fn embedding_lookup_and_accumulation() {
    let id = Matrix::identity(4);
    for k in 0..4 {
        let mut onehot = vec![0.0; 4];
        onehot[k] = 1.0;
        assert_eq!(embedding_lookup(k, &id).unwrap(), onehot);
    }
    assert!(embedding_lookup(4, &id).is_err());

    let emb = Embedding::from_matrix(Matrix::identity(4));
    let ids = [2, 0, 2];
    let d = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 3.0, 0.0, 0.0], vec![0.5, 0.0, 0.0, 1.0]]).unwrap();
    let mut g = vec![Matrix::zeros(4, 4)];
    emb.backward(&ids, &d, &mut g).unwrap();
    assert_eq!(g[0].row(2), &[1.5, 0.0, 0.0, 1.0]);
    assert_eq!(g[0].row(0), &[0.0, 3.0, 0.0, 0.0]);
    assert_eq!(g[0].row(1), &[0.0; 4]);
}

#[test]
fn embedding_gradient_matches_finite_differences() {
    let mut rng = seeded_rng(9, 0);
    let mut emb = Embedding::new(5, 3, &mut rng);
    let ids = [1, 3, 1, 4];
    let w = random_matrix(4, 3, &mut rng);
    let loss = |e: &Embedding| -> f64 { e.forward(&ids).unwrap().data().iter().zip(w.data()).map(|(a, b)| (a * b).sin()).sum() };
    let y = emb.forward(&ids).unwrap();
    let mut d = w.clone();
    for (dv, (a, b)) in d.data_mut().iter_mut().zip(y.data().iter().zip(w.data())) {
        *dv = (a * b).cos() * b;
    }
    let mut grads = Gradients::zeros_like(&emb);
    emb.backward(&ids, &d, &mut grads.0).unwrap();
    let report = grad_check(&mut emb, &grads, 1e-5, loss);
    assert!(report.max_rel_error < 1e-6, "{report:?}");
}
