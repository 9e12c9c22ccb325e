use super::param::{Gradients, Parameterized};

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    /// Analytic and finite-difference values at the worst entry.
    pub worst_values: (f64, f64),
    pub entries: usize,
}

/// Compares `analytic` against central finite differences of `loss` for
/// every parameter entry, using `|a - n| / max(|a|, |n|, 1e-8)`.
///
/// Parameters are perturbed in place and restored exactly.
pub fn grad_check<M, F>(model: &mut M, analytic: &Gradients, epsilon: f64, loss: F) -> GradCheckReport
where
    M: Parameterized + ?Sized,
    F: Fn(&M) -> f64,
{
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.len(), analytic.0.len(), "gradient layout does not match model");
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, worst_values: (0.0, 0.0), entries: 0 };
    for (ti, name) in names.iter().enumerate() {
        let len = analytic.0[ti].len();
        for k in 0..len {
            let original = model.params_mut()[ti].value.data()[k];
            model.params_mut()[ti].value.data_mut()[k] = original + epsilon;
            let plus = loss(model);
            model.params_mut()[ti].value.data_mut()[k] = original - epsilon;
            let minus = loss(model);
            model.params_mut()[ti].value.data_mut()[k] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.0[ti].data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.entries += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), k));
                report.worst_values = (a, numeric);
            }
        }
    }
    report
}
