//! Central finite-difference verification of analytic gradients.

pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Denominator floor for the relative error, so that gradients near zero
/// are compared on an absolute scale instead of amplifying rounding noise.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// `op` maps a flat point to `(value, analytic gradient)`. Each coordinate is
/// probed at `x ± epsilon`; the report carries the largest relative error.
pub fn finite_diff_grad_check<F>(mut op: F, point: &[f64], epsilon: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = op(point);
    assert_eq!(analytic.len(), point.len(), "gradient length must match point");
    let mut x = point.to_vec();
    let mut numeric = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + epsilon;
        let (plus, _) = op(&x);
        x[i] = orig - epsilon;
        let (minus, _) = op(&x);
        x[i] = orig;
        numeric.push((plus - minus) / (2.0 * epsilon));
    }
    let (worst_index, max_rel_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    GradCheckReport {
        max_rel_error,
        worst_index,
        analytic,
        numeric,
    }
}
