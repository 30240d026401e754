//! Central finite differences, used to cross-check the tape.

use crate::tensor::Tensor;

/// Numerical gradient of `f` at `inputs` with central differences of step `eps`.
pub fn central_difference<F>(mut f: F, inputs: &[Tensor], eps: f64) -> Vec<Tensor>
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[i].shape());
        for j in 0..inputs[i].len() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + eps;
            let up = f(&work);
            work[i].data_mut()[j] = orig - eps;
            let down = f(&work);
            work[i].data_mut()[j] = orig;
            g.data_mut()[j] = (up - down) / (2.0 * eps);
        }
        out.push(g);
    }
    out
}

/// Largest `|a - n| / max(|a|, |n|, floor)` over all elements.
///
/// The floor keeps near-zero gradients from producing meaningless ratios.
pub fn max_relative_error(analytic: &[Tensor], numeric: &[Tensor], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient count mismatch");
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| {
            assert_eq!(a.shape(), n.shape(), "gradient shape mismatch");
            a.data().iter().zip(n.data()).map(move |(&x, &y)| {
                (x - y).abs() / x.abs().max(y.abs()).max(floor)
            })
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let x = Tensor::from_vec(vec![1.5, -2.0]);
        let g = central_difference(|t| t[0].data().iter().map(|v| v * v).sum(), &[x], 1e-5);
        assert!((g[0].data()[0] - 3.0).abs() < 1e-8);
        assert!((g[0].data()[1] + 4.0).abs() < 1e-8);
    }
}
