use super::Tensor1D;
use crate::Real;

pub fn tanh_forward<T: Real>(input: &Tensor1D<T>) -> Tensor1D<T> {
    input.map(|v| v.tanh())
}

/// Uses the forward output: `d tanh(x) = 1 - tanh(x)^2`.
pub fn tanh_backward<T: Real>(output: &Tensor1D<T>, upstream: &Tensor1D<T>) -> Tensor1D<T> {
    debug_assert_eq!(output.shape(), upstream.shape());
    let mut grad = upstream.clone();
    for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
        *g *= T::one() - y * y;
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_and_saturating() {
        let x = Tensor1D::<f64>::from_signal(&[0.0, 1e6, -1e6]).unwrap();
        let y = tanh_forward(&x);
        assert_eq!(y.get(0, 0), 0.0);
        assert!((y.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((y.get(0, 2) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_slope_at_origin() {
        let y = tanh_forward(&Tensor1D::<f64>::from_signal(&[0.0]).unwrap());
        let g = tanh_backward(&y, &Tensor1D::from_signal(&[1.0]).unwrap());
        assert_eq!(g.get(0, 0), 1.0);
    }
}
