use crate::scalar::Scalar;

pub fn tanh_forward<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|v| v.tanh()).collect()
}

pub fn tanh_forward_in_place<T: Scalar>(x: &mut [T]) {
    for v in x {
        *v = v.tanh();
    }
}

/// Backward through tanh given its *output* `y`: `g * (1 - y^2)`.
pub fn tanh_backward<T: Scalar>(y: &[T], out_grad: &[T]) -> Vec<T> {
    y.iter()
        .zip(out_grad)
        .map(|(&y, &g)| g * (T::one() - y * y))
        .collect()
}
