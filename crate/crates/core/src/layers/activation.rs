use crate::scalar::Scalar;
use crate::tensor::Tensor3;

pub fn relu<T: Scalar>(v: &Tensor3<T>) -> Tensor3<T> {
    v.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Derivative at zero is taken as zero.
pub fn relu_backward<T: Scalar>(input: &Tensor3<T>, grad: &Tensor3<T>) -> Tensor3<T> {
    zip(input, grad, |x, g| if x > T::zero() { g } else { T::zero() })
}

pub fn leaky_relu<T: Scalar>(v: &Tensor3<T>, slope: T) -> Tensor3<T> {
    v.map(|x| if x > T::zero() { x } else { slope * x })
}

pub fn leaky_relu_backward<T: Scalar>(input: &Tensor3<T>, grad: &Tensor3<T>, slope: T) -> Tensor3<T> {
    zip(input, grad, |x, g| if x > T::zero() { g } else { slope * g })
}

pub fn tanh<T: Scalar>(v: &Tensor3<T>) -> Tensor3<T> {
    v.map(T::tanh)
}

pub fn tanh_backward<T: Scalar>(input: &Tensor3<T>, grad: &Tensor3<T>) -> Tensor3<T> {
    zip(input, grad, |x, g| {
        let t = x.tanh();
        g * (T::one() - t * t)
    })
}

fn zip<T: Scalar>(a: &Tensor3<T>, b: &Tensor3<T>, f: impl Fn(T, T) -> T) -> Tensor3<T> {
    let (c, h, w) = a.shape();
    let data = a.data().iter().zip(b.data()).map(|(&x, &g)| f(x, g)).collect();
    Tensor3::from_vec(c, h, w, data).expect("matching shapes")
}
