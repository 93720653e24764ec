use crate::scalar::Scalar;

/// Logistic function, evaluated without overflow for either sign of `z`.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Binary cross-entropy on a logit: `max(z, 0) − z·y + log(1 + e^{−|z|})`.
pub fn bce_with_logit<T: Scalar>(z: T, y: T) -> T {
    z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p()
}
