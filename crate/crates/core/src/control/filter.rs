use crate::network::{ControlBounds, ControlVector, CONTROL_DIM};
use crate::scalar::Scalar;

/// First-order low-pass `α·u* + (1−α)·prev` per dimension, clamped to the
/// control box.
pub fn lowpass<T: Scalar>(
    prev: &ControlVector<T>,
    target: &ControlVector<T>,
    alpha: T,
    bounds: &ControlBounds<T>,
) -> ControlVector<T> {
    let mut out = *target;
    for i in 0..CONTROL_DIM {
        out.values[i] = alpha * target.values[i] + (T::one() - alpha) * prev.values[i];
    }
    bounds.clamp(&out)
}
