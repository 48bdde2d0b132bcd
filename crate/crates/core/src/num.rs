//! Scalar abstraction shared by the numeric kernels.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar accepted by the quantizer, the number encodings and
/// the geometric predicates of the evaluator.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + std::fmt::Debug + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; used for constants.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("real convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean distance between two 3-vectors.
pub fn dist3<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut r = a % two_pi;
    if r > T::PI() {
        r = r - two_pi;
    } else if r <= -T::PI() {
        r = r + two_pi;
    }
    r
}
