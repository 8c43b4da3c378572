use serde::de::DeserializeOwned;
use serde::Serialize;
use tcs_bayesopt::Real;

/// Floating point type the model is generic over (`f32` or `f64`).
pub trait Scalar: Real + Default + Serialize + DeserializeOwned {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Total order on finite floats, for heaps and sorts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Ordered<T>(pub T);

impl<T: PartialOrd> Eq for Ordered<T> {}

impl<T: PartialOrd> PartialOrd for Ordered<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for Ordered<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .partial_cmp(&other.0)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}
