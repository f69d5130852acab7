use super::{Real, Tensor};
use crate::rng::SplitMix64;

/// `sqrt(2 / fan_in)` where fan-in is the product of all axes but the first
/// (`C_in·k·k` for conv weights, `N` for `[M, N]` fully connected weights).
pub fn he_std(shape: &[usize]) -> f64 {
    let fan_in: usize = shape.iter().skip(1).product();
    (2.0 / fan_in.max(1) as f64).sqrt()
}

/// Zero-mean Gaussian with He-corrected variance, fully determined by `seed`.
pub fn he_init<T: Real>(shape: &[usize], seed: u64) -> Tensor<T> {
    let std = he_std(shape);
    let mut rng = SplitMix64::new(seed);
    Tensor::from_fn(shape.to_vec(), |_| T::from_f64(std * rng.normal()))
}
