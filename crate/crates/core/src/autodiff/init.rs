use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;

/// Glorot/Xavier uniform initialization: entries in `[-L, L]`, `L = sqrt(6 / (rows + cols))`.
pub fn xavier_init(rows: usize, cols: usize, seed: u64) -> Tensor {
    assert!(rows >= 1 && cols >= 1, "contract violation: xavier_init({rows}, {cols})");
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect();
    Tensor::new(rows, cols, data)
}

/// Mixes a base seed with a stream label (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
