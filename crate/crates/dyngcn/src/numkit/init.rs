//! Glorot-uniform parameter initialization with seeded, reproducible draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Glorot uniform bound for a rows x cols parameter.
pub fn glorot_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

/// Draws a rows x cols matrix uniformly from [-b, b] with
/// b = sqrt(6 / (rows + cols)), using a ChaCha20 stream keyed by `seed`.
/// Same seed and shape always produce the same matrix.
pub fn glorot_init(rows: usize, cols: usize, seed: u64) -> Result<Matrix> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    glorot_init_from_rng(rows, cols, &mut rng)
}

/// Same draw, but from a caller-held RNG so several parameters can share
/// one stream in a fixed order.
pub fn glorot_init_from_rng<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension {
            op: "glorot_init".into(),
            lhs: (rows, cols),
            rhs: (rows, cols),
        });
    }
    let b = glorot_bound(rows, cols);
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.gen_range(-b..=b);
    }
    Ok(m)
}

/// Stable per-name sub-seed so each named parameter gets its own stream
/// regardless of initialization order.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
