use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams. The Brownian and default-clock streams never
/// share a key, which is how the simulation realises independence of the
/// default clock from the asset noise.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Brownian = 1,
    DefaultClock = 2,
    Bridge = 3,
}

/// One generator per (seed, stream, path). Path `i` draws the same numbers
/// whatever the total path count or evaluation order.
pub(crate) fn path_rng(seed: u64, stream: Stream, path: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path as u64);
    rng
}
