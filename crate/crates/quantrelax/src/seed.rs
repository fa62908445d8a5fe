//! Seed derivation for reproducible sweeps.
//!
//! A single `u64` master seed drives every run; per-purpose seeds are derived
//! with splitmix64 so that runs in a sweep are reproducible and mutually
//! independent regardless of execution order.

/// One step of the splitmix64 output function.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for logical stream `stream` from `master`.
///
/// `derive_seed(m, a) == derive_seed(m, b)` only when `a == b`, so distinct
/// purposes (shuffling, initialization, data generation) get independent
/// streams.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}
