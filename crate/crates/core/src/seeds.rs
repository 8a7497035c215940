//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from user-supplied `u64` seeds through
//! the splitmix64 finalizer, so independent streams (edge coins vs. rotation
//! draws, or one stream per experiment trial) can be derived by hashing the
//! parent seed with a role tag instead of sharing one generator.

/// splitmix64 finalizer step.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A child seed for the stream named by `tag`.
pub fn stream_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag.wrapping_mul(0xa076_1d64_78bd_642f)))
}

/// The seed for one experiment trial, split by grid cell and trial index.
pub fn trial_seed(base: u64, alpha_index: usize, beta_index: usize, trial: usize) -> u64 {
    let mut s = splitmix64(base);
    for part in [alpha_index as u64, beta_index as u64, trial as u64] {
        s = splitmix64(s ^ splitmix64(part.wrapping_add(0x517c_c1b7_2722_0a95)));
    }
    s
}
