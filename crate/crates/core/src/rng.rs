//! Seeded, splittable randomness.
//!
//! Every stochastic routine takes a single `u64` seed. Independent streams are
//! obtained from ChaCha8 by fixing the key from `(seed, purpose)` and selecting
//! the ChaCha stream by trial index, so trial `t` of a run draws the same
//! numbers regardless of how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Rng = ChaCha8Rng;

/// Purpose labels; each one keys a disjoint family of streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Graph = 1,
    Carve = 2,
    PrivateLeader = 3,
    PublicStable = 4,
    LocalTransitive = 5,
    Coupling = 6,
    Certify = 7,
    Sweep = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for stream `index` of `purpose` under `seed`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    let key = splitmix64(seed ^ splitmix64(purpose as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Runs `trials` independent trials in parallel, trial `t` drawing from
/// stream `t`. Results come back in trial order.
pub fn run_trials<T, F>(trials: usize, seed: u64, purpose: Purpose, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Rng) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| f(t, &mut stream(seed, purpose, t as u64)))
        .collect()
}

/// Unit exponential by inversion, `-ln(1 - u)` with `u` uniform on `[0, 1)`.
pub fn unit_exponential<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln()
}

/// Fair `±1` coin.
pub fn coin<R: rand::Rng + ?Sized>(rng: &mut R) -> i8 {
    if rng.gen::<bool>() {
        1
    } else {
        -1
    }
}
