//! Order-preserving data-parallel helpers.
//!
//! With the `parallel` feature these fan work out over the rayon pool;
//! without it they run sequentially. Results are always collected in index
//! order, so floating-point output is identical in both builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(0..n)` and returns the results in index order.
#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Maps over a slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Whether this build fans work out across threads.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Mixes a base seed with a sequence of tags into an independent seed.
///
/// Used to give sweep cells, CV folds and restarts their own RNG streams
/// that do not depend on scheduling order.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0x5851_f42d_4c95_7f2d);
    for &t in tags {
        h = splitmix64(h ^ t.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit tag for a string (FNV-1a).
pub fn tag(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
