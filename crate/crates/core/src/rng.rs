//! Seeded random streams.
//!
//! Every random consumer draws from a ChaCha stream identified by the master
//! seed, a purpose tag and an index (chunk or chain number). Work is split
//! into fixed-size chunks, so results depend on the seed alone and not on
//! how many worker threads process the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per parallel work unit.
pub const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    Plain = 1,
    PhiIntegral = 2,
    Chain = 3,
    Psi = 4,
    Tables = 5,
    Checks = 6,
}

pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | (index & 0xffff_ffff));
    rng
}

/// Runs `work(rng, len)` on consecutive chunks covering `total` draws and
/// returns the results in chunk order.
pub fn chunked<T, F>(total: usize, seed: u64, purpose: Purpose, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(total - c * CHUNK);
            work(&mut substream(seed, purpose, c as u64), len)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = substream(1, Purpose::Plain, 0).random();
        let b: u64 = substream(1, Purpose::Plain, 1).random();
        let c: u64 = substream(1, Purpose::Chain, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, substream(1, Purpose::Plain, 0).random::<u64>());
    }

    #[test]
    fn chunking_covers_total() {
        let lens = chunked(2 * CHUNK + 5, 0, Purpose::Plain, |_, len| len);
        assert_eq!(lens, vec![CHUNK, CHUNK, 5]);
        assert!(chunked(0, 0, Purpose::Plain, |_, len| len).is_empty());
    }

    #[test]
    fn independent_of_pool_size() {
        let run = || chunked(3 * CHUNK, 7, Purpose::Psi, |rng, len| (0..len).map(|_| rng.random::<u32>() as u64).sum::<u64>());
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
        assert_eq!(one, three);
    }
}
