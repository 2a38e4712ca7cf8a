//! Seeded uniform sampling of candidate indices and elite/random sketch
//! composition.
//!
//! Randomness is addressed by [`StreamKey`]: a 64-bit key derived from a
//! master seed through a chain of tags (trial, step, member, ...). Each key
//! seeds its own ChaCha8 generator, so a draw depends only on its key and
//! never on evaluation order or thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Address of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey(u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        StreamKey(splitmix64(master_seed))
    }

    /// Child stream for `tag`. Distinct tags give unrelated keys.
    pub fn derive(self, tag: u64) -> Self {
        StreamKey(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Sizes of a sketch: `n_s = n_r + n_e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub n_s: usize,
    pub n_e: usize,
    pub n_r: usize,
}

impl SketchConfig {
    /// Validates `n_e <= n_s <= n`.
    pub fn new(n_s: usize, n_e: usize, n: usize) -> Result<Self> {
        if n_s > n {
            return Err(Error::InvalidParameter(format!("sketch size n_s={n_s} exceeds candidate count n={n}")));
        }
        if n_e > n_s {
            return Err(Error::InvalidParameter(format!("elite count n_e={n_e} exceeds sketch size n_s={n_s}")));
        }
        Ok(Self { n_s, n_e, n_r: n_s - n_e })
    }
}

/// Uniform size-`count` subset of `population`, sorted ascending.
///
/// Partial Fisher-Yates over a copy of the population.
pub fn sample_without_replacement(population: &[usize], count: usize, key: StreamKey) -> Result<Vec<usize>> {
    if count > population.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {count} items from a population of {}",
            population.len()
        )));
    }
    let mut pool = population.to_vec();
    let mut rng = key.rng();
    for i in 0..count {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool.sort_unstable();
    Ok(pool)
}

/// `elites` plus `cfg.n_r` indices drawn uniformly from `all \ elites`,
/// sorted ascending.
pub fn compose_sketch(all: &[usize], elites: &[usize], cfg: SketchConfig, key: StreamKey) -> Result<Vec<usize>> {
    if elites.len() != cfg.n_e {
        return Err(Error::InvalidParameter(format!(
            "elite set has {} members, configuration expects {}",
            elites.len(),
            cfg.n_e
        )));
    }
    let max = all.iter().copied().max().map_or(0, |m| m + 1);
    let mut in_all = vec![false; max];
    for &i in all {
        in_all[i] = true;
    }
    let mut is_elite = vec![false; max];
    for &e in elites {
        if e >= max || !in_all[e] {
            return Err(Error::InvalidParameter(format!("elite index {e} is not a candidate")));
        }
        is_elite[e] = true;
    }
    let rest: Vec<usize> = all.iter().copied().filter(|&i| !is_elite[i]).collect();
    let mut sketch = sample_without_replacement(&rest, cfg.n_r, key)?;
    sketch.extend_from_slice(elites);
    sketch.sort_unstable();
    Ok(sketch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_counts() {
        let pop: Vec<usize> = (0..10).collect();
        let k = StreamKey::new(1);
        assert_eq!(sample_without_replacement(&pop, 10, k).unwrap(), pop);
        assert!(sample_without_replacement(&pop, 0, k).unwrap().is_empty());
        assert!(sample_without_replacement(&pop, 11, k).is_err());
    }

    #[test]
    fn same_key_same_draw() {
        let pop: Vec<usize> = (0..1000).collect();
        let k = StreamKey::new(9).derive(3).derive(4);
        assert_eq!(
            sample_without_replacement(&pop, 50, k).unwrap(),
            sample_without_replacement(&pop, 50, k).unwrap()
        );
        assert_ne!(
            sample_without_replacement(&pop, 50, k).unwrap(),
            sample_without_replacement(&pop, 50, k.derive(0)).unwrap()
        );
    }

    #[test]
    fn derived_keys_differ() {
        let base = StreamKey::new(0);
        let keys: std::collections::HashSet<u64> = (0..1000).map(|t| base.derive(t).value()).collect();
        assert_eq!(keys.len(), 1000);
        assert_ne!(base.derive(1).derive(2), base.derive(2).derive(1));
    }

    #[test]
    fn sketch_config_validation() {
        assert_eq!(SketchConfig::new(100, 10, 1000).unwrap().n_r, 90);
        assert!(SketchConfig::new(100, 101, 1000).is_err());
        assert!(SketchConfig::new(1001, 0, 1000).is_err());
    }

    #[test]
    fn compose_extremes() {
        let all: Vec<usize> = (0..20).collect();
        let elites = vec![3, 7, 11];
        let cfg = SketchConfig::new(3, 3, 20).unwrap();
        assert_eq!(compose_sketch(&all, &elites, cfg, StreamKey::new(5)).unwrap(), elites);

        let cfg = SketchConfig::new(6, 0, 20).unwrap();
        let key = StreamKey::new(5);
        assert_eq!(
            compose_sketch(&all, &[], cfg, key).unwrap(),
            sample_without_replacement(&all, 6, key).unwrap()
        );

        let cfg = SketchConfig::new(4, 1, 20).unwrap();
        assert!(compose_sketch(&all, &[25], cfg, key).is_err());
        assert!(compose_sketch(&all, &[1, 2], cfg, key).is_err());
    }
}
