//! Exemplar selection for few-shot prompts.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::ShotSource;
use crate::types::{Dataset, Example};

/// Exemplars to place in a prompt, in display order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotContext {
    pub shots: Vec<Example>,
    pub source: ShotSource,
}

impl ShotContext {
    pub fn none() -> Self {
        Self {
            shots: Vec::new(),
            source: ShotSource::None,
        }
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.shots.iter().map(|e| e.id.as_str()).collect()
    }
}

/// Draws `n` distinct training examples uniformly without replacement.
///
/// The draw is a pure function of `(train, n, seed, exclude_id)`; shots keep
/// their sampled order.
pub fn sample_shots(
    train: &Dataset,
    n: usize,
    seed: u64,
    exclude_id: Option<&str>,
) -> Result<ShotContext> {
    let pool: Vec<&Example> = train
        .examples
        .iter()
        .filter(|e| Some(e.id.as_str()) != exclude_id)
        .collect();
    if n > pool.len() {
        return Err(Error::InsufficientExamples {
            requested: n,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shots = rand::seq::index::sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    Ok(ShotContext {
        shots,
        source: ShotSource::Random,
    })
}

/// Looks up a fixed exemplar set, keeping the given order.
pub fn select_fixed_shots<S: AsRef<str>>(train: &Dataset, ids: &[S]) -> Result<ShotContext> {
    let mut seen = HashSet::new();
    let index = train.index();
    let mut shots = Vec::with_capacity(ids.len());
    for id in ids {
        let id = id.as_ref();
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let ex = index.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
        shots.push((*ex).clone());
    }
    Ok(ShotContext {
        shots,
        source: ShotSource::Fixed,
    })
}

/// Per-example seed for random shot draws: mixes the run seed with a stable
/// FNV-1a hash of the example id, then finalizes with splitmix64.
pub fn derive_seed(seed: u64, example_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in example_id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Split;

    fn train(n: usize) -> Dataset {
        Dataset::new(
            "t",
            Split::Train,
            (0..n).map(|i| Example::new(format!("e{i:03}"), format!("text {i}"), "a")).collect(),
        )
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let t = train(10);
        let a = sample_shots(&t, 3, 7, None).unwrap();
        let b = sample_shots(&t, 3, 7, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn boundary_with_exclusion_is_insufficient() {
        let t = train(3);
        let err = sample_shots(&t, 3, 0, Some("e001")).unwrap_err();
        assert!(matches!(err, Error::InsufficientExamples { requested: 3, available: 2 }));
        assert!(sample_shots(&t, 3, 0, None).is_ok());
    }

    #[test]
    fn distinct_and_excluding_over_many_seeds() {
        let t = train(100);
        for seed in 0..1000u64 {
            let ctx = sample_shots(&t, 5, seed, Some("e042")).unwrap();
            let ids: HashSet<_> = ctx.ids().into_iter().collect();
            assert_eq!(ids.len(), 5);
            assert!(!ids.contains("e042"));
        }
    }

    #[test]
    fn fixed_shots_lookup_and_errors() {
        let t = train(5);
        let ctx = select_fixed_shots(&t, &["e003", "e000", "e004"]).unwrap();
        assert_eq!(ctx.ids(), vec!["e003", "e000", "e004"]);
        assert!(matches!(
            select_fixed_shots(&t, &["e000", "e000", "e001"]),
            Err(Error::DuplicateId(_))
        ));
        assert!(matches!(
            select_fixed_shots(&t, &["e000", "e001", "zzz"]),
            Err(Error::UnknownId(id)) if id == "zzz"
        ));
    }

    #[test]
    fn derived_seeds_differ_per_example() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_eq!(derive_seed(9, "x"), derive_seed(9, "x"));
    }
}
