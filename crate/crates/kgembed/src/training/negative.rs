//! Negative sampling by triple corruption.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EntityId, Triple};

/// Which side of a triple to corrupt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptSide {
    Head,
    Tail,
    /// Pick head or tail uniformly at random per call.
    Uniform,
}

/// Replace the head or tail of `triple` with an entity sampled uniformly
/// from the `num_entities` vocabulary, resampling until it differs from the
/// original entity. The relation is never changed.
pub fn corrupt(triple: &Triple, num_entities: usize, side: CorruptSide, rng: &mut impl Rng) -> Result<Triple> {
    if num_entities < 2 {
        return Err(Error::InvalidArgument("corruption needs at least 2 entities".into()));
    }
    let corrupt_head = match side {
        CorruptSide::Head => true,
        CorruptSide::Tail => false,
        CorruptSide::Uniform => rng.gen_bool(0.5),
    };
    let original = if corrupt_head { triple.head } else { triple.tail };
    let replacement = loop {
        let candidate = EntityId(rng.gen_range(0..num_entities as u32));
        if candidate != original {
            break candidate;
        }
    };
    Ok(if corrupt_head {
        Triple::new(replacement, triple.relation, triple.tail)
    } else {
        Triple::new(triple.head, triple.relation, replacement)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RelationId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn triple() -> Triple {
        Triple::new(EntityId(0), RelationId(0), EntityId(1))
    }

    #[test]
    fn relation_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let c = corrupt(&triple(), 5, CorruptSide::Uniform, &mut rng).unwrap();
            assert_eq!(c.relation, RelationId(0));
        }
    }

    #[test]
    fn two_entity_graph_forces_the_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = corrupt(&triple(), 2, CorruptSide::Head, &mut rng).unwrap();
        assert_eq!(c, Triple::new(EntityId(1), RelationId(0), EntityId(1)));
    }

    #[test]
    fn exactly_one_side_changes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = corrupt(&triple(), 6, CorruptSide::Uniform, &mut rng).unwrap();
            let head_changed = c.head != EntityId(0);
            let tail_changed = c.tail != EntityId(1);
            assert!(head_changed ^ tail_changed);
        }
    }

    #[test]
    fn replacements_are_uniform_by_chi_squared() {
        // corrupt the tail of (0, r, 1) in a 5-entity graph: replacements are
        // drawn from {0, 2, 3, 4}
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples = 10_000usize;
        let mut counts = [0u64; 5];
        for _ in 0..samples {
            let c = corrupt(&triple(), 5, CorruptSide::Tail, &mut rng).unwrap();
            counts[c.tail.0 as usize] += 1;
        }
        assert_eq!(counts[1], 0);
        let expected = samples as f64 / 4.0;
        let chi2: f64 = [0usize, 2, 3, 4]
            .iter()
            .map(|&i| {
                let diff = counts[i] as f64 - expected;
                diff * diff / expected
            })
            .sum();
        let dist = ChiSquared::new(3.0).unwrap();
        let p = 1.0 - dist.cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2:.3} gives p {p:.5}");
    }

    #[test]
    fn too_few_entities_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(corrupt(&triple(), 1, CorruptSide::Head, &mut rng).is_err());
    }
}
