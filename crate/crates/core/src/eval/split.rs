use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MsfError, Result};

/// Disjoint seen and unseen class-id sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub name: String,
    seen: BTreeSet<u32>,
    unseen: BTreeSet<u32>,
}

impl SplitSpec {
    pub fn new(
        name: impl Into<String>,
        seen: impl IntoIterator<Item = u32>,
        unseen: impl IntoIterator<Item = u32>,
    ) -> Result<Self> {
        let seen: BTreeSet<u32> = seen.into_iter().collect();
        let unseen: BTreeSet<u32> = unseen.into_iter().collect();
        if seen.is_empty() || unseen.is_empty() {
            return Err(MsfError::Config("split needs at least one seen and one unseen class".into()));
        }
        if let Some(c) = seen.intersection(&unseen).next() {
            return Err(MsfError::Config(format!("class {c} is both seen and unseen")));
        }
        let split = SplitSpec {
            name: name.into(),
            seen,
            unseen,
        };
        split.check_named_sizes()?;
        Ok(split)
    }

    /// Seeded uniform choice of `n_unseen` classes out of `class_ids`.
    pub fn random(name: impl Into<String>, class_ids: &[u32], n_unseen: usize, seed: u64) -> Result<Self> {
        let mut ids = class_ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if n_unseen == 0 || n_unseen >= ids.len() {
            return Err(MsfError::Config(format!(
                "cannot hold out {n_unseen} of {} classes",
                ids.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked: BTreeSet<usize> = sample(&mut rng, ids.len(), n_unseen).into_iter().collect();
        let (unseen, seen): (Vec<_>, Vec<_>) = ids
            .iter()
            .enumerate()
            .partition(|(i, _)| picked.contains(i));
        SplitSpec::new(
            name,
            seen.into_iter().map(|(_, &c)| c),
            unseen.into_iter().map(|(_, &c)| c),
        )
    }

    /// Names shaped like `ntu60-55-5` fix the seen and unseen counts.
    fn check_named_sizes(&self) -> Result<()> {
        let parts: Vec<&str> = self.name.rsplitn(3, '-').collect();
        if let [u, s, _] = parts[..] {
            if let (Ok(s), Ok(u)) = (s.parse::<usize>(), u.parse::<usize>()) {
                if s != self.seen.len() || u != self.unseen.len() {
                    return Err(MsfError::Config(format!(
                        "split `{}` expects {s}/{u} classes, manifest has {}/{}",
                        self.name,
                        self.seen.len(),
                        self.unseen.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that the split covers exactly `all_ids`.
    pub fn check_covers(&self, all_ids: &[u32]) -> Result<()> {
        let all: BTreeSet<u32> = all_ids.iter().copied().collect();
        let union: BTreeSet<u32> = self.seen.union(&self.unseen).copied().collect();
        if all != union {
            let missing: Vec<_> = all.difference(&union).collect();
            let extra: Vec<_> = union.difference(&all).collect();
            return Err(MsfError::Config(format!(
                "split does not match dataset classes (unassigned: {missing:?}, unknown: {extra:?})"
            )));
        }
        Ok(())
    }

    pub fn is_seen(&self, c: u32) -> bool {
        self.seen.contains(&c)
    }

    pub fn is_unseen(&self, c: u32) -> bool {
        self.unseen.contains(&c)
    }

    /// Seen class ids, ascending.
    pub fn seen_ids(&self) -> Vec<u32> {
        self.seen.iter().copied().collect()
    }

    /// Unseen class ids, ascending.
    pub fn unseen_ids(&self) -> Vec<u32> {
        self.unseen.iter().copied().collect()
    }

    pub fn n_seen(&self) -> usize {
        self.seen.len()
    }

    pub fn n_unseen(&self) -> usize {
        self.unseen.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_overlap_and_empty() {
        assert!(SplitSpec::new("x", [1, 2], [2, 3]).is_err());
        assert!(SplitSpec::new("x", [1, 2], []).is_err());
        assert!(SplitSpec::new("x", [1, 2], [3]).is_ok());
    }

    #[test]
    fn named_sizes_are_enforced() {
        assert!(SplitSpec::new("ntu60-55-5", 0..55, 55..60).is_ok());
        assert!(SplitSpec::new("ntu60-55-5", 0..54, 54..60).is_err());
        assert!(SplitSpec::new("ntu120-110-10", 0..110, 110..120).is_ok());
    }

    #[test]
    fn random_split_is_seeded() {
        let ids: Vec<u32> = (0..20).collect();
        let a = SplitSpec::random("synth-16-4", &ids, 4, 7).unwrap();
        let b = SplitSpec::random("synth-16-4", &ids, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_unseen(), 4);
        a.check_covers(&ids).unwrap();
        assert!(a.check_covers(&ids[1..]).is_err());
        assert!(SplitSpec::random("x", &ids, 20, 0).is_err());
    }
}
