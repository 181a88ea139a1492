use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection on `{1, ..., n}` stored by images: `at(p)` is the value at
/// position `p`, both 1-based.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Permutation {
    images: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PermConstraint {
    Free,
    /// Positions `H+1..=n` map to themselves.
    TailFixed(usize),
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (1..=n as u32).collect(),
        }
    }

    pub fn from_images(images: Vec<u32>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n + 1];
        for &v in &images {
            let v = v as usize;
            if v == 0 || v > n || seen[v] {
                return Err(Error::InvalidPermutation(format!("{images:?} is not a permutation of 1..={n}")));
            }
            seen[v] = true;
        }
        Ok(Permutation { images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Image of 1-based position `pos`.
    pub fn at(&self, pos: usize) -> u32 {
        self.images[pos - 1]
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    /// Position holding `value` (1-based).
    pub fn position_of(&self, value: u32) -> Option<usize> {
        self.images.iter().position(|&v| v == value).map(|p| p + 1)
    }

    pub fn is_tail_fixed(&self, h: usize) -> bool {
        self.images
            .iter()
            .enumerate()
            .skip(h)
            .all(|(p, &v)| v as usize == p + 1)
    }

    pub fn satisfies(&self, constraint: PermConstraint) -> bool {
        match constraint {
            PermConstraint::Free => true,
            PermConstraint::TailFixed(h) => self.is_tail_fixed(h),
        }
    }
}

impl TryFrom<Vec<u32>> for Permutation {
    type Error = Error;

    fn try_from(images: Vec<u32>) -> Result<Self> {
        Permutation::from_images(images)
    }
}

impl From<Permutation> for Vec<u32> {
    fn from(p: Permutation) -> Vec<u32> {
        p.images
    }
}

/// Uniform draw from the permutations of `[n]` admitted by `constraint`.
pub fn sample_permutation<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    constraint: PermConstraint,
) -> Result<Permutation> {
    let mut p = Permutation::identity(n);
    let free = match constraint {
        PermConstraint::Free => n,
        PermConstraint::TailFixed(h) if h <= n => h,
        PermConstraint::TailFixed(h) => {
            return Err(Error::InvalidPermutation(format!("tail parameter H = {h} exceeds n = {n}")))
        }
    };
    p.images[..free].shuffle(rng);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn forced_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let p = sample_permutation(2, &mut rng, PermConstraint::TailFixed(1)).unwrap();
            assert_eq!(p, Permutation::identity(2));
        }
    }

    #[test]
    fn tail_of_nine_with_h_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let p = sample_permutation(9, &mut rng, PermConstraint::TailFixed(5)).unwrap();
            assert_eq!(&p.images()[5..], &[6, 7, 8, 9]);
            let mut head = p.images()[..5].to_vec();
            head.sort();
            assert_eq!(head, vec![1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn rejects_oversized_tail_and_bad_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_permutation(3, &mut rng, PermConstraint::TailFixed(4)).is_err());
        assert!(Permutation::from_images(vec![1, 1, 2]).is_err());
        assert!(Permutation::from_images(vec![0, 1]).is_err());
        assert!(Permutation::from_images(vec![2, 3]).is_err());
        assert!(serde_json::from_str::<Permutation>("[2,2]").is_err());
        assert_eq!(serde_json::from_str::<Permutation>("[2,1]").unwrap().at(1), 2);
    }

    /// Chi-square against the exact uniform law over S_5 (119 degrees of
    /// freedom). The 5-sigma band of that statistic is 119 +- 5 * sqrt(238).
    #[test]
    fn free_sampling_is_uniform_over_s5() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let draws = 10_000usize;
        let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
        for _ in 0..draws {
            let p = sample_permutation(5, &mut rng, PermConstraint::Free).unwrap();
            *counts.entry(p.images().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 120);
        let expected = draws as f64 / 120.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let bound = 119.0 + 5.0 * (2.0f64 * 119.0).sqrt();
        assert!(chi2 < bound, "chi2 = {chi2}");
        // every single cell within 5 sigma of its binomial mean
        let sigma = (draws as f64 * (1.0 / 120.0) * (119.0 / 120.0)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - expected).abs() < 5.0 * sigma);
        }
    }

    proptest! {
        #[test]
        fn tail_fixed_never_moves_the_tail(n in 1usize..40, h_frac in 0.0f64..=1.0, seed in any::<u64>()) {
            let h = ((n as f64) * h_frac).floor() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sample_permutation(n, &mut rng, PermConstraint::TailFixed(h)).unwrap();
            prop_assert!(p.is_tail_fixed(h));
            prop_assert!(Permutation::from_images(p.images().to_vec()).is_ok());
            for pos in 1..=h {
                prop_assert!(p.at(pos) as usize <= h);
            }
        }
    }
}
