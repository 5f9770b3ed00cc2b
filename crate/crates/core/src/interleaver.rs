//! The spatially coupled interleaver on M bits in each of L sections.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// π(m, l) = (π_out_{l'}(π_in_l(m)), l') with l' = (l − (π_in_l(m) mod W)) mod L.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScInterleaver {
    pub sections: usize,
    pub w: usize,
    pub m: usize,
    pub seed: u64,
    pub inner: Vec<Vec<usize>>,
    pub outer: Vec<Vec<usize>>,
    inner_inv: Vec<Vec<usize>>,
    outer_inv: Vec<Vec<usize>>,
}

/// A uniform permutation of 0..m from ChaCha8 stream `stream` of `seed`.
fn permutation(m: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut p: Vec<usize> = (0..m).collect();
    p.shuffle(&mut rng);
    p
}

fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &v) in p.iter().enumerate() {
        inv[v] = i;
    }
    inv
}

impl ScInterleaver {
    /// Draws 2L permutations; stream 2l is π_in_l and stream 2l+1 is π_out_l.
    pub fn build(sections: usize, w: usize, m: usize, seed: u64) -> Result<Self> {
        if sections == 0 || w == 0 || m == 0 {
            return Err(Error::Parameter(format!("L, W and M must be positive, got L={sections}, W={w}, M={m}")));
        }
        if w > sections {
            return Err(Error::Parameter(format!("W={w} exceeds L={sections}")));
        }
        let (inner, outer): (Vec<_>, Vec<_>) = (0..sections)
            .into_par_iter()
            .map(|l| (permutation(m, seed, 2 * l as u64), permutation(m, seed, 2 * l as u64 + 1)))
            .unzip();
        let inner_inv = inner.iter().map(|p| invert(p)).collect();
        let outer_inv = outer.iter().map(|p| invert(p)).collect();
        Ok(ScInterleaver { sections, w, m, seed, inner, outer, inner_inv, outer_inv })
    }

    fn check(&self, bit: usize, section: usize) -> Result<()> {
        if bit >= self.m || section >= self.sections {
            return Err(Error::Range(format!("({bit}, {section}) outside {}×{}", self.m, self.sections)));
        }
        Ok(())
    }

    /// (m, l) ↦ (m', l').
    pub fn forward(&self, bit: usize, section: usize) -> Result<(usize, usize)> {
        self.check(bit, section)?;
        Ok(self.forward_unchecked(bit, section))
    }

    fn forward_unchecked(&self, bit: usize, section: usize) -> (usize, usize) {
        let mid = self.inner[section][bit];
        let dest = (section + self.sections - mid % self.w) % self.sections;
        (self.outer[dest][mid], dest)
    }

    /// (m', l') ↦ (m, l).
    pub fn inverse(&self, bit: usize, section: usize) -> Result<(usize, usize)> {
        self.check(bit, section)?;
        let mid = self.outer_inv[section][bit];
        let src = (section + mid % self.w) % self.sections;
        Ok((self.inner_inv[src][mid], src))
    }

    /// Whether π is a bijection on all LM pairs and the inverse undoes it.
    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.m * self.sections];
        for l in 0..self.sections {
            for b in 0..self.m {
                let (b2, l2) = self.forward_unchecked(b, l);
                let slot = &mut seen[l2 * self.m + b2];
                if *slot || self.inverse(b2, l2).ok() != Some((b, l)) {
                    return false;
                }
                *slot = true;
            }
        }
        true
    }

    /// Destination and origin counts by section offset.
    pub fn verify_uniformity(&self) -> Uniformity {
        let (sl, w) = (self.sections, self.w);
        let mut forward = vec![vec![0usize; w]; sl];
        let mut backward = vec![vec![0usize; w]; sl];
        for l in 0..sl {
            for b in 0..self.m {
                let (_, dest) = self.forward_unchecked(b, l);
                let off = (l + sl - dest) % sl;
                forward[l][off] += 1;
                backward[dest][off] += 1;
            }
        }
        let spread = |t: &[Vec<usize>]| {
            let flat = t.iter().flatten();
            flat.clone().max().unwrap_or(&0) - flat.min().unwrap_or(&0)
        };
        let max_deviation = spread(&forward).max(spread(&backward));
        Uniformity { exact: max_deviation == 0, max_deviation, forward, backward }
    }

    /// One "l m l' m'" line per bit.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.sections * self.m * 16);
        let _ = writeln!(s, "# L={} W={} M={} seed={}", self.sections, self.w, self.m, self.seed);
        for l in 0..self.sections {
            for b in 0..self.m {
                let (b2, l2) = self.forward_unchecked(b, l);
                let _ = writeln!(s, "{l} {b} {l2} {b2}");
            }
        }
        s
    }
}

/// `forward[l][w]`: bits sent from section l to (l − w) mod L.
/// `backward[l'][w]`: bits in section l' that come from (l' + w) mod L.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Uniformity {
    pub forward: Vec<Vec<usize>>,
    pub backward: Vec<Vec<usize>>,
    /// Largest minus smallest count over both tables.
    pub max_deviation: usize,
    pub exact: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let il = ScInterleaver::build(5, 1, 7, 3).unwrap();
        for l in 0..5 {
            for b in 0..7 {
                assert_eq!(il.forward(b, l).unwrap().1, l);
            }
        }
        let il = ScInterleaver::build(1, 1, 9, 3).unwrap();
        assert!((0..9).all(|b| il.forward(b, 0).unwrap().1 == 0));
        assert!(il.is_bijection());
    }

    #[test]
    fn divisible_m_is_exactly_uniform() {
        let il = ScInterleaver::build(8, 4, 12, 11).unwrap();
        let u = il.verify_uniformity();
        assert!(u.exact);
        assert!(u.forward.iter().flatten().all(|&c| c == 3));
        assert!(u.backward.iter().flatten().all(|&c| c == 3));
    }

    #[test]
    fn indivisible_m_deviates_by_one() {
        let u = ScInterleaver::build(8, 4, 13, 11).unwrap().verify_uniformity();
        assert!(!u.exact);
        assert_eq!(u.max_deviation, 1);
    }

    #[test]
    fn parameters_are_checked() {
        assert!(matches!(ScInterleaver::build(4, 5, 8, 0), Err(Error::Parameter(_))));
        assert!(matches!(ScInterleaver::build(4, 0, 8, 0), Err(Error::Parameter(_))));
        let il = ScInterleaver::build(4, 2, 8, 0).unwrap();
        assert!(matches!(il.forward(8, 0), Err(Error::Range(_))));
    }

    #[test]
    fn seeds_are_deterministic() {
        assert_eq!(ScInterleaver::build(6, 3, 30, 5).unwrap(), ScInterleaver::build(6, 3, 30, 5).unwrap());
        assert_ne!(ScInterleaver::build(6, 3, 30, 5).unwrap(), ScInterleaver::build(6, 3, 30, 6).unwrap());
    }

    #[test]
    fn text_export_lists_every_bit() {
        let il = ScInterleaver::build(3, 2, 4, 1).unwrap();
        let t = il.to_text();
        assert_eq!(t.lines().count(), 13);
        for line in t.lines().skip(1) {
            let v: Vec<usize> = line.split(' ').map(|x| x.parse().unwrap()).collect();
            assert_eq!(il.forward(v[1], v[0]).unwrap(), (v[3], v[2]));
        }
    }
}
