//! Incremental Gaussian elimination over GF(2) with block-valued right-hand
//! sides.
//!
//! Rows are dense bitsets. Each stored row owns a distinct pivot, its highest
//! set bit; inserting reduces the new row from the top down and either stores
//! it under its leading bit or discards it as dependent.

use crate::block::Block;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct Row {
    bits: Vec<u64>,
    value: Block,
}

#[derive(Clone, Debug)]
pub struct Gf2System {
    cols: usize,
    words: usize,
    block_bytes: usize,
    pivots: Vec<Option<Row>>,
    rank: usize,
    /// Dependent rows whose right-hand side did not reduce to zero.
    inconsistent: usize,
}

fn highest_bit(bits: &[u64]) -> Option<usize> {
    bits.iter()
        .enumerate()
        .rev()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
}

impl Gf2System {
    pub fn new(cols: usize, block_bytes: usize) -> Self {
        Gf2System {
            cols,
            words: cols.div_ceil(64),
            block_bytes,
            pivots: vec![None; cols],
            rank: 0,
            inconsistent: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn inconsistent_rows(&self) -> usize {
        self.inconsistent
    }

    fn dense(&self, idx: &[usize]) -> Result<Vec<u64>> {
        let mut bits = vec![0u64; self.words];
        for &c in idx {
            if c >= self.cols {
                return Err(Error::IndexOutOfRange(format!("column {c} of {}", self.cols)));
            }
            bits[c / 64] ^= 1 << (c % 64);
        }
        Ok(bits)
    }

    /// Reduces in place; returns the accumulated value of the rows used.
    fn reduce(&self, bits: &mut [u64], value: &mut Block) -> Result<Option<usize>> {
        while let Some(h) = highest_bit(bits) {
            match &self.pivots[h] {
                Some(row) => {
                    for (a, b) in bits.iter_mut().zip(&row.bits) {
                        *a ^= b;
                    }
                    value.xor_assign(&row.value)?;
                }
                None => return Ok(Some(h)),
            }
        }
        Ok(None)
    }

    /// Adds the equation `XOR of columns idx = value`.
    pub fn insert_sparse(&mut self, idx: &[usize], value: Block) -> Result<()> {
        if value.len() != self.block_bytes {
            return Err(Error::LengthMismatch {
                expected: self.block_bytes,
                found: value.len(),
            });
        }
        let mut bits = self.dense(idx)?;
        let mut value = value;
        match self.reduce(&mut bits, &mut value)? {
            Some(h) => {
                self.pivots[h] = Some(Row { bits, value });
                self.rank += 1;
            }
            None if !value.is_zero() => self.inconsistent += 1,
            None => {}
        }
        Ok(())
    }

    /// Value of `XOR of columns idx` if it lies in the row span.
    pub fn solve_sparse(&self, idx: &[usize]) -> Result<Option<Block>> {
        let mut bits = self.dense(idx)?;
        let mut value = Block::zero(self.block_bytes);
        Ok(match self.reduce(&mut bits, &mut value)? {
            None => Some(value),
            Some(_) => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blk(v: u8) -> Block {
        Block::new(vec![v]).unwrap()
    }

    #[test]
    fn solves_a_small_system() {
        // x0 = 5, x0 + x1 = 3, x1 + x2 = 9
        let mut s = Gf2System::new(3, 1);
        s.insert_sparse(&[0], blk(5)).unwrap();
        s.insert_sparse(&[0, 1], blk(3)).unwrap();
        s.insert_sparse(&[1, 2], blk(9)).unwrap();
        assert_eq!(s.rank(), 3);
        assert_eq!(s.solve_sparse(&[1]).unwrap(), Some(blk(5 ^ 3)));
        assert_eq!(s.solve_sparse(&[2]).unwrap(), Some(blk(5 ^ 3 ^ 9)));
    }

    #[test]
    fn underdetermined_and_inconsistent() {
        let mut s = Gf2System::new(130, 1);
        s.insert_sparse(&[0, 129], blk(1)).unwrap();
        assert_eq!(s.solve_sparse(&[0]).unwrap(), None);
        assert_eq!(s.solve_sparse(&[129, 0]).unwrap(), Some(blk(1)));
        s.insert_sparse(&[129, 0], blk(2)).unwrap();
        assert_eq!(s.inconsistent_rows(), 1);
        assert!(s.insert_sparse(&[130], blk(0)).is_err());
    }

    proptest! {
        #[test]
        fn recovers_random_unknowns(
            vals in prop::collection::vec(any::<u8>(), 1..20),
            rows in prop::collection::vec(prop::collection::vec(0usize..20, 1..5), 0..40),
        ) {
            let n = vals.len();
            let mut s = Gf2System::new(n, 1);
            let rhs = |idx: &[usize]| idx.iter().fold(0u8, |acc, &c| acc ^ vals[c]);
            for r in rows.iter().map(|r| r.iter().map(|c| c % n).collect::<Vec<_>>()) {
                s.insert_sparse(&r, blk(rhs(&r))).unwrap();
            }
            for (c, &v) in vals.iter().enumerate() {
                s.insert_sparse(&[c], blk(v)).unwrap();
            }
            prop_assert_eq!(s.inconsistent_rows(), 0);
            prop_assert_eq!(s.rank(), n);
            for (c, &v) in vals.iter().enumerate() {
                prop_assert_eq!(s.solve_sparse(&[c]).unwrap(), Some(blk(v)));
            }
        }
    }
}
