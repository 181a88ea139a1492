use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The content of one subsubfile: a fixed-length octet vector.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Block(Vec<u8>);

impl Block {
    pub fn new(bytes: Vec<u8>) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::InvalidDimension("a block must hold at least one byte".into()));
        }
        Ok(Block(bytes))
    }

    pub fn zero(len: usize) -> Self {
        Block(vec![0; len.max(1)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn xor_assign(&mut self, other: &Block) -> Result<()> {
        self.xor_bytes(&other.0)
    }

    pub(crate) fn xor_bytes(&mut self, other: &[u8]) -> Result<()> {
        if other.len() != self.0.len() {
            return Err(Error::LengthMismatch {
                expected: self.0.len(),
                found: other.len(),
            });
        }
        for (a, b) in self.0.iter_mut().zip(other) {
            *a ^= b;
        }
        Ok(())
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block(")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// Bytewise XOR of a nonempty list of equal-length blocks.
pub fn xor_combine<'a, I>(blocks: I) -> Result<Block>
where
    I: IntoIterator<Item = &'a Block>,
{
    let mut iter = blocks.into_iter();
    let mut acc = iter.next().ok_or(Error::EmptyCombine)?.clone();
    for b in iter {
        acc.xor_assign(b)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blk(bytes: &[u8]) -> Block {
        Block::new(bytes.to_vec()).unwrap()
    }

    #[test]
    fn self_xor_is_zero() {
        let b = blk(&[0xde, 0xad, 0xbe, 0xef]);
        assert!(xor_combine([&b, &b]).unwrap().is_zero());
    }

    #[test]
    fn single_block_is_identity() {
        let b = blk(&[7, 1, 255]);
        assert_eq!(xor_combine([&b]).unwrap(), b);
    }

    #[test]
    fn empty_and_mismatched_inputs_fail() {
        assert_eq!(xor_combine(std::iter::empty()), Err(Error::EmptyCombine));
        let a = blk(&[1, 2]);
        let b = blk(&[1, 2, 3]);
        assert_eq!(
            xor_combine([&a, &b]),
            Err(Error::LengthMismatch { expected: 2, found: 3 })
        );
        assert!(Block::new(vec![]).is_err());
    }

    fn blocks(len: usize, count: usize) -> impl Strategy<Value = Vec<Block>> {
        prop::collection::vec(prop::collection::vec(any::<u8>(), len), count)
            .prop_map(|v| v.into_iter().map(Block).collect())
    }

    proptest! {
        #[test]
        fn xor_group_laws(v in (1usize..40).prop_flat_map(|len| blocks(len, 3))) {
            let zero = Block::zero(v[0].len());
            prop_assert_eq!(xor_combine([&v[0], &zero]).unwrap(), v[0].clone());
            prop_assert!(xor_combine([&v[1], &v[1]]).unwrap().is_zero());
            prop_assert_eq!(xor_combine([&v[0], &v[1]]).unwrap(), xor_combine([&v[1], &v[0]]).unwrap());
            let left = xor_combine([&xor_combine([&v[0], &v[1]]).unwrap(), &v[2]]).unwrap();
            let right = xor_combine([&v[0], &xor_combine([&v[1], &v[2]]).unwrap()]).unwrap();
            prop_assert_eq!(left.clone(), right);
            prop_assert_eq!(left, xor_combine([&v[2], &v[0], &v[1]]).unwrap());
        }
    }
}
