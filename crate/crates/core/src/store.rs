//! Replicated file content.
//!
//! One [`FileStore`] stands for every database replica. File `i` is split into
//! `K` subfiles and each subfile into `S^(N-1)` subsubfiles of `block_bytes`
//! bytes, so a file holds `L = K * S^(N-1) * block_bytes * 8` bits.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::block::Block;
use crate::error::{Error, Result};
use crate::query::QueryAtom;
use crate::subpacketization;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileStore {
    databases: usize,
    files: usize,
    subfiles: usize,
    block_bytes: usize,
    subsubfiles: usize,
    data: Vec<u8>,
}

fn check_dims(files: usize, subfiles: usize, databases: usize, block_bytes: usize) -> Result<usize> {
    if files < 2 {
        return Err(Error::InvalidDimension(format!("N = {files}, need N >= 2")));
    }
    if databases < 2 {
        return Err(Error::InvalidDimension(format!("S = {databases}, need S >= 2")));
    }
    if subfiles < 1 {
        return Err(Error::InvalidDimension("K = 0, need K >= 1".into()));
    }
    if block_bytes < 1 {
        return Err(Error::InvalidDimension("block_bytes = 0, need >= 1".into()));
    }
    let n = subpacketization(databases, files)?;
    files
        .checked_mul(subfiles)
        .and_then(|v| v.checked_mul(n))
        .and_then(|v| v.checked_mul(block_bytes))
        .filter(|&v| v <= (1 << 32))
        .ok_or_else(|| Error::InvalidDimension("store larger than 4 GiB".into()))?;
    Ok(n)
}

/// Pseudo-random store content derived from `seed`.
pub fn build_file_store(
    files: usize,
    subfiles: usize,
    databases: usize,
    block_bytes: usize,
    seed: u64,
) -> Result<FileStore> {
    let n = check_dims(files, subfiles, databases, block_bytes)?;
    let mut data = vec![0u8; files * subfiles * n * block_bytes];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut data);
    Ok(FileStore {
        databases,
        files,
        subfiles,
        block_bytes,
        subsubfiles: n,
        data,
    })
}

impl FileStore {
    /// Imports raw bytes holding the `N` files back to back, each exactly
    /// `K * S^(N-1) * block_bytes` bytes long.
    pub fn from_concatenated(
        bytes: &[u8],
        files: usize,
        subfiles: usize,
        databases: usize,
        block_bytes: usize,
    ) -> Result<FileStore> {
        let n = check_dims(files, subfiles, databases, block_bytes)?;
        let expected = files * subfiles * n * block_bytes;
        if bytes.len() != expected {
            return Err(Error::InvalidDimension(format!(
                "raw import holds {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        Ok(FileStore {
            databases,
            files,
            subfiles,
            block_bytes,
            subsubfiles: n,
            data: bytes.to_vec(),
        })
    }

    pub fn databases(&self) -> usize {
        self.databases
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn subfiles(&self) -> usize {
        self.subfiles
    }

    pub fn block_bytes(&self) -> usize {
        self.block_bytes
    }

    /// `S^(N-1)`.
    pub fn subsubfiles(&self) -> usize {
        self.subsubfiles
    }

    pub fn file_bytes(&self) -> usize {
        self.subfiles * self.subsubfiles * self.block_bytes
    }

    /// `L` in bits.
    pub fn file_bits(&self) -> u64 {
        self.file_bytes() as u64 * 8
    }

    fn offset(&self, atom: QueryAtom) -> Result<usize> {
        let (i, j, x) = (atom.file as usize, atom.subfile as usize, atom.subsub as usize);
        if !(1..=self.files).contains(&i)
            || !(1..=self.subfiles).contains(&j)
            || !(1..=self.subsubfiles).contains(&x)
        {
            return Err(Error::IndexOutOfRange(format!(
                "{atom} outside N = {}, K = {}, S^(N-1) = {}",
                self.files, self.subfiles, self.subsubfiles
            )));
        }
        Ok((((i - 1) * self.subfiles + (j - 1)) * self.subsubfiles + (x - 1)) * self.block_bytes)
    }

    pub fn bytes_of(&self, atom: QueryAtom) -> Result<&[u8]> {
        let off = self.offset(atom)?;
        Ok(&self.data[off..off + self.block_bytes])
    }

    pub fn block(&self, atom: QueryAtom) -> Result<Block> {
        Block::new(self.bytes_of(atom)?.to_vec())
    }

    /// All subsubfiles of file `i` in `(subfile, subsub)` order.
    pub fn file_blocks(&self, file: u32) -> Result<Vec<Block>> {
        let mut out = Vec::with_capacity(self.subfiles * self.subsubfiles);
        for j in 1..=self.subfiles as u32 {
            for x in 1..=self.subsubfiles as u32 {
                out.push(self.block(QueryAtom::new(file, j, x))?);
            }
        }
        Ok(out)
    }

    /// XOR of the listed subsubfiles.
    pub fn combine(&self, atoms: &[QueryAtom]) -> Result<Block> {
        let mut acc = Block::zero(self.block_bytes);
        for &a in atoms {
            acc.xor_bytes(self.bytes_of(a)?)?;
        }
        Ok(acc)
    }

    /// Test helper: overwrite a single subsubfile.
    pub fn set_block(&mut self, atom: QueryAtom, block: &Block) -> Result<()> {
        if block.len() != self.block_bytes {
            return Err(Error::LengthMismatch {
                expected: self.block_bytes,
                found: block.len(),
            });
        }
        let off = self.offset(atom)?;
        self.data[off..off + self.block_bytes].copy_from_slice(block.as_bytes());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_dimensions() {
        let st = build_file_store(3, 1, 4, 1, 7).unwrap();
        assert_eq!(st.subsubfiles(), 16);
        assert_eq!(st.file_blocks(3).unwrap().len(), 16);
        assert_eq!(st.file_bits(), 16 * 8);
    }

    #[test]
    fn paper_sized_example_store() {
        // 27 subsubfiles per file; with one-byte blocks L is 27 bytes.
        let st = build_file_store(3, 3, 3, 1, 1).unwrap();
        assert_eq!(st.file_bytes(), 27);
        assert_eq!(st.file_bits(), 27 * 8);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(build_file_store(1, 1, 2, 1, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(build_file_store(2, 1, 1, 1, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(build_file_store(2, 0, 2, 1, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(build_file_store(2, 1, 2, 0, 0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn seeded_content_is_deterministic() {
        let a = build_file_store(3, 2, 3, 4, 99).unwrap();
        let b = build_file_store(3, 2, 3, 4, 99).unwrap();
        let c = build_file_store(3, 2, 3, 4, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn out_of_range_atoms() {
        let st = build_file_store(2, 2, 2, 1, 0).unwrap();
        assert!(st.block(QueryAtom::new(3, 1, 1)).is_err());
        assert!(st.block(QueryAtom::new(1, 3, 1)).is_err());
        assert!(st.block(QueryAtom::new(1, 1, 0)).is_err());
        assert!(st.block(QueryAtom::new(1, 1, 3)).is_err());
    }

    #[test]
    fn raw_import_round_trips() {
        let st = build_file_store(2, 2, 3, 2, 5).unwrap();
        let imported = FileStore::from_concatenated(&st.data, 2, 2, 3, 2).unwrap();
        assert_eq!(imported, st);
        assert!(FileStore::from_concatenated(&st.data[1..], 2, 2, 3, 2).is_err());
    }
}
