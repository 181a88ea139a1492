//! Placement: one XOR line per subfile slot and subsubfile index beyond `H`.

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::params::SchemeTables;
use crate::perm::Permutation;
use crate::query::QueryAtom;
use crate::store::FileStore;

/// Lines `W_{1,j}^t + ... + W_{N,j}^t` for `t = H+1..=S^(N-1)`, per slot `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Broadcast {
    pub h: usize,
    /// `lines[j-1]` holds `(t, line)` in increasing `t`.
    pub lines: Vec<Vec<(u32, Block)>>,
}

impl Broadcast {
    pub fn line_count(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }
}

/// What user `owner` keeps: the broadcast lines of its slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheContent {
    pub owner: u32,
    pub slot: u32,
    pub lines: Vec<(u32, Block)>,
}

impl CacheContent {
    pub fn line(&self, t: u32) -> Option<&Block> {
        self.lines.iter().find(|(x, _)| *x == t).map(|(_, b)| b)
    }

    /// Atoms XORed into line `t`.
    pub fn form(&self, t: u32, files: usize) -> Vec<QueryAtom> {
        (1..=files as u32).map(|i| QueryAtom::new(i, self.slot, t)).collect()
    }

    pub fn bits(&self) -> u64 {
        self.lines.iter().map(|(_, b)| b.len() as u64 * 8).sum()
    }
}

pub fn broadcast(store: &FileStore) -> Result<Broadcast> {
    let tab = SchemeTables::new(store.databases(), store.files())?;
    let mut lines = Vec::with_capacity(store.subfiles());
    for j in 1..=store.subfiles() as u32 {
        let mut slot = Vec::with_capacity(tab.subsubfiles - tab.h);
        for t in (tab.h + 1)..=tab.subsubfiles {
            let atoms: Vec<QueryAtom> = (1..=store.files() as u32).map(|i| QueryAtom::new(i, j, t as u32)).collect();
            slot.push((t as u32, store.combine(&atoms)?));
        }
        lines.push(slot);
    }
    Ok(Broadcast { h: tab.h, lines })
}

/// Broadcast plus the cache of every user under `user_perm`.
pub fn placement(store: &FileStore, user_perm: &Permutation) -> Result<(Broadcast, Vec<CacheContent>)> {
    let (n, k) = (store.files(), store.subfiles());
    if n > k {
        return Err(Error::UnsupportedRegime(format!("N = {n} > K = {k}; the scheme needs N <= K")));
    }
    if user_perm.len() != k {
        return Err(Error::InvalidPermutation(format!("user permutation over [{}], need [{k}]", user_perm.len())));
    }
    let z = broadcast(store)?;
    let caches = (1..=k)
        .map(|u| {
            let slot = user_perm.at(u);
            CacheContent {
                owner: u as u32,
                slot,
                lines: z.lines[slot as usize - 1].clone(),
            }
        })
        .collect();
    Ok((z, caches))
}
