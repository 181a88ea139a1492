//! The two per-slot generators.
//!
//! `qset1` designs over the subfiles `W_{i,j}` of one slot `j`; `qset2` designs
//! over the pair sums `omega_i(x) = W_{i,j1}^x + W_{i,j2}^x`. Both run the
//! shared design engine and translate its abstract references through the
//! per-file permutations.

use serde::{Deserialize, Serialize};

use crate::design::{self, Design, Ref};
use crate::error::{Error, Result};
use crate::params::SchemeTables;
use crate::perm::Permutation;
use crate::query::{Query, QueryAtom};

/// `pairs[i-1] = (j1, j2)`: the two subfile indices summed in `omega_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaSpec {
    pub pairs: Vec<(u32, u32)>,
}

/// Resolution of one fresh reference: answer `idx` of database `db` (indices
/// local to the block) minus the listed known forms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Peel {
    pub db: usize,
    pub idx: usize,
    pub round: usize,
    pub target: Vec<QueryAtom>,
    pub known: Vec<Vec<QueryAtom>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotQueries {
    pub per_db: Vec<Vec<Query>>,
    /// In round order; every `known` form is the target of an earlier peel.
    pub peels: Vec<Peel>,
}

impl SlotQueries {
    pub fn total(&self) -> usize {
        self.per_db.iter().map(Vec::len).sum()
    }
}

fn check_perms(tab: &SchemeTables, perms: &[Permutation]) -> Result<()> {
    if perms.len() != tab.files {
        return Err(Error::InvalidPermutation(format!("{} permutations for {} files", perms.len(), tab.files)));
    }
    if let Some(p) = perms.iter().find(|p| p.len() != tab.subsubfiles) {
        return Err(Error::InvalidPermutation(format!(
            "permutation over [{}], need [{}]",
            p.len(),
            tab.subsubfiles
        )));
    }
    Ok(())
}

fn translate<F>(design: &Design, form: F) -> Result<SlotQueries>
where
    F: Fn(Ref) -> Vec<QueryAtom>,
{
    let mut per_db = Vec::with_capacity(design.per_db.len());
    let mut peels = Vec::new();
    for (s, list) in design.per_db.iter().enumerate() {
        let mut out = Vec::with_capacity(list.len());
        for (idx, dq) in list.iter().enumerate() {
            out.push(Query::new(dq.members.iter().flat_map(|&r| form(r)).collect())?);
            peels.push(Peel {
                db: s + 1,
                idx,
                round: dq.round,
                target: form(dq.fresh_ref()),
                known: dq.old_refs().map(&form).collect(),
            });
        }
        per_db.push(out);
    }
    peels.sort_by_key(|p| (p.round, p.db, p.idx));
    Ok(SlotQueries { per_db, peels })
}

/// Queries for slot `j` whose demanded file is `d`.
pub fn qset1(tab: &SchemeTables, j: u32, perms: &[Permutation], d: u32) -> Result<SlotQueries> {
    check_perms(tab, perms)?;
    if d == 0 || d as usize > tab.files {
        return Err(Error::InvalidDemand(format!("file {d} outside [1, {}]", tab.files)));
    }
    let design = design::run(
        tab.databases,
        tab.files,
        tab.subsubfiles,
        |s, k| tab.psi(s, k),
        |s, i, k| tab.f_rep(s, i, d as usize, k),
    )?;
    translate(&design, |(i, pos)| {
        vec![QueryAtom::new(i, j, perms[i as usize - 1].at(pos as usize))]
    })
}

/// Queries over the pair sums named by `omega`.
pub fn qset2(tab: &SchemeTables, omega: &OmegaSpec, perms: &[Permutation]) -> Result<SlotQueries> {
    check_perms(tab, perms)?;
    if omega.pairs.len() != tab.files {
        return Err(Error::InvalidDimension(format!("{} pairs for {} files", omega.pairs.len(), tab.files)));
    }
    if let Some(p) = omega.pairs.iter().find(|(a, b)| a == b) {
        return Err(Error::InvalidDimension(format!("pair {p:?} repeats a subfile")));
    }
    let n = tab.files;
    let design = design::run(
        tab.databases,
        n,
        tab.subsubfiles,
        |s, k| k * tab.phi(s, k),
        |s, _, k| tab.binom(n - 1, k - 1) * tab.phi(s, k),
    )?;
    translate(&design, |(i, pos)| {
        let x = perms[i as usize - 1].at(pos as usize);
        let (j1, j2) = omega.pairs[i as usize - 1];
        let mut f = vec![QueryAtom::new(i, j1, x), QueryAtom::new(i, j2, x)];
        f.sort_unstable();
        f
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn ident(tab: &SchemeTables) -> Vec<Permutation> {
        vec![Permutation::identity(tab.subsubfiles); tab.files]
    }

    #[test]
    fn example_row_counts() {
        let tab = SchemeTables::new(3, 3).unwrap();
        let out = qset1(&tab, 1, &ident(&tab), 2).unwrap();
        let shape = |list: &Vec<Query>| {
            let mut m: HashMap<usize, usize> = HashMap::new();
            for q in list {
                *m.entry(q.len()).or_default() += 1;
            }
            m
        };
        assert_eq!(shape(&out.per_db[0]), HashMap::from([(1, 3), (3, 4)]));
        assert_eq!(shape(&out.per_db[1]), HashMap::from([(2, 6), (3, 2)]));
        assert_eq!(shape(&out.per_db[2]), HashMap::from([(2, 6), (3, 2)]));
        assert_eq!(out.total(), 23);
        let mut fresh = [0usize; 3];
        for p in &out.peels {
            fresh[p.target[0].file as usize - 1] += 1;
        }
        assert_eq!(fresh, [9, 5, 9]);
    }

    #[test]
    fn pair_queries() {
        let tab = SchemeTables::new(3, 3).unwrap();
        let omega = OmegaSpec {
            pairs: vec![(2, 3), (1, 3), (4, 3)],
        };
        let out = qset2(&tab, &omega, &ident(&tab)).unwrap();
        assert_eq!(out.per_db.iter().map(Vec::len).collect::<Vec<_>>(), vec![9, 9, 9]);
        assert_eq!(out.peels.len(), 27);
        for list in &out.per_db {
            for q in list {
                assert_eq!(q.len() % 2, 0);
                assert_eq!(q.files().len() * 2, q.len());
            }
        }
        let tab2 = SchemeTables::new(2, 2).unwrap();
        let o2 = OmegaSpec { pairs: vec![(1, 2), (1, 2)] };
        assert_eq!(qset2(&tab2, &o2, &ident(&tab2)).unwrap().total(), 4);
        assert_eq!(qset1(&tab2, 1, &ident(&tab2), 1).unwrap().total(), 3);
        let bad = OmegaSpec { pairs: vec![(1, 1), (1, 2)] };
        assert!(qset2(&tab2, &bad, &ident(&tab2)).is_err());
    }
}
