use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term `W_{i,j}^x` of a transmitted sum; all indices 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryAtom {
    pub file: u32,
    pub subfile: u32,
    pub subsub: u32,
}

impl QueryAtom {
    pub const fn new(file: u32, subfile: u32, subsub: u32) -> Self {
        QueryAtom { file, subfile, subsub }
    }

    pub fn in_range(&self, files: usize, subfiles: usize, subsubfiles: usize) -> bool {
        (1..=files).contains(&(self.file as usize))
            && (1..=subfiles).contains(&(self.subfile as usize))
            && (1..=subsubfiles).contains(&(self.subsub as usize))
    }
}

impl fmt::Display for QueryAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W[{},{}]^{}", self.file, self.subfile, self.subsub)
    }
}

/// XOR of the listed atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Query {
    pub atoms: Vec<QueryAtom>,
}

impl Query {
    pub fn new(atoms: Vec<QueryAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDimension("a query needs at least one atom".into()));
        }
        Ok(Query { atoms })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn sorted_atoms(&self) -> Vec<QueryAtom> {
        let mut a = self.atoms.clone();
        a.sort_unstable();
        a
    }

    /// Distinct files referenced, ascending.
    pub fn files(&self) -> Vec<u32> {
        let mut f: Vec<u32> = self.atoms.iter().map(|a| a.file).collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// The single-user scheme.
    Alg1,
    /// Per-slot generator over plain subfiles.
    QSet1,
    /// Per-slot generator over pairs of subfiles.
    QSet2,
}

/// Which generator block produced a query: the user slot `lambda`, the
/// subfile index the block covers and the generator used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub user: u32,
    pub subfile: u32,
    pub generator: Generator,
}

/// Position of a query: database (1-based) and index in that database's list
/// (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryId {
    pub db: u32,
    pub pos: u32,
}

impl QueryId {
    pub const fn new(db: u32, pos: u32) -> Self {
        QueryId { db, pos }
    }
}

/// Per-database query lists of one session with the generator block behind
/// every query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryBundle {
    pub per_db: Vec<Vec<Query>>,
    pub provenance: Vec<Vec<Provenance>>,
}

impl QueryBundle {
    pub fn empty(databases: usize) -> Self {
        QueryBundle {
            per_db: vec![Vec::new(); databases],
            provenance: vec![Vec::new(); databases],
        }
    }

    pub fn databases(&self) -> usize {
        self.per_db.len()
    }

    pub fn push(&mut self, db: usize, query: Query, prov: Provenance) -> QueryId {
        let list = &mut self.per_db[db - 1];
        list.push(query);
        self.provenance[db - 1].push(prov);
        QueryId::new(db as u32, (list.len() - 1) as u32)
    }

    pub fn get(&self, id: QueryId) -> Option<&Query> {
        self.per_db
            .get((id.db as usize).checked_sub(1)?)?
            .get(id.pos as usize)
    }

    pub fn provenance_of(&self, id: QueryId) -> Option<&Provenance> {
        self.provenance
            .get((id.db as usize).checked_sub(1)?)?
            .get(id.pos as usize)
    }

    pub fn total_queries(&self) -> usize {
        self.per_db.iter().map(Vec::len).sum()
    }

    pub fn per_db_counts(&self) -> Vec<usize> {
        self.per_db.iter().map(Vec::len).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = QueryId> + '_ {
        self.per_db.iter().enumerate().flat_map(|(s, list)| {
            (0..list.len()).map(move |p| QueryId::new(s as u32 + 1, p as u32))
        })
    }

    /// Checks lengths line up and every atom is in range.
    pub fn validate(&self, files: usize, subfiles: usize, subsubfiles: usize) -> Result<()> {
        if self.per_db.len() != self.provenance.len() {
            return Err(Error::InvalidDimension("provenance does not cover every database".into()));
        }
        for (s, (q, p)) in self.per_db.iter().zip(&self.provenance).enumerate() {
            if q.len() != p.len() {
                return Err(Error::InvalidDimension(format!(
                    "database {}: {} queries but {} provenance records",
                    s + 1,
                    q.len(),
                    p.len()
                )));
            }
            for query in q {
                if query.is_empty() {
                    return Err(Error::InvalidDimension(format!("database {}: empty query", s + 1)));
                }
                if let Some(a) = query.atoms.iter().find(|a| !a.in_range(files, subfiles, subsubfiles)) {
                    return Err(Error::IndexOutOfRange(format!("database {}: {a}", s + 1)));
                }
            }
        }
        Ok(())
    }

    /// Reorders every database list: new position `p` holds the query that
    /// was at `order[db][p]`.
    pub(crate) fn reorder(&mut self, order: &[Vec<usize>]) {
        for (s, ord) in order.iter().enumerate() {
            let q = std::mem::take(&mut self.per_db[s]);
            let p = std::mem::take(&mut self.provenance[s]);
            self.per_db[s] = ord.iter().map(|&o| q[o].clone()).collect();
            self.provenance[s] = ord.iter().map(|&o| p[o]).collect();
        }
    }
}

/// Per database, the sorted multiset of sorted atom lists.
pub type CanonicalKey = Vec<Vec<Vec<QueryAtom>>>;

/// Order-free view of a bundle, one entry per database.
pub fn canonical_form(bundle: &QueryBundle) -> CanonicalKey {
    bundle.per_db.iter().map(|list| canonical_db(list)).collect()
}

pub fn canonical_db(list: &[Query]) -> Vec<Vec<QueryAtom>> {
    let mut rows: Vec<Vec<QueryAtom>> = list.iter().map(Query::sorted_atoms).collect();
    rows.sort_unstable();
    rows
}
