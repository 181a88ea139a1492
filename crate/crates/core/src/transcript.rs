use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::query::{QueryAtom, QueryBundle, QueryId};

/// `theta = (d_1, ..., d_K)`, 1-based file indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector {
    pub demands: Vec<u32>,
}

impl DemandVector {
    pub fn new(demands: Vec<u32>, files: usize) -> Result<Self> {
        if demands.is_empty() {
            return Err(Error::InvalidDemand("empty demand vector".into()));
        }
        if let Some(&d) = demands.iter().find(|&&d| d == 0 || d as usize > files) {
            return Err(Error::InvalidDemand(format!("file {d} outside [1, {files}]")));
        }
        Ok(DemandVector { demands })
    }

    pub fn users(&self) -> usize {
        self.demands.len()
    }

    /// Demand of user `u` (1-based).
    pub fn of(&self, user: usize) -> u32 {
        self.demands[user - 1]
    }

    pub fn first_uncovered(&self, files: usize) -> Option<u32> {
        (1..=files as u32).find(|f| !self.demands.contains(f))
    }

    pub fn require_cover(&self, files: usize) -> Result<()> {
        match self.first_uncovered(files) {
            Some(file) => Err(Error::Coverage { file }),
            None => Ok(()),
        }
    }

    pub fn require_distinct(&self) -> Result<()> {
        let mut seen = self.demands.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDemand(format!(
                "{:?} repeats a file; N = K needs distinct demands",
                self.demands
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Single,
    Mupir,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// An answer minus already known terms leaves one new unknown.
    Peel,
    /// A cache line minus the known terms of the other files.
    CacheCombine,
    /// A known pair sum minus one known half.
    PairSplit,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Answer(QueryId),
    /// A value derived by an earlier step, named by its GF(2) form.
    Known(Vec<QueryAtom>),
    Cache { user: u32, line: u32 },
}

/// `target` is the sorted set of atoms whose XOR the step produces; it must
/// equal the symmetric difference of the source forms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanStep {
    pub kind: StepKind,
    pub target: Vec<QueryAtom>,
    pub sources: Vec<Source>,
}

/// `shared` steps use answers only and are valid for every user; `per_user`
/// holds the cache and pair steps of each user.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodePlan {
    pub shared: Vec<PlanStep>,
    pub per_user: Vec<Vec<PlanStep>>,
}

impl DecodePlan {
    pub fn steps(&self) -> impl Iterator<Item = &PlanStep> {
        self.shared.iter().chain(self.per_user.iter().flatten())
    }

    /// Rewrites answer references after a reordering: `map[(db, old)] = new`.
    pub(crate) fn remap(&mut self, map: &HashMap<QueryId, QueryId>) {
        let fix = |step: &mut PlanStep| {
            for src in &mut step.sources {
                if let Source::Answer(id) = src {
                    *id = map[id];
                }
            }
        };
        self.shared.iter_mut().for_each(fix);
        self.per_user.iter_mut().flatten().for_each(fix);
    }

    /// Checks every answer reference exists in `bundle` and every cache
    /// reference names a valid user and line.
    pub fn check_references(&self, bundle: &QueryBundle, users: usize, h: usize, subsubfiles: usize) -> Result<()> {
        for step in self.steps() {
            for src in &step.sources {
                match src {
                    Source::Answer(id) if bundle.get(*id).is_none() => {
                        return Err(Error::UnresolvablePlan(format!("plan names missing query {id:?}")));
                    }
                    Source::Cache { user, line }
                        if *user == 0
                            || *user as usize > users
                            || (*line as usize) <= h
                            || *line as usize > subsubfiles =>
                    {
                        return Err(Error::UnresolvablePlan(format!(
                            "plan names missing cache line {line} of user {user}"
                        )));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Shuffles every database's query list with `seed` and rewrites the plan's
/// answer references to match.
pub(crate) fn shuffle_emission(bundle: &mut QueryBundle, plan: &mut DecodePlan, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(bundle.databases());
    let mut map = HashMap::new();
    for (s, list) in bundle.per_db.iter().enumerate() {
        let mut ord: Vec<usize> = (0..list.len()).collect();
        ord.shuffle(&mut rng);
        for (new, &old) in ord.iter().enumerate() {
            map.insert(
                QueryId::new(s as u32 + 1, old as u32),
                QueryId::new(s as u32 + 1, new as u32),
            );
        }
        order.push(ord);
    }
    bundle.reorder(&order);
    plan.remap(&map);
}

/// A non-base user's alignment of files with base users.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RhoMap {
    pub user: u32,
    /// `map[i-1] = rho^i`, a base user.
    pub map: Vec<u32>,
    /// False only for the two-file fallback, where no bijection with the
    /// required demand pattern exists.
    pub injective: bool,
}

/// Every random choice of one session plus the decode plan. Regenerating from
/// the recorded choices yields the same bundle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub scheme: Scheme,
    pub databases: usize,
    pub files: usize,
    pub users: usize,
    pub seed: u64,
    /// `P = (p_1, ..., p_K)`: user `u` holds cache slot `p_u`.
    pub user_perm: Option<Permutation>,
    /// `slot_perms[lambda-1][i-1]`: the permutation of `[S^(N-1)]` used for
    /// file `i` by user `lambda`'s generator block.
    pub slot_perms: Vec<Vec<Permutation>>,
    pub demand: DemandVector,
    pub base: Option<Vec<u32>>,
    pub rho: Vec<RhoMap>,
    /// Seed of the per-database emission shuffle; `None` keeps generation order.
    pub shuffle_seed: Option<u64>,
    pub plan: DecodePlan,
}

impl SessionTranscript {
    pub fn slot_of(&self, user: usize) -> usize {
        match &self.user_perm {
            Some(p) => p.at(user) as usize,
            None => 1,
        }
    }

    pub fn rho_of(&self, user: usize) -> Option<&RhoMap> {
        self.rho.iter().find(|r| r.user as usize == user)
    }

    pub fn is_base(&self, user: usize) -> bool {
        match &self.base {
            Some(b) => b.contains(&(user as u32)),
            None => true,
        }
    }

    /// Regenerates the bundle from the recorded choices.
    pub fn replay(&self) -> Result<QueryBundle> {
        match self.scheme {
            Scheme::Single => crate::pir::replay(self),
            Scheme::Mupir => crate::mupir::replay(self),
        }
    }
}
