//! Symbolic query design shared by the two per-slot generators.
//!
//! The engine works on abstract references `(file, position)` where position
//! `t` stands for the `t`-th entry of that file's permutation. Each round `k`
//! adds, to every database `s`, every `k`-subset of the files `reps(s, k)`
//! times; file `i` contributes `quota(s, i, k)` fresh references in that round.
//! Every emitted query carries exactly one reference that is fresh in its
//! round; all other references were fresh in an earlier round, so the queries
//! peel in round order.

use itertools::Itertools;

use crate::error::{Error, Result};

/// `(file, position)`, both 1-based.
pub(crate) type Ref = (u32, u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct DesignQuery {
    /// One reference per member file, ascending by file.
    pub members: Vec<Ref>,
    /// File whose reference is new in this round.
    pub fresh: u32,
    pub round: usize,
}

impl DesignQuery {
    pub fn fresh_ref(&self) -> Ref {
        *self
            .members
            .iter()
            .find(|m| m.0 == self.fresh)
            .expect("fresh file is a member")
    }

    pub fn old_refs(&self) -> impl Iterator<Item = Ref> + '_ {
        self.members.iter().copied().filter(move |m| m.0 != self.fresh)
    }

    fn set(&mut self, file: u32, pos: u32) {
        let m = self.members.iter_mut().find(|m| m.0 == file).expect("member file");
        m.1 = pos;
    }

    fn pos_of(&self, file: u32) -> u32 {
        self.members.iter().find(|m| m.0 == file).expect("member file").1
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Design {
    /// `per_db[s-1]` in insertion order.
    pub per_db: Vec<Vec<DesignQuery>>,
    /// Number of positions consumed per file, `used[i-1]`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub used: Vec<usize>,
}

struct Usage {
    /// `count[s-1][i-1][pos]` references to position `pos` of file `i` in database `s`.
    count: Vec<Vec<Vec<u32>>>,
}

impl Usage {
    fn new(databases: usize, files: usize, positions: usize) -> Self {
        Usage {
            count: vec![vec![vec![0; positions + 1]; files]; databases],
        }
    }

    fn add(&mut self, s: usize, r: Ref) {
        self.count[s - 1][r.0 as usize - 1][r.1 as usize] += 1;
    }

    fn remove(&mut self, s: usize, r: Ref) {
        self.count[s - 1][r.0 as usize - 1][r.1 as usize] -= 1;
    }

    /// Least referenced position among `1..=limit` in database `s`, smallest
    /// position on ties.
    fn least_used(&self, s: usize, file: u32, limit: usize) -> u32 {
        let c = &self.count[s - 1][file as usize - 1];
        (1..=limit).min_by_key(|&p| (c[p], p)).expect("an exposed position") as u32
    }
}

pub(crate) fn run<R, Q>(databases: usize, files: usize, positions: usize, reps: R, quota: Q) -> Result<Design>
where
    R: Fn(usize, usize) -> usize,
    Q: Fn(usize, usize, usize) -> usize,
{
    let mut per_db: Vec<Vec<DesignQuery>> = vec![Vec::new(); databases];
    let mut t = vec![0usize; files];
    let mut usage = Usage::new(databases, files, positions);
    let fresh = |t: &mut Vec<usize>, i: u32| -> Result<u32> {
        let slot = &mut t[i as usize - 1];
        *slot += 1;
        if *slot > positions {
            return Err(Error::IndexOutOfRange(format!(
                "file {i} needs more than {positions} fresh positions"
            )));
        }
        Ok(*slot as u32)
    };
    for k in 1..=files {
        let limit = t.clone();
        for s in 1..=databases {
            let mut pool: Vec<Vec<u32>> = Vec::new();
            for u in (1..=files as u32).combinations(k) {
                for _ in 0..reps(s, k) {
                    pool.push(u.clone());
                }
            }
            // indices into per_db[s-1] of queries added this round
            let mut placed: Vec<usize> = Vec::new();
            for i in 1..=files as u32 {
                for _ in 0..quota(s, i as usize, k) {
                    if let Some(idx) = pool.iter().position(|u| u.contains(&i)) {
                        let u = pool.remove(idx);
                        let mut members = Vec::with_capacity(k);
                        for &m in &u {
                            let pos = if m == i {
                                fresh(&mut t, i)?
                            } else {
                                usage.least_used(s, m, limit[m as usize - 1])
                            };
                            usage.add(s, (m, pos));
                            members.push((m, pos));
                        }
                        placed.push(per_db[s - 1].len());
                        per_db[s - 1].push(DesignQuery { members, fresh: i, round: k });
                        continue;
                    }
                    // Every remaining subset misses `i`: hand a query that
                    // already holds `i` the fresh reference of `i` and move its
                    // fresh reference into a new query for a remaining subset.
                    let found = pool.iter().enumerate().find_map(|(ui, u)| {
                        placed.iter().find_map(|&qi| {
                            let q = &per_db[s - 1][qi];
                            let v1 = q.fresh;
                            let holds_i = q.members.iter().any(|m| m.0 == i);
                            (holds_i && v1 != i && u.contains(&v1)).then_some((ui, qi))
                        })
                    });
                    let Some((ui, qi)) = found else {
                        return Err(Error::InfeasibleSwap { db: s, k, file: i as usize });
                    };
                    let u = pool.remove(ui);
                    let v1 = per_db[s - 1][qi].fresh;
                    let v1_fresh = per_db[s - 1][qi].pos_of(v1);
                    let i_old = per_db[s - 1][qi].pos_of(i);
                    usage.remove(s, (i, i_old));
                    usage.remove(s, (v1, v1_fresh));
                    let i_new = fresh(&mut t, i)?;
                    let v1_old = usage.least_used(s, v1, limit[v1 as usize - 1]);
                    usage.add(s, (i, i_new));
                    usage.add(s, (v1, v1_old));
                    {
                        let q = &mut per_db[s - 1][qi];
                        q.set(i, i_new);
                        q.set(v1, v1_old);
                        q.fresh = i;
                    }
                    let mut members = Vec::with_capacity(k);
                    for &m in &u {
                        let pos = if m == v1 {
                            v1_fresh
                        } else {
                            usage.least_used(s, m, limit[m as usize - 1])
                        };
                        usage.add(s, (m, pos));
                        members.push((m, pos));
                    }
                    placed.push(per_db[s - 1].len());
                    per_db[s - 1].push(DesignQuery { members, fresh: v1, round: k });
                }
            }
            debug_assert!(pool.is_empty(), "quotas and repetitions disagree at s = {s}, k = {k}");
        }
    }
    Ok(Design { per_db, used: t })
}
