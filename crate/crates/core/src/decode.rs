//! Plan-driven peeling decode.
//!
//! Every derived value is keyed by its GF(2) form, the sorted set of atoms it
//! is the XOR of. Before a step stores its value the executor checks that the
//! symmetric difference of the source forms is exactly the step's target, so
//! a plan that disagrees with the bundle fails loudly instead of producing
//! garbage.

use std::collections::{BTreeSet, HashMap};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::gf2::Gf2System;
use crate::mupir::placement::CacheContent;
use crate::query::{QueryAtom, QueryBundle};
use crate::store::FileStore;
use crate::transcript::{DecodePlan, PlanStep, Source};

/// One answer block per query, aligned with the bundle.
pub type AnswerSet = Vec<Vec<Block>>;

pub type Knowledge = HashMap<Vec<QueryAtom>, Block>;

/// What every database returns: the XOR of the referenced subsubfiles.
pub fn answer_bundle(store: &FileStore, bundle: &QueryBundle) -> Result<AnswerSet> {
    bundle
        .per_db
        .iter()
        .map(|list| list.iter().map(|q| store.combine(&q.atoms)).collect())
        .collect()
}

pub struct DecodeContext<'a> {
    pub bundle: &'a QueryBundle,
    pub answers: &'a AnswerSet,
    pub caches: &'a [CacheContent],
    pub files: usize,
    pub subfiles: usize,
    pub block_bytes: usize,
}

impl<'a> DecodeContext<'a> {
    pub fn new(
        bundle: &'a QueryBundle,
        answers: &'a AnswerSet,
        caches: &'a [CacheContent],
        files: usize,
        subfiles: usize,
    ) -> Result<Self> {
        if answers.len() != bundle.databases()
            || answers.iter().zip(&bundle.per_db).any(|(a, q)| a.len() != q.len())
        {
            return Err(Error::UnresolvablePlan("answers are not aligned with the bundle".into()));
        }
        let block_bytes = answers
            .iter()
            .flatten()
            .next()
            .map(Block::len)
            .ok_or_else(|| Error::UnresolvablePlan("no answers".into()))?;
        if answers.iter().flatten().any(|b| b.len() != block_bytes) {
            return Err(Error::LengthMismatch {
                expected: block_bytes,
                found: answers.iter().flatten().find(|b| b.len() != block_bytes).map_or(0, Block::len),
            });
        }
        Ok(DecodeContext {
            bundle,
            answers,
            caches,
            files,
            subfiles,
            block_bytes,
        })
    }

    fn cache_line(&self, user: u32, line: u32) -> Result<(Vec<QueryAtom>, &'a Block)> {
        let cache = self
            .caches
            .iter()
            .find(|c| c.owner == user)
            .ok_or_else(|| Error::UnresolvablePlan(format!("no cache for user {user}")))?;
        let block = cache
            .line(line)
            .ok_or_else(|| Error::UnresolvablePlan(format!("user {user} has no cache line {line}")))?;
        Ok((cache.form(line, self.files), block))
    }
}

fn toggle(form: &mut BTreeSet<QueryAtom>, atoms: &[QueryAtom]) {
    for a in atoms {
        if !form.remove(a) {
            form.insert(*a);
        }
    }
}

struct Layer<'k> {
    base: &'k Knowledge,
    top: Knowledge,
}

impl Layer<'_> {
    fn get(&self, form: &[QueryAtom]) -> Option<&Block> {
        self.top.get(form).or_else(|| self.base.get(form))
    }
}

fn execute(steps: &[PlanStep], ctx: &DecodeContext<'_>, known: &mut Layer<'_>) -> Result<()> {
    for (n, step) in steps.iter().enumerate() {
        let mut form = BTreeSet::new();
        let mut value = Block::zero(ctx.block_bytes);
        for src in &step.sources {
            match src {
                Source::Answer(id) => {
                    let q = ctx
                        .bundle
                        .get(*id)
                        .ok_or_else(|| Error::UnresolvablePlan(format!("step {n}: no query {id:?}")))?;
                    toggle(&mut form, &q.atoms);
                    value.xor_assign(&ctx.answers[id.db as usize - 1][id.pos as usize])?;
                }
                Source::Known(f) => {
                    let v = known
                        .get(f)
                        .ok_or_else(|| Error::UnresolvablePlan(format!("step {n}: {f:?} not yet known")))?;
                    toggle(&mut form, f);
                    value.xor_assign(v)?;
                }
                Source::Cache { user, line } => {
                    let (f, v) = ctx.cache_line(*user, *line)?;
                    toggle(&mut form, &f);
                    value.xor_assign(v)?;
                }
            }
        }
        let got: Vec<QueryAtom> = form.into_iter().collect();
        if got != step.target {
            return Err(Error::UnresolvablePlan(format!(
                "step {n} ({:?}) yields {got:?}, plan says {:?}",
                step.kind, step.target
            )));
        }
        known.top.insert(got, value);
    }
    Ok(())
}

/// Runs the steps every user shares.
pub fn run_shared(plan: &DecodePlan, ctx: &DecodeContext<'_>) -> Result<Knowledge> {
    let empty = Knowledge::new();
    let mut layer = Layer {
        base: &empty,
        top: Knowledge::new(),
    };
    execute(&plan.shared, ctx, &mut layer)?;
    Ok(layer.top)
}

/// Runs `user`'s own steps on top of `shared` and returns the demanded file's
/// subsubfiles in `(subfile, subsub)` order.
pub fn collect_user(
    plan: &DecodePlan,
    ctx: &DecodeContext<'_>,
    shared: &Knowledge,
    user: usize,
    demand: u32,
    subsubfiles: usize,
) -> Result<Vec<Block>> {
    let steps = plan
        .per_user
        .get(user - 1)
        .ok_or_else(|| Error::UnresolvablePlan(format!("plan has no steps for user {user}")))?;
    let mut layer = Layer {
        base: shared,
        top: Knowledge::new(),
    };
    execute(steps, ctx, &mut layer)?;
    let mut out = Vec::with_capacity(ctx.subfiles * subsubfiles);
    for j in 1..=ctx.subfiles as u32 {
        for x in 1..=subsubfiles as u32 {
            let atom = QueryAtom::new(demand, j, x);
            let v = layer
                .get(&[atom])
                .ok_or_else(|| Error::UnresolvablePlan(format!("user {user} never learns {atom}")))?;
            out.push(v.clone());
        }
    }
    Ok(out)
}

/// Column of an atom in the GF(2) system.
pub fn column(atom: QueryAtom, subfiles: usize, subsubfiles: usize) -> usize {
    ((atom.file as usize - 1) * subfiles + (atom.subfile as usize - 1)) * subsubfiles + (atom.subsub as usize - 1)
}

/// Solves for the demanded file from all answers plus `user`'s cache lines by
/// Gaussian elimination, ignoring the plan entirely.
pub fn oracle_user(ctx: &DecodeContext<'_>, user: Option<u32>, demand: u32, subsubfiles: usize) -> Result<Vec<Block>> {
    let cols = ctx.files * ctx.subfiles * subsubfiles;
    let mut sys = Gf2System::new(cols, ctx.block_bytes);
    for (list, ans) in ctx.bundle.per_db.iter().zip(ctx.answers) {
        for (q, a) in list.iter().zip(ans) {
            let idx: Vec<usize> = q.atoms.iter().map(|&x| column(x, ctx.subfiles, subsubfiles)).collect();
            sys.insert_sparse(&idx, a.clone())?;
        }
    }
    if let Some(u) = user {
        if let Some(cache) = ctx.caches.iter().find(|c| c.owner == u) {
            for (t, block) in &cache.lines {
                let idx: Vec<usize> = cache
                    .form(*t, ctx.files)
                    .into_iter()
                    .map(|x| column(x, ctx.subfiles, subsubfiles))
                    .collect();
                sys.insert_sparse(&idx, block.clone())?;
            }
        }
    }
    let mut out = Vec::with_capacity(ctx.subfiles * subsubfiles);
    for j in 1..=ctx.subfiles as u32 {
        for x in 1..=subsubfiles as u32 {
            let atom = QueryAtom::new(demand, j, x);
            let v = sys
                .solve_sparse(&[column(atom, ctx.subfiles, subsubfiles)])?
                .ok_or_else(|| Error::OracleMismatch(format!("{atom} is outside the span of the answers")))?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn compare(peeled: &[Block], solved: &[Block]) -> Result<()> {
    if peeled.len() != solved.len() {
        return Err(Error::OracleMismatch(format!("{} vs {} blocks", peeled.len(), solved.len())));
    }
    if let Some(i) = (0..peeled.len()).find(|&i| peeled[i] != solved[i]) {
        return Err(Error::OracleMismatch(format!("block {i} differs")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{Generator, Provenance, Query, QueryId};
    use crate::store::build_file_store;
    use crate::transcript::StepKind;

    const PROV: Provenance = Provenance {
        user: 1,
        subfile: 1,
        generator: Generator::Alg1,
    };

    fn a(i: u32, x: u32) -> QueryAtom {
        QueryAtom::new(i, 1, x)
    }

    #[test]
    fn answers_are_xors() {
        let mut store = build_file_store(2, 1, 2, 4, 1).unwrap();
        store.set_block(a(2, 1), &Block::zero(4)).unwrap();
        let mut b = QueryBundle::empty(2);
        b.push(1, Query::new(vec![a(1, 1)]).unwrap(), PROV);
        b.push(1, Query::new(vec![a(2, 2)]).unwrap(), PROV);
        b.push(2, Query::new(vec![a(1, 1), a(2, 1)]).unwrap(), PROV);
        b.push(2, Query::new(vec![a(1, 1), a(2, 2)]).unwrap(), PROV);
        let ans = answer_bundle(&store, &b).unwrap();
        assert_eq!(ans[0][0], store.block(a(1, 1)).unwrap());
        assert_eq!(ans[1][0], store.block(a(1, 1)).unwrap());
        let z = crate::block::xor_combine([&ans[0][0], &ans[0][1], &ans[1][1]]).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn wrong_target_is_rejected() {
        let store = build_file_store(2, 1, 2, 1, 1).unwrap();
        let mut b = QueryBundle::empty(2);
        b.push(1, Query::new(vec![a(1, 1)]).unwrap(), PROV);
        b.push(2, Query::new(vec![a(1, 1), a(2, 2)]).unwrap(), PROV);
        let ans = answer_bundle(&store, &b).unwrap();
        let ctx = DecodeContext::new(&b, &ans, &[], 2, 1).unwrap();
        let bad = DecodePlan {
            shared: vec![PlanStep {
                kind: StepKind::Peel,
                target: vec![a(2, 1)],
                sources: vec![Source::Answer(QueryId::new(2, 0)), Source::Answer(QueryId::new(1, 0))],
            }],
            per_user: vec![vec![]],
        };
        assert!(matches!(run_shared(&bad, &ctx), Err(Error::UnresolvablePlan(_))));
        let good = DecodePlan {
            shared: vec![PlanStep {
                kind: StepKind::Peel,
                target: vec![a(2, 2)],
                sources: vec![Source::Answer(QueryId::new(2, 0)), Source::Answer(QueryId::new(1, 0))],
            }],
            per_user: vec![vec![]],
        };
        let k = run_shared(&good, &ctx).unwrap();
        assert_eq!(k[&vec![a(2, 2)]], store.block(a(2, 2)).unwrap());
    }
}
