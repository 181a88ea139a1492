//! The multi-user scheme: placement, delivery for `N = K` and `N < K`, and
//! per-user decoding.
//!
//! Every user `lambda` owns one generator block over its cache slot `p_lambda`.
//! With `N = K` every block is a `qset1` call. With `N < K` a base set of `N`
//! users with distinct demands gets `qset1` blocks; every other user `c` gets a
//! `qset2` block over `W_{i,p_{rho^i}} + W_{i,p_c}`, where `rho` aligns each
//! file with a base user and matches demands only on `c`'s own file.

pub mod placement;
pub mod qset;

use itertools::Itertools;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::decode::{self, AnswerSet, DecodeContext};
use crate::error::{Error, Result};
use crate::params::SchemeTables;
use crate::perm::{sample_permutation, PermConstraint, Permutation};
use crate::query::{Generator, Provenance, QueryAtom, QueryBundle, QueryId};
use crate::transcript::{
    shuffle_emission, DecodePlan, DemandVector, PlanStep, RhoMap, Scheme, SessionTranscript, Source, StepKind,
};

pub use placement::{broadcast, placement, Broadcast, CacheContent};
pub use qset::{qset1, qset2, OmegaSpec, SlotQueries};

/// How the base set is picked when several users share a demand.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasePolicy {
    /// The lowest-index user demanding each file.
    #[default]
    LowestIndex,
    /// A uniformly drawn user demanding each file.
    Uniform,
}

/// `out[f-1]` is the base user demanding file `f`.
fn base_of_file(demand: &DemandVector, files: usize, base: &[u32]) -> Result<Vec<u32>> {
    let mut out = vec![0u32; files];
    for &b in base {
        if b == 0 || b as usize > demand.users() {
            return Err(Error::InvalidDemand(format!("base user {b} outside [1, {}]", demand.users())));
        }
        let f = demand.of(b as usize) as usize;
        if out[f - 1] != 0 {
            return Err(Error::InvalidDemand(format!("base users {} and {b} share file {f}", out[f - 1])));
        }
        out[f - 1] = b;
    }
    if let Some(f) = out.iter().position(|&b| b == 0) {
        return Err(Error::Coverage { file: f as u32 + 1 });
    }
    Ok(out)
}

fn require_partial_regime(demand: &DemandVector, files: usize) -> Result<()> {
    if demand.users() <= files {
        return Err(Error::UnsupportedRegime(format!(
            "K = {} with N = {files}: use the N = K generator",
            demand.users()
        )));
    }
    demand.require_cover(files)
}

/// Every valid alignment for non-base user `c`; the constant fallback when
/// only two files exist.
pub fn all_rhos(demand: &DemandVector, files: usize, base: &[u32], c: u32) -> Result<Vec<RhoMap>> {
    let bof = base_of_file(demand, files, base)?;
    let d = demand.of(c as usize);
    let others: Vec<u32> = (1..=files as u32).filter(|&f| f != d).collect();
    if others.len() == 1 {
        return Ok(vec![RhoMap {
            user: c,
            map: vec![bof[d as usize - 1]; files],
            injective: false,
        }]);
    }
    let mut out = Vec::new();
    for img in others.iter().copied().permutations(others.len()) {
        if img.iter().zip(&others).any(|(a, b)| a == b) {
            continue;
        }
        let mut map = vec![0u32; files];
        map[d as usize - 1] = bof[d as usize - 1];
        for (&i, &f) in others.iter().zip(&img) {
            map[i as usize - 1] = bof[f as usize - 1];
        }
        out.push(RhoMap { user: c, map, injective: true });
    }
    Ok(out)
}

/// Uniform draw from [`all_rhos`] by rejection over shuffles.
pub fn sample_rho<R: Rng + ?Sized>(
    demand: &DemandVector,
    files: usize,
    base: &[u32],
    c: u32,
    rng: &mut R,
) -> Result<RhoMap> {
    let bof = base_of_file(demand, files, base)?;
    let d = demand.of(c as usize);
    let others: Vec<u32> = (1..=files as u32).filter(|&f| f != d).collect();
    if others.len() == 1 {
        return Ok(RhoMap {
            user: c,
            map: vec![bof[d as usize - 1]; files],
            injective: false,
        });
    }
    let mut img = others.clone();
    loop {
        img.shuffle(rng);
        if img.iter().zip(&others).all(|(a, b)| a != b) {
            break;
        }
    }
    let mut map = vec![0u32; files];
    map[d as usize - 1] = bof[d as usize - 1];
    for (&i, &f) in others.iter().zip(&img) {
        map[i as usize - 1] = bof[f as usize - 1];
    }
    Ok(RhoMap { user: c, map, injective: true })
}

/// Every base set: one user per file, ascending by user index.
pub fn all_base_sets(demand: &DemandVector, files: usize) -> Result<Vec<Vec<u32>>> {
    demand.require_cover(files)?;
    let choices: Vec<Vec<u32>> = (1..=files as u32)
        .map(|f| (1..=demand.users() as u32).filter(|&u| demand.of(u as usize) == f).collect())
        .collect();
    Ok(choices
        .into_iter()
        .multi_cartesian_product()
        .map(|mut b| {
            b.sort_unstable();
            b
        })
        .collect())
}

pub fn choose_base_and_rho<R: Rng + ?Sized>(
    demand: &DemandVector,
    files: usize,
    policy: BasePolicy,
    rng: &mut R,
) -> Result<(Vec<u32>, Vec<RhoMap>)> {
    require_partial_regime(demand, files)?;
    let mut base = Vec::with_capacity(files);
    for f in 1..=files as u32 {
        let holders: Vec<u32> = (1..=demand.users() as u32).filter(|&u| demand.of(u as usize) == f).collect();
        let pick = match policy {
            BasePolicy::LowestIndex => holders[0],
            BasePolicy::Uniform => *holders.choose(rng).expect("file is covered"),
        };
        base.push(pick);
    }
    base.sort_unstable();
    let mut rho = Vec::new();
    for c in (1..=demand.users() as u32).filter(|c| !base.contains(c)) {
        rho.push(sample_rho(demand, files, &base, c, rng)?);
    }
    Ok((base, rho))
}

fn validate_rho(demand: &DemandVector, files: usize, base: &[u32], rho: &[RhoMap]) -> Result<()> {
    let bof = base_of_file(demand, files, base)?;
    let non_base: Vec<u32> = (1..=demand.users() as u32).filter(|c| !base.contains(c)).collect();
    if rho.len() != non_base.len() || rho.iter().zip(&non_base).any(|(r, &c)| r.user != c) {
        return Err(Error::InvalidDemand("one alignment per non-base user, in user order".into()));
    }
    for r in rho {
        let d = demand.of(r.user as usize);
        let bad = |m: &str| Err(Error::InvalidDemand(format!("alignment of user {}: {m}", r.user)));
        if r.map.len() != files {
            return bad("wrong length");
        }
        if r.map[d as usize - 1] != bof[d as usize - 1] {
            return bad("own file must map to the base user with the same demand");
        }
        if r.injective {
            let mut seen = r.map.clone();
            seen.sort_unstable();
            if seen != base {
                return bad("not a bijection onto the base set");
            }
            for i in (1..=files as u32).filter(|&i| i != d) {
                if demand.of(r.map[i as usize - 1] as usize) == i {
                    return bad("matches a demand outside its own file");
                }
            }
        } else if files != 2 || r.map.iter().any(|&b| b != bof[d as usize - 1]) {
            return bad("constant alignment is only allowed for two files");
        }
    }
    Ok(())
}

fn check_slot_perms(
    tab: &SchemeTables,
    demand: &DemandVector,
    slot_perms: &[Vec<Permutation>],
    tail_fixed: impl Fn(usize) -> bool,
) -> Result<()> {
    if slot_perms.len() != demand.users() {
        return Err(Error::InvalidPermutation(format!(
            "{} permutation sets for {} users",
            slot_perms.len(),
            demand.users()
        )));
    }
    for (c, perms) in slot_perms.iter().enumerate() {
        if perms.len() != tab.files || perms.iter().any(|p| p.len() != tab.subsubfiles) {
            return Err(Error::InvalidPermutation(format!("user {} needs {} permutations of [{}]", c + 1, tab.files, tab.subsubfiles)));
        }
        let d = demand.of(c + 1) as usize;
        if tail_fixed(c + 1) && !perms[d - 1].is_tail_fixed(tab.h) {
            return Err(Error::InvalidPermutation(format!(
                "user {}: permutation of its demanded file must fix positions above H = {}",
                c + 1,
                tab.h
            )));
        }
    }
    Ok(())
}

fn pair(i: u32, ja: u32, jb: u32, x: u32) -> Vec<QueryAtom> {
    let mut f = vec![QueryAtom::new(i, ja, x), QueryAtom::new(i, jb, x)];
    f.sort_unstable();
    f
}

/// `W_{i,j_target}^x` from the pair sum and the known `W_{i,j_known}^x`.
fn split(i: u32, j_known: u32, j_target: u32, x: u32) -> PlanStep {
    PlanStep {
        kind: StepKind::PairSplit,
        target: vec![QueryAtom::new(i, j_target, x)],
        sources: vec![
            Source::Known(pair(i, j_known, j_target, x)),
            Source::Known(vec![QueryAtom::new(i, j_known, x)]),
        ],
    }
}

fn cache_steps(tab: &SchemeTables, user: u32, slot: u32, d: u32) -> Vec<PlanStep> {
    ((tab.h + 1)..=tab.subsubfiles)
        .map(|t| {
            let t = t as u32;
            let mut sources = vec![Source::Cache { user, line: t }];
            sources.extend(
                (1..=tab.files as u32)
                    .filter(|&i| i != d)
                    .map(|i| Source::Known(vec![QueryAtom::new(i, slot, t)])),
            );
            PlanStep {
                kind: StepKind::CacheCombine,
                target: vec![QueryAtom::new(d, slot, t)],
                sources,
            }
        })
        .collect()
}

fn user_steps(
    tab: &SchemeTables,
    demand: &DemandVector,
    user_perm: &Permutation,
    base: Option<&[u32]>,
    rho: &[RhoMap],
    c: u32,
) -> Result<Vec<PlanStep>> {
    let d = demand.of(c as usize);
    let p = user_perm.at(c as usize);
    let n = tab.subsubfiles as u32;
    let h = tab.h as u32;
    let Some(base) = base else {
        return Ok(cache_steps(tab, c, p, d));
    };
    let slot = |u: u32| user_perm.at(u as usize);
    let rho_of = |u: u32| rho.iter().find(|r| r.user == u).expect("every non-base user is aligned");
    let mut steps = Vec::new();
    let non_base: Vec<u32> = rho.iter().map(|r| r.user).collect();
    if base.contains(&c) {
        steps.extend(cache_steps(tab, c, p, d));
    } else {
        let own = rho_of(c);
        for i in (1..=tab.files as u32).filter(|&i| i != d) {
            let r = own.map[i as usize - 1];
            steps.extend((1..=n).map(|x| split(i, slot(r), p, x)));
        }
        steps.extend(cache_steps(tab, c, p, d));
        let twin = slot(own.map[d as usize - 1]);
        steps.extend((1..=h).map(|x| split(d, twin, p, x)));
        steps.extend((h + 1..=n).map(|x| split(d, p, twin, x)));
    }
    for &j in non_base.iter().filter(|&&j| j != c) {
        let r = rho_of(j).map[d as usize - 1];
        steps.extend((1..=n).map(|x| split(d, slot(r), slot(j), x)));
    }
    Ok(steps)
}

fn assemble(
    tab: &SchemeTables,
    demand: &DemandVector,
    user_perm: &Permutation,
    base: Option<&[u32]>,
    rho: &[RhoMap],
    slot_perms: &[Vec<Permutation>],
) -> Result<(QueryBundle, SessionTranscript)> {
    let k = demand.users();
    if user_perm.len() != k {
        return Err(Error::InvalidPermutation(format!("user permutation over [{}], need [{k}]", user_perm.len())));
    }
    let mut bundle = QueryBundle::empty(tab.databases);
    let mut shared = Vec::new();
    for lambda in 1..=k as u32 {
        let p = user_perm.at(lambda as usize);
        let perms = &slot_perms[lambda as usize - 1];
        let is_base = base.is_none_or(|b| b.contains(&lambda));
        let (out, generator) = if is_base {
            (qset1(tab, p, perms, demand.of(lambda as usize))?, Generator::QSet1)
        } else {
            let r = rho.iter().find(|r| r.user == lambda).expect("validated");
            let omega = OmegaSpec {
                pairs: r.map.iter().map(|&b| (user_perm.at(b as usize), p)).collect(),
            };
            (qset2(tab, &omega, perms)?, Generator::QSet2)
        };
        let prov = Provenance {
            user: lambda,
            subfile: p,
            generator,
        };
        let offsets: Vec<usize> = bundle.per_db.iter().map(Vec::len).collect();
        for (s, list) in out.per_db.into_iter().enumerate() {
            for q in list {
                bundle.push(s + 1, q, prov);
            }
        }
        for peel in out.peels {
            let id = QueryId::new(peel.db as u32, (offsets[peel.db - 1] + peel.idx) as u32);
            let mut sources = vec![Source::Answer(id)];
            sources.extend(peel.known.into_iter().map(Source::Known));
            shared.push(PlanStep {
                kind: StepKind::Peel,
                target: peel.target,
                sources,
            });
        }
    }
    let per_user = (1..=k as u32)
        .map(|c| user_steps(tab, demand, user_perm, base, rho, c))
        .collect::<Result<Vec<_>>>()?;
    let tr = SessionTranscript {
        scheme: Scheme::Mupir,
        databases: tab.databases,
        files: tab.files,
        users: k,
        seed: 0,
        user_perm: Some(user_perm.clone()),
        slot_perms: slot_perms.to_vec(),
        demand: demand.clone(),
        base: base.map(<[u32]>::to_vec),
        rho: rho.to_vec(),
        shuffle_seed: None,
        plan: DecodePlan { shared, per_user },
    };
    Ok((bundle, tr))
}

/// Delivery for `N = K`: one `qset1` block per user.
pub fn generate_alg2(
    tab: &SchemeTables,
    demand: &DemandVector,
    user_perm: &Permutation,
    slot_perms: &[Vec<Permutation>],
) -> Result<(QueryBundle, SessionTranscript)> {
    if demand.users() != tab.files {
        return Err(Error::UnsupportedRegime(format!(
            "this generator needs K = N = {}, got K = {}",
            tab.files,
            demand.users()
        )));
    }
    demand.require_distinct()?;
    check_slot_perms(tab, demand, slot_perms, |_| true)?;
    assemble(tab, demand, user_perm, None, &[], slot_perms)
}

/// Delivery for `N < K`: `qset1` blocks for the base set, `qset2` blocks for
/// everyone else.
pub fn generate_alg3(
    tab: &SchemeTables,
    demand: &DemandVector,
    user_perm: &Permutation,
    base: &[u32],
    rho: &[RhoMap],
    slot_perms: &[Vec<Permutation>],
) -> Result<(QueryBundle, SessionTranscript)> {
    require_partial_regime(demand, tab.files)?;
    let mut sorted = base.to_vec();
    sorted.sort_unstable();
    if sorted != base {
        return Err(Error::InvalidDemand("base set must be ascending".into()));
    }
    validate_rho(demand, tab.files, base, rho)?;
    check_slot_perms(tab, demand, slot_perms, |c| base.contains(&(c as u32)))?;
    assemble(tab, demand, user_perm, Some(base), rho, slot_perms)
}

/// Draws every random choice of one session from `rng`, generates, and
/// shuffles the emission order.
pub fn new_session<R: Rng + ?Sized>(
    databases: usize,
    files: usize,
    demand: &DemandVector,
    policy: BasePolicy,
    seed: u64,
    rng: &mut R,
) -> Result<(QueryBundle, SessionTranscript)> {
    let tab = SchemeTables::new(databases, files)?;
    let k = demand.users();
    if files < 2 {
        return Err(Error::InvalidDimension(format!("N = {files}, need N >= 2")));
    }
    if files > k {
        return Err(Error::UnsupportedRegime(format!("N = {files} > K = {k}; the scheme needs N <= K")));
    }
    let user_perm = sample_permutation(k, rng, PermConstraint::Free)?;
    let (base, rho) = if files == k {
        demand.require_distinct()?;
        (None, Vec::new())
    } else {
        let (b, r) = choose_base_and_rho(demand, files, policy, rng)?;
        (Some(b), r)
    };
    let mut slot_perms = Vec::with_capacity(k);
    for c in 1..=k {
        let tail = base.as_ref().is_none_or(|b| b.contains(&(c as u32)));
        let d = demand.of(c) as usize;
        let perms = (1..=files)
            .map(|i| {
                let cons = if tail && i == d {
                    PermConstraint::TailFixed(tab.h)
                } else {
                    PermConstraint::Free
                };
                sample_permutation(tab.subsubfiles, rng, cons)
            })
            .collect::<Result<Vec<_>>>()?;
        slot_perms.push(perms);
    }
    let shuffle_seed: u64 = rng.random();
    let (mut bundle, mut tr) = match &base {
        None => generate_alg2(&tab, demand, &user_perm, &slot_perms)?,
        Some(b) => generate_alg3(&tab, demand, &user_perm, b, &rho, &slot_perms)?,
    };
    shuffle_emission(&mut bundle, &mut tr.plan, shuffle_seed);
    tr.seed = seed;
    tr.shuffle_seed = Some(shuffle_seed);
    Ok((bundle, tr))
}

pub fn replay(tr: &SessionTranscript) -> Result<QueryBundle> {
    let tab = SchemeTables::new(tr.databases, tr.files)?;
    let user_perm = tr
        .user_perm
        .as_ref()
        .ok_or_else(|| Error::InvalidPermutation("transcript has no user permutation".into()))?;
    let (mut bundle, mut fresh) = match &tr.base {
        None => generate_alg2(&tab, &tr.demand, user_perm, &tr.slot_perms)?,
        Some(b) => generate_alg3(&tab, &tr.demand, user_perm, b, &tr.rho, &tr.slot_perms)?,
    };
    if let Some(seed) = tr.shuffle_seed {
        shuffle_emission(&mut bundle, &mut fresh.plan, seed);
    }
    Ok(bundle)
}

/// Recovers user `u`'s demanded file (`K * S^(N-1)` subsubfiles in
/// `(subfile, subsub)` order) and checks it against the GF(2) solver.
pub fn decode_user(
    u: usize,
    answers: &AnswerSet,
    bundle: &QueryBundle,
    tr: &SessionTranscript,
    caches: &[CacheContent],
) -> Result<Vec<Block>> {
    let ctx = DecodeContext::new(bundle, answers, caches, tr.files, tr.users)?;
    let shared = decode::run_shared(&tr.plan, &ctx)?;
    decode_with(&ctx, &shared, u, tr)
}

fn decode_with(ctx: &DecodeContext<'_>, shared: &decode::Knowledge, u: usize, tr: &SessionTranscript) -> Result<Vec<Block>> {
    if u == 0 || u > tr.users {
        return Err(Error::InvalidDemand(format!("user {u} outside [1, {}]", tr.users)));
    }
    let n = crate::subpacketization(tr.databases, tr.files)?;
    let d = tr.demand.of(u);
    let peeled = decode::collect_user(&tr.plan, ctx, shared, u, d, n)?;
    let solved = decode::oracle_user(ctx, Some(u as u32), d, n)?;
    decode::compare(&peeled, &solved)?;
    Ok(peeled)
}

/// [`decode_user`] for every user, sharing the answer-only steps.
pub fn decode_all(
    answers: &AnswerSet,
    bundle: &QueryBundle,
    tr: &SessionTranscript,
    caches: &[CacheContent],
) -> Result<Vec<Vec<Block>>> {
    let ctx = DecodeContext::new(bundle, answers, caches, tr.files, tr.users)?;
    let shared = decode::run_shared(&tr.plan, &ctx)?;
    (1..=tr.users).map(|u| decode_with(&ctx, &shared, u, tr)).collect()
}
