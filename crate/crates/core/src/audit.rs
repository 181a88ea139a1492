//! Structural symmetry checks, rate counting and exhaustive distribution
//! oracles.
//!
//! [`check_structure`] looks only at what the databases receive plus the
//! generator provenance: every generator block must contain each `k`-subset of
//! files exactly as often as its repetition table says, with well-formed
//! atoms. [`check_session`] adds the transcript-side checks (replay and a
//! symbolic run of the decode plan), which together catch any single-query
//! mutation. [`demand_distribution_oracle`] enumerates all randomness of a
//! tiny instance and compares the per-database distributions of
//! [`canonical_db`] keys across demand vectors.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mupir::{self, BasePolicy};
use crate::params::{format_rational, Rational, SchemeTables};
use crate::perm::Permutation;
use crate::pir;
use crate::query::{canonical_db, Generator, Provenance, Query, QueryAtom, QueryBundle, QueryId};
use crate::transcript::{DemandVector, RhoMap, Scheme, SessionTranscript, Source};

/// Exhaustive enumeration refuses instances with more assignments than this.
pub const ORACLE_LIMIT: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub pass: bool,
    pub first_violation: Option<String>,
}

impl Verdict {
    fn from(check: &str, violations: &[String]) -> Self {
        Verdict {
            check: check.to_string(),
            pass: violations.is_empty(),
            first_violation: violations.first().cloned(),
        }
    }
}

/// One cell of a multiplicity table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KSumCell {
    pub files: Vec<u32>,
    pub expected: usize,
    pub found: usize,
}

/// Tables of one generator block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockTable {
    pub user: u32,
    pub subfile: u32,
    pub generator: Generator,
    /// `multiplicity[s-1]`: one cell per non-empty subset of files.
    pub multiplicity: Vec<Vec<KSumCell>>,
    /// `file_refs[s-1][i-1]`: queries of the block in database `s` that touch file `i`.
    pub file_refs: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub databases: usize,
    pub files: usize,
    pub users: usize,
    pub blocks: Vec<BlockTable>,
    pub per_db_counts: Vec<usize>,
    /// Answer blocks over file size, `"num/den"`.
    pub rate: String,
    pub verdicts: Vec<Verdict>,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn first_failure(&self) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| !v.pass)
    }
}

/// Downloaded blocks over file size: `|bundle| / (K * S^(N-1))`.
pub fn count_rate(bundle: &QueryBundle, databases: usize, files: usize, users: usize) -> Result<Rational> {
    let n = crate::subpacketization(databases, files)?;
    if users == 0 {
        return Err(Error::InvalidDimension("K = 0".into()));
    }
    Ok(Rational::new(
        BigInt::from(bundle.total_queries()),
        BigInt::from(users) * BigInt::from(n),
    ))
}

fn expected_reps(tab: &SchemeTables, generator: Generator, s: usize, k: usize) -> usize {
    match generator {
        Generator::Alg1 => tab.phi(s, k),
        Generator::QSet1 => tab.psi(s, k),
        Generator::QSet2 => k * tab.phi(s, k),
    }
}

/// Groups query indices by generator block, keyed by user.
fn blocks_of(bundle: &QueryBundle) -> BTreeMap<u32, (Provenance, Vec<Vec<usize>>, bool)> {
    let mut out: BTreeMap<u32, (Provenance, Vec<Vec<usize>>, bool)> = BTreeMap::new();
    for (s, provs) in bundle.provenance.iter().enumerate() {
        for (pos, p) in provs.iter().enumerate() {
            let e = out
                .entry(p.user)
                .or_insert_with(|| (*p, vec![Vec::new(); bundle.databases()], true));
            if e.0 != *p {
                e.2 = false;
            }
            e.1[s].push(pos);
        }
    }
    out
}

/// Checks the atom layout of one query against its block.
fn atom_shape(q: &Query, prov: &Provenance) -> Option<String> {
    let mut seen = BTreeSet::new();
    if let Some(a) = q.atoms.iter().find(|a| !seen.insert(**a)) {
        return Some(format!("{a} repeated inside one query"));
    }
    let by_file = q.atoms.iter().into_group_map_by(|a| a.file);
    for (f, atoms) in by_file {
        match prov.generator {
            Generator::Alg1 | Generator::QSet1 => {
                if atoms.len() != 1 {
                    return Some(format!("file {f} appears {} times", atoms.len()));
                }
                if atoms[0].subfile != prov.subfile {
                    return Some(format!("{} outside block subfile {}", atoms[0], prov.subfile));
                }
            }
            Generator::QSet2 => {
                if atoms.len() != 2 {
                    return Some(format!("file {f} appears {} times in a pair query", atoms.len()));
                }
                let (a, b) = (atoms[0], atoms[1]);
                if a.subsub != b.subsub || a.subfile == b.subfile {
                    return Some(format!("{a} and {b} do not form a pair sum"));
                }
                if a.subfile != prov.subfile && b.subfile != prov.subfile {
                    return Some(format!("pair {a} + {b} misses block subfile {}", prov.subfile));
                }
            }
        }
    }
    None
}

/// Symmetry checks on the bundle alone.
pub fn check_structure(bundle: &QueryBundle, files: usize, users: usize) -> Result<AuditReport> {
    let databases = bundle.databases();
    let tab = SchemeTables::new(databases, files)?;
    let n = tab.subsubfiles;
    let subfiles = users;
    let mut shape = Vec::new();
    let mut mult = Vec::new();
    let mut atoms_v = Vec::new();
    let mut no_repeat = Vec::new();
    let mut per_file = Vec::new();

    if let Err(e) = bundle.validate(files, subfiles, n) {
        shape.push(e.to_string());
    }
    let blocks = blocks_of(bundle);
    let users_seen: Vec<u32> = blocks.keys().copied().collect();
    if users_seen != (1..=users as u32).collect::<Vec<_>>() {
        shape.push(format!("generator blocks for users {users_seen:?}, expected 1..={users}"));
    }
    let mut slots: Vec<u32> = blocks.values().map(|b| b.0.subfile).collect();
    slots.sort_unstable();
    if slots != (1..=blocks.len() as u32).collect::<Vec<_>>() {
        shape.push(format!("block subfiles {slots:?} are not a permutation"));
    }
    let count = |g: Generator| blocks.values().filter(|b| b.0.generator == g).count();
    let layout_ok = if users == 1 && files >= 1 && count(Generator::Alg1) == 1 {
        true
    } else if users == files {
        count(Generator::QSet1) == users
    } else {
        users > files && count(Generator::QSet1) == files && count(Generator::QSet2) == users - files
    };
    if !layout_ok {
        shape.push(format!(
            "generator mix alg1={} qset1={} qset2={} does not fit N = {files}, K = {users}",
            count(Generator::Alg1),
            count(Generator::QSet1),
            count(Generator::QSet2)
        ));
    }

    let mut tables = Vec::new();
    for (user, (prov, idx, consistent)) in &blocks {
        if !consistent {
            shape.push(format!("user {user} has queries under two provenances"));
        }
        let mut multiplicity = Vec::with_capacity(databases);
        let mut file_refs = Vec::with_capacity(databases);
        for s in 1..=databases {
            let queries: Vec<&Query> = idx[s - 1].iter().map(|&p| &bundle.per_db[s - 1][p]).collect();
            let mut found: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
            let mut refs = vec![0usize; files];
            let mut atoms_here = BTreeSet::new();
            for (q, &p) in queries.iter().zip(&idx[s - 1]) {
                *found.entry(q.files()).or_default() += 1;
                for f in q.files() {
                    if let Some(r) = refs.get_mut(f as usize - 1) {
                        *r += 1;
                    }
                }
                if let Some(msg) = atom_shape(q, prov) {
                    atoms_v.push(format!("database {s}, query {p}: {msg}"));
                }
                if prov.generator == Generator::Alg1 {
                    for a in &q.atoms {
                        if !atoms_here.insert(*a) {
                            no_repeat.push(format!("database {s}: {a} requested twice"));
                        }
                    }
                }
            }
            let mut cells = Vec::new();
            for k in 1..=files {
                let expected = expected_reps(&tab, prov.generator, s, k);
                for subset in (1..=files as u32).combinations(k) {
                    let got = found.remove(&subset).unwrap_or(0);
                    if got != expected {
                        mult.push(format!(
                            "user {user}, database {s}, k = {k}, files {subset:?}: {got} queries, expected {expected}"
                        ));
                    }
                    cells.push(KSumCell {
                        files: subset,
                        expected,
                        found: got,
                    });
                }
            }
            for (subset, got) in found {
                mult.push(format!("user {user}, database {s}: unexpected type {subset:?} x{got}"));
            }
            if refs.iter().any(|&r| r != refs[0]) {
                per_file.push(format!("user {user}, database {s}: file reference counts {refs:?}"));
            }
            multiplicity.push(cells);
            file_refs.push(refs);
        }
        tables.push(BlockTable {
            user: *user,
            subfile: prov.subfile,
            generator: prov.generator,
            multiplicity,
            file_refs,
        });
    }

    let rate = count_rate(bundle, databases, files, users)?;
    Ok(AuditReport {
        databases,
        files,
        users,
        blocks: tables,
        per_db_counts: bundle.per_db_counts(),
        rate: format_rational(&rate),
        verdicts: vec![
            Verdict::from("shape", &shape),
            Verdict::from("multiplicity", &mult),
            Verdict::from("atoms", &atoms_v),
            Verdict::from("no_repeat", &no_repeat),
            Verdict::from("per_file", &per_file),
        ],
    })
}

/// Runs the decode plan on forms only: every step must produce its target and
/// every user must end up with its whole demanded file.
pub fn check_plan(bundle: &QueryBundle, tr: &SessionTranscript) -> Vec<String> {
    let n = match crate::subpacketization(tr.databases, tr.files) {
        Ok(n) => n,
        Err(e) => return vec![e.to_string()],
    };
    let subfiles = tr.users.max(1);
    let mut out = Vec::new();
    let run = |steps: &[crate::transcript::PlanStep], known: &mut BTreeSet<Vec<QueryAtom>>, out: &mut Vec<String>| {
        for (i, step) in steps.iter().enumerate() {
            let mut form = BTreeSet::new();
            let mut toggle = |atoms: &[QueryAtom]| {
                for a in atoms {
                    if !form.remove(a) {
                        form.insert(*a);
                    }
                }
            };
            for src in &step.sources {
                match src {
                    Source::Answer(id) => match bundle.get(*id) {
                        Some(q) => toggle(&q.atoms),
                        None => {
                            out.push(format!("step {i}: missing query {id:?}"));
                            return;
                        }
                    },
                    Source::Known(f) => {
                        if !known.contains(f) {
                            out.push(format!("step {i}: {f:?} used before it is known"));
                            return;
                        }
                        toggle(f);
                    }
                    Source::Cache { user, line } => {
                        let slot = tr.slot_of(*user as usize) as u32;
                        let f: Vec<QueryAtom> = (1..=tr.files as u32).map(|i| QueryAtom::new(i, slot, *line)).collect();
                        toggle(&f);
                    }
                }
            }
            let got: Vec<QueryAtom> = form.into_iter().collect();
            if got != step.target {
                out.push(format!("step {i} yields {got:?}, plan says {:?}", step.target));
                return;
            }
            known.insert(got);
        }
    };
    let mut shared = BTreeSet::new();
    run(&tr.plan.shared, &mut shared, &mut out);
    if !out.is_empty() {
        return out;
    }
    for u in 1..=tr.users {
        let mut known = shared.clone();
        let Some(steps) = tr.plan.per_user.get(u - 1) else {
            out.push(format!("no steps for user {u}"));
            continue;
        };
        run(steps, &mut known, &mut out);
        let d = tr.demand.of(u);
        for j in 1..=subfiles as u32 {
            for x in 1..=n as u32 {
                if !known.contains(&vec![QueryAtom::new(d, j, x)]) {
                    out.push(format!("user {u} never learns {}", QueryAtom::new(d, j, x)));
                    return out;
                }
            }
        }
    }
    out
}

/// [`check_structure`] plus replay from the transcript and a symbolic plan run.
pub fn check_session(bundle: &QueryBundle, tr: &SessionTranscript) -> Result<AuditReport> {
    let mut report = check_structure(bundle, tr.files, tr.users)?;
    let replay = match tr.replay() {
        Ok(b) if b == *bundle => vec![],
        Ok(b) => {
            let diff = b
                .ids()
                .find(|&id| bundle.get(id) != b.get(id))
                .map_or_else(|| "lengths differ".to_string(), |id| format!("first difference at {id:?}"));
            vec![format!("bundle differs from the transcript replay: {diff}")]
        }
        Err(e) => vec![format!("replay failed: {e}")],
    };
    report.verdicts.push(Verdict::from("replay", &replay));
    report.verdicts.push(Verdict::from("plan", &check_plan(bundle, tr)));
    Ok(report)
}

/// A single-query edit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    Drop(QueryId),
    Duplicate(QueryId),
    ReplaceAtom { id: QueryId, index: usize, atom: QueryAtom },
}

pub fn apply_mutation(bundle: &QueryBundle, m: &Mutation) -> Result<QueryBundle> {
    let mut b = bundle.clone();
    let check = |id: QueryId| {
        bundle
            .get(id)
            .map(|_| ())
            .ok_or_else(|| Error::IndexOutOfRange(format!("no query {id:?}")))
    };
    match m {
        Mutation::Drop(id) => {
            check(*id)?;
            b.per_db[id.db as usize - 1].remove(id.pos as usize);
            b.provenance[id.db as usize - 1].remove(id.pos as usize);
        }
        Mutation::Duplicate(id) => {
            check(*id)?;
            let q = bundle.get(*id).cloned().expect("checked");
            let p = *bundle.provenance_of(*id).expect("checked");
            b.push(id.db as usize, q, p);
        }
        Mutation::ReplaceAtom { id, index, atom } => {
            check(*id)?;
            let q = &mut b.per_db[id.db as usize - 1][id.pos as usize];
            let slot = q
                .atoms
                .get_mut(*index)
                .ok_or_else(|| Error::IndexOutOfRange(format!("atom {index} of {id:?}")))?;
            *slot = *atom;
        }
    }
    Ok(b)
}

/// A uniformly chosen edit kind on a uniformly chosen query; replacements
/// pick a different in-range atom.
pub fn random_mutation<R: Rng + ?Sized>(
    bundle: &QueryBundle,
    files: usize,
    subfiles: usize,
    subsubfiles: usize,
    rng: &mut R,
) -> Result<Mutation> {
    let ids: Vec<QueryId> = bundle.ids().collect();
    if ids.is_empty() {
        return Err(Error::InvalidDimension("empty bundle".into()));
    }
    let id = ids[rng.random_range(0..ids.len())];
    Ok(match rng.random_range(0..3) {
        0 => Mutation::Drop(id),
        1 => Mutation::Duplicate(id),
        _ => {
            let q = bundle.get(id).expect("listed id");
            let index = rng.random_range(0..q.len());
            let old = q.atoms[index];
            if files * subfiles * subsubfiles < 2 {
                return Ok(Mutation::Drop(id));
            }
            let atom = loop {
                let a = QueryAtom::new(
                    rng.random_range(1..=files as u32),
                    rng.random_range(1..=subfiles as u32),
                    rng.random_range(1..=subsubfiles as u32),
                );
                if a != old {
                    break a;
                }
            };
            Mutation::ReplaceAtom { id, index, atom }
        }
    })
}

/// Exact distribution of canonical database views.
pub type Distribution = BTreeMap<Vec<Vec<QueryAtom>>, Rational>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyFinding {
    /// `None` branches uniformly over every valid base set.
    pub base_policy: Option<BasePolicy>,
    pub equal: bool,
    pub first_difference: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub scheme: Scheme,
    pub databases: usize,
    pub files: usize,
    pub users: usize,
    pub demand_vectors: Vec<DemandVector>,
    /// Randomness assignments enumerated per policy, as a decimal string.
    pub assignments: String,
    /// Support size of each database's distribution for the first demand vector.
    pub support: Vec<usize>,
    /// Verdict under uniform branching over base sets and alignments.
    pub equal: bool,
    pub first_difference: Option<String>,
    /// The same comparison under the deterministic lowest-index base policy,
    /// recorded as a finding. Empty for the single-user scheme and for `N = K`.
    pub policy_findings: Vec<PolicyFinding>,
}

/// Every permutation of `[n]` fixing all positions above `fixed_above`.
fn perms_with_tail(n: usize, fixed_above: usize) -> Vec<Permutation> {
    let h = fixed_above.min(n);
    (1..=h as u32)
        .permutations(h)
        .map(|head| {
            let mut img = head;
            img.extend(h as u32 + 1..=n as u32);
            Permutation::from_images(img).expect("valid permutation")
        })
        .collect()
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, b| a * BigInt::from(b))
}

fn valid_demands(files: usize, users: usize, scheme: Scheme) -> Vec<DemandVector> {
    match scheme {
        Scheme::Single => (1..=files as u32)
            .map(|d| DemandVector::new(vec![d], files).expect("in range"))
            .collect(),
        Scheme::Mupir => (0..users)
            .map(|_| 1..=files as u32)
            .multi_cartesian_product()
            .filter_map(|v| DemandVector::new(v, files).ok())
            .filter(|d| {
                if users == files {
                    d.require_distinct().is_ok()
                } else {
                    d.require_cover(files).is_ok()
                }
            })
            .collect(),
    }
}

fn add(dist: &mut [Distribution], bundle: &QueryBundle, w: &Rational) {
    for (s, list) in bundle.per_db.iter().enumerate() {
        *dist[s].entry(canonical_db(list)).or_insert_with(Rational::zero) += w;
    }
}

fn compare(dists: &[(DemandVector, Vec<Distribution>)]) -> Option<String> {
    let (d0, first) = &dists[0];
    for (d, other) in &dists[1..] {
        for (s, (a, b)) in first.iter().zip(other).enumerate() {
            if a != b {
                let key = a
                    .iter()
                    .find(|(k, v)| b.get(*k) != Some(*v))
                    .map(|(k, _)| k.clone())
                    .or_else(|| b.keys().find(|k| !a.contains_key(*k)).cloned());
                let show = |dist: &Distribution| {
                    key.as_ref()
                        .and_then(|k| dist.get(k))
                        .map_or("0".to_string(), format_rational)
                };
                return Some(format!(
                    "database {}: a view has probability {} under {:?} but {} under {:?}",
                    s + 1,
                    show(a),
                    d0.demands,
                    show(b),
                    d.demands
                ));
            }
        }
    }
    None
}

/// A base set, one alignment per non-base user, and the branch probability.
type Branch = (Vec<u32>, Vec<RhoMap>, Rational);

fn branches(demand: &DemandVector, files: usize, policy: Option<BasePolicy>) -> Result<Vec<Branch>> {
    let all = mupir::all_base_sets(demand, files)?;
    let bases: Vec<Vec<u32>> = match policy {
        None | Some(BasePolicy::Uniform) => all,
        Some(BasePolicy::LowestIndex) => vec![all.into_iter().min().expect("a covering demand has a base set")],
    };
    let nb = BigInt::from(bases.len());
    let mut out = Vec::new();
    for base in bases {
        let non_base: Vec<u32> = (1..=demand.users() as u32).filter(|c| !base.contains(c)).collect();
        let options = non_base
            .iter()
            .map(|&c| mupir::all_rhos(demand, files, &base, c))
            .collect::<Result<Vec<_>>>()?;
        let denom = options.iter().fold(nb.clone(), |a, o| a * BigInt::from(o.len()));
        let w = Rational::new(BigInt::one(), denom);
        if options.is_empty() {
            out.push((base.clone(), Vec::new(), w.clone()));
            continue;
        }
        for combo in options.into_iter().multi_cartesian_product() {
            out.push((base.clone(), combo, w.clone()));
        }
    }
    Ok(out)
}

fn slot_perm_choices(tab: &SchemeTables, demand: &DemandVector, tail: impl Fn(usize) -> bool) -> Vec<Vec<Vec<Permutation>>> {
    // per user, the list of admissible permutation tuples over files
    (1..=demand.users())
        .map(|c| {
            let d = demand.of(c) as usize;
            (1..=tab.files)
                .map(|i| {
                    if tail(c) && i == d {
                        perms_with_tail(tab.subsubfiles, tab.h)
                    } else {
                        perms_with_tail(tab.subsubfiles, tab.subsubfiles)
                    }
                })
                .multi_cartesian_product()
                .collect()
        })
        .collect()
}

fn mupir_assignments(tab: &SchemeTables, users: usize, demand: &DemandVector, policy: Option<BasePolicy>) -> Result<BigInt> {
    let files = tab.files;
    let n = tab.subsubfiles;
    let per_tail = factorial(tab.h) * factorial(n).pow(files as u32 - 1);
    let per_free = factorial(n).pow(files as u32);
    let perm_tuples = per_tail.pow(files as u32) * per_free.pow((users - files) as u32);
    let nbranches = if users == files {
        BigInt::one()
    } else {
        BigInt::from(branches(demand, files, policy)?.len())
    };
    Ok(factorial(users) * nbranches * perm_tuples)
}

fn guard(total: &BigInt) -> Result<()> {
    if *total > BigInt::from(ORACLE_LIMIT) {
        return Err(Error::TooLarge {
            assignments: total.to_string(),
            limit: ORACLE_LIMIT,
        });
    }
    Ok(())
}

fn mupir_distribution(tab: &SchemeTables, demand: &DemandVector, policy: Option<BasePolicy>) -> Result<Vec<Distribution>> {
    let users = demand.users();
    let files = tab.files;
    let mut dist = vec![Distribution::new(); tab.databases];
    let user_perms: Vec<Permutation> = perms_with_tail(users, users);
    let np = Rational::from_integer(BigInt::from(user_perms.len()));
    if users == files {
        let choices = slot_perm_choices(tab, demand, |_| true);
        let count: usize = choices.iter().map(Vec::len).product();
        let w = Rational::one() / (np * Rational::from_integer(BigInt::from(count)));
        for p in &user_perms {
            for tuple in choices.iter().multi_cartesian_product() {
                let slot_perms: Vec<Vec<Permutation>> = tuple.into_iter().cloned().collect();
                let (b, _) = mupir::generate_alg2(tab, demand, p, &slot_perms)?;
                add(&mut dist, &b, &w);
            }
        }
        return Ok(dist);
    }
    for (base, rho, wb) in branches(demand, files, policy)? {
        let choices = slot_perm_choices(tab, demand, |c| base.contains(&(c as u32)));
        let count: usize = choices.iter().map(Vec::len).product();
        let w = wb / (np.clone() * Rational::from_integer(BigInt::from(count)));
        for p in &user_perms {
            for tuple in choices.iter().multi_cartesian_product() {
                let slot_perms: Vec<Vec<Permutation>> = tuple.into_iter().cloned().collect();
                let (b, _) = mupir::generate_alg3(tab, demand, p, &base, &rho, &slot_perms)?;
                add(&mut dist, &b, &w);
            }
        }
    }
    Ok(dist)
}

/// Enumerates all randomness of a tiny instance and compares, per database,
/// the exact distributions of canonical views across every valid demand
/// vector. `users` is ignored for the single-user scheme.
pub fn demand_distribution_oracle(databases: usize, files: usize, users: usize, scheme: Scheme) -> Result<DistributionReport> {
    let tab = SchemeTables::new(databases, files)?;
    let users = if scheme == Scheme::Single { 1 } else { users };
    if scheme == Scheme::Mupir && (files < 2 || files > users) {
        return Err(Error::UnsupportedRegime(format!("N = {files}, K = {users}; need 2 <= N <= K")));
    }
    let demands = valid_demands(files, users, scheme);
    let n = tab.subsubfiles;

    if scheme == Scheme::Single {
        let total = factorial(n).pow(files as u32) * BigInt::from(demands.len());
        guard(&total)?;
        let all = perms_with_tail(n, n);
        let count = all.len().pow(files as u32);
        let w = Rational::new(BigInt::one(), BigInt::from(count));
        let mut dists = Vec::new();
        for d in &demands {
            let mut dist = vec![Distribution::new(); databases];
            for perms in (0..files).map(|_| all.iter().cloned()).multi_cartesian_product() {
                let (b, _) = pir::generate_alg1(databases, files, &perms, d.of(1))?;
                add(&mut dist, &b, &w);
            }
            dists.push((d.clone(), dist));
        }
        let diff = compare(&dists);
        return Ok(DistributionReport {
            scheme,
            databases,
            files,
            users,
            demand_vectors: demands,
            assignments: total.to_string(),
            support: dists[0].1.iter().map(BTreeMap::len).collect(),
            equal: diff.is_none(),
            first_difference: diff,
            policy_findings: Vec::new(),
        });
    }

    let mut total = BigInt::zero();
    for d in &demands {
        total += mupir_assignments(&tab, users, d, None)?;
    }
    guard(&total)?;
    let mut dists = Vec::new();
    for d in &demands {
        dists.push((d.clone(), mupir_distribution(&tab, d, None)?));
    }
    let diff = compare(&dists);
    let mut findings = Vec::new();
    if users > files {
        let mut lowest = Vec::new();
        for d in &demands {
            lowest.push((d.clone(), mupir_distribution(&tab, d, Some(BasePolicy::LowestIndex))?));
        }
        let ldiff = compare(&lowest);
        findings.push(PolicyFinding {
            base_policy: Some(BasePolicy::LowestIndex),
            equal: ldiff.is_none(),
            first_difference: ldiff,
        });
        findings.push(PolicyFinding {
            base_policy: None,
            equal: diff.is_none(),
            first_difference: diff.clone(),
        });
    }
    Ok(DistributionReport {
        scheme,
        databases,
        files,
        users,
        demand_vectors: demands,
        assignments: total.to_string(),
        support: dists[0].1.iter().map(BTreeMap::len).collect(),
        equal: diff.is_none(),
        first_difference: diff,
        policy_findings: findings,
    })
}

/// Probability mass of a distribution; exactly one for a complete enumeration.
pub fn total_mass(dist: &Distribution) -> Rational {
    dist.values().fold(Rational::zero(), |a, b| a + b)
}

/// Converts a count to `u64` when it fits.
pub fn assignments_u64(report: &DistributionReport) -> Option<u64> {
    report.assignments.parse::<BigInt>().ok()?.to_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mupir::new_session;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pir_bundle(s: usize, n: usize, d: u32, seed: u64) -> (QueryBundle, SessionTranscript) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pir::new_session(s, n, d, seed, &mut rng).unwrap()
    }

    #[test]
    fn single_user_bundles_pass() {
        for d in 1..=3 {
            let (b, tr) = pir_bundle(4, 3, d, 1);
            let r = check_session(&b, &tr).unwrap();
            assert!(r.pass(), "{:?}", r.first_failure());
            assert_eq!(r.rate, "21/16");
            let three = r.blocks[0].multiplicity[0].iter().find(|c| c.files.len() == 3).unwrap();
            assert_eq!(three.found, 3);
        }
    }

    #[test]
    fn table_bundle_by_hand() {
        // 4 databases, 3 files (a, b, c), demand on a, positions as images
        let a = |x| QueryAtom::new(1, 1, x);
        let b = |x| QueryAtom::new(2, 1, x);
        let c = |x| QueryAtom::new(3, 1, x);
        let rows: Vec<Vec<Vec<QueryAtom>>> = vec![
            vec![
                vec![a(1)],
                vec![b(1)],
                vec![c(1)],
                vec![a(8), b(2), c(2)],
                vec![a(9), b(3), c(3)],
                vec![a(10), b(4), c(4)],
            ],
            vec![
                vec![a(2), b(1)],
                vec![a(3), c(1)],
                vec![b(2), c(2)],
                vec![a(11), b(3), c(3)],
                vec![a(12), b(4), c(4)],
            ],
            vec![
                vec![a(4), b(1)],
                vec![a(5), c(1)],
                vec![b(3), c(3)],
                vec![a(13), b(2), c(2)],
                vec![a(14), b(4), c(4)],
            ],
            vec![
                vec![a(6), b(1)],
                vec![a(7), c(1)],
                vec![b(4), c(4)],
                vec![a(15), b(2), c(2)],
                vec![a(16), b(3), c(3)],
            ],
        ];
        let prov = Provenance {
            user: 1,
            subfile: 1,
            generator: Generator::Alg1,
        };
        let mut bundle = QueryBundle::empty(4);
        for (s, list) in rows.into_iter().enumerate() {
            for q in list {
                bundle.push(s + 1, Query::new(q).unwrap(), prov);
            }
        }
        let r = check_structure(&bundle, 3, 1).unwrap();
        assert!(r.pass(), "{:?}", r.first_failure());
        let three = r.blocks[0].multiplicity[0].iter().find(|c| c.files.len() == 3).unwrap();
        assert_eq!((three.expected, three.found), (3, 3));
        assert_eq!(r.rate, "21/16");
    }

    #[test]
    fn multi_user_sessions_pass() {
        for (s, n, theta) in [(3usize, 3usize, vec![2u32, 1, 3]), (3, 3, vec![2, 3, 2, 1, 3]), (2, 2, vec![1, 1, 2])] {
            let demand = DemandVector::new(theta.clone(), n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let (b, tr) = new_session(s, n, &demand, BasePolicy::LowestIndex, 9, &mut rng).unwrap();
            let r = check_session(&b, &tr).unwrap();
            assert!(r.pass(), "{theta:?}: {:?}", r.first_failure());
        }
    }

    #[test]
    fn rates_of_example_sessions() {
        let demand = DemandVector::new(vec![2, 3, 2, 1, 3], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (b, _) = new_session(3, 3, &demand, BasePolicy::LowestIndex, 0, &mut rng).unwrap();
        assert_eq!(count_rate(&b, 3, 3, 5).unwrap(), Rational::new(41.into(), 15.into()));
    }

    #[test]
    fn dropped_query_fails_at_its_cell() {
        let (b, _) = pir_bundle(3, 3, 2, 4);
        let bad = apply_mutation(&b, &Mutation::Drop(QueryId::new(2, 0))).unwrap();
        let r = check_structure(&bad, 3, 1).unwrap();
        let v = r.first_failure().unwrap();
        assert_eq!(v.check, "multiplicity");
        assert!(v.first_violation.as_ref().unwrap().contains("database 2"));
    }

    #[test]
    fn random_mutations_are_caught() {
        let demand = DemandVector::new(vec![1, 2, 2], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (b, tr) = new_session(3, 2, &demand, BasePolicy::LowestIndex, 2, &mut rng).unwrap();
        for _ in 0..200 {
            let m = random_mutation(&b, 2, 3, 3, &mut rng).unwrap();
            let bad = apply_mutation(&b, &m).unwrap();
            assert!(!check_session(&bad, &tr).unwrap().pass(), "{m:?} slipped through");
        }
    }

    #[test]
    fn tail_enumeration() {
        assert_eq!(perms_with_tail(4, 2).len(), 2);
        assert_eq!(perms_with_tail(3, 3).len(), 6);
        assert!(perms_with_tail(4, 2).iter().all(|p| p.is_tail_fixed(2)));
    }

    #[test]
    fn oracle_guard_trips() {
        assert!(matches!(
            demand_distribution_oracle(3, 3, 3, Scheme::Mupir),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn single_user_oracle_small() {
        let r = demand_distribution_oracle(2, 2, 1, Scheme::Single).unwrap();
        assert!(r.equal, "{:?}", r.first_difference);
        assert_eq!(r.demand_vectors.len(), 2);
    }
}
