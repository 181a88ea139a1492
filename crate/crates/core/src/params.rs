//! Counting functions and rates, all in exact arithmetic.
//!
//! Integers are [`BigInt`] and fractions are [`Rational`] so that the strict
//! inequalities between rates are never decided by floating point error.
//! Free functions panic when their documented preconditions are violated;
//! [`SchemeParams::new`] validates a whole triple and returns an error instead.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

fn big(v: usize) -> BigInt {
    BigInt::from(v)
}

fn rat(v: usize) -> Rational {
    Rational::from_integer(big(v))
}

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * big(n - i) / big(i + 1);
    }
    acc
}

fn pow(base: usize, exp: usize) -> BigInt {
    num_traits::pow(big(base), exp)
}

/// `(g(S,k), f(S,k))` by the recurrence.
fn base_reps_recurrence(databases: usize, k: usize) -> (BigInt, BigInt) {
    let s = big(databases);
    let (mut g, mut f) = (BigInt::one(), BigInt::zero());
    if k >= 2 {
        g = BigInt::zero();
        f = BigInt::one();
    }
    for _ in 3..=k {
        let ng = (&s - 1) * &f;
        let nf = (&s - 2) * &f + &g;
        g = ng;
        f = nf;
    }
    (g, f)
}

/// `(g(S,k), f(S,k))` by the closed forms, as rationals.
pub fn base_reps_closed(databases: usize, k: usize) -> (Rational, Rational) {
    assert!(databases >= 2 && k >= 1, "base_reps needs S >= 2, k >= 1");
    let s = rat(databases);
    let sm1 = &s - Rational::one();
    let sign = |e: usize| {
        if e.is_multiple_of(2) {
            Rational::one()
        } else {
            -Rational::one()
        }
    };
    // (S-1)^(k-2) is (S-1)^-1 at k = 1
    let pk2 = if k >= 2 {
        Rational::from_integer(pow(databases - 1, k - 2))
    } else {
        sm1.recip()
    };
    let pk1 = Rational::from_integer(pow(databases - 1, k - 1));
    let g = &sm1 / &s * (sign(k - 1) + pk2);
    let f = (sign(k) + pk1) / s;
    (g, f)
}

/// `(g(S,k), f(S,k))`: the repetition counts of every `k`-sum in the first
/// database and in each other database of the single-user scheme.
///
/// Computed by the recurrence and checked against the closed form.
pub fn base_reps(databases: usize, k: usize) -> (BigInt, BigInt) {
    assert!(databases >= 2 && k >= 1, "base_reps needs S >= 2, k >= 1");
    let (g, f) = base_reps_recurrence(databases, k);
    let (gc, fc) = base_reps_closed(databases, k);
    assert!(
        gc == Rational::from_integer(g.clone()) && fc == Rational::from_integer(f.clone()),
        "recurrence and closed form disagree at S = {databases}, k = {k}"
    );
    (g, f)
}

/// `phi_s(S,k)`: `g` for the first database, `f` for the others.
pub fn phi(s: usize, databases: usize, k: usize) -> BigInt {
    assert!((1..=databases).contains(&s), "database index {s} outside [1, {databases}]");
    let (g, f) = base_reps(databases, k);
    if s == 1 {
        g
    } else {
        f
    }
}

/// `psi_s(S,k) = ceil(k (N-1) phi_s(S,k) / N)`.
pub fn psi(s: usize, databases: usize, files: usize, k: usize) -> BigInt {
    assert!(files >= 1 && k <= files, "k = {k} outside [1, N = {files}]");
    let num = big(k) * big(files - 1) * phi(s, databases, k);
    num.div_ceil(&big(files))
}

/// Fresh-index quota of file `i` in database `s` for `k`-sums when the
/// slot's demanded file is `d`.
pub fn f_rep(s: usize, i: usize, d: usize, k: usize, databases: usize, files: usize) -> BigInt {
    assert!((1..=files).contains(&i) && (1..=files).contains(&d));
    let shared = binomial(files - 1, k - 1) * phi(s, databases, k);
    if i != d {
        shared
    } else {
        let v = binomial(files, k) * psi(s, databases, files, k) - big(files - 1) * shared;
        debug_assert!(!v.is_negative());
        v
    }
}

/// `q = sum_k sum_s C(N,k) psi_s(S,k)`, the per-slot query count.
pub fn q_value(databases: usize, files: usize) -> BigInt {
    assert!(databases >= 2 && files >= 2, "q needs S >= 2, N >= 2");
    let mut q = BigInt::zero();
    for k in 1..=files {
        let c = binomial(files, k);
        for s in 1..=databases {
            q += &c * psi(s, databases, files, k);
        }
    }
    q
}

/// `H = q - (N-1) S^(N-1)`.
pub fn h_value(databases: usize, files: usize) -> BigInt {
    q_value(databases, files) - big(files - 1) * pow(databases, files - 1)
}

/// `M = (N S^(N-1) - q) / (K S^(N-1))`, as a fraction of one file.
pub fn cache_fraction(databases: usize, files: usize, users: usize) -> Rational {
    assert!(users >= 1);
    let n = pow(databases, files - 1);
    let num = big(files) * &n - q_value(databases, files);
    Rational::new(num, big(users) * n)
}

fn check_regime(databases: usize, files: usize, users: usize) -> Result<()> {
    if databases < 2 || files < 2 {
        return Err(Error::InvalidDimension(format!("S = {databases}, N = {files}; need S >= 2 and N >= 2")));
    }
    if files > users {
        return Err(Error::UnsupportedRegime(format!(
            "N = {files} > K = {users}; the scheme needs N <= K"
        )));
    }
    Ok(())
}

/// Download rate of the multi-user scheme.
pub fn proposed_rate(databases: usize, files: usize, users: usize) -> Result<Rational> {
    check_regime(databases, files, users)?;
    let n = Rational::from_integer(pow(databases, files - 1));
    let per_slot = Rational::from_integer(q_value(databases, files)) / n;
    if files == users {
        Ok(per_slot)
    } else {
        Ok(rat(files) / rat(users) * (per_slot + rat(users - files)))
    }
}

/// `1 + 1/S + ... + 1/S^(N-1)`.
pub fn pir_rate(databases: usize, files: usize) -> Rational {
    assert!(databases >= 2 && files >= 1);
    Rational::new(
        pow(databases, files) - 1,
        big(databases - 1) * pow(databases, files - 1),
    )
}

/// Corner points `(0, N)` and `(tN/K, R_t)` for `t = 1..=K` of the product
/// design baseline.
pub fn pd_corner_points(databases: usize, files: usize, users: usize) -> Vec<(Rational, Rational)> {
    let r_hat = pir_rate(databases, files);
    let mut pts = vec![(Rational::zero(), rat(files))];
    for t in 1..=users {
        let m = rat(t * files) / rat(users);
        let uncoded = rat(files) * (Rational::one() - rat(t) / rat(users));
        let coded = rat(users - t) / rat(t + 1) * &r_hat;
        pts.push((m, uncoded.min(coded)));
    }
    pts
}

/// Lower convex hull of points sorted by abscissa (monotone chain).
pub fn lower_hull(points: &[(Rational, Rational)]) -> Vec<(Rational, Rational)> {
    let mut hull: Vec<(Rational, Rational)> = Vec::new();
    for p in points {
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            // drop b unless it lies strictly below the segment a -> p
            let cross = (&b.0 - &a.0) * (&p.1 - &a.1) - (&b.1 - &a.1) * (&p.0 - &a.0);
            if cross <= Rational::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p.clone());
    }
    hull
}

/// Load of the product design baseline at cache size `m`.
///
/// Corner points are returned as they are; anything else is read off the
/// lower convex envelope of the corner points.
pub fn pd_rate(databases: usize, files: usize, users: usize, m: &Rational) -> Result<Rational> {
    if databases < 2 || files < 1 || users < 1 {
        return Err(Error::InvalidDimension(format!("S = {databases}, N = {files}, K = {users}")));
    }
    if m.is_negative() || *m > rat(files) {
        return Err(Error::MemoryOutOfRange(m.to_string()));
    }
    let pts = pd_corner_points(databases, files, users);
    if let Some((_, r)) = pts.iter().find(|(pm, _)| pm == m) {
        return Ok(r.clone());
    }
    let hull = lower_hull(&pts);
    let seg = hull
        .windows(2)
        .find(|w| w[0].0 <= *m && *m <= w[1].0)
        .expect("hull spans [0, N]");
    let (a, b) = (&seg[0], &seg[1]);
    Ok(&a.1 + (&b.1 - &a.1) * (m - &a.0) / (&b.0 - &a.0))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceReport {
    /// `N S^(N-1) - q`.
    pub lemma41_margin: BigInt,
    pub lemma41: bool,
    /// Smallest gap between a chord from `(0, N)` and the proposed rate.
    pub chord_margin: Rational,
    pub lemma42: bool,
    /// `R_PD(M) - R(M)`.
    pub pd_margin: Rational,
    pub lemma43: bool,
}

impl DominanceReport {
    pub fn all_pass(&self) -> bool {
        self.lemma41 && self.lemma42 && self.lemma43
    }
}

pub fn rate_dominance_check(databases: usize, files: usize, users: usize) -> Result<DominanceReport> {
    check_regime(databases, files, users)?;
    let n = pow(databases, files - 1);
    let lemma41_margin = big(files) * n - q_value(databases, files);
    let m = cache_fraction(databases, files, users);
    let r = proposed_rate(databases, files, users)?;
    let nn = rat(files);
    let mut chord_margin: Option<Rational> = None;
    for (mt, rt) in pd_corner_points(databases, files, users).into_iter().skip(1) {
        let line = &nn - (&nn - rt) / mt * &m;
        let gap = line - &r;
        chord_margin = Some(match chord_margin {
            Some(c) if c <= gap => c,
            _ => gap,
        });
    }
    let chord_margin = chord_margin.expect("K >= 1");
    let pd_margin = pd_rate(databases, files, users, &m)? - &r;
    Ok(DominanceReport {
        lemma41: lemma41_margin.is_positive(),
        lemma41_margin,
        lemma42: chord_margin.is_positive(),
        chord_margin,
        lemma43: pd_margin.is_positive(),
        pd_margin,
    })
}

/// Exact `num/den` rendering; integers keep the `/1`.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
    let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(n, d))
}

/// Decimal rendering with `places` digits, rounded half away from zero.
pub fn format_decimal(r: &Rational, places: usize) -> String {
    let scale = pow(10, places);
    let scaled = r * Rational::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let neg = rounded.is_negative();
    let abs = rounded.abs();
    let (int, frac) = abs.div_rem(&scale);
    let sign = if neg { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = places)
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Every derived quantity of one `(S, N, K)` triple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub databases: usize,
    pub files: usize,
    pub users: usize,
    pub q: BigInt,
    pub h: BigInt,
    pub cache_fraction: Rational,
    pub rate_proposed: Rational,
    pub rate_pir: Rational,
}

impl SchemeParams {
    pub fn new(databases: usize, files: usize, users: usize) -> Result<Self> {
        check_regime(databases, files, users)?;
        let q = q_value(databases, files);
        let h = h_value(databases, files);
        let n = pow(databases, files - 1);
        if !(h.is_positive() && h <= n) {
            return Err(Error::InvalidDimension(format!("H = {h} outside (0, {n}]")));
        }
        Ok(SchemeParams {
            databases,
            files,
            users,
            cache_fraction: cache_fraction(databases, files, users),
            rate_proposed: proposed_rate(databases, files, users)?,
            rate_pir: pir_rate(databases, files),
            q,
            h,
        })
    }
}

/// Small-integer lookup tables used by the generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemeTables {
    pub databases: usize,
    pub files: usize,
    /// `S^(N-1)`.
    pub subsubfiles: usize,
    /// `phi[s-1][k-1]`.
    pub phi: Vec<Vec<usize>>,
    /// `psi[s-1][k-1]`.
    pub psi: Vec<Vec<usize>>,
    pub q: usize,
    pub h: usize,
}

fn small(v: BigInt) -> Result<usize> {
    v.to_usize()
        .ok_or_else(|| Error::InvalidDimension(format!("count {v} does not fit in usize")))
}

impl SchemeTables {
    pub fn new(databases: usize, files: usize) -> Result<Self> {
        if databases < 2 || files < 1 {
            return Err(Error::InvalidDimension(format!("S = {databases}, N = {files}")));
        }
        let subsubfiles = crate::subpacketization(databases, files)?;
        let mut phi_t = vec![vec![0; files]; databases];
        let mut psi_t = vec![vec![0; files]; databases];
        for s in 1..=databases {
            for k in 1..=files {
                phi_t[s - 1][k - 1] = small(phi(s, databases, k))?;
                psi_t[s - 1][k - 1] = small(psi(s, databases, files, k))?;
            }
        }
        let (q, h) = if files >= 2 {
            (small(q_value(databases, files))?, small(h_value(databases, files))?)
        } else {
            (1, 1)
        };
        Ok(SchemeTables {
            databases,
            files,
            subsubfiles,
            phi: phi_t,
            psi: psi_t,
            q,
            h,
        })
    }

    pub fn phi(&self, s: usize, k: usize) -> usize {
        self.phi[s - 1][k - 1]
    }

    pub fn psi(&self, s: usize, k: usize) -> usize {
        self.psi[s - 1][k - 1]
    }

    pub fn binom(&self, n: usize, k: usize) -> usize {
        binomial(n, k).to_usize().expect("binomial fits")
    }

    pub fn f_rep(&self, s: usize, i: usize, d: usize, k: usize) -> usize {
        let n = self.files;
        let shared = self.binom(n - 1, k - 1) * self.phi(s, k);
        if i != d {
            shared
        } else {
            self.binom(n, k) * self.psi(s, k) - (n - 1) * shared
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn b(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn base_rep_values() {
        assert_eq!(base_reps(3, 3), (b(2), b(1)));
        assert_eq!(base_reps(4, 3), (b(3), b(2)));
        for s in 2..10 {
            assert_eq!(base_reps(s, 1), (b(1), b(0)));
        }
        for k in 1..16 {
            let (g, f) = base_reps(2, k);
            let odd = b((k % 2) as i64);
            assert_eq!(g, odd);
            assert_eq!(f, b(1) - odd);
        }
    }

    #[test]
    fn recurrence_matches_closed_form_up_to_sixteen() {
        for s in 2..=16 {
            for k in 1..=16 {
                let (g, f) = base_reps_recurrence(s, k);
                let (gc, fc) = base_reps_closed(s, k);
                assert_eq!(Rational::from_integer(g), gc, "g S={s} k={k}");
                assert_eq!(Rational::from_integer(f), fc, "f S={s} k={k}");
            }
        }
    }

    #[test]
    fn phi_psi_values() {
        assert_eq!(phi(1, 4, 2), b(0));
        assert_eq!(phi(2, 4, 2), b(1));
        assert_eq!(phi(1, 3, 3), b(2));
        assert_eq!(psi(1, 3, 3, 3), b(4));
        assert_eq!(psi(2, 3, 3, 3), b(2));
        for s in 2..7 {
            for n in 1..7 {
                assert_eq!(psi(2, s, n, 1), b(0));
            }
        }
    }

    #[test]
    fn f_rep_values() {
        assert_eq!(f_rep(1, 1, 2, 3, 3, 3), b(2));
        assert_eq!(f_rep(1, 2, 2, 3, 3, 3), b(0));
    }

    #[test]
    fn golden_parameters() {
        assert_eq!(q_value(3, 3), b(23));
        assert_eq!(h_value(3, 3), b(5));
        assert_eq!(cache_fraction(3, 3, 3), r(4, 27));
        assert_eq!(cache_fraction(3, 3, 5), r(4, 45));
        // M L at L = 27 and L = 45 bits
        assert_eq!(cache_fraction(3, 3, 3) * r(27, 1), r(4, 1));
        assert_eq!(cache_fraction(3, 3, 5) * r(45, 1), r(4, 1));
        assert_eq!(q_value(2, 2), b(3));
    }

    #[test]
    fn rates() {
        assert_eq!(proposed_rate(3, 3, 3).unwrap(), r(23, 9));
        assert_eq!(proposed_rate(3, 3, 5).unwrap(), r(41, 15));
        assert_eq!(proposed_rate(2, 2, 2).unwrap(), r(3, 2));
        assert_eq!(proposed_rate(2, 2, 3).unwrap(), r(5, 3));
        assert!(matches!(proposed_rate(3, 3, 2), Err(Error::UnsupportedRegime(_))));
        assert_eq!(pir_rate(4, 3), r(21, 16));
        assert_eq!(pir_rate(2, 3), r(7, 4));
        for s in 2..8 {
            assert_eq!(pir_rate(s, 1), r(1, 1));
        }
    }

    #[test]
    fn closed_forms_for_two_databases_and_two_files() {
        for n in 2..=10usize {
            assert_eq!(q_value(2, n), b((n as i64) * (1 << (n - 1)) - 1));
        }
        for s in 2..=10usize {
            assert_eq!(q_value(s, 2), b(s as i64 + 1));
        }
    }

    #[test]
    fn counting_identities() {
        for s in 2..=6 {
            for n in 2..=6 {
                let sub = pow(s, n - 1);
                let mut cover = BigInt::zero();
                let mut total = BigInt::zero();
                for k in 1..=n {
                    for db in 1..=s {
                        cover += binomial(n - 1, k - 1) * phi(db, s, k);
                        total += binomial(n, k) * phi(db, s, k);
                        assert!(psi(db, s, n, k) <= big(k) * phi(db, s, k));
                    }
                }
                assert_eq!(cover, sub);
                assert_eq!(total, (pow(s, n) - 1) / big(s - 1));
                let h = h_value(s, n);
                for d in 1..=n {
                    for i in 1..=n {
                        let mut sum = BigInt::zero();
                        for k in 1..=n {
                            for db in 1..=s {
                                sum += f_rep(db, i, d, k, s, n);
                            }
                        }
                        assert_eq!(sum, if i == d { h.clone() } else { sub.clone() });
                    }
                    for k in 1..=n {
                        for db in 1..=s {
                            let row: BigInt = (1..=n).map(|i| f_rep(db, i, d, k, s, n)).sum();
                            assert_eq!(row, binomial(n, k) * psi(db, s, n, k));
                        }
                    }
                }
            }
        }
    }

    /// Independent envelope: the lower convex envelope at `m` is the minimum
    /// over all chords between corner points that bracket `m`.
    fn envelope_by_chords(pts: &[(Rational, Rational)], m: &Rational) -> Rational {
        let mut best: Option<Rational> = None;
        for a in pts {
            for b in pts {
                if a.0 <= *m && *m <= b.0 {
                    let v = if a.0 == b.0 {
                        a.1.clone().min(b.1.clone())
                    } else {
                        &a.1 + (&b.1 - &a.1) * (m - &a.0) / (&b.0 - &a.0)
                    };
                    best = Some(match best {
                        Some(x) if x <= v => x,
                        _ => v,
                    });
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn pd_rate_at_example_points() {
        let v = pd_rate(3, 3, 3, &r(4, 27)).unwrap();
        assert_eq!(v, r(673, 243));
        assert!((to_f64(&v) - 2.769).abs() < 1e-3);
        let pts = pd_corner_points(3, 3, 5);
        let v5 = pd_rate(3, 3, 5, &r(4, 45)).unwrap();
        assert_eq!(v5, envelope_by_chords(&pts, &r(4, 45)));
        for s in 2..5 {
            for n in 2..5 {
                for k in n..7 {
                    assert_eq!(pd_rate(s, n, k, &r(n as i64, 1)).unwrap(), Rational::zero());
                    assert_eq!(pd_rate(s, n, k, &Rational::zero()).unwrap(), rat(n));
                    let m = cache_fraction(s, n, k);
                    let pts = pd_corner_points(s, n, k);
                    assert_eq!(pd_rate(s, n, k, &m).unwrap(), envelope_by_chords(&pts, &m));
                }
            }
        }
        assert!(matches!(pd_rate(3, 3, 3, &r(4, 1)), Err(Error::MemoryOutOfRange(_))));
        assert!(matches!(pd_rate(3, 3, 3, &r(-1, 5)), Err(Error::MemoryOutOfRange(_))));
    }

    #[test]
    fn dominance() {
        let rep = rate_dominance_check(3, 3, 3).unwrap();
        assert!(rep.all_pass());
        assert!((to_f64(&rep.pd_margin) - 0.213).abs() < 1e-3);
        assert!(rate_dominance_check(2, 2, 2).unwrap().all_pass());
    }

    #[test]
    fn scheme_params_validate() {
        let p = SchemeParams::new(3, 3, 5).unwrap();
        assert_eq!(p.q, b(23));
        assert_eq!(p.rate_proposed, r(41, 15));
        assert!(SchemeParams::new(3, 4, 3).is_err());
        assert!(SchemeParams::new(1, 2, 3).is_err());
        let t = SchemeTables::new(3, 3).unwrap();
        assert_eq!((t.q, t.h, t.subsubfiles), (23, 5, 9));
        assert_eq!(t.f_rep(1, 1, 2, 3), 2);
    }

    #[test]
    fn rational_text_forms() {
        assert_eq!(format_rational(&r(46, 18)), "23/9");
        assert_eq!(format_rational(&r(3, 1)), "3/1");
        assert_eq!(parse_rational("41/15").unwrap(), r(41, 15));
        assert_eq!(parse_rational("7").unwrap(), r(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x/2").is_err());
        assert_eq!(format_decimal(&r(23, 9), 6), "2.555556");
        assert_eq!(format_decimal(&r(-1, 3), 3), "-0.333");
        assert_eq!(format_decimal(&r(5, 1), 2), "5.00");
        assert_eq!(format_decimal(&r(1, 200), 2), "0.01");
    }
}
