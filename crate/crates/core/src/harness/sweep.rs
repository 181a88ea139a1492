//! Rate tables over `(S, N, K)` grids.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{
    cache_fraction, format_decimal, format_rational, h_value, parse_rational, pd_rate, proposed_rate, q_value,
    rate_dominance_check,
};

pub const CSV_HEADER: &str = "S,N,K,q,H,M_exact,M_dec,R_exact,R_dec,RPD_dec,margin_dec,lemma41,lemma43";

const PLACES: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "S")]
    pub databases: usize,
    #[serde(rename = "N")]
    pub files: usize,
    #[serde(rename = "K")]
    pub users: usize,
    pub q: String,
    #[serde(rename = "H")]
    pub h: String,
    #[serde(rename = "M_exact")]
    pub m_exact: String,
    #[serde(rename = "M_dec")]
    pub m_dec: String,
    #[serde(rename = "R_exact")]
    pub r_exact: String,
    #[serde(rename = "R_dec")]
    pub r_dec: String,
    #[serde(rename = "RPD_dec")]
    pub rpd_dec: String,
    pub margin_dec: String,
    pub lemma41: bool,
    pub lemma43: bool,
}

/// The row for one triple.
pub fn rates_row(databases: usize, files: usize, users: usize) -> Result<SweepRow> {
    let m = cache_fraction(databases, files, users);
    let r = proposed_rate(databases, files, users)?;
    let rpd = pd_rate(databases, files, users, &m)?;
    let dom = rate_dominance_check(databases, files, users)?;
    Ok(SweepRow {
        databases,
        files,
        users,
        q: q_value(databases, files).to_string(),
        h: h_value(databases, files).to_string(),
        m_exact: format_rational(&m),
        m_dec: format_decimal(&m, PLACES),
        r_exact: format_rational(&r),
        r_dec: format_decimal(&r, PLACES),
        rpd_dec: format_decimal(&rpd, PLACES),
        margin_dec: format_decimal(&(rpd - &r), PLACES),
        lemma41: dom.lemma41,
        lemma43: dom.lemma43,
    })
}

/// One row per triple with `2 <= N <= K`, ordered by `S`, then `N`, then `K`.
pub fn sweep(
    databases: RangeInclusive<usize>,
    files: RangeInclusive<usize>,
    users: RangeInclusive<usize>,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for s in databases {
        for n in files.clone() {
            for k in users.clone() {
                if n >= 2 && n <= k {
                    rows.push(rates_row(s, n, k)?);
                }
            }
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.databases,
            r.files,
            r.users,
            r.q,
            r.h,
            r.m_exact,
            r.m_dec,
            r.r_exact,
            r.r_dec,
            r.rpd_dec,
            r.margin_dec,
            r.lemma41,
            r.lemma43
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("expected header {CSV_HEADER:?}, found {other:?}"))),
    }
    let mut rows = Vec::new();
    for (no, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.trim().split(',').collect();
        let row_no = no + 2;
        if f.len() != 13 {
            return Err(Error::Parse(format!("line {row_no}: {} fields, expected 13", f.len())));
        }
        let int = |i: usize| {
            f[i].parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {row_no}: bad integer {:?}", f[i])))
        };
        let flag = |i: usize| {
            f[i].parse::<bool>()
                .map_err(|_| Error::Parse(format!("line {row_no}: bad verdict {:?}", f[i])))
        };
        rows.push(SweepRow {
            databases: int(0)?,
            files: int(1)?,
            users: int(2)?,
            q: f[3].to_string(),
            h: f[4].to_string(),
            m_exact: f[5].to_string(),
            m_dec: f[6].to_string(),
            r_exact: f[7].to_string(),
            r_dec: f[8].to_string(),
            rpd_dec: f[9].to_string(),
            margin_dec: f[10].to_string(),
            lemma41: flag(11)?,
            lemma43: flag(12)?,
        });
    }
    Ok(rows)
}

/// Recomputes the row from its triple and compares every field; exact
/// fields are compared as rationals.
pub fn verify_row(row: &SweepRow) -> Result<()> {
    let fresh = rates_row(row.databases, row.files, row.users)?;
    for (name, a, b) in [("M_exact", &row.m_exact, &fresh.m_exact), ("R_exact", &row.r_exact, &fresh.r_exact)] {
        if parse_rational(a)? != parse_rational(b)? {
            return Err(Error::Parse(format!(
                "row ({}, {}, {}): {name} {a} but recomputed {b}",
                row.databases, row.files, row.users
            )));
        }
    }
    let mut normalized = row.clone();
    normalized.m_exact = fresh.m_exact.clone();
    normalized.r_exact = fresh.r_exact.clone();
    if normalized != fresh {
        return Err(Error::Parse(format!(
            "row ({}, {}, {}) does not match its recomputation",
            row.databases, row.files, row.users
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_row() {
        let r = rates_row(3, 3, 3).unwrap();
        assert_eq!((r.q.as_str(), r.h.as_str()), ("23", "5"));
        assert_eq!(r.m_exact, "4/27");
        assert_eq!(r.r_exact, "23/9");
        assert_eq!(r.rpd_dec, "2.769547");
        assert!(r.lemma41 && r.lemma43);
    }

    #[test]
    fn order_and_round_trip() {
        let rows = sweep(2..=3, 2..=4, 2..=5).unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.databases, r.files, r.users)).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
        assert!(rows.iter().all(|r| r.files <= r.users));
        let csv = to_csv(&rows);
        let back = parse_csv(&csv).unwrap();
        assert_eq!(back, rows);
        back.iter().for_each(|r| verify_row(r).unwrap());
        // q = 4 * 2^3 - 1 for S = 2, N = 4
        assert!(rows.iter().filter(|r| (r.databases, r.files) == (2, 4)).all(|r| r.q == "31"));
    }

    #[test]
    fn tampered_row_is_rejected() {
        let mut r = rates_row(2, 3, 4).unwrap();
        r.r_exact = "1/1".into();
        assert!(verify_row(&r).is_err());
        let mut r = rates_row(2, 3, 4).unwrap();
        r.lemma43 = !r.lemma43;
        assert!(verify_row(&r).is_err());
    }
}
