//! One end-to-end session: store, placement, queries, answers, decoding and
//! audit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DemandSpec, SessionConfig};
use crate::audit::{check_session, count_rate};
use crate::decode::answer_bundle;
use crate::error::{Error, Result};
use crate::mupir;
use crate::params::{format_decimal, format_rational, pir_rate, proposed_rate, SchemeTables};
use crate::pir;
use crate::query::QueryBundle;
use crate::store::{build_file_store, FileStore};
use crate::transcript::{DemandVector, Scheme, SessionTranscript};

/// Protocol randomness and demand draws use their own ChaCha streams so that
/// the store content never shifts them.
const PROTOCOL_STREAM: u64 = 1;
const DEMAND_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamsReport {
    #[serde(rename = "S")]
    pub databases: usize,
    #[serde(rename = "N")]
    pub files: usize,
    #[serde(rename = "K")]
    pub users: usize,
    pub block_bytes: usize,
    pub subsubfiles: usize,
    pub q: usize,
    #[serde(rename = "H")]
    pub h: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteCounts {
    pub file_bytes: usize,
    pub download_bytes: usize,
    pub cache_bytes_per_user: usize,
    pub broadcast_bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub scheme: Scheme,
    pub params: ParamsReport,
    pub demand: Vec<u32>,
    pub seed: u64,
    pub per_db_query_counts: Vec<usize>,
    /// Measured downloads over file size, `"num/den"`.
    pub rate_exact: String,
    pub rate_decimal: String,
    /// Closed-form rate for the scheme, `"num/den"`.
    pub rate_expected: String,
    pub decode_ok: bool,
    pub decode_error: Option<String>,
    pub audit_ok: bool,
    pub audit_failure: Option<String>,
    pub bytes: ByteCounts,
}

impl SessionReport {
    pub fn ok(&self) -> bool {
        self.decode_ok && self.audit_ok
    }
}

/// A uniformly drawn demand vector the scheme accepts.
pub fn random_valid_demand<R: Rng + ?Sized>(scheme: Scheme, files: usize, users: usize, rng: &mut R) -> Result<DemandVector> {
    let v = match scheme {
        Scheme::Single => vec![rng.random_range(1..=files as u32)],
        Scheme::Mupir if users == files => {
            let mut v: Vec<u32> = (1..=files as u32).collect();
            v.shuffle(rng);
            v
        }
        Scheme::Mupir => {
            if files > users {
                return Err(Error::UnsupportedRegime(format!("N = {files} > K = {users}")));
            }
            loop {
                let v: Vec<u32> = (0..users).map(|_| rng.random_range(1..=files as u32)).collect();
                if (1..=files as u32).all(|f| v.contains(&f)) {
                    break v;
                }
            }
        }
    };
    DemandVector::new(v, files)
}

fn config_error(field: &str, message: String) -> Error {
    Error::Config {
        line: 0,
        field: field.to_string(),
        message,
    }
}

fn store_for(cfg: &SessionConfig) -> Result<FileStore> {
    let subfiles = cfg.users;
    match &cfg.import {
        None => build_file_store(cfg.files, subfiles, cfg.databases, cfg.block_bytes, cfg.seed),
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| config_error("import", format!("{}: {e}", path.display())))?;
            FileStore::from_concatenated(&bytes, cfg.files, subfiles, cfg.databases, cfg.block_bytes)
                .map_err(|e| config_error("import", e.to_string()))
        }
    }
}

/// Everything a session produced, for callers that want more than the report.
pub struct SessionRun {
    pub report: SessionReport,
    pub bundle: QueryBundle,
    pub transcript: SessionTranscript,
}

pub fn run_session(cfg: &SessionConfig) -> Result<SessionReport> {
    Ok(run_session_full(cfg)?.report)
}

pub fn run_session_full(cfg: &SessionConfig) -> Result<SessionRun> {
    cfg.validate().map_err(|(f, m)| config_error(f, m))?;
    let tab = SchemeTables::new(cfg.databases, cfg.files)?;
    let demand = match &cfg.demand {
        DemandSpec::Explicit(v) => DemandVector::new(v.clone(), cfg.files)?,
        DemandSpec::RandomValid => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(DEMAND_STREAM);
            random_valid_demand(cfg.scheme, cfg.files, cfg.users, &mut rng)?
        }
    };
    let store = store_for(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(PROTOCOL_STREAM);

    let (bundle, tr, expected, cache_bytes, broadcast_bytes) = match cfg.scheme {
        Scheme::Single => {
            let (b, tr) = pir::new_session(cfg.databases, cfg.files, demand.of(1), cfg.seed, &mut rng)?;
            (b, tr, pir_rate(cfg.databases, cfg.files), 0, 0)
        }
        Scheme::Mupir => {
            if cfg.users == cfg.files {
                demand
                    .require_distinct()
                    .map_err(|e| config_error("demand", e.to_string()))?;
            }
            let (b, tr) = mupir::new_session(cfg.databases, cfg.files, &demand, cfg.base_policy, cfg.seed, &mut rng)?;
            let lines = tab.subsubfiles - tab.h;
            (
                b,
                tr,
                proposed_rate(cfg.databases, cfg.files, cfg.users)?,
                lines * cfg.block_bytes,
                lines * cfg.users * cfg.block_bytes,
            )
        }
    };

    let answers = answer_bundle(&store, &bundle)?;
    let decoded = match cfg.scheme {
        Scheme::Single => pir::decode_single(&answers, &bundle, &tr).map(|f| vec![f]),
        Scheme::Mupir => {
            let user_perm = tr.user_perm.as_ref().expect("multi-user transcripts carry P");
            let (_, caches) = mupir::placement(&store, user_perm)?;
            mupir::decode_all(&answers, &bundle, &tr, &caches)
        }
    };
    let (decode_ok, decode_error) = match decoded {
        Ok(files) => {
            let mut bad = None;
            for (u, got) in files.iter().enumerate() {
                if *got != store.file_blocks(demand.of(u + 1))? {
                    bad = Some(format!("user {} recovered the wrong content", u + 1));
                    break;
                }
            }
            (bad.is_none(), bad)
        }
        Err(e) => (false, Some(e.to_string())),
    };

    let rate = count_rate(&bundle, cfg.databases, cfg.files, cfg.users)?;
    let audit = check_session(&bundle, &tr)?;
    let audit_failure = if let Some(v) = audit.first_failure() {
        Some(format!("{}: {}", v.check, v.first_violation.clone().unwrap_or_default()))
    } else if rate != expected {
        Some(format!(
            "rate {} differs from the closed form {}",
            format_rational(&rate),
            format_rational(&expected)
        ))
    } else {
        None
    };

    let report = SessionReport {
        scheme: cfg.scheme,
        params: ParamsReport {
            databases: cfg.databases,
            files: cfg.files,
            users: cfg.users,
            block_bytes: cfg.block_bytes,
            subsubfiles: tab.subsubfiles,
            q: tab.q,
            h: tab.h,
        },
        demand: demand.demands.clone(),
        seed: cfg.seed,
        per_db_query_counts: bundle.per_db_counts(),
        rate_exact: format_rational(&rate),
        rate_decimal: format_decimal(&rate, 6),
        rate_expected: format_rational(&expected),
        decode_ok,
        decode_error,
        audit_ok: audit_failure.is_none(),
        audit_failure,
        bytes: ByteCounts {
            file_bytes: store.file_bytes(),
            download_bytes: bundle.total_queries() * cfg.block_bytes,
            cache_bytes_per_user: cache_bytes,
            broadcast_bytes,
        },
    };
    Ok(SessionRun {
        report,
        bundle,
        transcript: tr,
    })
}

pub fn report_json(report: &SessionReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mupir_cfg(s: usize, n: usize, theta: &[u32], seed: u64) -> SessionConfig {
        let mut c = SessionConfig::new(Scheme::Mupir, s, n, theta.len());
        c.demand = DemandSpec::Explicit(theta.to_vec());
        c.seed = seed;
        c.block_bytes = 4;
        c
    }

    #[test]
    fn example_sessions() {
        let r = run_session(&mupir_cfg(3, 3, &[2, 1, 3], 42)).unwrap();
        assert!(r.ok(), "{r:?}");
        assert_eq!(r.rate_exact, "23/9");
        let r = run_session(&mupir_cfg(3, 3, &[2, 3, 2, 1, 3], 42)).unwrap();
        assert!(r.ok(), "{r:?}");
        assert_eq!(r.rate_exact, "41/15");
        assert_eq!(r.bytes.download_bytes, 123 * 4);
    }

    #[test]
    fn regime_error() {
        let mut c = SessionConfig::new(Scheme::Mupir, 3, 3, 2);
        c.demand = DemandSpec::RandomValid;
        assert!(matches!(run_session(&c), Err(Error::Config { ref field, .. }) if field == "K"));
    }

    #[test]
    fn random_demands_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let d = random_valid_demand(Scheme::Mupir, 3, 5, &mut rng).unwrap();
            assert!(d.require_cover(3).is_ok());
            let d = random_valid_demand(Scheme::Mupir, 3, 3, &mut rng).unwrap();
            assert!(d.require_distinct().is_ok());
        }
    }

    #[test]
    fn same_config_same_report() {
        let mut c = SessionConfig::new(Scheme::Single, 4, 3, 1);
        c.seed = 9;
        let a = report_json(&run_session(&c).unwrap());
        let b = report_json(&run_session(&c).unwrap());
        assert_eq!(a, b);
        assert!(a.contains("\"rate_exact\": \"21/16\""));
    }
}
