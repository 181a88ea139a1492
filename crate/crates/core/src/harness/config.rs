//! Plain-text session configuration: one `key = value` per line, `#` starts a
//! comment.
//!
//! ```text
//! scheme = mupir
//! S = 3
//! N = 3
//! K = 5
//! block_bytes = 16
//! seed = 42
//! demand = 2,3,2,1,3     # or random-valid
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mupir::BasePolicy;
use crate::transcript::Scheme;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandSpec {
    Explicit(Vec<u32>),
    RandomValid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub scheme: Scheme,
    pub databases: usize,
    pub files: usize,
    /// Always 1 for the single-user scheme.
    pub users: usize,
    pub block_bytes: usize,
    pub seed: u64,
    pub demand: DemandSpec,
    /// Raw file holding the `N` files back to back; pseudo-random content
    /// from `seed` when absent.
    pub import: Option<PathBuf>,
    pub base_policy: BasePolicy,
}

impl SessionConfig {
    pub fn new(scheme: Scheme, databases: usize, files: usize, users: usize) -> Self {
        SessionConfig {
            scheme,
            databases,
            files,
            users: if scheme == Scheme::Single { 1 } else { users },
            block_bytes: 16,
            seed: 0,
            demand: DemandSpec::RandomValid,
            import: None,
            base_policy: BasePolicy::LowestIndex,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut scheme = None;
        let mut databases = None;
        let mut files = None;
        let mut users = None;
        let mut block_bytes = 16;
        let mut seed = 0;
        let mut demand = DemandSpec::RandomValid;
        let mut import = None;
        let mut base_policy = BasePolicy::LowestIndex;
        let mut lines = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = no + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |field: &str, message: String| Error::Config {
                line,
                field: field.to_string(),
                message,
            };
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| err("", format!("expected `key = value`, found {body:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |field: &str| -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| err(field, format!("expected a non-negative integer, found {value:?}")))
            };
            match key {
                "scheme" => {
                    scheme = Some(match value {
                        "single" | "pir" => Scheme::Single,
                        "mupir" => Scheme::Mupir,
                        _ => return Err(err(key, format!("expected single or mupir, found {value:?}"))),
                    })
                }
                "S" => databases = Some((int(key)?, line)),
                "N" => files = Some((int(key)?, line)),
                "K" => users = Some((int(key)?, line)),
                "block_bytes" => block_bytes = int(key)?,
                "seed" => {
                    seed = value
                        .parse::<u64>()
                        .map_err(|_| err(key, format!("expected a 64-bit seed, found {value:?}")))?
                }
                "demand" => {
                    demand = if value == "random-valid" {
                        DemandSpec::RandomValid
                    } else {
                        DemandSpec::Explicit(
                            value
                                .split(|c: char| c == ',' || c.is_whitespace())
                                .filter(|t| !t.is_empty())
                                .map(|t| t.parse::<u32>())
                                .collect::<std::result::Result<Vec<_>, _>>()
                                .map_err(|_| err(key, format!("expected file indices or random-valid, found {value:?}")))?,
                        )
                    }
                }
                "import" => import = Some(PathBuf::from(value)),
                "base_policy" => {
                    base_policy = match value {
                        "lowest_index" => BasePolicy::LowestIndex,
                        "uniform" => BasePolicy::Uniform,
                        _ => return Err(err(key, format!("expected lowest_index or uniform, found {value:?}"))),
                    }
                }
                _ => return Err(err(key, format!("unknown key {key:?}"))),
            }
            lines.push((key.to_string(), line));
        }
        let missing = |field: &str| Error::Config {
            line: 0,
            field: field.to_string(),
            message: "missing".into(),
        };
        let scheme = scheme.ok_or_else(|| missing("scheme"))?;
        let (databases, _) = databases.ok_or_else(|| missing("S"))?;
        let (files, n_line) = files.ok_or_else(|| missing("N"))?;
        let users = match (scheme, users) {
            (Scheme::Single, None) => 1,
            (Scheme::Single, Some((1, _))) => 1,
            (Scheme::Single, Some((k, line))) => {
                return Err(Error::Config {
                    line,
                    field: "K".into(),
                    message: format!("the single-user scheme has K = 1, found {k}"),
                })
            }
            (Scheme::Mupir, Some((k, _))) => k,
            (Scheme::Mupir, None) => return Err(missing("K")),
        };
        let cfg = SessionConfig {
            scheme,
            databases,
            files,
            users,
            block_bytes,
            seed,
            demand,
            import,
            base_policy,
        };
        let line_of = |field: &str| lines.iter().find(|(k, _)| k == field).map_or(n_line, |(_, l)| *l);
        cfg.validate().map_err(|(field, message)| Error::Config {
            line: line_of(field),
            field: field.to_string(),
            message,
        })?;
        Ok(cfg)
    }

    /// Field-level checks; the regime and demand checks name the offending key.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.databases < 2 {
            return Err(("S", format!("need S >= 2, found {}", self.databases)));
        }
        if self.files < 2 {
            return Err(("N", format!("need N >= 2, found {}", self.files)));
        }
        if self.block_bytes == 0 {
            return Err(("block_bytes", "need at least one byte per block".into()));
        }
        if crate::subpacketization(self.databases, self.files).is_err() {
            return Err(("N", format!("S^(N-1) overflows for S = {}, N = {}", self.databases, self.files)));
        }
        if self.scheme == Scheme::Mupir {
            if self.users < 1 {
                return Err(("K", "need K >= 1".into()));
            }
            if self.files > self.users {
                return Err((
                    "K",
                    format!("N = {} > K = {}; the scheme needs N <= K", self.files, self.users),
                ));
            }
        }
        if let DemandSpec::Explicit(d) = &self.demand {
            if d.len() != self.users {
                return Err(("demand", format!("{} entries for K = {}", d.len(), self.users)));
            }
            if let Some(f) = d.iter().find(|&&f| f == 0 || f as usize > self.files) {
                return Err(("demand", format!("file {f} outside [1, {}]", self.files)));
            }
            if self.scheme == Scheme::Mupir {
                if let Some(f) = (1..=self.files as u32).find(|f| !d.contains(f)) {
                    return Err(("demand", format!("no user demands file {f}")));
                }
            }
        }
        Ok(())
    }
}
