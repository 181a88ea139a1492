//! Cache-aided multi-user private information retrieval with small caches.
//!
//! `K` users with dedicated caches fetch files from `S` non-colluding replicated
//! databases holding `N` files each. Every file is split into `K` subfiles and
//! every subfile into `S^(N-1)` subsubfiles. A database broadcasts XOR cache
//! lines during placement and the users privately keep one slot each; during
//! delivery the users jointly generate XOR queries whose per-database structure
//! does not depend on the demand vector.
//!
//! The crate is organised as:
//!
//! * [`block`], [`store`], [`perm`], [`query`], [`transcript`]: the shared data model.
//! * [`params`]: exact rational computation of every counting function and rate.
//! * [`pir`]: the single-user scheme with subpacketization `S^(N-1)`.
//! * [`mupir`]: placement, the two per-slot query generators, both delivery
//!   algorithms and per-user decoding.
//! * [`decode`] and [`gf2`]: plan-driven peeling and an independent GF(2) solver.
//! * [`audit`]: structural symmetry checks, rate counting and exhaustive
//!   demand-distribution oracles.
//! * [`harness`]: configuration, sessions, sweeps and reports.

pub mod audit;
pub mod block;
pub mod decode;
mod design;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod mupir;
pub mod params;
pub mod perm;
pub mod pir;
pub mod query;
pub mod store;
pub mod transcript;

pub use block::{xor_combine, Block};
pub use error::{Error, Result};
pub use params::{Rational, SchemeParams, SchemeTables};
pub use perm::{sample_permutation, PermConstraint, Permutation};
pub use query::{canonical_form, CanonicalKey, Generator, Provenance, Query, QueryAtom, QueryBundle, QueryId};
pub use store::{build_file_store, FileStore};
pub use transcript::{DecodePlan, DemandVector, PlanStep, Scheme, SessionTranscript, Source, StepKind};

/// `S^(N-1)`, the number of subsubfiles per subfile.
pub fn subpacketization(databases: usize, files: usize) -> Result<usize> {
    if databases < 1 || files < 1 {
        return Err(Error::InvalidDimension(format!(
            "S = {databases}, N = {files}"
        )));
    }
    u32::try_from(files - 1)
        .ok()
        .and_then(|e| databases.checked_pow(e))
        .filter(|&n| n <= u32::MAX as usize)
        .ok_or_else(|| Error::InvalidDimension(format!("S^(N-1) overflows for S = {databases}, N = {files}")))
}
