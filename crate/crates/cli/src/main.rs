use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mupir_core::audit::{self, DistributionReport};
use mupir_core::harness::{self, DemandSpec, SessionConfig, SessionReport};
use mupir_core::mupir::BasePolicy;
use mupir_core::params::{self, format_rational, SchemeParams};
use mupir_core::{Error, Scheme};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mupir", version, about = "Cache-aided multi-user PIR simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Single,
    Mupir,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    LowestIndex,
    Uniform,
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SessionArgs {
    /// Key-value config file; command-line values override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short = 'S')]
    databases: Option<usize>,
    #[arg(short = 'N')]
    files: Option<usize>,
    /// Comma-separated file indices, or `random-valid`.
    #[arg(long)]
    demand: Option<String>,
    #[arg(long)]
    block_bytes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Raw file holding the N files back to back.
    #[arg(long)]
    import: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Subcommand)]
enum Command {
    /// Single-user session.
    Pir(SessionArgs),
    /// Multi-user session.
    Mupir {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(short = 'K')]
        users: Option<usize>,
        #[arg(long, value_enum)]
        base_policy: Option<PolicyArg>,
    },
    /// Closed-form quantities for one triple.
    Rates {
        #[arg(short = 'S')]
        databases: usize,
        #[arg(short = 'N')]
        files: usize,
        #[arg(short = 'K')]
        users: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Rate table over a grid, rows ordered by S, N, K.
    Sweep {
        /// Inclusive range `lo..hi` or a single value.
        #[arg(long, default_value = "2..6")]
        s_range: String,
        #[arg(long, default_value = "2..6")]
        n_range: String,
        #[arg(long, default_value = "2..8")]
        k_range: String,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Structural checks over seeded sessions and optionally the exhaustive
    /// distribution oracle.
    Audit {
        #[arg(short = 'S')]
        databases: usize,
        #[arg(short = 'N')]
        files: usize,
        #[arg(short = 'K', default_value_t = 1)]
        users: usize,
        #[arg(long, value_enum, default_value = "mupir")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 10)]
        sessions: usize,
        /// Random single-query mutations tried per session.
        #[arg(long, default_value_t = 20)]
        mutations: usize,
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Decode(String),
    Audit(String),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. }
            | Error::InvalidDimension(_)
            | Error::InvalidDemand(_)
            | Error::Coverage { .. }
            | Error::UnsupportedRegime(_)
            | Error::MemoryOutOfRange(_)
            | Error::TooLarge { .. }
            | Error::Parse(_) => Failure::Config(e.to_string()),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn emit(output: &Output, text: &str) -> Result<(), Failure> {
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Other(anyhow::anyhow!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn parse_range(text: &str, name: &str) -> Result<std::ops::RangeInclusive<usize>, Failure> {
    let bad = || Failure::Config(format!("{name}: expected `lo..hi` or a number, found {text:?}"));
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (text, text),
    };
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

fn session_config(scheme: Scheme, a: &SessionArgs, users: Option<usize>, policy: Option<PolicyArg>) -> Result<SessionConfig, Failure> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let cfg = SessionConfig::parse(&text)?;
            if cfg.scheme != scheme {
                return Err(Failure::Config(format!("{}: scheme does not match the subcommand", path.display())));
            }
            cfg
        }
        None => {
            let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| Failure::Config(format!("missing -{flag}")));
            let s = need(a.databases, "S")?;
            let n = need(a.files, "N")?;
            let k = if scheme == Scheme::Single { 1 } else { need(users, "K")? };
            SessionConfig::new(scheme, s, n, k)
        }
    };
    if let Some(s) = a.databases {
        cfg.databases = s;
    }
    if let Some(n) = a.files {
        cfg.files = n;
    }
    if let (Scheme::Mupir, Some(k)) = (scheme, users) {
        cfg.users = k;
    }
    if let Some(b) = a.block_bytes {
        cfg.block_bytes = b;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &a.import {
        cfg.import = Some(p.clone());
    }
    if let Some(p) = policy {
        cfg.base_policy = match p {
            PolicyArg::LowestIndex => BasePolicy::LowestIndex,
            PolicyArg::Uniform => BasePolicy::Uniform,
        };
    }
    if let Some(d) = &a.demand {
        cfg.demand = if d == "random-valid" {
            DemandSpec::RandomValid
        } else {
            DemandSpec::Explicit(
                d.split(',')
                    .map(|t| t.trim().parse::<u32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| Failure::Config(format!("--demand: expected file indices, found {d:?}")))?,
            )
        };
    }
    cfg.validate()
        .map_err(|(field, message)| Failure::Config(format!("{field}: {message}")))?;
    Ok(cfg)
}

fn session_csv(r: &SessionReport) -> String {
    let join = |v: &[String]| v.join(" ");
    format!(
        "scheme,S,N,K,demand,seed,per_db_query_counts,rate_exact,decode_ok,audit_ok\n{},{},{},{},{},{},{},{},{},{}\n",
        match r.scheme {
            Scheme::Single => "single",
            Scheme::Mupir => "mupir",
        },
        r.params.databases,
        r.params.files,
        r.params.users,
        join(&r.demand.iter().map(u32::to_string).collect::<Vec<_>>()),
        r.seed,
        join(&r.per_db_query_counts.iter().map(usize::to_string).collect::<Vec<_>>()),
        r.rate_exact,
        r.decode_ok,
        r.audit_ok
    )
}

fn run_session_cmd(cfg: &SessionConfig, output: &Output) -> Result<(), Failure> {
    let report = harness::run_session(cfg)?;
    let text = match output.format {
        Format::Json => harness::report_json(&report),
        Format::Csv => session_csv(&report),
    };
    emit(output, &text)?;
    if !report.decode_ok {
        return Err(Failure::Decode(report.decode_error.unwrap_or_default()));
    }
    if !report.audit_ok {
        return Err(Failure::Audit(report.audit_failure.unwrap_or_default()));
    }
    Ok(())
}

#[derive(Serialize)]
struct RatesReport {
    row: harness::SweepRow,
    params: SchemeParams,
    rate_pir: String,
    chord_margin: String,
    pd_margin: String,
    lemma42: bool,
}

#[derive(Serialize)]
struct StructureRun {
    seed: u64,
    demand: Vec<u32>,
    pass: bool,
    first_failure: Option<String>,
    mutations_tried: usize,
    mutations_detected: usize,
}

#[derive(Serialize)]
struct AuditRun {
    scheme: Scheme,
    #[serde(rename = "S")]
    databases: usize,
    #[serde(rename = "N")]
    files: usize,
    #[serde(rename = "K")]
    users: usize,
    sessions: Vec<StructureRun>,
    oracle: Option<DistributionReport>,
    pass: bool,
}

#[allow(clippy::too_many_arguments)]
fn audit_cmd(
    databases: usize,
    files: usize,
    users: usize,
    scheme: Scheme,
    sessions: usize,
    mutations: usize,
    oracle: bool,
    seed: u64,
    output: &Output,
) -> Result<(), Failure> {
    let users = if scheme == Scheme::Single { 1 } else { users };
    let mut runs = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..sessions as u64 {
        let mut cfg = SessionConfig::new(scheme, databases, files, users);
        cfg.seed = seed.wrapping_add(i);
        cfg.block_bytes = 1;
        let run = harness::run_session_full(&cfg)?;
        let report = audit::check_session(&run.bundle, &run.transcript)?;
        let n = mupir_core::subpacketization(databases, files)?;
        let mut detected = 0;
        for _ in 0..mutations {
            let m = audit::random_mutation(&run.bundle, files, users, n, &mut rng)?;
            let bad = audit::apply_mutation(&run.bundle, &m)?;
            if !audit::check_session(&bad, &run.transcript)?.pass() {
                detected += 1;
            }
        }
        runs.push(StructureRun {
            seed: cfg.seed,
            demand: run.report.demand.clone(),
            pass: report.pass() && run.report.ok(),
            first_failure: report
                .first_failure()
                .map(|v| format!("{}: {}", v.check, v.first_violation.clone().unwrap_or_default()))
                .or(run.report.audit_failure.clone())
                .or(run.report.decode_error.clone()),
            mutations_tried: mutations,
            mutations_detected: detected,
        });
    }
    let oracle = if oracle {
        Some(audit::demand_distribution_oracle(databases, files, users, scheme)?)
    } else {
        None
    };
    let pass = runs.iter().all(|r| r.pass && r.mutations_detected == r.mutations_tried)
        && oracle.as_ref().is_none_or(|o| o.equal);
    let result = AuditRun {
        scheme,
        databases,
        files,
        users,
        sessions: runs,
        oracle,
        pass,
    };
    let text = match output.format {
        Format::Json => json(&result),
        Format::Csv => {
            let mut s = String::from("seed,demand,pass,mutations_tried,mutations_detected\n");
            for r in &result.sessions {
                let d: Vec<String> = r.demand.iter().map(u32::to_string).collect();
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.seed,
                    d.join(" "),
                    r.pass,
                    r.mutations_tried,
                    r.mutations_detected
                ));
            }
            s
        }
    };
    emit(output, &text)?;
    if !pass {
        return Err(Failure::Audit("audit failed; see the report".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Pir(a) => {
            let cfg = session_config(Scheme::Single, &a, None, None)?;
            run_session_cmd(&cfg, &a.output)
        }
        Command::Mupir {
            session,
            users,
            base_policy,
        } => {
            let cfg = session_config(Scheme::Mupir, &session, users, base_policy)?;
            run_session_cmd(&cfg, &session.output)
        }
        // rates and sweep are deterministic; `--seed` is accepted for a uniform interface
        Command::Rates {
            databases,
            files,
            users,
            output,
            ..
        } => {
            let row = harness::rates_row(databases, files, users)?;
            let text = match output.format {
                Format::Csv => harness::to_csv(std::slice::from_ref(&row)),
                Format::Json => {
                    let dom = params::rate_dominance_check(databases, files, users)?;
                    json(&RatesReport {
                        row,
                        params: SchemeParams::new(databases, files, users)?,
                        rate_pir: format_rational(&params::pir_rate(databases, files)),
                        chord_margin: format_rational(&dom.chord_margin),
                        pd_margin: format_rational(&dom.pd_margin),
                        lemma42: dom.lemma42,
                    })
                }
            };
            emit(&output, &text)
        }
        Command::Sweep {
            s_range,
            n_range,
            k_range,
            output,
            ..
        } => {
            let rows = harness::sweep(
                parse_range(&s_range, "--s-range")?,
                parse_range(&n_range, "--n-range")?,
                parse_range(&k_range, "--k-range")?,
            )?;
            let text = match output.format {
                Format::Csv => harness::to_csv(&rows),
                Format::Json => json(&rows),
            };
            emit(&output, &text)
        }
        Command::Audit {
            databases,
            files,
            users,
            scheme,
            sessions,
            mutations,
            oracle,
            seed,
            output,
        } => {
            let scheme = match scheme {
                SchemeArg::Single => Scheme::Single,
                SchemeArg::Mupir => Scheme::Mupir,
            };
            audit_cmd(databases, files, users, scheme, sessions, mutations, oracle, seed, &output)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Decode(m)) => {
            eprintln!("decode failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Audit(m)) => {
            eprintln!("audit failure: {m}");
            ExitCode::from(4)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
