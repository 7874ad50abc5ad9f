use std::fs;
use std::io::{self, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use addchain::chain::{binary_chain, parse_chain_text};
use addchain::mersenne::expand;
use addchain::scholz::{
    auto_mode, family_certificates, run_family_grid, scholz_check_small, verify_certificate,
    GridMode, LengthProvenance, ScholzCertificate, DEFAULT_SEED,
};
use addchain::search::{
    chain_containing, minimal_length_with, minimal_star_length_with, oracle_lengths_up_to,
    SearchMode, DEFAULT_NODE_BUDGET,
};
use addchain::ChainProgram;
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;

/// Addition chains, short chains for 2^n - 1, and Scholz-bound certificates.
#[derive(Debug, Parser)]
#[command(name = "addchain", version)]
struct CommandConfig {
    #[command(subcommand)]
    command: Command,

    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Seed for every random choice (modular validation primes).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Worker threads for grid runs and parallel search.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact shortest chain length ℓ(n).
    Len {
        n: u64,
        #[command(flatten)]
        budget: Budget,
    },
    /// A shortest chain for n.
    Chain {
        n: u64,
        /// Only consider star chains.
        #[arg(long)]
        star: bool,
        /// Require this element to appear in the chain.
        #[arg(long, value_name = "M")]
        contains: Option<u64>,
        /// Longest chain to consider with --contains.
        #[arg(long, value_name = "L", requires = "contains")]
        max_len: Option<u64>,
        #[command(flatten)]
        budget: Budget,
    },
    /// The double-and-add chain for n.
    Binary { n: BigUint },
    /// A chain for 2^n - 1.
    Mersenne {
        /// Exponent n; omit when reading a chain with --from.
        #[arg(required_unless_present = "from", conflicts_with = "from")]
        n: Option<u64>,
        /// Chain for n to expand: one decimal element per line, or program JSON.
        #[arg(long, value_name = "FILE")]
        from: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Expand)]
        method: Method,
        /// Emit a certificate instead of the chain.
        #[arg(long)]
        cert: bool,
        #[command(flatten)]
        budget: Budget,
    },
    /// Certificates for the seven-bit family members and their doubles.
    Family {
        #[arg(long, value_name = "A..B", value_parser = parse_range)]
        m: RangeInclusive<u64>,
        #[arg(long, value_name = "C..D", value_parser = parse_range)]
        k: RangeInclusive<u64>,
        /// Validate exactly wherever affordable, not only the (1, 3) member.
        #[arg(long)]
        exact: bool,
        /// Also write each certificate as JSON into this directory.
        #[arg(long, value_name = "DIR")]
        cert_dir: Option<PathBuf>,
    },
    /// Check a certificate written by `mersenne --cert` or `family --cert-dir`.
    Verify { cert: PathBuf },
    /// Certify the bound for every n up to the limit.
    ScholzSmall {
        #[arg(long, default_value_t = 32)]
        limit: u64,
    },
    /// Exact ℓ(n) for every n up to the limit, as CSV.
    OracleTable {
        #[arg(long)]
        limit: u64,
    },
}

#[derive(Debug, Args)]
struct Budget {
    /// Maximum number of search node expansions.
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Expand a shortest star chain for n.
    Expand,
    /// Expand the double-and-add chain for n.
    Binary,
}

fn parse_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(format!("empty range {s}"));
            }
            Ok(a..=b)
        }
        None => parse(s).map(|v| v..=v),
    }
}

/// Outcome of a command that ran to completion.
enum Status {
    Pass,
    Fail,
}

/// Failure before any result was produced.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<addchain::Error> for Failure {
    fn from(e: addchain::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

fn search_mode(config: &CommandConfig) -> SearchMode {
    if config.jobs.is_some_and(|j| j > 1) {
        SearchMode::Parallel
    } else {
        SearchMode::Sequential
    }
}

fn write_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(anyhow::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn print_program(out: &mut dyn Write, program: &ChainProgram, json: bool) -> Result<(), Failure> {
    if json {
        return write_json(out, program);
    }
    let chain = program
        .evaluate()
        .context("program does not evaluate to a valid chain")?;
    write!(out, "{chain}")?;
    Ok(())
}

fn read_chain(path: &Path) -> Result<ChainProgram, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        let program: ChainProgram =
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        program
            .evaluate()
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(program)
    } else {
        let chain =
            parse_chain_text(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(chain.to_program().map_err(|e| usage(e.to_string()))?)
    }
}

fn run(config: &CommandConfig, out: &mut dyn Write) -> Result<Status, Failure> {
    let mode = search_mode(config);
    match &config.command {
        Command::Len { n, budget } => {
            if *n == 0 {
                return Err(usage("n must be positive"));
            }
            let r = minimal_length_with(*n, budget.budget, mode);
            if config.json {
                write_json(out, &r)?;
            } else if r.exact {
                writeln!(out, "ℓ({n}) = {}", r.upper)?;
            } else {
                writeln!(
                    out,
                    "ℓ({n}) in [{}, {}] (budget exhausted after {} expansions)",
                    r.lower, r.upper, r.nodes_expanded
                )?;
            }
            Ok(Status::Pass)
        }
        Command::Chain {
            n,
            star,
            contains,
            max_len,
            budget,
        } => {
            if *n == 0 {
                return Err(usage("n must be positive"));
            }
            let program = match contains {
                Some(c) => {
                    if *c == 0 || c >= n {
                        return Err(usage("--contains must be positive and smaller than n"));
                    }
                    let max_len = max_len.unwrap_or_else(|| 2 * (64 - n.leading_zeros() as u64));
                    match chain_containing(*n, *c, max_len, *star, budget.budget) {
                        Ok(Some(p)) => p,
                        Ok(None) => {
                            eprintln!("no chain of length <= {max_len} for {n} contains {c}");
                            return Ok(Status::Fail);
                        }
                        Err(e) => {
                            eprintln!("{e}");
                            return Ok(Status::Fail);
                        }
                    }
                }
                None => {
                    let r = if *star {
                        minimal_star_length_with(*n, budget.budget, mode)
                    } else {
                        minimal_length_with(*n, budget.budget, mode)
                    };
                    if !r.exact {
                        eprintln!(
                            "budget exhausted: length in [{}, {}], printing the best chain found",
                            r.lower, r.upper
                        );
                    }
                    r.witness.expect("search always returns a witness")
                }
            };
            print_program(out, &program, config.json)?;
            Ok(Status::Pass)
        }
        Command::Binary { n } => {
            let program = binary_chain(n).map_err(|e| usage(e.to_string()))?;
            print_program(out, &program, config.json)?;
            Ok(Status::Pass)
        }
        Command::Mersenne {
            n,
            from,
            method,
            cert,
            budget,
        } => {
            let base = match (n, from) {
                (_, Some(path)) => read_chain(path)?,
                (Some(0), None) => return Err(usage("n must be positive")),
                (Some(n), None) => match method {
                    Method::Expand => minimal_star_length_with(*n, budget.budget, mode)
                        .witness
                        .expect("search always returns a witness"),
                    Method::Binary => binary_chain(&BigUint::from(*n)).unwrap(),
                },
                (None, None) => return Err(usage("give n or --from")),
            };
            let mersenne = expand(&base).context("expanding the chain")?;
            if *cert {
                let exponent = mersenne.exponent();
                let r = minimal_length_with(exponent, budget.budget, mode);
                if !r.exact {
                    eprintln!("could not determine ℓ({exponent}) within the budget");
                    return Ok(Status::Fail);
                }
                let mode = auto_mode(&mersenne);
                let c = ScholzCertificate::assemble(
                    r.upper,
                    LengthProvenance::SearchExact,
                    mersenne,
                    mode,
                    config.seed,
                );
                write_json(out, &c)?;
                return Ok(if c.slack >= 0 {
                    Status::Pass
                } else {
                    Status::Fail
                });
            }
            if config.json {
                write_json(out, &mersenne)?;
            } else {
                print_program(out, mersenne.program(), false)?;
            }
            Ok(Status::Pass)
        }
        Command::Family {
            m,
            k,
            exact,
            cert_dir,
        } => {
            if *m.start() < 1 || *k.start() < 3 {
                return Err(usage("family members need m >= 1 and k >= 3"));
            }
            let grid_mode = if *exact {
                GridMode::Exact
            } else {
                GridMode::Modular
            };
            let report = run_family_grid(m.clone(), k.clone(), grid_mode, config.seed);
            if let Some(dir) = cert_dir {
                write_family_certs(dir, m, k, grid_mode, config.seed)?;
            }
            if config.json {
                write_json(out, &report)?;
            } else {
                writeln!(out, "{report}")?;
            }
            Ok(if report.all_pass() {
                Status::Pass
            } else {
                Status::Fail
            })
        }
        Command::Verify { cert } => {
            let text =
                fs::read_to_string(cert).with_context(|| format!("reading {}", cert.display()))?;
            let parsed: ScholzCertificate = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: {e}", cert.display())))?;
            let report = verify_certificate(&parsed);
            if config.json {
                write_json(out, &report)?;
            } else {
                writeln!(out, "{report}")?;
            }
            Ok(if report.pass {
                Status::Pass
            } else {
                Status::Fail
            })
        }
        Command::ScholzSmall { limit } => {
            let report =
                scholz_check_small(*limit, config.seed).map_err(|e| usage(e.to_string()))?;
            if config.json {
                write_json(out, &report)?;
            } else {
                writeln!(out, "{report}")?;
            }
            Ok(if report.all_pass() {
                Status::Pass
            } else {
                Status::Fail
            })
        }
        Command::OracleTable { limit } => {
            let table = oracle_lengths_up_to(*limit).map_err(|e| usage(e.to_string()))?;
            if config.json {
                let rows: Vec<(u64, u32)> = (1..=*limit).map(|n| (n, table[n as usize])).collect();
                write_json(out, &rows)?;
            } else {
                writeln!(out, "n,ell")?;
                for n in 1..=*limit {
                    writeln!(out, "{n},{}", table[n as usize])?;
                }
            }
            Ok(Status::Pass)
        }
    }
}

fn write_family_certs(
    dir: &Path,
    m: &RangeInclusive<u64>,
    k: &RangeInclusive<u64>,
    mode: GridMode,
    seed: u64,
) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for mi in m.clone() {
        for ki in k.clone() {
            let (single, double) = family_certificates(mi, ki, mode, seed)?;
            for (suffix, cert) in [("n", single), ("2n", double)] {
                let path = dir.join(format!("family-m{mi}-k{ki}-{suffix}.json"));
                let json = serde_json::to_string(&cert).map_err(anyhow::Error::from)?;
                fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().map(io::Error::kind) == Some(io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<serde_json::Error>()
                .and_then(serde_json::Error::io_error_kind)
                == Some(io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let config = CommandConfig::parse();
    if let Some(jobs) = config.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = match run(&config, &mut out) {
        Ok(Status::Pass) => 0,
        Ok(Status::Fail) => 1,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            2
        }
        Err(Failure::Runtime(e)) => {
            if is_broken_pipe(&e) {
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {e:#}");
            1
        }
    };
    let _ = out.flush();
    ExitCode::from(code)
}
