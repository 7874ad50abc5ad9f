//! Certificates for the Scholz bound `ℓ(2^n - 1) ≤ ℓ(n) + n - 1`.
//!
//! A [`ScholzCertificate`] bundles a chain program for `2^n - 1` with the
//! value of `ℓ(n)` it is measured against and where that value came from.
//! [`verify_certificate`] re-derives everything it can.

use std::fmt;
use std::ops::RangeInclusive;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{is_star, Target};
use crate::error::{Error, Result};
use crate::mersenne::{expand, family_double_mersenne, family_mersenne, MersenneProgram};
use crate::numeral::{family_params, lambda_floor};
use crate::search::{
    find_chain_within, lower_bound, minimal_length, minimal_star_length, oracle_length,
    oracle_lengths_up_to, DEFAULT_NODE_BUDGET, ORACLE_MAX_LIMIT,
};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default seed for every random choice (modular primes).
pub const DEFAULT_SEED: u64 = 0x5c0_1237;

/// Number of random primes used by modular validation.
pub const MODULAR_TRIALS: usize = 8;

/// Exact validation is used when `steps × limbs(2^n - 1)` stays below this.
pub const EXACT_LIMB_OPS: u64 = 100_000_000;

/// Largest `n` for which the grid also searches for a chain of length
/// `λ(n) + 4`.
pub const SEARCH_CONFIRM_LIMIT: u64 = 100_000;

/// Where the value of `ℓ(n)` in a certificate comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthProvenance {
    /// Exhaustive enumeration.
    Oracle,
    /// Branch and bound run to completion.
    SearchExact,
    /// Taken from the literature; only sanity-checked.
    Cited,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValidationMode {
    #[serde(rename = "exact")]
    Exact,
    /// Residues modulo random primes, plus the star structure for ordering.
    #[serde(rename = "modular+structural")]
    ModularStructural,
}

impl fmt::Display for ValidationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValidationMode::Exact => "exact",
            ValidationMode::ModularStructural => "modular+structural",
        })
    }
}

/// Whether exact evaluation of a program of `steps` steps for `2^n - 1`
/// fits the resource policy.
pub fn exact_is_affordable(n: u64, steps: usize) -> bool {
    let limbs = n / 64 + 1;
    (steps as u64).saturating_mul(limbs) < EXACT_LIMB_OPS
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScholzCertificate {
    pub n: u64,
    pub ell_n: u64,
    pub ell_provenance: LengthProvenance,
    pub mersenne: MersenneProgram,
    pub measured_length: u64,
    pub bound: u64,
    pub slack: i64,
    pub validation_mode: ValidationMode,
    pub toolkit_version: String,
    pub seed: u64,
}

impl ScholzCertificate {
    pub fn assemble(
        ell_n: u64,
        ell_provenance: LengthProvenance,
        mersenne: MersenneProgram,
        validation_mode: ValidationMode,
        seed: u64,
    ) -> Self {
        let n = mersenne.exponent();
        let measured_length = mersenne.len() as u64;
        let bound = ell_n + n - 1;
        Self {
            n,
            ell_n,
            ell_provenance,
            measured_length,
            bound,
            slack: bound as i64 - measured_length as i64,
            mersenne,
            validation_mode,
            toolkit_version: TOOLKIT_VERSION.to_string(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n: u64,
    pub pass: bool,
    pub measured_length: u64,
    pub bound: u64,
    pub slack: i64,
    pub validation_mode: ValidationMode,
    pub problems: Vec<String>,
}

impl VerificationReport {
    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(Error::Certificate(self.problems.join("; ")))
        }
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} n={} length={} bound={} slack={} mode={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.n,
            self.measured_length,
            self.bound,
            self.slack,
            self.validation_mode
        )?;
        for p in &self.problems {
            write!(f, "\n  - {p}")?;
        }
        Ok(())
    }
}

/// Re-validates the program, recomputes every derived field, and
/// recomputes `ℓ(n)` unless it is cited.
pub fn verify_certificate(cert: &ScholzCertificate) -> VerificationReport {
    let mut problems = Vec::new();
    let program = cert.mersenne.program();
    let actual_len = program.len() as u64;

    if cert.n == 0 {
        problems.push("n must be positive".to_string());
    }
    if cert.mersenne.exponent() != cert.n {
        problems.push(format!(
            "program is for 2^{}-1, certificate is for n = {}",
            cert.mersenne.exponent(),
            cert.n
        ));
    }
    if cert.measured_length != actual_len || cert.mersenne.claimed_length() as u64 != actual_len {
        problems.push(format!(
            "recorded length {} (claimed {}) but the program has {actual_len} steps",
            cert.measured_length,
            cert.mersenne.claimed_length()
        ));
    }
    let bound = (cert.ell_n + cert.n).saturating_sub(1);
    if cert.bound != bound {
        problems.push(format!(
            "bound should be ℓ(n) + n - 1 = {bound}, recorded {}",
            cert.bound
        ));
    }
    let slack = bound as i64 - actual_len as i64;
    if cert.slack != slack {
        problems.push(format!("slack should be {slack}, recorded {}", cert.slack));
    }
    if slack < 0 {
        problems.push(format!("chain exceeds the bound by {}", -slack));
    }

    let target = Target::Mersenne(cert.n);
    match cert.validation_mode {
        ValidationMode::Exact => {
            if let Err(e) = program.validate_exact(&target) {
                problems.push(format!("exact validation failed: {e}"));
            }
        }
        ValidationMode::ModularStructural => {
            if !is_star(program) {
                problems.push("modular mode needs a star program to certify ordering".to_string());
            }
            if !program.validate_modular(Some(&target), MODULAR_TRIALS, cert.seed) {
                problems.push("modular validation failed".to_string());
            }
        }
    }

    if cert.n > 0 {
        match cert.ell_provenance {
            LengthProvenance::Oracle => {
                if cert.n > ORACLE_MAX_LIMIT {
                    problems.push(format!("oracle only covers n ≤ {ORACLE_MAX_LIMIT}"));
                } else if u64::from(oracle_length(cert.n)) != cert.ell_n {
                    problems.push(format!(
                        "oracle gives ℓ({}) = {}",
                        cert.n,
                        oracle_length(cert.n)
                    ));
                }
            }
            LengthProvenance::SearchExact => {
                let r = minimal_length(cert.n, DEFAULT_NODE_BUDGET);
                if !r.exact {
                    problems.push("search could not confirm ℓ(n) within budget".to_string());
                } else if r.upper != cert.ell_n {
                    problems.push(format!("search gives ℓ({}) = {}", cert.n, r.upper));
                }
            }
            LengthProvenance::Cited => {
                let lb = lower_bound(cert.n);
                if cert.ell_n < lb {
                    problems.push(format!(
                        "cited ℓ(n) = {} is below the lower bound {lb}",
                        cert.ell_n
                    ));
                }
            }
        }
    }

    VerificationReport {
        n: cert.n,
        pass: problems.is_empty(),
        measured_length: actual_len,
        bound,
        slack,
        validation_mode: cert.validation_mode,
        problems,
    }
}

/// Picks exact validation when affordable, modular otherwise.
pub fn auto_mode(mersenne: &MersenneProgram) -> ValidationMode {
    if exact_is_affordable(mersenne.exponent(), mersenne.len()) {
        ValidationMode::Exact
    } else {
        ValidationMode::ModularStructural
    }
}

/// Chain for `2^(2n) - 1` from a verified certificate for `n`, adding
/// `n + 1` steps.
pub fn double_certified(cert: &ScholzCertificate) -> Result<MersenneProgram> {
    verify_certificate(cert).into_result()?;
    Ok(crate::mersenne::double_construction(&cert.mersenne))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallRow {
    pub n: u64,
    pub ell: u64,
    pub star_ell: u64,
    /// A star chain of length `ℓ(n)` exists, so expansion meets the bound.
    pub star_route: bool,
    pub report: VerificationReport,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallReport {
    pub limit: u64,
    pub rows: Vec<SmallRow>,
}

impl SmallReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.report.pass)
    }

    pub fn star_route_failures(&self) -> Vec<u64> {
        self.rows
            .iter()
            .filter(|r| !r.star_route)
            .map(|r| r.n)
            .collect()
    }
}

impl fmt::Display for SmallReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            writeln!(
                f,
                "{} n={} ℓ(n)={} ℓ*(n)={} length={} bound={} slack={}",
                if row.report.pass { "PASS" } else { "FAIL" },
                row.n,
                row.ell,
                row.star_ell,
                row.report.measured_length,
                row.report.bound,
                row.report.slack
            )?;
        }
        let failures = self.star_route_failures();
        if !failures.is_empty() {
            writeln!(f, "star route missing for n = {failures:?}")?;
        }
        write!(
            f,
            "{} of {} PASS",
            self.rows.iter().filter(|r| r.report.pass).count(),
            self.rows.len()
        )
    }
}

/// Largest limit accepted by [`scholz_check_small`].
pub const SMALL_CHECK_MAX: u64 = 64;

/// For each `n ≤ limit`: exact `ℓ(n)` from the oracle, a shortest star
/// chain, its expansion, and an exact certificate.
pub fn scholz_check_small(limit: u64, seed: u64) -> Result<SmallReport> {
    if limit > SMALL_CHECK_MAX {
        return Err(Error::LimitTooLarge {
            limit,
            max: SMALL_CHECK_MAX,
        });
    }
    let table = oracle_lengths_up_to(limit)?;
    let rows = (1..=limit)
        .map(|n| {
            let ell = u64::from(table[n as usize]);
            let star = minimal_star_length(n, DEFAULT_NODE_BUDGET);
            let witness = star
                .witness
                .clone()
                .expect("search always returns a witness");
            let mersenne = expand(&witness)?;
            let cert = ScholzCertificate::assemble(
                ell,
                LengthProvenance::Oracle,
                mersenne,
                ValidationMode::Exact,
                seed,
            );
            Ok(SmallRow {
                n,
                ell,
                star_ell: star.upper,
                star_route: star.exact && star.upper == ell,
                report: verify_certificate(&cert),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SmallReport { limit, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Exact wherever the resource policy allows.
    Exact,
    /// Modular everywhere except the `(1, 3)` instance.
    Modular,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub m: u64,
    pub k: u64,
    pub n: u64,
    pub lambda: u64,
    pub cited_ell: u64,
    pub report_n: VerificationReport,
    pub report_2n: VerificationReport,
    /// Length of a chain for `n` found by search, when `n` is small enough
    /// to try.
    pub searched_upper: Option<u64>,
    pub problems: Vec<String>,
}

impl GridCell {
    pub fn pass(&self) -> bool {
        self.problems.is_empty()
            && self.report_n.pass
            && self.report_2n.pass
            && self.searched_upper.is_none_or(|u| u <= self.cited_ell)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridReport {
    pub seed: u64,
    pub cells: Vec<GridCell>,
}

impl GridReport {
    pub fn all_pass(&self) -> bool {
        self.cells.iter().all(GridCell::pass)
    }
}

impl fmt::Display for GridReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cells {
            let search = match c.searched_upper {
                Some(u) => format!("search found length {u}"),
                None => "search skipped".to_string(),
            };
            writeln!(
                f,
                "(m={}, k={}) n={} λ(n)={} ℓ(n)=ℓ(2n)={} (cited), {search}",
                c.m, c.k, c.n, c.lambda, c.cited_ell
            )?;
            writeln!(f, "  n : {}", c.report_n)?;
            writeln!(f, "  2n: {}", c.report_2n)?;
            for p in &c.problems {
                writeln!(f, "  - {p}")?;
            }
        }
        let passed = self.cells.iter().filter(|c| c.pass()).count();
        write!(f, "{passed} of {} cells PASS", self.cells.len())
    }
}

fn grid_mode_for(mode: GridMode, m: u64, k: u64, mersenne: &MersenneProgram) -> ValidationMode {
    if (m, k) == (1, 3) {
        return ValidationMode::Exact;
    }
    match mode {
        GridMode::Exact => auto_mode(mersenne),
        GridMode::Modular => ValidationMode::ModularStructural,
    }
}

/// Builds and verifies certificates for `n` and `2n` for every family
/// member in the ranges. Cells run in parallel; the report is sorted by
/// `(m, k)`.
pub fn run_family_grid(
    m_range: RangeInclusive<u64>,
    k_range: RangeInclusive<u64>,
    mode: GridMode,
    seed: u64,
) -> GridReport {
    let pairs: Vec<(u64, u64)> = m_range
        .flat_map(|m| k_range.clone().map(move |k| (m, k)))
        .collect();
    let mut cells: Vec<GridCell> = pairs
        .par_iter()
        .map(|&(m, k)| family_cell(m, k, mode, seed))
        .collect();
    cells.sort_by_key(|c| (c.m, c.k));
    GridReport { seed, cells }
}

fn failed_report(n: u64, problem: String) -> VerificationReport {
    VerificationReport {
        n,
        pass: false,
        measured_length: 0,
        bound: 0,
        slack: 0,
        validation_mode: ValidationMode::Exact,
        problems: vec![problem],
    }
}

/// Certificates for `n` and `2n` of one family member.
pub fn family_certificates(
    m: u64,
    k: u64,
    mode: GridMode,
    seed: u64,
) -> Result<(ScholzCertificate, ScholzCertificate)> {
    let params = family_params(m, k)?;
    let ell = params.cited_length();
    let single = family_mersenne(m, k)?;
    let double = family_double_mersenne(m, k)?;
    let mode_n = grid_mode_for(mode, m, k, &single);
    let mode_2n = grid_mode_for(mode, m, k, &double);
    Ok((
        ScholzCertificate::assemble(ell, LengthProvenance::Cited, single, mode_n, seed),
        ScholzCertificate::assemble(ell, LengthProvenance::Cited, double, mode_2n, seed),
    ))
}

fn family_cell(m: u64, k: u64, mode: GridMode, seed: u64) -> GridCell {
    let params = match family_params(m, k) {
        Ok(p) => p,
        Err(e) => {
            return GridCell {
                m,
                k,
                n: 0,
                lambda: 0,
                cited_ell: 0,
                report_n: failed_report(0, e.to_string()),
                report_2n: failed_report(0, e.to_string()),
                searched_upper: None,
                problems: vec![e.to_string()],
            }
        }
    };
    let n = params.n_u64().unwrap_or(0);
    let mut problems = Vec::new();
    if lambda_floor(&params.n).ok() != Some(params.lambda()) {
        problems.push("λ(n) differs from 3m + k + 7".to_string());
    }
    let (report_n, report_2n) = match family_certificates(m, k, mode, seed) {
        Ok((a, b)) => (verify_certificate(&a), verify_certificate(&b)),
        Err(e) => (
            failed_report(n, e.to_string()),
            failed_report(2 * n, e.to_string()),
        ),
    };
    let searched_upper = (n > 0 && n <= SEARCH_CONFIRM_LIMIT).then(|| {
        match find_chain_within(n, params.cited_length(), DEFAULT_NODE_BUDGET) {
            Ok(Some(p)) => {
                let ok = p
                    .evaluate()
                    .map(|c| *c.last() == BigUint::from(n))
                    .unwrap_or(false);
                if !ok {
                    problems.push("search witness does not evaluate to n".to_string());
                }
                p.len() as u64
            }
            Ok(None) => {
                problems.push(format!(
                    "no chain of length {} found for n",
                    params.cited_length()
                ));
                u64::MAX
            }
            Err(e) => {
                problems.push(format!("upper-bound search: {e}"));
                u64::MAX
            }
        }
    });
    GridCell {
        m,
        k,
        n,
        lambda: params.lambda(),
        cited_ell: params.cited_length(),
        report_n,
        report_2n,
        searched_upper,
        problems,
    }
}
