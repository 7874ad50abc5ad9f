//! Chain representations and validation.
//!
//! A [`ChainProgram`] records only which earlier positions each step adds,
//! so a chain for `2^n - 1` costs `O(n)` words instead of `O(n^2)` bits.
//! [`AdditionChain`] is the evaluated form with every element materialized.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One step `a_t = a_i + a_j`, stored with `i ≥ j`.
pub type Step = (usize, usize);

/// An addition chain as a list of index pairs. Position 0 holds the
/// implicit starting element 1; step `t` (1-based) produces position `t`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainProgram {
    steps: Vec<Step>,
}

/// What a single step does relative to the element right before it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    /// `a_t = 2·a_{t-1}`.
    Doubling,
    /// `a_t = a_{t-1} + a_j` with `j < t-1`.
    AddSmaller,
    /// Neither summand is the preceding element.
    Other,
}

impl ChainProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a program from raw pairs, ordering each pair so that `i ≥ j`.
    pub fn from_steps<I: IntoIterator<Item = Step>>(steps: I) -> Self {
        Self {
            steps: steps
                .into_iter()
                .map(|(i, j)| if i >= j { (i, j) } else { (j, i) })
                .collect(),
        }
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            steps: Vec::with_capacity(capacity),
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Number of steps `r`; the chain has `r + 1` elements.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Index of the final element.
    pub fn last_index(&self) -> usize {
        self.steps.len()
    }

    /// Appends `a_i + a_j` and returns the index of the new element.
    pub fn push(&mut self, i: usize, j: usize) -> usize {
        let step = if i >= j { (i, j) } else { (j, i) };
        self.steps.push(step);
        self.steps.len()
    }

    /// Appends a doubling of the current last element.
    pub fn push_double(&mut self) -> usize {
        let last = self.last_index();
        self.push(last, last)
    }

    pub fn step_kind(&self, t: usize) -> StepKind {
        let (i, j) = self.steps[t - 1];
        if i == t - 1 && j == t - 1 {
            StepKind::Doubling
        } else if i == t - 1 {
            StepKind::AddSmaller
        } else {
            StepKind::Other
        }
    }

    /// Checks that every step only references strictly earlier positions.
    pub fn check_structure(&self) -> Result<()> {
        for (idx, &(i, j)) in self.steps.iter().enumerate() {
            let t = idx + 1;
            if i >= t || j >= t || i < j {
                return Err(Error::BadIndex { step: t });
            }
        }
        Ok(())
    }

    /// Evaluates every element exactly.
    pub fn evaluate(&self) -> Result<AdditionChain> {
        self.check_structure()?;
        let mut elements: Vec<BigUint> = Vec::with_capacity(self.len() + 1);
        elements.push(BigUint::one());
        for (idx, &(i, j)) in self.steps.iter().enumerate() {
            let t = idx + 1;
            let value = &elements[i] + &elements[j];
            if value <= elements[t - 1] {
                return Err(Error::NonMonotonic { step: t });
            }
            elements.push(value);
        }
        Ok(AdditionChain { elements })
    }

    /// Evaluates in machine words, for the small chains the searches produce.
    pub fn evaluate_u64(&self) -> Result<Vec<u64>> {
        self.check_structure()?;
        let mut elements = Vec::with_capacity(self.len() + 1);
        elements.push(1u64);
        for (idx, &(i, j)) in self.steps.iter().enumerate() {
            let t = idx + 1;
            let value = elements[i]
                .checked_add(elements[j])
                .ok_or(Error::Overflow { step: t })?;
            if value <= elements[t - 1] {
                return Err(Error::NonMonotonic { step: t });
            }
            elements.push(value);
        }
        Ok(elements)
    }

    /// Exact validation that keeps only elements some later step still
    /// reads, so long Mersenne chains validate in memory proportional to
    /// their live set rather than their full length.
    pub fn validate_exact(&self, target: &Target) -> Result<()> {
        self.check_structure()?;
        let r = self.len();
        let mut last_use = vec![0usize; r + 1];
        for (idx, &(i, j)) in self.steps.iter().enumerate() {
            last_use[i] = idx + 1;
            last_use[j] = idx + 1;
        }
        last_use[r] = usize::MAX;

        let mut live: Vec<Option<BigUint>> = vec![None; r + 1];
        live[0] = Some(BigUint::one());
        for (idx, &(i, j)) in self.steps.iter().enumerate() {
            let t = idx + 1;
            let value = {
                let a = live[i].as_ref().expect("operand kept alive until last use");
                let b = live[j].as_ref().expect("operand kept alive until last use");
                a + b
            };
            let prev = live[t - 1].as_ref().expect("predecessor kept alive");
            if &value <= prev {
                return Err(Error::NonMonotonic { step: t });
            }
            live[t] = Some(value);
            for x in [i, j, t - 1] {
                if last_use[x] <= t {
                    live[x] = None;
                }
            }
        }
        let last = live[r].take().expect("final element kept");
        let expected = target.to_biguint();
        if last != expected {
            return Err(Error::WrongTarget {
                expected: describe(&expected),
                actual: describe(&last),
            });
        }
        Ok(())
    }

    /// Evaluates the program modulo `trials` random 62-bit primes drawn from
    /// `seed` and compares the final residue with the target's.
    ///
    /// Only arithmetic is checked; ordering of elements is invisible modulo a
    /// prime. Pair with [`is_star`] when strict increase must be certified
    /// without exact evaluation.
    pub fn validate_modular(&self, target: Option<&Target>, trials: usize, seed: u64) -> bool {
        if self.check_structure().is_err() {
            return false;
        }
        random_primes(trials, seed).into_iter().all(|p| {
            let last = self.residue(p);
            target.is_none_or(|t| t.residue(p) == last)
        })
    }

    /// Final element reduced modulo `p < 2^63`.
    fn residue(&self, p: u64) -> u64 {
        let mut vals = Vec::with_capacity(self.len() + 1);
        vals.push(1 % p);
        for &(i, j) in &self.steps {
            let s = vals[i] + vals[j];
            vals.push(if s >= p { s - p } else { s });
        }
        *vals.last().unwrap()
    }
}

fn describe(v: &BigUint) -> String {
    if v.bits() <= 128 {
        v.to_string()
    } else {
        format!(
            "<{}-bit value, low word {:#x}>",
            v.bits(),
            v.iter_u64_digits().next().unwrap_or(0)
        )
    }
}

/// Value a chain is expected to reach.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Value(BigUint),
    /// `2^e - 1`, kept symbolic so residues never need the full value.
    Mersenne(u64),
}

impl Target {
    pub fn to_biguint(&self) -> BigUint {
        match self {
            Target::Value(v) => v.clone(),
            Target::Mersenne(e) => (BigUint::one() << *e) - 1u32,
        }
    }

    pub fn residue(&self, p: u64) -> u64 {
        match self {
            Target::Value(v) => (v % p).to_u64().unwrap(),
            Target::Mersenne(e) => (pow_mod(2, *e, p) + p - 1) % p,
        }
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `count` distinct primes in `[2^61, 2^62)`, reproducible from `seed`.
pub fn random_primes(count: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut primes = Vec::with_capacity(count);
    while primes.len() < count {
        let candidate = rng.gen_range((1u64 << 61)..(1u64 << 62)) | 1;
        if is_prime_u64(candidate) && !primes.contains(&candidate) {
            primes.push(candidate);
        }
    }
    primes
}

/// Evaluated chain `1 = a_0 < a_1 < … < a_r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdditionChain {
    elements: Vec<BigUint>,
}

impl AdditionChain {
    /// Validates a list of elements as an addition chain.
    pub fn from_elements(elements: Vec<BigUint>) -> Result<Self> {
        if elements.first().is_none_or(|a| !a.is_one()) {
            return Err(Error::BadIndex { step: 0 });
        }
        let chain = Self { elements };
        chain.to_program()?;
        Ok(chain)
    }

    pub fn elements(&self) -> &[BigUint] {
        &self.elements
    }

    /// Number of steps, one less than the number of elements.
    pub fn length(&self) -> usize {
        self.elements.len() - 1
    }

    pub fn last(&self) -> &BigUint {
        self.elements.last().unwrap()
    }

    pub fn contains(&self, value: &BigUint) -> bool {
        self.elements.binary_search(value).is_ok()
    }

    /// Recovers a program, choosing for each element the pair with the
    /// largest first index (then the largest second index).
    pub fn to_program(&self) -> Result<ChainProgram> {
        let mut program = ChainProgram::with_capacity(self.length());
        for t in 1..self.elements.len() {
            let target = &self.elements[t];
            if *target <= self.elements[t - 1] {
                return Err(Error::NonMonotonic { step: t });
            }
            let pair = (0..t).rev().find_map(|i| {
                if self.elements[i].clone() << 1u32 < *target {
                    return None;
                }
                let rest = target - &self.elements[i];
                self.elements[..=i]
                    .binary_search(&rest)
                    .ok()
                    .map(|j| (i, j))
            });
            match pair {
                Some((i, j)) => program.push(i, j),
                None => return Err(Error::BadIndex { step: t }),
            };
        }
        Ok(program)
    }
}

impl fmt::Display for AdditionChain {
    /// One decimal element per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.elements {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Parses the one-element-per-line text format; blank lines are ignored.
pub fn parse_chain_text(text: &str) -> Result<AdditionChain> {
    let elements = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(t, l)| {
            l.parse::<BigUint>()
                .map_err(|_| Error::BadIndex { step: t })
        })
        .collect::<Result<Vec<_>>>()?;
    AdditionChain::from_elements(elements)
}

/// Left-to-right double-and-add chain, of length `λ(n) + ν(n) - 1`.
pub fn binary_chain(n: &BigUint) -> Result<ChainProgram> {
    if n.is_zero() {
        return Err(Error::ZeroInput);
    }
    let bits = n.bits();
    let mut program = ChainProgram::with_capacity((bits + n.count_ones()) as usize);
    for b in (0..bits - 1).rev() {
        program.push_double();
        if n.bit(b) {
            let last = program.last_index();
            program.push(last, 0);
        }
    }
    Ok(program)
}

/// Factor method: a chain for `u` followed by the chain for `v` scaled by
/// `u`, giving a chain for `u·v` of length `len(p) + len(q)`.
pub fn factor_compose(p: &ChainProgram, q: &ChainProgram) -> ChainProgram {
    let offset = p.len();
    let mut out = ChainProgram::with_capacity(p.len() + q.len());
    out.steps.extend_from_slice(&p.steps);
    out.steps
        .extend(q.steps.iter().map(|&(i, j)| (i + offset, j + offset)));
    out
}

/// Every step adds the immediately preceding element.
///
/// A star program is strictly increasing by construction: each element
/// is its predecessor plus a positive summand.
pub fn is_star(program: &ChainProgram) -> bool {
    program
        .steps
        .iter()
        .enumerate()
        .all(|(idx, &(i, _))| i == idx)
}

/// Sum over all steps of the smaller summand.
pub fn small_summand_total(program: &ChainProgram) -> Result<BigUint> {
    let chain = program.evaluate()?;
    let e = chain.elements();
    Ok(program
        .steps
        .iter()
        .map(|&(i, j)| std::cmp::min(&e[i], &e[j]))
        .sum())
}

pub fn contains(chain: &AdditionChain, value: &BigUint) -> bool {
    chain.contains(value)
}
