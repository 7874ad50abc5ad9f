//! Chains for Mersenne numbers `2^N - 1`.
//!
//! Everything here rests on one identity:
//!
//! ```text
//! 2^(A+B) - 1 = 2^B · (2^A - 1) + (2^B - 1)
//! ```
//!
//! Starting from `2^A - 1`, `B` doublings followed by one addition of an
//! already present `2^B - 1` reach `2^(A+B) - 1` in `B + 1` steps. Applying
//! it to every step of a chain for `n` turns that chain into a chain for
//! `2^n - 1` ([`expand`]); applying it with `B = A` is the factor method on
//! `(2^A - 1)(2^A + 1)` ([`double_construction`]).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::{is_star, ChainProgram};
use crate::error::{Error, Result};
use crate::numeral::{family_double_shift, family_params, family_shift, FamilyParams};

/// How a [`MersenneProgram`] was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionTag {
    Expand,
    Double,
    Sum,
    C1Mersenne,
    Family,
    FamilyDouble,
}

/// A chain program whose last element is `2^exponent - 1`, together with
/// the positions of every other Mersenne number `2^e - 1` it produces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "MersenneJson", try_from = "MersenneJson")]
pub struct MersenneProgram {
    exponent: u64,
    program: ChainProgram,
    provided: BTreeMap<u64, usize>,
    tag: ConstructionTag,
    claimed_length: usize,
}

#[derive(Serialize, Deserialize)]
struct MersenneJson {
    exponent: u64,
    steps: Vec<(usize, usize)>,
    tag: ConstructionTag,
    claimed_length: usize,
    #[serde(default)]
    provided_mersennes: Vec<(u64, usize)>,
}

impl From<MersenneProgram> for MersenneJson {
    fn from(m: MersenneProgram) -> Self {
        Self {
            exponent: m.exponent,
            steps: m.program.steps().to_vec(),
            tag: m.tag,
            claimed_length: m.claimed_length,
            provided_mersennes: m.provided.into_iter().collect(),
        }
    }
}

impl TryFrom<MersenneJson> for MersenneProgram {
    type Error = Error;

    fn try_from(j: MersenneJson) -> Result<Self> {
        let program = ChainProgram::from_steps(j.steps);
        program.check_structure()?;
        let len = program.len();
        if let Some(&(e, _)) = j.provided_mersennes.iter().find(|&&(_, idx)| idx > len) {
            return Err(Error::ContainmentMissing { exponent: e });
        }
        Ok(Self {
            exponent: j.exponent,
            program,
            provided: j.provided_mersennes.into_iter().collect(),
            tag: j.tag,
            claimed_length: j.claimed_length,
        })
    }
}

impl MersenneProgram {
    /// The one-element chain `{1}`, i.e. `2^1 - 1`.
    pub fn unit() -> Self {
        Self {
            exponent: 1,
            program: ChainProgram::new(),
            provided: BTreeMap::from([(1, 0)]),
            tag: ConstructionTag::Expand,
            claimed_length: 0,
        }
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn program(&self) -> &ChainProgram {
        &self.program
    }

    pub fn into_program(self) -> ChainProgram {
        self.program
    }

    pub fn len(&self) -> usize {
        self.program.len()
    }

    pub fn is_empty(&self) -> bool {
        self.program.is_empty()
    }

    pub fn tag(&self) -> ConstructionTag {
        self.tag
    }

    /// Length recorded when the program was built or deserialized.
    pub fn claimed_length(&self) -> usize {
        self.claimed_length
    }

    /// Exponents `e` with `2^e - 1` known to be an element.
    pub fn provided_mersennes(&self) -> impl Iterator<Item = u64> + '_ {
        self.provided.keys().copied()
    }

    pub fn provides(&self, exponent: u64) -> bool {
        self.provided.contains_key(&exponent)
    }

    /// Position of `2^e - 1` in the program, if recorded.
    pub fn index_of(&self, exponent: u64) -> Option<usize> {
        self.provided.get(&exponent).copied()
    }

    /// Appends `b` doublings of the final element, then `2^b - 1`.
    fn append_sum(&mut self, b: u64, tag: ConstructionTag) -> Result<()> {
        let add = self
            .index_of(b)
            .ok_or(Error::ContainmentMissing { exponent: b })?;
        for _ in 0..b {
            self.program.push_double();
        }
        let last = self.program.last_index();
        let idx = self.program.push(last, add);
        self.exponent += b;
        self.provided.insert(self.exponent, idx);
        self.tag = tag;
        self.claimed_length = self.program.len();
        Ok(())
    }
}

/// `(2^a - 1) · 2^s`; ordered by value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Shifted {
    a: u64,
    s: u64,
}

impl Ord for Shifted {
    fn cmp(&self, other: &Self) -> Ordering {
        // The value lies in [2^(a+s-1), 2^(a+s)); for equal a+s it is
        // 2^(a+s) - 2^s, larger when s is smaller.
        (self.a + self.s, self.a).cmp(&(other.a + other.s, other.a))
    }
}

impl PartialOrd for Shifted {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Turns a chain for `n` into a chain for `2^n - 1`.
///
/// Each step `a_t = a_i + a_j` (`a_i ≥ a_j`) becomes `a_j` doublings of
/// `2^(a_i) - 1` and one addition of `2^(a_j) - 1`. The smaller summand is
/// itself an element of the input, so `2^(a_j) - 1` is always available
/// and the expansion never fails.
///
/// When the input is a star chain the emitted values already increase and
/// the result has `len(p) + small_summand_total(p) = n + len(p) - 1` steps.
/// Otherwise a doubling may restart below the current maximum, and two
/// steps may double the same `2^a - 1`; the values are sorted and repeats
/// merged, see [`expand_counted`].
pub fn expand(p: &ChainProgram) -> Result<MersenneProgram> {
    expand_counted(p).map(|(m, _)| m)
}

/// [`expand`], also returning how many repeated values were merged, so
/// `len(result) + merged = len(p) + small_summand_total(p)`.
pub fn expand_counted(p: &ChainProgram) -> Result<(MersenneProgram, usize)> {
    let values = p.evaluate_u64()?;
    enum Def {
        Root,
        Double(Shifted),
        Add(Shifted, Shifted),
    }
    let mut defs: BTreeMap<Shifted, Def> = BTreeMap::new();
    defs.insert(Shifted { a: 1, s: 0 }, Def::Root);
    let mut merged = 0usize;
    for &(i, j) in p.steps() {
        let (hi, lo) = (values[i], values[j]);
        for s in 1..=lo {
            let key = Shifted { a: hi, s };
            let def = Def::Double(Shifted { a: hi, s: s - 1 });
            if defs.insert(key, def).is_some() {
                merged += 1;
            }
        }
        let key = Shifted { a: hi + lo, s: 0 };
        let def = Def::Add(Shifted { a: hi, s: lo }, Shifted { a: lo, s: 0 });
        if defs.insert(key, def).is_some() {
            merged += 1;
        }
    }

    let index: BTreeMap<Shifted, usize> = defs.keys().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut program = ChainProgram::with_capacity(defs.len() - 1);
    let mut provided = BTreeMap::new();
    for (key, def) in &defs {
        let idx = match def {
            Def::Root => 0,
            Def::Double(x) => program.push(index[x], index[x]),
            Def::Add(x, y) => program.push(index[x], index[y]),
        };
        if key.s == 0 {
            provided.insert(key.a, idx);
        }
    }
    let exponent = *values.last().unwrap();
    debug_assert_eq!(provided.get(&exponent), Some(&program.len()));
    let claimed_length = program.len();
    Ok((
        MersenneProgram {
            exponent,
            program,
            provided,
            tag: ConstructionTag::Expand,
            claimed_length,
        },
        merged,
    ))
}

/// From `2^A - 1` to `2^(2A) - 1 = (2^A - 1)(2^A + 1)` in `A + 1` steps.
pub fn double_construction(q: &MersenneProgram) -> MersenneProgram {
    let mut out = q.clone();
    out.append_sum(q.exponent, ConstructionTag::Double)
        .expect("the final element is always provided");
    out
}

/// From `2^A - 1`, containing `2^B - 1`, to `2^(A+B) - 1` in `B + 1` steps.
pub fn sum_construction(q: &MersenneProgram, a: u64, b: u64) -> Result<MersenneProgram> {
    if q.exponent != a {
        return Err(Error::ExponentMismatch {
            expected: a,
            actual: q.exponent,
        });
    }
    if a <= b {
        return Err(Error::SumOrder { a, b });
    }
    let mut out = q.clone();
    out.append_sum(b, ConstructionTag::Sum)?;
    Ok(out)
}

fn doubling_prefix(program: &mut ChainProgram, count: u64) {
    for _ in 0..count {
        program.push_double();
    }
}

/// `1, 2, …, 2^(m+1), 2^(m+2), 3·2^(m+1), c2`: a star chain for
/// `c2 = 3·2^(m+1) + 1` of length `m + 4` passing through `2^(m+1)`.
pub fn c2_chain(m: u64) -> ChainProgram {
    let mut p = ChainProgram::new();
    doubling_prefix(&mut p, m + 1);
    let pow = p.last_index();
    let next = p.push_double();
    let three = p.push(next, pow);
    p.push(three, 0);
    p
}

/// Chain for `c1 = 3·c2 + 2^(m+1)` of length `m + 7` containing `c2`:
/// `1, 2, …, 2^(m+1), 2^(m+2), 3·2^(m+1), c2, 2·c2, 3·c2, c1`.
pub fn c1_chain(m: u64) -> ChainProgram {
    let mut p = c2_chain(m);
    let pow = m as usize + 1;
    let c2 = p.last_index();
    let twice = p.push_double();
    let thrice = p.push(twice, c2);
    p.push(thrice, pow);
    p
}

/// Star chain for `c3 = 2^(m+4) + 2^(m+2) + 3` of length `m + 6` containing
/// `c4 = 2^(m+3) + 2^(m+2) + 2`:
/// `1, 2, …, 2^(m+2), 2^(m+2) + 1, 2^(m+3) + 1, c4, c3`.
pub fn c3_chain(m: u64) -> ChainProgram {
    let mut p = ChainProgram::new();
    doubling_prefix(&mut p, m + 2);
    let pow = p.last_index();
    let plus_one = p.push(pow, 0);
    let upper = p.push(plus_one, pow);
    let c4 = p.push(upper, plus_one);
    p.push(c4, upper);
    p
}

/// Chain for `2^c1 - 1` of length `c1 + m + 6` containing `2^c2 - 1`.
///
/// Uses `2^c1 - 1 = 2^(2^(m+1)) · (2^(3·c2) - 1) + (2^(2^(m+1)) - 1)`:
/// expand the star chain for `c2` (which passes through `2^(m+1)`), square
/// up to `2^(2·c2) - 1`, add `c2` to reach `2^(3·c2) - 1`, then add
/// `2^(m+1)`.
pub fn mersenne_c1(m: u64) -> Result<MersenneProgram> {
    let params = family_params(m, 3)?;
    let (c1, c2) = (params.c1_u64(), params.c2_u64());
    let pow = 1u64 << (m + 1);

    let base = expand(&c2_chain(m))?;
    ensure(
        base.exponent == c2 && base.provides(pow),
        "expanded c2 chain",
    )?;
    let squared = double_construction(&base);
    let cubed = sum_construction(&squared, 2 * c2, c2)?;
    let mut out = sum_construction(&cubed, 3 * c2, pow)?;
    out.tag = ConstructionTag::C1Mersenne;

    ensure(out.exponent == c1, "final exponent is c1")?;
    ensure(out.len() as u64 == c1 + m + 6, "length c1 + m + 6")?;
    ensure(
        out.provides(c2) && out.provides(pow),
        "2^c2 - 1 and 2^(2^(m+1)) - 1 present",
    )?;
    Ok(out)
}

fn ensure(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Construction(what.to_string()))
    }
}

fn checked_exponent(params: &FamilyParams, value: &num_bigint::BigUint) -> Result<u64> {
    use num_traits::ToPrimitive;
    value.to_u64().ok_or_else(|| {
        Error::Construction(format!(
            "(m, k) = ({}, {}) gives an exponent too large to build",
            params.m, params.k
        ))
    })
}

/// Chain for `2^n - 1` with `n = c1·2^(2m+k+3) + c2`.
///
/// Starts from [`mersenne_c1`], squares `2m+k+3` times to reach
/// `2^(c1·2^(2m+k+3)) - 1`, then adds `c2`. The result has
/// `n + 3m + k + 10 = (λ(n) + 4) + n - 1` steps.
pub fn family_mersenne(m: u64, k: u64) -> Result<MersenneProgram> {
    let params = family_params(m, k)?;
    let n = checked_exponent(&params, &params.n)?;
    let c2 = params.c2_u64();

    let mut q = mersenne_c1(m)?;
    for _ in 0..family_shift(m, k) {
        q = double_construction(&q);
    }
    let mut out = sum_construction(&q, n - c2, c2)?;
    out.tag = ConstructionTag::Family;

    let len = out.len() as u64;
    ensure(out.exponent == n, "final exponent is n")?;
    ensure(len == n + 3 * m + k + 10, "length n + 3m + k + 10")?;
    ensure(
        len == params.cited_length() + n - 1,
        "length (λ(n) + 4) + n - 1",
    )?;
    ensure(is_star(&out.program), "star structure")?;
    Ok(out)
}

/// Chain for `2^(2n) - 1` with `2n = c3·2^(2m+k+4) + c4`.
///
/// Expands the star chain [`c3_chain`] (giving `2^c3 - 1` with `2^c4 - 1`
/// inside, `c3 + m + 5` steps), squares `2m+k+4` times, then adds `c4`.
/// The result has `2n + 3m + k + 10 = (λ(n) + 4) + 2n - 1` steps.
pub fn family_double_mersenne(m: u64, k: u64) -> Result<MersenneProgram> {
    let params = family_params(m, k)?;
    let two_n = checked_exponent(&params, &params.two_n)?;
    let (c3, c4) = (params.c3_u64(), params.c4_u64());

    let base_chain = c3_chain(m);
    ensure(is_star(&base_chain), "c3 chain is a star chain")?;
    let base = expand(&base_chain)?;
    ensure(
        base.exponent == c3 && base.provides(c4),
        "2^c3 - 1 chain contains 2^c4 - 1",
    )?;
    ensure(base.len() as u64 == c3 + m + 5, "short chain for 2^c3 - 1")?;

    let mut q = base;
    for _ in 0..family_double_shift(m, k) {
        q = double_construction(&q);
    }
    let mut out = sum_construction(&q, two_n - c4, c4)?;
    out.tag = ConstructionTag::FamilyDouble;

    let len = out.len() as u64;
    ensure(out.exponent == two_n, "final exponent is 2n")?;
    ensure(len == two_n + 3 * m + k + 10, "length 2n + 3m + k + 10")?;
    ensure(
        len < params.cited_length() + two_n,
        "within (λ(n) + 4) + 2n - 1",
    )?;
    ensure(is_star(&out.program), "star structure")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{small_summand_total, Target};
    use num_bigint::BigUint;
    use num_traits::ToPrimitive;

    fn values(p: &ChainProgram) -> Vec<u64> {
        p.evaluate_u64().unwrap()
    }

    fn mersenne(e: u64) -> u64 {
        (1u64 << e) - 1
    }

    fn example_chain() -> ChainProgram {
        ChainProgram::from_steps([(0, 0), (1, 0), (2, 1), (3, 3), (4, 0)])
    }

    #[test]
    fn expands_example_chain() {
        let m = expand(&example_chain()).unwrap();
        assert_eq!(m.exponent(), 11);
        assert_eq!(m.len(), 15);
        let v = values(m.program());
        // 1023 doubled and incremented is 2047.
        assert_eq!(
            v,
            [1, 2, 3, 6, 7, 14, 28, 31, 62, 124, 248, 496, 992, 1023, 2046, 2047]
        );
        for e in [1, 2, 3, 5, 10, 11] {
            assert!(m.provides(e));
            assert_eq!(v[m.index_of(e).unwrap()], mersenne(e));
        }
        assert!(is_star(m.program()));
    }

    #[test]
    fn expanding_non_star_chain_merges_repeats() {
        // 1, 2, 4, 5, 8, 13: 8 = 4 + 4 and 5 = 4 + 1 both double 2^4 - 1 = 15.
        let p = ChainProgram::from_steps([(0, 0), (1, 1), (2, 0), (2, 2), (4, 3)]);
        assert_eq!(small_summand_total(&p).unwrap(), BigUint::from(13u32));
        let (m, merged) = expand_counted(&p).unwrap();
        assert_eq!(merged, 1);
        assert_eq!(m.len(), 5 + 13 - 1);
        let v = values(m.program());
        assert_eq!(*v.last().unwrap(), 8191);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn expand_of_trivial_chain() {
        let m = expand(&ChainProgram::new()).unwrap();
        assert_eq!(m.exponent(), 1);
        assert_eq!(m.len(), 0);
    }

    #[test]
    fn double_construction_small() {
        let three = expand(&ChainProgram::from_steps([(0, 0)])).unwrap();
        assert_eq!(values(three.program()), [1, 2, 3]);
        let fifteen = double_construction(&three);
        assert_eq!(values(fifteen.program()), [1, 2, 3, 6, 12, 15]);
        assert_eq!(fifteen.exponent(), 4);

        let unit = MersenneProgram::unit();
        let d = double_construction(&unit);
        assert_eq!(values(d.program()), [1, 2, 3]);
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn double_construction_after_example() {
        let m = double_construction(&expand(&example_chain()).unwrap());
        assert_eq!(m.len(), 27);
        assert_eq!(m.exponent(), 22);
        m.program().validate_exact(&Target::Mersenne(22)).unwrap();
    }

    #[test]
    fn sum_construction_steps() {
        let three = expand(&ChainProgram::from_steps([(0, 0)])).unwrap();
        let seven = sum_construction(&three, 2, 1).unwrap();
        assert_eq!(values(seven.program()), [1, 2, 3, 6, 7]);
        let thirty_one = sum_construction(&seven, 3, 2).unwrap();
        assert_eq!(values(thirty_one.program()), [1, 2, 3, 6, 7, 14, 28, 31]);

        assert_eq!(
            sum_construction(&seven, 3, 4),
            Err(Error::SumOrder { a: 3, b: 4 })
        );
        assert_eq!(
            sum_construction(&seven, 2, 1),
            Err(Error::ExponentMismatch {
                expected: 2,
                actual: 3
            })
        );
        let fifteen = double_construction(&three);
        // 2^3 - 1 = 7 is not an element of 1, 2, 3, 6, 12, 15.
        assert_eq!(
            sum_construction(&fifteen, 4, 3),
            Err(Error::ContainmentMissing { exponent: 3 })
        );
    }

    #[test]
    fn c1_chains() {
        let v = values(&c1_chain(1));
        assert_eq!(v, [1, 2, 4, 8, 12, 13, 26, 39, 43]);
        let p = c1_chain(2);
        assert_eq!(p.len(), 9);
        let v = values(&p);
        assert_eq!(*v.last().unwrap(), 83);
        assert!(v.contains(&25));
    }

    #[test]
    fn c2_and_c3_chains() {
        for m in 1..=6u64 {
            let params = family_params(m, 3).unwrap();
            let v = values(&c2_chain(m));
            assert_eq!(*v.last().unwrap(), params.c2_u64());
            assert!(v.contains(&(1 << (m + 1))));
            assert_eq!(v.len() as u64 - 1, m + 4);
            assert!(is_star(&c2_chain(m)));

            let p = c3_chain(m);
            let v = values(&p);
            assert_eq!(*v.last().unwrap(), params.c3_u64());
            assert!(v.contains(&params.c4_u64()));
            assert_eq!(p.len() as u64, m + 6);
            assert!(is_star(&p));
        }
        assert_eq!(values(&c3_chain(1)), [1, 2, 4, 8, 9, 17, 26, 43]);
    }

    #[test]
    fn mersenne_c1_small() {
        let m1 = mersenne_c1(1).unwrap();
        assert_eq!(m1.len(), 50);
        assert_eq!(m1.exponent(), 43);
        assert!(m1.provides(13) && m1.provides(4));
        m1.program().validate_exact(&Target::Mersenne(43)).unwrap();
        let v = values(m1.program());
        assert_eq!(v[m1.index_of(13).unwrap()], mersenne(13));

        let m2 = mersenne_c1(2).unwrap();
        assert_eq!(m2.len(), 91);
        assert!(m2.provides(25) && m2.provides(8));

        // Same length as expanding the non-star chain for c1 directly.
        for m in 1..=3 {
            assert_eq!(
                mersenne_c1(m).unwrap().len(),
                expand(&c1_chain(m)).unwrap().len()
            );
        }
    }

    #[test]
    fn family_lengths() {
        let f = family_mersenne(1, 3).unwrap();
        assert_eq!(f.exponent(), 11021);
        assert_eq!(f.len(), 11037);
        let f = family_mersenne(1, 4).unwrap();
        assert_eq!(f.exponent(), 22029);
        assert_eq!(f.len(), 22046);
        let d = family_double_mersenne(1, 3).unwrap();
        assert_eq!(d.exponent(), 22042);
        // Exactly (λ(n) + 4) + 2n - 1: no slack.
        assert_eq!(d.len(), 22058);
    }

    #[test]
    fn family_modular_validation() {
        let f = family_mersenne(1, 3).unwrap();
        assert!(f
            .program()
            .validate_modular(Some(&Target::Mersenne(11021)), 8, 42));
        assert!(!f
            .program()
            .validate_modular(Some(&Target::Mersenne(11020)), 8, 42));
    }

    #[test]
    fn json_shape() {
        let m = expand(&ChainProgram::from_steps([(0, 0)])).unwrap();
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["exponent"], 2);
        assert_eq!(json["tag"], "expand");
        assert_eq!(json["claimed_length"], 2);
        assert_eq!(json["steps"], serde_json::json!([[0, 0], [1, 0]]));
        let back: MersenneProgram = serde_json::from_value(json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.index_of(2).and_then(|i| i.to_u64()), Some(2));
    }
}
