//! Exact shortest-chain search.
//!
//! [`minimal_length`] is an iterative-deepening branch and bound over chain
//! prefixes. [`oracle_lengths_up_to`] is a deliberately plain exhaustive
//! enumeration kept separate so the two can be checked against each other.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{binary_chain, ChainProgram, Step};
use crate::error::{Error, Result};
use crate::numeral::{closed_form_length_u64, lambda_floor_u64};

/// Largest table the exhaustive oracle will build.
pub const ORACLE_MAX_LIMIT: u64 = 1 << 16;

/// Budget used when callers have no particular limit in mind.
pub const DEFAULT_NODE_BUDGET: u64 = 2_000_000_000;

/// Number of steps fixed before the parallel mode fans out.
const SPLIT_DEPTH: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub n: u64,
    pub lower: u64,
    pub upper: u64,
    pub witness: Option<ChainProgram>,
    pub exact: bool,
    pub nodes_expanded: u64,
    pub budget_exhausted: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SearchMode {
    #[default]
    Sequential,
    /// Fans the subtrees below a fixed-depth prefix out over the rayon pool.
    /// Produces the same result, node count included, as `Sequential`.
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Goal {
    target: u64,
    must_contain: Option<u64>,
    star_only: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Found,
    NotFound,
    OutOfBudget,
}

/// Depth-first search for a chain of exactly `limit` steps (or fewer, if the
/// goal is met earlier) with candidates tried in increasing order, so the
/// first chain found is the lexicographically smallest.
struct Dfs {
    goal: Goal,
    limit: usize,
    budget: u64,
    nodes: u64,
    chain: Vec<u64>,
    steps: Vec<Step>,
    /// Depth at which `must_contain` entered the chain, if it has.
    contained_at: Option<usize>,
    /// When set, nodes at this many steps are recorded instead of expanded.
    split_at: Option<usize>,
    events: Vec<Event>,
    scratch: Vec<Vec<(u64, Step)>>,
}

#[derive(Clone, Debug)]
enum Event {
    Expand,
    Leaf(Prefix),
}

#[derive(Clone, Debug)]
struct Prefix {
    chain: Vec<u64>,
    steps: Vec<Step>,
    contained_at: Option<usize>,
}

fn shl_sat(v: u64, s: usize) -> u64 {
    if s >= 64 || v.leading_zeros() < s as u32 {
        u64::MAX
    } else {
        v << s
    }
}

impl Dfs {
    fn new(goal: Goal, limit: usize, budget: u64) -> Self {
        let mut dfs = Self {
            goal,
            limit,
            budget,
            nodes: 0,
            chain: vec![1],
            steps: Vec::new(),
            contained_at: None,
            split_at: None,
            events: Vec::new(),
            scratch: vec![Vec::new(); limit + 1],
        };
        if goal.must_contain.is_none_or(|c| c == 1) {
            dfs.contained_at = Some(0);
        }
        dfs
    }

    fn from_prefix(goal: Goal, limit: usize, budget: u64, prefix: &Prefix) -> Self {
        let mut dfs = Self::new(goal, limit, budget);
        dfs.chain.clone_from(&prefix.chain);
        dfs.steps.clone_from(&prefix.steps);
        dfs.contained_at = prefix.contained_at;
        dfs
    }

    fn contained(&self) -> bool {
        self.contained_at.is_some()
    }

    fn run(&mut self) -> Outcome {
        let r = self.chain.len() - 1;
        let last = self.chain[r];
        let goal = self.goal;
        if last == goal.target && self.contained() {
            if self.split_at.is_some() {
                self.record_leaf();
                return Outcome::NotFound;
            }
            return Outcome::Found;
        }
        if r >= self.limit {
            return Outcome::NotFound;
        }
        let remaining = self.limit - r;
        // Doubling every remaining step is the fastest possible growth.
        if shl_sat(last, remaining) < goal.target {
            return Outcome::NotFound;
        }
        let cap = match (self.contained(), goal.must_contain) {
            (false, Some(c)) => {
                if last > c || shl_sat(last, remaining - 1) < c {
                    return Outcome::NotFound;
                }
                c
            }
            _ => goal.target,
        };
        if self.split_at == Some(r) {
            self.record_leaf();
            return Outcome::NotFound;
        }

        self.nodes += 1;
        if self.split_at.is_some() {
            self.events.push(Event::Expand);
        } else if self.nodes > self.budget {
            return Outcome::OutOfBudget;
        }

        let mut candidates = std::mem::take(&mut self.scratch[r]);
        candidates.clear();
        if remaining == 1 {
            // Only the goal itself can finish the chain now.
            if self.contained() {
                if let Some(step) = self.pair_for(goal.target) {
                    candidates.push((goal.target, step));
                }
            }
        } else {
            let top = if goal.star_only { r } else { 0 };
            for i in (top..=r).rev() {
                let ai = self.chain[i];
                if ai + ai <= last {
                    break;
                }
                for j in (0..=i).rev() {
                    let v = ai + self.chain[j];
                    if v <= last {
                        break;
                    }
                    if v <= cap {
                        candidates.push((v, (i, j)));
                    }
                }
            }
            // Stable: the first pair generated (largest i, then j) is kept.
            candidates.sort_by_key(|&(v, _)| v);
            candidates.dedup_by_key(|&mut (v, _)| v);
        }

        let mut outcome = Outcome::NotFound;
        for &(v, step) in &candidates {
            self.chain.push(v);
            self.steps.push(step);
            let newly = !self.contained() && goal.must_contain == Some(v);
            if newly {
                self.contained_at = Some(r + 1);
            }
            let o = self.run();
            if newly {
                self.contained_at = None;
            }
            if o != Outcome::NotFound {
                outcome = o;
                break;
            }
            self.chain.pop();
            self.steps.pop();
        }
        self.scratch[r] = candidates;
        outcome
    }

    fn pair_for(&self, v: u64) -> Option<Step> {
        let r = self.chain.len() - 1;
        let top = if self.goal.star_only { r } else { 0 };
        (top..=r).rev().find_map(|i| {
            let ai = self.chain[i];
            if ai > v || ai + ai < v {
                return None;
            }
            self.chain[..=i]
                .binary_search(&(v - ai))
                .ok()
                .map(|j| (i, j))
        })
    }

    fn record_leaf(&mut self) {
        self.events.push(Event::Leaf(Prefix {
            chain: self.chain.clone(),
            steps: self.steps.clone(),
            contained_at: self.contained_at,
        }));
    }

    fn witness(&self) -> ChainProgram {
        ChainProgram::from_steps(self.steps.iter().copied())
    }
}

/// Outcome of one fixed-depth pass.
struct Pass {
    outcome: Outcome,
    nodes: u64,
    witness: Option<ChainProgram>,
}

fn run_depth(goal: Goal, limit: usize, budget: u64, mode: SearchMode) -> Pass {
    if mode == SearchMode::Sequential || limit <= SPLIT_DEPTH + 1 {
        let mut dfs = Dfs::new(goal, limit, budget);
        let outcome = dfs.run();
        let witness = (outcome == Outcome::Found).then(|| dfs.witness());
        return Pass {
            outcome,
            nodes: dfs.nodes.min(budget.saturating_add(1)),
            witness,
        };
    }

    let mut splitter = Dfs::new(goal, limit, budget);
    splitter.split_at = Some(SPLIT_DEPTH);
    splitter.run();
    let events = std::mem::take(&mut splitter.events);

    let leaves: Vec<&Prefix> = events
        .iter()
        .filter_map(|e| match e {
            Event::Leaf(p) => Some(p),
            Event::Expand => None,
        })
        .collect();
    let passes: Vec<Pass> = leaves
        .par_iter()
        .map(|prefix| {
            let mut dfs = Dfs::from_prefix(goal, limit, budget, prefix);
            let outcome = dfs.run();
            let witness = (outcome == Outcome::Found).then(|| dfs.witness());
            Pass {
                outcome,
                nodes: dfs.nodes,
                witness,
            }
        })
        .collect();

    // Replay in sequential order so node counts and budget cut-offs match.
    let mut nodes = 0u64;
    let mut leaf = passes.into_iter();
    for event in &events {
        match event {
            Event::Expand => {
                nodes += 1;
                if nodes > budget {
                    return Pass {
                        outcome: Outcome::OutOfBudget,
                        nodes,
                        witness: None,
                    };
                }
            }
            Event::Leaf(_) => {
                let pass = leaf.next().expect("one pass per leaf");
                let remaining = budget - nodes;
                if pass.outcome == Outcome::OutOfBudget || pass.nodes > remaining {
                    return Pass {
                        outcome: Outcome::OutOfBudget,
                        nodes: budget + 1,
                        witness: None,
                    };
                }
                nodes += pass.nodes;
                if pass.outcome == Outcome::Found {
                    return Pass {
                        outcome: Outcome::Found,
                        nodes,
                        witness: pass.witness,
                    };
                }
            }
        }
    }
    Pass {
        outcome: Outcome::NotFound,
        nodes,
        witness: None,
    }
}

/// `λ(n) + ⌈log₂ ν(n)⌉`, a small-step counting bound from the literature.
///
/// Not derived here; [`lower_bound`] only uses it with the `cited-bounds`
/// feature.
pub fn counting_lower_bound(n: u64) -> u64 {
    assert!(n >= 1, "lower bounds are defined for positive n");
    let weight = n.count_ones() as u64;
    let ceil_log2 = 64 - (weight - 1).leading_zeros() as u64;
    lambda_floor_u64(n).unwrap() + if weight == 1 { 0 } else { ceil_log2 }
}

/// A length no chain for `n` can beat.
pub fn lower_bound(n: u64) -> u64 {
    assert!(n >= 1, "lower bounds are defined for positive n");
    let lambda = lambda_floor_u64(n).unwrap();
    let closed = closed_form_length_u64(n).unwrap().unwrap_or(0);
    let mut bound = lambda.max(closed);
    if cfg!(feature = "cited-bounds") {
        bound = bound.max(counting_lower_bound(n));
    }
    bound
}

fn deepen(
    goal: Goal,
    lower: u64,
    fallback: ChainProgram,
    budget: u64,
    mode: SearchMode,
) -> SearchResult {
    let n = goal.target;
    let upper = fallback.len() as u64;
    let mut nodes = 0u64;
    let mut depth = lower;
    loop {
        let pass = run_depth(goal, depth as usize, budget - nodes, mode);
        nodes += pass.nodes;
        match pass.outcome {
            Outcome::Found => {
                let witness = pass.witness.expect("found implies witness");
                return SearchResult {
                    n,
                    lower: depth,
                    upper: depth,
                    witness: Some(witness),
                    exact: true,
                    nodes_expanded: nodes,
                    budget_exhausted: false,
                };
            }
            Outcome::NotFound => depth += 1,
            Outcome::OutOfBudget => {
                return SearchResult {
                    n,
                    lower: depth,
                    upper,
                    exact: depth == upper,
                    witness: Some(fallback),
                    nodes_expanded: nodes,
                    budget_exhausted: true,
                };
            }
        }
    }
}

/// Exact `ℓ(n)` by iterative deepening, or the best bounds found before the
/// budget ran out.
pub fn minimal_length(n: u64, node_budget: u64) -> SearchResult {
    minimal_length_with(n, node_budget, SearchMode::Sequential)
}

pub fn minimal_length_with(n: u64, node_budget: u64, mode: SearchMode) -> SearchResult {
    assert!(n >= 1, "chains are defined for positive n");
    let goal = Goal {
        target: n,
        must_contain: None,
        star_only: false,
    };
    let fallback = binary_chain(&BigUint::from(n)).unwrap();
    deepen(goal, lower_bound(n), fallback, node_budget, mode)
}

/// Shortest star chain length `ℓ*(n)`, where every step adds the previous
/// element.
pub fn minimal_star_length(n: u64, node_budget: u64) -> SearchResult {
    minimal_star_length_with(n, node_budget, SearchMode::Sequential)
}

pub fn minimal_star_length_with(n: u64, node_budget: u64, mode: SearchMode) -> SearchResult {
    assert!(n >= 1, "chains are defined for positive n");
    let goal = Goal {
        target: n,
        must_contain: None,
        star_only: true,
    };
    // The binary chain is itself a star chain.
    let fallback = binary_chain(&BigUint::from(n)).unwrap();
    deepen(goal, lower_bound(n), fallback, node_budget, mode)
}

/// Shortest chain for `target` of at most `max_len` steps that has
/// `must_contain` as an element.
///
/// `Ok(None)` means the search proved no such chain exists;
/// [`Error::BudgetExhausted`] means it could not decide.
pub fn chain_containing(
    target: u64,
    must_contain: u64,
    max_len: u64,
    star_only: bool,
    node_budget: u64,
) -> Result<Option<ChainProgram>> {
    if target == 0 || must_contain == 0 {
        return Err(Error::ZeroInput);
    }
    if must_contain >= target {
        return Err(Error::Construction(format!(
            "element {must_contain} must be smaller than the target {target}"
        )));
    }
    let goal = Goal {
        target,
        must_contain: Some(must_contain),
        star_only,
    };
    let mut nodes = 0u64;
    for depth in lower_bound(target)..=max_len {
        let pass = run_depth(
            goal,
            depth as usize,
            node_budget - nodes,
            SearchMode::Sequential,
        );
        nodes += pass.nodes;
        match pass.outcome {
            Outcome::Found => return Ok(pass.witness),
            Outcome::NotFound => {}
            Outcome::OutOfBudget => {
                return Err(Error::BudgetExhausted {
                    budget: node_budget,
                })
            }
        }
    }
    Ok(None)
}

/// Some chain for `n` of at most `max_len` steps, found by a single
/// depth-first pass at depth `max_len` without proving anything shorter
/// impossible. Cheap when `max_len` is comfortably above `ℓ(n)`.
pub fn find_chain_within(n: u64, max_len: u64, node_budget: u64) -> Result<Option<ChainProgram>> {
    if n == 0 {
        return Err(Error::ZeroInput);
    }
    let goal = Goal {
        target: n,
        must_contain: None,
        star_only: false,
    };
    let pass = run_depth(goal, max_len as usize, node_budget, SearchMode::Sequential);
    match pass.outcome {
        Outcome::Found => Ok(pass.witness),
        Outcome::NotFound => Ok(None),
        Outcome::OutOfBudget => Err(Error::BudgetExhausted {
            budget: node_budget,
        }),
    }
}

/// Exact `ℓ(n)` for every `n ≤ limit`; entry 0 is unused.
///
/// Plain iterative deepening per `n`: chains are enumerated in increasing
/// order with no pruning other than the doubling cap
/// `a_r · 2^(d - r) ≥ n`, so the table can be trusted as ground truth for
/// the branch and bound.
pub fn oracle_lengths_up_to(limit: u64) -> Result<Vec<u32>> {
    if limit > ORACLE_MAX_LIMIT {
        return Err(Error::LimitTooLarge {
            limit,
            max: ORACLE_MAX_LIMIT,
        });
    }
    let mut table: Vec<u32> = (1..=limit).into_par_iter().map(oracle_length).collect();
    table.insert(0, 0);
    Ok(table)
}

/// Single-value entry point to the oracle.
pub fn oracle_length(n: u64) -> u32 {
    let mut chain = vec![1u64];
    (0..)
        .find(|&depth| oracle_reaches(&mut chain, n, depth))
        .unwrap()
}

fn oracle_reaches(chain: &mut Vec<u64>, n: u64, depth: u32) -> bool {
    let last = *chain.last().unwrap();
    if last == n {
        return true;
    }
    let r = chain.len() as u32 - 1;
    if r == depth || shl_sat(last, (depth - r) as usize) < n {
        return false;
    }
    let mut next: Vec<u64> = Vec::new();
    for i in 0..chain.len() {
        for j in i..chain.len() {
            let v = chain[i] + chain[j];
            if v > last && v <= n {
                next.push(v);
            }
        }
    }
    next.sort_unstable_by(|a, b| b.cmp(a));
    next.dedup();
    for v in next {
        chain.push(v);
        if oracle_reaches(chain, n, depth) {
            return true;
        }
        chain.pop();
    }
    false
}
