#![allow(dead_code)]

use std::collections::BTreeSet;

use addchain::{AdditionChain, ChainProgram};
use num_bigint::BigUint;
use rand::Rng;

/// A random valid chain with every element at most `cap`.
///
/// Random sums of earlier values are collected into a set; sorted, any such
/// set is an addition chain because each sum exceeds both summands.
pub fn random_chain<R: Rng>(rng: &mut R, cap: u64, steps: usize) -> ChainProgram {
    let mut set: BTreeSet<u64> = BTreeSet::from([1]);
    let mut order: Vec<u64> = vec![1];
    for _ in 0..steps * 4 {
        if set.len() > steps {
            break;
        }
        let a = order[rng.gen_range(0..order.len())];
        let b = order[rng.gen_range(0..order.len())];
        let v = a + b;
        if v <= cap && set.insert(v) {
            order.push(v);
        }
    }
    program_from_values(set.into_iter().collect())
}

pub fn program_from_values(values: Vec<u64>) -> ChainProgram {
    AdditionChain::from_elements(values.into_iter().map(BigUint::from).collect())
        .expect("sorted sum-closed set is a chain")
        .to_program()
        .unwrap()
}

/// Replaces one operand of one step with a different earlier index.
pub fn mutate_one_step<R: Rng>(rng: &mut R, steps: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out = steps.to_vec();
    loop {
        let t = rng.gen_range(1..=steps.len());
        if t < 2 {
            continue;
        }
        let (i, j) = out[t - 1];
        let replacement = rng.gen_range(0..t);
        if rng.gen_bool(0.5) {
            if replacement != i {
                out[t - 1] = (replacement, j);
                return out;
            }
        } else if replacement != j {
            out[t - 1] = (i, replacement);
            return out;
        }
    }
}
