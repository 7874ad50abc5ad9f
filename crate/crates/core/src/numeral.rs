//! Integer-shape helpers: binary weight, bit length, the closed-form chain
//! lengths for weights one to three, and the parameters of the seven-bit
//! family `101 0^m 11 0^(m+k) 11 0^m 1`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of one bits in the binary expansion of `n`.
pub fn nu(n: &BigUint) -> Result<u64> {
    if n.is_zero() {
        return Err(Error::ZeroInput);
    }
    Ok(n.count_ones())
}

/// `floor(log2 n)`, i.e. the bit length minus one.
///
/// This is the convention under which `ℓ(2^a) = a`; a ceiling would be off
/// by one for every `n` that is not a power of two.
pub fn lambda_floor(n: &BigUint) -> Result<u64> {
    if n.is_zero() {
        return Err(Error::ZeroInput);
    }
    Ok(n.bits() - 1)
}

/// Exact `ℓ(n)` when `ν(n) ≤ 3`, `None` otherwise.
///
/// With `a = λ(n)`: weight one gives `a`, weight two `a + 1`, weight three
/// `a + 2`.
pub fn closed_form_length(n: &BigUint) -> Result<Option<u64>> {
    let a = lambda_floor(n)?;
    Ok(match nu(n)? {
        1 => Some(a),
        2 => Some(a + 1),
        3 => Some(a + 2),
        _ => None,
    })
}

pub fn nu_u64(n: u64) -> Result<u64> {
    nu(&BigUint::from(n))
}

pub fn lambda_floor_u64(n: u64) -> Result<u64> {
    lambda_floor(&BigUint::from(n))
}

pub fn closed_form_length_u64(n: u64) -> Result<Option<u64>> {
    closed_form_length(&BigUint::from(n))
}

/// Parameters of one member of the seven-bit family.
///
/// `n = c1·2^(2m+k+3) + c2` and `2n = c3·2^(2m+k+4) + c4`, where `c3`
/// coincides with `c1` and `c4 = 2·c2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub m: u64,
    pub k: u64,
    pub c1: BigUint,
    pub c2: BigUint,
    pub c3: BigUint,
    pub c4: BigUint,
    pub n: BigUint,
    pub two_n: BigUint,
}

fn pow2(e: u64) -> BigUint {
    BigUint::one() << e
}

/// Builds the family member for `(m, k)`; requires `m ≥ 1`, `k ≥ 3`.
pub fn family_params(m: u64, k: u64) -> Result<FamilyParams> {
    if m < 1 || k < 3 {
        return Err(Error::FamilyBounds { m, k });
    }
    let c1 = BigUint::from(5u32) * pow2(m + 2) + 3u32;
    let c2 = BigUint::from(3u32) * pow2(m + 1) + 1u32;
    let c3 = pow2(m + 4) + pow2(m + 2) + 3u32;
    let c4 = pow2(m + 3) + pow2(m + 2) + 2u32;
    let n = &c1 * pow2(family_shift(m, k)) + &c2;
    let two_n = &n << 1u32;

    // The upper block of 2n is c3 = c1 again; the shift grows by one.
    assert_eq!(
        two_n,
        &c3 * pow2(family_double_shift(m, k)) + &c4,
        "2n = c3·2^(2m+k+4) + c4 must hold for (m, k) = ({m}, {k})"
    );
    Ok(FamilyParams {
        m,
        k,
        c1,
        c2,
        c3,
        c4,
        n,
        two_n,
    })
}

/// Exponent `2m+k+3` separating `c1` from `c2` in `n`.
pub fn family_shift(m: u64, k: u64) -> u64 {
    2 * m + k + 3
}

/// Exponent `2m+k+4` separating `c3` from `c4` in `2n`.
pub fn family_double_shift(m: u64, k: u64) -> u64 {
    2 * m + k + 4
}

impl FamilyParams {
    /// `λ(n) = 3m + k + 7`.
    pub fn lambda(&self) -> u64 {
        3 * self.m + self.k + 7
    }

    /// The cited value `ℓ(n) = ℓ(2n) = λ(n) + 4`.
    pub fn cited_length(&self) -> u64 {
        self.lambda() + 4
    }

    /// Binary expansion of `n` rebuilt from the block pattern, for cross-checks.
    pub fn pattern(&self) -> String {
        let m = self.m as usize;
        let mid = (self.m + self.k) as usize;
        format!(
            "101{}11{}11{}1",
            "0".repeat(m),
            "0".repeat(mid),
            "0".repeat(m)
        )
    }

    pub fn n_u64(&self) -> Option<u64> {
        self.n.to_u64()
    }

    pub fn c1_u64(&self) -> u64 {
        self.c1
            .to_u64()
            .expect("c1 fits in 64 bits for practical m")
    }

    pub fn c2_u64(&self) -> u64 {
        self.c2
            .to_u64()
            .expect("c2 fits in 64 bits for practical m")
    }

    pub fn c3_u64(&self) -> u64 {
        self.c3
            .to_u64()
            .expect("c3 fits in 64 bits for practical m")
    }

    pub fn c4_u64(&self) -> u64 {
        self.c4
            .to_u64()
            .expect("c4 fits in 64 bits for practical m")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn weights() {
        assert_eq!(nu(&big(7)).unwrap(), 3);
        assert_eq!(nu(&pow2(40)).unwrap(), 1);
        assert_eq!(nu(&big(11021)).unwrap(), 7);
        assert!(matches!(nu(&BigUint::zero()), Err(Error::ZeroInput)));
    }

    #[test]
    fn lambda_is_floor() {
        assert_eq!(lambda_floor(&big(11)).unwrap(), 3);
        assert_eq!(lambda_floor(&big(11021)).unwrap(), 13);
        assert_eq!(lambda_floor(&big(1)).unwrap(), 0);
        assert_eq!(lambda_floor(&pow2(100)).unwrap(), 100);
        assert!(lambda_floor(&BigUint::zero()).is_err());
    }

    #[test]
    fn closed_forms() {
        assert_eq!(closed_form_length(&big(32)).unwrap(), Some(5));
        assert_eq!(closed_form_length(&big(18)).unwrap(), Some(5));
        assert_eq!(closed_form_length(&big(7)).unwrap(), Some(4));
        assert_eq!(closed_form_length(&big(15)).unwrap(), None);
        assert_eq!(closed_form_length(&big(1)).unwrap(), Some(0));
    }

    #[test]
    fn flagship_family_member() {
        let p = family_params(1, 3).unwrap();
        assert_eq!(p.c1, big(43));
        assert_eq!(p.c2, big(13));
        assert_eq!(p.n, big(11021));
        // c3 is c1 again; c4 = 2·c2.
        assert_eq!(p.c3, big(43));
        assert_eq!(p.c4, big(26));
        assert_eq!(p.two_n, big(22042));
        assert_eq!(p.two_n, big(43 * 512 + 26));
        assert_eq!(p.lambda(), 13);
        assert_eq!(p.cited_length(), 17);
    }

    #[test]
    fn second_family_member() {
        let p = family_params(2, 3).unwrap();
        assert_eq!(p.c1, big(83));
        assert_eq!(p.c2, big(25));
        assert_eq!(p.n, big(85017));
        assert_eq!(format!("{:b}", 85017), "10100110000011001");
        assert_eq!(p.pattern(), "10100110000011001");
    }

    #[test]
    fn family_bounds_rejected() {
        assert!(matches!(
            family_params(0, 3),
            Err(Error::FamilyBounds { m: 0, k: 3 })
        ));
        assert!(matches!(
            family_params(1, 2),
            Err(Error::FamilyBounds { m: 1, k: 2 })
        ));
    }

    #[test]
    fn family_pattern_grid() {
        for m in 1..=6 {
            for k in 3..=8 {
                let p = family_params(m, k).unwrap();
                assert_eq!(p.n.to_str_radix(2), p.pattern(), "(m, k) = ({m}, {k})");
                assert_eq!(nu(&p.n).unwrap(), 7);
                assert_eq!(lambda_floor(&p.n).unwrap(), p.lambda());
                assert_eq!(p.c3, p.c1);
                assert_eq!(p.c4, &p.c2 << 1u32);
            }
        }
    }

    #[test]
    fn weight_plus_zero_bits_is_bit_length() {
        for n in 1u64..=(1 << 20) {
            let zeros = u64::from(n.count_zeros()) - u64::from(n.leading_zeros());
            assert_eq!(nu_u64(n).unwrap() + zeros, lambda_floor_u64(n).unwrap() + 1);
        }
    }
}
