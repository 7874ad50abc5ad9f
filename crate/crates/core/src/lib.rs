//! Addition chains for fast exponentiation, with explicit short chains for
//! Mersenne numbers `2^n - 1` and machine-checkable certificates of the
//! Scholz bound `ℓ(2^n - 1) ≤ ℓ(n) + n - 1`.

pub mod chain;
pub mod error;
pub mod mersenne;
pub mod numeral;
pub mod scholz;
pub mod search;

pub use chain::{AdditionChain, ChainProgram, Target};
pub use error::{Error, Result};
pub use mersenne::MersenneProgram;
pub use numeral::FamilyParams;
pub use scholz::{ScholzCertificate, VerificationReport};
pub use search::SearchResult;
