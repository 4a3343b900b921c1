//! Exact-arithmetic toolkit for cubic and biquadratic theta values
//! θ(q) = Σ q^(-n^ℓ), ℓ ∈ {3, 4}.
//!
//! - [`repcount`]: sieved representation counts r_{ℓ,s}(n), greedy power
//!   decomposition, zero-run scans and the biquadrate exceptional set.
//! - [`modular`]: r_{ℓ,ℓ}(m, M) by histogram convolution, CRT products and
//!   a search for moduli with small normalized counts.
//! - [`series`]: half-functions, certified tail norms, mild gap points and
//!   exact evaluation at z = 1/q.
//! - [`certify`]: replayable checks of the Maier counting bound, the nested
//!   gaps principle, linear-independence measures and the parameter pipeline.
//!
//! No floating point participates in any verdict.

pub mod certify;
pub mod exact;
pub mod modular;
pub mod repcount;
pub mod series;

pub use exact::{floor_root, Rational};
pub use series::{Enclosure, HalfFunction};
