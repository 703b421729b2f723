//! Numerical tolerances, each with its justification. No other magic
//! numbers appear in assertions.

/// Algebraic identities on small systems (total dimension <= a few
/// thousand): compositions of exact permutations and unit-modulus phases
/// accumulate rounding well below this.
pub const ALGEBRAIC: f64 = 1e-12;

/// End-to-end protocol fidelities: a branch passes when
/// `1 - fidelity <= PROTOCOL_INFIDELITY`. Covers rounding accumulated over
/// full resource construction, measurement cascades, and corrections.
pub const PROTOCOL_INFIDELITY: f64 = 1e-9;

/// Branch probabilities over a full measurement must sum to 1 within this;
/// also bounds the deviation from exact outcome uniformity.
pub const PROBABILITY_SUM: f64 = 1e-10;

/// Stabilizer deviations `|| W |psi> - |psi> ||` on exact eigenstates.
pub const STABILIZER: f64 = 1e-10;

/// Branches with probability below this are pruned from enumerations.
pub const BRANCH_PRUNE: f64 = 1e-14;

/// Amplitudes below this magnitude are omitted from state dumps and
/// support scans.
pub const DUMP_CUTOFF: f64 = 1e-12;

/// An explicit amplitude vector with norm below this is rejected as zero.
pub const ZERO_NORM: f64 = 1e-12;
