//! Crate-wide error type.

use thiserror::Error;

use crate::dag::VertexId;

/// Errors produced by network construction, the register engine, and the
/// protocol layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The directed graph contains a cycle, so no topological order exists.
    #[error("graph is not acyclic")]
    CycleDetected,

    /// A vertex id outside `0..vertex_count` was referenced.
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),

    /// An edge with identical tail and head.
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),

    /// More than one edge for the same ordered pair.
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(VertexId, VertexId),

    /// A sink vertex has no assigned dimension.
    #[error("missing sink dimension for vertex {0}")]
    MissingSinkDim(VertexId),

    /// A qudit dimension below 2 was requested.
    #[error("invalid dimension {dim} (must be >= 2)")]
    InvalidDimension { dim: usize },

    /// The network failed validation; the violations are listed.
    #[error("invalid network: {0:?}")]
    InvalidNetwork(Vec<String>),

    /// A vector or state spec does not match the expected layout.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An explicit amplitude vector with zero norm.
    #[error("explicit amplitude vector has zero norm")]
    ZeroVector,

    /// A basis digit outside `0..d` for its site.
    #[error("digit {digit} out of range for site {site} (dim {dim})")]
    InvalidDigit { site: usize, digit: usize, dim: usize },

    /// A site index outside the register layout.
    #[error("invalid site {site} (register has {sites} sites)")]
    InvalidSite { site: usize, sites: usize },

    /// Control and target of a two-site gate coincide.
    #[error("control and target are the same site {0}")]
    SameSite(usize),

    /// A controlled phase word that includes its own control site.
    #[error("phase word includes the control site {0}")]
    ControlInWord(usize),

    /// Two registers with different layouts were compared.
    #[error("layout mismatch")]
    LayoutMismatch,

    /// A forced measurement outcome whose Born probability is zero.
    #[error("requested branch has zero probability (outcome {outcome})")]
    ZeroProbabilityBranch { outcome: usize },

    /// A non-sink vertex without an assigned protocol phase.
    #[error("missing phase for non-sink vertex {0}")]
    PhaseMissing(VertexId),

    /// A phase assigned to a vertex that never injects one.
    #[error("phase assigned to sink vertex {0}")]
    PhaseOnSink(VertexId),

    /// Enumerating all measurement outcomes would exceed the branch cap.
    #[error("enumeration would produce {branches} branches (cap {cap})")]
    BranchExplosion { branches: u128, cap: u128 },

    /// A dense-matrix check beyond the supported size.
    #[error("total dimension {dim} too large for dense verification (cap {cap})")]
    DimensionTooLarge { dim: usize, cap: usize },

    /// An ancilla that was already measured or detached.
    #[error("ancilla of vertex {0} already measured")]
    AncillaAlreadyMeasured(VertexId),

    /// A vertex without an ancilla (sinks have none).
    #[error("vertex {0} has no ancilla")]
    NoAncilla(VertexId),

    /// A correction was requested without an outcome for some vertex.
    #[error("missing measurement outcome for vertex {0}")]
    OutcomeMissing(VertexId),
}

pub type Result<T> = std::result::Result<T, Error>;
