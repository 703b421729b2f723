//! Phase-gate broadcasting over directed acyclic qudit networks.
//!
//! `gatecast` simulates a quantum network in which agents inject phase
//! gates that split toward multiple receivers, cascade along arrows, and
//! merge at common successors. The library covers the full pipeline:
//!
//! * [`dag`] — network topologies, the sink-upward dimension recursion,
//!   path counting;
//! * [`qudit`] — a dense state-vector engine for registers of
//!   mixed-dimension qudits;
//! * [`broadcast`] — the entangled resource state and the
//!   measurement-plus-feedforward broadcast protocol, with a closed-form
//!   path-count oracle;
//! * [`prepare`] — single-round measurement-based preparation of the
//!   resource state, stabilizer checks, outcome corrections, and
//!   dynamical edge removal;
//! * [`oracle`] — independent dense-matrix verification of the operator
//!   identities the protocol relies on;
//! * [`cli`] — scenario files, JSON reports, and the `gatecast` command
//!   line.
//!
//! The mdbook under `book/` walks through the concepts; its code blocks
//! compile and run as doc-tests of this crate.
//!
//! # Quick start
//!
//! Broadcast one phase from a hub to two receivers and check the result
//! against the closed-form answer:
//!
//! ```
//! use gatecast::dag::DagNetwork;
//! use gatecast::broadcast::{self, PhaseAssignment, RunMode};
//! use gatecast::qudit::StateSpec;
//!
//! let g = DagNetwork::star(2, 2)?; // one qutrit hub, two qubit sinks
//! let phases = PhaseAssignment::uniform(&g, 0.4)?;
//! let psi = StateSpec::all_plus(2);
//!
//! let branches = broadcast::run_protocol(&g, &phases, &psi, RunMode::Enumerate)?;
//! let expected = broadcast::expected_sink_state(&g, &phases, &psi)?;
//! for b in &branches {
//!     assert!(b.sink_state.fidelity(&expected)? > 1.0 - 1e-9);
//! }
//! # Ok::<(), gatecast::Error>(())
//! ```

pub mod broadcast;
pub mod cli;
pub mod dag;
pub mod error;
pub mod oracle;
pub mod prepare;
pub mod qudit;
pub mod tol;

pub use error::{Error, Result};

// Book chapters double as doc-tests so the guide can never drift from the
// code it demonstrates.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/registers.md")]
    mod registers {}
    #[doc = include_str!("../../../book/src/broadcasting.md")]
    mod broadcasting {}
    #[doc = include_str!("../../../book/src/preparation.md")]
    mod preparation {}
    #[doc = include_str!("../../../book/src/detaching.md")]
    mod detaching {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
