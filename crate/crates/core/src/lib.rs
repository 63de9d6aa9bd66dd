//! Fault injection, analytics and repair for binary-tree QRAM with faulty
//! routers.
//!
//! [`tree`] holds the router model, [`analytics`] the closed-form
//! statistics, [`relabel`] and [`iterative`] the two repair strategies,
//! [`flags`] the flag-qubit assignment procedures, [`oracle`] the independent
//! checks and [`harness`] the Monte Carlo driver.

pub mod analytics;
pub mod error;
pub mod flags;
pub mod gf2;
pub mod harness;
pub mod iterative;
pub mod matching;
pub mod oracle;
pub mod relabel;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
pub use flags::{AssignerKind, AssignmentResult};
pub use iterative::{iterative_repair, RepairOutcome};
pub use tree::{QramTree, RouterId};
