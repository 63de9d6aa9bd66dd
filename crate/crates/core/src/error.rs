use std::io;

use thiserror::Error;

use crate::tree::RouterId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse router id {0:?}")]
    RouterParse(String),

    #[error("relabel repair failed for m = {m}")]
    RelabelFailure { m: u32 },

    #[error("iterative repair failed at layer {layer}: {faulty} routers need repair but only {available} are available")]
    IterativeFailure {
        layer: u32,
        faulty: usize,
        available: usize,
    },

    #[error("assignment infeasible: {faulty} faulty routers, {available} available routers")]
    Infeasible { faulty: usize, available: usize },

    #[error("query for user address {user_address:#b} reached faulty router {router}")]
    SimulationFault {
        user_address: u64,
        router: RouterId,
    },

    #[error("not enough distinct depths with timing data: {0} (need at least 4)")]
    InsufficientPoints(usize),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
