use thiserror::Error;

/// Errors raised by graph construction, chain arithmetic and the bicombing machinery.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(String, String),

    #[error("geodesic count {count} between {from} and {to} exceeds the cap {cap}")]
    GeodesicCap {
        from: String,
        to: String,
        count: u128,
        cap: u64,
    },

    #[error("vertex {vertex} lies outside the trust radius {trust}")]
    OutsideTrust { vertex: String, trust: u32 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("pseudo-boundary points {0} and {1} are too close (elementary pair)")]
    RaysTooClose(String, String),
}

pub type Result<T> = std::result::Result<T, Error>;
