use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("price profile does not cover node `{0}`")]
    Coverage(String),
    #[error("price profile names unknown node `{0}`")]
    UnknownPriceNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown demand `{0}`")]
    UnknownDemand(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate demand id `{0}`")]
    DuplicateDemand(String),
    #[error("demand `{0}` has no members")]
    EmptyDemand(String),
    #[error("demand `{demand}` lists member `{node}` twice")]
    DuplicateMember { demand: String, node: String },
    #[error("demand `{0}` must have a strictly positive value")]
    NonPositiveValue(String),
    #[error("seller `{seller}` is not a member of demand `{demand}`")]
    NotMember { seller: String, demand: String },
    #[error("cannot parse rational `{0}`")]
    ParseRational(String),
    #[error("cannot parse price `{0}`")]
    ParsePrice(String),
    #[error("negative price `{0}`")]
    NegativePrice(String),
    #[error("operation requires a graph instance (every demand over exactly two sellers)")]
    NotGraph,
    #[error("instance is not a simple path")]
    NotPath,
    #[error("instance is not a simple cycle")]
    NotCycle,
    #[error("instance is not a forest")]
    NotTree,
    #[error("fixed-price node `{0}` is not a leaf")]
    FixedNotLeaf(String),
    #[error("{nodes} nodes exceeds the exact limit of {limit}; use forest_partition_bounds")]
    TooLarge { nodes: usize, limit: usize },
    #[error("profile is not a non-malicious Nash equilibrium")]
    NotNonMaliciousNe,
    #[error("profile is not a Nash equilibrium")]
    NotNe,
    #[error("bound {bound} does not match this instance")]
    BoundMismatch { bound: String },
    #[error("grid search needs {needed} table entries, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("ratio undefined: {0} is zero")]
    UndefinedRatio(&'static str),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("trace replay diverged at step {0}")]
    ReplayMismatch(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
