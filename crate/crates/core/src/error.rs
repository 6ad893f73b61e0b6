use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space spec: {0}")]
    InvalidSpec(String),

    #[error("space has {size} architectures, above the cap of {cap}")]
    SpaceTooLarge { size: u128, cap: u64 },

    #[error("architecture {0} is not in the space")]
    NotInSpace(u64),

    #[error("architecture {0} appears more than once in the sample")]
    DuplicateSample(u64),

    #[error("sampled architectures {0} and {1} are not connected in the edit graph")]
    Disconnected(u64, u64),

    #[error("A* search expanded more than {0} states")]
    BudgetExceeded(usize),

    #[error("K = {k} exceeds the {distinct} distinct members")]
    DegenerateK { k: usize, distinct: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("budget {budget} is below the floor of {required}")]
    BudgetTooSmall { budget: usize, required: usize },

    #[error("grid of {cells} cells cannot hold {members} members and {reps} glyphs")]
    GridOverflow { cells: usize, members: usize, reps: usize },

    #[error("one of the compared groups is empty")]
    EmptyGroup,

    #[error("principle filters rejected every architecture in the space")]
    ExhaustedSpace,

    #[error("no metric for architecture {0}")]
    MissingMetric(u64),

    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("row {row}: unknown architecture {arch_id}")]
    UnknownArch { row: usize, arch_id: u64 },

    #[error("row {row}: duplicate architecture {arch_id}")]
    DuplicateArch { row: usize, arch_id: u64 },

    #[error("row {row}: {field} = {value} is out of range")]
    OutOfRange { row: usize, field: &'static str, value: f64 },

    #[error("cache key mismatch: {0}")]
    StaleCache(String),

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::SpaceTooLarge { .. } => "SpaceTooLarge",
            Error::NotInSpace(_) => "NotInSpace",
            Error::DuplicateSample(_) => "DuplicateSample",
            Error::Disconnected(..) => "Disconnected",
            Error::BudgetExceeded(_) => "BudgetExceeded",
            Error::DegenerateK { .. } => "DegenerateK",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::BudgetTooSmall { .. } => "BudgetTooSmall",
            Error::GridOverflow { .. } => "GridOverflow",
            Error::EmptyGroup => "EmptyGroup",
            Error::ExhaustedSpace => "ExhaustedSpace",
            Error::MissingMetric(_) => "MissingMetric",
            Error::Parse { .. } => "ParseError",
            Error::UnknownArch { .. } => "UnknownArch",
            Error::DuplicateArch { .. } => "DuplicateArch",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::StaleCache(_) => "StaleCache",
            Error::CorruptFile(_) => "CorruptFile",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
