use thiserror::Error;

pub type Result<T> = std::result::Result<T, KuraError>;

/// Every failure the toolkit can report.
///
/// [`KuraError::kind`] gives a stable machine-readable tag used by the CLI's
/// error JSON.
#[derive(Debug, Error)]
pub enum KuraError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("cluster {cluster} does not induce a connected subgraph")]
    ClusterNotConnected { cluster: usize },

    #[error("inter-cluster edges do not connect the cluster quotient graph")]
    QuotientDisconnected,

    #[error("column images intersect nontrivially (rank {joint} < {first} + {second})")]
    ImageOverlap {
        joint: usize,
        first: usize,
        second: usize,
    },

    #[error("edge reconstruction from the spanning tree failed (residual {residual:e})")]
    ReconstructionFailure { residual: f64 },

    #[error("inter-cluster edge ({i}, {j}) joins nodes with equal natural frequency")]
    ZeroInterFrequencyGap { i: usize, j: usize },

    #[error("natural frequencies differ inside cluster {cluster} (spread {spread:e})")]
    IntraFrequencyMismatch { cluster: usize, spread: f64 },

    #[error("step size {dt} too large: stiffness indicator {indicator:.3} exceeds 0.5")]
    StepTooLarge { dt: f64, indicator: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("no feasible epsilon for gamma = {gamma}")]
    NoFeasibleEpsilon { gamma: f64 },

    #[error("frequency gap {omega_bar} does not dominate coupling sum {a_bar}")]
    FrequencyDominanceViolated { omega_bar: f64, a_bar: f64 },

    #[error("non-physiological hemodynamic state at t = {time} s: {detail}")]
    NonPhysiologicalState { time: f64, detail: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("connectome is disconnected: {0}")]
    DisconnectedResult(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl KuraError {
    pub fn kind(&self) -> &'static str {
        match self {
            KuraError::InvalidNetwork(_) => "InvalidNetwork",
            KuraError::InvalidPartition(_) => "InvalidPartition",
            KuraError::ClusterNotConnected { .. } => "ClusterNotConnected",
            KuraError::QuotientDisconnected => "QuotientDisconnected",
            KuraError::ImageOverlap { .. } => "ImageOverlap",
            KuraError::ReconstructionFailure { .. } => "ReconstructionFailure",
            KuraError::ZeroInterFrequencyGap { .. } => "ZeroInterFrequencyGap",
            KuraError::IntraFrequencyMismatch { .. } => "IntraFrequencyMismatch",
            KuraError::StepTooLarge { .. } => "StepTooLarge",
            KuraError::AssumptionViolated(_) => "AssumptionViolated",
            KuraError::NoFeasibleEpsilon { .. } => "NoFeasibleEpsilon",
            KuraError::FrequencyDominanceViolated { .. } => "FrequencyDominanceViolated",
            KuraError::NonPhysiologicalState { .. } => "NonPhysiologicalState",
            KuraError::EmptyInput(_) => "EmptyInput",
            KuraError::DisconnectedResult(_) => "DisconnectedResult",
            KuraError::InvalidConfig(_) => "InvalidConfig",
            KuraError::DimensionMismatch(_) => "DimensionMismatch",
            KuraError::Io(_) => "Io",
            KuraError::Json(_) => "Json",
            KuraError::Csv(_) => "Csv",
        }
    }
}
