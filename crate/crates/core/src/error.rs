use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probe parameters: {0}")]
    InvalidProbe(String),

    #[error(
        "unphysical squeezing pair ({squeezed_db} dB below, {antisqueezed_db} dB above vacuum): \
         uncertainty product {product} < 1"
    )]
    Unphysical {
        squeezed_db: f64,
        antisqueezed_db: f64,
        product: f64,
    },

    /// The probe has no phase sensitivity (r = 0), so there is no optimal
    /// phase and every Cramér-Rao bound diverges.
    #[error("degenerate probe: squeezing parameter r = {r} carries no phase information")]
    DegenerateProbe { r: f64 },

    #[error("zero-energy probe: coherent-state bounds need a positive mean photon number")]
    ZeroEnergy,

    #[error("invalid phase grid: {0}")]
    InvalidGrid(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),

    #[error("true phase {0} outside (0, pi/2]")]
    PhaseOutOfRange(f64),

    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    /// A table entry does not fit the 32-bit entry width at the requested scale.
    #[error("lookup table entry magnitude {max_entry} exceeds entry width at scale {scale}")]
    TableCapacity { max_entry: f64, scale: u64 },

    #[error("stream accumulator capacity of {capacity} samples exhausted")]
    AccumulatorCapacity { capacity: u64 },

    #[error("grid mismatch: table has {table} points, state has {state}")]
    GridMismatch { table: usize, state: usize },

    #[error("no samples accumulated")]
    NoSamples,

    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),

    #[error("malformed table dump: {0}")]
    MalformedDump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True when the error stems from bad user input rather than a runtime failure.
    pub fn is_invalid_input(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::AccumulatorCapacity { .. }
        )
    }
}
