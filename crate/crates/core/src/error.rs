use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty law")]
    EmptyLaw,
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("cannot parse law spec `{spec}`: {reason}")]
    LawSpec { spec: String, reason: String },
    #[error("horizon too large: {entries} table entries exceed the cap of {cap}")]
    HorizonTooLarge { entries: usize, cap: usize },
    #[error("incommensurable lattices: spans {0} and {1}")]
    IncommensurableLattices(f64, f64),
    #[error("increment not on lattice: h = {h} is not a multiple of span {span}")]
    IncrementNotOnLattice { h: f64, span: f64 },
    #[error("degenerate law has no LIL normalization")]
    DegenerateLaw,
    #[error("point {0} is not on the table grid")]
    OffGrid(f64),
    #[error("point {point} lies beyond the table horizon {horizon}")]
    BeyondHorizon { point: f64, horizon: f64 },
    #[error("level {level} not present (table holds levels 1..={max})")]
    MissingLevel { level: usize, max: usize },
    #[error("horizon/generation cap: {0}")]
    PopulationCap(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("LIL statistic undefined for t = {0} (requires t > e)")]
    LilUndefined(f64),
    #[error("statistic undefined for n = {0} (requires n > e^e)")]
    RrtStatisticUndefined(u64),
    #[error("missing retained first-generation birth times")]
    MissingBirthTimes,
    #[error("enumeration limited to n <= {max}, got {n}")]
    EnumerationTooLarge { n: usize, max: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
