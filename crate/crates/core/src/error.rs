use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("line {line}: duplicate entry for ({country}, {year})")]
    DuplicateKey {
        line: u64,
        country: String,
        year: i32,
    },

    #[error("line {line}: non-positive value {value} for ({country}, {year})")]
    NonPositive {
        line: u64,
        country: String,
        year: i32,
        value: f64,
    },

    #[error("line {line}: negative count {value}")]
    NegativeCount { line: u64, value: f64 },

    #[error("unexpected header {found:?}; expected one of {expected}")]
    BadHeader { found: String, expected: String },

    #[error("line {line}: row does not match the {schema} schema declared by the header")]
    MixedSchema { line: u64, schema: &'static str },

    #[error(
        "population for ({country}, {year}): total {total} must be >= population 15+ {adults} > 0"
    )]
    PopulationInvariant {
        country: String,
        year: i32,
        total: f64,
        adults: f64,
    },

    #[error("{country}: year {year} is missing and has no later observation to fill from")]
    NoLaterObservation { country: String, year: i32 },

    #[error("no population entry for ({country}, {year})")]
    MissingPopulation { country: String, year: i32 },

    #[error("{country}: series has a gap at {year}")]
    Gap { country: String, year: i32 },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("attained levels have zero variance; trend slope is undefined")]
    DegenerateRegression,

    #[error("sample has zero variance")]
    ZeroVariance,

    #[error("unknown country {0:?}")]
    UnknownCountry(String),

    #[error("country sets differ between inputs: {0}")]
    CountryMismatch(String),

    #[error("reference {0:?} has a zero value")]
    ZeroReference(String),

    #[error("{name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("goodness of fit needs at least 4 merged bins, got {0}")]
    TooFewBins(usize),

    #[error("lists have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("level would become non-positive ({value}) in {year}")]
    NonPositiveLevel { year: i32, value: f64 },
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        Error::Malformed {
            line,
            message: err.to_string(),
        }
    }
}
