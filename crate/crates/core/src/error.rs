use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate {direction} record for flow {exporter}->{importer} ({resource}, {year})")]
    DuplicateRecord {
        direction: String,
        exporter: String,
        importer: String,
        resource: String,
        year: i32,
    },

    #[error("unknown country id `{id}`{}", at_line(.line))]
    UnknownCountry { id: String, line: Option<u64> },

    #[error("unknown resource id `{id}`{}", at_line(.line))]
    UnknownResource { id: String, line: Option<u64> },

    #[error("duplicate id `{0}` in registry")]
    DuplicateId(String),

    #[error("year {year} outside configured range {min}-{max}{}", at_line(.line))]
    YearOutOfRange {
        year: i32,
        min: i32,
        max: i32,
        line: Option<u64>,
    },

    #[error("malformed row{}: {msg}", at_line(.line))]
    MalformedRow { msg: String, line: Option<u64> },

    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("region tag `{0}` matches no country")]
    EmptyRegion(String),

    #[error("condensed node id `{0}` collides with an existing country")]
    NodeIdCollision(String),

    #[error("no layer for resource `{resource}` in year {year}")]
    MissingLayer { resource: String, year: i32 },

    #[error("unknown region `{0}`")]
    UnknownRegion(String),

    #[error("power iteration did not converge after {max_iter} iterations (last estimate {last_estimate}, residual {residual})")]
    NoConvergence {
        max_iter: usize,
        last_estimate: f64,
        residual: f64,
    },

    #[error("{0} flows cannot be placed into {1} off-diagonal cells")]
    TooManyFlows(usize, usize),

    #[error("cannot redraw exporters on a layer with fewer than 2 nodes")]
    LayerTooSmall,

    #[error("archive checksum mismatch: stored {stored}, computed {computed}")]
    ChecksumMismatch { stored: String, computed: String },

    #[error("archive format: {0}")]
    ArchiveFormat(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_line(line: &Option<u64>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
