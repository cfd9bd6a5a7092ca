use std::fmt;

/// Errors raised while loading models, parsing inputs, or running an analysis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed JSON: {0}")]
    Json(String),

    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("arity mismatch at {path}: expected {expected}, found {found}")]
    Arity {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown post-process tag {tag:?} at {path}")]
    UnknownPostProcess { path: String, tag: String },

    #[error("input shape mismatch: expected {expected} components, got {found}")]
    InputShape { expected: usize, found: usize },

    #[error("NaN in input component {0}")]
    NanInput(usize),

    #[error("dimension {dim} out of range for a {arity}-dimensional box")]
    DimensionOutOfRange { dim: usize, arity: usize },

    #[error("split threshold must be finite, got {0}")]
    NonFiniteThreshold(f32),

    #[error("domain is empty")]
    EmptyDomain,

    #[error("numeric overflow: output component {component} became {value} after {trees_applied} trees")]
    NumericOverflow {
        component: usize,
        value: f32,
        trees_applied: usize,
    },

    #[error("invalid range specification: {0}")]
    InvalidRange(String),

    #[error("invalid robustness query: {0}")]
    InvalidQuery(String),

    #[error("window geometry: {0}")]
    Geometry(String),

    #[error("cannot parse domain: {0}")]
    DomainSyntax(String),

    #[error("test set row {row}: {message}")]
    TestSetRow { row: usize, message: String },

    #[error("test set: {0}")]
    TestSet(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// JSON-pointer-ish location inside a model document, used in diagnostics.
#[derive(Debug, Clone, Default)]
pub(crate) struct DocPath(Vec<Segment>);

#[derive(Debug, Clone)]
enum Segment {
    Key(&'static str),
    Index(usize),
}

impl DocPath {
    pub(crate) fn key(&self, key: &'static str) -> Self {
        let mut p = self.clone();
        p.0.push(Segment::Key(key));
        p
    }

    pub(crate) fn index(&self, i: usize) -> Self {
        let mut p = self.clone();
        p.0.push(Segment::Index(i));
        p
    }

    pub(crate) fn schema(&self, message: impl Into<String>) -> Error {
        Error::Schema {
            path: self.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for DocPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("$")?;
        for seg in &self.0 {
            match seg {
                Segment::Key(k) => write!(f, ".{k}")?,
                Segment::Index(i) => write!(f, "[{i}]")?,
            }
        }
        Ok(())
    }
}
