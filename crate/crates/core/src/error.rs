//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed identifier text (empty prefix, embedded whitespace, ...).
    #[error("invalid term id {text:?}: {reason}")]
    InvalidTermId { text: String, reason: &'static str },

    /// Structural problem in an OBO file, with a 1-based line number.
    #[error("{file}:{line}: {message}")]
    OboSyntax {
        file: String,
        line: usize,
        message: String,
    },

    /// The same term id declared twice inside one file.
    #[error("{file}: duplicate declaration of {id} (lines {first} and {second})")]
    DuplicateTerm {
        file: String,
        id: String,
        first: usize,
        second: usize,
    },

    /// Structural problem in a tab-separated file that must parse fully.
    #[error("{file}:{line}: {message}")]
    TableSyntax {
        file: String,
        line: usize,
        message: String,
    },

    /// Class expression syntax error, with a 0-based character offset.
    #[error("syntax error at offset {offset}: {message}")]
    ExpressionSyntax { offset: usize, message: String },

    /// Expression uses a construct outside the supported subset.
    #[error("unsupported construct {construct:?} at offset {offset}")]
    UnsupportedConstruct { construct: String, offset: usize },

    /// Label-form atom that matches no label in the ontology.
    #[error("unknown label {label:?}")]
    UnknownLabel { label: String },

    /// Label shared by several classes, so label-form text cannot resolve.
    #[error("ambiguous label {label:?} (matches {first} and {second})")]
    AmbiguousLabel {
        label: String,
        first: String,
        second: String,
    },

    /// Label-form printing needs a label the ontology does not provide.
    #[error("no label for {id}")]
    UnlabeledTerm { id: String },

    /// `ancestors_of` was asked about an expression never registered.
    #[error("unregistered expression {text:?}")]
    UnregisteredExpression { text: String },

    /// Ontology declares ids under the prefix reserved for materialized
    /// expression classes.
    #[error("ontology declares reserved prefix {prefix:?} (id {id})")]
    ReservedPrefix { prefix: String, id: String },

    /// Axiom that the OBO writer cannot express.
    #[error("cannot serialize axiom on {id}: {reason}")]
    Unserializable { id: String, reason: String },

    /// Closure cache file does not match the ontology it is used with.
    #[error("closure cache {path}: {reason}")]
    BadCache { path: PathBuf, reason: String },

    /// Information-content table requested over an empty corpus.
    #[error("cannot build an information-content table from an empty corpus")]
    EmptyCorpus,

    /// Workspace scaffolding refused because the target already has content.
    #[error("output directory {path} is not empty")]
    WorkspaceNotEmpty { path: PathBuf },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
