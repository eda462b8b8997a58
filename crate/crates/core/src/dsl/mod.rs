//! Text formats: the model and profile language, proof-goal files, and the
//! flat probabilistic program format produced by `export`.
//!
//! ```
//! use covprob::dsl::{parse_model, print_model};
//!
//! let src = "component Counter {\n    state int n = 0;\n\n    service inc() {\n        n = n + 1;\n    }\n}\n";
//! let model = parse_model(src).unwrap();
//! assert_eq!(print_model(&model), src);
//! ```

mod goals;
mod lexer;
mod parser;
mod printer;
mod qpp;

use std::fmt;

pub use goals::{parse_goals, parse_goals_for, ProofGoals, Sequent};
pub use parser::{
    parse_formula, parse_model, parse_model_named, parse_profile, parse_profile_named, parse_term,
};
pub use printer::{print_model, print_profile, print_stmts};
pub use qpp::{export_qpp, parse_qpp, QppProgram};

/// Location of a token range. Lines and columns are 1-based; `col_end` is
/// exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub file: String,
    pub line: u32,
    pub col_start: u32,
    pub col_end: u32,
}

impl SourceSpan {
    pub fn new(file: &str, line: u32, col_start: u32, col_end: u32) -> Self {
        Self { file: file.to_string(), line, col_start, col_end: col_end.max(col_start) }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorKind {
    Syntax,
    DuplicateName,
    UnknownReference,
    UnknownVariable,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub span: SourceSpan,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, message: impl Into<String>, span: SourceSpan) -> Self {
        Self { kind, message: message.into(), span }
    }
}
