use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;
use tree_gopt::problem::{standardize, BlackBoxRegistry, ProblemError, RawProblem, StandardFormProblem};

/// 1-based line and column in a problem file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{position}: {message}")]
    Schema {
        origin: String,
        position: Position,
        message: String,
    },
    #[error("{origin}{}: {source}", .position.map(|p| format!(":{p}")).unwrap_or_default())]
    Problem {
        origin: String,
        position: Option<Position>,
        #[source]
        source: ProblemError,
    },
}

impl LoadError {
    pub fn position(&self) -> Option<Position> {
        match self {
            LoadError::Io { .. } => None,
            LoadError::Schema { position, .. } => Some(*position),
            LoadError::Problem { position, .. } => *position,
        }
    }
}

pub fn load_problem(path: &Path) -> Result<StandardFormProblem, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problem(&text, &path.display().to_string())
}

/// Parses problem JSON. `origin` names the source in error messages.
pub fn parse_problem(text: &str, origin: &str) -> Result<StandardFormProblem, LoadError> {
    let raw = parse_raw(text, origin)?;
    standardize(&raw, &BlackBoxRegistry::new()).map_err(|source| LoadError::Problem {
        origin: origin.to_string(),
        position: locate(text, &raw, &source),
        source,
    })
}

pub fn parse_raw(text: &str, origin: &str) -> Result<RawProblem, LoadError> {
    serde_json::from_str(text).map_err(|e| LoadError::Schema {
        origin: origin.to_string(),
        position: Position {
            line: e.line(),
            column: e.column(),
        },
        message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
    })
}

fn locate(text: &str, raw: &RawProblem, err: &ProblemError) -> Option<Position> {
    match err {
        ProblemError::Parse { context, source } => {
            let expr = if context == "objective" {
                raw.objective.expr.as_str()
            } else {
                raw.nonlinear
                    .iter()
                    .find(|c| c.name == *context)
                    .and_then(|c| c.expr.as_deref())?
            };
            let quoted = serde_json::to_string(expr).ok()?;
            let at = text.find(&quoted)?;
            // skip the opening quote; escapes are rare in expressions
            Some(position_of(text, at + 1 + source.position))
        }
        ProblemError::DuplicateVariable(name) | ProblemError::InvertedBounds { name, .. } => {
            let at = text.find(&format!("\"{name}\""))?;
            Some(position_of(text, at))
        }
        ProblemError::UnknownVariable { context, .. }
        | ProblemError::UnknownBlackBox { context, .. }
        | ProblemError::BodyChoice { context }
        | ProblemError::BlackBoxVars { context } => {
            let at = text.find(&format!("\"{context}\""))?;
            Some(position_of(text, at))
        }
        _ => None,
    }
}

fn position_of(text: &str, offset: usize) -> Position {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    Position { line, column }
}
