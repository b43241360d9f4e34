use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Lexical { line: usize, col: usize, message: String },
    #[error("{line}:{col}: expected {}, found {found}", expected.join(" or "))]
    Unexpected { line: usize, col: usize, expected: Vec<String>, found: String },
    #[error("{line}:{col}: reserved word `{word}` cannot be used as {role}")]
    ReservedWord { line: usize, col: usize, word: String, role: &'static str },
    #[error("{line}:{col}: {message}")]
    Invalid { line: usize, col: usize, message: String },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Lexical { line, col, .. }
            | ParseError::Unexpected { line, col, .. }
            | ParseError::ReservedWord { line, col, .. }
            | ParseError::Invalid { line, col, .. } => (*line, *col),
        }
    }
}
