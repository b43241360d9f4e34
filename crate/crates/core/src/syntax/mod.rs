//! Abstract and concrete syntax of the query language.

pub mod analysis;
pub mod ast;
pub mod error;
pub mod fresh;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use analysis::{check_first_order, free_vars, validate, validate_source, Diagnostic, Violation};
pub use ast::*;
pub use error::ParseError;
pub use fresh::FreshNames;
pub use parser::{parse, parse_expr};
pub use printer::{print_expr, print_program};
