//! Evaluators over one value model.

pub mod builtins;
pub mod env;
pub mod error;
pub mod eval;
pub mod stats;
pub mod value;

pub use error::EvalError;
pub use eval::{eval, eval_here, EngineKind, EvalOptions, Evaluation};
pub use stats::RunStats;
pub use value::{node_count, serialize, values_equal, Item, Value};
