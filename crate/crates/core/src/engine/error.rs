use thiserror::Error;

use crate::syntax::Name;

/// Runtime errors; each aborts the evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("UnknownLabel: {0}")]
    UnknownLabel(String),
    #[error("ArityMismatch: {0}")]
    ArityMismatch(String),
    #[error("UnboundVariable: ${0}")]
    UnboundVariable(Name),
    #[error("TypeError: {0}")]
    TypeError(String),
    #[error("NotFirstOrder: {0}")]
    NotFirstOrder(String),
    #[error("Unsupported: {0}")]
    Unsupported(String),
    #[error("RecursionLimit: more than {0} nested calls")]
    RecursionLimit(usize),
}

impl EvalError {
    pub fn tag(&self) -> &'static str {
        match self {
            EvalError::UnknownLabel(_) => "UnknownLabel",
            EvalError::ArityMismatch(_) => "ArityMismatch",
            EvalError::UnboundVariable(_) => "UnboundVariable",
            EvalError::TypeError(_) => "TypeError",
            EvalError::NotFirstOrder(_) => "NotFirstOrder",
            EvalError::Unsupported(_) => "Unsupported",
            EvalError::RecursionLimit(_) => "RecursionLimit",
        }
    }
}

pub(crate) fn type_error(msg: impl Into<String>) -> EvalError {
    EvalError::TypeError(msg.into())
}
