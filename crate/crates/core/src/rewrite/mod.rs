//! Optimizer passes over target programs, run to a fixpoint.

pub mod callgraph;
pub mod cancel;
pub mod simplify;
pub mod subst;
pub mod unfold;

use std::fmt;
use std::str::FromStr;

use crate::syntax::Program;

pub use callgraph::{drop_unreachable, CallGraph};
pub use cancel::{cancel_case_of, RewriteError};
pub use simplify::simplify;
pub use unfold::{is_simple, unfold};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OptLevel {
    /// Defunctionalization only.
    #[default]
    O0,
    /// Unfolding and case-of cancellation.
    O1,
    /// Everything, plus the closure simplifications.
    O2,
}

impl OptLevel {
    pub const ALL: [OptLevel; 3] = [OptLevel::O0, OptLevel::O1, OptLevel::O2];

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for OptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for OptLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "0" => Ok(OptLevel::O0),
            "1" => Ok(OptLevel::O1),
            "2" => Ok(OptLevel::O2),
            _ => Err(format!("unknown optimization level `{s}` (expected 0, 1 or 2)")),
        }
    }
}

/// Rounds after which optimization stops without a fixpoint.
pub const MAX_ROUNDS: usize = 50;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptReport {
    pub rounds: usize,
    pub fixpoint: bool,
}

impl OptReport {
    pub fn diagnostic(&self) -> Option<String> {
        (!self.fixpoint).then(|| format!("optimizer stopped after {} rounds without reaching a fixpoint", self.rounds))
    }
}

/// One round of the passes enabled at `level`.
pub fn round(p: &Program, level: OptLevel) -> Result<Program, RewriteError> {
    if level == OptLevel::O0 {
        return Ok(p.clone());
    }
    let q = cancel_case_of(&unfold(p))?;
    Ok(if level == OptLevel::O2 { simplify(&q) } else { q })
}

pub fn optimize_with_report(p: &Program, level: OptLevel) -> Result<(Program, OptReport), RewriteError> {
    let mut cur = p.clone();
    for rounds in 1..=MAX_ROUNDS {
        let next = round(&cur, level)?;
        if next == cur {
            return Ok((cur, OptReport { rounds, fixpoint: true }));
        }
        cur = next;
    }
    Ok((cur, OptReport { rounds: MAX_ROUNDS, fixpoint: false }))
}

pub fn optimize(p: &Program, level: OptLevel) -> Result<Program, RewriteError> {
    optimize_with_report(p, level).map(|(q, _)| q)
}
