//! Concrete first-order representations of closures and environment sharing.

pub mod lower;
pub mod shape;
pub mod store;

pub use lower::{lower, lower_node, lower_seq, Repr, ReprChoice, ReprError};
pub use shape::{analyze_inlining, applicability_seq, Inlining, LabelDepGraph};
pub use store::{EnvKey, EnvStore};
