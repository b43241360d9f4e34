pub mod corpus;
pub mod defunc;
pub mod engine;
pub mod gen;
pub mod pipeline;
pub mod represent;
pub mod rewrite;
pub mod syntax;
