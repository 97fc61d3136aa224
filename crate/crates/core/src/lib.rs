//! Randomized-neural-network bases on overlapping subdomains with Schwarz
//! preconditioned least-squares collocation.

pub mod assembly;
pub mod basis;
pub mod calculus;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod krylov;
pub mod problems;
pub mod reduction;
pub mod schwarz;

#[cfg(test)]
mod testing;

pub use assembly::{assemble, normal_blocks, BlockSystem, LinearOperatorSpec, NormalBlocks};
pub use basis::{Activation, ConstrainingOperator, RandomBasis, WindowSet};
pub use calculus::{Jet2, JetField, ScalarTriple};
pub use config::{ProblemKind, RunConfig, Tau};
pub use error::{Error, Result};
pub use experiment::{build_instance, solve_instance, Instance, Reference, RunRecord};
pub use geometry::{Aabb, CartesianDecomposition, PointKind, PointSet};
pub use krylov::{Operator, SolveConfig, SolveReport, SolverKind};
pub use problems::{example1, example2, example3, ErrorReport, ProblemSpec};
pub use reduction::{ReducedLocalBasis, Threshold};
pub use schwarz::{build_index_sets, IndexSets, PreconditionerKind, SchwarzPreconditioner};
