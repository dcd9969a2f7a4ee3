//! Variational machinery for `p(x)`-Laplacian inclusions with nonsmooth
//! potentials: variable-exponent spaces, the `p(x)`-Laplacian, Clarke
//! calculus for piecewise potentials and a critical-point solver.

pub mod config;
pub mod error;
pub mod exponent;
pub mod expr;
pub mod functional;
pub mod lemmas;
pub mod linalg;
pub mod mesh;
pub mod modular;
pub mod operator;
pub mod potential;
pub mod sampling;
pub mod solver;

pub use config::{ProblemConfig, Setup};
pub use error::{Error, Result};
pub use exponent::{Critical, ExponentField, ExponentSummary, FieldSpec};
pub use expr::Expr;
pub use functional::Problem;
pub use mesh::{GridFunction, Mesh};
pub use solver::{SolveResult, SolverOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
