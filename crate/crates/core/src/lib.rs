pub mod checks;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod field;
pub mod flow;
pub mod frac;
pub mod grid;
pub mod manifold;
pub mod quadrature;
pub mod runner;
