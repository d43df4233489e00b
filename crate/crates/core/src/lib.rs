//! Periodic canards of `x' = f(x,y,z), y' = g(x,y,z), eps z' = x + |z|`.
//!
//! The pipeline builds the two reduced slow flows and their canonical curves
//! through the origin, a flow-time chart around the curves' crossing, the
//! return map on a small chart square, its winding-number certificate, and
//! finally the periodic orbit itself.

pub mod canardmap;
pub mod cli;
pub mod config;
pub mod degree;
pub mod expr;
pub mod integrate;
pub mod output;
pub mod reduced;
pub mod solver;
pub mod system;
