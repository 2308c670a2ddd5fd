//! Stochastic HYPE: a process algebra for stochastic hybrid systems.
//!
//! The pipeline is parse, validate, expand general durations, build the
//! labelled transition system, compile to a transition-driven stochastic
//! hybrid automaton (TDSHA), then simulate or analyse.

pub mod ast;
pub mod lts;
pub mod tdsha;
pub mod parser;
pub mod equiv;
pub mod sim;
