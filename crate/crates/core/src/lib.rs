//! Language-driven robotic hand morphology generation.
//!
//! Pipeline: task text -> semantic schema -> hand grammar -> validated graph
//! -> reduced parameter set -> constraint filter -> OpenSCAD -> rank/refine.

pub mod cad;
pub mod config;
pub mod grammar;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod params;
pub mod pipeline;
pub mod validator;
