//! The three pipeline tiers (IoT, Edge, Cloud) and the experiment harness.

pub mod cloud;
pub mod edge;
pub mod harness;
pub mod iot;
pub mod queue;
