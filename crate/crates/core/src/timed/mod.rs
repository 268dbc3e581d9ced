//! Timed-automaton data model and symbolic machinery.

pub mod constraint;
pub mod reach;
pub mod region;
pub mod run;
pub mod ta;
pub mod zone;
pub mod zone_graph;
