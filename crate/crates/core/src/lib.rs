//! Receptiveness reframing workbench.
//!
//! Pipeline: [`corpus`] filtering, [`strategies`] prompt rendering,
//! [`gateway`] model access, [`reframer`] generation, then [`textmetrics`],
//! [`annotation`] and [`stats`] analysis, with [`report`] and [`pipeline`]
//! writing reproducible report bundles.

pub mod corpus;
pub mod gateway;
pub mod strategies;
pub mod reframer;
pub mod textmetrics;
pub mod stats;
pub mod annotation;
pub mod pipeline;
pub mod report;
