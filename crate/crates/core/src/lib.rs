//! Nested-sampling posterior inference over non-Gaussian SLAM factor graphs.
//!
//! A factor graph is split into an acyclic spanning set of factors, sampled
//! ancestrally from the unit hypercube, and a loop-closing remainder that acts
//! as the nested-sampling likelihood. The sampler returns weighted posterior
//! samples together with the log-evidence, which also drives the weighting of
//! data-association hypotheses.

pub mod decompose;
pub mod geom;
pub mod graph;
pub mod hypotheses;
pub mod laplace;
pub mod likelihood;
pub mod metrics;
pub mod nested;
pub mod priorgen;
pub mod samples;
pub mod scenarios;

#[cfg(test)]
mod test_support;
