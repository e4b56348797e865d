//! Spectrum and energy efficiency of Poisson-Voronoi random cellular networks.

pub mod coupling;
pub mod efficiency;
pub mod experiments;
pub mod interference;
pub mod markov;
pub mod montecarlo;
pub mod numerics;
pub mod report;
pub mod validation;
