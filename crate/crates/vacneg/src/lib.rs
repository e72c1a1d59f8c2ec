//! Logarithmic negativity between pixelated regions of the massless
//! non-interacting lattice scalar-field vacuum, in configurable extended
//! precision: negativity-vs-separation curves, negativity-sphere radii,
//! ground-state wavefunctions of G H^Gamma, geometric decay constants, and
//! their continuum extrapolations.

pub mod analysis;
pub mod cli;
pub mod correlators;
pub mod geometry;
pub mod mpnum;
pub mod negativity;
