//! From-scratch persistent homology for 2D grayscale images, and a small
//! classifier stack built on top of it.
//!
//! The pipeline has three stages: build the filtered cubical complex of an
//! image ([`cubical`]), extract 0- and 1-dimensional persistence diagrams
//! by boundary-matrix reduction ([`persistence`]), and vectorize the
//! diagrams as top-k persistence landscapes ([`landscape`]). The
//! [`neuralnet`] module adds a hand-differentiated network that consumes
//! landscape vectors next to raw pixels, and [`harness`] orchestrates
//! seeded training-size experiments comparing a pixel-only baseline
//! against its topological counterpart.
//!
//! Determinism is a design goal throughout: all randomness flows through
//! the seeded generator in [`rng`], so identical seeds reproduce identical
//! folds, weights and reports byte for byte.

pub mod cubical;
pub mod harness;
pub mod imageio;
pub mod landscape;
pub mod neuralnet;
pub mod persistence;
pub mod rng;
