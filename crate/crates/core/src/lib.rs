//! CausalSR: a structural causal model of image degradation, with variational
//! inference over latent degradation factors, counterfactual sample
//! generation, do-operator interventions, and a multi-objective training loop
//! for single-image super-resolution.
//!
//! The crate is organized around the causal graph
//! `X -> S -> C -> Z -> Y`: a high-resolution image `X` produces semantic
//! features `S`, which translate to restoration context `C`, which drives the
//! latent degradation factors `Z` that finally determine the low-resolution
//! observation `Y`.
//!
//! Top-level areas:
//! - [`data`] — synthetic degradation pipeline (blur, bicubic, noise, JPEG)
//!   and paired-dataset loading.
//! - [`prior`] — mixture-of-random-graphs prior over causal structure and the
//!   causality-preserving message-passing density.
//! - [`semantic`] — frozen semantic feature extraction plus the
//!   semantic-contextual translation module.
//! - [`scm`] — the variational encoder (full-covariance posterior), the
//!   degradation likelihood network, the restoration head, and the ELBO.
//! - [`counterfactual`] — gradient-based counterfactual sample generation and
//!   its losses, with an empirical check of the perturbation KL bound.
//! - [`intervention`] — targeted latent interventions, ATE/CATE estimators,
//!   and the adversarial intervention objective.
//! - [`training`] — the three-stage block-coordinate training loop with
//!   dynamic loss weighting and descent/stationarity diagnostics.
//! - [`evalbench`] — PSNR/SSIM metrics, benchmark sweeps, and reports.

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod counterfactual;
pub mod data;
pub mod error;
pub mod evalbench;
pub mod image;
pub mod intervention;
pub mod linalg;
pub mod nn;
pub mod params;
pub mod prior;
pub mod rng;
pub mod scm;
pub mod semantic;
pub mod training;

pub use error::{Error, Result};
pub use image::{ColorSpace, ImageTensor};
