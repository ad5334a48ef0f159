//! Probabilistic spherical discriminant analysis.
//!
//! Embeddings live on the unit hypersphere. Each speaker has a hidden identity
//! direction `z` drawn from a Von Mises-Fisher (VMF) prior `V(z | mu, b)`, and
//! every embedding of that speaker is drawn from `V(x | z, w)`. Because the VMF
//! family is self-conjugate, posteriors, marginal likelihoods and
//! same-speaker / different-speaker likelihood ratios are all closed form, and
//! the parameters `(w, b, mu)` can be learnt with an EM algorithm whose M-step
//! is a pair of one-dimensional root solves.
//!
//! Module map:
//!
//! * [`sphere_math`]: log-scale Bessel-I, the VMF normalizer and the
//!   mean-resultant function with its inverse.
//! * [`vmf`]: unit vectors and the VMF distribution (density, ML fit, sampling).
//! * [`model`]: the PSDA model, sufficient statistics, posterior, marginal
//!   likelihood and EM training.
//! * [`scoring`]: likelihood-ratio scoring of verification trials.
//! * [`metrics`]: DET points, EER and minimum detection cost.
//! * [`io`], [`synth`], [`cli`]: file formats, synthetic data and the
//!   command-line front end.

pub mod cli;
mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod scoring;
pub mod sphere_math;
pub mod synth;
pub mod vmf;

pub use error::{Error, Result};
pub use metrics::{det_points, eer, eer_staircase, min_dcf, DetPoint, LabeledScores};
pub use model::{em_train, init_params, EmOptions, EmResult, Init, PsdaModel, SideStats};
pub use scoring::{cosine_score, llr_score, score_matrix, Label, ScoreReport, Trial};
pub use sphere_math::{log_bessel_i, log_cnu, rho, rho_inv, BesselOrder, R_MAX};
pub use vmf::{UnitVec, VmfParams};
