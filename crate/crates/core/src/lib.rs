//! Mixtures of exponential-distance models for clustering categorical
//! sequences, with sampling weights, covariate-dependent membership and a
//! uniform noise component.
//!
//! Each component is centred on a modal sequence and penalises Hamming
//! mismatches through precision parameters, which may be shared or vary by
//! cluster and time point (model types `CC`, `UC`, `CU`, `UU`, each with an
//! optional noise variant `..N`). Fits use ECM started from Ward clustering
//! refined by weighted PAM; model choice is by BIC over a grid or by
//! stepwise search over covariates.
//!
//! ```
//! use medseq::ecm::{fit, ModelSpec};
//! use medseq::edm::ModelType;
//! use medseq::sim::{separated_thetas, simulate_cc};
//!
//! let thetas = separated_thetas(2, 10, 3, 1);
//! let sim = simulate_cc(60, &thetas, 2.0, &[0.5, 0.5], 3, 1)?;
//! let fitted = fit(&sim.data, &ModelSpec::new(ModelType::CC, 2).with_seed(1))?;
//! assert_eq!(fitted.components.theta.len(), 2);
//! # Ok::<(), medseq::error::MedseqError>(())
//! ```
//!
//! Runnable examples live in `examples/`:
//!
//! ```text
//! summarize_data          transversal distributions, entropies, duplicates
//! fit_mixture             one fit on simulated data
//! grid_search             all model types over a range of G
//! covariate_gating        joint covariate fit, two-step regression, stepwise
//! bootstrap_se            weighted likelihood bootstrap standard errors
//! medoid_initialisation   Ward + weighted PAM and its classification-EM twin
//! normalising_constant    closed form against enumeration
//! mvad                    the MVAD school-to-work data
//! ```

pub mod distance;
pub mod edm;
pub mod error;
pub mod seqdata;
pub mod util;
pub mod gating;
pub mod ecm;
pub mod selection;
pub mod sim;
pub mod wlbs;
pub mod report;
pub mod cli;
