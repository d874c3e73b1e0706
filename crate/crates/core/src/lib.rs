//! Optimal transport between axis-aligned Gaussian mixtures.
//!
//! * [`gmm`]: mixtures, EM fitting, MAP classification and sampling.
//! * [`ot`]: exact component-level transport, mixture-Wasserstein distances
//!   and barycentric parameter maps.
//! * [`barycenter`]: fixed-point mixture barycenters.
//! * [`msda`]: multi-source domain adaptation (barycenter transport and
//!   dictionary learning).
//! * [`io`]: CSV and JSON formats, synthetic data, run configuration.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix it to `f64`, which is what the file formats and the CLI use.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycenter;
pub mod error;
pub mod gmm;
pub mod io;
pub mod msda;
pub mod ot;
pub mod rng;
pub mod scalar;

pub use barycenter::{
    barycenter_loss, barycenter_run, mw_barycenter, smw_barycenter, BarycenterConfig, BarycenterInit,
    BarycenterTrace,
};
pub use error::{Error, Result};
pub use gmm::{em_fit, fit_labeled, EmConfig, LabeledDataset};
pub use msda::{dadil_fit, dadil_loss_grad, gmm_wbt, reconstruct, DadilConfig, OptimizerKind};
pub use ot::{gauss_w2_sq, gmmot, mixture_cost, mw2_sq, smw2_sq, solve_transport, transport_params};
pub use scalar::Scalar;

pub type Gaussian = gmm::DiagGaussian<f64>;
pub type Gmm = gmm::GaussianMixture<f64>;
pub type Dataset = gmm::LabeledDataset<f64>;
pub type Plan = ot::TransportPlan<f64>;
pub type Costs = ot::CostMatrix<f64>;
pub type Dictionary = msda::Dictionary<f64>;
pub type Adaptation = msda::AdaptationResult<f64>;
