//! Multi-source domain adaptation with mixture barycenters.
//!
//! Two methods are provided. [`gmm_wbt`] computes the barycenter of the labeled
//! source mixtures and carries its components onto the target mixture along
//! the optimal plan, keeping their labels. [`dadil_fit`] learns a dictionary of
//! labeled atom mixtures and per-domain barycentric coordinates so that every
//! domain is close to the barycenter of the atoms under its coordinates; the
//! target reconstruction then supplies labels for the target domain.

mod dictionary;
mod optim;
mod project;

pub use dictionary::{frozen_loss_grad, Dictionary, DictionaryGrad, FrozenPlans};
pub use optim::{Optimizer, OptimizerKind};
pub use project::{project_nonneg, project_simplex};

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{barycenter_run, smw_barycenter, BarycenterConfig, BarycenterInit};
use crate::error::{Error, Result};
use crate::gmm::{GaussianMixture, DEFAULT_S_MIN};
use crate::ot::{gmmot, supervised_transport, transport_params};
use crate::rng::{stream, stream_rng};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DadilConfig {
    /// Number of atoms; defaults to the number of domains.
    pub n_atoms: Option<usize>,
    /// Components per atom; defaults to the target mixture's component count.
    pub k_atom: Option<usize>,
    pub eta: f64,
    pub n_iter: usize,
    pub beta: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub s_min: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub record_coords: bool,
}

impl Default for DadilConfig {
    fn default() -> Self {
        Self {
            n_atoms: None,
            k_atom: None,
            eta: 0.1,
            n_iter: 200,
            beta: 1.0,
            inner_tol: 1e-5,
            inner_max_iter: 20,
            s_min: DEFAULT_S_MIN,
            seed: 0,
            optimizer: OptimizerKind::default(),
            record_coords: true,
        }
    }
}

impl DadilConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == Some(0) || self.k_atom == Some(0) {
            return Err(Error::input("n_atoms and k_atom must be positive"));
        }
        if self.n_iter == 0 || self.inner_max_iter == 0 {
            return Err(Error::input("n_iter and inner_max_iter must be positive"));
        }
        if !(self.eta > 0.0) || !(self.inner_tol > 0.0) || !(self.s_min > 0.0) {
            return Err(Error::input("eta, inner_tol and s_min must be positive"));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::input("beta must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Inner barycenter settings for domain `domain`.
    pub fn inner(&self, k_atom: usize, domain: usize) -> BarycenterConfig {
        let seed = stream_rng(self.seed, stream::DADIL_DOMAIN_BASE + domain as u64).random();
        BarycenterConfig {
            k_b: k_atom,
            beta: self.beta,
            tol: self.inner_tol,
            max_iter: self.inner_max_iter,
            seed,
            init: BarycenterInit::RandomNormal,
            s_min: self.s_min,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdaptationResult<T> {
    /// Labeled mixture describing the target domain.
    pub target_gmm: GaussianMixture<T>,
    pub loss_trace: Vec<f64>,
    /// Coordinates after every optimizer step (dictionary learning only).
    pub coords_trace: Option<Vec<Array2<f64>>>,
}

/// Barycenter of the sources with equal coordinates, transported onto the
/// target. Each barycenter component moves to `Σ_j (ω_ij / p_i) θ^T_j` and keeps
/// its soft label.
pub fn gmm_wbt<T: Scalar>(
    sources: &[GaussianMixture<T>],
    target: &GaussianMixture<T>,
    cfg: &BarycenterConfig,
) -> Result<AdaptationResult<T>> {
    check_domains(sources, target)?;
    let n = sources.len();
    let lambda = Array1::from_elem(n, T::one() / T::from_count(n));
    let (b, trace) = smw_barycenter(sources, lambda.view(), cfg)?;
    let (plan, _) = gmmot(&b, target)?;
    let mapped = transport_params(&plan, b.weights(), target)?;
    let s_min = T::lit(cfg.s_min);
    let stds = mapped.stds.mapv(|s| s.max(s_min));
    let (weights, _, _, labels) = b.into_parts();
    let target_gmm = GaussianMixture::from_parts(weights, mapped.means, stds, labels);
    Ok(AdaptationResult { target_gmm, loss_trace: trace.losses, coords_trace: None })
}

fn check_domains<T: Scalar>(sources: &[GaussianMixture<T>], target: &GaussianMixture<T>) -> Result<usize> {
    let first = sources.first().ok_or_else(|| Error::input("at least one source is required"))?;
    let n_classes = first
        .n_classes()
        .ok_or_else(|| Error::state("source mixtures must be labeled"))?;
    for (i, s) in sources.iter().enumerate() {
        if s.n_classes() != Some(n_classes) {
            return Err(Error::input(format!("source {i} is unlabeled or has a different class count")));
        }
        if s.dim() != target.dim() {
            return Err(Error::input(format!("source {i} has dimension {}, target {}", s.dim(), target.dim())));
        }
    }
    Ok(n_classes)
}

/// Loss, frozen-plan gradient and the intermediate objects of one evaluation.
#[derive(Clone, Debug)]
pub struct LossGrad<T> {
    pub loss: T,
    pub grad: DictionaryGrad<T>,
    pub plans: FrozenPlans<T>,
    /// Barycenter of the atoms under each domain's coordinates.
    pub barycenters: Vec<GaussianMixture<T>>,
}

/// Dictionary objective `Σ_ℓ SMW₂²(Q_ℓ, B_ℓ) + MW₂²(Q_T, B_T)` and its gradient
/// with all plans frozen at the evaluation point.
pub fn dadil_loss_grad<T: Scalar>(
    dict: &Dictionary<T>,
    sources: &[GaussianMixture<T>],
    target: &GaussianMixture<T>,
    cfg: &DadilConfig,
) -> Result<LossGrad<T>> {
    dadil_loss_grad_warm(dict, sources, target, cfg, None)
}

/// As [`dadil_loss_grad`], starting each inner barycenter from `warm[ℓ]`.
pub fn dadil_loss_grad_warm<T: Scalar>(
    dict: &Dictionary<T>,
    sources: &[GaussianMixture<T>],
    target: &GaussianMixture<T>,
    cfg: &DadilConfig,
    warm: Option<&[GaussianMixture<T>]>,
) -> Result<LossGrad<T>> {
    cfg.validate()?;
    let n_classes = check_domains(sources, target)?;
    if dict.n_classes() != n_classes || dict.dim() != target.dim() || dict.n_domains() != sources.len() + 1 {
        return Err(Error::input("dictionary does not match the domains"));
    }
    let domains: Vec<&GaussianMixture<T>> = sources.iter().chain(std::iter::once(target)).collect();
    let atoms = dict.atoms();
    let k = dict.k_atom();
    let beta = T::lit(cfg.beta);
    let n_dom = domains.len();

    // (barycenter, inner plans, outer plan) per domain.
    type Solved<T> = (GaussianMixture<T>, Vec<Array2<T>>, Array2<T>);
    let per_domain: Vec<Solved<T>> = (0..n_dom)
        .into_par_iter()
        .map(|l| {
            let inner_cfg = cfg.inner(k, l);
            let start = warm.and_then(|w| w.get(l));
            let run = barycenter_run(&atoms, dict.coords.row(l), &inner_cfg, true, start)?;
            let beta_l = if l + 1 == n_dom { T::zero() } else { beta };
            let (outer, _) = supervised_transport(domains[l], &run.barycenter, beta_l)?;
            Ok((run.barycenter, run.plans, outer.into_omega()))
        })
        .collect::<Result<_>>()?;

    let mut barycenters = Vec::with_capacity(n_dom);
    let mut plans = FrozenPlans { inner: Vec::with_capacity(n_dom), outer: Vec::with_capacity(n_dom) };
    for (b, inner, outer) in per_domain {
        barycenters.push(b);
        plans.inner.push(inner);
        plans.outer.push(outer);
    }
    let owned: Vec<GaussianMixture<T>> = domains.into_iter().cloned().collect();
    let (loss, grad) = frozen_loss_grad(dict, &owned, beta, &plans)?;
    Ok(LossGrad { loss, grad, plans, barycenters })
}

/// Barycenter of the dictionary atoms under `lambda`.
pub fn reconstruct<T: Scalar>(
    dict: &Dictionary<T>,
    lambda: ArrayView1<'_, T>,
    cfg: &BarycenterConfig,
) -> Result<GaussianMixture<T>> {
    smw_barycenter(&dict.atoms(), lambda, cfg).map(|(b, _)| b)
}

/// Learns a dictionary whose atom barycenters reproduce every domain, then
/// returns it with the labeled target reconstruction.
pub fn dadil_fit<T: Scalar>(
    sources: &[GaussianMixture<T>],
    target: &GaussianMixture<T>,
    cfg: &DadilConfig,
) -> Result<(Dictionary<T>, AdaptationResult<T>)> {
    cfg.validate()?;
    let n_classes = check_domains(sources, target)?;
    let n_dom = sources.len() + 1;
    let n_atoms = cfg.n_atoms.unwrap_or(n_dom);
    let k_atom = cfg.k_atom.unwrap_or(target.n_components());
    let mut dict = Dictionary::init(n_atoms, k_atom, target.dim(), n_classes, n_dom, cfg.seed);
    let s_min = T::lit(cfg.s_min);

    let mut flat = dict.flatten();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.eta, flat.len());
    let mut loss_trace = Vec::with_capacity(cfg.n_iter);
    let mut coords_trace = cfg.record_coords.then(Vec::new);
    let mut warm: Option<Vec<GaussianMixture<T>>> = None;

    for it in 0..cfg.n_iter {
        let eval = dadil_loss_grad_warm(&dict, sources, target, cfg, warm.as_deref())?;
        if !eval.loss.is_finite() {
            return Err(Error::numerical("dadil", format!("non-finite loss at iteration {it}")));
        }
        loss_trace.push(eval.loss.to_f64_lossy());
        opt.step(&mut flat, &eval.grad.flatten());
        dict.assign(&flat);
        for s in dict.stds.iter_mut() {
            s.mapv_inplace(|x| x.max(s_min));
        }
        for mut row in dict.coords.rows_mut() {
            let p = project_simplex(row.view());
            row.assign(&p);
        }
        flat = dict.flatten();
        debug_assert!(dict.coords.rows().into_iter().all(|r| (r.sum() - T::one()).abs() < T::lit(1e-9)));
        if let Some(trace) = coords_trace.as_mut() {
            trace.push(dict.coords.mapv(|x| x.to_f64_lossy()));
        }
        warm = Some(eval.barycenters);
    }

    let target_cfg = cfg.inner(k_atom, n_dom - 1);
    let start = warm.as_ref().map(|w| &w[n_dom - 1]);
    let run = barycenter_run(&dict.atoms(), dict.coords.row(n_dom - 1), &target_cfg, true, start)?;
    let result = AdaptationResult { target_gmm: run.barycenter, loss_trace, coords_trace };
    Ok((dict, result))
}
