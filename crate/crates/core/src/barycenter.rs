//! Mixture-Wasserstein barycenters by fixed-point iteration.
//!
//! The barycenter `B` of mixtures `P_1..P_C` with coordinates `λ` minimizes
//! `Σ_c λ_c SMW₂²(B, P_c)`. Each iteration solves the `C` component-level
//! transport problems from the current `B`, then moves every barycenter
//! component to the `λ`-weighted average of its barycentric images. With plans
//! fixed that update is the exact minimizer, so the loss never increases.
//!
//! Barycenter weights stay uniform (`1/K_B`) throughout.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{check_simplex_with_tol, GaussianMixture, DEFAULT_S_MIN};
use crate::ot::{row_normalized, supervised_transport};
use crate::rng::{stream, stream_rng};
use crate::scalar::Scalar;

/// Coordinates may leave the simplex by at most this much.
pub const LAMBDA_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarycenterInit {
    /// Means drawn from `N(0, I)`, unit stds, uniform labels.
    RandomNormal,
    /// Component `i` copies component `i mod K` of the given measure.
    FromMeasure(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarycenterConfig {
    pub k_b: usize,
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub init: BarycenterInit,
    pub s_min: f64,
}

impl Default for BarycenterConfig {
    fn default() -> Self {
        Self {
            k_b: 6,
            beta: 1.0,
            tol: 1e-6,
            max_iter: 100,
            seed: 0,
            init: BarycenterInit::RandomNormal,
            s_min: DEFAULT_S_MIN,
        }
    }
}

impl BarycenterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_b == 0 || self.max_iter == 0 {
            return Err(Error::input("k_b and max_iter must be positive"));
        }
        if !(self.tol > 0.0) || !(self.s_min > 0.0) {
            return Err(Error::input("tol and s_min must be positive"));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::input("beta must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BarycenterTrace {
    /// Loss evaluated with the plans of each iteration, before its update.
    pub losses: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Everything a fixed-point run produces.
#[derive(Clone, Debug)]
pub struct BarycenterRun<T> {
    pub barycenter: GaussianMixture<T>,
    pub trace: BarycenterTrace,
    /// Plans `B → P_c` of the last iteration. The returned barycenter is the
    /// update computed from them, so its parameters are exactly
    /// `Σ_c λ_c Σ_j (ω^c_ij / b_i) θ^c_j` (up to the std floor).
    pub plans: Vec<Array2<T>>,
}

/// Supervised barycenter of labeled mixtures.
pub fn smw_barycenter<T: Scalar>(
    measures: &[GaussianMixture<T>],
    lambda: ArrayView1<'_, T>,
    cfg: &BarycenterConfig,
) -> Result<(GaussianMixture<T>, BarycenterTrace)> {
    barycenter_run(measures, lambda, cfg, true, None).map(|r| (r.barycenter, r.trace))
}

/// Unsupervised barycenter: labels are ignored and the result is unlabeled.
pub fn mw_barycenter<T: Scalar>(
    measures: &[GaussianMixture<T>],
    lambda: ArrayView1<'_, T>,
    cfg: &BarycenterConfig,
) -> Result<(GaussianMixture<T>, BarycenterTrace)> {
    let cfg = BarycenterConfig { beta: 0.0, ..cfg.clone() };
    barycenter_run(measures, lambda, &cfg, false, None).map(|r| (r.barycenter, r.trace))
}

/// Runs the fixed-point iteration. `supervised` selects label-aware costs and a
/// labeled result; `warm` replaces `cfg.init` with an explicit starting point
/// (its weights are ignored).
pub fn barycenter_run<T: Scalar>(
    measures: &[GaussianMixture<T>],
    lambda: ArrayView1<'_, T>,
    cfg: &BarycenterConfig,
    supervised: bool,
    warm: Option<&GaussianMixture<T>>,
) -> Result<BarycenterRun<T>> {
    cfg.validate()?;
    let n_classes = check_measures(measures, lambda, supervised)?;
    let k_b = cfg.k_b;
    let beta = if supervised { T::lit(cfg.beta) } else { T::zero() };

    let mut b = match warm {
        Some(w) => {
            if w.n_components() != k_b || w.dim() != measures[0].dim() {
                return Err(Error::input("warm start has the wrong shape"));
            }
            if supervised && w.n_classes() != n_classes {
                return Err(Error::input("warm start must carry matching labels"));
            }
            let labels = if supervised { w.labels().map(|l| l.to_owned()) } else { None };
            GaussianMixture::from_parts(uniform(k_b), w.means().to_owned(), w.stds().to_owned(), labels)
        }
        None => initial(measures, cfg, n_classes)?,
    };

    let tol = cfg.tol;
    let s_min = T::lit(cfg.s_min);
    let mut trace = BarycenterTrace::default();
    let mut plans = Vec::new();
    let mut previous: Option<f64> = None;
    for _ in 0..cfg.max_iter {
        let solved = solve_all(&b, measures, beta)?;
        let loss: T = solved.iter().zip(lambda.iter()).map(|((_, obj), &l)| l * *obj).sum();
        if !loss.is_finite() {
            return Err(Error::numerical("barycenter", format!("non-finite loss at iteration {}", trace.iterations_run)));
        }
        let loss = loss.to_f64_lossy();
        trace.losses.push(loss);
        trace.iterations_run += 1;
        plans = solved.into_iter().map(|(p, _)| p).collect();
        b = update(&b, measures, lambda, &plans, s_min, supervised);
        if let Some(prev) = previous {
            if (loss - prev).abs() < tol {
                trace.converged = true;
                break;
            }
        }
        previous = Some(loss);
    }
    Ok(BarycenterRun { barycenter: b, trace, plans })
}

/// `Σ_c λ_c SMW₂²(B, P_c)` with label weight `beta` (labels unused at zero).
pub fn barycenter_loss<T: Scalar>(
    b: &GaussianMixture<T>,
    measures: &[GaussianMixture<T>],
    lambda: ArrayView1<'_, T>,
    beta: T,
) -> Result<T> {
    if measures.len() != lambda.len() {
        return Err(Error::input("lambda length differs from number of measures"));
    }
    let mut total = T::zero();
    for (p, &l) in measures.iter().zip(lambda.iter()) {
        total += l * supervised_transport(b, p, beta)?.1;
    }
    Ok(total)
}

fn check_measures<T: Scalar>(
    measures: &[GaussianMixture<T>],
    lambda: ArrayView1<'_, T>,
    supervised: bool,
) -> Result<Option<usize>> {
    let first = measures.first().ok_or_else(|| Error::input("no measures given"))?;
    if lambda.len() != measures.len() {
        return Err(Error::input(format!(
            "lambda has {} entries for {} measures",
            lambda.len(),
            measures.len()
        )));
    }
    check_simplex_with_tol(lambda, "lambda", T::lit(LAMBDA_TOL))?;
    let n_classes = if supervised { first.n_classes() } else { None };
    if supervised && n_classes.is_none() {
        return Err(Error::state("supervised barycenter requires labeled measures"));
    }
    for (c, p) in measures.iter().enumerate() {
        if p.dim() != first.dim() {
            return Err(Error::input(format!("measure {c} has dimension {}, expected {}", p.dim(), first.dim())));
        }
        if supervised && p.n_classes() != n_classes {
            return Err(Error::input(format!("measure {c} has a different label layout")));
        }
    }
    Ok(n_classes)
}

fn uniform<T: Scalar>(k: usize) -> Array1<T> {
    Array1::from_elem(k, T::one() / T::from_count(k))
}

fn initial<T: Scalar>(
    measures: &[GaussianMixture<T>],
    cfg: &BarycenterConfig,
    n_classes: Option<usize>,
) -> Result<GaussianMixture<T>> {
    let (k_b, d) = (cfg.k_b, measures[0].dim());
    match cfg.init {
        BarycenterInit::RandomNormal => {
            let mut rng = stream_rng(cfg.seed, stream::BARYCENTER_INIT);
            let means = Array2::from_shape_simple_fn((k_b, d), || {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z)
            });
            let labels = n_classes.map(|nc| Array2::from_elem((k_b, nc), T::one() / T::from_count(nc)));
            Ok(GaussianMixture::from_parts(uniform(k_b), means, Array2::ones((k_b, d)), labels))
        }
        BarycenterInit::FromMeasure(idx) => {
            let src = measures
                .get(idx)
                .ok_or_else(|| Error::input(format!("init measure {idx} out of range")))?;
            let k = src.n_components();
            let pick = |a: ndarray::ArrayView2<'_, T>| {
                Array2::from_shape_fn((k_b, a.ncols()), |(i, j)| a[[i % k, j]])
            };
            let stds = pick(src.stds()).mapv(|s| s.max(T::lit(cfg.s_min)));
            let labels = n_classes.and_then(|_| src.labels().map(pick));
            Ok(GaussianMixture::from_parts(uniform(k_b), pick(src.means()), stds, labels))
        }
    }
}

fn solve_all<T: Scalar>(
    b: &GaussianMixture<T>,
    measures: &[GaussianMixture<T>],
    beta: T,
) -> Result<Vec<(Array2<T>, T)>> {
    measures
        .par_iter()
        .map(|p| supervised_transport(b, p, beta).map(|(plan, obj)| (plan.into_omega(), obj)))
        .collect()
}

/// One parameter update from fixed plans.
pub(crate) fn update<T: Scalar>(
    b: &GaussianMixture<T>,
    measures: &[GaussianMixture<T>],
    lambda: ArrayView1<'_, T>,
    plans: &[Array2<T>],
    s_min: T,
    supervised: bool,
) -> GaussianMixture<T> {
    let (k_b, d) = (b.n_components(), b.dim());
    let mut means = Array2::zeros((k_b, d));
    let mut stds = Array2::zeros((k_b, d));
    let mut labels = if supervised { b.labels().map(|l| Array2::zeros(l.dim())) } else { None };
    for ((p, omega), &l) in measures.iter().zip(plans).zip(lambda.iter()) {
        let scaled = row_normalized(omega.view(), b.weights()) * l;
        means += &scaled.dot(&p.means());
        stds += &scaled.dot(&p.stds());
        if let (Some(acc), Some(pl)) = (labels.as_mut(), p.labels()) {
            *acc += &scaled.dot(&pl);
        }
    }
    stds.mapv_inplace(|s: T| s.max(s_min));
    if let Some(l) = labels.as_mut() {
        l.mapv_inplace(|v: T| v.max(T::zero()));
        for mut row in l.axis_iter_mut(Axis(0)) {
            let sum = row.sum();
            if sum > T::zero() {
                row.mapv_inplace(|v| v / sum);
            }
        }
    }
    GaussianMixture::from_parts(b.weights().to_owned(), means, stds, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{mw2_sq, smw2_sq};
    use ndarray::array;

    fn single(m: f64, s: f64) -> GaussianMixture<f64> {
        GaussianMixture::new(array![1.0], array![[m]], array![[s]]).unwrap()
    }

    fn cfg(k_b: usize) -> BarycenterConfig {
        BarycenterConfig { k_b, ..Default::default() }
    }

    #[test]
    fn midpoint_of_two_gaussians() {
        let ms = [single(0.0, 1.0), single(2.0, 1.0)];
        let (b, trace) = mw_barycenter(&ms, array![0.5, 0.5].view(), &cfg(1)).unwrap();
        assert!((b.means()[[0, 0]] - 1.0).abs() < 1e-6);
        assert!((b.stds()[[0, 0]] - 1.0).abs() < 1e-6);
        assert!(trace.converged);
        let loss = barycenter_loss(&b, &ms, array![0.5, 0.5].view(), 0.0).unwrap();
        assert!((loss - 1.0).abs() < 1e-9);
    }

    #[test]
    fn weighted_mean_of_two_gaussians() {
        let ms = [single(0.0, 1.0), single(4.0, 1.0)];
        let (b, _) = mw_barycenter(&ms, array![0.25, 0.75].view(), &cfg(1)).unwrap();
        assert!((b.means()[[0, 0]] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn single_measure_is_its_own_barycenter() {
        let p = GaussianMixture::new(
            array![0.25, 0.25, 0.25, 0.25],
            array![[0.0, 0.0], [3.0, 1.0], [-2.0, 4.0], [1.0, -1.0]],
            array![[1.0, 1.0], [0.5, 0.2], [2.0, 1.0], [0.3, 0.3]],
        )
        .unwrap()
        .with_labels(array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [1.0, 0.0]])
        .unwrap();
        let c = BarycenterConfig { init: BarycenterInit::FromMeasure(0), ..cfg(4) };
        let (b, trace) = smw_barycenter(std::slice::from_ref(&p), array![1.0].view(), &c).unwrap();
        assert!(*trace.losses.last().unwrap() <= 1e-9);
        assert!(smw2_sq(&b, &p, 1.0).unwrap() <= 1e-9);
    }

    #[test]
    fn loss_never_increases() {
        let a = GaussianMixture::new(array![0.5, 0.5], array![[0.0], [5.0]], array![[1.0], [0.5]]).unwrap();
        let b = GaussianMixture::new(array![0.3, 0.7], array![[2.0], [-1.0]], array![[2.0], [0.1]]).unwrap();
        let (_, trace) = mw_barycenter(&[a, b], array![0.6, 0.4].view(), &cfg(3)).unwrap();
        for w in trace.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-7, "{:?}", trace.losses);
        }
    }

    #[test]
    fn supervised_requires_labels() {
        let ms = [single(0.0, 1.0)];
        let err = smw_barycenter(&ms, array![1.0].view(), &cfg(1)).unwrap_err();
        assert!(matches!(err, Error::InvalidState(_)));
    }

    #[test]
    fn rejects_bad_lambda() {
        let ms = [single(0.0, 1.0), single(1.0, 1.0)];
        assert!(mw_barycenter(&ms, array![1.0].view(), &cfg(1)).is_err());
        assert!(mw_barycenter(&ms, array![0.5, 0.6].view(), &cfg(1)).is_err());
        assert!(mw_barycenter::<f64>(&[], array![].view(), &cfg(1)).is_err());
    }

    #[test]
    fn result_keeps_uniform_weights_and_floor() {
        let ms = [single(0.0, 1e-6), single(1.0, 1e-6)];
        let (b, _) = mw_barycenter(&ms, array![0.5, 0.5].view(), &cfg(2)).unwrap();
        assert_eq!(b.weights(), array![0.5, 0.5]);
        assert!(b.min_std() >= DEFAULT_S_MIN);
        assert!(mw2_sq(&b, &ms[0]).unwrap().is_finite());
    }

    #[test]
    fn config_json_round_trip() {
        let c = BarycenterConfig { init: BarycenterInit::FromMeasure(2), ..Default::default() };
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("from-measure"));
        let back: BarycenterConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
