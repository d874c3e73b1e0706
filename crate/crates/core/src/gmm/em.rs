//! Maximum-likelihood fitting of diagonal mixtures by expectation-maximization.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use super::{component_log_density, GaussianMixture, LabeledDataset, DEFAULT_S_MIN};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::scalar::{log_sum_exp, Scalar};

/// Components whose total responsibility falls below this are re-seeded.
const EMPTY_COMPONENT_MASS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    pub n_components: usize,
    pub max_iter: usize,
    /// Stop once the mean log-likelihood changes by less than this.
    pub tol: f64,
    pub s_min: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { n_components: 6, max_iter: 100, tol: 1e-5, s_min: DEFAULT_S_MIN, seed: 0 }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 || self.max_iter == 0 {
            return Err(Error::input("n_components and max_iter must be positive"));
        }
        if !(self.tol > 0.0) || !(self.s_min > 0.0) {
            return Err(Error::input("tol and s_min must be positive"));
        }
        Ok(())
    }
}

/// Mean log-likelihood after each E-step, starting with the initialization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmTrace {
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

pub fn em_fit<T: Scalar>(features: ArrayView2<'_, T>, cfg: &EmConfig) -> Result<GaussianMixture<T>> {
    em_fit_traced(features, cfg).map(|(g, _)| g)
}

/// Fits an unlabeled `cfg.n_components`-component mixture and returns the
/// log-likelihood trace alongside it.
pub fn em_fit_traced<T: Scalar>(
    features: ArrayView2<'_, T>,
    cfg: &EmConfig,
) -> Result<(GaussianMixture<T>, EmTrace)> {
    cfg.validate()?;
    let (n, d) = features.dim();
    let k = cfg.n_components;
    if d == 0 {
        return Err(Error::input("features must have at least one column"));
    }
    if n < k {
        return Err(Error::input(format!("{n} samples is fewer than {k} components")));
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("features contain non-finite values"));
    }
    let s_min = T::lit(cfg.s_min);
    let global_std = weighted_moments(features, None).1.mapv(|s| s.max(s_min));

    let mut state = EmState::init(features, k, &global_std, cfg.seed);
    let tol = T::lit(cfg.tol);
    let mut trace = EmTrace::default();
    let mut resp = Array2::<T>::zeros((n, k));
    let mut prev: Option<T> = None;
    for _ in 0..cfg.max_iter {
        let (ll, point_ll) = state.e_step(features, &mut resp);
        if !ll.is_finite() {
            return Err(Error::numerical("em", "non-finite log-likelihood"));
        }
        trace.log_likelihoods.push(ll.to_f64_lossy());
        if let Some(p) = prev {
            if (ll - p).abs() < tol {
                trace.converged = true;
                break;
            }
        }
        prev = Some(ll);
        state.m_step(features, &resp, &point_ll, &global_std, s_min);
    }
    let EmState { weights, means, stds } = state;
    Ok((GaussianMixture::from_parts(weights, means, stds, None), trace))
}

struct EmState<T> {
    weights: Array1<T>,
    means: Array2<T>,
    stds: Array2<T>,
}

impl<T: Scalar> EmState<T> {
    /// k-means++ seeding of means, global std, uniform weights.
    fn init(x: ArrayView2<'_, T>, k: usize, global_std: &Array1<T>, seed: u64) -> Self {
        let (n, d) = x.dim();
        let mut rng = stream_rng(seed, stream::EM_INIT);
        let mut means = Array2::zeros((k, d));
        let mut nearest = vec![f64::INFINITY; n];
        let mut chosen = rng.random_range(0..n);
        for c in 0..k {
            means.row_mut(c).assign(&x.row(chosen));
            for (i, row) in x.rows().into_iter().enumerate() {
                let dist: f64 = row
                    .iter()
                    .zip(means.row(c).iter())
                    .map(|(&a, &b)| (a - b).to_f64_lossy().powi(2))
                    .sum();
                nearest[i] = nearest[i].min(dist);
            }
            if c + 1 < k {
                chosen = match WeightedIndex::new(&nearest) {
                    Ok(w) => w.sample(&mut rng),
                    // All points coincide with chosen centers.
                    Err(_) => rng.random_range(0..n),
                };
            }
        }
        let stds = Array2::from_shape_fn((k, d), |(_, j)| global_std[j]);
        let weights = Array1::from_elem(k, T::one() / T::from_count(k));
        Self { weights, means, stds }
    }

    /// Fills `resp` with responsibilities; returns the mean log-likelihood and
    /// the per-point log-likelihoods.
    fn e_step(&self, x: ArrayView2<'_, T>, resp: &mut Array2<T>) -> (T, Vec<T>) {
        let k = self.weights.len();
        let log_w: Vec<T> = self.weights.iter().map(|w| w.ln()).collect();
        let mut joint = vec![T::zero(); k];
        let mut point_ll = Vec::with_capacity(x.nrows());
        for (i, row) in x.rows().into_iter().enumerate() {
            for c in 0..k {
                joint[c] =
                    log_w[c] + component_log_density(self.means.row(c), self.stds.row(c), row);
            }
            let norm = log_sum_exp(&joint);
            for c in 0..k {
                resp[[i, c]] = (joint[c] - norm).exp();
            }
            point_ll.push(norm);
        }
        let total: T = point_ll.iter().copied().sum();
        (total / T::from_count(x.nrows()), point_ll)
    }

    fn m_step(
        &mut self,
        x: ArrayView2<'_, T>,
        resp: &Array2<T>,
        point_ll: &[T],
        global_std: &Array1<T>,
        s_min: T,
    ) {
        let n = x.nrows();
        let k = self.weights.len();
        let empty = T::lit(EMPTY_COMPONENT_MASS);
        let mut masses = Array1::zeros(k);
        for c in 0..k {
            let r = resp.column(c);
            let mass: T = r.iter().copied().sum();
            if mass < empty {
                // Re-seed at the worst-explained point.
                let worst = point_ll
                    .iter()
                    .enumerate()
                    .fold((0, T::infinity()), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc })
                    .0;
                self.means.row_mut(c).assign(&x.row(worst));
                self.stds.row_mut(c).assign(global_std);
                masses[c] = T::one();
                continue;
            }
            let (mean, std) = weighted_moments(x, Some(r));
            self.means.row_mut(c).assign(&mean);
            self.stds.row_mut(c).assign(&std.mapv(|s| s.max(s_min)));
            masses[c] = mass;
        }
        let total: T = masses.iter().copied().sum();
        debug_assert!(total > T::zero() && n > 0);
        self.weights = masses / total;
    }
}

/// Weighted per-coordinate mean and (population) standard deviation using
/// West's incremental update. Unit weights when `w` is `None`.
fn weighted_moments<T: Scalar>(
    x: ArrayView2<'_, T>,
    w: Option<ndarray::ArrayView1<'_, T>>,
) -> (Array1<T>, Array1<T>) {
    let d = x.ncols();
    let mut mean = Array1::zeros(d);
    let mut m2 = Array1::<T>::zeros(d);
    let mut total = T::zero();
    for (i, row) in x.rows().into_iter().enumerate() {
        let wi = w.map_or(T::one(), |w| w[i]);
        if wi <= T::zero() {
            continue;
        }
        total += wi;
        let frac = wi / total;
        for j in 0..d {
            let delta = row[j] - mean[j];
            mean[j] += frac * delta;
            m2[j] += wi * delta * (row[j] - mean[j]);
        }
    }
    let std = if total > T::zero() {
        m2.mapv(|v| (v.max(T::zero()) / total).sqrt())
    } else {
        m2
    };
    (mean, std)
}

/// Fits one `k_per_class`-component mixture per class, concatenates them with
/// weights scaled by the empirical class frequency and attaches one-hot labels.
///
/// Every class in `0..data.n_classes()` must have at least `k_per_class` samples.
pub fn fit_labeled<T: Scalar>(
    data: &LabeledDataset<T>,
    k_per_class: usize,
    cfg: &EmConfig,
) -> Result<GaussianMixture<T>> {
    if k_per_class == 0 {
        return Err(Error::input("k_per_class must be positive"));
    }
    if data.labels().is_none() {
        return Err(Error::input("fit_labeled requires a labeled dataset"));
    }
    let n_classes = data.n_classes();
    let n = T::from_count(data.len());
    let d = data.dim();
    let total_k = n_classes * k_per_class;
    let mut weights = Array1::zeros(total_k);
    let mut means = Array2::zeros((total_k, d));
    let mut stds = Array2::zeros((total_k, d));
    let mut labels = Array2::zeros((total_k, n_classes));
    for class in 0..n_classes {
        let rows = data.class_rows(class);
        if rows.len() < k_per_class {
            return Err(Error::input(format!(
                "class {class} has {} samples, fewer than k_per_class={k_per_class}",
                rows.len()
            )));
        }
        let class_cfg = EmConfig {
            n_components: k_per_class,
            seed: stream_rng(cfg.seed, stream::FIT_CLASS_BASE + class as u64).random(),
            ..cfg.clone()
        };
        let fitted = em_fit(data.select_rows(&rows).view(), &class_cfg)?;
        let freq = T::from_count(rows.len()) / n;
        let (w, m, s, _) = fitted.into_parts();
        let offset = class * k_per_class;
        for c in 0..k_per_class {
            weights[offset + c] = w[c] * freq;
            means.row_mut(offset + c).assign(&m.row(c));
            stds.row_mut(offset + c).assign(&s.row(c));
            labels[[offset + c, class]] = T::one();
        }
    }
    let total: T = weights.iter().copied().sum();
    weights.mapv_inplace(|w| w / total);
    Ok(GaussianMixture::from_parts(weights, means, stds, Some(labels)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Axis};
    use rand_distr::StandardNormal;

    fn bimodal(n_half: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream_rng(seed, 99);
        Array2::from_shape_fn((2 * n_half, 1), |(i, _)| {
            let z: f64 = rng.sample(StandardNormal);
            if i < n_half { -5.0 + z } else { 5.0 + z }
        })
    }

    #[test]
    fn recovers_separated_modes() {
        let x = bimodal(500, 1);
        let cfg = EmConfig { n_components: 2, seed: 3, ..Default::default() };
        let g = em_fit(x.view(), &cfg).unwrap();
        let mut pairs: Vec<(f64, f64)> =
            (0..2).map(|k| (g.means()[[k, 0]], g.weights()[k])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((pairs[0].0 + 5.0).abs() < 0.3, "{pairs:?}");
        assert!((pairs[1].0 - 5.0).abs() < 0.3, "{pairs:?}");
        assert!((pairs[0].1 - 0.5).abs() < 0.1 && (pairs[1].1 - 0.5).abs() < 0.1);
    }

    #[test]
    fn degenerate_cluster_clamps() {
        let x = Array2::from_elem((20, 3), 0.1);
        let cfg = EmConfig { n_components: 1, ..Default::default() };
        let g = em_fit(x.view(), &cfg).unwrap();
        assert_eq!(g.means().row(0).to_vec(), vec![0.1; 3]);
        assert_eq!(g.stds().row(0).to_vec(), vec![cfg.s_min; 3]);
    }

    #[test]
    fn single_component_closed_form() {
        let x: Array2<f64> = array![[1.0, 2.0], [3.0, -1.0], [2.5, 0.0], [-0.5, 4.0], [1.5, 1.5]];
        let cfg = EmConfig { n_components: 1, ..Default::default() };
        let g = em_fit(x.view(), &cfg).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        let std = x.std_axis(Axis(0), 0.0);
        for j in 0..2 {
            assert_abs_diff_eq!(g.means()[[0, j]], mean[j], epsilon = 1e-9);
            assert_abs_diff_eq!(g.stds()[[0, j]], std[j].max(cfg.s_min), epsilon = 1e-9);
        }
        assert_eq!(g.weights()[0], 1.0);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let x = bimodal(200, 8);
        for seed in 0..5 {
            let cfg = EmConfig { n_components: 4, seed, tol: 1e-12, ..Default::default() };
            let (_, trace) = em_fit_traced(x.view(), &cfg).unwrap();
            for w in trace.log_likelihoods.windows(2) {
                assert!(w[1] >= w[0] - 1e-7, "{:?}", trace.log_likelihoods);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let x = bimodal(100, 2);
        let cfg = EmConfig { n_components: 3, seed: 17, ..Default::default() };
        assert_eq!(em_fit(x.view(), &cfg).unwrap(), em_fit(x.view(), &cfg).unwrap());
    }

    #[test]
    fn input_errors() {
        let x = array![[1.0], [2.0]];
        let cfg = EmConfig { n_components: 3, ..Default::default() };
        assert!(matches!(em_fit(x.view(), &cfg), Err(Error::InvalidInput(_))));
        let x = array![[1.0], [f64::NAN], [2.0]];
        let cfg = EmConfig { n_components: 1, ..Default::default() };
        assert!(matches!(em_fit(x.view(), &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn labeled_fit_layout() {
        let x = array![[0.0], [0.1], [0.2], [5.0], [5.1], [5.3]];
        let ds = LabeledDataset::labeled(x, vec![0, 0, 0, 1, 1, 1]).unwrap();
        let cfg = EmConfig::default();
        let g = fit_labeled(&ds, 2, &cfg).unwrap();
        assert_eq!(g.n_components(), 4);
        assert_eq!(g.labels().unwrap(), array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]);
        assert_abs_diff_eq!(g.weights().sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn labeled_fit_weights_follow_class_frequency() {
        let mut rng = stream_rng(4, 0);
        let n = 400;
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= 300)).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            let z: f64 = rng.sample(StandardNormal);
            if labels[i] == 0 { 0.1 * z } else { 10.0 + 0.1 * z }
        });
        let ds = LabeledDataset::labeled(x, labels).unwrap();
        let g = fit_labeled(&ds, 1, &EmConfig::default()).unwrap();
        assert!((g.weights()[0] - 0.75).abs() < 0.05);
        assert!((g.weights()[1] - 0.25).abs() < 0.05);
    }

    #[test]
    fn labeled_fit_names_missing_class() {
        let x = array![[0.0], [1.0], [2.0]];
        let ds = LabeledDataset::new(x, Some(vec![0, 1, 2]), 4).unwrap();
        let err = fit_labeled(&ds, 1, &EmConfig::default()).unwrap_err();
        assert!(err.to_string().contains("class 3"), "{err}");
    }
}
