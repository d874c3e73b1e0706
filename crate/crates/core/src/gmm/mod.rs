//! Axis-aligned Gaussian mixture models.
//!
//! A mixture stores its parameters as dense `K×d` matrices of means and
//! standard deviations, a weight vector on the simplex and, for labeled
//! mixtures, a `K×n_classes` matrix of soft-label rows. Density evaluation is
//! done in log space throughout.

mod dataset;
mod em;

pub use dataset::LabeledDataset;
pub use em::{em_fit, em_fit_traced, fit_labeled, EmConfig, EmTrace};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::scalar::{argmax, log_sum_exp, Scalar};

/// Default floor applied to standard deviations.
pub const DEFAULT_S_MIN: f64 = 1e-3;

/// One axis-aligned Gaussian: mean vector and per-dimension standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian<T> {
    mean: Array1<T>,
    std: Array1<T>,
}

impl<T: Scalar> DiagGaussian<T> {
    pub fn new(mean: Array1<T>, std: Array1<T>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::input("gaussian dimension must be at least 1"));
        }
        if mean.len() != std.len() {
            return Err(Error::input(format!(
                "mean has length {} but std has length {}",
                mean.len(),
                std.len()
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::input("non-finite mean"));
        }
        if std.iter().any(|s| !s.is_finite() || *s <= T::zero()) {
            return Err(Error::input("standard deviations must be finite and > 0"));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> ArrayView1<'_, T> {
        self.mean.view()
    }

    pub fn std(&self) -> ArrayView1<'_, T> {
        self.std.view()
    }

    /// Copy with every std entry raised to at least `s_min`.
    pub fn clamped(&self, s_min: T) -> Self {
        Self { mean: self.mean.clone(), std: self.std.mapv(|s| s.max(s_min)) }
    }

    pub fn log_density(&self, x: ArrayView1<'_, T>) -> Result<T> {
        if x.len() != self.dim() {
            return Err(dim_mismatch(self.dim(), x.len()));
        }
        Ok(component_log_density(self.mean.view(), self.std.view(), x))
    }
}

/// `log N(x; m, diag(s²))`.
pub(crate) fn component_log_density<T: Scalar>(
    mean: ArrayView1<'_, T>,
    std: ArrayView1<'_, T>,
    x: ArrayView1<'_, T>,
) -> T {
    let half = T::lit(0.5);
    let log_2pi = (T::lit(2.0) * T::PI()).ln();
    let mut acc = T::zero();
    for ((&xi, &mi), &si) in x.iter().zip(mean.iter()).zip(std.iter()) {
        let z = (xi - mi) / si;
        acc -= half * z * z + si.ln();
    }
    acc - half * T::from_count(x.len()) * log_2pi
}

fn dim_mismatch(expected: usize, got: usize) -> Error {
    Error::input(format!("dimension mismatch: mixture has d={expected}, input has d={got}"))
}

/// Weighted mixture of [`DiagGaussian`] components, optionally carrying
/// per-component soft labels.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture<T> {
    weights: Array1<T>,
    means: Array2<T>,
    stds: Array2<T>,
    labels: Option<Array2<T>>,
}

impl<T: Scalar> GaussianMixture<T> {
    /// Builds an unlabeled mixture from `K` weights and `K×d` mean/std matrices.
    pub fn new(weights: Array1<T>, means: Array2<T>, stds: Array2<T>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::input("mixture needs at least one component"));
        }
        if means.nrows() != k || stds.nrows() != k {
            return Err(Error::input(format!(
                "{k} weights but {} mean rows and {} std rows",
                means.nrows(),
                stds.nrows()
            )));
        }
        if means.ncols() == 0 || means.ncols() != stds.ncols() {
            return Err(Error::input(format!(
                "means have d={} and stds have d={}",
                means.ncols(),
                stds.ncols()
            )));
        }
        check_simplex(weights.view(), "mixture weights")?;
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::input("non-finite mean"));
        }
        if stds.iter().any(|s| !s.is_finite() || *s <= T::zero()) {
            return Err(Error::input("standard deviations must be finite and > 0"));
        }
        Ok(Self { weights, means, stds, labels: None })
    }

    pub fn from_components(weights: Array1<T>, components: &[DiagGaussian<T>]) -> Result<Self> {
        let d = components.first().map(DiagGaussian::dim).unwrap_or(0);
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::input("components have differing dimensions"));
        }
        let mut means = Array2::zeros((components.len(), d));
        let mut stds = Array2::zeros((components.len(), d));
        for (k, c) in components.iter().enumerate() {
            means.row_mut(k).assign(&c.mean);
            stds.row_mut(k).assign(&c.std);
        }
        Self::new(weights, means, stds)
    }

    /// Attaches a `K×n_classes` soft-label matrix whose rows lie on the simplex.
    pub fn with_labels(mut self, labels: Array2<T>) -> Result<Self> {
        if labels.nrows() != self.n_components() || labels.ncols() == 0 {
            return Err(Error::input(format!(
                "label matrix is {}x{}, expected {} rows and at least one class",
                labels.nrows(),
                labels.ncols(),
                self.n_components()
            )));
        }
        for row in labels.rows() {
            check_simplex(row, "label row")?;
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Same mixture with labels dropped.
    pub fn without_labels(&self) -> Self {
        Self { labels: None, ..self.clone() }
    }

    /// Internal constructor for parameters produced by our own updates; shapes
    /// are trusted, values are debug-checked.
    pub(crate) fn from_parts(
        weights: Array1<T>,
        means: Array2<T>,
        stds: Array2<T>,
        labels: Option<Array2<T>>,
    ) -> Self {
        debug_assert_eq!(weights.len(), means.nrows());
        debug_assert_eq!(means.dim(), stds.dim());
        debug_assert!(labels.as_ref().is_none_or(|l| l.nrows() == weights.len()));
        Self { weights, means, stds, labels }
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> ArrayView1<'_, T> {
        self.weights.view()
    }

    pub fn means(&self) -> ArrayView2<'_, T> {
        self.means.view()
    }

    pub fn stds(&self) -> ArrayView2<'_, T> {
        self.stds.view()
    }

    pub fn labels(&self) -> Option<ArrayView2<'_, T>> {
        self.labels.as_ref().map(|l| l.view())
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.ncols())
    }

    pub fn component(&self, k: usize) -> DiagGaussian<T> {
        DiagGaussian { mean: self.means.row(k).to_owned(), std: self.stds.row(k).to_owned() }
    }

    pub fn components(&self) -> impl Iterator<Item = DiagGaussian<T>> + '_ {
        (0..self.n_components()).map(|k| self.component(k))
    }

    /// Smallest standard-deviation entry over all components.
    pub fn min_std(&self) -> T {
        self.stds.iter().copied().fold(T::infinity(), T::min)
    }

    fn check_point(&self, x: ArrayView1<'_, T>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(dim_mismatch(self.dim(), x.len()));
        }
        Ok(())
    }

    /// `log p_k + log N_k(x)` for every component.
    fn joint_log(&self, x: ArrayView1<'_, T>) -> Vec<T> {
        (0..self.n_components())
            .map(|k| {
                self.weights[k].ln()
                    + component_log_density(self.means.row(k), self.stds.row(k), x)
            })
            .collect()
    }

    /// `log Σ_k p_k N(x; m_k, diag(s_k²))`, evaluated with log-sum-exp.
    pub fn log_density(&self, x: ArrayView1<'_, T>) -> Result<T> {
        self.check_point(x)?;
        Ok(log_sum_exp(&self.joint_log(x)))
    }

    /// Mean log-likelihood of the rows of `features`.
    pub fn mean_log_likelihood(&self, features: ArrayView2<'_, T>) -> Result<T> {
        if features.ncols() != self.dim() {
            return Err(dim_mismatch(self.dim(), features.ncols()));
        }
        if features.nrows() == 0 {
            return Err(Error::input("no samples"));
        }
        let total: T = features.rows().into_iter().map(|x| log_sum_exp(&self.joint_log(x))).sum();
        Ok(total / T::from_count(features.nrows()))
    }

    /// Posterior component probabilities `P(k | x)`.
    pub fn responsibilities(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        self.check_point(x)?;
        let joint = self.joint_log(x);
        let norm = log_sum_exp(&joint);
        Ok(joint.into_iter().map(|j| (j - norm).exp()).collect())
    }

    /// MAP classification: the posterior `P(y | x) = Σ_k P(k | x) v_{k,y}` and its
    /// argmax (lowest class index on ties).
    pub fn map_classify(&self, x: ArrayView1<'_, T>) -> Result<(usize, Array1<T>)> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::state("MAP classification requires a labeled mixture"))?;
        let resp = self.responsibilities(x)?;
        let posterior = labels.t().dot(&resp);
        Ok((argmax(posterior.iter().copied()), posterior))
    }

    /// Classifies every row; returns predicted class indices.
    pub fn predict(&self, features: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        features.rows().into_iter().map(|x| self.map_classify(x).map(|(c, _)| c)).collect()
    }

    /// Draws `n` points. Component ids follow the weights; class ids are the
    /// argmax of the drawn component's label row when the mixture is labeled.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample<T>> {
        if n == 0 {
            return Err(Error::input("sample size must be at least 1"));
        }
        let mut rng = stream_rng(seed, stream::SAMPLE);
        let w: Vec<f64> = self.weights.iter().map(|w| w.to_f64_lossy()).collect();
        let picker = WeightedIndex::new(&w).map_err(|e| Error::input(format!("weights: {e}")))?;
        let d = self.dim();
        let mut points = Array2::zeros((n, d));
        let mut component_ids = Vec::with_capacity(n);
        for mut row in points.rows_mut() {
            let k = picker.sample(&mut rng);
            component_ids.push(k);
            for (j, v) in row.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *v = self.means[[k, j]] + self.stds[[k, j]] * T::lit(z);
            }
        }
        let class_ids = self.labels.as_ref().map(|labels| {
            component_ids.iter().map(|&k| argmax(labels.row(k).iter().copied())).collect()
        });
        Ok(Sample { points, component_ids, class_ids })
    }

    /// Draws a labeled dataset (requires labels).
    pub fn sample_dataset(&self, n: usize, seed: u64) -> Result<LabeledDataset<T>> {
        let n_classes =
            self.n_classes().ok_or_else(|| Error::state("sampling a dataset requires labels"))?;
        let s = self.sample(n, seed)?;
        LabeledDataset::new(s.points, s.class_ids, n_classes)
    }

    /// Mass-weighted mean of component means, `Σ_k p_k m_k`.
    pub fn weighted_mean_of_means(&self) -> Array1<T> {
        self.means.t().dot(&self.weights)
    }

    pub(crate) fn into_parts(self) -> (Array1<T>, Array2<T>, Array2<T>, Option<Array2<T>>) {
        (self.weights, self.means, self.stds, self.labels)
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> GaussianMixture<U> {
        let c = |a: &Array2<T>| a.mapv(|v| U::lit(v.to_f64_lossy()));
        GaussianMixture {
            weights: self.weights.mapv(|v| U::lit(v.to_f64_lossy())),
            means: c(&self.means),
            stds: c(&self.stds),
            labels: self.labels.as_ref().map(c),
        }
    }

    /// Sum of weights per class, `Σ_k p_k v_k` (labeled mixtures only).
    pub fn class_masses(&self) -> Option<Array1<T>> {
        self.labels.as_ref().map(|l| l.t().dot(&self.weights))
    }
}

/// Output of [`GaussianMixture::sample`].
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub points: Array2<T>,
    pub component_ids: Vec<usize>,
    pub class_ids: Option<Vec<usize>>,
}

/// Checks that `v` lies in the probability simplex within [`Scalar::simplex_tol`].
pub(crate) fn check_simplex<T: Scalar>(v: ArrayView1<'_, T>, what: &str) -> Result<()> {
    check_simplex_with_tol(v, what, T::simplex_tol())
}

pub(crate) fn check_simplex_with_tol<T: Scalar>(
    v: ArrayView1<'_, T>,
    what: &str,
    tol: T,
) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || *x < -tol) {
        return Err(Error::input(format!("{what} must be finite and nonnegative")));
    }
    let sum: T = v.iter().copied().sum();
    if (sum - T::one()).abs() > tol {
        return Err(Error::input(format!("{what} sum to {sum}, expected 1")));
    }
    Ok(())
}
