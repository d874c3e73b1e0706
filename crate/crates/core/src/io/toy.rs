//! Synthetic multi-domain classification data.
//!
//! Domain 0 holds one anisotropic Gaussian cluster per class, with class
//! centres spread evenly on a circle in the first two coordinates. Domain `ℓ`
//! maps every domain-0 sample through `x ↦ R(ℓ·rot_step)·x + ℓ·shift_step`,
//! where the rotation acts on the first two coordinates about the origin.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::LabeledDataset;
use crate::rng::{stream, stream_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub n_domains: usize,
    pub n_classes: usize,
    pub n_per_class: usize,
    pub d: usize,
    pub shift_step: Vec<f64>,
    pub rot_step: f64,
    /// Distance of the class centres from the origin.
    pub radius: f64,
    /// Std along the first axis; the remaining axes use half of it.
    pub cluster_std: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n_domains: 4,
            n_classes: 3,
            n_per_class: 200,
            d: 2,
            shift_step: vec![2.0, 0.5],
            rot_step: std::f64::consts::PI / 12.0,
            radius: 3.0,
            cluster_std: 0.8,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_domains < 2 || self.n_classes < 2 || self.n_per_class == 0 || self.d == 0 {
            return Err(Error::input("toy config needs n_domains ≥ 2, n_classes ≥ 2, n_per_class ≥ 1, d ≥ 1"));
        }
        if self.shift_step.len() != self.d {
            return Err(Error::input(format!("shift_step has {} entries, expected {}", self.shift_step.len(), self.d)));
        }
        if self.rot_step != 0.0 && self.d != 2 {
            return Err(Error::input("rotation is only defined for d = 2"));
        }
        let reals = [self.rot_step, self.radius, self.cluster_std].into_iter().chain(self.shift_step.iter().copied());
        if reals.into_iter().any(|x| !x.is_finite()) || !(self.cluster_std > 0.0) {
            return Err(Error::input("toy parameters must be finite with a positive cluster std"));
        }
        Ok(())
    }

    /// Centre of class `c` in domain 0.
    pub fn class_centre(&self, c: usize) -> Array1<f64> {
        let mut m = Array1::zeros(self.d);
        let angle = 2.0 * std::f64::consts::PI * c as f64 / self.n_classes as f64;
        if self.d == 1 {
            m[0] = self.radius * c as f64;
        } else {
            m[0] = self.radius * angle.cos();
            m[1] = self.radius * angle.sin();
        }
        m
    }

    /// Image of `x` under the affine map of domain `domain`.
    pub fn transform(&self, x: &Array1<f64>, domain: usize) -> Array1<f64> {
        let mut y = x.clone();
        if self.d == 2 {
            let (sin, cos) = (domain as f64 * self.rot_step).sin_cos();
            y[0] = cos * x[0] - sin * x[1];
            y[1] = sin * x[0] + cos * x[1];
        }
        for (v, s) in y.iter_mut().zip(&self.shift_step) {
            *v += domain as f64 * s;
        }
        y
    }
}

/// One labeled dataset per domain; rows are grouped by class.
pub fn make_toy(cfg: &ToyConfig) -> Result<Vec<LabeledDataset<f64>>> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream::TOY);
    let n = cfg.n_classes * cfg.n_per_class;
    let mut base = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..cfg.n_classes {
        let centre = cfg.class_centre(c);
        for _ in 0..cfg.n_per_class {
            let x = Array1::from_shape_fn(cfg.d, |j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let s = if j == 0 { cfg.cluster_std } else { 0.5 * cfg.cluster_std };
                centre[j] + s * z
            });
            base.push(x);
            labels.push(c);
        }
    }
    (0..cfg.n_domains)
        .map(|l| {
            let mut features = Array2::zeros((n, cfg.d));
            for (mut row, x) in features.rows_mut().into_iter().zip(&base) {
                row.assign(&cfg.transform(x, l));
            }
            LabeledDataset::new(features, Some(labels.clone()), cfg.n_classes)
        })
        .collect()
}
