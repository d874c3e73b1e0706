use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Feature matrix with optional integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    features: Array2<T>,
    labels: Option<Vec<usize>>,
    n_classes: usize,
}

impl<T: Scalar> LabeledDataset<T> {
    /// `n_classes` is ignored for the label check when `labels` is `None`.
    pub fn new(features: Array2<T>, labels: Option<Vec<usize>>, n_classes: usize) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::input(format!("dataset must be non-empty, got {n}x{d}")));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::input(format!("{n} rows but {} labels", labels.len())));
            }
            if let Some(bad) = labels.iter().find(|&&y| y >= n_classes) {
                return Err(Error::input(format!("label {bad} out of range for {n_classes} classes")));
            }
        }
        Ok(Self { features, labels, n_classes })
    }

    /// Labeled dataset with `n_classes = max label + 1`.
    pub fn labeled(features: Array2<T>, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(features, Some(labels), n_classes)
    }

    pub fn unlabeled(features: Array2<T>) -> Result<Self> {
        Self::new(features, None, 0)
    }

    pub fn features(&self) -> ArrayView2<'_, T> {
        self.features.view()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows whose label equals `class`, in original order.
    pub fn class_rows(&self, class: usize) -> Vec<usize> {
        match &self.labels {
            Some(labels) => (0..labels.len()).filter(|&i| labels[i] == class).collect(),
            None => Vec::new(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Array2<T> {
        self.features.select(Axis(0), rows)
    }

    /// Copy without labels.
    pub fn without_labels(&self) -> Self {
        Self { features: self.features.clone(), labels: None, n_classes: self.n_classes }
    }

    /// Fraction of rows whose label matches `predicted`.
    pub fn accuracy(&self, predicted: &[usize]) -> Result<f64> {
        let labels = self.labels.as_ref().ok_or_else(|| Error::state("dataset has no labels"))?;
        if predicted.len() != labels.len() {
            return Err(Error::input("prediction count differs from dataset size"));
        }
        let hits = labels.iter().zip(predicted).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn validation() {
        assert!(LabeledDataset::<f64>::new(Array2::zeros((0, 2)), None, 0).is_err());
        assert!(LabeledDataset::new(array![[1.0], [2.0]], Some(vec![0, 3]), 3).is_err());
        assert!(LabeledDataset::new(array![[1.0], [2.0]], Some(vec![0]), 3).is_err());
        let ds = LabeledDataset::labeled(array![[1.0], [2.0], [3.0]], vec![0, 2, 0]).unwrap();
        assert_eq!(ds.n_classes(), 3);
        assert_eq!(ds.class_rows(0), vec![0, 2]);
        assert_eq!(ds.accuracy(&[0, 2, 1]).unwrap(), 2.0 / 3.0);
    }
}
