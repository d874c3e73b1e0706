//! JSON documents for mixtures, dictionaries, plans and traces.
//!
//! Floats are printed in scientific notation with 17 significant digits, so
//! every `f64` survives a write/read cycle bit for bit.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};
use crate::gmm::GaussianMixture;
use crate::msda::Dictionary;
use crate::ot::TransportPlan;
use crate::scalar::Scalar;

struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` on one line followed by a newline. Non-finite floats
/// are rejected.
pub fn to_json_bytes<S: Serialize>(value: &S) -> Result<Vec<u8>> {
    if has_null_element(&serde_json::to_value(value)?) {
        return Err(Error::numerical("serialize", "refusing to write non-finite numbers"));
    }
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

// serde_json turns NaN and infinities into null. None of the documents written
// here has null array elements, so any such element was a non-finite float.
fn has_null_element(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Array(xs) => xs.iter().any(|x| x.is_null() || has_null_element(x)),
        serde_json::Value::Object(m) => m.values().any(has_null_element),
        _ => false,
    }
}

pub fn write_json<S: Serialize>(value: &S, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

pub fn read_json<D: DeserializeOwned>(path: impl AsRef<Path>) -> Result<D> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn rows<T: Scalar>(a: ndarray::ArrayView2<'_, T>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.iter().map(|x| x.to_f64_lossy()).collect()).collect()
}

fn matrix<T: Scalar>(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<Array2<T>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::input(format!("{what}: every row must have {cols} entries")));
    }
    let flat: Vec<T> = rows.iter().flatten().map(|&x| T::lit(x)).collect();
    Ok(Array2::from_shape_vec((rows.len(), cols), flat).expect("shape checked"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmDoc {
    pub d: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
    pub labels: Option<Vec<Vec<f64>>>,
}

impl GmmDoc {
    pub fn from_gmm<T: Scalar>(g: &GaussianMixture<T>) -> Self {
        Self {
            d: g.dim(),
            weights: g.weights().iter().map(|x| x.to_f64_lossy()).collect(),
            means: rows(g.means()),
            stds: rows(g.stds()),
            labels: g.labels().map(rows),
        }
    }

    pub fn to_gmm<T: Scalar>(&self) -> Result<GaussianMixture<T>> {
        let k = self.weights.len();
        if self.means.len() != k || self.stds.len() != k {
            return Err(Error::input("weights, means and stds must have one entry per component"));
        }
        let weights = self.weights.iter().map(|&x| T::lit(x)).collect();
        let g = GaussianMixture::new(weights, matrix(&self.means, self.d, "means")?, matrix(&self.stds, self.d, "stds")?)?;
        match &self.labels {
            Some(l) => {
                let n_classes = l.first().map_or(0, Vec::len);
                g.with_labels(matrix(l, n_classes, "labels")?)
            }
            None => Ok(g),
        }
    }
}

pub fn save_gmm<T: Scalar>(g: &GaussianMixture<T>, path: impl AsRef<Path>) -> Result<()> {
    write_json(&GmmDoc::from_gmm(g), path)
}

pub fn load_gmm<T: Scalar>(path: impl AsRef<Path>) -> Result<GaussianMixture<T>> {
    read_json::<GmmDoc>(path)?.to_gmm()
}

/// Atoms in mixture format plus coordinates. `logits` carries the label
/// parametrization so a dictionary reloads exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryDoc {
    pub atoms: Vec<GmmDoc>,
    pub coords: Vec<Vec<f64>>,
    #[serde(default)]
    pub logits: Option<Vec<Vec<Vec<f64>>>>,
}

impl DictionaryDoc {
    pub fn from_dictionary<T: Scalar>(dict: &Dictionary<T>) -> Self {
        Self {
            atoms: dict.atoms().iter().map(GmmDoc::from_gmm).collect(),
            coords: rows(dict.coords.view()),
            logits: Some(dict.logits.iter().map(|u| rows(u.view())).collect()),
        }
    }

    pub fn to_dictionary<T: Scalar>(&self) -> Result<Dictionary<T>> {
        let atoms: Vec<GaussianMixture<T>> = self.atoms.iter().map(GmmDoc::to_gmm).collect::<Result<_>>()?;
        let means = atoms.iter().map(|a| a.means().to_owned()).collect();
        let stds = atoms.iter().map(|a| a.stds().to_owned()).collect();
        let logits = match &self.logits {
            Some(ls) => ls
                .iter()
                .map(|u| matrix(u, u.first().map_or(0, Vec::len), "logits"))
                .collect::<Result<_>>()?,
            None => atoms
                .iter()
                .map(|a| {
                    a.labels()
                        .map(|l| l.mapv(|v| v.max(T::min_positive_value()).ln()))
                        .ok_or_else(|| Error::input("dictionary atoms must be labeled"))
                })
                .collect::<Result<_>>()?,
        };
        let c = self.atoms.len();
        let coords = matrix(&self.coords, c, "coords")?;
        Dictionary::new(means, stds, logits, coords)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub omega: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub objective: f64,
}

impl PlanDoc {
    pub fn new<T: Scalar>(plan: &TransportPlan<T>, objective: T) -> Self {
        Self {
            omega: rows(plan.omega()),
            p: plan.row_marginal().iter().map(|x| x.to_f64_lossy()).collect(),
            q: plan.col_marginal().iter().map(|x| x.to_f64_lossy()).collect(),
            objective: objective.to_f64_lossy(),
        }
    }
}

/// Coordinate snapshots as nested arrays.
pub fn coords_trace_doc(trace: &[Array2<f64>]) -> Vec<Vec<Vec<f64>>> {
    trace.iter().map(|a| rows(a.view())).collect()
}
