//! Dictionary of atom mixtures and the fixed-plan loss/gradient.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gmm::GaussianMixture;
use crate::rng::{stream, stream_rng};
use crate::scalar::Scalar;

/// `C` atom mixtures with `K` components each, plus one row of barycentric
/// coordinates per domain (sources first, target last).
///
/// Atom weights are uniform. Labels are stored as logits; the atom's soft
/// labels are their row-wise softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary<T> {
    pub means: Vec<Array2<T>>,
    pub stds: Vec<Array2<T>>,
    pub logits: Vec<Array2<T>>,
    pub coords: Array2<T>,
}

/// Gradient with the same layout as [`Dictionary`].
#[derive(Clone, Debug, PartialEq)]
pub struct DictionaryGrad<T> {
    pub means: Vec<Array2<T>>,
    pub stds: Vec<Array2<T>>,
    pub logits: Vec<Array2<T>>,
    pub coords: Array2<T>,
}

impl<T: Scalar> Dictionary<T> {
    pub fn new(
        means: Vec<Array2<T>>,
        stds: Vec<Array2<T>>,
        logits: Vec<Array2<T>>,
        coords: Array2<T>,
    ) -> Result<Self> {
        let c = means.len();
        if c == 0 || stds.len() != c || logits.len() != c {
            return Err(Error::input("dictionary needs the same positive number of mean, std and logit blocks"));
        }
        let (k, d) = means[0].dim();
        let n_classes = logits[0].ncols();
        if k == 0 || d == 0 || n_classes == 0 {
            return Err(Error::input("atoms must have components, dimensions and classes"));
        }
        for a in 0..c {
            if means[a].dim() != (k, d) || stds[a].dim() != (k, d) || logits[a].dim() != (k, n_classes) {
                return Err(Error::input(format!("atom {a} has inconsistent shapes")));
            }
            if stds[a].iter().any(|s| !(*s > T::zero())) {
                return Err(Error::input(format!("atom {a} has non-positive stds")));
            }
        }
        if coords.ncols() != c || coords.nrows() == 0 {
            return Err(Error::input("coords must have one column per atom"));
        }
        let all = means.iter().chain(&stds).chain(&logits).flat_map(|a| a.iter()).chain(coords.iter());
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::input("dictionary contains non-finite values"));
        }
        Ok(Self { means, stds, logits, coords })
    }

    /// Means from `N(0, I)`, unit stds, uniform labels and coordinates.
    pub fn init(
        n_atoms: usize,
        k_atom: usize,
        dim: usize,
        n_classes: usize,
        n_domains: usize,
        seed: u64,
    ) -> Self {
        let mut rng = stream_rng(seed, stream::DADIL_INIT);
        let means = (0..n_atoms)
            .map(|_| {
                Array2::from_shape_simple_fn((k_atom, dim), || {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit(z)
                })
            })
            .collect();
        Self {
            means,
            stds: vec![Array2::ones((k_atom, dim)); n_atoms],
            logits: vec![Array2::zeros((k_atom, n_classes)); n_atoms],
            coords: Array2::from_elem((n_domains, n_atoms), T::one() / T::from_count(n_atoms)),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.means.len()
    }

    pub fn k_atom(&self) -> usize {
        self.means[0].nrows()
    }

    pub fn dim(&self) -> usize {
        self.means[0].ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.logits[0].ncols()
    }

    pub fn n_domains(&self) -> usize {
        self.coords.nrows()
    }

    pub fn labels(&self, atom: usize) -> Array2<T> {
        softmax_rows(self.logits[atom].view())
    }

    pub fn atom(&self, c: usize) -> GaussianMixture<T> {
        let k = self.k_atom();
        GaussianMixture::from_parts(
            Array1::from_elem(k, T::one() / T::from_count(k)),
            self.means[c].clone(),
            self.stds[c].clone(),
            Some(self.labels(c)),
        )
    }

    pub fn atoms(&self) -> Vec<GaussianMixture<T>> {
        (0..self.n_atoms()).map(|c| self.atom(c)).collect()
    }

    /// Concatenation of means, stds, logits and coords, in that order.
    pub fn flatten(&self) -> Vec<T> {
        flatten_blocks(&self.means, &self.stds, &self.logits, &self.coords)
    }

    pub fn assign(&mut self, flat: &[T]) {
        let mut it = flat.iter().copied();
        for block in self.means.iter_mut().chain(&mut self.stds).chain(&mut self.logits) {
            block.iter_mut().for_each(|x| *x = it.next().expect("flat length"));
        }
        self.coords.iter_mut().for_each(|x| *x = it.next().expect("flat length"));
    }
}

impl<T: Scalar> DictionaryGrad<T> {
    fn zeros_like(dict: &Dictionary<T>) -> Self {
        let z = |v: &Vec<Array2<T>>| v.iter().map(|a| Array2::zeros(a.dim())).collect();
        Self {
            means: z(&dict.means),
            stds: z(&dict.stds),
            logits: z(&dict.logits),
            coords: Array2::zeros(dict.coords.dim()),
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        flatten_blocks(&self.means, &self.stds, &self.logits, &self.coords)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.flatten().into_iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

fn flatten_blocks<T: Scalar>(a: &[Array2<T>], b: &[Array2<T>], c: &[Array2<T>], coords: &Array2<T>) -> Vec<T> {
    a.iter().chain(b).chain(c).flat_map(|x| x.iter().copied()).chain(coords.iter().copied()).collect()
}

pub(crate) fn softmax_rows<T: Scalar>(u: ArrayView2<'_, T>) -> Array2<T> {
    let mut out = u.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    out
}

/// Transport plans held fixed for one gradient evaluation.
///
/// `inner[ℓ][c]` couples the barycenter of domain `ℓ` (rows) with atom `c`
/// (columns); `outer[ℓ]` couples domain mixture `ℓ` (rows) with that
/// barycenter (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenPlans<T> {
    pub inner: Vec<Vec<Array2<T>>>,
    pub outer: Vec<Array2<T>>,
}

/// Loss and gradient of the dictionary objective with every plan frozen.
///
/// Barycenter `ℓ` has weights `1/K` and parameters
/// `θ^B = Σ_c λ_ℓc (ω^{ℓc}/b) θ^{P_c}`; the loss of domain `ℓ` is
/// `Σ_ij π_ij (‖m_i − m^B_j‖² + ‖s_i − s^B_j‖² + β_ℓ ‖v_i − v^B_j‖²)`, with
/// `β_ℓ = beta` for sources (labeled `domains`) and zero for the target (last
/// domain). The result is exact for this piecewise-quadratic objective.
pub fn frozen_loss_grad<T: Scalar>(
    dict: &Dictionary<T>,
    domains: &[GaussianMixture<T>],
    beta: T,
    plans: &FrozenPlans<T>,
) -> Result<(T, DictionaryGrad<T>)> {
    let n_dom = domains.len();
    if n_dom != dict.n_domains() || plans.inner.len() != n_dom || plans.outer.len() != n_dom {
        return Err(Error::input("domains, coords rows and plans must agree in number"));
    }
    let (k, c_atoms) = (dict.k_atom(), dict.n_atoms());
    let b = T::one() / T::from_count(k);
    let labels: Vec<Array2<T>> = (0..c_atoms).map(|c| dict.labels(c)).collect();
    let mut grad = DictionaryGrad::zeros_like(dict);
    let mut grad_v: Vec<Array2<T>> = labels.iter().map(|l| Array2::zeros(l.dim())).collect();
    let mut loss = T::zero();

    for (l, q) in domains.iter().enumerate() {
        let is_target = l + 1 == n_dom;
        let beta_l = if is_target { T::zero() } else { beta };
        let lambda = dict.coords.row(l);
        let inner = &plans.inner[l];
        let pi = &plans.outer[l];
        if inner.len() != c_atoms || pi.dim() != (q.n_components(), k) {
            return Err(Error::input(format!("plans for domain {l} have the wrong shape")));
        }
        let maps: Vec<Array2<T>> = inner.iter().map(|w| w / b).collect();
        let mut mb = Array2::zeros((k, dict.dim()));
        let mut sb = Array2::zeros((k, dict.dim()));
        let mut vb = Array2::zeros((k, dict.n_classes()));
        for c in 0..c_atoms {
            mb.scaled_add(lambda[c], &maps[c].dot(&dict.means[c]));
            sb.scaled_add(lambda[c], &maps[c].dot(&dict.stds[c]));
            vb.scaled_add(lambda[c], &maps[c].dot(&labels[c]));
        }

        let w = pi.sum_axis(Axis(0));
        let (qm, qs) = (q.means(), q.stds());
        for ((i, j), &p) in pi.indexed_iter() {
            if p == T::zero() {
                continue;
            }
            let mut cost = T::zero();
            for (x, y) in qm.row(i).iter().zip(mb.row(j)) {
                cost += (*x - *y) * (*x - *y);
            }
            for (x, y) in qs.row(i).iter().zip(sb.row(j)) {
                cost += (*x - *y) * (*x - *y);
            }
            if beta_l > T::zero() {
                let ql = q.labels().ok_or_else(|| Error::state(format!("source domain {l} is unlabeled")))?;
                let mut lc = T::zero();
                for (x, y) in ql.row(i).iter().zip(vb.row(j)) {
                    lc += (*x - *y) * (*x - *y);
                }
                cost += beta_l * lc;
            }
            loss += p * cost;
        }

        let two = T::lit(2.0);
        let pull = |own: &Array2<T>, other: ArrayView2<'_, T>| -> Array2<T> {
            let mut g = own.to_owned();
            for (mut row, &wj) in g.axis_iter_mut(Axis(0)).zip(w.iter()) {
                row.mapv_inplace(|x| x * wj);
            }
            (g - pi.t().dot(&other)) * two
        };
        let gm = pull(&mb, qm);
        let gs = pull(&sb, qs);
        let gv = match (beta_l > T::zero(), q.labels()) {
            (true, Some(ql)) => Some(pull(&vb, ql) * beta_l),
            _ => None,
        };

        for c in 0..c_atoms {
            let at = maps[c].t();
            grad.means[c].scaled_add(lambda[c], &at.dot(&gm));
            grad.stds[c].scaled_add(lambda[c], &at.dot(&gs));
            let mut dl = (&gm * &maps[c].dot(&dict.means[c])).sum() + (&gs * &maps[c].dot(&dict.stds[c])).sum();
            if let Some(gv) = &gv {
                grad_v[c].scaled_add(lambda[c], &at.dot(gv));
                dl += (gv * &maps[c].dot(&labels[c])).sum();
            }
            grad.coords[[l, c]] = dl;
        }
    }

    for c in 0..c_atoms {
        let v = &labels[c];
        let g = &grad_v[c];
        let inner = (g * v).sum_axis(Axis(1));
        let mut gu = g.to_owned();
        for ((mut row, &s), vrow) in gu.axis_iter_mut(Axis(0)).zip(inner.iter()).zip(v.axis_iter(Axis(0))) {
            row.zip_mut_with(&vrow, |x, &p| *x = p * (*x - s));
        }
        grad.logits[c] = gu;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_rows_are_stochastic() {
        let v = softmax_rows(array![[0.0, 0.0], [1000.0, 0.0]].view());
        assert_eq!(v.row(0), array![0.5, 0.5]);
        assert_eq!(v.row(1), array![1.0, 0.0]);
    }

    #[test]
    fn flatten_round_trip() {
        let d: Dictionary<f64> = Dictionary::init(2, 3, 2, 2, 3, 5);
        let mut e = Dictionary::init(2, 3, 2, 2, 3, 6);
        e.assign(&d.flatten());
        assert_eq!(d, e);
    }

    #[test]
    fn init_is_deterministic_and_valid() {
        let a: Dictionary<f64> = Dictionary::init(3, 4, 2, 3, 5, 9);
        let b: Dictionary<f64> = Dictionary::init(3, 4, 2, 3, 5, 9);
        assert_eq!(a, b);
        assert!(Dictionary::new(a.means.clone(), a.stds.clone(), a.logits.clone(), a.coords.clone()).is_ok());
        assert!(a.coords.rows().into_iter().all(|r| (r.sum() - 1.0).abs() < 1e-12));
    }
}
