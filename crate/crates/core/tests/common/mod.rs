//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use gmmot::gmm::GaussianMixture;
use gmmot::io::{make_toy, ToyConfig};
use gmmot::{fit_labeled, EmConfig, Gmm};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Array1<f64> {
    let v = Array1::from_shape_fn(k, |_| rng.random_range(0.05..1.0));
    let s = v.sum();
    v / s
}

/// Random mixture with `k` components in `d` dimensions; labeled when
/// `n_classes > 0`.
pub fn random_gmm(rng: &mut ChaCha8Rng, k: usize, d: usize, n_classes: usize) -> Gmm {
    let weights = random_simplex(rng, k);
    let means = Array2::from_shape_fn((k, d), |_| rng.random_range(-3.0..3.0));
    let stds = Array2::from_shape_fn((k, d), |_| rng.random_range(0.2..2.0));
    let g = GaussianMixture::new(weights, means, stds).unwrap();
    if n_classes == 0 {
        return g;
    }
    let mut labels = Array2::from_shape_fn((k, n_classes), |_| rng.random_range(0.01..1.0));
    for mut row in labels.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    g.with_labels(labels).unwrap()
}

/// Same as [`random_gmm`] with uniform weights.
pub fn random_uniform_gmm(rng: &mut ChaCha8Rng, k: usize, d: usize, n_classes: usize) -> Gmm {
    let g = random_gmm(rng, k, d, n_classes);
    let w = Array1::from_elem(k, 1.0 / k as f64);
    let out = GaussianMixture::new(w, g.means().to_owned(), g.stds().to_owned()).unwrap();
    match g.labels() {
        Some(l) => out.with_labels(l.to_owned()).unwrap(),
        None => out,
    }
}

type Cell = (usize, usize);

/// Optimal value of the transportation LP by enumerating every basic
/// solution: each spanning tree of the bipartite row/column graph with
/// `m + n − 1` cells determines a unique flow, feasible when nonnegative.
pub fn brute_force_transport(p: &[f64], q: &[f64], c: &Array2<f64>) -> f64 {
    let (m, n) = (p.len(), q.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let size = m + n - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(size);
    enumerate(&cells, 0, size, &mut chosen, &mut |subset| {
        if let Some(flow) = tree_flow(m, n, p, q, subset) {
            if flow.iter().all(|&f| f >= -1e-12) {
                let obj: f64 = subset.iter().zip(&flow).map(|(&(i, j), &f)| f * c[[i, j]]).sum();
                best = best.min(obj);
            }
        }
    });
    best
}

fn enumerate(
    cells: &[(usize, usize)],
    start: usize,
    size: usize,
    chosen: &mut Vec<(usize, usize)>,
    visit: &mut dyn FnMut(&[Cell]),
) {
    if chosen.len() == size {
        visit(chosen);
        return;
    }
    for idx in start..cells.len() {
        if cells.len() - idx < size - chosen.len() {
            break;
        }
        chosen.push(cells[idx]);
        enumerate(cells, idx + 1, size, chosen, visit);
        chosen.pop();
    }
}

/// Flow on a spanning tree by repeatedly peeling leaves; `None` if the cells
/// do not form a spanning tree.
fn tree_flow(m: usize, n: usize, p: &[f64], q: &[f64], cells: &[(usize, usize)]) -> Option<Vec<f64>> {
    let mut supply: Vec<f64> = p.iter().chain(q).copied().collect();
    let mut alive = vec![true; cells.len()];
    let mut flow = vec![0.0; cells.len()];
    for _ in 0..cells.len() {
        let mut degree = vec![0usize; m + n];
        for (k, &(i, j)) in cells.iter().enumerate() {
            if alive[k] {
                degree[i] += 1;
                degree[m + j] += 1;
            }
        }
        let (k, leaf) = cells.iter().enumerate().find_map(|(k, &(i, j))| {
            if !alive[k] {
                None
            } else if degree[i] == 1 {
                Some((k, i))
            } else if degree[m + j] == 1 {
                Some((k, m + j))
            } else {
                None
            }
        })?;
        let (i, j) = cells[k];
        let other = if leaf == i { m + j } else { i };
        flow[k] = supply[leaf];
        supply[other] -= supply[leaf];
        supply[leaf] = 0.0;
        alive[k] = false;
    }
    // A spanning tree leaves every node balanced; a forest with a cycle elsewhere
    // would have failed to find leaves above.
    if supply.iter().all(|s| s.abs() < 1e-9) { Some(flow) } else { None }
}

/// Scalar evaluation of `Σ (m_a − m_b)² + (s_a − s_b)²`, one coordinate at a time.
pub fn scalar_w2_sq(ma: &[f64], sa: &[f64], mb: &[f64], sb: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..ma.len() {
        let dm = ma[k] - mb[k];
        let ds = sa[k] - sb[k];
        acc += dm * dm + ds * ds;
    }
    acc
}

pub struct ToyRun {
    pub sources: Vec<Gmm>,
    pub target: Gmm,
    /// Held-out labeled samples from the target domain.
    pub test_x: Array2<f64>,
    pub test_y: Vec<usize>,
}

/// Seeded toy pipeline: labeled per-class EM fits (two components per class)
/// on the source domains and an unlabeled six-component fit on the last domain.
pub fn toy_run(seed: u64) -> ToyRun {
    let cfg = ToyConfig { seed, ..Default::default() };
    let domains = make_toy(&cfg).unwrap();
    let held_out = make_toy(&ToyConfig { seed: seed.wrapping_add(1_000), ..cfg.clone() }).unwrap();
    let em = EmConfig { seed, ..Default::default() };
    let (target_data, source_data) = domains.split_last().unwrap();
    let sources = source_data.iter().map(|d| fit_labeled(d, 2, &em).unwrap()).collect();
    let target = gmmot::em_fit(target_data.features(), &EmConfig { n_components: 6, ..em }).unwrap();
    let test = held_out.last().unwrap();
    ToyRun {
        sources,
        target,
        test_x: test.features().to_owned(),
        test_y: test.labels().unwrap().to_vec(),
    }
}

pub fn accuracy(g: &Gmm, x: &Array2<f64>, y: &[usize]) -> f64 {
    let pred = g.predict(x.view()).unwrap();
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Independent evaluation of the frozen-plan dictionary objective with plain
/// loops: barycenter `ℓ` has parameters `Σ_c λ_ℓc Σ_a K·ω^{ℓc}_{ja} θ^c_a`, and
/// the loss sums `π_ij (‖Δm‖² + ‖Δs‖² + β_ℓ‖Δv‖²)` over every domain, with
/// `β_ℓ = 0` for the last (target) domain.
#[allow(clippy::needless_range_loop)]
pub fn frozen_objective(
    dict: &gmmot::msda::Dictionary<f64>,
    domains: &[Gmm],
    beta: f64,
    plans: &gmmot::msda::FrozenPlans<f64>,
) -> f64 {
    let c_atoms = dict.means.len();
    let (k, d) = dict.means[0].dim();
    let nc = dict.logits[0].ncols();
    let soft: Vec<Array2<f64>> = dict
        .logits
        .iter()
        .map(|u| {
            let mut v = u.clone();
            for a in 0..k {
                let mx = (0..nc).map(|r| u[[a, r]]).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = (0..nc).map(|r| (u[[a, r]] - mx).exp()).sum();
                for r in 0..nc {
                    v[[a, r]] = (u[[a, r]] - mx).exp() / z;
                }
            }
            v
        })
        .collect();
    let mut total = 0.0;
    for (l, q) in domains.iter().enumerate() {
        let beta_l = if l + 1 == domains.len() { 0.0 } else { beta };
        let mut mb = Array2::<f64>::zeros((k, d));
        let mut sb = Array2::<f64>::zeros((k, d));
        let mut vb = Array2::<f64>::zeros((k, nc));
        for c in 0..c_atoms {
            let lam = dict.coords[[l, c]];
            let w = &plans.inner[l][c];
            for j in 0..k {
                for a in 0..k {
                    let f = lam * w[[j, a]] * k as f64;
                    for x in 0..d {
                        mb[[j, x]] += f * dict.means[c][[a, x]];
                        sb[[j, x]] += f * dict.stds[c][[a, x]];
                    }
                    for r in 0..nc {
                        vb[[j, r]] += f * soft[c][[a, r]];
                    }
                }
            }
        }
        let pi = &plans.outer[l];
        for i in 0..q.n_components() {
            for j in 0..k {
                let mut cost = 0.0;
                for x in 0..d {
                    cost += (q.means()[[i, x]] - mb[[j, x]]).powi(2) + (q.stds()[[i, x]] - sb[[j, x]]).powi(2);
                }
                if beta_l > 0.0 {
                    let ql = q.labels().unwrap();
                    for r in 0..nc {
                        cost += beta_l * (ql[[i, r]] - vb[[j, r]]).powi(2);
                    }
                }
                total += pi[[i, j]] * cost;
            }
        }
    }
    total
}

/// Central differences of `f` at `x` with step `h`, one coordinate at a time.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Random dictionary at a generic point: interior coordinates, stds well away
/// from the floor, non-uniform label logits.
pub fn random_dictionary(
    rng: &mut ChaCha8Rng,
    n_atoms: usize,
    k: usize,
    d: usize,
    n_classes: usize,
    n_domains: usize,
) -> gmmot::msda::Dictionary<f64> {
    let means = (0..n_atoms).map(|_| Array2::from_shape_fn((k, d), |_| rng.random_range(-3.0..3.0))).collect();
    let stds = (0..n_atoms).map(|_| Array2::from_shape_fn((k, d), |_| rng.random_range(0.3..2.0))).collect();
    let logits = (0..n_atoms).map(|_| Array2::from_shape_fn((k, n_classes), |_| rng.random_range(-2.0..2.0))).collect();
    let mut coords = Array2::zeros((n_domains, n_atoms));
    for mut row in coords.rows_mut() {
        row.assign(&random_simplex(rng, n_atoms));
    }
    gmmot::msda::Dictionary::new(means, stds, logits, coords).unwrap()
}
