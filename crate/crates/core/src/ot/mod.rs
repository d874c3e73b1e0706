//! Optimal transport between axis-aligned Gaussian mixtures.
//!
//! Between two axis-aligned Gaussians the squared 2-Wasserstein distance has
//! the closed form `‖m_P − m_Q‖² + ‖s_P − s_Q‖²`. Restricting couplings of two
//! mixtures to be mixtures themselves turns optimal transport into a small
//! transportation LP over component pairs, solved exactly by the network
//! simplex in [`simplex`]. Its optimal value is the squared mixture-Wasserstein
//! distance; adding `β‖v_i − v_j‖²` between component soft labels gives the
//! supervised variant used for labeled mixtures.

mod simplex;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::gmm::{check_simplex_with_tol, DiagGaussian, GaussianMixture};
use crate::scalar::Scalar;

/// Marginals whose totals differ from one by more than this are rejected.
pub const MARGINAL_SUM_TOL: f64 = 1e-6;

/// Marginal/objective tolerance for plans with at most 64 components per side.
pub const PLAN_TOL_SMALL: f64 = 1e-9;
/// Marginal/objective tolerance above 64 components per side.
pub const PLAN_TOL_LARGE: f64 = 1e-7;

/// Tolerance appropriate for a `k_p × k_q` plan.
pub fn plan_tolerance(k_p: usize, k_q: usize) -> f64 {
    if k_p.max(k_q) <= 64 { PLAN_TOL_SMALL } else { PLAN_TOL_LARGE }
}

/// Pairwise ground costs between mixture components (squared-distance units).
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix<T>(Array2<T>);

impl<T: Scalar> CostMatrix<T> {
    pub fn new(entries: Array2<T>) -> Result<Self> {
        if entries.iter().any(|c| !c.is_finite() || *c < T::zero()) {
            return Err(Error::input("cost entries must be finite and nonnegative"));
        }
        Ok(Self(entries))
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// Coupling between the components of two mixtures.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<T> {
    omega: Array2<T>,
    row_marginal: Array1<T>,
    col_marginal: Array1<T>,
}

impl<T: Scalar> TransportPlan<T> {
    /// Wraps a user-supplied coupling after checking it against its marginals.
    pub fn new(omega: Array2<T>, row_marginal: Array1<T>, col_marginal: Array1<T>) -> Result<Self> {
        if omega.dim() != (row_marginal.len(), col_marginal.len()) {
            return Err(Error::input("plan shape does not match marginals"));
        }
        let tol = T::lit(plan_tolerance(omega.nrows(), omega.ncols()));
        if omega.iter().any(|w| !w.is_finite() || *w < -T::lit(1e-12)) {
            return Err(Error::input("plan entries must be finite and nonnegative"));
        }
        let plan = Self { omega, row_marginal, col_marginal };
        let (r, c) = plan.marginal_residuals();
        if r > tol || c > tol {
            return Err(Error::input(format!("plan violates marginals (rows {r:e}, cols {c:e})")));
        }
        Ok(plan)
    }

    pub fn omega(&self) -> ArrayView2<'_, T> {
        self.omega.view()
    }

    pub fn row_marginal(&self) -> ArrayView1<'_, T> {
        self.row_marginal.view()
    }

    pub fn col_marginal(&self) -> ArrayView1<'_, T> {
        self.col_marginal.view()
    }

    pub fn into_omega(self) -> Array2<T> {
        self.omega
    }

    /// `Σ ω_ij C_ij`.
    pub fn cost(&self, cost: ArrayView2<'_, T>) -> T {
        self.omega.iter().zip(cost.iter()).map(|(&w, &c)| w * c).sum()
    }

    /// Largest absolute deviation of row and column sums from the marginals.
    pub fn marginal_residuals(&self) -> (T, T) {
        let rows = self
            .omega
            .rows()
            .into_iter()
            .zip(self.row_marginal.iter())
            .map(|(r, &p)| (r.sum() - p).abs())
            .fold(T::zero(), T::max);
        let cols = self
            .omega
            .columns()
            .into_iter()
            .zip(self.col_marginal.iter())
            .map(|(c, &q)| (c.sum() - q).abs())
            .fold(T::zero(), T::max);
        (rows, cols)
    }

    /// Number of entries above `threshold`.
    pub fn support_size(&self, threshold: T) -> usize {
        self.omega.iter().filter(|&&w| w > threshold).count()
    }
}

/// Squared 2-Wasserstein distance between two axis-aligned Gaussians.
pub fn gauss_w2_sq<T: Scalar>(a: &DiagGaussian<T>, b: &DiagGaussian<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::input(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    Ok(w2_sq_rows(a.mean(), a.std(), b.mean(), b.std()))
}

pub(crate) fn sq_dist<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn sq_dist_slices<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

pub(crate) fn w2_sq_rows<T: Scalar>(
    m_a: ArrayView1<'_, T>,
    s_a: ArrayView1<'_, T>,
    m_b: ArrayView1<'_, T>,
    s_b: ArrayView1<'_, T>,
) -> T {
    sq_dist(m_a, m_b) + sq_dist(s_a, s_b)
}

/// Component cost matrix `W₂(P_i, Q_j)² + β‖v_i − v_j‖²`.
///
/// With `beta == 0` labels are ignored and the inputs may be unlabeled.
pub fn mixture_cost<T: Scalar>(
    p: &GaussianMixture<T>,
    q: &GaussianMixture<T>,
    beta: T,
) -> Result<CostMatrix<T>> {
    if p.dim() != q.dim() {
        return Err(Error::input(format!("dimension mismatch: {} vs {}", p.dim(), q.dim())));
    }
    if !(beta >= T::zero()) || !beta.is_finite() {
        return Err(Error::input("beta must be finite and nonnegative"));
    }
    let labels = if beta > T::zero() {
        match (p.labels(), q.labels()) {
            (Some(lp), Some(lq)) if lp.ncols() == lq.ncols() => Some((lp, lq)),
            (Some(lp), Some(lq)) => {
                return Err(Error::input(format!(
                    "label dimension mismatch: {} vs {} classes",
                    lp.ncols(),
                    lq.ncols()
                )))
            }
            _ => return Err(Error::state("beta > 0 requires both mixtures to be labeled")),
        }
    } else {
        None
    };
    // Contiguous copies make the K_P × K_Q inner loops cheap.
    let flat = |a: ArrayView2<'_, T>| -> Vec<T> { a.iter().copied().collect() };
    let gauss = |g: &GaussianMixture<T>| -> Vec<T> {
        let mut out = Vec::with_capacity(2 * g.n_components() * g.dim());
        for k in 0..g.n_components() {
            out.extend(g.means().row(k).iter().copied());
            out.extend(g.stds().row(k).iter().copied());
        }
        out
    };
    let (gp, gq) = (gauss(p), gauss(q));
    let width = 2 * p.dim();
    let mut cost = Array2::from_shape_fn((p.n_components(), q.n_components()), |(i, j)| {
        sq_dist_slices(&gp[i * width..(i + 1) * width], &gq[j * width..(j + 1) * width])
    });
    if let Some((lp, lq)) = labels {
        let (vp, vq) = (flat(lp), flat(lq));
        let nc = lp.ncols();
        for ((i, j), c) in cost.indexed_iter_mut() {
            *c += beta * sq_dist_slices(&vp[i * nc..(i + 1) * nc], &vq[j * nc..(j + 1) * nc]);
        }
    }
    // Mixture parameters are finite by construction, so this is overflow.
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::numerical("transport", "component cost overflowed"));
    }
    CostMatrix::new(cost)
}

/// Exact optimal plan for marginals `p`, `q` and cost `c`; returns the plan and
/// its objective `Σ ω_ij C_ij`.
///
/// Marginals must be nonnegative and sum to one within [`MARGINAL_SUM_TOL`];
/// `q` is rescaled to the total of `p` before solving so that the problem is
/// exactly balanced.
pub fn solve_transport<T: Scalar>(
    p: ArrayView1<'_, T>,
    q: ArrayView1<'_, T>,
    c: &CostMatrix<T>,
) -> Result<(TransportPlan<T>, T)> {
    if c.dim() != (p.len(), q.len()) {
        return Err(Error::input(format!(
            "cost is {:?} but marginals have lengths {} and {}",
            c.dim(),
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() || q.is_empty() {
        return Err(Error::input("marginals must be non-empty"));
    }
    let sum_tol = T::lit(MARGINAL_SUM_TOL).max(T::epsilon() * T::lit(64.0));
    check_simplex_with_tol(p, "row marginal", sum_tol)?;
    check_simplex_with_tol(q, "column marginal", sum_tol)?;
    let p_clean = p.mapv(|x| x.max(T::zero()));
    let mut q_clean = q.mapv(|x| x.max(T::zero()));
    let scale = p_clean.sum() / q_clean.sum();
    q_clean.mapv_inplace(|x| x * scale);

    let omega = simplex::solve(p_clean.view(), q_clean.view(), c.view())?;
    let plan = TransportPlan { omega, row_marginal: p.to_owned(), col_marginal: q.to_owned() };
    let objective = plan.cost(c.view());
    Ok((plan, objective))
}

/// Optimal component-level coupling of two mixtures under the supervised cost
/// with weight `beta` (plain GMM-OT when `beta == 0`).
pub fn supervised_transport<T: Scalar>(
    p: &GaussianMixture<T>,
    q: &GaussianMixture<T>,
    beta: T,
) -> Result<(TransportPlan<T>, T)> {
    let cost = mixture_cost(p, q, beta)?;
    solve_transport(p.weights(), q.weights(), &cost)
}

/// GMM-OT: optimal coupling of the components of `p` and `q` under squared
/// Gaussian W₂ costs; returns the plan and its objective.
pub fn gmmot<T: Scalar>(
    p: &GaussianMixture<T>,
    q: &GaussianMixture<T>,
) -> Result<(TransportPlan<T>, T)> {
    supervised_transport(p, q, T::zero())
}

/// Squared mixture-Wasserstein distance.
pub fn mw2_sq<T: Scalar>(p: &GaussianMixture<T>, q: &GaussianMixture<T>) -> Result<T> {
    gmmot(p, q).map(|(_, obj)| obj)
}

/// Squared supervised mixture-Wasserstein distance between labeled mixtures.
pub fn smw2_sq<T: Scalar>(p: &GaussianMixture<T>, q: &GaussianMixture<T>, beta: T) -> Result<T> {
    if !p.is_labeled() || !q.is_labeled() {
        return Err(Error::state("supervised distance requires labeled mixtures"));
    }
    if p.n_classes() != q.n_classes() {
        return Err(Error::input("mixtures have different numbers of classes"));
    }
    supervised_transport(p, q, beta).map(|(_, obj)| obj)
}

/// Barycentric images of source-component parameters under a plan.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedParams<T> {
    pub means: Array2<T>,
    pub stds: Array2<T>,
    pub labels: Option<Array2<T>>,
}

/// Maps every source component onto `Σ_j (ω_ij / p_i) θ_j` for target parameters
/// `θ_j` (means, stds, and labels when the target carries them).
///
/// These are the first-order optimality conditions of the fixed-plan transport
/// objective with respect to the source parameters.
pub fn transport_params<T: Scalar>(
    plan: &TransportPlan<T>,
    source_weights: ArrayView1<'_, T>,
    target: &GaussianMixture<T>,
) -> Result<MappedParams<T>> {
    let omega = plan.omega();
    if omega.ncols() != target.n_components() {
        return Err(Error::input(format!(
            "plan has {} columns but target has {} components",
            omega.ncols(),
            target.n_components()
        )));
    }
    if omega.nrows() != source_weights.len() {
        return Err(Error::input("plan rows differ from number of source weights"));
    }
    let tol = T::lit(plan_tolerance(omega.nrows(), omega.ncols()));
    for (i, (&p_i, &row_marg)) in source_weights.iter().zip(plan.row_marginal().iter()).enumerate() {
        if p_i <= T::zero() {
            return Err(Error::input(format!("source weight {i} is zero")));
        }
        if (p_i - row_marg).abs() > tol {
            return Err(Error::input(format!("plan row marginal {i} differs from source weight")));
        }
    }
    let scaled = row_normalized(omega, source_weights);
    Ok(MappedParams {
        means: scaled.dot(&target.means()),
        stds: scaled.dot(&target.stds()),
        labels: target.labels().map(|l| scaled.dot(&l)),
    })
}

/// `ω_ij / p_i`.
pub(crate) fn row_normalized<T: Scalar>(omega: ArrayView2<'_, T>, p: ArrayView1<'_, T>) -> Array2<T> {
    let mut out = omega.to_owned();
    for (mut row, &p_i) in out.rows_mut().into_iter().zip(p.iter()) {
        row.mapv_inplace(|w| w / p_i);
    }
    out
}
