//! Euclidean projections used by the projected gradient steps.

use ndarray::{Array1, ArrayView1};

use crate::scalar::Scalar;

/// Nearest point of the probability simplex in the Euclidean norm.
///
/// Sort-based algorithm: find the largest `ρ` with `u_ρ − (Σ_{k≤ρ} u_k − 1)/ρ > 0`
/// over the entries sorted in decreasing order, then shift and clip.
pub fn project_simplex<T: Scalar>(v: ArrayView1<'_, T>) -> Array1<T> {
    if v.is_empty() {
        return Array1::zeros(0);
    }
    let mut u: Vec<T> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (k, &x) in u.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - T::one()) / T::from_count(k + 1);
        if x - t > T::zero() {
            theta = t;
        }
    }
    let mut out = v.mapv(|x| (x - theta).max(T::zero()));
    // Clean up the last few ulps so the sum is one to rounding.
    let sum = out.sum();
    if sum > T::zero() {
        out.mapv_inplace(|x| x / sum);
    }
    out
}

/// Elementwise `max(v, s_min)`.
pub fn project_nonneg<T: Scalar>(v: ArrayView1<'_, T>, s_min: T) -> Array1<T> {
    v.mapv(|x| x.max(s_min))
}
