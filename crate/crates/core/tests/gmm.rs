mod common;

use gmmot::gmm::em_fit_traced;
use gmmot::io::{make_toy, ToyConfig};
use gmmot::*;
use ndarray::{array, Axis};

#[test]
fn em_recovers_well_separated_components() {
    let truth = Gmm::new(array![0.3, 0.7], array![[-5.0, 0.0], [5.0, 2.0]], array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
    let sample = truth.sample(20_000, 1).unwrap();
    let (fit, trace) = em_fit_traced(sample.points.view(), &EmConfig { n_components: 2, ..Default::default() }).unwrap();
    // Components come back in arbitrary order.
    let order = if fit.means()[[0, 0]] < 0.0 { [0, 1] } else { [1, 0] };
    for (k, &j) in order.iter().enumerate() {
        assert!((fit.weights()[j] - truth.weights()[k]).abs() < 0.02);
        assert!((&fit.means().row(j) - &truth.means().row(k)).iter().all(|d| d.abs() < 0.05));
        assert!((&fit.stds().row(j) - &truth.stds().row(k)).iter().all(|d| d.abs() < 0.05));
    }
    for w in trace.log_likelihoods.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "log-likelihood decreased: {w:?}");
    }
}

#[test]
fn sample_mean_matches_the_mixture_mean() {
    let mut rng = common::rng(40);
    let g = common::random_gmm(&mut rng, 4, 3, 0);
    let n = 40_000;
    let s = g.sample(n, 2).unwrap();
    let mean = s.points.mean_axis(Axis(0)).unwrap();
    let want = g.weighted_mean_of_means();
    // Total std per axis is bounded by the spread of means plus the largest std.
    let sd = 6.0 + 2.0;
    assert!((&mean - &want).iter().all(|d| d.abs() < 4.0 * sd / (n as f64).sqrt()));
}

#[test]
fn labeled_fit_classifies_its_own_domain() {
    let domains = make_toy(&ToyConfig::default()).unwrap();
    let g = fit_labeled(&domains[0], 2, &EmConfig::default()).unwrap();
    assert_eq!(g.n_components(), 6);
    assert_eq!(g.n_classes(), Some(3));
    assert!((g.weights().sum() - 1.0).abs() < 1e-12);
    let pred = g.predict(domains[0].features()).unwrap();
    assert!(domains[0].accuracy(&pred).unwrap() > 0.95);
    // A shifted domain is where plain MAP classification breaks down.
    let far = g.predict(domains[3].features()).unwrap();
    assert!(domains[3].accuracy(&far).unwrap() < 0.9);
}

#[test]
fn em_is_reproducible() {
    let domains = make_toy(&ToyConfig::default()).unwrap();
    let cfg = EmConfig { n_components: 6, seed: 9, ..Default::default() };
    let a = em_fit(domains[1].features(), &cfg).unwrap();
    let b = em_fit(domains[1].features(), &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.min_std() >= cfg.s_min);
}

#[test]
fn em_rejects_bad_input() {
    let x = array![[0.0, 1.0], [1.0, 0.0]];
    assert!(em_fit(x.view(), &EmConfig { n_components: 3, ..Default::default() }).is_err());
    assert!(em_fit(x.view(), &EmConfig { n_components: 0, ..Default::default() }).is_err());
    let bad = array![[0.0, f64::NAN]];
    assert!(em_fit(bad.view(), &EmConfig { n_components: 1, ..Default::default() }).is_err());
}
