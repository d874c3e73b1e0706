mod common;

use gmmot::barycenter::BarycenterRun;
use gmmot::*;
use ndarray::{array, Array1};
use rand::Rng;

fn cfg(k_b: usize) -> BarycenterConfig {
    BarycenterConfig { k_b, tol: 1e-12, max_iter: 200, ..Default::default() }
}

fn run(measures: &[Gmm], lambda: &Array1<f64>, cfg: &BarycenterConfig, warm: Option<&Gmm>) -> BarycenterRun<f64> {
    barycenter_run(measures, lambda.view(), cfg, true, warm).unwrap()
}

/// Smallest total squared parameter gap over all component pairings.
fn matched_gap(a: &Gmm, b: &Gmm) -> f64 {
    fn go(a: &Gmm, b: &Gmm, i: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if i == a.n_components() {
            *best = acc;
            return;
        }
        for j in 0..b.n_components() {
            if used[j] {
                continue;
            }
            used[j] = true;
            let ma = a.means().row(i).to_vec();
            let sa = a.stds().row(i).to_vec();
            let mb = b.means().row(j).to_vec();
            let sb = b.stds().row(j).to_vec();
            go(a, b, i + 1, used, acc + common::scalar_w2_sq(&ma, &sa, &mb, &sb), best);
            used[j] = false;
        }
    }
    let mut best = f64::INFINITY;
    go(a, b, 0, &mut vec![false; b.n_components()], 0.0, &mut best);
    best
}

#[test]
fn translating_every_measure_translates_the_barycenter() {
    let mut rng = common::rng(10);
    for _ in 0..5 {
        let measures: Vec<Gmm> = (0..3).map(|_| common::random_uniform_gmm(&mut rng, 4, 2, 3)).collect();
        let lambda = common::random_simplex(&mut rng, 3);
        let t = array![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let shifted: Vec<Gmm> = measures
            .iter()
            .map(|m| {
                Gmm::new(m.weights().to_owned(), &m.means() + &t, m.stds().to_owned())
                    .unwrap()
                    .with_labels(m.labels().unwrap().to_owned())
                    .unwrap()
            })
            .collect();
        // Start both runs from the first measure so the translation carries
        // through the initialisation too.
        let c = BarycenterConfig { init: BarycenterInit::FromMeasure(0), ..cfg(4) };
        let a = run(&measures, &lambda, &c, None).barycenter;
        let b = run(&shifted, &lambda, &c, None).barycenter;
        let moved = &a.means() + &t;
        assert!((&moved - &b.means()).iter().all(|d| d.abs() < 1e-6));
        assert!((&a.stds() - &b.stds()).iter().all(|d| d.abs() < 1e-6));
    }
}

#[test]
fn converged_barycenter_is_a_fixed_point() {
    let mut rng = common::rng(11);
    let measures: Vec<Gmm> = (0..3).map(|_| common::random_uniform_gmm(&mut rng, 5, 2, 2)).collect();
    let lambda = array![0.2, 0.3, 0.5];
    let c = cfg(5);
    let first = run(&measures, &lambda, &c, None);
    assert!(first.trace.converged);
    let again = run(&measures, &lambda, &BarycenterConfig { max_iter: 1, ..c.clone() }, Some(&first.barycenter));
    let moved = (&again.barycenter.means() - &first.barycenter.means()).iter().fold(0.0f64, |m, d| m.max(d.abs()));
    assert!(moved < 10.0 * c.tol.max(1e-9), "moved {moved}");
}

#[test]
fn loss_matches_a_sum_of_pairwise_distances() {
    let mut rng = common::rng(12);
    let measures: Vec<Gmm> = (0..3).map(|_| common::random_gmm(&mut rng, 3, 2, 2)).collect();
    let b = common::random_uniform_gmm(&mut rng, 4, 2, 2);
    let lambda = array![0.5, 0.25, 0.25];
    let got = barycenter_loss(&b, &measures, lambda.view(), 1.0).unwrap();
    // Compose the loss from the independent brute-force transport value.
    let mut want = 0.0;
    for (p, &l) in measures.iter().zip(lambda.iter()) {
        let c = mixture_cost(&b, p, 1.0).unwrap().into_inner();
        want += l * common::brute_force_transport(b.weights().as_slice().unwrap(), p.weights().as_slice().unwrap(), &c);
    }
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn single_measure_reproduces_itself() {
    let mut rng = common::rng(13);
    for k in 2..=5 {
        let p = common::random_uniform_gmm(&mut rng, k, 2, 2);
        let (b, _) = smw_barycenter(std::slice::from_ref(&p), array![1.0].view(), &cfg(k)).unwrap();
        assert!(matched_gap(&b, &p) < 1e-10);
        assert!(barycenter_loss(&b, std::slice::from_ref(&p), array![1.0].view(), 1.0).unwrap() < 1e-10);
    }
}

#[test]
fn one_hot_coordinates_select_a_measure() {
    let mut rng = common::rng(14);
    let measures: Vec<Gmm> = (0..3).map(|_| common::random_uniform_gmm(&mut rng, 4, 2, 2)).collect();
    for c in 0..3 {
        let mut lambda = Array1::zeros(3);
        lambda[c] = 1.0;
        let b = run(&measures, &lambda, &cfg(4), None).barycenter;
        assert!(matched_gap(&b, &measures[c]) < 1e-10);
    }
}

#[test]
fn output_invariants_hold() {
    let mut rng = common::rng(15);
    let measures: Vec<Gmm> = (0..4).map(|_| common::random_gmm(&mut rng, 3, 3, 4)).collect();
    let lambda = common::random_simplex(&mut rng, 4);
    let c = BarycenterConfig { s_min: 0.5, ..cfg(7) };
    let (b, trace) = smw_barycenter(&measures, lambda.view(), &c).unwrap();
    assert_eq!(b.n_components(), 7);
    assert!(b.weights().iter().all(|&w| (w - 1.0 / 7.0).abs() < 1e-15));
    assert!(b.stds().iter().all(|&s| s >= 0.5));
    for row in b.labels().unwrap().rows() {
        assert!((row.sum() - 1.0).abs() < 1e-9 && row.iter().all(|&v| v >= 0.0));
    }
    assert_eq!(trace.losses.len(), trace.iterations_run);
    // The unsupervised variant drops labels.
    let (u, _) = mw_barycenter(&measures, lambda.view(), &c).unwrap();
    assert!(u.labels().is_none());
}

#[test]
fn thread_count_does_not_change_the_result() {
    let mut rng = common::rng(16);
    let measures: Vec<Gmm> = (0..5).map(|_| common::random_gmm(&mut rng, 6, 2, 3)).collect();
    let lambda = common::random_simplex(&mut rng, 5);
    let solve = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run(&measures, &lambda, &cfg(6), None))
    };
    let a = solve(1);
    let b = solve(4);
    assert_eq!(a.barycenter, b.barycenter);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn bad_inputs_are_rejected() {
    let mut rng = common::rng(17);
    let measures: Vec<Gmm> = (0..2).map(|_| common::random_gmm(&mut rng, 2, 2, 2)).collect();
    assert!(smw_barycenter(&measures, array![0.7, 0.7].view(), &cfg(2)).is_err());
    assert!(smw_barycenter(&measures, array![1.0].view(), &cfg(2)).is_err());
    assert!(smw_barycenter(&[], Array1::<f64>::zeros(0).view(), &cfg(2)).is_err());
    let unlabeled = vec![common::random_gmm(&mut rng, 2, 2, 0)];
    assert!(smw_barycenter(&unlabeled, array![1.0].view(), &cfg(2)).is_err());
    assert!(mw_barycenter(&unlabeled, array![1.0].view(), &cfg(2)).is_ok());
}
