use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::glm::{Coefficient, Diagnostics, ZipTrace};
use crate::panel::CONSTANT;

fn diagnostics() -> Diagnostics {
    Diagnostics {
        n_obs: 0,
        loglik: 0.0,
        loglik_null: None,
        r2: 0.0,
        joint_test: None,
        converged: true,
        iterations: 0,
        gradient_norm: 0.0,
    }
}

fn fit(model: ModelTag, coefs: &[f64], sigma2: Option<f64>) -> FitResult {
    let p = coefs.len();
    let mut names: Vec<String> = (1..p).map(|k| format!("x{k}")).collect();
    names.push(CONSTANT.into());
    FitResult {
        model,
        coefficients: names
            .into_iter()
            .zip(coefs)
            .map(|(name, &estimate)| Coefficient {
                name,
                estimate,
                std_error: 0.0,
            })
            .collect(),
        vcov: vec![vec![0.0; p]; p],
        sigma2,
        diagnostics: diagnostics(),
    }
}

fn zip_fit(theta: &[f64], gamma: &[f64]) -> ZipFitResult {
    ZipFitResult {
        logit_part: fit(ModelTag::Logit, theta, None),
        poisson_part: fit(ModelTag::Zip, gamma, None),
        loglik: 0.0,
        loglik_null: 0.0,
        pseudo_r2: 0.0,
        n_obs: 0,
        em_iterations: 0,
        polish_iterations: 0,
        vcov_method: "observed_information".into(),
        trace: ZipTrace::default(),
        vuong: None,
    }
}

/// Full design on `n` countries with one regressor drawn from `x` and a
/// constant; `mask` restricts the rows when given.
fn dyad_design(n: usize, x: impl Fn(usize, usize) -> f64, mask: Option<&DMatrix<f64>>) -> DesignMatrix {
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && mask.is_none_or(|m| m[(i, j)] > 0.0) {
                rows.push((i, j));
            }
        }
    }
    let xm = DMatrix::from_fn(rows.len(), 2, |r, c| if c == 1 { 1.0 } else { x(rows[r].0, rows[r].1) });
    DesignMatrix {
        countries: (0..n).map(|k| format!("C{k:02}")).collect(),
        columns: vec!["x1".into(), CONSTANT.into()],
        y: DVector::from_element(rows.len(), 1.0),
        x: xm,
        rows,
    }
}

fn probs(xi: DMatrix<f64>) -> LinkProbabilityMatrix {
    let n = xi.nrows();
    LinkProbabilityMatrix::new((0..n).map(|k| format!("C{k}")).collect(), xi).unwrap()
}

fn off_diag(n: usize, v: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { v })
}

#[test]
fn ols_intercept_only_is_constant_on_mask() {
    let mask = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let dm = dyad_design(3, |i, j| (i + 2 * j) as f64, Some(&mask));
    let pred = predict_ols(&fit(ModelTag::Ols, &[0.0, 2.5], Some(0.7)), &dm).unwrap();
    assert_eq!(pred.mask, mask);
    for i in 0..3 {
        for j in 0..3 {
            let expect = if mask[(i, j)] > 0.0 { 2.5 } else { 0.0 };
            assert_eq!(pred.value[(i, j)], expect);
            assert_eq!(pred.variance[(i, j)], if mask[(i, j)] > 0.0 { 0.7 } else { 0.0 });
        }
    }
}

#[test]
fn ols_prediction_equals_matrix_product() {
    let dm = dyad_design(5, |i, j| (i as f64).sin() + (j as f64).cos(), None);
    let coef = [0.8, -1.3];
    let pred = predict_ols(&fit(ModelTag::Ols, &coef, Some(1.0)), &dm).unwrap();
    let eta = &dm.x * DVector::from_row_slice(&coef);
    for (r, &(i, j)) in dm.rows.iter().enumerate() {
        assert!((pred.value[(i, j)] - eta[r]).abs() < 1e-12);
    }
}

#[test]
fn ppml_values_and_overflow() {
    let dm = dyad_design(3, |_, _| 0.0, None);
    let pred = predict_ppml(&fit(ModelTag::Ppml, &[0.0, 5f64.ln()], None), &dm).unwrap();
    assert!((pred.value[(0, 1)] - 5.0).abs() < 1e-12);
    assert_eq!(pred.value[(0, 1)], pred.variance[(0, 1)]);
    let unit = predict_ppml(&fit(ModelTag::Ppml, &[0.0, 0.0], None), &dm).unwrap();
    assert_eq!(unit.value[(2, 1)], 1.0);
    match predict_ppml(&fit(ModelTag::Ppml, &[0.0, 800.0], None), &dm) {
        Err(Error::PredictionOverflow { exporter, importer, .. }) => {
            assert_eq!((exporter.as_str(), importer.as_str()), ("C00", "C01"));
        }
        other => panic!("expected overflow, got {other:?}"),
    }
    assert!(predict_ppml(&fit(ModelTag::Ols, &[0.0, 0.0], Some(1.0)), &dm).is_err());
}

/// Moments of the two-stage sampler by summing its probability mass over
/// outcomes `0..K`.
fn zip_moments(psi: f64, mu: f64) -> (f64, f64) {
    let mut p = (-mu).exp();
    let (mut m1, mut m2) = (0.0, 0.0);
    for k in 0..200 {
        if k > 0 {
            p *= mu / k as f64;
        }
        let mass = (1.0 - psi) * p;
        m1 += k as f64 * mass;
        m2 += (k * k) as f64 * mass;
    }
    (m1, m2 - m1 * m1)
}

#[test]
fn zip_value_and_variance_match_brute_force_moments() {
    let dm = dyad_design(2, |_, _| 0.0, None);
    let pred = predict_zip(&zip_fit(&[0.0, 0.0], &[0.0, 2f64.ln()]), &dm).unwrap();
    assert!((pred.value[(0, 1)] - 1.0).abs() < 1e-12);
    assert!((pred.variance[(0, 1)] - 2.0).abs() < 1e-12);
    for (psi, mu) in [(0.5, 2.0), (0.1, 7.0), (0.9, 0.3), (0.0, 4.0)] {
        let (m, v) = zip_moments(psi, mu);
        assert!((m - (1.0 - psi) * mu).abs() < 1e-10);
        assert!((v - zip_variance(psi, mu)).abs() < 1e-9);
    }
    assert!(zip_variance(1.0, 3.0).abs() < 1e-15);
}

#[test]
fn link_probabilities_from_both_sources() {
    let dm = dyad_design(4, |i, j| i as f64 - j as f64, None);
    let zero = link_probabilities(LinkModel::Zip(&zip_fit(&[0.0, 0.0], &[0.0, 0.0])), &dm).unwrap();
    assert_eq!(zero.xi, off_diag(4, 0.5));
    let theta = [0.4, -0.2];
    let zip = zip_fit(&theta, &[0.0, 0.0]);
    let logit = fit(ModelTag::Logit, &theta, None);
    let from_zip = link_probabilities(LinkModel::Zip(&zip), &dm).unwrap();
    let from_logit = link_probabilities(LinkModel::Logit(&logit), &dm).unwrap();
    for &(i, j) in &dm.rows {
        let eta = theta[0] * (i as f64 - j as f64) + theta[1];
        assert!((from_zip.xi[(i, j)] - (1.0 - 1.0 / (1.0 + (-eta).exp()))).abs() < 1e-12);
        assert!((from_logit.xi[(i, j)] - 1.0 / (1.0 + (-eta).exp())).abs() < 1e-12);
    }
    let far = link_probabilities(LinkModel::Zip(&zip_fit(&[0.0, -40.0], &[0.0, 0.0])), &dm).unwrap();
    assert!(far.xi[(0, 1)] > 1.0 - 1e-12);
}

#[test]
fn zero_flow_probability_forms() {
    let dm = dyad_design(2, |_, _| 0.0, None);
    let psi = 0.3f64;
    let zip = zip_fit(&[0.0, (psi / (1.0 - psi)).ln()], &[0.0, 2f64.ln()]);
    let p = zero_flow_probability(&zip, &dm, ZeroProbabilityForm::Mixture).unwrap();
    assert!((p[(0, 1)] - (0.3 + 0.7 * (-2f64).exp())).abs() < 1e-12);
    assert!((p[(0, 1)] - 0.3947).abs() < 1e-4);
    let printed = zero_flow_probability(&zip, &dm, ZeroProbabilityForm::AsPrinted).unwrap();
    assert!((printed[(0, 1)] - 1.7).abs() < 1e-12);

    let one = zip_fit(&[0.0, 50.0], &[0.0, 1.0]);
    assert!((zero_flow_probability(&one, &dm, ZeroProbabilityForm::Mixture).unwrap()[(1, 0)] - 1.0).abs() < 1e-12);
    let no_mass = zip_fit(&[0.0, -50.0], &[0.0, -800.0]);
    assert!((zero_flow_probability(&no_mass, &dm, ZeroProbabilityForm::Mixture).unwrap()[(1, 0)] - 1.0).abs() < 1e-12);

    // Empirical zero share of the two-stage sampler.
    let n = 12;
    let big = dyad_design(n, |_, _| 0.0, None);
    let pred = predict_zip(&zip, &big).unwrap();
    let ens = sample_weighted_ensemble(&pred, 400, 5).unwrap();
    let cells = (n * (n - 1) * 400) as f64;
    let zeros: usize = (0..400)
        .map(|r| {
            let w = ens.draw(r);
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && w[(i, j)] == 0.0).count()
        })
        .sum();
    let share = zeros as f64 / cells;
    let p0 = p[(0, 1)];
    let se = (p0 * (1.0 - p0) / cells).sqrt();
    assert!((share - p0).abs() < 3.0 * se, "{share} vs {p0} ± {se}");
}

#[test]
fn density_induced_binary_thresholds() {
    let all = density_induced_binary(&probs(off_diag(4, 0.9)), 0.5).unwrap();
    assert_eq!(all.adjacency, off_diag(4, 1.0));
    assert_eq!(all.realized_density, 1.0);
    let none = density_induced_binary(&probs(off_diag(4, 0.1)), 0.5).unwrap();
    assert_eq!(none.adjacency, off_diag(4, 0.0));
    assert!(density_induced_binary(&probs(off_diag(4, 0.1)), 1.0).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xi = DMatrix::from_fn(9, 9, |i, j| if i == j { 0.0 } else { rng.random_range(0.01..0.99) });
    let p = probs(xi.clone());
    let mut previous = usize::MAX;
    for rho in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let b = density_induced_binary(&p, rho).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let expect = i != j && xi[(i, j)] > rho;
                assert_eq!(b.adjacency[(i, j)] > 0.0, expect);
            }
        }
        let links = b.adjacency.iter().filter(|v| **v > 0.0).count();
        assert!(links <= previous);
        previous = links;
    }
}

fn manhattan(xi: &DMatrix<f64>, a: &DMatrix<f64>, s: f64) -> usize {
    let n = xi.nrows();
    let mut d = 0;
    for i in 0..n {
        for j in 0..n {
            if i != j && ((xi[(i, j)] > s) != (a[(i, j)] > 0.0)) {
                d += 1;
            }
        }
    }
    d
}

#[test]
fn manhattan_threshold_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..300 {
        let n = 3 + trial % 4;
        let levels = [0.1, 0.25, 0.4, 0.6, 0.8];
        let xi = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { levels[rng.random_range(0..5)] });
        let a = DMatrix::from_fn(n, n, |i, j| if i != j && rng.random_bool(0.5) { 1.0 } else { 0.0 });
        let got = threshold_by_manhattan(&probs(xi.clone()), &a).unwrap();
        let mut grid: Vec<f64> = vec![0.0];
        grid.extend(xi.iter().copied().filter(|v| *v > 0.0));
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let best = grid.iter().map(|&s| manhattan(&xi, &a, s)).min().unwrap();
        let first = grid.iter().copied().find(|&s| manhattan(&xi, &a, s) == best).unwrap();
        // Any threshold between grid points behaves like the grid point below it.
        for k in 0..1000 {
            let s = k as f64 / 1000.0;
            assert!(manhattan(&xi, &a, s) >= best);
        }
        assert_eq!(got.distance, best);
        assert_eq!(got.threshold, first);
        assert_eq!(got.adjacency, xi.map(|v| if v > first { 1.0 } else { 0.0 }));
    }
}

#[test]
fn manhattan_constant_probabilities_pick_better_extreme() {
    let xi = off_diag(4, 0.5);
    let mut a = DMatrix::zeros(4, 4);
    let mut k = 0;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                a[(i, j)] = if k < 7 { 1.0 } else { 0.0 };
                k += 1;
            }
        }
    }
    let t = threshold_by_manhattan(&probs(xi.clone()), &a).unwrap();
    assert_eq!(t.distance, 5);
    assert_eq!(t.threshold, 0.0);
    assert_eq!(t.adjacency, off_diag(4, 1.0));

    a.fill(0.0);
    a[(0, 1)] = 1.0;
    let sparse = threshold_by_manhattan(&probs(xi), &a).unwrap();
    assert_eq!((sparse.distance, sparse.threshold), (1, 0.5));

    let perfect = threshold_by_manhattan(&probs(DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else if a[(i, j)] > 0.0 { 0.95 } else { 0.05 })), &a).unwrap();
    assert_eq!(perfect.distance, 0);
}

#[test]
fn bernoulli_ensembles() {
    let full = sample_bernoulli_ensemble(&probs(off_diag(5, 1.0)), ModelTag::Logit, 10, 1).unwrap();
    for r in 0..10 {
        assert_eq!(full.draw(r), off_diag(5, 1.0));
    }

    let n = 6;
    let m = 10_000;
    let ens = sample_bernoulli_ensemble(&probs(off_diag(n, 0.5)), ModelTag::Logit, m, 99).unwrap();
    let densities: Vec<f64> = (0..m).map(|r| ens.network(r, WeightTransform::Identity).unwrap().density()).collect();
    let mean = densities.iter().sum::<f64>() / m as f64;
    let se = (0.25 / (n * (n - 1)) as f64 / m as f64).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * se, "{mean} ± {se}");

    let again = sample_bernoulli_ensemble(&probs(off_diag(n, 0.5)), ModelTag::Logit, m, 99).unwrap();
    for r in [0, 17, 9999] {
        assert_eq!(ens.draw(r), again.draw(r));
    }
    let other = sample_bernoulli_ensemble(&probs(off_diag(n, 0.5)), ModelTag::Logit, m, 100).unwrap();
    assert_ne!(ens.draw(0), other.draw(0));
}

#[test]
fn ols_ensemble_without_noise_is_the_prediction() {
    let dm = dyad_design(4, |i, j| (i * j) as f64, None);
    let pred = predict_ols(&fit(ModelTag::Ols, &[0.3, 1.0], Some(0.0)), &dm).unwrap();
    let ens = sample_weighted_ensemble(&pred, 5, 3).unwrap();
    for r in 0..5 {
        assert_eq!(ens.draw(r), pred.value);
    }
}

#[test]
fn weighted_ensemble_moments_converge() {
    let n = 4;
    let m = 10_000;
    let dm = dyad_design(n, |i, j| 0.3 * i as f64 - 0.2 * j as f64, None);
    let preds = [
        predict_ols(&fit(ModelTag::Ols, &[0.5, 1.0], Some(0.8)), &dm).unwrap(),
        predict_ppml(&fit(ModelTag::Ppml, &[0.5, 4f64.ln()], None), &dm).unwrap(),
        predict_zip(&zip_fit(&[0.4, -0.5], &[0.5, 1.5]), &dm).unwrap(),
    ];
    for pred in &preds {
        let ens = sample_weighted_ensemble(pred, m, 7).unwrap();
        let mut sum = DMatrix::zeros(n, n);
        let mut sq = DMatrix::zeros(n, n);
        for r in 0..m {
            let w = ens.draw(r);
            sum += &w;
            sq += w.component_mul(&w);
        }
        for (i, j, value, variance) in pred.masked_entries() {
            let mean = sum[(i, j)] / m as f64;
            let var = sq[(i, j)] / m as f64 - mean * mean;
            let se = (variance / m as f64).sqrt();
            assert!((mean - value).abs() < 3.5 * se, "{:?} ({i},{j}) {mean} vs {value}", pred.model);
            if pred.model == ModelTag::Zip && pred.zip_parts.as_ref().unwrap().mu[(i, j)] >= 1.0 {
                assert!((var / variance - 1.0).abs() < 0.05, "ZIP var {var} vs {variance}");
            }
        }
    }
}

#[test]
fn ppml_single_dyad_mean() {
    let dm = dyad_design(2, |_, _| 0.0, None);
    let pred = predict_ppml(&fit(ModelTag::Ppml, &[0.0, 4f64.ln()], None), &dm).unwrap();
    let m = 10_000;
    let ens = sample_weighted_ensemble(&pred, m, 11).unwrap();
    let mean = (0..m).map(|r| ens.draw(r)[(0, 1)]).sum::<f64>() / m as f64;
    assert!((mean - 4.0).abs() < 3.0 * (4.0 / m as f64).sqrt(), "{mean}");
}

#[test]
fn zip_ensemble_density_tracks_link_probability() {
    let n = 8;
    let m = 5_000;
    let dm = dyad_design(n, |i, j| ((i + j) % 3) as f64, None);
    let zip = zip_fit(&[0.6, -0.4], &[0.2, 3.0]);
    let pred = predict_zip(&zip, &dm).unwrap();
    let xi = link_probabilities(LinkModel::Zip(&zip), &dm).unwrap();
    let ens = sample_weighted_ensemble(&pred, m, 13).unwrap();
    let dens: Vec<f64> = (0..m).map(|r| ens.network(r, WeightTransform::Identity).unwrap().density()).collect();
    let mean = dens.iter().sum::<f64>() / m as f64;
    let sd = (dens.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    // A Poisson draw of 0 also removes a link, so compare with P(w > 0).
    let p0 = zero_flow_probability(&zip, &dm, ZeroProbabilityForm::Mixture).unwrap();
    let expected = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| 1.0 - p0[(i, j)])
        .sum::<f64>()
        / (n * (n - 1)) as f64;
    assert!((mean - expected).abs() < 3.0 * sd / (m as f64).sqrt(), "{mean} vs {expected}");
    assert!((expected - xi.mean()).abs() < 0.01);
}

#[test]
fn density_matched_binary_hits_target_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in [5, 9, 14] {
        let cells = n * (n - 1);
        let xi = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(0.0..1.0) });
        for links in [1, cells / 3, cells - 1] {
            let rho = links as f64 / cells as f64;
            let b = density_matched_binary(&probs(xi.clone()), rho).unwrap();
            assert_eq!(b.adjacency.iter().filter(|v| **v > 0.0).count(), links);
            assert_eq!(b.realized_density, rho);
        }
    }
    // With ties the best achievable count is returned.
    let levels = [0.2, 0.5, 0.8];
    let xi = DMatrix::from_fn(6, 6, |i, j| if i == j { 0.0 } else { levels[(i + 2 * j) % 3] });
    let b = density_matched_binary(&probs(xi.clone()), 0.5).unwrap();
    let best = (0..=100)
        .map(|k| xi.iter().filter(|v| **v > k as f64 / 100.0).count())
        .map(|c| (c as f64 - 15.0).abs())
        .fold(f64::INFINITY, f64::min);
    let got = b.adjacency.iter().filter(|v| **v > 0.0).count() as f64;
    assert_eq!((got - 15.0).abs(), best);
}
