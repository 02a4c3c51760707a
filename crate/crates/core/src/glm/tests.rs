use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::*;
use crate::glm::irls::{binomial_row_loglik, logistic};

fn design(x: DMatrix<f64>, y: DVector<f64>) -> DesignMatrix {
    let mut names: Vec<String> = (1..x.ncols()).map(|k| format!("x{k}")).collect();
    names.push(CONSTANT.into());
    DesignMatrix::from_parts(names, x, y).unwrap()
}

fn intercept_only(y: &[f64]) -> DesignMatrix {
    design(
        DMatrix::from_element(y.len(), 1, 1.0),
        DVector::from_row_slice(y),
    )
}

/// Maximizes `f` by repeatedly scanning a 9-point-per-axis grid and
/// shrinking it around the best point.
fn grid_maximize(f: impl Fn(&[f64]) -> f64, center: &[f64], radius: f64, rounds: usize) -> Vec<f64> {
    let d = center.len();
    let mut best = center.to_vec();
    let mut r = radius;
    for _ in 0..rounds {
        let mut top = (f(&best), best.clone());
        let total = 9usize.pow(d as u32);
        for code in 0..total {
            let mut c = code;
            let point: Vec<f64> = best
                .iter()
                .map(|b| {
                    let step = (c % 9) as f64 - 4.0;
                    c /= 9;
                    b + step * r / 4.0
                })
                .collect();
            let v = f(&point);
            if v > top.0 {
                top = (v, point);
            }
        }
        best = top.1;
        r *= 0.5;
    }
    best
}

fn toy_counts(seed: u64, n: usize) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 3);
    let mut y = DVector::zeros(n);
    for k in 0..n {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        x[(k, 0)] = a;
        x[(k, 1)] = b;
        x[(k, 2)] = 1.0;
        let mu = (0.8 + 0.6 * a - 0.4 * b).exp();
        y[k] = Poisson::new(mu).unwrap().sample(&mut rng);
    }
    design(x, y)
}

#[test]
fn ols_recovers_exact_line() {
    let x = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 1.0, 2.0, 1.0]);
    let y = DVector::from_vec(vec![0.0, 1.0, 2.0]).map(f64::exp);
    let fit = fit_ols(&design(x, y)).unwrap();
    assert!((fit.coefficients[0].estimate - 1.0).abs() < 1e-12);
    assert!(fit.coefficients[1].estimate.abs() < 1e-12);
    assert!(fit.sigma2.unwrap() < 1e-24);
    assert_eq!(fit.model, ModelTag::Ols);
}

#[test]
fn ols_residuals_are_orthogonal_to_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40;
    let x = DMatrix::from_fn(n, 3, |_, c| if c == 2 { 1.0 } else { rng.random_range(-2.0..2.0) });
    let y = DVector::from_fn(n, |_, _| rng.random_range(0.5..20.0));
    let dm = design(x, y);
    let fit = fit_ols(&dm).unwrap();
    let resid = dm.log_y().unwrap() - dm.linear_predictor(&fit.estimates());
    assert!((dm.x.transpose() * resid).amax() < 1e-10);
    let v = fit.vcov_matrix();
    assert!((&v - v.transpose()).amax() == 0.0);
    assert!(fit.diagnostics.r2 >= 0.0 && fit.diagnostics.r2 <= 1.0);
}

#[test]
fn ols_rank_deficiency_names_column() {
    let x = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 1.0, 2.0, 4.0, 1.0, 3.0, 6.0, 1.0, 4.0, 8.0, 1.0]);
    let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 5.0]);
    match fit_ols(&design(x, y)) {
        Err(Error::SingularDesign { columns }) => assert_eq!(columns, vec!["x2".to_string()]),
        other => panic!("expected singular design, got {other:?}"),
    }
}

#[test]
fn poisson_intercept_is_log_mean() {
    let fit = fit_poisson_pml(&intercept_only(&[1.0, 2.0, 3.0])).unwrap();
    assert!((fit.coefficients[0].estimate - 2f64.ln()).abs() < 1e-10);
    assert!(fit.diagnostics.gradient_norm < 1e-8);
}

#[test]
fn poisson_all_zero_fails_to_converge() {
    match fit_poisson_pml(&intercept_only(&[0.0; 5])) {
        Err(Error::Convergence { model, last, .. }) => {
            assert_eq!(model, "PPML");
            assert!(last[0] < -20.0);
        }
        other => panic!("expected convergence error, got {other:?}"),
    }
}

#[test]
fn poisson_matches_grid_search() {
    let dm = toy_counts(17, 20);
    let fit = fit_poisson_pml(&dm).unwrap();
    let ll = |b: &[f64]| {
        (0..dm.n_rows())
            .map(|k| {
                let eta: f64 = (0..3).map(|c| dm.x[(k, c)] * b[c]).sum();
                dm.y[k] * eta - eta.exp()
            })
            .sum::<f64>()
    };
    let best = grid_maximize(ll, &[0.0, 0.0, 0.0], 4.0, 30);
    for (c, b) in fit.coefficients.iter().zip(&best) {
        assert!((c.estimate - b).abs() < 1e-4, "{} {} vs {}", c.name, c.estimate, b);
    }
    assert!(fit.diagnostics.gradient_norm < 1e-6);
}

#[test]
fn logit_intercept_is_log_odds() {
    let dm = intercept_only(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let fit = fit_logit(&dm, &dm.presence()).unwrap();
    assert!((fit.coefficients[0].estimate - (1.0f64 / 3.0).ln()).abs() < 1e-10);
}

#[test]
fn logit_detects_separation() {
    let x = DMatrix::from_row_slice(6, 2, &[-3.0, 1.0, -2.0, 1.0, -1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0]);
    let a = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let dm = design(x, a.clone());
    assert!(matches!(fit_logit(&dm, &a), Err(Error::Separation { .. })));
}

#[test]
fn logit_needs_both_classes() {
    let dm = intercept_only(&[1.0; 4]);
    assert!(matches!(fit_logit(&dm, &dm.presence()), Err(Error::Precondition(_))));
}

#[test]
fn logit_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20;
    let x = DMatrix::from_fn(n, 3, |_, c| if c == 2 { 1.0 } else { rng.random_range(-2.0..2.0) });
    let a = DVector::from_fn(n, |k, _| {
        let p = logistic(0.3 + 1.2 * x[(k, 0)] - 0.7 * x[(k, 1)]);
        if rng.random_bool(p) { 1.0 } else { 0.0 }
    });
    let dm = design(x, a.clone());
    let fit = fit_logit(&dm, &a).unwrap();
    let ll = |b: &[f64]| {
        (0..n)
            .map(|k| {
                let eta: f64 = (0..3).map(|c| dm.x[(k, c)] * b[c]).sum();
                binomial_row_loglik(a[k], eta)
            })
            .sum::<f64>()
    };
    let best = grid_maximize(ll, &[0.0, 0.0, 0.0], 8.0, 32);
    for (c, b) in fit.coefficients.iter().zip(&best) {
        assert!((c.estimate - b).abs() < 1e-4, "{} {} vs {}", c.name, c.estimate, b);
    }
}

#[test]
fn shifting_a_regressor_leaves_predictions_unchanged() {
    let dm = toy_counts(23, 60);
    let mut shifted = dm.clone();
    for k in 0..dm.n_rows() {
        shifted.x[(k, 0)] += 3.0;
    }
    let a = fit_poisson_pml(&dm).unwrap();
    let b = fit_poisson_pml(&shifted).unwrap();
    let pa = dm.linear_predictor(&a.estimates());
    let pb = shifted.linear_predictor(&b.estimates());
    assert!((pa - pb).amax() < 1e-10);
    assert!((a.coefficients[0].estimate - b.coefficients[0].estimate).abs() < 1e-10);
    assert!((a.coefficients[1].estimate - b.coefficients[1].estimate).abs() < 1e-10);
}

fn zip_toy(seed: u64, n: usize, theta: [f64; 2], gamma: [f64; 2]) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, 2, |_, c| if c == 1 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let y = DVector::from_fn(n, |k, _| {
        let psi = logistic(theta[0] * x[(k, 0)] + theta[1]);
        let mu = (gamma[0] * x[(k, 0)] + gamma[1]).exp();
        if rng.random_bool(psi) {
            0.0
        } else {
            Poisson::new(mu).unwrap().sample(&mut rng)
        }
    });
    design(x, y)
}

#[test]
fn zip_loglik_matches_direct_maximization() {
    let dm = zip_toy(9, 80, [1.0, -0.5], [0.7, 0.9]);
    let fit = fit_zip(&dm, &ZipConfig::default()).unwrap();
    let ll = |b: &[f64]| {
        (0..dm.n_rows())
            .map(|k| {
                let x = dm.x[(k, 0)];
                zip_row_loglik(dm.y[k], b[0] * x + b[1], b[2] * x + b[3])
            })
            .sum::<f64>()
    };
    let best = grid_maximize(ll, &[0.0, 0.0, 0.0, 0.0], 4.0, 36);
    assert!((fit.loglik - ll(&best)).abs() < 1e-6, "{} vs {}", fit.loglik, ll(&best));
    assert!(fit.trace.max_em_decrease() <= 1e-9 * fit.loglik.abs());
    assert_eq!(fit.vcov_method, "observed_information");
}

/// With a single regressor block of constants the ZIP optimum sits on the
/// ψ = 0 boundary whenever the zero share is below e^{−ȳ}; richer designs
/// usually find some half-space with chance excess zeros.
#[test]
fn zip_degenerates_to_poisson_without_inflation() {
    let y: Vec<f64> = (0..40).map(|k| if k == 0 { 0.0 } else { (1 + k % 5) as f64 }).collect();
    let dm = intercept_only(&y);
    let share = 1.0 / 40.0;
    assert!(share < (-dm.y.mean()).exp());
    let zip = fit_zip(&dm, &ZipConfig::default()).unwrap();
    let pois = fit_poisson_pml(&dm).unwrap();
    let diff = (zip.gamma() - pois.estimates()).amax();
    let theta0 = zip.logit_part.coefficient(CONSTANT).unwrap().estimate;
    assert!(diff < 1e-3, "gamma differs by {diff}, theta0 = {theta0}");
    assert!(theta0 < -10.0, "theta0 = {theta0}");
}

#[test]
fn zip_rejects_degenerate_responses() {
    assert!(matches!(
        fit_zip(&intercept_only(&[0.0; 6]), &ZipConfig::default()),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        fit_zip(&intercept_only(&[1.0, 2.0, 3.0, 1.0, 2.0]), &ZipConfig::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn zip_row_loglik_reduces_to_poisson() {
    for (y, eta) in [(0.0, 0.3), (3.0, 1.1), (7.5, 2.0)] {
        let a = zip_row_loglik(y, -800.0, eta);
        let b = poisson_row_loglik(y, eta);
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn vuong_identical_models_is_degenerate() {
    let dm = zip_toy(4, 200, [0.5, 0.0], [0.5, 1.0]);
    let pois = fit_poisson_pml(&dm).unwrap();
    let mut zip = fit_zip(&dm, &ZipConfig::default()).unwrap();
    for c in zip.logit_part.coefficients.iter_mut() {
        c.estimate = if c.name == CONSTANT { -1e3 } else { 0.0 };
    }
    zip.poisson_part.coefficients = pois.coefficients.clone();
    assert!(matches!(vuong_test(&zip, &pois, &dm), Err(Error::Undefined(_))));
}

#[test]
fn vuong_favours_zip_under_heavy_inflation() {
    let dm = zip_toy(8, 1000, [0.5, 0.8], [0.4, 1.5]);
    let pois = fit_poisson_pml(&dm).unwrap();
    let zip = fit_zip(&dm, &ZipConfig::default()).unwrap().with_vuong(&pois, &dm).unwrap();
    let v = zip.vuong.unwrap();
    assert!(v.statistic > 5.0, "{v:?}");
    assert!(v.p_value < 1e-6);
}

#[test]
fn model_tags_parse_and_serialize() {
    assert_eq!("ppml".parse::<ModelTag>().unwrap(), ModelTag::Ppml);
    assert_eq!(serde_json::to_string(&ModelTag::Logit).unwrap(), "\"LOGIT\"");
    assert!("NB".parse::<ModelTag>().is_err());
}

