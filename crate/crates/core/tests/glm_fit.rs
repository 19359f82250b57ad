use omitbias::covariate::Link;
use omitbias::glm::{fit, Dataset};
use omitbias::linalg::{dot, Matrix};
use omitbias::specfun::{expit, norm_cdf, probit_logit_constant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn trial(link: Link, coef: &[f64], n: usize, seed: u64) -> (Vec<u8>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = coef.len();
    let mut x = Vec::with_capacity(n * k);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![1.0, if rng.random_bool(0.5) { 1.0 } else { -1.0 }];
        while row.len() < k {
            row.push(rng.sample(StandardNormal));
        }
        let eta = dot(&row, coef);
        let p = match link {
            Link::Logistic => expit(eta).unwrap(),
            Link::Probit => norm_cdf(eta),
        };
        y.push(u8::from(rng.random::<f64>() < p));
        x.extend(row);
    }
    (y, x)
}

fn dataset(y: &[u8], x: &[f64], k: usize) -> Dataset<f64> {
    Dataset::new(y.to_vec(), Matrix::from_row_major(y.len(), k, x.to_vec()).unwrap()).unwrap()
}

#[test]
fn probit_recovers_generating_coefficients() {
    let coef = [-0.3, 0.4, 0.7, -0.5];
    let n = 200_000;
    let (y, x) = trial(Link::Probit, &coef, n, 5);
    let r = fit(&dataset(&y, &x, 4), Link::Probit, 1e-10, 50).unwrap();
    assert!(r.converged);
    // Fisher-information standard errors are about 0.004 here
    for (est, truth) in r.coefficients.iter().zip(coef) {
        assert!((est - truth).abs() < 0.015, "{est} vs {truth}");
    }
}

#[test]
fn rescaled_column_leaves_fitted_probabilities_unchanged() {
    let coef = [0.2, 0.5, 1.0];
    let (y, x) = trial(Link::Logistic, &coef, 5000, 9);
    let k = 3.7;
    let scaled: Vec<f64> = x.iter().enumerate().map(|(i, v)| if i % 3 == 2 { v * k } else { *v }).collect();
    for link in [Link::Logistic, Link::Probit] {
        let a = fit(&dataset(&y, &x, 3), link, 1e-12, 50).unwrap();
        let b = fit(&dataset(&y, &scaled, 3), link, 1e-12, 50).unwrap();
        assert!((a.coefficients[2] - k * b.coefficients[2]).abs() < 1e-8);
        for i in 0..y.len() {
            let ea = dot(&x[3 * i..3 * i + 3], &a.coefficients);
            let eb = dot(&scaled[3 * i..3 * i + 3], &b.coefficients);
            let (pa, pb) = match link {
                Link::Logistic => (expit(ea).unwrap(), expit(eb).unwrap()),
                Link::Probit => (norm_cdf(ea), norm_cdf(eb)),
            };
            assert!((pa - pb).abs() < 1e-8);
        }
    }
}

#[test]
fn logistic_and_probit_coefficients_differ_by_about_c() {
    let c: f64 = probit_logit_constant();
    let (y, x) = trial(Link::Logistic, &[0.1, 0.6, 0.8, -0.4], 100_000, 21);
    let d = dataset(&y, &x, 4);
    let lg = fit(&d, Link::Logistic, 1e-10, 50).unwrap();
    let pb = fit(&d, Link::Probit, 1e-10, 50).unwrap();
    for j in 1..4 {
        let ratio = pb.coefficients[j] / lg.coefficients[j];
        assert!((ratio / c - 1.0).abs() < 0.10, "column {j}: ratio {ratio}, c {c}");
    }
}

#[test]
fn separated_data_is_not_reported_as_converged() {
    let x: Vec<f64> = (0..40).flat_map(|i| [1.0, i as f64 - 19.5]).collect();
    let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
    match fit(&dataset(&y, &x, 2), Link::Logistic, 1e-8, 100) {
        Ok(r) => assert!(!r.converged),
        Err(e) => assert!(e.to_string().contains("separation"), "{e}"),
    }
}
