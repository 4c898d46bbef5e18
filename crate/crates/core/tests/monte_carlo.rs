//! Seeded Monte Carlo oracles for sampling, the sample covariance and the
//! unbiased risk estimate.

use bandcov::bandwidth::{select_sure, sure_constants, SelectionMethod};
use bandcov::datagen::{mvn_sample, standard_normals, RngSpec};
use bandcov::estimators::{power_law_sigma, sample_cov, PopulationModel};
use bandcov::linalg::{cholesky, MatrixRef, SymMatrix};

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn standard_normals_clt() {
    let z = standard_normals(&mut RngSpec::new(2024, 0).rng(), 1_000_000);
    let (mean, _) = mean_se(&z);
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() as f64 - 1.0);
    assert!(mean.abs() <= 4.0 / 1000.0, "mean {mean}");
    assert!((var - 1.0).abs() <= 0.01, "variance {var}");
}

#[test]
fn mvn_correlation() {
    let sigma = SymMatrix::from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap();
    let x = mvn_sample(&cholesky(&sigma).unwrap(), 100_000, &mut RngSpec::new(1, 0).rng()).unwrap();
    let s = sample_cov(&x).unwrap();
    let r = s.get(0, 1) / (s.get(0, 0) * s.get(1, 1)).sqrt();
    assert!((r - 0.9).abs() <= 0.01, "correlation {r}");
}

#[test]
fn streams_are_independent_and_reproducible() {
    let a = standard_normals(&mut RngSpec::new(9, 0).rng(), 20_000);
    let b = standard_normals(&mut RngSpec::new(9, 1).rng(), 20_000);
    let c = standard_normals(&mut RngSpec::new(9, 0).rng(), 20_000);
    let aux = standard_normals(&mut RngSpec::new(9, 0).auxiliary().rng(), 20_000);
    assert_eq!(a, c);
    assert_ne!(a, b);
    for other in [&b, &aux] {
        let r: f64 = a.iter().zip(other.iter()).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64;
        // correlation of independent streams is O(1/√N)
        assert!(r.abs() < 4.0 / (a.len() as f64).sqrt(), "cross moment {r}");
    }
}

#[test]
fn sample_covariance_is_unbiased() {
    let model = PopulationModel::new(20, 0.6, 0.5);
    let sigma = power_law_sigma(&model).unwrap();
    let l = cholesky(&sigma).unwrap();
    let mut rng = RngSpec::new(3, 0).rng();
    let reps = 2000;
    let draws: Vec<SymMatrix> = (0..reps)
        .map(|_| sample_cov(&mvn_sample(&l, 30, &mut rng).unwrap()).unwrap())
        .collect();
    for (i, j) in [(0, 0), (0, 1), (3, 7), (5, 19), (12, 12)] {
        let v: Vec<f64> = draws.iter().map(|s| s.get(i, j)).collect();
        let (mean, se) = mean_se(&v);
        assert!((mean - sigma.get(i, j)).abs() <= 3.0 * se, "({i},{j}): {mean} vs {}", sigma.get(i, j));
    }
}

#[test]
fn unbiased_variance_and_square_estimators() {
    let sigma = SymMatrix::from_rows(&[vec![1.5, 0.6], vec![0.6, 0.8]]).unwrap();
    let l = cholesky(&sigma).unwrap();
    let n = 12;
    let c = sure_constants(n).unwrap();
    let mut rng = RngSpec::new(4, 0).rng();
    let mut var_est = Vec::new();
    let mut sq_est = Vec::new();
    for _ in 0..2000 {
        let s = sample_cov(&mvn_sample(&l, n, &mut rng).unwrap()).unwrap();
        let dd = s.get(0, 0) * s.get(1, 1);
        let sq = s.get(0, 1) * s.get(0, 1);
        var_est.push(c.a * dd + c.b * sq);
        sq_est.push(c.c * dd + c.d * sq);
    }
    let (m1, se1) = mean_se(&var_est);
    let (m2, se2) = mean_se(&sq_est);
    assert!((m1 - (1.2 + 0.36) / (n as f64 - 1.0)).abs() <= 3.0 * se1);
    assert!((m2 - 0.36).abs() <= 3.0 * se2);
}

#[test]
fn independent_coordinates_pick_diagonal() {
    let l = cholesky(&SymMatrix::identity(20)).unwrap();
    let mut rng = RngSpec::new(5, 0).rng();
    let ones = (0..20)
        .filter(|_| {
            let s = sample_cov(&mvn_sample(&l, 500, &mut rng).unwrap()).unwrap();
            select_sure(&s, 500, SelectionMethod::SureF).unwrap().chosen_k == 1
        })
        .count();
    assert!(ones >= 18, "K = 1 in {ones} of 20 draws");
}

#[test]
fn slower_decay_needs_wider_band() {
    let median_k = |alpha: f64| {
        let sigma = power_law_sigma(&PopulationModel::new(100, 0.6, alpha)).unwrap();
        let l = cholesky(&sigma).unwrap();
        let mut rng = RngSpec::new(6, 0).rng();
        let mut ks: Vec<usize> = (0..100)
            .map(|_| {
                let s = sample_cov(&mvn_sample(&l, 100, &mut rng).unwrap()).unwrap();
                select_sure(&s, 100, SelectionMethod::SureOp).unwrap().chosen_k
            })
            .collect();
        ks.sort_unstable();
        ks[50]
    };
    let (slow, fast) = (median_k(0.1), median_k(0.5));
    assert!(slow >= fast, "median K {slow} at alpha 0.1 vs {fast} at alpha 0.5");
}
