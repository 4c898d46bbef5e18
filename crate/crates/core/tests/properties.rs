use bandcov::bandwidth::{argmin, select_sure, sure_constants, sure_f, sure_op, sure_taper, SelectionMethod};
use bandcov::estimators::{sample_cov, taper, taper_weight, DataSample};
use bandcov::linalg::{
    band, block_compress, cholesky, frob_norm, is_banded, max_abs_row_sum, op_norm_default,
    DenseMatrix, MatrixRef, SymMatrix,
};
use proptest::prelude::*;

fn symmetric(max_dim: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_dim).prop_flat_map(|p| {
        prop::collection::vec(-10.0..10.0f64, p * p)
            .prop_map(move |v| SymMatrix::from_upper_fn(p, |i, j| v[i * p + j]).unwrap())
    })
}

fn data(max_p: usize) -> impl Strategy<Value = DataSample> {
    (3..=20usize, 1..=max_p).prop_flat_map(|(n, p)| {
        prop::collection::vec(-3.0..3.0f64, n * p).prop_map(move |v| DataSample::new(n, p, v).unwrap())
    })
}

fn naive_sure_f(s: &SymMatrix, n: usize, k: usize) -> f64 {
    let c = sure_constants(n).unwrap();
    let p = s.dim();
    let mut total = 0.0;
    for i in 0..p {
        for j in 0..p {
            let dd = s.get(i, i) * s.get(j, j);
            let sq = s.get(i, j) * s.get(i, j);
            if i.abs_diff(j) < k {
                total += c.a * dd + c.b * sq;
            } else {
                total += c.c * dd + c.d * sq;
            }
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn band_is_idempotent(a in symmetric(10), k in 1usize..12) {
        let once = band(&a, k).unwrap();
        prop_assert_eq!(band(&once, k).unwrap(), once.clone());
        prop_assert!(is_banded(&once, k));
    }

    #[test]
    fn band_frobenius_is_monotone_in_k(a in symmetric(10), k in 1usize..11) {
        let small = frob_norm(&band(&a, k).unwrap());
        let large = frob_norm(&band(&a, k + 1).unwrap());
        prop_assert!(small <= large);
        let full = band(&a, a.dim()).unwrap();
        prop_assert_eq!(full, a);
    }

    #[test]
    fn op_norm_below_row_sum_norm(a in symmetric(10)) {
        let op = op_norm_default(&a).unwrap();
        prop_assert!(op <= max_abs_row_sum(&a) * (1.0 + 1e-8) + 1e-12);
        prop_assert!(op <= frob_norm(&a) * (1.0 + 1e-8) + 1e-12);
        prop_assert!(op >= a.max_abs() * (1.0 - 1e-8));
    }

    #[test]
    fn compression_chain(a in symmetric(12), k in 1usize..6) {
        let d = band(&a, k).unwrap();
        let c = block_compress(&d, k).unwrap();
        let lhs = op_norm_default(&d).unwrap();
        let mid = op_norm_default(&c).unwrap();
        prop_assert!(lhs <= mid * (1.0 + 1e-7) + 1e-12);
        prop_assert!(mid <= 3.0 * c.max_near_diagonal() * (1.0 + 1e-7) + 1e-12);
    }

    #[test]
    fn cholesky_residual(v in prop::collection::vec(-2.0..2.0f64, 36)) {
        let w = DenseMatrix::from_row_major(6, 6, v).unwrap();
        let spd = SymMatrix::symmetrize(&w.transpose().matmul(&w).unwrap()).unwrap()
            .add(&SymMatrix::identity(6).scale(0.1)).unwrap();
        let l = cholesky(&spd).unwrap();
        let r = l.matmul(&l.transpose()).unwrap();
        let tol = 1e-10 * frob_norm(&spd);
        for (x, y) in r.as_slice().iter().zip(spd.as_slice()) {
            prop_assert!((x - y).abs() <= tol);
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                prop_assert_eq!(l.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn sure_f_matches_naive_double_sum(x in data(9)) {
        let s = sample_cov(&x).unwrap();
        for (k, v) in sure_f(&s, x.n()).unwrap() {
            let want = naive_sure_f(&s, x.n(), k);
            prop_assert!((v - want).abs() <= 1e-10 * want.abs().max(1e-12), "K={} {} vs {}", k, v, want);
        }
    }

    #[test]
    fn selections_stay_in_range(x in data(9)) {
        let s = sample_cov(&x).unwrap();
        let p = x.p();
        let f = select_sure(&s, x.n(), SelectionMethod::SureF).unwrap();
        prop_assert!((1..=p).contains(&f.chosen_k));
        prop_assert_eq!(f.curve.len(), p);
        let op = select_sure(&s, x.n(), SelectionMethod::SureOp).unwrap();
        prop_assert!(op.chosen_k >= f.chosen_k && op.chosen_k <= (f.chosen_k * f.chosen_k).min(p).max(f.chosen_k));
        let t = select_sure(&s, x.n(), SelectionMethod::SureTaper).unwrap();
        prop_assert!(t.chosen_k % 2 == 0 && t.chosen_k >= 2);
        prop_assert_eq!(argmin(&f.curve), Some(f.chosen_k));
    }

    #[test]
    fn sure_op_curve_is_restricted(x in data(9)) {
        let s = sample_cov(&x).unwrap();
        let kf = argmin(&sure_f(&s, x.n()).unwrap()).unwrap();
        let curve = select_sure(&s, x.n(), SelectionMethod::SureOp).unwrap().curve;
        let full = sure_op(&s, x.n()).unwrap();
        for &(k, v) in &curve {
            prop_assert_eq!(full[k - 1], (k, v));
        }
        prop_assert_eq!(curve.first().unwrap().0, kf);
        prop_assert_eq!(curve.last().unwrap().0, (kf * kf).min(x.p()).max(kf));
    }

    #[test]
    fn taper_weights_and_estimator(a in symmetric(9), half in 1usize..6) {
        let k = 2 * half;
        for m in 0..20 {
            let w = taper_weight(m, k);
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert!(taper_weight(m + 1, k) <= w);
            if m <= half { prop_assert_eq!(w, 1.0); }
            if m >= k { prop_assert_eq!(w, 0.0); }
        }
        let t = taper(&a, k).unwrap();
        prop_assert!(is_banded(&t, k));
        for i in 0..a.dim() {
            prop_assert_eq!(t.get(i, i), a.get(i, i));
        }
        prop_assert!(sure_taper(&sample_cov(&DataSample::new(3, 1, vec![0.0, 1.0, 3.0]).unwrap()).unwrap(), 3).is_ok());
    }
}
