use nalgebra::DMatrix;
use proptest::prelude::*;
use scalemat_core::estimators::{b0_bound, b1_bound, estimate_with};
use scalemat_core::identity::{check_ties, g_psi, haff_improvement_margin, GVariant};
use scalemat_core::matrix::{eigen_sym, gram, rel_frobenius, sym_sqrt};
use scalemat_core::{EstimatorSpec, Matrix, ShrinkagePsi};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

/// `(U, p, m)` with `U` of shape `m × p`.
fn sample() -> impl Strategy<Value = (Matrix, usize, usize)> {
    (1usize..=12, 1usize..=12).prop_flat_map(|(p, m)| matrix(m, p).prop_map(move |u| (u, p, m)))
}

fn spectrum(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..=max_len).prop_filter_map("near-tie", |e| {
        let mut l: Vec<f64> = e.iter().map(|x| 10f64.powf(*x)).collect();
        l.sort_by(|a, b| b.total_cmp(a));
        check_ties(&l).ok().map(|_| l)
    })
}

/// Orthogonal factor of a random square matrix.
fn orthogonal(p: usize) -> impl Strategy<Value = Matrix> {
    matrix(p, p).prop_filter_map("singular", |a| {
        let qr = a.qr();
        qr.r()
            .diagonal()
            .iter()
            .all(|d| d.abs() > 1e-3)
            .then(|| qr.q())
    })
}

proptest! {
    #[test]
    fn penrose_conditions((u, _p, _m) in sample()) {
        let s = gram(&u);
        prop_assume!(s.amax() > 1e-6);
        let es = eigen_sym(&s).unwrap();
        let pinv = es.pinv();
        let sp = &s * &pinv;
        let ps = &pinv * &s;
        prop_assert!(rel_frobenius(&(&sp * &s), &s) < 1e-8);
        prop_assert!(rel_frobenius(&(&ps * &pinv), &pinv) < 1e-8);
        prop_assert!(rel_frobenius(&sp.transpose(), &sp) < 1e-8);
        prop_assert!((ps.trace() - es.rank() as f64).abs() < 1e-8);
    }

    #[test]
    fn sqrt_roundtrip((u, _p, _m) in sample()) {
        let s = gram(&u) + Matrix::identity(u.ncols(), u.ncols());
        let r = sym_sqrt(&s).unwrap();
        prop_assert!(rel_frobenius(&(&r * &r), &s) < 1e-10);
        prop_assert!(rel_frobenius(&r.transpose(), &r) < 1e-12);
    }

    #[test]
    fn haff_weights_sum_to_b(l in spectrum(30), alpha in 0.25f64..10.0, b in 0.0f64..5.0) {
        let psi = ShrinkagePsi::haff(alpha, b).unwrap().psi_eval(&l, 40).unwrap();
        prop_assert!((psi.iter().sum::<f64>() - b).abs() < 1e-10);
        // smaller eigenvalues are shrunk less, i.e. get larger ψ
        for w in psi.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-15);
        }
    }

    #[test]
    fn bounds_ordered(r in 2usize..40, extra in 0usize..40) {
        let v = r + extra;
        let (b0, b1) = (b0_bound(v, r), b1_bound(v, r));
        prop_assert!(b0 > 0.0 && b1 > b0);
        prop_assert!(haff_improvement_margin(v, r, b0).abs() < 1e-9);
    }

    #[test]
    fn g_bound_holds_in_certified_region(
        l in spectrum(20),
        extra in 0usize..30,
        alpha in 1.0f64..10.0,
        t in 0.0f64..1.0,
    ) {
        let r = l.len();
        let v = r + extra;
        let b = t * b0_bound(v, r);
        let psi = ShrinkagePsi::haff(alpha, b).unwrap();
        let g = g_psi(&l, &psi, v, b, GVariant::PRINTED).unwrap();
        prop_assert!(g <= haff_improvement_margin(v, r, b) + 1e-9);
    }

    #[test]
    fn estimator_is_orthogonally_equivariant(
        (u, q, m) in (1usize..=8, 1usize..=8)
            .prop_flat_map(|(p, m)| (matrix(m, p), orthogonal(p)).prop_map(move |(u, q)| (u, q, m))),
        alpha in 1.0f64..5.0,
    ) {
        let p = q.nrows();
        let s = gram(&u);
        let es = eigen_sym(&s);
        prop_assume!(es.is_ok());
        let es = es.unwrap();
        let l = es.values_slice().to_vec();
        prop_assume!(check_ties(&l).is_ok() && l.last().unwrap() / l[0] > 1e-8);
        let rotated = &q * &s * q.transpose();
        let (v, r) = (p.max(m), p.min(m));
        let spec = EstimatorSpec::OrthInvariant { psi: ShrinkagePsi::haff(alpha, b0_bound(v, r)).unwrap() };
        let est = estimate_with(&spec, &s, &es, v, 1.0 / v as f64).unwrap();
        let es_rot = eigen_sym(&rotated).unwrap();
        let est_rot = estimate_with(&spec, &rotated, &es_rot, v, 1.0 / v as f64).unwrap();
        prop_assert!(rel_frobenius(&est_rot, &(&q * est * q.transpose())) < 1e-7);
    }
}
