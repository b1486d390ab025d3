use jsrcert::lift::{d_lift_matrix, d_lift_vector, kron_power, num_monomials, LiftBasis};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
}

fn unit(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
        .prop_map(|v| {
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / r).collect()
        })
}

fn case() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=4, 1usize..=3)
}

proptest! {
    #[test]
    fn lift_is_multiplicative(a in matrix(3), b in matrix(3), d in 1usize..=3) {
        let la = d_lift_matrix(&a, d).unwrap();
        let lb = d_lift_matrix(&b, d).unwrap();
        let lab = d_lift_matrix(&(&a * &b), d).unwrap();
        let err = (&lab - &la * &lb).norm();
        prop_assert!(err <= 1e-9 * (1.0 + la.norm() * lb.norm()), "err {err}");
    }

    #[test]
    fn lift_is_multiplicative_2d(a in matrix(2), b in matrix(2), d in 1usize..=4) {
        let la = d_lift_matrix(&a, d).unwrap();
        let lb = d_lift_matrix(&b, d).unwrap();
        let lab = d_lift_matrix(&(&a * &b), d).unwrap();
        prop_assert!((&lab - &la * &lb).norm() <= 1e-9 * (1.0 + la.norm() * lb.norm()));
    }

    #[test]
    fn lift_commutes_with_action(a in matrix(3), x in unit(3), d in 1usize..=3) {
        let la = d_lift_matrix(&a, d).unwrap();
        let lx = DVector::from_vec(d_lift_vector(&x, d).unwrap().entries);
        let ax: Vec<f64> = (&a * DVector::from_column_slice(&x)).iter().copied().collect();
        let lax = DVector::from_vec(d_lift_vector(&ax, d).unwrap().entries);
        prop_assert!((&la * lx - &lax).norm() <= 1e-9 * lax.norm().max(1e-12));
    }

    #[test]
    fn norms_are_powers(x in prop::collection::vec(-3.0f64..3.0, 1..5), d in 1usize..=4) {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expect = r.powi(d as i32);
        let lifted = d_lift_vector(&x, d).unwrap().norm();
        let kron: f64 = kron_power(&x, d).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((lifted - expect).abs() <= 1e-12 * expect.max(1e-300));
        prop_assert!((kron - expect).abs() <= 1e-12 * expect.max(1e-300));
    }

    #[test]
    fn projection_has_orthonormal_rows((n, d) in case()) {
        let c = LiftBasis::new(n, d).unwrap().projection();
        prop_assert_eq!(c.nrows(), num_monomials(n, d));
        let gram = &c * c.transpose();
        prop_assert!((gram - DMatrix::identity(c.nrows(), c.nrows())).amax() < 1e-14);
    }

    #[test]
    fn degree_one_is_identity(a in matrix(3), x in prop::collection::vec(-5.0f64..5.0, 3)) {
        prop_assert_eq!(d_lift_matrix(&a, 1).unwrap(), a);
        prop_assert_eq!(d_lift_vector(&x, 1).unwrap().entries, x);
    }
}
