//! Property-based invariants of the transform and projection layer.

use fnss::snapshot::{read_snapshot, write_snapshot, SnapshotMeta};
use fnss::spectral::{
    forward_dft, inverse_dft, truncate, Grid, RealField, SpectralField,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn real_field_strategy(n: usize) -> impl Strategy<Value = RealField> {
    let grid = Grid::standard(2, n).unwrap();
    prop::collection::vec(-10.0f64..10.0, grid.len()).prop_map(move |values| {
        let mut f = RealField::zeros(grid, 1);
        f.values.copy_from_slice(&values);
        f
    })
}

fn spectral_field_strategy(n: usize) -> impl Strategy<Value = SpectralField> {
    real_field_strategy(n).prop_map(|f| forward_dft(&f).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_round_trip(f in real_field_strategy(16)) {
        let spec = forward_dft(&f).unwrap();
        let back = inverse_dft(&spec).unwrap();
        for (a, b) in back.values.iter().zip(&f.values) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn transforms_of_real_data_are_hermitian(f in real_field_strategy(16)) {
        let spec = forward_dft(&f).unwrap();
        prop_assert!(spec.hermitian_residual() < 1e-9 * spec.max_abs_coeff().max(1.0));
    }

    #[test]
    fn cutoff_is_an_orthogonal_projection(
        f in spectral_field_strategy(16),
        inv_eps in 1.0f64..9.0,
    ) {
        let eps = 1.0 / inv_eps;
        let once = truncate(&f, eps).unwrap();
        let twice = truncate(&once, eps).unwrap();
        // idempotent
        prop_assert!(twice.sub(&once).l2_norm() <= 1e-12 * f.l2_norm().max(1.0));
        // contractive, with the Pythagorean split of retained and removed energy
        let removed = f.sub(&once);
        let total = f.l2_norm().powi(2);
        let parts = once.l2_norm().powi(2) + removed.l2_norm().powi(2);
        prop_assert!(once.l2_norm() <= f.l2_norm() * (1.0 + 1e-12));
        prop_assert!((total - parts).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn symmetrization_is_idempotent_and_fixes_hermitian_fields(
        mut f in spectral_field_strategy(16),
    ) {
        f.comp_mut(0)[3] += Complex64::new(0.7, -0.3); // break the symmetry
        f.symmetrize();
        prop_assert!(f.hermitian_residual() <= 1e-12 * f.max_abs_coeff().max(1.0));
        let before = f.clone();
        f.symmetrize();
        prop_assert!(f.sub(&before).l2_norm() <= 1e-12 * before.l2_norm().max(1.0));
    }

    #[test]
    fn snapshot_round_trip(
        f in spectral_field_strategy(8),
        s in 1.0f64..4.0,
        inv_eps in 1.0f64..32.0,
        t in 0.0f64..100.0,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.fnss");
        let meta = SnapshotMeta { s, eps: 1.0 / inv_eps, t };
        write_snapshot(&f, &meta, &path).unwrap();
        let (back, meta2) = read_snapshot(&path).unwrap();
        prop_assert_eq!(meta2.s, meta.s);
        prop_assert_eq!(meta2.eps, meta.eps);
        prop_assert_eq!(meta2.t, meta.t);
        prop_assert_eq!(back.comps, f.comps);
        prop_assert!(back.sub(&f).l2_norm() == 0.0);
    }
}
