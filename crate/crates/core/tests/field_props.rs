use proptest::prelude::*;
use rnls_core::evolution::random_even;
use rnls_core::field::{self, read_snapshot, write_snapshot, SnapshotMeta};
use rnls_core::orbit::orbital_distance;
use rnls_core::{CouplingParams, Grid};

// wide enough that the random bumps are periodic to rounding
fn grid() -> Grid {
    Grid::new(1, 512, 64.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn functionals_are_gauge_and_translation_invariant(
        seed in any::<u64>(),
        theta in -10.0..10.0f64,
        cells in -40i32..40,
        frac in -5.0..5.0f64,
        k in -2.0..2.0f64,
        g in 0.05..3.0f64,
    ) {
        let grid = grid();
        let p = CouplingParams::new(k, g).unwrap();
        let f = random_even(&grid, seed);
        let e = field::energy(&f, &p);
        let q = field::charge(&f);
        // whole-cell shifts permute the samples
        let h = f.apply_gauge(theta).translate(&[cells as f64 * grid.spacing()]);
        prop_assert!((field::energy(&h, &p) - e).abs() <= 1e-10 * (1.0 + e.abs()));
        prop_assert!((field::charge(&h) - q).abs() <= 1e-11 * q);
        // fractional shifts are exact for the band-limited quadratic terms;
        // |u|³ is only C² at zeros of u, so the cubic term is not
        let h = f.translate(&[frac]);
        prop_assert!((field::charge(&h) - q).abs() <= 1e-11 * q);
        let (a, b) = (f.gradient_norms2(), h.gradient_norms2());
        prop_assert!((a.0 - b.0).abs() + (a.1 - b.1).abs() <= 1e-11 * (a.0 + a.1));
        let (m1, m2) = f.masses();
        prop_assert!((q - 0.5 * (m1 + m2)).abs() <= 1e-12 * q);
    }

    #[test]
    fn orbit_members_have_zero_distance(seed in any::<u64>(), theta in -3.0..3.0f64, shift in -8.0..8.0f64) {
        let grid = grid();
        let phi = random_even(&grid, seed);
        let f = phi.apply_gauge(theta).translate(&[shift]);
        let fit = orbital_distance(&f, &phi, 1.0).unwrap();
        prop_assert!(fit.distance < 1e-8 * phi.x_norm(), "{:?}", fit);
    }

    #[test]
    fn orbital_distance_is_gauge_invariant(seed in any::<u64>(), s2 in any::<u64>(), theta in -3.0..3.0f64) {
        let grid = grid();
        let phi = random_even(&grid, seed);
        let f = random_even(&grid, s2);
        let a = orbital_distance(&f, &phi, 1.0).unwrap().distance;
        let b = orbital_distance(&f.apply_gauge(theta), &phi, 1.0).unwrap().distance;
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a));
        prop_assert!(a <= f.axpy(-1.0, &phi).x_norm() + 1e-12);
    }

    #[test]
    fn snapshots_round_trip(seed in any::<u64>(), time in 0.0..100.0f64) {
        let grid = grid();
        let f = random_even(&grid, seed);
        let meta = SnapshotMeta { omega: 1.0, kappa: 0.5, gamma: 0.8, time };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, &meta).unwrap();
        let (g, m) = read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(m, meta);
        prop_assert!(g.u1 == f.u1 && g.u2 == f.u2);
    }
}

#[test]
fn truncated_snapshot_is_rejected() {
    let grid = grid();
    let f = random_even(&grid, 1);
    let meta = SnapshotMeta { omega: 1.0, kappa: 0.5, gamma: 0.8, time: 0.0 };
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &f, &meta).unwrap();
    buf.truncate(buf.len() - 3);
    assert!(read_snapshot(buf.as_slice()).is_err());
    buf[0] = b'X';
    assert!(read_snapshot(buf.as_slice()).is_err());
}
