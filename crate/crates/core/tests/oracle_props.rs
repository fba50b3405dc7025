use num_complex::Complex64;
use proptest::prelude::*;
use szego_core::oracle::{oracle_field, oracle_hs_dot_norm, oracle_hs_norm, oracle_state, t_delta};
use szego_core::spectral::{cubic_nonlinearity, sobolev_norm, SzegoField};

/// `|| i V_t - Pi(|V|^2 V) ||_{L^2}` with a central difference of step `h`.
fn pde_residual(delta: f64, t: f64, n: usize, h: f64) -> f64 {
    let (prev, _) = oracle_field(delta, t - h, n).unwrap();
    let (next, _) = oracle_field(delta, t + h, n).unwrap();
    let (now, _) = oracle_field(delta, t, n).unwrap();
    let nl = cubic_nonlinearity(&now);
    let lhs: Vec<Complex64> = (0..=n)
        .map(|k| Complex64::new(0.0, 1.0) * (next.get(k) - prev.get(k)) / (2.0 * h))
        .collect();
    let diff = SzegoField::from_coeffs(lhs).unwrap().sub(&nl);
    sobolev_norm(&diff, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_solves_szego_equation(delta in 0.1f64..0.9, frac in 0.05f64..0.6) {
        // |p| stays below ~0.85, so N = 200 leaves a negligible tail
        let t = frac * t_delta(delta);
        let coarse = pde_residual(delta, t, 200, 2e-3);
        let fine = pde_residual(delta, t, 200, 1e-3);
        let rate = (coarse / fine).log2();
        prop_assert!((rate - 2.0).abs() < 0.2, "{} {}", coarse, fine);
        prop_assert!(pde_residual(delta, t, 200, 2e-5) < 1e-8);
    }

    #[test]
    fn mass_and_momentum_are_constant(delta in 0.05f64..0.95, t in 0.0f64..50.0) {
        let st = oracle_state(delta, t);
        prop_assert!((st.mass() - (1.0 + delta * delta)).abs() < 1e-10);
        // 1 - |p|^2 can be as small as delta^2 / 4, which costs a few digits
        prop_assert!((st.momentum() - 1.0).abs() < 1e-10);
        prop_assert!(st.p.norm() < 1.0);
        let half = oracle_hs_dot_norm(delta, t, 0.5).unwrap();
        prop_assert!((half - 1.0).abs() < 1e-10);
    }

    #[test]
    fn norms_peak_at_t_delta(delta in 0.1f64..0.9, s in prop::sample::select(vec![1.0, 1.5, 2.0])) {
        let td = t_delta(delta);
        let peak = oracle_hs_norm(delta, td, s).unwrap();
        for j in 0..=40 {
            let t = td * j as f64 / 40.0;
            prop_assert!(oracle_hs_norm(delta, t, s).unwrap() <= peak * (1.0 + 1e-12));
        }
    }
}

#[test]
fn truncated_field_reports_its_tail() {
    let delta = 0.3;
    let t = t_delta(delta);
    let full = oracle_hs_norm(delta, t, 1.0).unwrap();
    for n in [50, 200, 800] {
        let (field, tail) = oracle_field(delta, t, n).unwrap();
        let head = sobolev_norm(&field, 1.0);
        assert!((head * head + tail * tail - full * full).abs() < 1e-9 * full * full);
    }
}
