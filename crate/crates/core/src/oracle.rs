//! Closed-form solution of the cubic Szegő equation `i V_t = Pi(|V|^2 V)`
//! with data `V(0) = e^{ix} + delta`:
//!
//! `V(t, x) = (a(t) e^{ix} + b(t)) / (1 - p(t) e^{ix})`,
//!
//! whose Fourier coefficients are `c_0 = b` and `c_k = p^{k-1} (a + b p)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::spectral::SzegoField;

/// Iteration cap of the norm series.
pub const SERIES_CAP: usize = 50_000_000;

/// Relative accuracy of the norm series.
pub const SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleState {
    pub a: Complex64,
    pub b: Complex64,
    pub p: Complex64,
    pub omega: f64,
    pub delta: f64,
    pub t: f64,
}

impl OracleState {
    /// `a + b p`, the common factor of every coefficient `c_k`, `k >= 1`.
    pub fn lead(&self) -> Complex64 {
        self.a + self.b * self.p
    }

    /// Coefficient `c_k` of the untruncated solution.
    pub fn coefficient(&self, k: usize) -> Complex64 {
        if k == 0 {
            self.b
        } else {
            self.p.powu(k as u32 - 1) * self.lead()
        }
    }

    /// Mass `sum |c_k|^2` in closed form.
    pub fn mass(&self) -> f64 {
        self.b.norm_sqr() + self.lead().norm_sqr() / (1.0 - self.p.norm_sqr())
    }

    /// Momentum `sum k |c_k|^2 = |a + bp|^2 / (1 - |p|^2)^2`.
    pub fn momentum(&self) -> f64 {
        self.lead().norm_sqr() / (1.0 - self.p.norm_sqr()).powi(2)
    }
}

fn check_delta(delta: f64) {
    assert!(delta > 0.0 && delta < 1.0, "delta = {delta} outside (0, 1)");
}

/// Evaluates `a`, `b`, `p` and `omega = delta sqrt(1 + delta^2 / 4)` at time `t`.
pub fn oracle_state(delta: f64, t: f64) -> OracleState {
    check_delta(delta);
    let d2 = delta * delta;
    let omega = delta * (1.0 + d2 / 4.0).sqrt();
    let root = (4.0 + d2).sqrt();
    let (sin, cos) = (omega * t).sin_cos();
    let a = Complex64::from_polar(1.0, -t * (1.0 + d2));
    let b = Complex64::from_polar(1.0, -t * (1.0 + d2 / 2.0))
        * Complex64::new(delta * cos, -(2.0 + d2) / root * sin);
    let p = Complex64::new(0.0, -2.0 / root * sin) * Complex64::from_polar(1.0, -t * d2 / 2.0);
    OracleState {
        a,
        b,
        p,
        omega,
        delta,
        t,
    }
}

/// `pi / (delta sqrt(4 + delta^2))`, the first time at which `omega t = pi/2`
/// and `|p|` is maximal.
pub fn t_delta(delta: f64) -> f64 {
    check_delta(delta);
    PI / (delta * (4.0 + delta * delta).sqrt())
}

/// The solution truncated at degree `n`, together with the `H^1` norm of
/// the discarded tail `sum_{k > n} c_k e^{ikx}`.
pub fn oracle_field(delta: f64, t: f64, n: usize) -> Result<(SzegoField, f64)> {
    if n < 1 {
        return Err(SzegoError::Contract(
            "truncation N must be at least 1".into(),
        ));
    }
    let st = oracle_state(delta, t);
    let coeffs = (0..=n).map(|k| st.coefficient(k)).collect();
    let field = SzegoField::from_coeffs(coeffs)?;
    let tail = weighted_series(&st, n + 1, |k| 1.0 + (k * k) as f64, 1.0)?;
    Ok((field, tail.sqrt()))
}

/// `||V(t)||_{H^s}` of the untruncated solution.
pub fn oracle_hs_norm(delta: f64, t: f64, s: f64) -> Result<f64> {
    let st = oracle_state(delta, t);
    Ok(weighted_series(&st, 0, |k| (1.0 + (k * k) as f64).powf(s), s)?.sqrt())
}

/// Homogeneous norm `( sum k^{2s} |c_k|^2 )^{1/2}`; equals 1 at `s = 1/2`
/// for every `t`.
pub fn oracle_hs_dot_norm(delta: f64, t: f64, s: f64) -> Result<f64> {
    let st = oracle_state(delta, t);
    Ok(weighted_series(&st, 0, |k| (k as f64).powf(2.0 * s), s)?.sqrt())
}

/// `sum_{k >= from} w(k) |c_k|^2`, stopped by a rigorous tail bound: once the
/// term ratio `rho_k = w(k+1)/w(k) |p|^2` is below one, the ratios only
/// decrease, so the tail after term `k` is at most `term_k rho_k / (1 - rho_k)`.
fn weighted_series(st: &OracleState, from: usize, w: impl Fn(usize) -> f64, s: f64) -> Result<f64> {
    let q = st.p.norm_sqr();
    let lead = st.lead().norm_sqr();
    let mut sum = 0.0;
    let mut k = from;
    if k == 0 {
        sum += w(0) * st.b.norm_sqr();
        k = 1;
    }
    if lead == 0.0 {
        return Ok(sum);
    }
    if q == 0.0 {
        return Ok(if k == 1 { sum + w(1) * lead } else { sum });
    }
    // |c_k|^2 = lead q^{k-1}, accumulated in log form to avoid underflow
    // when k is large and q is close to 1
    let ln_q = q.ln();
    let ln_lead = lead.ln();
    while k < from.max(1) + SERIES_CAP {
        let wk = w(k);
        let term = if wk == 0.0 {
            0.0
        } else {
            (ln_lead + (k as f64 - 1.0) * ln_q + wk.ln()).exp()
        };
        sum += term;
        let wn = w(k + 1);
        if wk > 0.0 {
            let rho = wn / wk * q;
            if rho < 1.0 {
                let bound = term * rho / (1.0 - rho);
                if bound <= SERIES_TOL * sum || (sum == 0.0 && term == 0.0) {
                    return Ok(sum);
                }
            }
        }
        k += 1;
    }
    Err(SzegoError::Convergence { s, cap: SERIES_CAP })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn initial_state() {
        let st = oracle_state(0.3, 0.0);
        assert_eq!(st.a, Complex64::new(1.0, 0.0));
        assert_relative_eq!(st.b.re, 0.3, epsilon = 1e-16);
        assert_eq!(st.p.norm(), 0.0);
        let (field, tail) = oracle_field(0.3, 0.0, 5).unwrap();
        assert_relative_eq!(field.get(0).re, 0.3, epsilon = 1e-16);
        assert_eq!(field.get(1), Complex64::new(1.0, 0.0));
        assert!((2..=5).all(|k| field.get(k).norm() == 0.0));
        assert_eq!(tail, 0.0);
    }

    #[test]
    fn modulus_of_p_at_t_delta() {
        for delta in [0.1, 0.3, 0.7] {
            let st = oracle_state(delta, t_delta(delta));
            assert_relative_eq!(
                st.p.norm(),
                2.0 / (4.0 + delta * delta).sqrt(),
                epsilon = 1e-14
            );
            assert_relative_eq!(st.omega * t_delta(delta), PI / 2.0, epsilon = 1e-14);
        }
        assert_relative_eq!(t_delta(0.3), PI / (0.3 * 4.09f64.sqrt()), epsilon = 1e-14);
    }

    #[test]
    fn momentum_is_one() {
        for t in [0.0, 0.4, 1.7, 5.0, 11.3] {
            let st = oracle_state(0.3, t);
            assert_relative_eq!(st.momentum(), 1.0, epsilon = 1e-13);
            assert_relative_eq!(st.mass(), 1.09, epsilon = 1e-13);
            assert_relative_eq!(
                oracle_hs_dot_norm(0.3, t, 0.5).unwrap(),
                1.0,
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn two_mode_norm_at_zero() {
        for s in [0.0, 1.0, 2.0, 3.5] {
            let expected = (0.09 + 2f64.powf(s)).sqrt();
            assert_relative_eq!(
                oracle_hs_norm(0.3, 0.0, s).unwrap(),
                expected,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn series_matches_truncated_sum() {
        let delta = 0.3;
        let t = t_delta(delta);
        let (field, tail) = oracle_field(delta, t, 4000).unwrap();
        let direct = crate::spectral::sobolev_norm(&field, 1.0);
        let total = oracle_hs_norm(delta, t, 1.0).unwrap();
        assert_relative_eq!(
            total,
            (direct * direct + tail * tail).sqrt(),
            max_relative = 1e-11
        );
        assert!(tail < 1e-6);
    }

    #[test]
    fn t_delta_decreasing() {
        let ts: Vec<f64> = (1..20).map(|j| t_delta(j as f64 * 0.05)).collect();
        assert!(ts.windows(2).all(|w| w[1] < w[0]));
    }
}
