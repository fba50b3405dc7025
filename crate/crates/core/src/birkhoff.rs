//! Normal-form constructions.
//!
//! Small data: the generator `F` with `{F, H_0} + R = R~`, the global gauge
//! that removes the resonant mass term, and the pull-back by the flow of
//! `eps^2 F`.
//!
//! Plane waves: the frame `u = e^{i theta}(e_m + eps^{1-alpha/2} v)` with
//! `theta = arg u_m`, and the cubic generator `F_m` solving
//! `{F_m, L_m} = -N~_2` with `{F_m, H_0^m} + H_1^m` supported on low modes.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, flow_chi_field, MonitorRow, SimParams, Trajectory};
use crate::error::{Result, SzegoError};
use crate::poly::{
    free_energy, high_mass, plane_wave_cubic, plane_wave_quadratic, quartet_divisor, quartets,
    quartic_remainder, r_tilde, real_part_mode, triples, Coefficient, CompiledField,
    GaussianRational, Monomial, PolyHamiltonian,
};
use crate::spectral::{cubic_nonlinearity, hs_dot_norm, sobolev_norm, SzegoField};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Divisors below this are treated as vanishing.
pub const SMALL_DIVISOR_TOL: f64 = 1e-9;

/// `f_{k1 k2 k3 k4} = i / (4 (k1^2 - k2^2 + k3^2 - k4^2))`, or zero on
/// resonant quartets. Requires `k1 - k2 + k3 = k4`.
pub fn f_coefficient(k1: u32, k2: u32, k3: u32, k4: u32) -> Result<GaussianRational> {
    if k1 as i64 - k2 as i64 + k3 as i64 != k4 as i64 {
        return Err(SzegoError::Contract(format!(
            "({k1}, {k2}, {k3}, {k4}) violates k1 - k2 + k3 = k4"
        )));
    }
    let delta = quartet_divisor([k1, k2, k3, k4]);
    Ok(if delta == 0 {
        GaussianRational::zero()
    } else {
        GaussianRational::imag_ratio(1, 4 * delta)
    })
}

/// Largest truncation accepted by [`build_f`].
pub const MAX_EXACT_N: u32 = 64;

/// `F = sum f_{k1 k2 k3 k4} v_{k1} conj(v_{k2}) v_{k3} conj(v_{k4})` on
/// modes `0..=n`.
pub fn build_f(n: u32) -> Result<PolyHamiltonian> {
    if n > MAX_EXACT_N {
        return Err(SzegoError::Contract(format!(
            "N = {n} exceeds the exact-arithmetic limit {MAX_EXACT_N}"
        )));
    }
    let mut f = PolyHamiltonian::zero();
    for q in quartets(n) {
        let c = f_coefficient(q[0], q[1], q[2], q[3])?;
        f.add_term(Monomial::new(vec![q[0], q[2]], vec![q[1], q[3]]), c);
    }
    debug_assert!(f.is_real());
    Ok(f)
}

/// `{F, H_0} + R - R~`, which vanishes identically.
pub fn small_data_residual(n: u32) -> Result<PolyHamiltonian> {
    let f = build_f(n)?;
    let lhs = f
        .poisson_bracket(&free_energy(n))?
        .add(&quartic_remainder(n));
    Ok(lhs.sub(&r_tilde(n)))
}

/// Gauges a trajectory of `u` into the small-data variable
/// `v(t) = e^{2it eps^2 Q(mu(0))} mu(t)`, `mu = u / eps`.
///
/// The monitors of the result describe `v`: `Q`, `I` and the norms are
/// rescaled, `E` becomes `H_0(v) + eps^2 R(v)`.
pub fn gauge_transform(traj: &Trajectory, epsilon: f64) -> Result<Trajectory> {
    let first = traj
        .monitors
        .first()
        .ok_or_else(|| SzegoError::Contract("empty trajectory".into()))?;
    // eps^2 Q(mu(0)) = Q(u(0))
    let rate = 2.0 * first.q;
    let mut out = Trajectory {
        times: traj.times.clone(),
        states: Vec::with_capacity(traj.states.len()),
        monitors: Vec::with_capacity(traj.monitors.len()),
        dispersion: traj.dispersion,
        final_state: traj
            .final_state
            .scaled(Complex64::from_polar(1.0 / epsilon, rate * traj.final_time)),
        final_time: traj.final_time,
    };
    for ((t, u), row) in traj.times.iter().zip(&traj.states).zip(&traj.monitors) {
        let v = u.scaled(Complex64::from_polar(1.0 / epsilon, rate * t));
        let q = row.q / (epsilon * epsilon);
        let l4 = 4.0 * (row.e - 0.5 * traj.dispersion * hs_dot_norm(u, 1.0).powi(2));
        let energy = 0.5 * hs_dot_norm(&v, 1.0).powi(2)
            + 0.25 * epsilon.powi(2) * (l4 / epsilon.powi(4) - 2.0 * q * q);
        out.monitors.push(MonitorRow {
            t: *t,
            q,
            i: row.i / (epsilon * epsilon),
            e: energy,
            h1: row.h1 / epsilon,
            hs: row.hs / epsilon,
            orbit_dist: row.orbit_dist / epsilon,
        });
        out.states.push(v);
    }
    Ok(out)
}

/// Largest relative residual of
/// `i v_t + v_xx = eps^2 [Pi(|v|^2 v) - 2 ||v||^2 v]` at interior samples,
/// with `v_t` from central differences. Samples must be equally spaced.
pub fn gauged_residual(traj: &Trajectory, epsilon: f64) -> f64 {
    let mut worst = 0.0f64;
    for j in 1..traj.states.len().saturating_sub(1) {
        let h = traj.times[j + 1] - traj.times[j - 1];
        let (prev, v, next) = (&traj.states[j - 1], &traj.states[j], &traj.states[j + 1]);
        let nl = cubic_nonlinearity(v);
        let q = sobolev_norm(v, 0.0).powi(2);
        let mut res = 0.0;
        let mut scale = 0.0;
        for k in 0..=v.degree() {
            let dt = (next.get(k) - prev.get(k)) / h;
            let lhs = I * dt - v.get(k) * (k * k) as f64;
            let rhs = (nl.get(k) - v.get(k) * (2.0 * q)) * epsilon.powi(2);
            res += (lhs - rhs).norm_sqr();
            scale += dt.norm_sqr() + v.get(k).norm_sqr() * (k * k * k * k) as f64;
        }
        if scale > 0.0 {
            worst = worst.max((res / scale).sqrt());
        }
    }
    worst
}

/// Plane-wave frame of a trajectory near `e_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub times: Vec<f64>,
    /// Continuous `arg u_m(t)`.
    pub theta: Vec<f64>,
    /// `phi` with `theta = -(1 + m^2 eps^alpha) t + eps^{min(1, 2-alpha)} phi`.
    pub phi: Vec<f64>,
    pub v_states: Vec<SzegoField>,
    pub m: usize,
    pub epsilon: f64,
    pub alpha: f64,
    /// `max_t |Im v_m(t)|`
    pub max_imag_vm: f64,
}

/// Extracts `theta`, `phi` and `v` from a trajectory near the plane wave `e_m`.
pub fn plane_wave_frame(
    traj: &Trajectory,
    m: usize,
    epsilon: f64,
    alpha: f64,
) -> Result<FrameRecord> {
    let d = epsilon.powf(alpha);
    let eta = epsilon.powf(1.0 - alpha / 2.0);
    let phase_scale = epsilon.powf(1f64.min(2.0 - alpha));
    let mut theta = Vec::with_capacity(traj.len());
    let mut v_states = Vec::with_capacity(traj.len());
    let mut phi = Vec::with_capacity(traj.len());
    let mut max_imag_vm = 0.0f64;
    for (j, (t, u)) in traj.times.iter().zip(&traj.states).enumerate() {
        let um = u.get(m);
        if um.norm() < 1e-6 {
            return Err(SzegoError::FrameDegenerate {
                time: *t,
                modulus: um.norm(),
            });
        }
        let raw = um.arg();
        let th: f64 = match theta.last() {
            None::<&f64> => raw,
            Some(&prev) => {
                let jump = (raw - prev + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
                    - std::f64::consts::PI;
                if jump.abs() >= std::f64::consts::FRAC_PI_2 {
                    return Err(SzegoError::PhaseUnwrap {
                        t0: traj.times[j - 1],
                        t1: *t,
                        jump,
                    });
                }
                prev + jump
            }
        };
        let rotated = u.scaled(Complex64::from_polar(1.0, -th));
        let mut coeffs = rotated.into_coeffs();
        coeffs[m] -= 1.0;
        let v = SzegoField::from_coeffs(coeffs.into_iter().map(|c| c / eta).collect())?;
        max_imag_vm = max_imag_vm.max(v.get(m).im.abs());
        phi.push(((1.0 + (m * m) as f64 * d) * t + th) / phase_scale);
        theta.push(th);
        v_states.push(v);
    }
    Ok(FrameRecord {
        times: traj.times.clone(),
        theta,
        phi,
        v_states,
        m,
        epsilon,
        alpha,
        max_imag_vm,
    })
}

/// Largest residual of the frame equation
///
/// `i v_t + d v_xx - Pi(e^{2imx} conj v) - (1 - m^2 d + eps^{min(1,2-alpha)} phi') v
///   = eps^{min(alpha/2, 1-alpha/2)} phi' e_m + eps^{1-alpha/2} Pi(e^{-imx} v^2 + 2 e^{imx} |v|^2)
///   + eps^{2-alpha} Pi(|v|^2 v)`
///
/// at interior samples (`L^2` norm, central differences in time), relative
/// to the size of the terms.
pub fn frame_residual(frame: &FrameRecord) -> f64 {
    let (eps, alpha, m) = (frame.epsilon, frame.alpha, frame.m);
    let d = eps.powf(alpha);
    let eta = eps.powf(1.0 - alpha / 2.0);
    let c_phase = eps.powf(1f64.min(2.0 - alpha));
    let c_lin = eps.powf((alpha / 2.0).min(1.0 - alpha / 2.0));
    let c_cubic = eps.powf(2.0 - alpha);
    let mut worst = 0.0f64;
    for j in 1..frame.v_states.len().saturating_sub(1) {
        let h = frame.times[j + 1] - frame.times[j - 1];
        let dphi = (frame.phi[j + 1] - frame.phi[j - 1]) / h;
        let v = &frame.v_states[j];
        let n = v.degree();
        // Pi(e^{-imx} v^2 + 2 e^{imx} |v|^2) by direct convolution on modes 0..=n
        let quad: Vec<Complex64> = (0..=n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                // e^{-imx} v^2: sum_{a+b = k+m} v_a v_b
                for a in 0..=n {
                    let b = k as i64 + m as i64 - a as i64;
                    if (0..=n as i64).contains(&b) {
                        acc += v.get(a) * v.get(b as usize);
                    }
                }
                // 2 e^{imx} |v|^2: sum_{a-b = k-m} v_a conj(v_b)
                for a in 0..=n {
                    let b = a as i64 - k as i64 + m as i64;
                    if (0..=n as i64).contains(&b) {
                        acc += 2.0 * v.get(a) * v.get(b as usize).conj();
                    }
                }
                acc
            })
            .collect();
        let cubic = cubic_nonlinearity(v);
        let mut res = 0.0;
        let mut scale = 0.0;
        for k in 0..=n {
            let dt = (frame.v_states[j + 1].get(k) - frame.v_states[j - 1].get(k)) / h;
            let hankel = if k <= 2 * m {
                v.get(2 * m - k).conj()
            } else {
                Complex64::new(0.0, 0.0)
            };
            let lhs = I * dt
                - v.get(k) * (d * (k * k) as f64)
                - hankel
                - v.get(k) * (1.0 - (m * m) as f64 * d + c_phase * dphi);
            let mut rhs = quad[k] * eta + cubic.get(k) * c_cubic;
            if k == m {
                rhs += c_lin * dphi;
            }
            res += (lhs - rhs).norm_sqr();
            scale += (I * dt).norm_sqr() + rhs.norm_sqr();
        }
        if scale > 0.0 {
            worst = worst.max((res / scale).sqrt());
        }
    }
    worst
}

/// One divisor encountered while building `F_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorEntry {
    pub j: u32,
    pub k: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorReport {
    pub entries: Vec<DivisorEntry>,
    pub min_abs: f64,
    pub degenerate: bool,
}

impl DivisorReport {
    fn from_entries(entries: Vec<DivisorEntry>) -> Self {
        let min_abs = entries
            .iter()
            .map(|e| e.value.abs())
            .fold(f64::INFINITY, f64::min);
        Self {
            degenerate: min_abs < SMALL_DIVISOR_TOL,
            entries,
            min_abs,
        }
    }
}

/// Which branch of the homological solution a triple `(j, l, k)` falls in,
/// with the data needed to evaluate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ABranch {
    /// zero padding
    Zero,
    /// `a = i/2`
    Half,
    /// `i (kk - jj) / ((m - jj) D)`, `D = 1 - 2 (kk - m)(kk - jj) d`
    Upper { jj: u32, kk: u32 },
    /// `i (m - kk) / ((m - jj) D)`, same `D`
    Lower { jj: u32, kk: u32 },
    /// `i / (1 - 2 (j - m)(k - m) d)` with both indices above `2m`
    High { j: u32, k: u32 },
}

fn classify(j: u32, l: u32, k: u32, m: u32) -> Result<ABranch> {
    if j as i64 - l as i64 + k as i64 != m as i64 {
        return Err(SzegoError::Contract(format!(
            "({j}, {l}, {k}) violates j - l + k = {m}"
        )));
    }
    let (lo, hi) = (j.min(k), j.max(k));
    Ok(if hi <= 2 * m {
        ABranch::Zero
    } else if lo > 2 * m {
        ABranch::High { j: lo, k: hi }
    } else if lo == m {
        ABranch::Half
    } else if lo > m {
        ABranch::Upper {
            jj: 2 * m - lo,
            kk: hi,
        }
    } else {
        // hi = kk + m - lo with kk >= 2m + 1, otherwise padded with zero
        let kk = hi + lo - m;
        if kk > 2 * m {
            ABranch::Lower { jj: lo, kk }
        } else {
            ABranch::Zero
        }
    })
}

/// The divisor `D` of a branch as a coefficient, with its `(j, k)` label.
fn branch_divisor<C: Coefficient>(branch: ABranch, m: u32, d: &C) -> Option<(u32, u32, C)> {
    let one = C::ratio(1, 1);
    let lin = |x: i64, y: i64| one.sub(&d.scale_int(2 * x * y));
    let m = m as i64;
    match branch {
        ABranch::Upper { jj, kk } | ABranch::Lower { jj, kk } => {
            Some((jj, kk, lin(kk as i64 - m, kk as i64 - jj as i64)))
        }
        ABranch::High { j, k } => Some((j, k, lin(j as i64 - m, k as i64 - m))),
        _ => None,
    }
}

fn a_value<C: Coefficient>(
    j: u32,
    l: u32,
    k: u32,
    m: u32,
    d: &C,
) -> Result<(C, Option<DivisorEntry>)> {
    let branch = classify(j, l, k, m)?;
    let i = C::imag_unit();
    let Some((dj, dk, div)) = branch_divisor(branch, m, d) else {
        return Ok(match branch {
            ABranch::Half => (i.mul(&C::ratio(1, 2)), None),
            _ => (C::zero(), None),
        });
    };
    let value = div.to_complex().re;
    let entry = DivisorEntry {
        j: dj,
        k: dk,
        value,
    };
    if div.to_complex().norm() < SMALL_DIVISOR_TOL {
        return Err(SzegoError::SmallDivisor {
            j: dj,
            k: dk,
            value,
        });
    }
    let inv = div.inv().expect("nonzero divisor");
    let mi = m as i64;
    let a = match branch {
        ABranch::Upper { jj, kk } => i
            .scale_int(kk as i64 - jj as i64)
            .mul(&inv)
            .mul(&C::ratio(1, mi - jj as i64)),
        ABranch::Lower { jj, kk } => i
            .scale_int(mi - kk as i64)
            .mul(&inv)
            .mul(&C::ratio(1, mi - jj as i64)),
        ABranch::High { .. } => i.mul(&inv),
        _ => unreachable!("branches without divisor handled above"),
    };
    Ok((a, Some(entry)))
}

/// `a_{j,l,k}` at dispersion `d = eps^alpha`, in floating point.
pub fn a_coefficient(
    j: u32,
    l: u32,
    k: u32,
    m: u32,
    alpha: f64,
    epsilon: f64,
) -> Result<Complex64> {
    let d = Complex64::new(epsilon.powf(alpha), 0.0);
    Ok(a_value(j, l, k, m, &d)?.0)
}

/// `a_{j,l,k}` for a rational dispersion `d` (`d = 1` at `alpha = 0`), exactly.
pub fn a_coefficient_exact(
    j: u32,
    l: u32,
    k: u32,
    m: u32,
    d: &BigRational,
) -> Result<GaussianRational> {
    Ok(a_value(j, l, k, m, &GaussianRational::real(d.clone()))?.0)
}

/// Every divisor that `F_m` on modes `0..=n` needs at dispersion `d`.
pub fn divisor_report<C: Coefficient>(m: u32, n: u32, d: &C) -> Result<DivisorReport> {
    let mut entries = Vec::new();
    for [j, l, k] in triples(m, n) {
        if j > k {
            continue;
        }
        if let Some((dj, dk, div)) = branch_divisor(classify(j, l, k, m)?, m, d) {
            entries.push(DivisorEntry {
                j: dj,
                k: dk,
                value: div.to_complex().re,
            });
        }
    }
    Ok(DivisorReport::from_entries(entries))
}

/// `F_m = sum_{j-l+k=m} Re(a_{j,l,k} v_j conj(v_l) v_k)` on modes `0..=n`.
pub fn build_fm<C: Coefficient>(
    m: u32,
    n: u32,
    d: &C,
) -> Result<(PolyHamiltonian<C>, DivisorReport)> {
    let report = divisor_report(m, n, d)?;
    if report.degenerate {
        let worst = report
            .entries
            .iter()
            .min_by(|a, b| a.value.abs().total_cmp(&b.value.abs()))
            .expect("degenerate report has entries");
        return Err(SzegoError::SmallDivisor {
            j: worst.j,
            k: worst.k,
            value: worst.value,
        });
    }
    let half = C::ratio(1, 2);
    let mut f = PolyHamiltonian::zero();
    for [j, l, k] in triples(m, n) {
        let (a, _) = a_value(j, l, k, m, d)?;
        if a.is_zero() {
            continue;
        }
        let a = a.mul(&half);
        f.add_term(Monomial::new(vec![j, k], vec![l]), a.clone());
        f.add_term(Monomial::new(vec![l], vec![j, k]), a.conj());
    }
    Ok((f, report))
}

/// Exact `F_m` at `alpha = 0`.
pub fn build_fm_exact(m: u32, n: u32) -> Result<PolyHamiltonian> {
    Ok(build_fm(m, n, &GaussianRational::ratio(1, 1))?.0)
}

/// `R_m = {F_m, H_0^m} + H_1^m` at dispersion `d`.
pub fn plane_wave_remainder<C: Coefficient>(m: u32, n: u32, d: &C) -> Result<PolyHamiltonian<C>> {
    let (fm, _) = build_fm(m, n, d)?;
    Ok(fm
        .poisson_bracket(&plane_wave_quadratic(m, n, d))?
        .add(&plane_wave_cubic(m, n)))
}

/// `{F_m, L_m} + N~_2`, which vanishes identically.
pub fn plane_wave_mass_residual<C: Coefficient>(
    m: u32,
    n: u32,
    d: &C,
) -> Result<PolyHamiltonian<C>> {
    let (fm, _) = build_fm(m, n, d)?;
    Ok(fm
        .poisson_bracket(&real_part_mode(m))?
        .add(&high_mass(m, n)))
}

/// Largest coefficient of `p` among monomials involving a mode `> max_mode`.
pub fn max_coefficient_above<C: Coefficient>(p: &PolyHamiltonian<C>, max_mode: u32) -> f64 {
    p.terms()
        .filter(|(mono, _)| mono.max_mode().is_some_and(|k| k > max_mode))
        .map(|(_, c)| c.to_complex().norm())
        .fold(0.0, f64::max)
}

/// Largest coefficient of a cubic term `v_j conj(v_l) v_k` (or its conjugate)
/// that the generator `F_m` is built to cancel: both `l > 2m` and
/// `max(j, k) > 2m`. Terms with `l <= 2m` or `j, k <= 2m` form the low-mode
/// remainder, which is free to reach modes up to `3m`.
pub fn max_high_resonance<C: Coefficient>(p: &PolyHamiltonian<C>, m: u32) -> f64 {
    p.terms()
        .filter(|(mono, _)| {
            let (pair, single) = if mono.holo().len() == 2 {
                (mono.holo(), mono.anti())
            } else {
                (mono.anti(), mono.holo())
            };
            if pair.len() != 2 || single.len() != 1 {
                return false;
            }
            pair[1] > 2 * m && single[0] > 2 * m
        })
        .map(|(_, c)| c.to_complex().norm())
        .fold(0.0, f64::max)
}

/// `F_m` at `d = eps^alpha` in floating point.
pub fn build_fm_float(
    m: u32,
    n: u32,
    alpha: f64,
    epsilon: f64,
) -> Result<(PolyHamiltonian<Complex64>, DivisorReport)> {
    build_fm(m, n, &Complex64::new(epsilon.powf(alpha), 0.0))
}

/// Deviation of `||w(t)||_{H^s}^2` from its initial value, where
/// `w = chi_{-1}(v)` pulls the gauged small-data variable back through the
/// flow of `eps^2 F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormDrift {
    pub epsilon: f64,
    pub s: f64,
    pub times: Vec<f64>,
    /// `||w(t)||_{H^s}^2`
    pub w_norm_sq: Vec<f64>,
    /// `||v(t)||_{H^s}^2`, for comparison
    pub v_norm_sq: Vec<f64>,
    pub max_w_deviation: f64,
    pub max_v_deviation: f64,
}

/// Runs `u0 = eps * mu0` at `alpha = 0` and tracks the pulled-back norm.
///
/// `params` supplies the integrator, step and horizon; its `epsilon` and
/// `alpha` are overridden.
pub fn normal_form_drift(
    mu0: &SzegoField,
    epsilon: f64,
    s: f64,
    params: &SimParams,
) -> Result<NormalFormDrift> {
    let n = mu0.degree();
    let mut p = params.clone().with_dispersion(1.0);
    p.epsilon = epsilon;
    p.alpha = 0.0;
    let u0 = mu0.scaled(Complex64::new(epsilon, 0.0));
    let traj = evolve(&u0, &p)?;
    let gauged = gauge_transform(&traj, epsilon)?;
    let f = build_f(n as u32)?.to_numeric();
    let field = CompiledField::new(&f, n)?;
    let mut w_norm_sq = Vec::with_capacity(gauged.len());
    let mut v_norm_sq = Vec::with_capacity(gauged.len());
    for v in &gauged.states {
        let w = flow_chi_field(v, &field, epsilon * epsilon, -1.0)?;
        w_norm_sq.push(sobolev_norm(&w, s).powi(2));
        v_norm_sq.push(sobolev_norm(v, s).powi(2));
    }
    let dev = |xs: &[f64]| xs.iter().map(|x| (x - xs[0]).abs()).fold(0.0, f64::max);
    Ok(NormalFormDrift {
        epsilon,
        s,
        times: gauged.times,
        max_w_deviation: dev(&w_norm_sq),
        max_v_deviation: dev(&v_norm_sq),
        w_norm_sq,
        v_norm_sq,
    })
}

/// Resonant index tuples of the quartic or sextic interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub order: u32,
    pub n: u32,
    pub count: usize,
    /// Order 4: the brute-force set equals the pairing characterisation.
    pub pairing_matches: Option<bool>,
    /// Order 6: tuples whose holomorphic and antiholomorphic index multisets
    /// differ and with `k5 != k6`.
    pub nontrivial_k5_ne_k6: Vec<[u32; 6]>,
    pub tuples: Vec<Vec<u32>>,
}

/// Brute-force enumeration of nonnegative tuples with
/// `k1 - k2 + k3 - k4 (+ k5 - k6) = 0` and the same alternating sum of squares.
pub fn enumerate_resonances(order: u32, n: u32) -> Result<ResonanceReport> {
    match order {
        4 if n <= 64 => {
            let tuples: Vec<[u32; 4]> = quartets(n).filter(|q| quartet_divisor(*q) == 0).collect();
            let paired =
                |[k1, k2, k3, k4]: [u32; 4]| (k1 == k2 && k3 == k4) || (k1 == k4 && k2 == k3);
            let mut expected: Vec<[u32; 4]> = quartets(n).filter(|q| paired(*q)).collect();
            expected.sort_unstable();
            let mut got = tuples.clone();
            got.sort_unstable();
            Ok(ResonanceReport {
                order,
                n,
                count: tuples.len(),
                pairing_matches: Some(got == expected),
                nontrivial_k5_ne_k6: Vec::new(),
                tuples: tuples.iter().map(|t| t.to_vec()).collect(),
            })
        }
        6 if n <= 24 => {
            let mut tuples = Vec::new();
            let mut nontrivial = Vec::new();
            let sq = |k: u32| (k as i64) * (k as i64);
            for k1 in 0..=n {
                for k2 in 0..=n {
                    for k3 in 0..=n {
                        for k4 in 0..=n {
                            for k5 in 0..=n {
                                let k6 = k1 as i64 - k2 as i64 + k3 as i64 - k4 as i64 + k5 as i64;
                                if !(0..=n as i64).contains(&k6) {
                                    continue;
                                }
                                let k6 = k6 as u32;
                                if sq(k1) - sq(k2) + sq(k3) - sq(k4) + sq(k5) - sq(k6) != 0 {
                                    continue;
                                }
                                let t = [k1, k2, k3, k4, k5, k6];
                                let mut holo = [k1, k3, k5];
                                let mut anti = [k2, k4, k6];
                                holo.sort_unstable();
                                anti.sort_unstable();
                                if holo != anti && k5 != k6 {
                                    nontrivial.push(t);
                                }
                                tuples.push(t.to_vec());
                            }
                        }
                    }
                }
            }
            Ok(ResonanceReport {
                order,
                n,
                count: tuples.len(),
                pairing_matches: None,
                nontrivial_k5_ne_k6: nontrivial,
                tuples,
            })
        }
        4 | 6 => Err(SzegoError::Contract(format!(
            "N = {n} too large for order-{order} enumeration"
        ))),
        _ => Err(SzegoError::Contract(format!(
            "order must be 4 or 6, got {order}"
        ))),
    }
}

/// Exact rational `p / q`, a convenience for dispersion values.
pub fn rational(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Outcome of one verification case, as written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub case: String,
    pub m: Option<u32>,
    #[serde(rename = "N")]
    pub n: u32,
    pub alpha_mode: String,
    pub max_residual: f64,
    pub support_ok: bool,
    pub divisor_report: Option<DivisorReport>,
}

impl VerificationReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.support_ok && self.max_residual <= tolerance
    }
}

/// How the dispersion enters the plane-wave checks.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaMode {
    /// `alpha = 0`, exact arithmetic.
    Exact,
    /// A rational dispersion `d = p / q`, exact arithmetic.
    Rational(i64, i64),
    /// A floating dispersion, with low-mode support checked up to `1e-9`.
    Float(f64),
}

impl AlphaMode {
    fn label(&self) -> String {
        match self {
            AlphaMode::Exact => "exact".into(),
            AlphaMode::Rational(p, q) => format!("rational:{p}/{q}"),
            AlphaMode::Float(d) => format!("float:{d}"),
        }
    }
}

/// `{F, H_0} + R = R~` on modes `0..=n`.
pub fn verify_small_data(n: u32) -> Result<VerificationReport> {
    let res = small_data_residual(n)?;
    Ok(VerificationReport {
        case: "bracket".into(),
        m: None,
        n,
        alpha_mode: "exact".into(),
        max_residual: res.max_abs_exact(),
        support_ok: res.is_zero(),
        divisor_report: None,
    })
}

/// The two plane-wave homological identities for one `(m, n)`:
/// `{F_m, L_m} = -N~_2` (reported as `max_residual`) and
/// `supp({F_m, H_0^m} + H_1^m) in 0..=3m` (reported as `support_ok`).
pub fn verify_homological(m: u32, n: u32, mode: &AlphaMode) -> Result<VerificationReport> {
    fn run<C: Coefficient>(m: u32, n: u32, d: &C, tol: f64) -> Result<(f64, bool, DivisorReport)> {
        let report = divisor_report(m, n, d)?;
        let mass = plane_wave_mass_residual(m, n, d)?;
        let rem = plane_wave_remainder(m, n, d)?;
        let support_ok = if tol == 0.0 {
            rem.support_modes().iter().all(|&k| k <= 3 * m)
        } else {
            max_coefficient_above(&rem, 3 * m) < tol && max_high_resonance(&rem, m) < tol
        };
        Ok((mass.max_abs_coefficient(), support_ok, report))
    }
    let (max_residual, support_ok, divisors) = match mode {
        AlphaMode::Exact => run(m, n, &GaussianRational::ratio(1, 1), 0.0)?,
        AlphaMode::Rational(p, q) => run(m, n, &GaussianRational::real(rational(*p, *q)), 0.0)?,
        AlphaMode::Float(d) => run(m, n, &Complex64::new(*d, 0.0), 1e-9)?,
    };
    Ok(VerificationReport {
        case: "homological".into(),
        m: Some(m),
        n,
        alpha_mode: mode.label(),
        max_residual,
        support_ok,
        divisor_report: Some(divisors),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Scheme;

    type Q = GaussianRational;

    #[test]
    fn f_coefficient_examples() {
        assert_eq!(f_coefficient(1, 0, 1, 2).unwrap(), Q::imag_ratio(-1, 8));
        assert_eq!(f_coefficient(2, 1, 0, 1).unwrap(), Q::imag_ratio(1, 8));
        assert!(f_coefficient(3, 3, 5, 5).unwrap().is_zero());
        assert!(f_coefficient(1, 0, 1, 1).is_err());
    }

    #[test]
    fn f_is_trivial_at_n_one() {
        assert!(build_f(1).unwrap().is_zero());
        assert!(build_f(65).is_err());
    }

    #[test]
    fn f_is_real_and_bounded() {
        let f = build_f(10).unwrap();
        assert!(f.is_real());
        assert!(f.max_abs_exact() <= 0.25);
        assert_eq!(f.degrees().into_iter().collect::<Vec<_>>(), vec![4]);
    }

    #[test]
    fn small_data_identity_small_n() {
        for n in 1..=5 {
            assert!(small_data_residual(n).unwrap().is_zero(), "N = {n}");
        }
    }

    #[test]
    fn a_coefficient_examples() {
        for m in 0..3u32 {
            for k in 2 * m + 1..2 * m + 6 {
                assert_eq!(
                    a_coefficient_exact(m, k, k, m, &rational(1, 1)).unwrap(),
                    Q::imag_ratio(1, 2)
                );
                assert_eq!(
                    a_coefficient_exact(k, k, m, m, &rational(1, 1)).unwrap(),
                    Q::imag_ratio(1, 2)
                );
            }
        }
        assert_eq!(
            a_coefficient_exact(1, 2, 1, 0, &rational(1, 1)).unwrap(),
            Q::imag_ratio(-1, 1)
        );
        let z = a_coefficient(1, 2, 1, 0, 0.0, 0.5).unwrap();
        assert!((z - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(a_coefficient_exact(1, 1, 1, 0, &rational(1, 1)).is_err());
        // low-frequency padding
        assert!(a_coefficient_exact(0, 1, 2, 1, &rational(1, 1))
            .unwrap()
            .is_zero());
        assert!(a_coefficient_exact(0, 2, 3, 1, &rational(1, 1))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn a_coefficient_symmetric_and_bounded() {
        for m in 1..=2u32 {
            let mut sup = 0.0f64;
            for [j, l, k] in triples(m, 20) {
                let a = a_coefficient_exact(j, l, k, m, &rational(1, 1)).unwrap();
                assert_eq!(a, a_coefficient_exact(k, l, j, m, &rational(1, 1)).unwrap());
                sup = sup.max(a.to_complex().norm());
            }
            assert_eq!(sup, 0.5);
        }
    }

    #[test]
    fn small_divisor_detected() {
        // d = 1/(2(j-m)(k-m)) kills 1 - 2(j-m)(k-m) d; m = 0, j = k = 1 -> d = 1/2
        let err = build_fm(0, 3, &Q::ratio(1, 2)).unwrap_err();
        assert!(matches!(err, SzegoError::SmallDivisor { .. }));
        let report = divisor_report(0, 3, &Complex64::new(0.5, 0.0)).unwrap();
        assert!(report.degenerate);
        assert!(a_coefficient(1, 2, 1, 0, 1.0, 0.5).is_err());
    }

    #[test]
    fn plane_wave_identities_small_n() {
        let one = Q::ratio(1, 1);
        for m in 0..=2u32 {
            let n = 3 * m + 6;
            assert!(
                plane_wave_mass_residual(m, n, &one).unwrap().is_zero(),
                "m = {m}"
            );
            let rem = plane_wave_remainder(m, n, &one).unwrap();
            assert!(
                rem.support_modes().iter().all(|&k| k <= 3 * m),
                "m = {m}: {:?}",
                rem.support_modes()
            );
        }
        let r0 = plane_wave_remainder(0, 8, &one).unwrap();
        assert!(r0.support_modes().iter().all(|&k| k == 0));
    }

    #[test]
    fn resonance_small_cases() {
        let r = enumerate_resonances(4, 1).unwrap();
        let mut got: Vec<Vec<u32>> = r.tuples.clone();
        got.sort();
        let mut expected = vec![
            vec![0, 0, 0, 0],
            vec![1, 1, 1, 1],
            vec![0, 0, 1, 1],
            vec![1, 1, 0, 0],
            vec![0, 1, 1, 0],
            vec![1, 0, 0, 1],
        ];
        expected.sort();
        assert_eq!(got, expected);
        assert_eq!(
            enumerate_resonances(4, 4).unwrap().pairing_matches,
            Some(true)
        );
        let six = enumerate_resonances(6, 4).unwrap();
        assert!(six.nontrivial_k5_ne_k6.contains(&[0, 1, 3, 1, 3, 4]));
        assert!(enumerate_resonances(5, 3).is_err());
        assert!(enumerate_resonances(6, 25).is_err());
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gauge_of_constant_data() {
        let eps = 0.2;
        let amp = c(0.6, 0.8) * 1.3;
        let u0 = SzegoField::plane_wave(0, 4, amp * eps);
        let p = SimParams::new(eps, 0.0, 4, 1e-3, 2.0)
            .unwrap()
            .with_scheme(Scheme::Rk4Full)
            .with_stride(100);
        let traj = evolve(&u0, &p).unwrap();
        let g = gauge_transform(&traj, eps).unwrap();
        assert_eq!(g.states[0], u0.scaled(c(1.0 / eps, 0.0)));
        for (t, v) in g.times.iter().zip(&g.states) {
            let exact = amp * Complex64::from_polar(1.0, t * eps * eps * amp.norm_sqr());
            assert!((v.get(0) - exact).norm() < 1e-10, "t = {t}");
        }
        for (row, v) in g.monitors.iter().zip(&g.states) {
            assert!((row.h1 - sobolev_norm(v, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn gauged_equation_residual_shrinks_with_sampling() {
        let eps = 0.3;
        let u0 =
            SzegoField::from_coeffs(vec![c(0.1, 0.0), c(0.2, 0.1), c(-0.05, 0.1), c(0.0, 0.03)])
                .unwrap();
        let u0 = u0.scaled(c(eps / sobolev_norm(&u0, 1.0), 0.0));
        let base = SimParams::new(eps, 0.0, 3, 1e-4, 0.5)
            .unwrap()
            .with_scheme(Scheme::Rk4Full);
        let coarse =
            gauge_transform(&evolve(&u0, &base.clone().with_stride(40)).unwrap(), eps).unwrap();
        let fine = gauge_transform(&evolve(&u0, &base.with_stride(20)).unwrap(), eps).unwrap();
        let (rc, rf) = (gauged_residual(&coarse, eps), gauged_residual(&fine, eps));
        assert!(rf < 1e-4, "{rf}");
        assert!(rc / rf > 3.0 && rc / rf < 5.0, "{rc} {rf}");
    }

    #[test]
    fn frame_of_exact_plane_wave() {
        let (eps, alpha, m) = (0.1, 0.0, 1usize);
        let amp = 1.0 + eps;
        let u0 = SzegoField::plane_wave(m, 4, c(amp, 0.0));
        let p = SimParams::new(eps, alpha, 4, 1e-3, 3.0)
            .unwrap()
            .with_scheme(Scheme::Rk4Full)
            .with_stride(50);
        let traj = evolve(&u0, &p).unwrap();
        let frame = plane_wave_frame(&traj, m, eps, alpha).unwrap();
        for v in &frame.v_states {
            assert!((v.get(m) - c((amp - 1.0) / eps, 0.0)).norm() < 1e-9);
        }
        // theta = -(1 + m^2 eps^alpha + |c|^2 - 1) t, so phi' = -(amp^2 - 1) / eps
        let k = frame.phi.len() - 1;
        let slope = (frame.phi[k] - frame.phi[0]) / (frame.times[k] - frame.times[0]);
        assert!((slope + (amp * amp - 1.0) / eps).abs() < 1e-8, "{slope}");
        assert!(frame.max_imag_vm < 1e-12);
        assert!(frame_residual(&frame) < 1e-6);
    }

    #[test]
    fn frame_rejects_vanishing_mode_and_sparse_sampling() {
        let u0 = SzegoField::plane_wave(2, 4, c(1.0, 0.0));
        let p = SimParams::new(0.1, 0.0, 4, 1e-2, 4.0)
            .unwrap()
            .with_stride(40);
        let traj = evolve(&u0, &p).unwrap();
        assert!(matches!(
            plane_wave_frame(&traj, 1, 0.1, 0.0),
            Err(SzegoError::FrameDegenerate { .. })
        ));
        // e_2 rotates at 1 + 4 = 5 rad per unit time, so 2 rad between samples
        assert!(matches!(
            plane_wave_frame(&traj, 2, 0.1, 0.0),
            Err(SzegoError::PhaseUnwrap { .. })
        ));
    }

    #[test]
    fn frame_residual_on_perturbed_wave() {
        let (eps, m) = (0.1, 1usize);
        for alpha in [0.0, 1.0] {
            let n = 12;
            let mut coeffs: Vec<Complex64> = (0..=n)
                .map(|k| Complex64::from_polar((1.0 + (k * k) as f64).powf(-0.8), 0.7 * k as f64))
                .collect();
            let f = SzegoField::from_coeffs(coeffs.clone()).unwrap();
            let norm = sobolev_norm(&f, 1.0);
            coeffs.iter_mut().for_each(|z| *z *= eps / norm);
            coeffs[m] += 1.0;
            let u0 = SzegoField::from_coeffs(coeffs).unwrap();
            let base = SimParams::new(eps, alpha, n, 1e-4, 1.0)
                .unwrap()
                .with_scheme(Scheme::Rk4Full);
            let coarse = plane_wave_frame(
                &evolve(&u0, &base.clone().with_stride(10)).unwrap(),
                m,
                eps,
                alpha,
            )
            .unwrap();
            let fine = plane_wave_frame(&evolve(&u0, &base.with_stride(5)).unwrap(), m, eps, alpha)
                .unwrap();
            assert!(fine.max_imag_vm < 1e-8);
            let (rc, rf) = (frame_residual(&coarse), frame_residual(&fine));
            assert!(rf < 1e-3, "alpha {alpha}: {rf}");
            assert!(rc / rf > 3.5 && rc / rf < 4.5, "alpha {alpha}: {rc} {rf}");
        }
    }

    #[test]
    fn general_dispersion_cancels_high_modes() {
        let d = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        for m in 1..=2u32 {
            let rem = plane_wave_remainder(m, 12, &d).unwrap();
            assert!(max_high_resonance(&rem, m) < 1e-9, "m = {m}");
            assert!(max_coefficient_above(&rem, 3 * m) < 1e-9, "m = {m}");
            // the low block does reach past 2m through the conjugated index
            assert!(max_coefficient_above(&rem, 2 * m) > 0.1);
        }
        let r = verify_homological(1, 10, &AlphaMode::Rational(2, 7)).unwrap();
        assert!(r.passed(0.0), "{r:?}");
        let r = verify_homological(2, 12, &AlphaMode::Float(d.re)).unwrap();
        assert!(r.passed(1e-9), "{r:?}");
    }

    #[test]
    fn homological_check_sees_broken_generator() {
        let (fm, _) = build_fm(1, 8, &Q::ratio(1, 1)).unwrap();
        let (drop, _) = fm.terms().next().unwrap();
        let broken = PolyHamiltonian::from_terms(
            fm.terms()
                .filter(|(mono, _)| *mono != drop && *mono != &drop.conj())
                .map(|(mono, c)| (mono.clone(), c.clone())),
        );
        let res = broken
            .poisson_bracket(&real_part_mode(1))
            .unwrap()
            .add(&high_mass(1, 8));
        let rem = broken
            .poisson_bracket(&plane_wave_quadratic(1, 8, &Q::ratio(1, 1)))
            .unwrap()
            .add(&plane_wave_cubic(1, 8));
        assert!(!res.is_zero() || rem.support_modes().iter().any(|&k| k > 3));
    }
    #[test]
    fn pulled_back_norm_drifts_at_fourth_order() {
        let n = 10usize;
        let coeffs: Vec<Complex64> = (0..=n)
            .map(|k| {
                Complex64::from_polar(
                    (1.0 + (k * k) as f64).powf(-0.8),
                    1.3 * (k * k) as f64 + 0.4 * k as f64,
                )
            })
            .collect();
        let mu = SzegoField::from_coeffs(coeffs).unwrap();
        let mu = mu.scaled(c(1.0 / sobolev_norm(&mu, 1.0), 0.0));
        let p = SimParams::new(0.5, 0.0, n, 2e-3, 20.0)
            .unwrap()
            .with_stride(250);
        let big = normal_form_drift(&mu, 0.1, 1.0, &p).unwrap();
        let small = normal_form_drift(&mu, 0.05, 1.0, &p).unwrap();
        let ratio = big.max_w_deviation / small.max_w_deviation;
        assert!((8.0..=32.0).contains(&ratio), "{ratio}");
        // without the pull-back the drift is only second order
        let ratio_v = big.max_v_deviation / small.max_v_deviation;
        assert!(ratio_v < 6.0, "{ratio_v}");
    }
}
