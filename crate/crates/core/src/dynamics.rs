//! Time integration of `i u_t + d u_xx = Pi(|u|^2 u)` on the Fourier side,
//! where `d` is the dispersion coefficient (`eps^alpha` by default).
//!
//! In coefficients the equation reads `u_k' = -i d k^2 u_k - i Pi(|u|^2 u)_k`.
//! The linear part is always propagated exactly.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::spectral::{conserved_on, sobolev_norm, CubicEngine, HankelMatrix, SzegoField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Norms above this abort a run as a blow-up.
pub const BLOW_UP_CEILING: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact half linear step, classical RK4 on the nonlinear part, exact
    /// half linear step. Second order.
    Strang,
    /// Classical RK4 in the interaction picture of the linear flow (Lawson).
    /// Fourth order.
    Rk4Full,
}

/// The run contract for [`evolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub epsilon: f64,
    pub alpha: f64,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub monitor_stride: usize,
    /// Sobolev index of the `Hs` monitor column.
    pub sobolev_s: f64,
    /// Plane wave `e_m` used for the orbit-distance monitor; `None` measures
    /// against the dominant mode of each sample.
    pub orbit_mode: Option<usize>,
    dispersion: f64,
}

impl SimParams {
    pub fn new(epsilon: f64, alpha: f64, n: usize, dt: f64, t_final: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(SzegoError::Contract(format!(
                "epsilon = {epsilon} outside (0, 1)"
            )));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(SzegoError::Contract(format!(
                "alpha = {alpha} must be finite and >= 0"
            )));
        }
        if n < 1 {
            return Err(SzegoError::Contract(
                "truncation N must be at least 1".into(),
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) {
            return Err(SzegoError::Contract(format!(
                "dt = {dt} and T = {t_final} must be positive and finite"
            )));
        }
        Ok(Self {
            epsilon,
            alpha,
            n,
            dt,
            t_final,
            scheme: Scheme::Strang,
            monitor_stride: 1,
            sobolev_s: 1.0,
            orbit_mode: None,
            dispersion: epsilon.powf(alpha),
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.monitor_stride = stride.max(1);
        self
    }

    pub fn with_sobolev(mut self, s: f64) -> Self {
        self.sobolev_s = s;
        self
    }

    pub fn with_orbit_mode(mut self, m: usize) -> Self {
        self.orbit_mode = Some(m);
        self
    }

    /// Replaces `eps^alpha` by an explicit coefficient: `0` for the pure
    /// Szegő flow, `nu^2` for the turbulence runs.
    pub fn with_dispersion(mut self, dispersion: f64) -> Self {
        self.dispersion = dispersion;
        self
    }

    pub fn with_horizon(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    /// `ceil(T / dt)`, with a relative slack so that `T = k * dt` up to
    /// rounding gives exactly `k` steps.
    pub fn step_count(&self) -> usize {
        let ratio = self.t_final / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            rounded.max(1.0) as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// The step actually taken: `T / step_count()`.
    pub fn effective_dt(&self) -> f64 {
        self.t_final / self.step_count() as f64
    }
}

/// Reusable integrator state: FFT plans, phase tables and stage buffers.
pub struct Stepper {
    n: usize,
    dt: f64,
    scheme: Scheme,
    engine: CubicEngine,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    k: [Vec<Complex64>; 4],
    stage: Vec<Complex64>,
}

impl Stepper {
    /// Stepper for degree `n` with signed step `dt`.
    pub fn new(n: usize, dispersion: f64, dt: f64, scheme: Scheme) -> Self {
        let phase = |tau: f64| -> Vec<Complex64> {
            (0..=n)
                .map(|k| Complex64::from_polar(1.0, -dispersion * (k * k) as f64 * tau))
                .collect()
        };
        Self {
            n,
            dt,
            scheme,
            engine: CubicEngine::new(n),
            half: phase(dt / 2.0),
            full: phase(dt),
            k: std::array::from_fn(|_| vec![ZERO; n + 1]),
            stage: vec![ZERO; n + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `out = -i Pi(|u|^2 u)`
    fn nonlinear(engine: &mut CubicEngine, u: &[Complex64], out: &mut [Complex64]) {
        engine.apply(u, out);
        for z in out.iter_mut() {
            *z *= -I;
        }
    }

    /// Advances `u` by one step in place.
    pub fn step(&mut self, u: &mut [Complex64]) {
        debug_assert_eq!(u.len(), self.n + 1);
        match self.scheme {
            Scheme::Strang => self.step_strang(u),
            Scheme::Rk4Full => self.step_lawson(u),
        }
    }

    fn step_strang(&mut self, u: &mut [Complex64]) {
        let h = self.dt;
        for (z, e) in u.iter_mut().zip(&self.half) {
            *z *= e;
        }
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        let engine = &mut self.engine;
        Self::nonlinear(engine, u, k1);
        for j in 0..u.len() {
            stage[j] = u[j] + k1[j] * (h / 2.0);
        }
        Self::nonlinear(engine, stage, k2);
        for j in 0..u.len() {
            stage[j] = u[j] + k2[j] * (h / 2.0);
        }
        Self::nonlinear(engine, stage, k3);
        for j in 0..u.len() {
            stage[j] = u[j] + k3[j] * h;
        }
        Self::nonlinear(engine, stage, k4);
        for j in 0..u.len() {
            u[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
            u[j] *= self.half[j];
        }
    }

    fn step_lawson(&mut self, u: &mut [Complex64]) {
        let h = self.dt;
        let (half, full) = (&self.half, &self.full);
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        let engine = &mut self.engine;
        Self::nonlinear(engine, u, k1);
        for j in 0..u.len() {
            stage[j] = half[j] * (u[j] + k1[j] * (h / 2.0));
        }
        Self::nonlinear(engine, stage, k2);
        for j in 0..u.len() {
            stage[j] = half[j] * u[j] + k2[j] * (h / 2.0);
        }
        Self::nonlinear(engine, stage, k3);
        for j in 0..u.len() {
            stage[j] = full[j] * u[j] + half[j] * k3[j] * h;
        }
        Self::nonlinear(engine, stage, k4);
        for j in 0..u.len() {
            u[j] = full[j] * (u[j] + k1[j] * (h / 6.0))
                + half[j] * (k2[j] + k3[j]) * (h / 3.0)
                + k4[j] * (h / 6.0);
        }
    }
}

/// One Strang step of size `p.dt`.
pub fn step_strang(u: &SzegoField, p: &SimParams) -> Result<SzegoField> {
    check_degree(u, p)?;
    let mut stepper = Stepper::new(p.n, p.dispersion, p.dt, Scheme::Strang);
    let mut coeffs = u.coeffs().to_vec();
    stepper.step(&mut coeffs);
    let out = SzegoField::from_vec_unchecked(coeffs);
    if !out.is_finite() {
        return Err(SzegoError::BlowUp {
            time: p.dt,
            reason: "non-finite coefficient after one step".into(),
        });
    }
    Ok(out)
}

fn check_degree(u: &SzegoField, p: &SimParams) -> Result<()> {
    if u.degree() != p.n {
        return Err(SzegoError::Contract(format!(
            "field degree {} does not match N = {}",
            u.degree(),
            p.n
        )));
    }
    Ok(())
}

/// One sampled row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub t: f64,
    pub q: f64,
    pub i: f64,
    pub e: f64,
    pub h1: f64,
    pub hs: f64,
    pub orbit_dist: f64,
}

/// Relative drift `max_t |X(t) - X(0)| / |X(0)|` of the conserved quantities
/// (absolute when `X(0) = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub q: f64,
    pub i: f64,
    pub e: f64,
}

impl Drift {
    pub fn max(&self) -> f64 {
        self.q.max(self.i).max(self.e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SzegoField>,
    pub monitors: Vec<MonitorRow>,
    /// Dispersion coefficient the run used, needed to recompute energies.
    pub dispersion: f64,
    /// State at the end of the run, sampled or not.
    pub final_state: SzegoField,
    pub final_time: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn drift(&self) -> Drift {
        let rel = |get: fn(&MonitorRow) -> f64| -> f64 {
            let Some(first) = self.monitors.first() else {
                return 0.0;
            };
            let x0 = get(first);
            let scale = if x0 == 0.0 { 1.0 } else { x0.abs() };
            self.monitors
                .iter()
                .map(|r| (get(r) - x0).abs() / scale)
                .fold(0.0, f64::max)
        };
        Drift {
            q: rel(|r| r.q),
            i: rel(|r| r.i),
            e: rel(|r| r.e),
        }
    }

    /// CSV with header `t,Q,I,E,H1,Hs,orbit_dist` and round-trip exact
    /// number formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,Q,I,E,H1,Hs,orbit_dist\n");
        for r in &self.monitors {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.t, r.q, r.i, r.e, r.h1, r.hs, r.orbit_dist
            ));
        }
        out
    }
}

/// A run that stopped early, with everything computed up to that point.
#[derive(Debug, Clone)]
pub struct Interrupted {
    pub error: SzegoError,
    pub partial: Trajectory,
}

impl fmt::Display for Interrupted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} samples)", self.error, self.partial.len())
    }
}

impl std::error::Error for Interrupted {}

impl From<Interrupted> for SzegoError {
    fn from(e: Interrupted) -> Self {
        e.error
    }
}

/// `inf_theta ||u - e^{i theta} e_m||_{H^s}`, attained at `theta = arg u_m`.
pub fn orbit_distance(u: &SzegoField, m: usize, s: f64) -> f64 {
    u.coeffs()
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let w = (1.0 + (n * n) as f64).powf(s);
            if n == m {
                w * (c.norm() - 1.0).powi(2)
            } else {
                w * c.norm_sqr()
            }
        })
        .sum::<f64>()
        .sqrt()
}

fn dominant_mode(u: &SzegoField) -> usize {
    u.coeffs()
        .iter()
        .enumerate()
        .fold((0, -1.0), |(best, val), (k, c)| {
            if c.norm_sqr() > val {
                (k, c.norm_sqr())
            } else {
                (best, val)
            }
        })
        .0
}

struct Monitor {
    engine: CubicEngine,
    dispersion: f64,
    s: f64,
    orbit_mode: Option<usize>,
}

impl Monitor {
    fn row(&mut self, t: f64, u: &SzegoField) -> MonitorRow {
        let c = conserved_on(&mut self.engine, u.coeffs(), self.dispersion);
        let m = self.orbit_mode.unwrap_or_else(|| dominant_mode(u));
        MonitorRow {
            t,
            q: c.q,
            i: c.i,
            e: c.e,
            h1: sobolev_norm(u, 1.0),
            hs: sobolev_norm(u, self.s),
            orbit_dist: orbit_distance(u, m, self.s),
        }
    }
}

fn blown_up(u: &[Complex64]) -> Option<String> {
    let l2 = u.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if !l2.is_finite() {
        Some("non-finite coefficient".into())
    } else if l2.sqrt() > BLOW_UP_CEILING {
        Some(format!(
            "L2 norm {:e} exceeds {BLOW_UP_CEILING:e}",
            l2.sqrt()
        ))
    } else {
        None
    }
}

/// Integrates from `t = 0` to `p.t_final` in `p.step_count()` equal steps,
/// sampling the state and monitors every `p.monitor_stride` steps, so the
/// samples are equally spaced. The final state is kept separately.
pub fn evolve(u0: &SzegoField, p: &SimParams) -> std::result::Result<Trajectory, Interrupted> {
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        monitors: Vec::new(),
        dispersion: p.dispersion,
        final_state: u0.clone(),
        final_time: 0.0,
    };
    if let Err(error) = check_degree(u0, p) {
        return Err(Interrupted {
            error,
            partial: traj,
        });
    }
    let nsteps = p.step_count();
    let h = p.effective_dt();
    let mut stepper = Stepper::new(p.n, p.dispersion, h, p.scheme);
    let mut monitor = Monitor {
        engine: CubicEngine::new(p.n),
        dispersion: p.dispersion,
        s: p.sobolev_s,
        orbit_mode: p.orbit_mode,
    };
    let mut record = |traj: &mut Trajectory, t: f64, u: &[Complex64]| -> Option<String> {
        let field = SzegoField::from_vec_unchecked(u.to_vec());
        let row = monitor.row(t, &field);
        traj.times.push(t);
        traj.states.push(field.clone());
        traj.monitors.push(row);
        traj.final_state = field;
        traj.final_time = t;
        (row.hs > BLOW_UP_CEILING || row.h1 > BLOW_UP_CEILING).then(|| {
            format!(
                "Sobolev norm {:e} exceeds {BLOW_UP_CEILING:e}",
                row.hs.max(row.h1)
            )
        })
    };

    let mut u = u0.coeffs().to_vec();
    if let Some(reason) = record(&mut traj, 0.0, &u) {
        return Err(Interrupted {
            error: SzegoError::BlowUp { time: 0.0, reason },
            partial: traj,
        });
    }
    for step in 1..=nsteps {
        stepper.step(&mut u);
        let t = step as f64 * h;
        if let Some(reason) = blown_up(&u) {
            return Err(Interrupted {
                error: SzegoError::BlowUp { time: t, reason },
                partial: traj,
            });
        }
        if step % p.monitor_stride == 0 {
            if let Some(reason) = record(&mut traj, t, &u) {
                return Err(Interrupted {
                    error: SzegoError::BlowUp { time: t, reason },
                    partial: traj,
                });
            }
        }
    }
    traj.final_state = SzegoField::from_vec_unchecked(u);
    traj.final_time = nsteps as f64 * h;
    Ok(traj)
}

/// Runs the same discretisation backwards in time, `t: 0 -> -T`, returning
/// only the final state.
pub fn evolve_backward(u0: &SzegoField, p: &SimParams) -> Result<SzegoField> {
    check_degree(u0, p)?;
    let nsteps = p.step_count();
    let h = p.effective_dt();
    let mut stepper = Stepper::new(p.n, p.dispersion, -h, p.scheme);
    let mut u = u0.coeffs().to_vec();
    for step in 1..=nsteps {
        stepper.step(&mut u);
        if let Some(reason) = blown_up(&u) {
            return Err(SzegoError::BlowUp {
                time: -(step as f64) * h,
                reason,
            });
        }
    }
    Ok(SzegoField::from_vec_unchecked(u))
}

/// Final state only, without monitors.
pub fn evolve_to(u0: &SzegoField, p: &SimParams) -> Result<SzegoField> {
    check_degree(u0, p)?;
    let nsteps = p.step_count();
    let mut stepper = Stepper::new(p.n, p.dispersion, p.effective_dt(), p.scheme);
    let mut u = u0.coeffs().to_vec();
    for step in 1..=nsteps {
        stepper.step(&mut u);
        if let Some(reason) = blown_up(&u) {
            return Err(SzegoError::BlowUp {
                time: step as f64 * p.effective_dt(),
                reason,
            });
        }
    }
    Ok(SzegoField::from_vec_unchecked(u))
}

/// Default-step rule: starting from `p.dt`, halve the step until the energy
/// drift over `[0, window]` is at most `1e-8`. Gives up after
/// `max_halvings` attempts.
pub fn choose_dt(u0: &SzegoField, p: &SimParams, window: f64, max_halvings: usize) -> Result<f64> {
    let mut dt = p.dt;
    for _ in 0..=max_halvings {
        let trial = p.clone().with_dt(dt).with_horizon(window.min(p.t_final));
        let traj = evolve(u0, &trial)?;
        if traj.drift().e <= 1e-8 {
            return Ok(dt);
        }
        dt /= 2.0;
    }
    Err(SzegoError::Contract(format!(
        "energy drift above 1e-8 even at dt = {:e}",
        dt * 2.0
    )))
}

/// A Hamiltonian vector field `v -> X(v)` on truncated fields.
pub trait VectorField {
    fn eval(&self, v: &[Complex64], out: &mut [Complex64]);
}

impl<F: Fn(&[Complex64], &mut [Complex64])> VectorField for F {
    fn eval(&self, v: &[Complex64], out: &mut [Complex64]) {
        self(v, out)
    }
}

/// Tolerance of [`flow_chi`] per unit of `sigma`.
pub const FLOW_TOL: f64 = 1e-10;

/// Solves `d chi / d sigma = scale * X(chi)` from `chi(0) = v` to `sigma`
/// with an adaptive Dormand-Prince 5(4) pair.
pub fn flow_chi_field(
    v: &SzegoField,
    field: &impl VectorField,
    scale: f64,
    sigma: f64,
) -> Result<SzegoField> {
    if !(sigma.abs() <= 1.0) {
        return Err(SzegoError::Contract(format!(
            "|sigma| = {} exceeds 1",
            sigma.abs()
        )));
    }
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // fifth-order weights are the last row of A; E = b5 - b4
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let n = v.degree() + 1;
    let dir = sigma.signum();
    let total = sigma.abs();
    let tol = FLOW_TOL * total.max(1e-3);
    let mut y = v.coeffs().to_vec();
    let mut k: Vec<Vec<Complex64>> = vec![vec![ZERO; n]; 7];
    let mut stage = vec![ZERO; n];
    let mut done = 0.0;
    let mut h = total.min(0.1);
    let rhs = |x: &[Complex64], out: &mut [Complex64]| {
        field.eval(x, out);
        for z in out.iter_mut() {
            *z *= scale * dir;
        }
    };
    rhs(&y, &mut k[0]);
    while done < total {
        if done + h > total {
            h = total - done;
        }
        if h < 1e-14 * total.max(1.0) {
            return Err(SzegoError::FlowDivergence {
                sigma: dir * done,
                step: h,
            });
        }
        for s in 1..7 {
            for j in 0..n {
                let mut acc = y[j];
                for (r, kr) in k.iter().enumerate().take(s) {
                    acc += kr[j] * (h * A[s][r]);
                }
                stage[j] = acc;
            }
            rhs(&stage, &mut k[s]);
        }
        // stage holds the fifth-order solution (FSAL)
        let mut err_sq = 0.0;
        let mut y_sq = 0.0;
        for j in 0..n {
            let mut e = ZERO;
            for (s, ks) in k.iter().enumerate() {
                e += ks[j] * E[s];
            }
            err_sq += (e * h).norm_sqr();
            y_sq += y[j].norm_sqr().max(stage[j].norm_sqr());
        }
        if !err_sq.is_finite() || !y_sq.is_finite() {
            return Err(SzegoError::FlowDivergence {
                sigma: dir * done,
                step: h,
            });
        }
        let scale_norm = y_sq.sqrt().max(1e-300);
        let err = err_sq.sqrt() / (tol * scale_norm);
        if err <= 1.0 {
            done += h;
            y.copy_from_slice(&stage);
            let last = k.pop().expect("seven stages");
            k.insert(0, last);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(SzegoField::from_vec_unchecked(y))
}

/// `chi_sigma(v)` for the Hamiltonian flow of `scale * F`.
pub fn flow_chi<C: crate::poly::Coefficient>(
    v: &SzegoField,
    f: &crate::poly::PolyHamiltonian<C>,
    scale: f64,
    sigma: f64,
) -> Result<SzegoField> {
    if !f.is_real() {
        return Err(SzegoError::Contract(
            "flow generator must be real-valued".into(),
        ));
    }
    let field = crate::poly::CompiledField::new(f, v.degree())?;
    flow_chi_field(v, &field, scale, sigma)
}

/// Operator-norm residual `|| Gamma(t+h) - Gamma(t) - h C(t) ||` of the Lax
/// equation for the Hankel matrix, where `C = B Gamma - Gamma conj(B)` and
/// `B = (i/2) Gamma conj(Gamma) - i T_{|V|^2}`. The flow is the pure Szegő
/// equation, so the residual is `O(h^2)`.
pub fn lax_residual(v: &SzegoField, p: &SimParams, dt_probe: f64) -> Result<f64> {
    if p.dispersion != 0.0 {
        return Err(SzegoError::Contract(
            "the Lax pair holds only for the dispersionless flow".into(),
        ));
    }
    check_degree(v, p)?;
    if !(dt_probe > 0.0) {
        return Err(SzegoError::Contract("dt_probe must be positive".into()));
    }
    let substeps = (dt_probe / p.dt).ceil().max(1.0) as usize;
    let mut stepper = Stepper::new(p.n, 0.0, dt_probe / substeps as f64, Scheme::Rk4Full);
    let mut w = v.coeffs().to_vec();
    for _ in 0..substeps {
        stepper.step(&mut w);
    }
    let later = SzegoField::from_vec_unchecked(w);
    let g0 = HankelMatrix::new(v, p.n).to_dense();
    let g1 = HankelMatrix::new(&later, p.n).to_dense();
    let residual = &g1 - &g0 - lax_derivative(v).scale(dt_probe);
    Ok(operator_norm(&residual))
}

/// `d Gamma / dt` predicted by the Lax pair.
pub fn lax_derivative(v: &SzegoField) -> DMatrix<Complex64> {
    let n = v.degree();
    let size = n + 1;
    let gamma = HankelMatrix::new(v, n).to_dense();
    let gamma_bar = gamma.map(|z| z.conj());
    // |V|^2 coefficients b_d = sum_j V_{j+d} conj(V_j), d in -N..=N
    let bhat = |d: isize| -> Complex64 {
        (0..=n)
            .filter_map(|j| {
                let jd = j as isize + d;
                (0..=n as isize)
                    .contains(&jd)
                    .then(|| v.get(jd as usize) * v.get(j).conj())
            })
            .sum()
    };
    let toeplitz = DMatrix::from_fn(size, size, |r, c| bhat(r as isize - c as isize));
    let b = (&gamma * &gamma_bar).scale(0.5) * I - toeplitz * I;
    let b_bar = b.map(|z| z.conj());
    &b * &gamma - &gamma * b_bar
}

fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_mode_phase_rotation() {
        let amp = c(0.8, 0.3);
        let m = 2;
        let u = SzegoField::plane_wave(m, 6, amp);
        let p = SimParams::new(0.5, 1.0, 6, 1e-2, 1.0).unwrap();
        let one = step_strang(&u, &p).unwrap();
        let freq = p.dispersion() * (m * m) as f64 + amp.norm_sqr();
        let exact = amp * Complex64::from_polar(1.0, -freq * p.dt);
        assert!((one.get(m) - exact).norm() < 1e-9);

        for scheme in [Scheme::Strang, Scheme::Rk4Full] {
            let traj = evolve(&u, &p.clone().with_scheme(scheme)).unwrap();
            let exact = amp * Complex64::from_polar(1.0, -freq * p.t_final);
            assert!((traj.final_state.get(m) - exact).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_stays_zero() {
        let p = SimParams::new(0.3, 0.0, 8, 1e-2, 0.5).unwrap();
        let traj = evolve(&SzegoField::zeros(8), &p).unwrap();
        assert!(traj
            .states
            .iter()
            .all(|s| s.coeffs().iter().all(|z| *z == ZERO)));
        assert_eq!(traj.drift().max(), 0.0);
    }

    #[test]
    fn sampling_counts() {
        let p = SimParams::new(0.3, 0.0, 4, 1e-2, 1.0)
            .unwrap()
            .with_stride(7);
        assert_eq!(p.step_count(), 100);
        let traj = evolve(&SzegoField::plane_wave(1, 4, c(1.0, 0.0)), &p).unwrap();
        // samples at 0, 7, ..., 98; the final step 100 is kept aside
        assert_eq!(traj.len(), 100 / 7 + 1);
        assert_relative_eq!(*traj.times.last().unwrap(), 0.98, epsilon = 1e-12);
        assert_relative_eq!(traj.final_time, 1.0, epsilon = 1e-12);
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        let csv = traj.to_csv();
        assert!(csv.starts_with("t,Q,I,E,H1,Hs,orbit_dist\n"));
        assert_eq!(csv.lines().count(), traj.len() + 1);
    }

    #[test]
    fn degree_mismatch_is_a_contract_error() {
        let p = SimParams::new(0.3, 0.0, 4, 1e-2, 1.0).unwrap();
        let err = evolve(&SzegoField::zeros(5), &p).unwrap_err();
        assert!(matches!(err.error, SzegoError::Contract(_)));
        assert!(SimParams::new(1.0, 0.0, 4, 1e-2, 1.0).is_err());
        assert!(SimParams::new(0.5, 0.0, 4, -1e-2, 1.0).is_err());
    }

    #[test]
    fn large_data_blows_up_with_partial_trajectory() {
        let u = SzegoField::plane_wave(0, 4, c(1e3, 0.0)).add(&SzegoField::plane_wave(
            1,
            4,
            c(1e3, 0.0),
        ));
        let p = SimParams::new(0.3, 0.0, 4, 1e-2, 1.0).unwrap();
        let err = evolve(&u, &p).unwrap_err();
        assert!(matches!(err.error, SzegoError::BlowUp { .. }));
        assert!(!err.partial.is_empty());
    }

    #[test]
    fn orbit_distance_of_plane_waves() {
        let u = SzegoField::plane_wave(1, 4, Complex64::from_polar(1.0, 0.7));
        assert!(orbit_distance(&u, 1, 1.0) < 1e-15);
        let v = SzegoField::plane_wave(1, 4, c(1.5, 0.0));
        assert_relative_eq!(
            orbit_distance(&v, 1, 1.0),
            0.5 * 2f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn flow_of_linear_field_is_exact_rotation() {
        // X = -2i v (the field of N_2), so chi_sigma(v) = e^{-2i scale sigma} v
        let field = |v: &[Complex64], out: &mut [Complex64]| {
            for (o, z) in out.iter_mut().zip(v) {
                *o = -2.0 * I * z;
            }
        };
        let v = SzegoField::from_coeffs(vec![c(0.1, 0.2), c(-0.3, 0.05), c(0.0, 0.1)]).unwrap();
        let out = flow_chi_field(&v, &field, 0.25, 1.0).unwrap();
        let rot = Complex64::from_polar(1.0, -0.5);
        for k in 0..3 {
            assert!((out.get(k) - v.get(k) * rot).norm() < 1e-10);
        }
        assert_eq!(flow_chi_field(&v, &field, 0.25, 0.0).unwrap(), v);
        assert!(flow_chi_field(&v, &field, 0.25, 1.5).is_err());
    }

    #[test]
    fn flow_divergence_on_finite_time_blow_up() {
        // dv/dsigma = v^2 (componentwise) blows up at sigma = 1/v0 = 0.5
        let field = |v: &[Complex64], out: &mut [Complex64]| {
            for (o, z) in out.iter_mut().zip(v) {
                *o = z * z;
            }
        };
        let v = SzegoField::from_coeffs(vec![c(2.0, 0.0), c(0.0, 0.0)]).unwrap();
        let err = flow_chi_field(&v, &field, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, SzegoError::FlowDivergence { .. }));
    }

    #[test]
    fn lax_constant_symbol() {
        let v = SzegoField::plane_wave(0, 3, c(0.7, -0.2));
        let p = SimParams::new(0.5, 0.0, 3, 1e-6, 1.0)
            .unwrap()
            .with_dispersion(0.0);
        assert!(lax_residual(&v, &p, 1e-5).unwrap() < 1e-8);
        assert_eq!(lax_residual(&SzegoField::zeros(3), &p, 1e-3).unwrap(), 0.0);
        let dispersive = SimParams::new(0.5, 0.0, 3, 1e-3, 1.0).unwrap();
        assert!(lax_residual(&v, &dispersive, 1e-3).is_err());
    }
}
