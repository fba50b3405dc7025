//! Positive-frequency trigonometric polynomials on the circle.
//!
//! A [`SzegoField`] stores the Fourier coefficients `u_0, ..., u_N` of
//! `u(x) = sum_k u_k e^{ikx}`; negative modes are zero by construction. All
//! integrals are normalised by `dx / 2pi`, so `||e_m||_{L^2} = 1`.
//!
//! The cubic term `Pi(|u|^2 u)` is evaluated without aliasing: the
//! trigonometric product reaches modes `-N..=2N`, and the padded transform
//! uses a grid of at least `3N + 1` points before projecting back onto
//! `0..=N`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fourier coefficients `u_0..=u_N` of an element of `H^s_+`.
#[derive(Debug, Clone, PartialEq)]
pub struct SzegoField {
    coeffs: Vec<Complex64>,
}

impl SzegoField {
    /// The zero field of truncation degree `n`.
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "truncation degree must be at least 1");
        Self {
            coeffs: vec![ZERO; n + 1],
        }
    }

    /// Builds a field from its coefficients; `coeffs.len() - 1` is the
    /// truncation degree.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(SzegoError::Contract(format!(
                "a field needs at least two coefficients, got {}",
                coeffs.len()
            )));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SzegoError::Contract(format!(
                "coefficient {k} is not finite"
            )));
        }
        Ok(Self { coeffs })
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<Complex64>) -> Self {
        debug_assert!(coeffs.len() >= 2);
        Self { coeffs }
    }

    /// `amplitude * e^{imx}` truncated at degree `n`.
    pub fn plane_wave(m: usize, n: usize, amplitude: Complex64) -> Self {
        assert!(m <= n, "mode {m} exceeds truncation {n}");
        let mut field = Self::zeros(n);
        field.coeffs[m] = amplitude;
        field
    }

    /// Truncation degree `N`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient `k`, zero above the truncation.
    pub fn get(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    /// Same function, represented at truncation degree `n` (padding with
    /// zeros or dropping modes above `n`).
    pub fn with_degree(&self, n: usize) -> Self {
        let mut coeffs = vec![ZERO; n + 1];
        for (dst, src) in coeffs.iter_mut().zip(&self.coeffs) {
            *dst = *src;
        }
        Self::from_vec_unchecked(coeffs)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::from_vec_unchecked(self.coeffs.iter().map(|c| c * factor).collect())
    }

    /// Coefficient-wise `self + other`; degrees must match.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.degree(), other.degree());
        Self::from_vec_unchecked(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(Complex64::new(-1.0, 0.0)))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Evaluates `u(x)` directly from the series.
    pub fn eval(&self, x: f64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * x))
            .sum()
    }

    /// Serialises as a JSON array of `[re, im]` pairs indexed from `k = 0`.
    pub fn to_json(&self) -> String {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        serde_json::to_string(&pairs).expect("finite floats always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let pairs: Vec<[f64; 2]> =
            serde_json::from_str(text).map_err(|e| SzegoError::Parse(e.to_string()))?;
        Self::from_coeffs(
            pairs
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        )
    }
}

impl Serialize for SzegoField {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SzegoField {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        Self::from_coeffs(
            pairs
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Coefficients indexed over `-N..=N`; the space where products live before
/// projection.
#[derive(Debug, Clone, PartialEq)]
pub struct BilateralSeries {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl BilateralSeries {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![ZERO; 2 * n + 1],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(isize) -> Complex64) -> Self {
        let coeffs = (-(n as isize)..=n as isize).map(f).collect();
        Self { n, coeffs }
    }

    /// Embeds a positive-frequency field (negative modes zero).
    pub fn embed(u: &SzegoField) -> Self {
        let n = u.degree();
        Self::from_fn(n, |k| if k >= 0 { u.get(k as usize) } else { ZERO })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: isize) -> Complex64 {
        if k.unsigned_abs() > self.n {
            ZERO
        } else {
            self.coeffs[(k + self.n as isize) as usize]
        }
    }

    pub fn set(&mut self, k: isize, value: Complex64) {
        assert!(k.unsigned_abs() <= self.n, "mode {k} outside -N..=N");
        self.coeffs[(k + self.n as isize) as usize] = value;
    }
}

/// The Szegő projector: keeps modes `0..=N`, discards negative ones.
pub fn project_szego(s: &BilateralSeries) -> SzegoField {
    let n = s.degree().max(1);
    SzegoField::from_vec_unchecked((0..=n).map(|k| s.get(k as isize)).collect())
}

/// `( sum_k (1 + k^2)^s |u_k|^2 )^{1/2}`.
pub fn sobolev_norm(u: &SzegoField, s: f64) -> f64 {
    weighted_norm_sq(u.coeffs(), |k| (1.0 + (k * k) as f64).powf(s)).sqrt()
}

/// Homogeneous norm `( sum_k k^{2s} |u_k|^2 )^{1/2}`; at `s = 1/2` its square
/// is the momentum `I(u) = sum_k k |u_k|^2`.
pub fn hs_dot_norm(u: &SzegoField, s: f64) -> f64 {
    weighted_norm_sq(u.coeffs(), |k| (k as f64).powf(2.0 * s)).sqrt()
}

fn weighted_norm_sq(coeffs: &[Complex64], weight: impl Fn(usize) -> f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| weight(k) * c.norm_sqr())
        .sum()
}

/// Smallest 5-smooth integer `>= min`; FFT lengths of this form are fast.
pub fn fft_len(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

/// Grid size used for the cubic term and the `L^4` quadrature at degree `n`.
pub fn padded_len(n: usize) -> usize {
    fft_len(3 * n + 1)
}

/// How `Pi(|u|^2 u)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearityMethod {
    /// Two-stage discrete convolution, `O(N^2)`.
    Direct,
    /// Zero-padded FFT on at least `3N + 1` points.
    Padded,
}

/// Reusable FFT plans and buffers for the cubic term at a fixed degree.
pub struct CubicEngine {
    n: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    grid: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl CubicEngine {
    pub fn new(n: usize) -> Self {
        Self::with_grid(n, padded_len(n))
    }

    /// Engine on an explicit grid size (`len > 2N` is required for an
    /// alias-free projected product).
    pub fn with_grid(n: usize, len: usize) -> Self {
        assert!(len > 2 * n, "grid {len} aliases degree {n}");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            len,
            forward,
            inverse,
            grid: vec![ZERO; len],
            scratch: vec![ZERO; scratch_len],
        }
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn grid_len(&self) -> usize {
        self.len
    }

    /// Samples `u(x_j)`, `x_j = 2 pi j / len`, into the internal buffer.
    fn synthesise(&mut self, u: &[Complex64]) {
        debug_assert!(u.len() <= self.n + 1);
        self.grid.fill(ZERO);
        self.grid[..u.len()].copy_from_slice(u);
        self.inverse
            .process_with_scratch(&mut self.grid, &mut self.scratch);
    }

    /// Writes `Pi(|u|^2 u)` truncated to `0..=N` into `out`.
    pub fn apply(&mut self, u: &[Complex64], out: &mut [Complex64]) {
        self.synthesise(u);
        for z in self.grid.iter_mut() {
            *z *= z.norm_sqr();
        }
        self.forward
            .process_with_scratch(&mut self.grid, &mut self.scratch);
        let scale = 1.0 / self.len as f64;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.grid[k] * scale;
        }
    }

    /// `||u||_{L^4}^4` by the trapezoidal rule on the grid; exact because
    /// `|u|^4` has degree at most `2N < len`.
    pub fn l4_quartic(&mut self, u: &[Complex64]) -> f64 {
        self.synthesise(u);
        self.grid.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() / self.len as f64
    }
}

/// `Pi(|u|^2 u)` via the padded transform.
pub fn cubic_nonlinearity(u: &SzegoField) -> SzegoField {
    cubic_nonlinearity_with(u, NonlinearityMethod::Padded)
}

pub fn cubic_nonlinearity_with(u: &SzegoField, method: NonlinearityMethod) -> SzegoField {
    let mut out = vec![ZERO; u.degree() + 1];
    match method {
        NonlinearityMethod::Direct => cubic_direct(u.coeffs(), &mut out),
        NonlinearityMethod::Padded => CubicEngine::new(u.degree()).apply(u.coeffs(), &mut out),
    }
    SzegoField::from_vec_unchecked(out)
}

/// `Pi(|u|^2 u)` by convolution: first `|u|^2` on `-N..=N`, then its product
/// with `u` restricted to `0..=N`.
pub fn cubic_direct(u: &[Complex64], out: &mut [Complex64]) {
    let n = u.len() - 1;
    // w[d + n] = sum_l u_{l+d} conj(u_l)
    let mut w = vec![ZERO; 2 * n + 1];
    for d in -(n as isize)..=(n as isize) {
        let mut acc = ZERO;
        for l in 0..=n {
            let j = l as isize + d;
            if (0..=n as isize).contains(&j) {
                acc += u[j as usize] * u[l].conj();
            }
        }
        w[(d + n as isize) as usize] = acc;
    }
    for (k, o) in out.iter_mut().enumerate().take(n + 1) {
        let mut acc = ZERO;
        for (j, uj) in u.iter().enumerate() {
            let d = k as isize - j as isize;
            if d.unsigned_abs() <= n {
                acc += w[(d + n as isize) as usize] * uj;
            }
        }
        *o = acc;
    }
}

/// Mass, momentum and energy of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    /// `Q = sum |u_k|^2`
    pub q: f64,
    /// `I = sum k |u_k|^2`
    pub i: f64,
    /// `E = (disp/2) sum k^2 |u_k|^2 + ||u||_{L^4}^4 / 4`
    pub e: f64,
}

/// `Q`, `I` and `E^{alpha,eps}` with dispersion coefficient `eps^alpha`; the
/// `L^4` term uses a quadrature grid of `grid >= 3N + 1` points.
pub fn conserved_quantities(
    u: &SzegoField,
    epsilon: f64,
    alpha: f64,
    grid: usize,
) -> Result<Conserved> {
    conserved_with_dispersion(u, epsilon.powf(alpha), grid)
}

/// As [`conserved_quantities`] with the dispersion coefficient given directly.
pub fn conserved_with_dispersion(
    u: &SzegoField,
    dispersion: f64,
    grid: usize,
) -> Result<Conserved> {
    let n = u.degree();
    if grid < 3 * n + 1 {
        return Err(SzegoError::GridTooSmall {
            grid,
            degree: n,
            required: 3 * n + 1,
        });
    }
    let mut engine = CubicEngine::with_grid(n, grid);
    Ok(conserved_on(&mut engine, u.coeffs(), dispersion))
}

pub(crate) fn conserved_on(
    engine: &mut CubicEngine,
    u: &[Complex64],
    dispersion: f64,
) -> Conserved {
    let mut q = 0.0;
    let mut i = 0.0;
    let mut kinetic = 0.0;
    for (k, c) in u.iter().enumerate() {
        let a = c.norm_sqr();
        let k = k as f64;
        q += a;
        i += k * a;
        kinetic += k * k * a;
    }
    let e = 0.5 * dispersion * kinetic + 0.25 * engine.l4_quartic(u);
    Conserved { q, i, e }
}

/// Coefficient matrix `Gamma_{n,k} = V_{n+k}` of the Hankel operator
/// `h -> Pi(V conj(h))`, truncated to `0 <= n, k <= M`.
#[derive(Debug, Clone)]
pub struct HankelMatrix {
    symbol: Vec<Complex64>,
    size: usize,
}

impl HankelMatrix {
    pub fn new(v: &SzegoField, m: usize) -> Self {
        Self {
            symbol: v.coeffs().to_vec(),
            size: m + 1,
        }
    }

    /// Number of rows (`M + 1`).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, n: usize, k: usize) -> Complex64 {
        self.symbol.get(n + k).copied().unwrap_or(ZERO)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.size, self.size, |n, k| self.entry(n, k))
    }

    pub fn frobenius_sq(&self) -> f64 {
        // anti-diagonal d holds min(d, 2M - d) + 1 copies of V_d
        let m = self.size - 1;
        self.symbol
            .iter()
            .enumerate()
            .take(2 * m + 1)
            .map(|(d, c)| (d.min(2 * m - d) + 1) as f64 * c.norm_sqr())
            .sum()
    }

    /// `Gamma x`
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (n, o) in out.iter_mut().enumerate() {
            let top = self.symbol.len().saturating_sub(n).min(self.size);
            *o = (0..top).map(|k| self.symbol[n + k] * x[k]).sum();
        }
    }

    /// `Gamma^* x`; `Gamma` is complex symmetric so this is `conj(Gamma conj(x))`.
    pub fn apply_adjoint(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let top = self.symbol.len().saturating_sub(k).min(self.size);
            *o = (0..top).map(|n| self.symbol[n + k].conj() * x[n]).sum();
        }
    }
}

/// Matrices up to this size use a dense SVD.
pub const DENSE_SVD_LIMIT: usize = 384;

/// `Tr|H_V|`: the sum of the singular values of the `(M+1) x (M+1)` Hankel
/// matrix of `V`. Requires `M >= N` so that every nonzero anti-diagonal is
/// captured.
pub fn hankel_nuclear_norm(v: &SzegoField, m: usize) -> Result<f64> {
    if m < v.degree() {
        return Err(SzegoError::Contract(format!(
            "Hankel size M = {m} must be at least the truncation N = {}",
            v.degree()
        )));
    }
    // Trailing zero coefficients do not change the nonzero singular values.
    let support = v
        .coeffs()
        .iter()
        .rposition(|c| *c != ZERO)
        .map_or(0, |k| k + 1);
    if support == 0 {
        return Ok(0.0);
    }
    let trimmed = SzegoField::from_vec_unchecked(v.coeffs()[..support.max(2)].to_vec());
    let h = HankelMatrix::new(&trimmed, trimmed.degree());
    if h.size() <= DENSE_SVD_LIMIT {
        Ok(nuclear_norm_dense(&h))
    } else {
        Ok(nuclear_norm_lanczos(&h, 1e-14))
    }
}

pub fn nuclear_norm_dense(h: &HankelMatrix) -> f64 {
    h.to_dense().singular_values().iter().sum()
}

/// Nuclear norm by Golub-Kahan-Lanczos bidiagonalisation with full
/// reorthogonalisation. Singular values below `rel_tol * ||Gamma||_F` are
/// not resolved.
pub fn nuclear_norm_lanczos(h: &HankelMatrix, rel_tol: f64) -> f64 {
    let n = h.size();
    let frob = h.frobenius_sq().sqrt();
    if frob == 0.0 {
        return 0.0;
    }
    let floor = rel_tol * frob;
    let mut us: Vec<Vec<Complex64>> = Vec::new();
    let mut vs: Vec<Vec<Complex64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut seed = 0usize;

    let mut v = start_vector(n, seed, &vs);
    let mut beta_prev = 0.0;
    let mut u_prev: Option<Vec<Complex64>> = None;
    let mut tmp = vec![ZERO; n];

    while vs.len() < n {
        h.apply(&v, &mut tmp);
        if let Some(up) = &u_prev {
            for (t, p) in tmp.iter_mut().zip(up) {
                *t -= *p * beta_prev;
            }
        }
        orthogonalise(&mut tmp, &us);
        let alpha = vec_norm(&tmp);
        vs.push(v.clone());
        betas.push(beta_prev);
        if alpha <= floor {
            alphas.push(0.0);
            // Krylov space exhausted; probe the complement before stopping.
            seed += 1;
            match restart(h, n, seed, &vs, floor) {
                Some(w) => {
                    v = w;
                    beta_prev = 0.0;
                    u_prev = None;
                    continue;
                }
                None => break,
            }
        }
        alphas.push(alpha);
        let u: Vec<Complex64> = tmp.iter().map(|z| z / alpha).collect();

        let mut next = vec![ZERO; n];
        h.apply_adjoint(&u, &mut next);
        for (t, p) in next.iter_mut().zip(&v) {
            *t -= *p * alpha;
        }
        orthogonalise(&mut next, &vs);
        us.push(u.clone());
        let beta = vec_norm(&next);
        if beta <= floor || vs.len() == n {
            seed += 1;
            match restart(h, n, seed, &vs, floor) {
                Some(w) => {
                    v = w;
                    beta_prev = 0.0;
                    u_prev = None;
                    continue;
                }
                None => break,
            }
        }
        v = next.iter().map(|z| z / beta).collect();
        beta_prev = beta;
        u_prev = Some(u);
    }

    // B has alphas on the diagonal; betas[j] (j >= 1) couples column j to
    // row j - 1. A restart contributes a zero coupling.
    let k = alphas.len();
    let b = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            alphas[r]
        } else if c == r + 1 {
            betas[c]
        } else {
            0.0
        }
    });
    b.singular_values().iter().sum()
}

fn start_vector(n: usize, seed: usize, against: &[Vec<Complex64>]) -> Vec<Complex64> {
    // deterministic quasi-random phases and magnitudes
    let golden = 0.618_033_988_749_895_f64;
    let mut v: Vec<Complex64> = (0..n)
        .map(|j| {
            let t = (j as f64 + 1.0) * (seed as f64 + 1.0);
            let phase = std::f64::consts::TAU * (t * t * golden).fract();
            let mag = 0.5 + (t * golden * 0.5).fract();
            Complex64::from_polar(mag, phase)
        })
        .collect();
    orthogonalise(&mut v, against);
    orthogonalise(&mut v, against);
    let norm = vec_norm(&v);
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

fn restart(
    h: &HankelMatrix,
    n: usize,
    seed: usize,
    vs: &[Vec<Complex64>],
    floor: f64,
) -> Option<Vec<Complex64>> {
    if vs.len() >= n {
        return None;
    }
    let w = start_vector(n, seed, vs);
    let mut image = vec![ZERO; n];
    h.apply(&w, &mut image);
    (vec_norm(&image) > floor * (n as f64).sqrt()).then_some(w)
}

fn orthogonalise(x: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for _ in 0..2 {
        for b in basis {
            let proj: Complex64 = b.iter().zip(x.iter()).map(|(bi, xi)| bi.conj() * xi).sum();
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi -= proj * bi;
            }
        }
    }
}

fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
