//! Polynomial Hamiltonians in the variables `(v_k, conj v_k)`, `k >= 0`.
//!
//! A [`PolyHamiltonian`] is a finite sum of monomials
//! `c * prod v_{h_i} * prod conj(v_{a_j})`. With exact
//! [`GaussianRational`] coefficients, brackets and cancellations are decided
//! by exact zero tests; `Complex64` coefficients are available for energies
//! whose parameters are not rational.
//!
//! Conventions: the Poisson bracket is
//! `{F, G} = (2/i) sum_k (dF/d(conj v_k) dG/dv_k - dG/d(conj v_k) dF/dv_k)`
//! and the Hamiltonian vector field is `X_H(v)_k = -2i dH/d(conj v_k)`, so
//! that `v' = X_H(v)` is Hamilton's equation.

mod builders;
mod compiled;
mod gaussian;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::error::{Result, SzegoError};
use crate::spectral::SzegoField;

pub use builders::*;
pub use compiled::CompiledField;
pub use gaussian::{parse_rational, GaussianRational};

/// Scalars a polynomial can carry.
pub trait Coefficient: Clone + PartialEq + fmt::Debug + Send + Sync {
    fn zero() -> Self;
    /// The real number `num / den`.
    fn ratio(num: i64, den: i64) -> Self;
    fn imag_unit() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    fn to_complex(&self) -> Complex64;
    /// Multiplicative inverse, `None` for zero.
    fn inv(&self) -> Option<Self>;
    /// `(re, im)` as text for the dump format.
    fn format_parts(&self) -> (String, String);
    fn parse_parts(re: &str, im: &str) -> Result<Self>;

    fn scale_int(&self, k: i64) -> Self {
        self.mul(&Self::ratio(k, 1))
    }
}

impl Coefficient for GaussianRational {
    fn zero() -> Self {
        GaussianRational::zero()
    }
    fn ratio(num: i64, den: i64) -> Self {
        GaussianRational::ratio(num, den)
    }
    fn imag_unit() -> Self {
        GaussianRational::i()
    }
    fn is_zero(&self) -> bool {
        GaussianRational::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        GaussianRational::conj(self)
    }
    fn to_complex(&self) -> Complex64 {
        GaussianRational::to_complex(self)
    }
    fn inv(&self) -> Option<Self> {
        GaussianRational::inv(self)
    }
    fn format_parts(&self) -> (String, String) {
        (self.re.to_string(), self.im.to_string())
    }
    fn parse_parts(re: &str, im: &str) -> Result<Self> {
        Ok(GaussianRational::new(
            parse_rational(re)?,
            parse_rational(im)?,
        ))
    }
}

impl Coefficient for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn ratio(num: i64, den: i64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }
    fn imag_unit() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
    fn inv(&self) -> Option<Self> {
        (!Coefficient::is_zero(self)).then(|| 1.0 / self)
    }
    fn format_parts(&self) -> (String, String) {
        (format!("{:e}", self.re), format!("{:e}", self.im))
    }
    fn parse_parts(re: &str, im: &str) -> Result<Self> {
        let p = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| SzegoError::Parse(format!("not a float: {s:?}")))
        };
        Ok(Complex64::new(p(re)?, p(im)?))
    }
}

/// `prod_{h in holo} v_h * prod_{a in anti} conj(v_a)`, with both index
/// lists sorted. Ordering compares `anti` first, then `holo`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    anti: Vec<u32>,
    holo: Vec<u32>,
}

impl Monomial {
    pub fn new(holo: impl Into<Vec<u32>>, anti: impl Into<Vec<u32>>) -> Self {
        let mut holo = holo.into();
        let mut anti = anti.into();
        holo.sort_unstable();
        anti.sort_unstable();
        Self { anti, holo }
    }

    pub fn holo(&self) -> &[u32] {
        &self.holo
    }

    pub fn anti(&self) -> &[u32] {
        &self.anti
    }

    pub fn degree(&self) -> usize {
        self.holo.len() + self.anti.len()
    }

    /// Complex conjugate: swaps the holomorphic and antiholomorphic factors.
    pub fn conj(&self) -> Self {
        Self {
            anti: self.holo.clone(),
            holo: self.anti.clone(),
        }
    }

    pub fn max_mode(&self) -> Option<u32> {
        self.holo.iter().chain(&self.anti).copied().max()
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            anti: merge(&self.anti, &other.anti),
            holo: merge(&self.holo, &other.holo),
        }
    }

    /// `d/dv_k`: multiplicity of `k` and the monomial with one factor removed.
    fn d_holo(&self, k: u32) -> Option<(i64, Self)> {
        remove_one(&self.holo, k).map(|(mult, holo)| {
            (
                mult,
                Self {
                    anti: self.anti.clone(),
                    holo,
                },
            )
        })
    }

    /// `d/d(conj v_k)`.
    fn d_anti(&self, k: u32) -> Option<(i64, Self)> {
        remove_one(&self.anti, k).map(|(mult, anti)| {
            (
                mult,
                Self {
                    anti,
                    holo: self.holo.clone(),
                },
            )
        })
    }

    fn eval(&self, v: &[Complex64], vbar: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for &h in &self.holo {
            acc *= v[h as usize];
        }
        for &a in &self.anti {
            acc *= vbar[a as usize];
        }
        acc
    }
}

fn merge(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn remove_one(list: &[u32], k: u32) -> Option<(i64, Vec<u32>)> {
    let mult = list.iter().filter(|&&x| x == k).count() as i64;
    if mult == 0 {
        return None;
    }
    let pos = list.iter().position(|&x| x == k).expect("present");
    let mut out = list.to_vec();
    out.remove(pos);
    Some((mult, out))
}

fn distinct(list: &[u32]) -> impl Iterator<Item = u32> + '_ {
    list.iter()
        .enumerate()
        .filter(|(i, x)| *i == 0 || list[i - 1] != **x)
        .map(|(_, x)| *x)
}

/// A polynomial in `(v, conj v)` in canonical form: one entry per monomial,
/// zero coefficients removed.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyHamiltonian<C: Coefficient = GaussianRational> {
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coefficient> Default for PolyHamiltonian<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coefficient> PolyHamiltonian<C> {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, C)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Adds `c * m`, merging with an existing term.
    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = existing.add(&c);
                if sum.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Option<&C> {
        self.terms.get(m)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&C::ratio(-1, 1)))
    }

    pub fn scale(&self, factor: &C) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), c.mul(factor))))
    }

    /// Closed under conjugation: `c_{conj m} = conj(c_m)` for every term,
    /// i.e. the polynomial takes real values.
    pub fn is_real(&self) -> bool {
        self.terms
            .iter()
            .all(|(m, c)| self.terms.get(&m.conj()).is_some_and(|cc| *cc == c.conj()))
    }

    /// Degrees of the terms; a single entry for homogeneous polynomials.
    pub fn degrees(&self) -> BTreeSet<usize> {
        self.terms.keys().map(Monomial::degree).collect()
    }

    /// Every mode index that appears in some term.
    pub fn support_modes(&self) -> BTreeSet<u32> {
        self.terms
            .keys()
            .flat_map(|m| m.holo.iter().chain(&m.anti).copied())
            .collect()
    }

    pub fn max_mode(&self) -> Option<u32> {
        self.terms.keys().filter_map(Monomial::max_mode).max()
    }

    /// `d/d(conj v_k)`.
    pub fn conj_gradient(&self, k: u32) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter_map(|(m, c)| m.d_anti(k).map(|(mult, dm)| (dm, c.scale_int(mult)))),
        )
    }

    /// `d/dv_k`.
    pub fn holo_gradient(&self, k: u32) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter_map(|(m, c)| m.d_holo(k).map(|(mult, dm)| (dm, c.scale_int(mult)))),
        )
    }

    fn by_holo_mode(&self) -> HashMap<u32, Vec<(&Monomial, &C)>> {
        let mut index: HashMap<u32, Vec<(&Monomial, &C)>> = HashMap::new();
        for (m, c) in &self.terms {
            for k in distinct(&m.holo) {
                index.entry(k).or_default().push((m, c));
            }
        }
        index
    }

    /// Accumulates `factor * sum_k dF/d(conj v_k) * dG/dv_k` into `out`.
    fn accumulate_pairing(
        f: &Self,
        g_by_holo: &HashMap<u32, Vec<(&Monomial, &C)>>,
        factor: &C,
        out: &mut BTreeMap<Monomial, C>,
    ) {
        for (mf, cf) in &f.terms {
            for k in distinct(&mf.anti) {
                let Some(partners) = g_by_holo.get(&k) else {
                    continue;
                };
                let (mult_f, df) = mf.d_anti(k).expect("k is an anti index");
                let cf = cf.mul(factor);
                for (mg, cg) in partners {
                    let (mult_g, dg) = mg.d_holo(k).expect("k is a holo index");
                    let coeff = cf.mul(cg).scale_int(mult_f * mult_g);
                    let mono = df.mul(&dg);
                    match out.get_mut(&mono) {
                        Some(existing) => *existing = existing.add(&coeff),
                        None => {
                            out.insert(mono, coeff);
                        }
                    }
                }
            }
        }
    }

    /// The Poisson bracket `{self, other}`; both operands must be real.
    pub fn poisson_bracket(&self, other: &Self) -> Result<Self> {
        if !self.is_real() || !other.is_real() {
            return Err(SzegoError::Contract(
                "Poisson bracket requires real-valued operands".into(),
            ));
        }
        Ok(self.bracket_unchecked(other))
    }

    pub(crate) fn bracket_unchecked(&self, other: &Self) -> Self {
        // 2/i = -2i
        let minus_two_i = C::imag_unit().scale_int(-2);
        let two_i = C::imag_unit().scale_int(2);
        let mut acc = BTreeMap::new();
        Self::accumulate_pairing(self, &other.by_holo_mode(), &minus_two_i, &mut acc);
        Self::accumulate_pairing(other, &self.by_holo_mode(), &two_i, &mut acc);
        Self {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    /// Numerical value at `v`. The imaginary part must vanish up to
    /// `1e-12` times the sum of the term magnitudes.
    pub fn evaluate(&self, v: &SzegoField) -> Result<f64> {
        let z = self.evaluate_complex(v)?;
        let vbar: Vec<Complex64> = v.coeffs().iter().map(|c| c.conj()).collect();
        let magnitude: f64 = self
            .terms
            .iter()
            .map(|(m, c)| (c.to_complex() * m.eval(v.coeffs(), &vbar)).norm())
            .sum();
        if z.im.abs() > 1e-12 * magnitude {
            return Err(SzegoError::ImaginaryResidue {
                residue: z.im.abs(),
                magnitude,
            });
        }
        Ok(z.re)
    }

    /// Value at `v` without the realness check.
    pub fn evaluate_complex(&self, v: &SzegoField) -> Result<Complex64> {
        self.check_modes(v.degree())?;
        let vbar: Vec<Complex64> = v.coeffs().iter().map(|c| c.conj()).collect();
        Ok(self
            .terms
            .iter()
            .map(|(m, c)| c.to_complex() * m.eval(v.coeffs(), &vbar))
            .sum())
    }

    pub(crate) fn check_modes(&self, n: usize) -> Result<()> {
        match self.max_mode() {
            Some(k) if k as usize > n => Err(SzegoError::Contract(format!(
                "polynomial involves mode {k} beyond the truncation {n}"
            ))),
            _ => Ok(()),
        }
    }

    /// `X_H(v)_k = -2i dH/d(conj v_k)(v)`.
    pub fn vector_field(&self, v: &SzegoField) -> Result<SzegoField> {
        if !self.is_real() {
            return Err(SzegoError::Contract(
                "vector field requires a real-valued Hamiltonian".into(),
            ));
        }
        self.check_modes(v.degree())?;
        let compiled = CompiledField::new(self, v.degree())?;
        let mut out = vec![Complex64::new(0.0, 0.0); v.degree() + 1];
        compiled.apply(v.coeffs(), &mut out);
        SzegoField::from_coeffs(out)
    }

    /// Converts coefficients to floating point.
    pub fn to_numeric(&self) -> PolyHamiltonian<Complex64> {
        PolyHamiltonian::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), c.to_complex())))
    }

    /// Largest coefficient modulus, as a float.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.to_complex().norm())
            .fold(0.0, f64::max)
    }

    /// One line per monomial: `re im | holo:k,k | anti:l,l`.
    pub fn dump(&self) -> String {
        let join = |v: &[u32]| {
            v.iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = String::new();
        for (m, c) in &self.terms {
            let (re, im) = c.format_parts();
            out.push_str(&format!(
                "{re} {im} | holo:{} | anti:{}\n",
                join(&m.holo),
                join(&m.anti)
            ));
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut p = Self::zero();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| SzegoError::Parse(format!("line {}: {what}", lineno + 1));
            let mut parts = line.split('|');
            let (Some(coeff), Some(holo), Some(anti), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected `re im | holo:... | anti:...`"));
            };
            let mut nums = coeff.split_whitespace();
            let (Some(re), Some(im), None) = (nums.next(), nums.next(), nums.next()) else {
                return Err(bad("expected two coefficient parts"));
            };
            let c = C::parse_parts(re, im)?;
            let indices = |field: &str, tag: &str| -> Result<Vec<u32>> {
                let rest = field
                    .trim()
                    .strip_prefix(tag)
                    .ok_or_else(|| bad(&format!("missing `{tag}`")))?;
                rest.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<u32>()
                            .map_err(|_| bad(&format!("bad index {s:?}")))
                    })
                    .collect()
            };
            p.add_term(
                Monomial::new(indices(holo, "holo:")?, indices(anti, "anti:")?),
                c,
            );
        }
        Ok(p)
    }
}

impl PolyHamiltonian<GaussianRational> {
    /// Exact value at a point with rational coordinates.
    pub fn evaluate_exact(&self, v: &[GaussianRational]) -> GaussianRational {
        let mut total = GaussianRational::zero();
        for (m, c) in &self.terms {
            let mut acc = c.clone();
            for &h in &m.holo {
                acc = &acc * &v[h as usize];
            }
            for &a in &m.anti {
                acc = &acc * &v[a as usize].conj();
            }
            total = &total + &acc;
        }
        total
    }

    /// `max |c|` over terms, computed exactly and reported as a float.
    pub fn max_abs_exact(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.norm_sqr().to_f64().unwrap_or(f64::INFINITY).sqrt())
            .fold(0.0, f64::max)
    }
}
