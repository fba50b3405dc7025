use num_complex::Complex64;

use super::{Coefficient, PolyHamiltonian};
use crate::dynamics::VectorField;
use crate::error::Result;

/// `X_H` flattened into `(target, coefficient, factors)` records so that
/// repeated evaluation (inside an ODE solver) avoids symbolic work.
#[derive(Debug, Clone)]
pub struct CompiledField {
    n: usize,
    targets: Vec<u32>,
    coeffs: Vec<Complex64>,
    /// `offsets[i]..offsets[i+1]` indexes `holo` / `anti` ranges per record
    holo: Vec<u32>,
    holo_off: Vec<usize>,
    anti: Vec<u32>,
    anti_off: Vec<usize>,
}

impl CompiledField {
    /// Compiles `X_H` for fields of degree `n`.
    pub fn new<C: Coefficient>(h: &PolyHamiltonian<C>, n: usize) -> Result<Self> {
        h.check_modes(n)?;
        let mut out = Self {
            n,
            targets: Vec::new(),
            coeffs: Vec::new(),
            holo: Vec::new(),
            holo_off: vec![0],
            anti: Vec::new(),
            anti_off: vec![0],
        };
        let minus_two_i = Complex64::new(0.0, -2.0);
        for (m, c) in h.terms() {
            let c = c.to_complex();
            for k in super::distinct(m.anti()) {
                let (mult, dm) = m.d_anti(k).expect("k is an anti index");
                out.targets.push(k);
                out.coeffs.push(minus_two_i * c * mult as f64);
                out.holo.extend_from_slice(dm.holo());
                out.holo_off.push(out.holo.len());
                out.anti.extend_from_slice(dm.anti());
                out.anti_off.push(out.anti.len());
            }
        }
        Ok(out)
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Writes `X_H(v)` into `out` (both of length `n + 1`).
    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for r in 0..self.targets.len() {
            let mut acc = self.coeffs[r];
            for &h in &self.holo[self.holo_off[r]..self.holo_off[r + 1]] {
                acc *= v[h as usize];
            }
            for &a in &self.anti[self.anti_off[r]..self.anti_off[r + 1]] {
                acc *= v[a as usize].conj();
            }
            out[self.targets[r] as usize] += acc;
        }
    }
}

impl VectorField for CompiledField {
    fn eval(&self, v: &[Complex64], out: &mut [Complex64]) {
        self.apply(v, out)
    }
}
