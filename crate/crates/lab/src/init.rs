//! Initial data: `plane:m=<int>`, `plane-plus:m=<int>,delta=<float>`,
//! `perturbed:m=<int>,eps=<float>,s=<float>,seed=<int>` and `file:<path>`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use szego_core::{sobolev_norm, SzegoField};

use crate::error::{LabError, LabResult};

/// Spectral decay offset of sampled perturbations: `|f_k| ~ (1+k^2)^{-(s+0.6)/2}`.
pub const DECAY_OFFSET: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Plane {
        m: usize,
    },
    PlanePlus {
        m: usize,
        delta: f64,
    },
    Perturbed {
        m: usize,
        eps: f64,
        s: f64,
        seed: u64,
    },
    File(PathBuf),
}

impl InitSpec {
    /// The field on modes `0..=n`.
    pub fn build(&self, n: usize) -> LabResult<SzegoField> {
        let need = |m: usize| {
            if m > n {
                Err(LabError::BadInput(format!(
                    "mode {m} exceeds truncation N = {n}"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            InitSpec::Plane { m } => {
                need(m)?;
                Ok(SzegoField::plane_wave(m, n, Complex64::new(1.0, 0.0)))
            }
            InitSpec::PlanePlus { m, delta } => {
                need(m)?;
                let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
                coeffs[m] = Complex64::new(1.0, 0.0);
                coeffs[0] += delta;
                Ok(SzegoField::from_coeffs(coeffs)?)
            }
            InitSpec::Perturbed { m, eps, s, seed } => {
                need(m)?;
                let f = unit_perturbation(n, s, seed);
                let mut coeffs: Vec<Complex64> = f.coeffs().iter().map(|c| c * eps).collect();
                coeffs[m] += 1.0;
                Ok(SzegoField::from_coeffs(coeffs)?)
            }
            InitSpec::File(ref path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    LabError::BadInput(format!("cannot read {}: {e}", path.display()))
                })?;
                let field = SzegoField::from_json(&text)?;
                if field.degree() > n {
                    return Err(LabError::BadInput(format!(
                        "{} has degree {} above N = {n}",
                        path.display(),
                        field.degree()
                    )));
                }
                Ok(field.with_degree(n))
            }
        }
    }

    /// `delta` of `plane-plus` data.
    pub fn delta(&self) -> Option<f64> {
        match *self {
            InitSpec::PlanePlus { delta, .. } => Some(delta),
            _ => None,
        }
    }
}

/// `f` with `|f_k| = (1+k^2)^{-(s+0.6)/2}` up to normalisation,
/// seeded uniform phases, and `||f||_{H^s} = 1`.
pub fn unit_perturbation(n: usize, s: f64, seed: u64) -> SzegoField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..=n)
        .map(|k| {
            let amp = (1.0 + (k * k) as f64).powf(-(s + DECAY_OFFSET) / 2.0);
            Complex64::from_polar(amp, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let f = SzegoField::from_coeffs(coeffs).expect("finite amplitudes");
    let norm = sobolev_norm(&f, s);
    f.scaled(Complex64::new(1.0 / norm, 0.0))
}

fn bad(spec: &str, why: impl fmt::Display) -> LabError {
    LabError::BadInput(format!("init `{spec}`: {why}"))
}

fn fields(spec: &str, body: &str, allowed: &[&str]) -> LabResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| bad(spec, format!("`{part}` is not key=value")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(bad(spec, format!("unknown key `{k}`")));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(bad(spec, format!("duplicate key `{k}`")));
        }
    }
    for key in allowed {
        if !out.contains_key(*key) {
            return Err(bad(spec, format!("missing `{key}`")));
        }
    }
    Ok(out)
}

fn num<T: FromStr>(spec: &str, map: &BTreeMap<String, String>, key: &str) -> LabResult<T>
where
    T::Err: fmt::Display,
{
    map[key]
        .parse()
        .map_err(|e| bad(spec, format!("`{key}`: {e}")))
}

impl FromStr for InitSpec {
    type Err = LabError;

    fn from_str(spec: &str) -> LabResult<Self> {
        let (kind, body) = spec
            .split_once(':')
            .ok_or_else(|| bad(spec, "expected `<kind>:<args>`"))?;
        let parsed = match kind {
            "plane" => {
                let f = fields(spec, body, &["m"])?;
                InitSpec::Plane {
                    m: num(spec, &f, "m")?,
                }
            }
            "plane-plus" => {
                let f = fields(spec, body, &["m", "delta"])?;
                let delta: f64 = num(spec, &f, "delta")?;
                if !delta.is_finite() {
                    return Err(bad(spec, "delta must be finite"));
                }
                InitSpec::PlanePlus {
                    m: num(spec, &f, "m")?,
                    delta,
                }
            }
            "perturbed" => {
                let f = fields(spec, body, &["m", "eps", "s", "seed"])?;
                let eps: f64 = num(spec, &f, "eps")?;
                let s: f64 = num(spec, &f, "s")?;
                if !(eps.is_finite() && eps >= 0.0) || !(s.is_finite() && s >= 0.0) {
                    return Err(bad(spec, "eps and s must be finite and nonnegative"));
                }
                InitSpec::Perturbed {
                    m: num(spec, &f, "m")?,
                    eps,
                    s,
                    seed: num(spec, &f, "seed")?,
                }
            }
            "file" if !body.is_empty() => InitSpec::File(PathBuf::from(body)),
            _ => return Err(bad(spec, format!("unknown kind `{kind}`"))),
        };
        Ok(parsed)
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Plane { m } => write!(f, "plane:m={m}"),
            InitSpec::PlanePlus { m, delta } => write!(f, "plane-plus:m={m},delta={delta}"),
            InitSpec::Perturbed { m, eps, s, seed } => {
                write!(f, "perturbed:m={m},eps={eps},s={s},seed={seed}")
            }
            InitSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for InitSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InitSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
