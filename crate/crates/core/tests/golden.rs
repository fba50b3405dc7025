//! Polynomial dumps frozen as golden files. Each file is also checked against
//! a term-by-term reconstruction from the coefficient formulas, so a golden
//! file can only be refreshed (`UPDATE_GOLDEN=1`) if that check still passes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use szego_core::birkhoff::{build_f, build_fm_exact};
use szego_core::poly::{plane_wave_quadratic, GaussianRational, PolyHamiltonian};

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "{name} differs from golden file");
}

type Terms = BTreeMap<(Vec<u32>, Vec<u32>), Complex64>;

fn numeric_terms(p: &PolyHamiltonian) -> Terms {
    p.terms()
        .map(|(m, c)| ((m.holo().to_vec(), m.anti().to_vec()), c.to_complex()))
        .collect()
}

fn push(terms: &mut Terms, mut holo: Vec<u32>, mut anti: Vec<u32>, c: Complex64) {
    holo.sort_unstable();
    anti.sort_unstable();
    *terms.entry((holo, anti)).or_default() += c;
}

fn assert_same(expected: Terms, actual: &Terms) {
    let expected: Terms = expected
        .into_iter()
        .filter(|(_, c)| c.norm() > 0.0)
        .collect();
    assert_eq!(expected.len(), actual.len());
    for (key, c) in &expected {
        let got = actual.get(key).unwrap_or_else(|| panic!("missing {key:?}"));
        assert!((got - c).norm() < 1e-15, "{key:?}: {got} vs {c}");
    }
}

#[test]
fn generator_f_golden() {
    let n = 3u32;
    let f = build_f(n).unwrap();
    let text = f.dump();
    golden("f_n3.txt", &text);

    let parsed: PolyHamiltonian = PolyHamiltonian::parse_dump(&text).unwrap();
    assert_eq!(parsed, f);
    let mut expected = Terms::new();
    for k1 in 0..=n {
        for k2 in 0..=n {
            for k3 in 0..=n {
                let k4 = k1 as i64 - k2 as i64 + k3 as i64;
                if !(0..=n as i64).contains(&k4) {
                    continue;
                }
                let k4 = k4 as u32;
                let d = (k1 * k1 + k3 * k3) as f64 - (k2 * k2 + k4 * k4) as f64;
                if d != 0.0 {
                    push(
                        &mut expected,
                        vec![k1, k3],
                        vec![k2, k4],
                        Complex64::new(0.0, 1.0 / (4.0 * d)),
                    );
                }
            }
        }
    }
    assert_same(expected, &numeric_terms(&parsed));
}

#[test]
fn plane_wave_generator_golden() {
    let (m, n) = (1u32, 5u32);
    let fm = build_fm_exact(m, n).unwrap();
    let text = fm.dump();
    golden("fm_m1_n5.txt", &text);
    let parsed: PolyHamiltonian = PolyHamiltonian::parse_dump(&text).unwrap();
    assert_eq!(parsed, fm);

    // At m = 1, d = 1 the nonzero coefficients are
    //   a(1,k,k) = i/2, a(2,k+1,k) = i(k-0)/((1-0)(1-2(k-1)k)), a(0,k,k+1) = i(1-k)/(1-2(k-1)k),
    //   a(j,j+k-1,k) = i/(1-2(j-1)(k-1)) for j, k >= 3.
    let a = |j: u32, k: u32| -> Complex64 {
        let (lo, hi) = (j.min(k) as f64, j.max(k) as f64);
        let i = Complex64::new(0.0, 1.0);
        if hi <= 2.0 {
            Complex64::new(0.0, 0.0)
        } else if lo >= 3.0 {
            i / (1.0 - 2.0 * (lo - 1.0) * (hi - 1.0))
        } else if lo == 1.0 {
            i / 2.0
        } else if lo == 2.0 {
            i * hi / (1.0 - 2.0 * (hi - 1.0) * hi)
        } else {
            let k = hi - 1.0;
            if k >= 3.0 {
                i * (1.0 - k) / (1.0 - 2.0 * (k - 1.0) * k)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let mut expected = Terms::new();
    for j in 0..=n {
        for k in 0..=n {
            let l = j as i64 + k as i64 - m as i64;
            if !(0..=n as i64).contains(&l) {
                continue;
            }
            let c = a(j, k) / 2.0;
            push(&mut expected, vec![j, k], vec![l as u32], c);
            push(&mut expected, vec![l as u32], vec![j, k], c.conj());
        }
    }
    assert_same(expected, &numeric_terms(&parsed));
}

#[test]
fn quadratic_energy_golden() {
    let one = GaussianRational::ratio(1, 1);
    let h = plane_wave_quadratic(2, 4, &one);
    golden("h0_m2_n4.txt", &h.dump());
    let back: PolyHamiltonian = PolyHamiltonian::parse_dump(&h.dump()).unwrap();
    assert_eq!(back, h);
    // diagonal (k^2 + 1 - 4)/2, pairing 1/4 per ordered (j, k) with j + k = 4
    let mut expected = Terms::new();
    for k in 0..=4u32 {
        push(
            &mut expected,
            vec![k],
            vec![k],
            Complex64::new((k * k) as f64 / 2.0 - 1.5, 0.0),
        );
        let j = 4 - k;
        push(&mut expected, vec![j, k], vec![], Complex64::new(0.25, 0.0));
        push(&mut expected, vec![], vec![j, k], Complex64::new(0.25, 0.0));
    }
    assert_same(expected, &numeric_terms(&back));
}
