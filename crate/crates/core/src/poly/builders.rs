//! Standard energies on modes `0..=n`. Sums over index tuples run over
//! ordered tuples; coinciding monomials are merged.

use super::{Coefficient, Monomial, PolyHamiltonian};

fn sq(k: u32) -> i64 {
    (k as i64) * (k as i64)
}

/// Ordered quadruples `(k1, k2, k3, k4)` in `0..=n` with `k1 - k2 + k3 = k4`.
pub fn quartets(n: u32) -> impl Iterator<Item = [u32; 4]> {
    (0..=n).flat_map(move |k1| {
        (0..=n).flat_map(move |k2| {
            (0..=n).filter_map(move |k3| {
                let k4 = k1 as i64 - k2 as i64 + k3 as i64;
                (0..=n as i64)
                    .contains(&k4)
                    .then_some([k1, k2, k3, k4 as u32])
            })
        })
    })
}

/// `k1^2 - k2^2 + k3^2 - k4^2`
pub fn quartet_divisor([k1, k2, k3, k4]: [u32; 4]) -> i64 {
    sq(k1) - sq(k2) + sq(k3) - sq(k4)
}

fn quartet_monomial([k1, k2, k3, k4]: [u32; 4]) -> Monomial {
    Monomial::new(vec![k1, k3], vec![k2, k4])
}

fn diagonal<C: Coefficient>(n: u32, weight: impl Fn(u32) -> C) -> PolyHamiltonian<C> {
    PolyHamiltonian::from_terms((0..=n).map(|k| (Monomial::new(vec![k], vec![k]), weight(k))))
}

/// `N_2 = sum |v_k|^2`
pub fn mass<C: Coefficient>(n: u32) -> PolyHamiltonian<C> {
    diagonal(n, |_| C::ratio(1, 1))
}

/// `N_4 = ||v||_{L^4}^4 = sum_{k1-k2+k3-k4=0} v_{k1} conj(v_{k2}) v_{k3} conj(v_{k4})`
pub fn quartic_mass<C: Coefficient>(n: u32) -> PolyHamiltonian<C> {
    PolyHamiltonian::from_terms(quartets(n).map(|q| (quartet_monomial(q), C::ratio(1, 1))))
}

/// `H_0 = (1/2) sum k^2 |v_k|^2`
pub fn free_energy<C: Coefficient>(n: u32) -> PolyHamiltonian<C> {
    diagonal(n, |k| C::ratio(sq(k), 2))
}

/// `R = (1/4) (sum over non-resonant quartets - sum |v_k|^4)`, the quartic
/// part of the gauged small-data energy.
pub fn quartic_remainder<C: Coefficient>(n: u32) -> PolyHamiltonian<C> {
    let nonres = PolyHamiltonian::from_terms(
        quartets(n)
            .filter(|q| quartet_divisor(*q) != 0)
            .map(|q| (quartet_monomial(q), C::ratio(1, 4))),
    );
    nonres.add(&r_tilde(n))
}

/// `R~ = -(1/4) sum |v_k|^4`
pub fn r_tilde<C: Coefficient>(n: u32) -> PolyHamiltonian<C> {
    PolyHamiltonian::from_terms(
        (0..=n).map(|k| (Monomial::new(vec![k, k], vec![k, k]), C::ratio(-1, 4))),
    )
}

/// `N~_2 = sum_{2m+1 <= k <= n} |v_k|^2`
pub fn high_mass<C: Coefficient>(m: u32, n: u32) -> PolyHamiltonian<C> {
    PolyHamiltonian::from_terms(
        (2 * m + 1..=n).map(|k| (Monomial::new(vec![k], vec![k]), C::ratio(1, 1))),
    )
}

/// `L_m = Re v_m`
pub fn real_part_mode<C: Coefficient>(m: u32) -> PolyHamiltonian<C> {
    PolyHamiltonian::from_terms([
        (Monomial::new(vec![m], vec![]), C::ratio(1, 2)),
        (Monomial::new(vec![], vec![m]), C::ratio(1, 2)),
    ])
}

/// Quadratic part of the energy in the frame of the plane wave `e_m`, with
/// dispersion `d = eps^alpha`:
/// `sum (d k^2 + 1 - m^2 d)/2 |v_k|^2 + (1/4) sum_{j+k=2m} (v_j v_k + conj)`.
pub fn plane_wave_quadratic<C: Coefficient>(m: u32, n: u32, d: &C) -> PolyHamiltonian<C> {
    let mut p = diagonal(n, |k| {
        d.scale_int(sq(k) - sq(m))
            .add(&C::ratio(1, 1))
            .mul(&C::ratio(1, 2))
    });
    for j in 0..=(2 * m).min(n) {
        let k = 2 * m - j;
        if k <= n {
            p.add_term(Monomial::new(vec![j, k], vec![]), C::ratio(1, 4));
            p.add_term(Monomial::new(vec![], vec![j, k]), C::ratio(1, 4));
        }
    }
    p
}

/// Ordered triples `(j, l, k)` in `0..=n` with `j - l + k = m`.
pub fn triples(m: u32, n: u32) -> impl Iterator<Item = [u32; 3]> {
    (0..=n).flat_map(move |j| {
        (0..=n).filter_map(move |k| {
            let l = j as i64 + k as i64 - m as i64;
            (0..=n as i64).contains(&l).then_some([j, l as u32, k])
        })
    })
}

/// `H_1^m = Re sum_{j-l+k=m} v_j conj(v_l) v_k`
pub fn plane_wave_cubic<C: Coefficient>(m: u32, n: u32) -> PolyHamiltonian<C> {
    let mut p = PolyHamiltonian::zero();
    for [j, l, k] in triples(m, n) {
        p.add_term(Monomial::new(vec![j, k], vec![l]), C::ratio(1, 2));
        p.add_term(Monomial::new(vec![l], vec![j, k]), C::ratio(1, 2));
    }
    p
}
