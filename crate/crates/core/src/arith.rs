//! Exact multiplicative arithmetic and the two exponential sums that appear in
//! the Fourier coefficients: Ramanujan sums and Kloosterman sums.
//!
//! Residue sums run over `1 <= m <= c` with `gcd(m, c) = 1`, so the modulus
//! `c = 1` contributes the single residue `m = 1`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INTEGER_SLACK: f64 = 1e-9;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `(g, x, y)` with `a x + b y = g = gcd(a, b)`, `g >= 0`.
pub fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i64, 0i64);
    let (mut old_t, mut t) = (0i64, 1i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Prime factorization by trial division, as `(prime, exponent)` pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Euler's totient. Panics on `c = 0`.
pub fn euler_phi(c: u64) -> u64 {
    assert!(c >= 1, "euler_phi needs c >= 1");
    factorize(c)
        .into_iter()
        .fold(c, |acc, (p, _)| acc / p * (p - 1))
}

/// Number of positive divisors.
pub fn divisor_count(n: u64) -> u64 {
    assert!(n >= 1, "divisor_count needs n >= 1");
    factorize(n).into_iter().map(|(_, e)| e as u64 + 1).product()
}

/// Möbius function.
pub fn mobius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Positive divisors of `n` in increasing order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// `σ_e(r) = Σ_{d | |r|} d^e` for complex exponent `e`.
pub fn divisor_sigma(exponent: Complex64, r: i64) -> Result<Complex64> {
    if r == 0 {
        return Err(Error::InvalidArgument("divisor_sigma needs r != 0".into()));
    }
    Ok(divisors(r.unsigned_abs())
        .into_iter()
        .map(|d| Complex64::new(d as f64, 0.0).powc(exponent))
        .sum())
}

/// `m*` with `1 <= m* <= c` and `m m* ≡ 1 (mod c)`.
pub fn mod_inverse(m: i64, c: u64) -> Result<u64> {
    if c == 0 {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    let ci = c as i64;
    let (g, x, _) = extended_gcd(m.rem_euclid(ci), ci);
    if g != 1 {
        return Err(Error::NotInvertible { m, c });
    }
    let inv = x.rem_euclid(ci);
    Ok(if inv == 0 { c } else { inv as u64 })
}

/// Units modulo `c` paired with their inverses, `(m, m*)` with `1 <= m, m* <= c`.
pub fn unit_pairs(c: u64) -> Vec<(u64, u64)> {
    (1..=c)
        .filter(|&m| gcd(m, c) == 1)
        .map(|m| (m, mod_inverse(m as i64, c).expect("unit")))
        .collect()
}

/// `e^{2πi j / c}` for `j in 0..c`.
fn roots_of_unity(c: u64) -> Vec<Complex64> {
    (0..c)
        .map(|j| Complex64::from_polar(1.0, TAU * j as f64 / c as f64))
        .collect()
}

fn round_checked(v: Complex64) -> Result<i64> {
    let nearest = v.re.round();
    if (v.re - nearest).abs() >= INTEGER_SLACK || v.im.abs() >= INTEGER_SLACK {
        return Err(Error::PrecisionLoss {
            value: format!("{v}"),
        });
    }
    Ok(nearest as i64)
}

/// Ramanujan sum `C_c(r)` by direct exponential summation.
pub fn ramanujan_sum(c: u64, r: i64) -> Result<i64> {
    if c == 0 {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    let rr = r.rem_euclid(c as i64) as u64;
    let mut acc = Complex64::new(0.0, 0.0);
    for a in (1..=c).filter(|&a| gcd(a, c) == 1) {
        let phase = (a as u128 * rr as u128 % c as u128) as f64 / c as f64;
        acc += Complex64::from_polar(1.0, TAU * phase);
    }
    round_checked(acc)
}

/// Ramanujan sum via `C_c(r) = μ(c/g) φ(c) / φ(c/g)`, `g = gcd(c, r)`.
///
/// Agrees with [`ramanujan_sum`] exactly; used where `c` runs into the
/// hundreds of thousands.
pub fn ramanujan_sum_multiplicative(c: u64, r: i64) -> i64 {
    let g = gcd(c, r.unsigned_abs());
    let q = c / g;
    mobius(q) * (euler_phi(c) / euler_phi(q)) as i64
}

/// Arguments of a Kloosterman sum `K(a, b; c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KloostermanParams {
    pub a: i64,
    pub b: i64,
    c: u64,
}

impl KloostermanParams {
    pub fn new(a: i64, b: i64, c: u64) -> Result<Self> {
        if c == 0 {
            return Err(Error::InvalidArgument("Kloosterman modulus must be >= 1".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn c(&self) -> u64 {
        self.c
    }
}

/// `K(a, b; c) = Σ_{m unit} e^{2πi (a m + b m*) / c}`.
pub fn kloosterman(p: KloostermanParams) -> Complex64 {
    KloostermanTable::new(p.c).sum(p.a, p.b)
}

/// Unit/inverse pairs and roots of unity for one modulus, reusable across
/// many `(a, b)`.
#[derive(Debug, Clone)]
pub struct KloostermanTable {
    c: u64,
    pairs: Vec<(u64, u64)>,
    roots: Vec<Complex64>,
}

impl KloostermanTable {
    pub fn new(c: u64) -> Self {
        assert!(c >= 1);
        Self {
            c,
            pairs: unit_pairs(c),
            roots: roots_of_unity(c),
        }
    }

    pub fn sum(&self, a: i64, b: i64) -> Complex64 {
        let c = self.c as i64;
        let (a, b) = (a.rem_euclid(c) as u64, b.rem_euclid(c) as u64);
        self.pairs
            .iter()
            .map(|&(m, mi)| {
                let k = (a as u128 * m as u128 + b as u128 * mi as u128) % self.c as u128;
                self.roots[k as usize]
            })
            .sum()
    }
}

/// The Weil-type bound `√c · min(√(a,c)·d(c/(a,c)), √(b,c)·d(c/(b,c)))`.
pub fn weil_bound(a: i64, b: i64, c: u64) -> f64 {
    let side = |x: i64| {
        let g = gcd(x.unsigned_abs(), c);
        (g as f64).sqrt() * divisor_count(c / g) as f64
    };
    (c as f64).sqrt() * side(a).min(side(b))
}

/// Sieved arithmetic functions on `1..=n` (index 0 unused).
#[derive(Debug, Clone)]
pub struct Sieve {
    pub phi: Vec<u64>,
    pub divisor_count: Vec<u64>,
    pub mobius: Vec<i8>,
}

impl Sieve {
    pub fn new(n: usize) -> Self {
        let mut phi: Vec<u64> = (0..=n as u64).collect();
        let mut mobius = vec![1i8; n + 1];
        let mut is_composite = vec![false; n + 1];
        for p in 2..=n {
            if is_composite[p] {
                continue;
            }
            for m in (p..=n).step_by(p) {
                if m > p {
                    is_composite[m] = true;
                }
                phi[m] = phi[m] / p as u64 * (p as u64 - 1);
                mobius[m] = -mobius[m];
            }
            let sq = p.saturating_mul(p);
            if sq <= n {
                for m in (sq..=n).step_by(sq) {
                    mobius[m] = 0;
                }
            }
        }
        let mut divisor_count = vec![0u64; n + 1];
        for d in 1..=n {
            for m in (d..=n).step_by(d) {
                divisor_count[m] += 1;
            }
        }
        Self {
            phi,
            divisor_count,
            mobius,
        }
    }

    /// `C_c(r)` from the sieved tables.
    pub fn ramanujan(&self, c: usize, r: i64) -> i64 {
        let g = gcd(c as u64, r.unsigned_abs()) as usize;
        let q = c / g;
        self.mobius[q] as i64 * (self.phi[c] / self.phi[q]) as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_phi(c: u64) -> u64 {
        (1..=c).filter(|&a| gcd(a, c) == 1).count() as u64
    }

    fn brute_divisors(n: u64) -> u64 {
        (1..=n).filter(|d| n % d == 0).count() as u64
    }

    fn brute_kloosterman(a: i64, b: i64, c: u64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 1..=c {
            for mi in 1..=c {
                if (m * mi) % c == 1 % c && gcd(m, c) == 1 {
                    let ph = TAU * (a as f64 * m as f64 + b as f64 * mi as f64) / c as f64;
                    acc += Complex64::from_polar(1.0, ph);
                }
            }
        }
        acc
    }

    #[test]
    fn totient_examples() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(12), brute_phi(12));
        assert_eq!(euler_phi(12), 4);
        for p in [2, 3, 5, 7, 11, 13] {
            assert_eq!(euler_phi(p), brute_phi(p));
            assert_eq!(euler_phi(p), p - 1);
        }
    }

    #[test]
    fn divisor_examples() {
        assert_eq!(divisor_count(1), 1);
        assert_eq!(divisor_count(6), 4);
        assert_eq!(divisor_count(16), brute_divisors(16));
        assert_eq!(divisor_count(16), 5);
    }

    #[test]
    fn sigma_examples() {
        let zero = Complex64::new(0.0, 0.0);
        assert!((divisor_sigma(zero, 6).unwrap() - 4.0).norm() < 1e-14);
        assert!((divisor_sigma(Complex64::new(-1.0, 0.0), 4).unwrap() - 1.75).norm() < 1e-14);
        assert!((divisor_sigma(Complex64::new(1.0, 0.0), 6).unwrap() - 12.0).norm() < 1e-14);
        assert!((divisor_sigma(Complex64::new(1.0, 0.0), -6).unwrap() - 12.0).norm() < 1e-14);
        assert!(divisor_sigma(zero, 0).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(mod_inverse(1, 1).unwrap(), 1);
        assert_eq!(mod_inverse(3, 7).unwrap(), 5);
        assert_eq!(mod_inverse(-4, 7).unwrap(), 5);
        assert_eq!(mod_inverse(2, 4), Err(Error::NotInvertible { m: 2, c: 4 }));
    }

    #[test]
    fn ramanujan_examples() {
        for r in [-5, 0, 1, 17] {
            assert_eq!(ramanujan_sum(1, r).unwrap(), 1);
        }
        assert_eq!(ramanujan_sum(2, 1).unwrap(), -1);
        assert_eq!(ramanujan_sum(4, 2).unwrap(), -2);
    }

    #[test]
    fn multiplicative_path_matches_direct() {
        let sieve = Sieve::new(600);
        for c in 1..=600u64 {
            for r in [-7i64, 0, 1, 2, 6, 12, 30, 97] {
                let direct = ramanujan_sum(c, r).unwrap();
                assert_eq!(direct, ramanujan_sum_multiplicative(c, r), "c={c} r={r}");
                assert_eq!(direct, sieve.ramanujan(c as usize, r), "c={c} r={r}");
            }
        }
    }

    #[test]
    fn sieve_matches_direct_functions() {
        let s = Sieve::new(500);
        for n in 1..=500u64 {
            assert_eq!(s.phi[n as usize], euler_phi(n));
            assert_eq!(s.divisor_count[n as usize], divisor_count(n));
            assert_eq!(s.mobius[n as usize] as i64, mobius(n));
        }
    }

    #[test]
    fn kloosterman_examples() {
        let k = |a, b, c| kloosterman(KloostermanParams::new(a, b, c).unwrap());
        assert!((k(1, 1, 1) - 1.0).norm() < 1e-12);
        assert!((k(1, 1, 2) - 1.0).norm() < 1e-12);
        let expected = 2.0 + 2.0 * (4.0 * std::f64::consts::PI / 5.0).cos();
        assert!((k(1, 1, 5) - expected).norm() < 1e-12);
        assert!((expected - 0.381966).abs() < 1e-6);
        for c in 1..=30 {
            for (a, b) in [(1, 1), (2, 3), (0, 5), (-4, 7)] {
                assert!((k(a, b, c) - brute_kloosterman(a, b, c)).norm() < 1e-9);
            }
        }
        assert!(KloostermanParams::new(1, 1, 0).is_err());
    }

    #[test]
    fn ramanujan_is_kloosterman_with_zero() {
        for c in 1..=40u64 {
            for r in 0..10 {
                let k = kloosterman(KloostermanParams::new(r, 0, c).unwrap());
                assert!((k.re - ramanujan_sum(c, r).unwrap() as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ramanujan_periodic_in_r() {
        for c in 1..=50u64 {
            for r in -100i64..=100 {
                assert_eq!(
                    ramanujan_sum(c, r).unwrap(),
                    ramanujan_sum(c, r.rem_euclid(c as i64)).unwrap()
                );
            }
        }
    }

    #[test]
    fn kloosterman_symmetric_and_real() {
        for c in 1..=50u64 {
            let t = KloostermanTable::new(c);
            for a in -3..=6 {
                for b in -3..=6 {
                    let kab = t.sum(a, b);
                    assert!(kab.im.abs() < 1e-9);
                    assert!((kab - t.sum(b, a)).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn weil_bound_on_grid() {
        for c in 1..=200u64 {
            let t = KloostermanTable::new(c);
            for a in 1..=20 {
                for b in 1..=20 {
                    assert!(t.sum(a, b).norm() <= weil_bound(a, b, c) + 1e-9, "a={a} b={b} c={c}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn inverse_really_inverts(m in -1000i64..1000, c in 1u64..500) {
            match mod_inverse(m, c) {
                Ok(inv) => {
                    prop_assert!((1..=c).contains(&inv));
                    prop_assert_eq!((m.rem_euclid(c as i64) as u64 * inv) % c, 1 % c);
                }
                Err(_) => prop_assert!(gcd(m.unsigned_abs(), c) != 1),
            }
        }

        #[test]
        fn phi_multiplicative(a in 1u64..300, b in 1u64..300) {
            prop_assume!(gcd(a, b) == 1);
            prop_assert_eq!(euler_phi(a * b), euler_phi(a) * euler_phi(b));
        }
    }
}
