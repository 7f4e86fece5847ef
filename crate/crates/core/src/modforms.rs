//! q-expansions of `E_4`, `E_6`, `Δ` and the quantities built from them:
//! `j`, `Δ'/Δ`, and the logarithmic derivative of `(j(z₁) - j(z₂)) Δ(z₁)`.
//!
//! Coefficients are built in exact integer arithmetic and converted to `f64`
//! once. Evaluation at a point first reduces it into the fundamental domain,
//! where `|q| <= e^{-π√3}`, and then reapplies the automorphy factors.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::divisors;
use crate::error::{Error, Result};
use crate::point::UpperHalfPoint;

/// Largest order for which the exact integer construction cannot overflow.
pub const MAX_ORDER: usize = 200;
/// Default number of coefficients.
pub const DEFAULT_ORDER: usize = 40;
/// Default lower bound on `Im z` accepted by [`evaluate`].
pub const DEFAULT_Y_MIN: f64 = 0.1;

/// Truncated q-expansion `Σ_{n=0}^{N} a_n qⁿ` of a modular object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSeries {
    coefficients: Vec<f64>,
    weight: i32,
}

impl QSeries {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn weight(&self) -> i32 {
        self.weight
    }

    /// Truncation order `N` (index of the last coefficient).
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Term-wise `q d/dq`, i.e. `(1/2πi) d/dz`.
    pub fn q_derivative(&self) -> QSeries {
        QSeries {
            coefficients: self
                .coefficients
                .iter()
                .enumerate()
                .map(|(n, a)| n as f64 * a)
                .collect(),
            weight: self.weight + 2,
        }
    }

    /// A bound `|a_n| <= M n^{p}` fitted to the stored coefficients, with
    /// `p = weight - 1` (the Eisenstein growth rate, which dominates cusp forms).
    fn growth_bound(&self) -> (f64, i32) {
        let p = (self.weight - 1).max(0);
        let m = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, a)| a.abs() / (n as f64).powi(p))
            .fold(0.0, f64::max);
        (m, p)
    }

    /// Bound on `Σ_{n>N} |a_n| |q|ⁿ` from the fitted growth model.
    pub fn tail_bound(&self, abs_q: f64) -> f64 {
        let (m, p) = self.growth_bound();
        let mut total = 0.0;
        let mut n = self.order() + 1;
        loop {
            let term = m * (n as f64).powi(p) * abs_q.powi(n as i32);
            total += term;
            if term <= 1e-18 * total || term == 0.0 || n > 100_000 {
                break;
            }
            n += 1;
        }
        total
    }

    fn eval_q(&self, q: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * q + a)
    }
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "q-series order must be in 1..={MAX_ORDER}, got {n}"
        )));
    }
    Ok(())
}

fn sigma_int(k: u32, n: u64) -> i128 {
    divisors(n).into_iter().map(|d| (d as i128).pow(k)).sum()
}

/// `-2k / B_k` for the weights where it is an integer.
fn eisenstein_factor(k: u32) -> Result<i128> {
    match k {
        4 => Ok(240),
        6 => Ok(-504),
        8 => Ok(480),
        10 => Ok(-264),
        14 => Ok(-24),
        _ => Err(Error::InvalidArgument(format!(
            "Eisenstein series of weight {k} is not supported (use 4, 6, 8, 10 or 14)"
        ))),
    }
}

fn eisenstein_int(k: u32, n: usize) -> Result<Vec<i128>> {
    let f = eisenstein_factor(k)?;
    Ok((0..=n)
        .map(|m| if m == 0 { 1 } else { f * sigma_int(k - 1, m as u64) })
        .collect())
}

fn mul_trunc(a: &[i128], b: &[i128]) -> Vec<i128> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|m| (0..=m).map(|i| a[i] * b[m - i]).sum())
        .collect()
}

fn to_series(c: &[i128], weight: i32) -> QSeries {
    QSeries {
        coefficients: c.iter().map(|&x| x as f64).collect(),
        weight,
    }
}

/// Normalized Eisenstein series `E_k = 1 - (2k/B_k) Σ σ_{k-1}(n) qⁿ`.
pub fn eisenstein(k: u32, order: usize) -> Result<QSeries> {
    check_order(order)?;
    Ok(to_series(&eisenstein_int(k, order)?, k as i32))
}

/// Exact integer coefficients `τ(0..=N)` of `Δ = (E_4³ - E_6²)/1728`.
pub fn tau_coefficients(order: usize) -> Result<Vec<i128>> {
    check_order(order)?;
    let e4 = eisenstein_int(4, order)?;
    let e6 = eisenstein_int(6, order)?;
    let e4_cubed = mul_trunc(&mul_trunc(&e4, &e4), &e4);
    let e6_squared = mul_trunc(&e6, &e6);
    e4_cubed
        .iter()
        .zip(&e6_squared)
        .map(|(a, b)| {
            let diff = a - b;
            if diff % 1728 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "E4^3 - E6^2 coefficient {diff} not divisible by 1728"
                )));
            }
            Ok(diff / 1728)
        })
        .collect()
}

/// The discriminant `Δ`.
pub fn delta_series(order: usize) -> Result<QSeries> {
    Ok(to_series(&tau_coefficients(order)?, 12))
}

/// A value with its truncation-tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    pub tail: f64,
}

/// Evaluates `series` at `z` without any reduction.
///
/// Fails with [`Error::TailTooLarge`] when the tail bound exceeds `tol`.
pub fn evaluate(series: &QSeries, z: UpperHalfPoint, y_min: f64, tol: f64) -> Result<SeriesValue> {
    if z.im() < y_min {
        return Err(Error::InvalidArgument(format!(
            "Im z = {} is below the evaluation floor {y_min}",
            z.im()
        )));
    }
    let q = q_of(z);
    let tail = series.tail_bound(q.norm());
    if tail > tol {
        return Err(Error::TailTooLarge { bound: tail, tol });
    }
    Ok(SeriesValue {
        value: series.eval_q(q),
        tail,
    })
}

fn q_of(z: UpperHalfPoint) -> Complex64 {
    Complex64::from_polar((-TAU * z.im()).exp(), TAU * z.re())
}

/// The basic series, built once and reused for every evaluation.
#[derive(Debug, Clone)]
pub struct ModularForms {
    e4: QSeries,
    e6: QSeries,
    delta: QSeries,
    e4_prime: QSeries,
    delta_prime: QSeries,
}

/// Values of `E_4`, `Δ` and their `q d/dq` derivatives at one point.
#[derive(Debug, Clone, Copy)]
struct Values {
    e4: Complex64,
    e4_q: Complex64,
    delta: Complex64,
    delta_q: Complex64,
}

impl Default for ModularForms {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER).expect("default order is valid")
    }
}

impl ModularForms {
    pub fn new(order: usize) -> Result<Self> {
        let e4 = eisenstein(4, order)?;
        let e6 = eisenstein(6, order)?;
        let delta = delta_series(order)?;
        Ok(Self {
            e4_prime: e4.q_derivative(),
            delta_prime: delta.q_derivative(),
            e4,
            e6,
            delta,
        })
    }

    pub fn e4(&self) -> &QSeries {
        &self.e4
    }

    pub fn e6(&self) -> &QSeries {
        &self.e6
    }

    pub fn delta(&self) -> &QSeries {
        &self.delta
    }

    fn values_reduced(&self, w: UpperHalfPoint) -> Values {
        let q = q_of(w);
        Values {
            e4: self.e4.eval_q(q),
            e4_q: self.e4_prime.eval_q(q),
            delta: self.delta.eval_q(q),
            delta_q: self.delta_prime.eval_q(q),
        }
    }

    /// `Δ(z)` via reduction and `Δ(γz) = (cz+d)^{12} Δ(z)`.
    pub fn delta_at(&self, z: UpperHalfPoint) -> Complex64 {
        let (w, g) = z.reduce();
        let v = self.values_reduced(w);
        // w = g z  ⇒  Δ(z) = Δ(w) / (cz+d)^{12}.
        v.delta / g.j_factor(z.z()).powi(12)
    }

    /// `E_4(z)` via reduction.
    pub fn e4_at(&self, z: UpperHalfPoint) -> Complex64 {
        let (w, g) = z.reduce();
        self.values_reduced(w).e4 / g.j_factor(z.z()).powi(4)
    }

    /// `j(z) = E_4³/Δ`.
    pub fn j_invariant(&self, z: UpperHalfPoint) -> Complex64 {
        let (w, _) = z.reduce();
        let v = self.values_reduced(w);
        v.e4 * v.e4 * v.e4 / v.delta
    }

    /// `dj/dz` via the quotient rule on the q-series.
    pub fn j_prime(&self, z: UpperHalfPoint) -> Complex64 {
        let (w, g) = z.reduce();
        let v = self.values_reduced(w);
        let two_pi_i = Complex64::new(0.0, TAU);
        let e4_sq = v.e4 * v.e4;
        let jq = (3.0 * e4_sq * v.e4_q * v.delta - e4_sq * v.e4 * v.delta_q) / (v.delta * v.delta);
        // j'(z) = j'(w) / (cz+d)².
        two_pi_i * jq / g.j_factor(z.z()).powi(2)
    }

    /// `Δ'(z)/Δ(z)`.
    pub fn dlog_delta(&self, z: UpperHalfPoint) -> Complex64 {
        let (w, g) = z.reduce();
        let v = self.values_reduced(w);
        let two_pi_i = Complex64::new(0.0, TAU);
        let cz_d = g.j_factor(z.z());
        // log Δ(z) = log Δ(w) - 12 log(cz+d).
        two_pi_i * v.delta_q / v.delta / (cz_d * cz_d) - 12.0 * g.c as f64 / cz_d
    }

    /// `d/dz₁ log[(j(z₁) - j(z₂)) Δ(z₁)]` scaled by `factor`.
    ///
    /// `factor = 2` is the real-gradient reading of `d_{z₁} log|F|²`,
    /// `factor = 1` the Wirtinger `dz₁`-component.
    pub fn theorem3_rhs(&self, z1: UpperHalfPoint, z2: UpperHalfPoint, factor: f64) -> Result<Complex64> {
        let gap = self.j_invariant(z1) - self.j_invariant(z2);
        if gap.norm() <= 1e-8 {
            return Err(Error::NearDiagonal { gap: gap.norm() });
        }
        Ok(factor * (self.j_prime(z1) / gap + self.dlog_delta(z1)))
    }
}

/// Eisenstein series of weight `k` as the lattice sum `½ Σ_{(c,d)=1} (cz+d)^{-k}`
/// over `|c|, |d| <= bound`. Slow; used only to cross-check [`eisenstein`].
pub fn eisenstein_lattice(k: i32, z: UpperHalfPoint, bound: i64) -> Complex64 {
    let mut acc = crate::sum::ComplexSum::default();
    for c in -bound..=bound {
        for d in -bound..=bound {
            if crate::arith::gcd(c.unsigned_abs(), d.unsigned_abs()) == 1 {
                acc.add((z.z() * c as f64 + d as f64).powi(-k));
            }
        }
    }
    0.5 * acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::IntMatrix2;

    fn pt(x: f64, y: f64) -> UpperHalfPoint {
        UpperHalfPoint::new(x, y).unwrap()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn eisenstein_examples() {
        assert_eq!(eisenstein(4, 3).unwrap().coefficients(), &[1.0, 240.0, 2160.0, 6720.0]);
        assert_eq!(eisenstein(6, 2).unwrap().coefficients(), &[1.0, -504.0, -16632.0]);
        assert!(eisenstein(12, 3).is_err());
        assert!(eisenstein(4, 0).is_err());
    }

    #[test]
    fn eisenstein_matches_lattice_sum() {
        let z = pt(0.0, 2.0);
        let lattice = eisenstein_lattice(4, z, 300);
        // The lattice sum carries the normalization E_4(i∞) = 1.
        let series = evaluate(&eisenstein(4, 40).unwrap(), z, DEFAULT_Y_MIN, 1e-12).unwrap();
        assert!((lattice - series.value).norm() < 1e-6, "{lattice} vs {}", series.value);
    }

    fn eta_product_tau(n: usize) -> Vec<i128> {
        // Π (1 - q^m)^24 truncated at q^n, times q.
        let mut p = vec![0i128; n + 1];
        p[0] = 1;
        for m in 1..=n {
            for _ in 0..24 {
                for i in (m..=n).rev() {
                    p[i] -= p[i - m];
                }
            }
        }
        let mut tau = vec![0i128; n + 1];
        tau[1..=n].copy_from_slice(&p[..n]);
        tau
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_series(2).unwrap().coefficients(), &[0.0, 1.0, -24.0]);
        let tau = tau_coefficients(60).unwrap();
        assert_eq!(tau[5], 4830);
        assert_eq!(tau[6], tau[2] * tau[3]);
        assert_eq!(tau[6], -6048);
        assert_eq!(tau, eta_product_tau(60));
        assert_eq!(tau[0], 0);
        assert_eq!(tau[1], 1);
    }

    #[test]
    fn delta_at_large_height_is_q() {
        let z = pt(0.37, 10.0);
        let mf = ModularForms::default();
        let v = evaluate(mf.delta(), z, DEFAULT_Y_MIN, 1e-12).unwrap().value;
        let q = q_of(z);
        assert!(rel(v, q) < 1e-12);
    }

    #[test]
    fn j_at_elliptic_points() {
        let mf = ModularForms::new(60).unwrap();
        assert!((mf.j_invariant(pt(0.0, 1.0)) - 1728.0).norm() < 1e-8);
        let rho = pt(-0.5, 3f64.sqrt() / 2.0);
        assert!(mf.j_invariant(rho).norm() < 1e-6);
    }

    #[test]
    fn j_periodic_and_invariant() {
        let mf = ModularForms::default();
        let z = pt(0.3, 1.1);
        assert!(rel(mf.j_invariant(z.translate(1.0)), mf.j_invariant(z)) < 1e-9);
        for g in [IntMatrix2::T, IntMatrix2::S, IntMatrix2::T.compose(&IntMatrix2::S)] {
            for &(x, y) in &[(0.3, 1.1), (-0.2, 0.7), (0.45, 2.0)] {
                let z = pt(x, y);
                assert!(rel(mf.j_invariant(z.act(&g)), mf.j_invariant(z)) < 1e-8);
            }
        }
    }

    #[test]
    fn delta_weight_twelve() {
        let mf = ModularForms::default();
        for i in 0..20 {
            let z = pt(-0.5 + 0.05 * i as f64, 0.6 + 0.07 * i as f64);
            for g in [IntMatrix2::T, IntMatrix2::S] {
                let lhs = mf.delta_at(z.act(&g));
                let rhs = g.j_factor(z.z()).powi(12) * mf.delta_at(z);
                assert!(rel(lhs, rhs) < 1e-8);
            }
        }
    }

    #[test]
    fn dlog_delta_cocycle() {
        let mf = ModularForms::default();
        let z = pt(0.2, 1.3);
        let g = IntMatrix2::S;
        let czd = g.j_factor(z.z());
        let lhs = mf.dlog_delta(z.act(&g));
        let rhs = czd * czd * mf.dlog_delta(z) + 12.0 * g.c as f64 * czd;
        assert!((lhs - rhs).norm() < 1e-8);
        assert!((mf.dlog_delta(z.translate(1.0)) - mf.dlog_delta(z)).norm() < 1e-10);
        let high = mf.dlog_delta(pt(0.1, 12.0));
        assert!((high - Complex64::new(0.0, TAU)).norm() < 1e-8);
    }

    #[test]
    fn dlog_delta_matches_finite_difference() {
        let mf = ModularForms::default();
        let z = pt(0.13, 0.8);
        let h = 1e-5;
        let log_d = |z: UpperHalfPoint| mf.delta_at(z).ln();
        let fd = (log_d(z.translate(h)) - log_d(z.translate(-h))) / (2.0 * h);
        assert!(rel(mf.dlog_delta(z), fd) < 1e-7);
    }

    #[test]
    fn theorem3_rhs_finite_difference() {
        let mf = ModularForms::default();
        let (z1, z2) = (pt(0.1, 1.2), pt(-0.4, 0.9));
        let log_f = |z: UpperHalfPoint| ((mf.j_invariant(z) - mf.j_invariant(z2)) * mf.delta_at(z)).ln();
        let h = 1e-4;
        let fd = (log_f(z1.translate(h)) - log_f(z1.translate(-h))) / (2.0 * h);
        let rhs = mf.theorem3_rhs(z1, z2, 1.0).unwrap();
        assert!((rhs - fd).norm() < 1e-6 * rhs.norm().max(1.0), "{rhs} vs {fd}");
        let shifted = mf.theorem3_rhs(z1, z2.translate(1.0), 1.0).unwrap();
        assert!((shifted - rhs).norm() < 1e-9 * rhs.norm());
    }

    #[test]
    fn theorem3_rhs_pole() {
        let mf = ModularForms::default();
        let z2 = pt(0.23, 1.17);
        let z1 = z2.offset(Complex64::new(1e-3, 0.0)).unwrap();
        let rhs = mf.theorem3_rhs(z1, z2, 1.0).unwrap();
        let ratio = (z1.z() - z2.z()) * rhs;
        assert!((ratio - 1.0).norm() < 1e-2, "{ratio}");
        assert!(matches!(mf.theorem3_rhs(z2, z2.translate(1.0), 1.0), Err(Error::NearDiagonal { .. })));
    }

    #[test]
    fn e4_cubed_minus_e6_squared_has_no_constant() {
        let tau = tau_coefficients(10).unwrap();
        assert_eq!(tau[0], 0);
    }

    #[test]
    fn tail_bound_covers_doubling() {
        let short = delta_series(20).unwrap();
        let long = delta_series(40).unwrap();
        for &(x, y) in &[(0.1, 0.5), (0.4, 0.7), (-0.3, 1.0)] {
            let z = pt(x, y);
            let a = evaluate(&short, z, 0.1, 1.0).unwrap();
            let b = evaluate(&long, z, 0.1, 1.0).unwrap();
            assert!((a.value - b.value).norm() <= a.tail, "y={y}");
        }
        assert!(matches!(
            evaluate(&short, pt(0.0, 0.2), 0.1, 1e-30),
            Err(Error::TailTooLarge { .. })
        ));
    }
}
