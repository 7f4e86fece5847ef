//! Values of `Ξₙ` at and near the boundary point `s = n = 1`.
//!
//! Two independent routes:
//!
//! * the Fourier assembly: `Ξₙ = Ξ⁰ + 2(Ξ̃ᶜ + correction)`, where the shifted
//!   series `Ξ̃ᶜ` is expanded in the double Fourier series whose coefficients
//!   are closed forms in Γ, ζ, divisor sums, MacDonald functions and
//!   Kloosterman zeta functions, and `correction = Σ (true − shifted)` is an
//!   absolutely convergent direct sum;
//! * polynomial extrapolation in `s` of direct lattice sums.
//!
//! The coefficient conventions are switchable so the printed forms can be
//! compared against the derived ones; see `ERRATA.md`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{divisor_sigma, unit_pairs};
use crate::error::{Error, Result};
use crate::latsum::{
    c_slice_sums, extrapolate_slices, lattice_sum, omega_n_direct, xi0_direct, xi_direct, EvalResult,
    Kernel, Method, PsiKind, SliceMode, TruncationPolicy,
};
use crate::point::UpperHalfPoint;
use crate::special::{bessel_k, gamma_real, phi_factor, recip_gamma, zeta_real, PhiArgs};
use crate::sum::KahanSum;

/// Which prefactors the closed-form coefficients use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefactors {
    /// Products of the one-variable expansion coefficients.
    Derived,
    /// The constants exactly as printed.
    AsPrinted,
}

/// Which real part multiplies which index in the double-sum phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePairing {
    /// `e^{2πi(r Re z₂ + r′ Re z₁)}`, matching the coefficients (`r ↔ Im z₂`).
    Consistent,
    /// `e^{2πi(r Re z₁ + r′ Re z₂)}`.
    AsPrinted,
}

/// Sign of the first Kloosterman argument in the double-sum coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KloostermanSign {
    /// `K(−r, r′; c)`, from `ad ≡ 1 (mod c)`.
    Derived,
    /// `K(r, r′; c)`.
    AsPrinted,
}

/// The full set of coefficient conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convention {
    pub prefactors: Prefactors,
    pub pairing: PhasePairing,
    pub kloosterman: KloostermanSign,
}

impl Convention {
    /// The convention that reproduces the direct sums.
    pub const DERIVED: Self = Self {
        prefactors: Prefactors::Derived,
        pairing: PhasePairing::Consistent,
        kloosterman: KloostermanSign::Derived,
    };
    /// Every coefficient and phase taken literally from the printed expansion.
    pub const PRINTED: Self = Self {
        prefactors: Prefactors::AsPrinted,
        pairing: PhasePairing::AsPrinted,
        kloosterman: KloostermanSign::AsPrinted,
    };
}

impl Default for Convention {
    fn default() -> Self {
        Self::DERIVED
    }
}

/// Truncations of the Fourier assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierAssemblyConfig {
    /// Largest `|r|`, `|r′|`.
    pub r_max: u32,
    /// Cutoff `C` of the Kloosterman zeta functions.
    pub kloosterman_cutoff: u32,
    /// Truncation of the `c = 0` sum (`b_range`) and of the correction series
    /// (`height` sets the shift box `K(c) = max(k_min, ⌈H/c⌉)`, `c_cutoff`).
    pub correction: TruncationPolicy,
    pub k_min: u32,
    pub tol: f64,
    pub convention: Convention,
}

impl Default for FourierAssemblyConfig {
    fn default() -> Self {
        Self {
            r_max: 8,
            kloosterman_cutoff: 4000,
            correction: TruncationPolicy {
                height: 400,
                c_cutoff: 200,
                max_height: 400,
                ..TruncationPolicy::default()
            },
            k_min: 8,
            tol: 1e-3,
            convention: Convention::DERIVED,
        }
    }
}

impl FourierAssemblyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_max < 1 {
            return Err(Error::InvalidArgument("R must be >= 1".into()));
        }
        if self.kloosterman_cutoff < 16 {
            return Err(Error::InvalidArgument("Kloosterman cutoff C must be >= 16".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        self.correction.validate()
    }

    /// The policy echoed in results.
    fn echo_policy(&self) -> TruncationPolicy {
        TruncationPolicy {
            r_max: self.r_max,
            kloosterman_cutoff: self.kloosterman_cutoff,
            tol: self.tol,
            ..self.correction
        }
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rgamma(x: f64) -> f64 {
    recip_gamma(real(x)).re
}

fn check_lemma_range(n: u32, s: f64) -> Result<()> {
    if s > (n as f64 + 1.0) / 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "the expansion needs s > (n+1)/2, got n = {n}, s = {s}"
        )))
    }
}

/// Constant term of `Sₙ(z, 0, s)`:
/// `(−i)ⁿ 2^{2+n−2s} π Γ(2s−n−1) / (Γ(s) Γ(s−n)) · y^{1+n−2s}`.
pub fn s_series_constant(n: u32, s: f64, y: f64) -> Result<Complex64> {
    check_lemma_range(n, s)?;
    let nf = n as f64;
    let g = gamma_real(2.0 * s - nf - 1.0)?;
    let mag = 2f64.powf(2.0 + nf - 2.0 * s) * PI * g * rgamma(s) * rgamma(s - nf)
        * y.powf(1.0 + nf - 2.0 * s);
    Ok(Complex64::new(0.0, -1.0).powi(n as i32) * mag)
}

/// Coefficient of `e^{2πirx}` in `Sₙ(x + iy, 0, s)`:
/// `iⁿ √π / (2^{n−1} Γ(s)) · |πr|^{2s−n−1} Φ_{sgn r}(π|r|y, n, s−n−½)`.
pub fn s_series_mode(r: i64, n: u32, s: f64, y: f64) -> Result<Complex64> {
    check_lemma_range(n, s)?;
    if r == 0 {
        return Err(Error::InvalidArgument("mode index must be nonzero".into()));
    }
    let nf = n as f64;
    let pr = PI * r.unsigned_abs() as f64;
    let phi = phi_factor(PhiArgs::new(r.signum() as i8, pr * y, n, s - nf - 0.5)?)?;
    let mag = PI.sqrt() / 2f64.powf(nf - 1.0) * rgamma(s) * pr.powf(2.0 * s - nf - 1.0) * phi;
    Ok(Complex64::new(0.0, 1.0).powi(n as i32) * mag)
}

/// `Sₙ(z, 0, s)` from its Fourier expansion truncated at `|r| <= R`.
pub fn s_series_fourier(z: UpperHalfPoint, n: u32, s: f64, r_max: u32) -> Result<EvalResult> {
    let (x, y) = (z.re(), z.im());
    let mut value = s_series_constant(n, s, y)?;
    let phase = |r: i64| Complex64::from_polar(1.0, 2.0 * PI * r as f64 * x);
    for r in 1..=r_max as i64 {
        value += s_series_mode(r, n, s, y)? * phase(r) + s_series_mode(-r, n, s, y)? * phase(-r);
    }
    let next = r_max as i64 + 1;
    let err = s_series_mode(next, n, s, y)?.norm() + s_series_mode(-next, n, s, y)?.norm();
    Ok(EvalResult {
        value,
        err_estimate: err,
        method: Method::Fourier,
        policy: TruncationPolicy {
            r_max,
            ..TruncationPolicy::default()
        },
        warnings: vec![],
    })
}

/// `ζ(4s−2n−1) / Γ(2s−2n)`, continued through the simultaneous pole and
/// zero at `2s − n = 1` (for `n >= 1`).
fn zeta_over_gamma(n: u32, s: f64) -> Result<f64> {
    let delta = 2.0 * s - n as f64 - 1.0;
    if n >= 1 && delta.abs() < 1e-9 {
        // ζ(1 + 2δ) ≈ 1/(2δ), 1/Γ(−m + δ) ≈ (−1)^m m! δ with m = n − 1.
        let m = n - 1;
        let fact: f64 = (1..=m).map(|k| k as f64).product();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(sign * fact / 2.0);
    }
    let q = 4.0 * s - 2.0 * n as f64;
    if (q - 2.0).abs() < 1e-9 {
        return Err(Error::PoleAt { at: s });
    }
    Ok(zeta_real(q - 1.0)? * rgamma(2.0 * s - 2.0 * n as f64))
}

fn check_assembly_range(n: u32, s: f64) -> Result<f64> {
    let q = 4.0 * s - 2.0 * n as f64;
    if !(q > 1.5) || !(s > n as f64 / 2.0 + 0.25) {
        return Err(Error::InvalidArgument(format!(
            "coefficients need 4s − 2n > 3/2, got n = {n}, s = {s}"
        )));
    }
    Ok(q)
}

/// Constant term `Σ_c A⁰(c)` of the shifted series, continued to `s = n = 1`
/// where it equals `−3 / (Im z₁ Im z₂)`.
pub fn a0_sum(n: u32, s: f64, z1: UpperHalfPoint, z2: UpperHalfPoint, prefactors: Prefactors) -> Result<Complex64> {
    let q = check_assembly_range(n, s)?;
    let nf = n as f64;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let g = gamma_real(q - 1.0)?;
    let common = sign * PI * PI * g * g * rgamma(2.0 * s - nf).powi(2) * rgamma(2.0 * s)
        * zeta_over_gamma(n, s)?
        / zeta_real(q)?
        * (z1.im() * z2.im()).powf(1.0 + 2.0 * nf - 4.0 * s);
    let scale = match prefactors {
        Prefactors::Derived => 4f64.powf(2.0 + 2.0 * nf - 4.0 * s),
        Prefactors::AsPrinted => 4f64.powf(1.0 + 2.0 * nf - 4.0 * s),
    };
    Ok(real(common * scale))
}

/// `σ_{1−q}(r) / ζ(q)`: the Ramanujan-sum Dirichlet series.
fn ramanujan_dirichlet(r: i64, q: f64) -> Result<f64> {
    Ok(divisor_sigma(real(1.0 - q), r)?.re / zeta_real(q)?)
}

/// Coefficient of `e^{2πir Re z₂}` (`r ≠ 0`, `r′ = 0`).
pub fn ar_sum(r: i64, n: u32, s: f64, z1: UpperHalfPoint, z2: UpperHalfPoint, prefactors: Prefactors) -> Result<Complex64> {
    let q = check_assembly_range(n, s)?;
    if r == 0 {
        return Err(Error::InvalidArgument("r must be nonzero".into()));
    }
    let nf = n as f64;
    let dirichlet = ramanujan_dirichlet(r, q)?;
    match prefactors {
        Prefactors::Derived => {
            let p = s_series_mode(r, 0, 2.0 * s - nf, z2.im())?;
            // Vanishes at s = n = 1 through the 1/Γ(2s − 2n) of this constant.
            let q0 = s_series_constant(2 * n, 2.0 * s, z1.im())?;
            Ok(p * q0 * dirichlet)
        }
        Prefactors::AsPrinted => {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let ra = r.unsigned_abs() as f64;
            let lambda = 2.0 * s - nf - 0.5;
            let v = 4f64.powf(1.0 + nf - 2.0 * s) * sign * PI.powf(2.0 * s - nf - 1.0)
                * gamma_real(q - 1.0)?
                * rgamma(2.0 * s - 2.0 * nf)
                * rgamma(2.0 * s - nf)
                * rgamma(2.0 * s)
                * z1.im().powf(1.0 + 2.0 * nf - 4.0 * s)
                * z2.im().powf(0.5 + nf - 2.0 * s)
                * ra.powf(lambda)
                * bessel_k(lambda, 2.0 * PI * ra * z2.im())?
                * dirichlet;
            Ok(real(v))
        }
    }
}

/// Coefficient of `e^{2πir′ Re z₁}` (`r = 0`, `r′ ≠ 0`).
pub fn arprime_sum(rp: i64, n: u32, s: f64, z1: UpperHalfPoint, z2: UpperHalfPoint, prefactors: Prefactors) -> Result<Complex64> {
    arprime_with(rp, n, s, z1, z2, prefactors, phi_factor)
}

/// [`arprime_sum`] with a replaceable `Φ` evaluator.
pub fn arprime_with(
    rp: i64,
    n: u32,
    s: f64,
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    prefactors: Prefactors,
    phi: impl Fn(PhiArgs) -> Result<f64>,
) -> Result<Complex64> {
    let q = check_assembly_range(n, s)?;
    if rp == 0 {
        return Err(Error::InvalidArgument("r′ must be nonzero".into()));
    }
    let nf = n as f64;
    let dirichlet = ramanujan_dirichlet(rp, q)?;
    let ra = rp.unsigned_abs() as f64;
    let phi_v = phi(PhiArgs::new(rp.signum() as i8, PI * ra * z1.im(), 2 * n, 2.0 * s - 2.0 * nf - 0.5)?)?;
    match prefactors {
        Prefactors::Derived => {
            let p0 = s_series_constant(0, 2.0 * s - nf, z2.im())?;
            // Mode of S_{2n}(·, 2s) with Φ supplied by the caller.
            let mode = Complex64::new(0.0, 1.0).powi(2 * n as i32) * PI.sqrt()
                / 2f64.powf(2.0 * nf - 1.0)
                * rgamma(2.0 * s)
                * (PI * ra).powf(q - 1.0)
                * phi_v;
            Ok(p0 * mode * dirichlet)
        }
        Prefactors::AsPrinted => {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let v = sign * PI.powf(q - 0.5) * gamma_real(q - 1.0)?
                / 4f64.powf(2.0 * s - 1.0)
                * rgamma(2.0 * s - nf).powi(2)
                * rgamma(2.0 * s)
                * z2.im().powf(1.0 + 2.0 * nf - 4.0 * s)
                * ra.powf(q - 1.0)
                * phi_v
                * dirichlet;
            Ok(real(v))
        }
    }
}

/// `C(n, s) = (−1)ⁿ π^{6s−3n−½} / (4^{n−1} Γ(2s−n) Γ(2s))`.
pub fn c_prefactor(n: u32, s: f64) -> f64 {
    let nf = n as f64;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * PI.powf(6.0 * s - 3.0 * nf - 0.5) / 4f64.powf(nf - 1.0) * rgamma(2.0 * s - nf) * rgamma(2.0 * s)
}

/// The `z`-dependent factor of the double-sum coefficient, without the
/// Kloosterman zeta function.
fn double_mode_factor(r: i64, rp: i64, n: u32, s: f64, z1: UpperHalfPoint, z2: UpperHalfPoint) -> Result<f64> {
    let nf = n as f64;
    let q = 4.0 * s - 2.0 * nf;
    let (ra, rpa) = (r.unsigned_abs() as f64, rp.unsigned_abs() as f64);
    let lambda = 2.0 * s - nf - 0.5;
    let phi = phi_factor(PhiArgs::new(rp.signum() as i8, PI * rpa * z1.im(), 2 * n, 2.0 * s - 2.0 * nf - 0.5)?)?;
    Ok(c_prefactor(n, s)
        * ra.powf(lambda)
        * rpa.powf(q - 1.0)
        * z2.im().powf(-lambda)
        * bessel_k(lambda, 2.0 * PI * ra * z2.im())?
        * phi)
}

/// `√a Σ_{c>C} d(c) / c^{β}` with `β = q − ½`, from `Σ_{c<=x} d(c) ≈ x log x + (2γ−1)x`.
pub fn weil_tail(a: u64, q: f64, c_cut: u32) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let beta = q - 0.5;
    let c = c_cut as f64;
    let b1 = beta - 1.0;
    (a as f64).sqrt() * c.powf(-b1) * (c.ln() / b1 + 1.0 / (b1 * b1) + 2.0 * EULER_GAMMA / b1)
}

/// Truncated Kloosterman zeta values `Σ_{c<=C} K(σr, r′; c) / c^q` for a
/// batch of index pairs, in one pass over `c`.
pub fn kloosterman_zeta(pairs: &[(i64, i64)], q: f64, c_cut: u32, sign: KloostermanSign) -> Vec<f64> {
    const BLOCK: u32 = 64;
    let blocks: Vec<Vec<f64>> = (0..c_cut.div_ceil(BLOCK))
        .into_par_iter()
        .map(|blk| {
            let mut acc: Vec<KahanSum> = vec![KahanSum::default(); pairs.len()];
            let lo = blk * BLOCK + 1;
            let hi = ((blk + 1) * BLOCK).min(c_cut);
            for c in lo..=hi {
                let c64 = c as u64;
                let units = unit_pairs(c64);
                let cos: Vec<f64> = (0..c64).map(|k| (2.0 * PI * k as f64 / c as f64).cos()).collect();
                let weight = (c as f64).powf(-q);
                for (slot, &(r, rp)) in acc.iter_mut().zip(pairs) {
                    let a = match sign {
                        KloostermanSign::Derived => -r,
                        KloostermanSign::AsPrinted => r,
                    }
                    .rem_euclid(c as i64) as u64;
                    let b = rp.rem_euclid(c as i64) as u64;
                    let mut k = 0.0;
                    for &(m, mi) in &units {
                        k += cos[((a * m + b * mi) % c64) as usize];
                    }
                    slot.add(k * weight);
                }
            }
            acc.iter().map(KahanSum::value).collect()
        })
        .collect();
    let mut out = vec![KahanSum::default(); pairs.len()];
    for block in &blocks {
        for (o, v) in out.iter_mut().zip(block) {
            o.add(*v);
        }
    }
    out.iter().map(KahanSum::value).collect()
}

/// Double-sum coefficient `Σ_c A^{r,r′}(c)` with its Weil tail bound.
pub fn arrprime_sum(
    r: i64,
    rp: i64,
    n: u32,
    s: f64,
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    c_cut: u32,
    sign: KloostermanSign,
    tol: f64,
) -> Result<EvalResult> {
    let q = check_assembly_range(n, s)?;
    if r == 0 || rp == 0 {
        return Err(Error::InvalidArgument("r and r′ must be nonzero".into()));
    }
    let factor = double_mode_factor(r, rp, n, s, z1, z2)?;
    let zeta = kloosterman_zeta(&[(r, rp)], q, c_cut, sign)[0];
    let a = r.unsigned_abs().min(rp.unsigned_abs());
    let bound = factor.abs() * weil_tail(a, q, c_cut);
    if bound > tol {
        return Err(Error::TailTooLarge { bound, tol });
    }
    Ok(EvalResult {
        value: real(factor * zeta),
        err_estimate: bound,
        method: Method::Fourier,
        policy: TruncationPolicy {
            kloosterman_cutoff: c_cut,
            ..TruncationPolicy::default()
        },
        warnings: vec![],
    })
}

/// Bound on the double-sum coefficient: `|C(n,s)| ζ(q−½)² √a`
/// times the Bessel and `Φ` factors (with the `√a` of the Weil corollary).
pub fn arrprime_bound(r: i64, rp: i64, n: u32, s: f64, z1: UpperHalfPoint, z2: UpperHalfPoint) -> Result<f64> {
    let q = check_assembly_range(n, s)?;
    let a = r.unsigned_abs().min(rp.unsigned_abs()) as f64;
    let z = zeta_real(q - 0.5)?;
    Ok(double_mode_factor(r, rp, n, s, z1, z2)?.abs() * z * z * a.sqrt())
}

/// Reusable Fourier assembly at fixed `(n, s)`: caches Kloosterman zeta values.
pub struct FourierAssembler {
    n: u32,
    s: f64,
    q: f64,
    cfg: FourierAssemblyConfig,
    zeta_cache: Mutex<HashMap<(i64, i64), f64>>,
}

/// Pieces of one assembled value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assembly {
    pub xi0: Complex64,
    pub shifted: Complex64,
    pub correction: Complex64,
    pub err_xi0: f64,
    pub err_shifted: f64,
    pub err_correction: f64,
}

impl Assembly {
    pub fn value(&self) -> Complex64 {
        self.xi0 + 2.0 * (self.shifted + self.correction)
    }

    pub fn err_estimate(&self) -> f64 {
        self.err_xi0 + 2.0 * (self.err_shifted + self.err_correction)
    }
}

impl FourierAssembler {
    pub fn new(n: u32, s: f64, cfg: FourierAssemblyConfig) -> Result<Self> {
        cfg.validate()?;
        if n > 1 {
            return Err(Error::InvalidArgument(format!("assembly supports n ∈ {{0, 1}}, got {n}")));
        }
        if s < 1.0 {
            return Err(Error::InvalidArgument(format!("assembly needs s >= 1, got {s}")));
        }
        let q = check_assembly_range(n, s)?;
        Ok(Self {
            n,
            s,
            q,
            cfg,
            zeta_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &FourierAssemblyConfig {
        &self.cfg
    }

    fn zetas(&self, pairs: &[(i64, i64)]) -> Vec<f64> {
        let mut cache = self.zeta_cache.lock().expect("cache lock");
        // K(a, b; c) = K(−a, −b; c), so (r, r′) and (−r, −r′) share a value.
        let key = |(r, rp): (i64, i64)| if r < 0 { (-r, -rp) } else { (r, rp) };
        let mut missing: Vec<(i64, i64)> = pairs.iter().map(|&p| key(p)).filter(|k| !cache.contains_key(k)).collect();
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            let values = kloosterman_zeta(&missing, self.q, self.cfg.kloosterman_cutoff, self.cfg.convention.kloosterman);
            cache.extend(missing.into_iter().zip(values));
        }
        pairs.iter().map(|&p| cache[&key(p)]).collect()
    }

    /// `Ξ̃ᶜ` from its double Fourier series.
    pub fn shifted(&self, z1: UpperHalfPoint, z2: UpperHalfPoint) -> Result<(Complex64, f64)> {
        let (n, s, q) = (self.n, self.s, self.q);
        let conv = self.cfg.convention;
        let rmax = self.cfg.r_max as i64;
        let e = |t: f64| Complex64::from_polar(1.0, 2.0 * PI * t);
        let (x1, x2) = (z1.re(), z2.re());
        let mut total = a0_sum(n, s, z1, z2, conv.prefactors)?;
        let mut err = 0.0;
        for r in (-rmax..=rmax).filter(|&r| r != 0) {
            total += ar_sum(r, n, s, z1, z2, conv.prefactors)? * e(r as f64 * x2);
            total += arprime_sum(r, n, s, z1, z2, conv.prefactors)? * e(r as f64 * x1);
        }
        for r in [rmax + 1, -rmax - 1] {
            err += ar_sum(r, n, s, z1, z2, conv.prefactors)?.norm()
                + arprime_sum(r, n, s, z1, z2, conv.prefactors)?.norm();
        }
        // Double modes: keep those whose Weil-bounded size is not negligible.
        let zeta_bound = zeta_real(q - 0.5)?.powi(2);
        let mut pairs = Vec::new();
        let mut factors = Vec::new();
        for r in (-rmax..=rmax).filter(|&r| r != 0) {
            for rp in (-rmax..=rmax).filter(|&r| r != 0) {
                let f = double_mode_factor(r, rp, n, s, z1, z2)?;
                let a = r.unsigned_abs().min(rp.unsigned_abs()) as f64;
                if f.abs() * a.sqrt() * zeta_bound < 1e-17 {
                    continue;
                }
                pairs.push((r, rp));
                factors.push(f);
            }
        }
        for r in [rmax + 1, -rmax - 1] {
            for rp in [1, -1, rmax + 1, -rmax - 1] {
                err += arrprime_bound(r, rp, n, s, z1, z2)? + arrprime_bound(rp, r, n, s, z1, z2)?;
            }
        }
        let zetas = self.zetas(&pairs);
        for ((&(r, rp), f), z) in pairs.iter().zip(&factors).zip(&zetas) {
            let phase = match conv.pairing {
                PhasePairing::Consistent => e(r as f64 * x2 + rp as f64 * x1),
                PhasePairing::AsPrinted => e(r as f64 * x1 + rp as f64 * x2),
            };
            total += phase * (f * z);
            let a = r.unsigned_abs().min(rp.unsigned_abs());
            err += f.abs() * weil_tail(a, q, self.cfg.kloosterman_cutoff);
        }
        Ok((total, err))
    }

    /// `Σ_{c>0} (true − shifted)` by direct summation.
    pub fn correction(&self, z1: UpperHalfPoint, z2: UpperHalfPoint) -> Result<(Complex64, f64)> {
        let pol = &self.cfg.correction;
        let lanes = c_slice_sums(z1, z2, self.n, self.s, SliceMode::Difference, pol.height, pol.c_cutoff, self.cfg.k_min);
        Ok(extrapolate_slices(&lanes, self.q, self.q))
    }

    /// All pieces of `Ξₙ(z₁, z₂, s)`.
    pub fn assemble(&self, z1: UpperHalfPoint, z2: UpperHalfPoint) -> Result<Assembly> {
        let xi0_policy = TruncationPolicy {
            tol: 1e-2,
            ..self.cfg.correction
        };
        let xi0 = xi0_direct(z1, z2, self.n, self.s, &xi0_policy)?;
        let (shifted, err_shifted) = self.shifted(z1, z2)?;
        let (correction, err_correction) = self.correction(z1, z2)?;
        Ok(Assembly {
            xi0: xi0.value,
            shifted,
            correction,
            err_xi0: xi0.err_estimate,
            err_shifted,
            err_correction,
        })
    }

    pub fn eval(&self, z1: UpperHalfPoint, z2: UpperHalfPoint) -> Result<EvalResult> {
        let a = self.assemble(z1, z2)?;
        let result = EvalResult {
            value: a.value(),
            err_estimate: a.err_estimate(),
            method: Method::Fourier,
            policy: self.cfg.echo_policy(),
            warnings: vec![],
        };
        if result.err_estimate > self.cfg.tol * result.value.norm().max(1.0) {
            return Err(Error::NotConverged {
                what: "xi_fourier".into(),
                err: result.err_estimate,
                tol: self.cfg.tol,
            });
        }
        Ok(result)
    }
}

/// `Ξₙ(z₁, z₂, s)` by the Fourier assembly, valid for real `s >= 1`.
pub fn xi_fourier(z1: UpperHalfPoint, z2: UpperHalfPoint, n: u32, s: f64, cfg: &FourierAssemblyConfig) -> Result<EvalResult> {
    FourierAssembler::new(n, s, *cfg)?.eval(z1, z2)
}

/// Value at `x` of the interpolating polynomial through `(xs, ys)` (Neville).
pub fn neville(xs: &[f64], ys: &[Complex64], x: f64) -> Complex64 {
    let mut p = ys.to_vec();
    let k = xs.len();
    for m in 1..k {
        for i in 0..k - m {
            p[i] = ((x - xs[i + m]) * p[i] + (xs[i] - x) * p[i + 1]) / (xs[i] - xs[i + m]);
        }
    }
    p[0]
}

/// Lagrange basis values at `x`: the sensitivity of the extrapolant to each sample.
fn lagrange_weights(xs: &[f64], x: f64) -> Vec<f64> {
    (0..xs.len())
        .map(|i| {
            xs.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (x - xj) / (xs[i] - xj))
                .product()
        })
        .collect()
}

/// Sample exponents for extrapolating to `s = 1`. Clustering the samples near
/// the target keeps the degree-4 interpolant well conditioned; the wider
/// `{1.2, 1.4, 1.6}` loses about two digits.
pub const DEFAULT_SAMPLES: [f64; 5] = [1.1, 1.15, 1.2, 1.25, 1.3];
/// The three-point set `{1.2, 1.4, 1.6}`, kept for comparison.
pub const WIDE_SAMPLES: [f64; 3] = [1.2, 1.4, 1.6];

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < 3 || samples.len() > 5 {
        return Err(Error::InvalidArgument(format!(
            "extrapolation needs 3 to 5 samples (degree <= 4), got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&s| !(s > 1.0 && s <= 1.8)) {
        return Err(Error::InvalidArgument("samples must lie in (1, 1.8]".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("samples must be distinct".into()));
    }
    Ok(())
}

/// Extrapolates sampled values to `target`; the error combines the change
/// from dropping the farthest sample with the propagated sample errors.
fn extrapolate(samples: &[f64], values: &[EvalResult], target: f64, policy: &TruncationPolicy) -> EvalResult {
    let ys: Vec<Complex64> = values.iter().map(|v| v.value).collect();
    let full = neville(samples, &ys, target);
    let far = (0..samples.len())
        .max_by(|&i, &j| (samples[i] - target).abs().total_cmp(&(samples[j] - target).abs()))
        .expect("nonempty");
    let (xs_r, ys_r): (Vec<f64>, Vec<Complex64>) = samples
        .iter()
        .zip(&ys)
        .enumerate()
        .filter(|&(i, _)| i != far)
        .map(|(_, (&x, &y))| (x, y))
        .unzip();
    let reduced = neville(&xs_r, &ys_r, target);
    let propagated: f64 = lagrange_weights(samples, target)
        .iter()
        .zip(values)
        .map(|(w, v)| w.abs() * v.err_estimate)
        .sum();
    let mut warnings: Vec<String> = values.iter().flat_map(|v| v.warnings.clone()).collect();
    warnings.sort();
    warnings.dedup();
    EvalResult {
        value: full,
        err_estimate: (full - reduced).norm() + propagated,
        method: Method::Extrapolated,
        policy: *policy,
        warnings,
    }
}

/// `Ξₙ(z₁, z₂, s_target)` by polynomial extrapolation of direct sums sampled
/// at `samples`.
pub fn xi_extrapolated(
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    n: u32,
    s_target: f64,
    samples: &[f64],
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    check_samples(samples)?;
    let values = samples
        .iter()
        .map(|&s| xi_direct(z1, z2, n, s, policy))
        .collect::<Result<Vec<_>>>()?;
    Ok(extrapolate(samples, &values, s_target, policy))
}

/// `ω₂(z₁, z̄₂) = lim_{s→1} Ω₁(z₁, z̄₂, s)`, by extrapolation.
pub fn omega2(z1: UpperHalfPoint, z2: UpperHalfPoint, samples: &[f64], policy: &TruncationPolicy) -> Result<EvalResult> {
    check_samples(samples)?;
    let values = samples
        .iter()
        .map(|&s| omega_n_direct(z1, z2, 1, s, policy))
        .collect::<Result<Vec<_>>>()?;
    Ok(extrapolate(samples, &values, 1.0, policy))
}

/// Residue of `Ψ¹` or `Ψ²` at `s = 1`, from `(s − 1)Ψ` sampled at `samples`
/// and extrapolated. Terms of height `<= 2` are holomorphic at `s = 1` and
/// are dropped to keep the interpolant smooth.
pub fn psi_residue(which: PsiKind, z1: UpperHalfPoint, z2: UpperHalfPoint, samples: &[f64], height: u32) -> Result<f64> {
    check_samples(samples)?;
    let values: Vec<Complex64> = samples
        .iter()
        .map(|&s| {
            let kernel = match which {
                PsiKind::One => Kernel::Psi1 { s },
                PsiKind::Two => Kernel::Psi2 { s },
            };
            let sums = lattice_sum(kernel, z1, z2, 1, height, |g| g.height() > 2);
            sums.extrapolate(kernel.decay_degree() - 2.0).0 * (s - 1.0)
        })
        .collect();
    Ok(neville(samples, &values, 1.0).re)
}

/// The completion constant `κ` in `Ξ*₁ = (z₂ − z̄₂) Ξ₁ − κ / (z₁ − z̄₁)`.
pub const XI_STAR_PRINTED: f64 = 12.0;
/// The constant that makes `Ξ*₁` holomorphic in `z₁`.
pub const XI_STAR_HOLOMORPHIC: f64 = 24.0;

/// `(z₂ − z̄₂) Ξ₁(z₁, z₂) − κ / (z₁ − z̄₁)` from a value of `Ξ₁` at `s = 1`.
pub fn complete(xi1: Complex64, z1: UpperHalfPoint, z2: UpperHalfPoint, kappa: f64) -> Complex64 {
    let two_i = |z: UpperHalfPoint| Complex64::new(0.0, 2.0 * z.im());
    two_i(z2) * xi1 - kappa / two_i(z1)
}

/// `Ξ*₁(z₁, z₂)` with the printed completion constant `12`.
pub fn xi_star(z1: UpperHalfPoint, z2: UpperHalfPoint, cfg: &FourierAssemblyConfig) -> Result<EvalResult> {
    xi_star_with(z1, z2, cfg, XI_STAR_PRINTED)
}

/// `Ξ*₁(z₁, z₂)` with completion constant `kappa`.
pub fn xi_star_with(z1: UpperHalfPoint, z2: UpperHalfPoint, cfg: &FourierAssemblyConfig, kappa: f64) -> Result<EvalResult> {
    let xi = xi_fourier(z1, z2, 1, 1.0, cfg)?;
    Ok(EvalResult {
        value: complete(xi.value, z1, z2, kappa),
        err_estimate: xi.err_estimate * 2.0 * z2.im(),
        ..xi
    })
}
