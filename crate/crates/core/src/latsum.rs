//! Direct truncated evaluation of the lattice series over integer matrices.
//!
//! All series are sums over `γ = (a b; c d)` of a kernel evaluated at the two
//! bilinear forms
//!
//! ```text
//! μ₁ = μ_γ(z₁, -z₂) = c z₁ z₂ + d z₂ - a z₁ - b
//! μ₂ = μ_γ(z₁, -z̄₂) = c z₁ z̄₂ + d z̄₂ - a z₁ - b
//! ```
//!
//! Matrices are truncated by height `max(|a|, |b|, |c|, |d|) <= H`. The
//! partial sums at `H`, `H/2` and `H/4` are accumulated together; since the
//! kernels are asymptotically homogeneous, the tail behaves like `H^{-p}` for a
//! known `p`, and the difference of the last two shells gives both a
//! Richardson correction and the reported error estimate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{extended_gcd, gcd, mod_inverse, unit_pairs};
use crate::error::{Error, Result};
use crate::point::{IntMatrix2, ReIm, UpperHalfPoint};
use crate::sum::{par_tree_sum, ComplexSum, LaneSums, Lanes};

/// All truncation parameters in one value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Matrix height bound `H`.
    pub height: u32,
    /// `b`-range for the `c = 0` sums and the `ν`-range of `S_n`.
    pub b_range: u32,
    /// Cutoff on `c` for the `c`-sliced sums.
    pub c_cutoff: u32,
    /// Fourier index cutoff `R`.
    pub r_max: u32,
    /// Cutoff on `c` for the Kloosterman zeta function.
    pub kloosterman_cutoff: u32,
    /// Requested tolerance, relative to `max(1, |value|)`.
    pub tol: f64,
    /// Distance kept from each absolute-convergence boundary.
    pub margin: f64,
    /// Heights are doubled up to this bound while the error exceeds `tol`.
    pub max_height: u32,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            height: 200,
            b_range: 10_000,
            c_cutoff: 200,
            r_max: 8,
            kloosterman_cutoff: 4000,
            tol: 1e-2,
            margin: 0.1,
            max_height: 200,
        }
    }
}

impl TruncationPolicy {
    pub fn with_height(mut self, h: u32) -> Self {
        self.height = h;
        self.max_height = self.max_height.max(h);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.height,
            self.b_range,
            self.c_cutoff,
            self.r_max,
            self.kloosterman_cutoff,
        ];
        if positive.iter().any(|&v| v == 0) {
            return Err(Error::InvalidArgument("all cutoffs must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(Error::InvalidArgument(format!(
                "tol must lie in (0, 1e-2], got {}",
                self.tol
            )));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::InvalidArgument("margin must be nonnegative".into()));
        }
        Ok(())
    }
}

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Fourier,
    Extrapolated,
}

/// A computed value with its error estimate and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    #[serde(with = "complex_json")]
    pub value: Complex64,
    pub err_estimate: f64,
    pub method: Method,
    pub policy: TruncationPolicy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub(crate) mod complex_json {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReIm::from(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Complex64, D::Error> {
        ReIm::deserialize(d).map(Complex64::from)
    }
}

impl EvalResult {
    fn within_tol(&self) -> bool {
        self.err_estimate <= self.policy.tol * self.value.norm().max(1.0)
    }

    fn require_converged(self, what: &str) -> Result<Self> {
        if self.err_estimate.is_finite() && self.within_tol() {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                what: what.to_string(),
                err: self.err_estimate,
                tol: self.policy.tol,
            })
        }
    }
}

/// `μ_γ(z₁, -w) = c z₁ w + d w - a z₁ - b`.
pub fn mu(gamma: &IntMatrix2, z1: UpperHalfPoint, w: Complex64) -> Complex64 {
    let z = z1.z();
    z * w * gamma.c as f64 + w * gamma.d as f64 - z * gamma.a as f64 - gamma.b as f64
}

/// Calls `visit` for every matrix of determinant `m` and height `<= h` whose
/// lower-left entry is `c`.
fn for_each_with_c(m: i64, h: i64, c: i64, mut visit: impl FnMut(IntMatrix2)) {
    for d in -h..=h {
        if c == 0 && d == 0 {
            continue;
        }
        let g = gcd(c.unsigned_abs(), d.unsigned_abs()) as i64;
        if m % g != 0 {
            continue;
        }
        // u d + v c = g  ⇒  a = u m/g, b = -v m/g solves a d - b c = m.
        let (_, u, v) = extended_gcd(d, c);
        let (a0, b0) = (u * (m / g), -v * (m / g));
        let (step_a, step_b) = (c / g, d / g);
        let (mut lo, mut hi) = (i64::MIN, i64::MAX);
        let mut feasible = true;
        for (base, step) in [(a0, step_a), (b0, step_b)] {
            if step == 0 {
                feasible &= base.abs() <= h;
            } else {
                // |base + t step| <= h.
                let (x, y) = ((-h - base) as f64 / step as f64, (h - base) as f64 / step as f64);
                let (x, y) = (x.min(y), x.max(y));
                lo = lo.max(x.ceil() as i64);
                hi = hi.min(y.floor() as i64);
            }
        }
        if !feasible || lo > hi {
            continue;
        }
        for t in lo..=hi {
            visit(IntMatrix2::new(a0 + t * step_a, b0 + t * step_b, c, d));
        }
    }
}

/// All integer matrices with determinant `m` and height at most `h`.
pub fn enumerate_matrices(m: u32, h: u32) -> Vec<IntMatrix2> {
    let (m, h) = (m as i64, h as i64);
    let mut out = Vec::new();
    for c in -h..=h {
        for_each_with_c(m, h, c, |g| out.push(g));
    }
    out
}

/// Summand of a lattice series as a function of `(μ₁, μ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `conj(μ₁μ₂)ⁿ / |μ₁μ₂|^{2s}`.
    Xi { n: u32, s: f64 },
    /// `μ₂^{-k}`.
    Omega { k: u32 },
    /// `conj(μ₁)^{n-1} conj(μ₂)^{n+1} / (|μ₁|^{2s-2} |μ₂|^{2s+2})`.
    OmegaN { n: u32, s: f64 },
    /// `1 / (|μ₁|^{2s} |μ₂|^{2s-2})`.
    Psi1 { s: f64 },
    /// `1 / (|μ₁|^{2s-2} |μ₂|^{2s})`.
    Psi2 { s: f64 },
    /// `conj(μ₂)² / |μ₁μ₂|^{2s}`, the sum multiplied by `(1-s)` in `∂/∂z̄₂`.
    DbarZ2 { s: f64 },
}

impl Kernel {
    #[inline]
    pub fn term(&self, m1: Complex64, m2: Complex64) -> Complex64 {
        match *self {
            Kernel::Xi { n, s } => {
                let p = m1 * m2;
                let mag = (-s * p.norm_sqr().ln()).exp();
                if n == 0 {
                    Complex64::new(mag, 0.0)
                } else {
                    p.conj().powi(n as i32) * mag
                }
            }
            Kernel::Omega { k } => m2.powi(-(k as i32)),
            Kernel::OmegaN { n, s } => {
                let (a, b) = (m1.norm_sqr(), m2.norm_sqr());
                let mag = (-(s - 1.0) * a.ln() - (s + 1.0) * b.ln()).exp();
                m1.conj().powi(n as i32 - 1) * m2.conj().powi(n as i32 + 1) * mag
            }
            Kernel::Psi1 { s } => {
                let (a, b) = (m1.norm_sqr(), m2.norm_sqr());
                Complex64::new((-s * a.ln() - (s - 1.0) * b.ln()).exp(), 0.0)
            }
            Kernel::Psi2 { s } => {
                let (a, b) = (m1.norm_sqr(), m2.norm_sqr());
                Complex64::new((-(s - 1.0) * a.ln() - s * b.ln()).exp(), 0.0)
            }
            Kernel::DbarZ2 { s } => {
                let mag = (-s * (m1 * m2).norm_sqr().ln()).exp();
                m2.conj() * m2.conj() * mag
            }
        }
    }

    /// Total homogeneity degree `δ`: the summand decays like `|γ|^{-δ}`.
    pub fn decay_degree(&self) -> f64 {
        match *self {
            Kernel::Xi { n, s } => 4.0 * s - 2.0 * n as f64,
            Kernel::Omega { k } => k as f64,
            Kernel::OmegaN { n, s } => 4.0 * s - 2.0 * n as f64,
            Kernel::Psi1 { s } | Kernel::Psi2 { s } => 4.0 * s - 2.0,
            Kernel::DbarZ2 { s } => 4.0 * s - 2.0,
        }
    }

    /// Smallest `s`-independent-of-margin threshold for absolute convergence.
    pub fn converges(&self) -> bool {
        self.decay_degree() > 2.0
    }
}

/// Partial sums of one lattice series at heights `H`, `H/2`, `H/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellSums {
    pub height: u32,
    pub full: Complex64,
    pub half: Complex64,
    pub quarter: Complex64,
}

/// Direct matrix sum of `kernel` over determinant-`m` matrices of height `<= h`.
pub fn lattice_sum(
    kernel: Kernel,
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    m: u32,
    h: u32,
    include: impl Fn(&IntMatrix2) -> bool + Sync + Send + Copy,
) -> ShellSums {
    let (mi, hi) = (m as i64, h as i64);
    let (h2, h4) = (hi / 2, hi / 4);
    let (zz, zzbar) = (z1.z() * z2.z(), z1.z() * z2.conj());
    let (w1, w2, x1) = (z2.z(), z2.conj(), z1.z());
    let lanes = par_tree_sum((2 * hi + 1) as usize, Lanes::<3>::ZERO, move |idx| {
        let c = idx as i64 - hi;
        let mut acc = LaneSums::<3>::default();
        for_each_with_c(mi, hi, c, |g| {
            if !include(&g) {
                return;
            }
            let (a, b, cf, d) = (g.a as f64, g.b as f64, g.c as f64, g.d as f64);
            let m1 = zz * cf + w1 * d - x1 * a - b;
            let m2 = zzbar * cf + w2 * d - x1 * a - b;
            let t = kernel.term(m1, m2);
            let ht = g.height();
            acc.0[0].add(t);
            if ht <= h2 {
                acc.0[1].add(t);
            }
            if ht <= h4 {
                acc.0[2].add(t);
            }
        });
        acc.value()
    });
    ShellSums {
        height: h,
        full: lanes.0[0],
        half: lanes.0[1],
        quarter: lanes.0[2],
    }
}

impl ShellSums {
    /// Richardson-corrected value and error estimate for tail `∝ H^{-p}`.
    ///
    /// The estimate is the change of the corrected value from `H/2` to `H`,
    /// which bounds the error at `H` whenever the correction is working.
    pub fn extrapolate(&self, p: f64) -> (Complex64, f64) {
        if p <= 0.0 {
            return (self.full, f64::INFINITY);
        }
        let r = 1.0 / (2f64.powf(p) - 1.0);
        let at_full = self.full + (self.full - self.half) * r;
        let at_half = self.half + (self.half - self.quarter) * r;
        let floor = 4.0 * f64::EPSILON * at_full.norm();
        (at_full, (at_full - at_half).norm().max(floor))
    }
}

/// Warning text when `s` sits within the margin of a convergence boundary.
fn margin_warning(s: f64, boundary: f64, margin: f64) -> Option<String> {
    (s <= boundary + margin).then(|| {
        format!("NotAbsolutelyConvergent: s = {s} is within {margin} of the boundary {boundary}")
    })
}

fn lattice_eval(
    kernel: Kernel,
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    m: u32,
    policy: &TruncationPolicy,
    warnings: Vec<String>,
    what: &str,
) -> Result<EvalResult> {
    policy.validate()?;
    let p = kernel.decay_degree() - 2.0;
    let mut h = policy.height;
    loop {
        let sums = lattice_sum(kernel, z1, z2, m, h, |_| true);
        let (value, err) = sums.extrapolate(p);
        let result = EvalResult {
            value,
            err_estimate: err,
            method: Method::Direct,
            policy: TruncationPolicy { height: h, ..*policy },
            warnings: warnings.clone(),
        };
        if result.within_tol() || h * 2 > policy.max_height {
            return result.require_converged(what);
        }
        h *= 2;
    }
}

/// Kernel `ω_m(z₁, z̄₂, k) = Σ μ_γ(z₁, -z̄₂)^{-k}` over determinant-`m` matrices.
pub fn omega_direct(
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    k: u32,
    m: u32,
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    if k < 4 || k % 2 == 1 {
        return Err(Error::InvalidArgument(format!("ω needs even k >= 4, got {k}")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("determinant must be >= 1".into()));
    }
    lattice_eval(Kernel::Omega { k }, z1, z2, m, policy, vec![], "omega")
}

/// `Ξₙ(z₁, z₂, s)` by direct matrix summation.
pub fn xi_direct(
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    n: u32,
    s: f64,
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    let boundary = (n as f64 + 1.0) / 2.0;
    check_above(s, boundary, "Ξ")?;
    let warnings = margin_warning(s, boundary, policy.margin).into_iter().collect();
    lattice_eval(Kernel::Xi { n, s }, z1, z2, 1, policy, warnings, "xi_direct")
}

/// `Ωₙ(z₁, z̄₂, s)` by direct matrix summation.
pub fn omega_n_direct(
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    n: u32,
    s: f64,
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    let boundary = (n as f64 + 1.0) / 2.0;
    check_above(s, boundary, "Ω")?;
    let warnings = margin_warning(s, 1.0, policy.margin).into_iter().collect();
    lattice_eval(Kernel::OmegaN { n, s }, z1, z2, 1, policy, warnings, "omega_n_direct")
}

/// Which of the two auxiliary positive sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsiKind {
    One,
    Two,
}

/// `Ψ¹` or `Ψ²` by direct summation.
pub fn psi_direct(
    which: PsiKind,
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    s: f64,
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    check_above(s, 1.0, "Ψ")?;
    let kernel = match which {
        PsiKind::One => Kernel::Psi1 { s },
        PsiKind::Two => Kernel::Psi2 { s },
    };
    let warnings = margin_warning(s, 1.0, policy.margin).into_iter().collect();
    lattice_eval(kernel, z1, z2, 1, policy, warnings, "psi_direct")
}

fn check_above(s: f64, boundary: f64, what: &str) -> Result<()> {
    if s > boundary {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} diverges for s = {s} <= {boundary}"
        )))
    }
}

/// The `c = 0` summand: `γ = ±(1 b; 0 1)`.
fn xi0_term(z1: UpperHalfPoint, z2: UpperHalfPoint, n: u32, s: f64, b: f64) -> Complex64 {
    // μ for (1 b; 0 1), with b allowed to be real for the tail integral.
    let m1 = z2.z() - z1.z() - b;
    let m2 = z2.conj() - z1.z() - b;
    Kernel::Xi { n, s }.term(m1, m2)
}

/// `Σ_{ν > 0} f(ν)` tail model: `∫_{T}^{∞} (σu - iy)ⁿ (u² + y²)^{-s} du` by
/// its large-`T` expansion.
fn power_tail(t: f64, sigma: f64, y: f64, n: u32, s: f64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    let minus_iy = Complex64::new(0.0, -y);
    let mut binom_n = 1.0;
    for k in 0..=n {
        // (σu)^{n-k} (-iy)^k  with  C(n, k).
        let coef_k = binom_n * sigma.powi((n - k) as i32) * minus_iy.powi(k as i32);
        let mut binom_s = 1.0; // C(-s, m)
        for m in 0..8u32 {
            let expo = n as f64 - k as f64 - 2.0 * s - 2.0 * m as f64;
            // ∫_T^∞ u^{expo} du.
            let integral = t.powf(expo + 1.0) / (-(expo + 1.0));
            total += coef_k * binom_s * y.powi(2 * m as i32) * integral;
            binom_s *= (-s - m as f64) / (m as f64 + 1.0);
        }
        binom_n *= (n - k) as f64 / (k as f64 + 1.0);
    }
    total
}

/// Sum of the `c = 0` part of `Ξₙ`: `2 Σ_{b ∈ Z} term(b)` over the `±` pair.
pub fn xi0_direct(
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    n: u32,
    s: f64,
    policy: &TruncationPolicy,
) -> Result<EvalResult> {
    policy.validate()?;
    let boundary = (2.0 * n as f64 + 1.0) / 4.0;
    check_above(s, boundary, "Ξ⁰")?;
    let bmax = policy.b_range as i64;
    let mut full = ComplexSum::default();
    let mut half = ComplexSum::default();
    for b in -bmax..=bmax {
        let t = xi0_term(z1, z2, n, s, b as f64);
        full.add(t);
        if b.abs() <= bmax / 2 {
            half.add(t);
        }
    }
    let x = z2.re() - z1.re();
    let tail = |bm: i64| xi0_tail(bm as f64 + 0.5, x, z1.im(), z2.im(), n, s);
    let value_full = 2.0 * (full.value() + tail(bmax));
    let value_half = 2.0 * (half.value() + tail(bmax / 2));
    let err = (value_full - value_half).norm();
    let warnings = margin_warning(s, boundary, policy.margin).into_iter().collect();
    EvalResult {
        value: value_full,
        err_estimate: err,
        method: Method::Direct,
        policy: *policy,
        warnings,
    }
    .require_converged("xi0_direct")
}

/// Tail `Σ_{|b| > B}` of the `c = 0` terms, as the integral of the exact
/// summand from `B + 1/2` outward (midpoint rule for the sum).
///
/// The summand decays like `u^{-q}`; substituting `u = T v^{-κ}` with
/// `κ = 2/(q-1)` turns the integral into one over `(0, 1]` with an integrand
/// vanishing linearly at `v = 0`.
fn xi0_tail(t: f64, x: f64, y1: f64, y2: f64, n: u32, s: f64) -> Complex64 {
    let z1 = UpperHalfPoint::new(0.0, y1).expect("y1 > 0");
    let z2 = UpperHalfPoint::new(x, y2).expect("y2 > 0");
    let q = 4.0 * s - 2.0 * n as f64;
    let kappa = 2.0 / (q - 1.0);
    let nodes = 400;
    let mut acc = ComplexSum::default();
    for i in 0..nodes {
        let v = (i as f64 + 0.5) / nodes as f64;
        let u = t * v.powf(-kappa);
        let jac = kappa * u / v;
        acc.add((xi0_term(z1, z2, n, s, u) + xi0_term(z1, z2, n, s, -u)) * jac);
    }
    acc.value() / nodes as f64
}

/// The pieces of the `c > 0` sum for one modulus: units `α`, inverses `α*`.
fn slice_pairs(c: u64) -> Vec<(i64, i64)> {
    unit_pairs(c)
        .into_iter()
        .map(|(a, ai)| (a as i64, ai as i64))
        .collect()
}

/// Which `c > 0` series to sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceMode {
    /// The true summand.
    True,
    /// The summand with `1/c` removed from both `μ`'s.
    Shifted,
    /// `true - shifted`, the continuation correction.
    Difference,
}

/// Per-`(c, α)` lattice-shift bound: `K(c) = max(k_min, ⌈H/c⌉)`, which keeps
/// the matrix entries `a ≈ ck`, `d ≈ cl` inside a box of height `H`.
pub fn shift_bound(height: u32, c: u64, k_min: u32) -> i64 {
    ((height as u64).div_ceil(c) as i64).max(k_min as i64)
}

/// Sums over `c ∈ [1, C]`, units `α mod c`, and shifts `|k|, |l| <= K(c)` of
/// `a = α + ck`, `d = α* + lc`, `b = (ad - 1)/c`, returning lanes for
/// `(K, C)`, `(K/2, C)`, `(K, C/2)`, `(K/2, C/2)`.
pub fn c_slice_sums(
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    n: u32,
    s: f64,
    mode: SliceMode,
    height: u32,
    c_cutoff: u32,
    k_min: u32,
) -> Lanes<4> {
    let kernel = Kernel::Xi { n, s };
    let (z1c, z2c, z2b) = (z1.z(), z2.z(), z2.conj());
    par_tree_sum(c_cutoff as usize, Lanes::<4>::ZERO, move |idx| {
        let c = idx as u64 + 1;
        let cf = c as f64;
        let kc = shift_bound(height, c, k_min);
        let half_c = c <= c_cutoff as u64 / 2;
        let mut acc = LaneSums::<4>::default();
        for (alpha, alpha_inv) in slice_pairs(c) {
            for l in -kc..=kc {
                let d = alpha_inv + l * c as i64;
                let czd = z1c * cf + d as f64;
                for k in -kc..=kc {
                    let a = alpha + k * c as i64;
                    // μ = ((cz₁+d)(cz₂-a) + 1)/c for ad - bc = 1.
                    let s1 = czd * (z2c * cf - a as f64) / cf;
                    let s2 = czd * (z2b * cf - a as f64) / cf;
                    let t = match mode {
                        SliceMode::Shifted => kernel.term(s1, s2),
                        SliceMode::True => kernel.term(s1 + 1.0 / cf, s2 + 1.0 / cf),
                        SliceMode::Difference => {
                            kernel.term(s1 + 1.0 / cf, s2 + 1.0 / cf) - kernel.term(s1, s2)
                        }
                    };
                    let inner = 2 * k.abs() <= kc && 2 * l.abs() <= kc;
                    acc.0[0].add(t);
                    if inner {
                        acc.0[1].add(t);
                    }
                    if half_c {
                        acc.0[2].add(t);
                        if inner {
                            acc.0[3].add(t);
                        }
                    }
                }
            }
        }
        acc.value()
    })
}

/// Richardson in the shift bound (`∝ K^{-pk}`) then in `C` (`∝ C^{-pc}`).
pub fn extrapolate_slices(l: &Lanes<4>, pk: f64, pc: f64) -> (Complex64, f64) {
    let rk = 1.0 / (2f64.powf(pk) - 1.0);
    let rc = 1.0 / (2f64.powf(pc) - 1.0);
    let full_c = l.0[0] + (l.0[0] - l.0[1]) * rk;
    let half_c = l.0[2] + (l.0[2] - l.0[3]) * rk;
    let value = full_c + (full_c - half_c) * rc;
    let err_k = ((l.0[0] - l.0[1]) * rk).norm();
    let err_c = ((full_c - half_c) * rc).norm();
    let floor = 4.0 * f64::EPSILON * value.norm();
    (value, err_k.max(err_c).max(floor))
}

/// The `c > 0` part of `Ξₙ` (`shifted = false`) or the series with `1/c`
/// removed (`shifted = true`), summed slice by slice.
pub fn xic_direct(
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    n: u32,
    s: f64,
    policy: &TruncationPolicy,
    shifted: bool,
) -> Result<EvalResult> {
    policy.validate()?;
    let boundary = (n as f64 + 1.0) / 2.0;
    check_above(s, boundary, "Ξᶜ")?;
    let mode = if shifted { SliceMode::Shifted } else { SliceMode::True };
    let lanes = c_slice_sums(z1, z2, n, s, mode, policy.height, policy.c_cutoff, 8);
    let q = 4.0 * s - 2.0 * n as f64;
    let (value, err) = extrapolate_slices(&lanes, q - 1.0, q - 2.0);
    let warnings = margin_warning(s, boundary, policy.margin).into_iter().collect();
    EvalResult {
        value,
        err_estimate: err,
        method: Method::Direct,
        policy: *policy,
        warnings,
    }
    .require_converged("xic_direct")
}

/// One `c`-slice of the shifted series, `Σ_{α} Σ_{k,l}`, summed directly.
pub fn shifted_slice_direct(
    z1: UpperHalfPoint,
    z2: UpperHalfPoint,
    n: u32,
    s: f64,
    c: u64,
    k_bound: i64,
) -> Complex64 {
    let kernel = Kernel::Xi { n, s };
    let cf = c as f64;
    let mut acc = ComplexSum::default();
    for (alpha, alpha_inv) in slice_pairs(c) {
        for l in -k_bound..=k_bound {
            let czd = z1.z() * cf + (alpha_inv + l * c as i64) as f64;
            for k in -k_bound..=k_bound {
                let a = (alpha + k * c as i64) as f64;
                let s1 = czd * (z2.z() * cf - a) / cf;
                let s2 = czd * (z2.conj() * cf - a) / cf;
                acc.add(kernel.term(s1, s2));
            }
        }
    }
    acc.value()
}

/// `Sₙ(z, 0, s) = Σ_{ν ∈ Z} (z̄ + ν)ⁿ / |z + ν|^{2s}`, summed over `|ν| <= B`
/// with an asymptotic tail.
pub fn s_series_direct(z: Complex64, n: u32, s: f64, policy: &TruncationPolicy) -> Result<EvalResult> {
    policy.validate()?;
    if z.im == 0.0 {
        return Err(Error::InvalidArgument("S_n needs Im z != 0".into()));
    }
    let boundary = (n as f64 + 1.0) / 2.0;
    check_above(s, boundary, "S_n")?;
    let bmax = policy.b_range as i64;
    let (full, half) = s_series_partial(z, n, s, bmax);
    let value = full + s_series_tail(z, n, s, bmax);
    let value_half = half + s_series_tail(z, n, s, bmax / 2);
    let warnings = margin_warning(s, boundary, policy.margin).into_iter().collect();
    EvalResult {
        value,
        err_estimate: (value - value_half).norm(),
        method: Method::Direct,
        policy: *policy,
        warnings,
    }
    .require_converged("s_series_direct")
}

fn s_series_partial(z: Complex64, n: u32, s: f64, bmax: i64) -> (Complex64, Complex64) {
    let mut full = ComplexSum::default();
    let mut half = ComplexSum::default();
    for nu in -bmax..=bmax {
        let w = z + nu as f64;
        let t = w.conj().powi(n as i32) * (-s * w.norm_sqr().ln()).exp();
        full.add(t);
        if nu.abs() <= bmax / 2 {
            half.add(t);
        }
    }
    (full.value(), half.value())
}

/// `Σ_{|ν| > B}` by the midpoint rule: `∫` from `B + 1/2` outward on both sides.
fn s_series_tail(z: Complex64, n: u32, s: f64, bmax: i64) -> Complex64 {
    let y = z.im;
    // Right tail: t = x + ν from x + B + 1/2 to ∞, with f(t) = (t - iy)ⁿ/(t²+y²)^s.
    let right = power_tail(z.re + bmax as f64 + 0.5, 1.0, y, n, s);
    // Left tail: t = -(u) with u from B + 1/2 - x to ∞.
    let left = power_tail(bmax as f64 + 0.5 - z.re, -1.0, y, n, s);
    right + left
}

/// Ensures the inverse table used by the slice sums is consistent.
pub fn unit_inverse(alpha: i64, c: u64) -> Result<i64> {
    mod_inverse(alpha, c).map(|v| v as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> UpperHalfPoint {
        UpperHalfPoint::new(x, y).unwrap()
    }

    fn brute_count(m: i64, h: i64) -> usize {
        let mut n = 0;
        for a in -h..=h {
            for b in -h..=h {
                for c in -h..=h {
                    for d in -h..=h {
                        if a * d - b * c == m {
                            n += 1;
                        }
                    }
                }
            }
        }
        n
    }

    #[test]
    fn mu_examples() {
        let z1 = pt(0.3, 0.7);
        let w = Complex64::new(-0.2, 1.9);
        assert_eq!(mu(&IntMatrix2::IDENTITY, z1, w), w - z1.z());
        assert!((mu(&IntMatrix2::T, z1, w) - (w - z1.z() - 1.0)).norm() < 1e-15);
        let v = mu(&IntMatrix2::S, pt(0.0, 1.0), Complex64::new(0.0, 2.0));
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mu_factorization() {
        let (z1, w) = (pt(0.31, 0.77), Complex64::new(-0.4, 1.3));
        for g in enumerate_matrices(1, 4).into_iter().filter(|g| g.c != 0) {
            let c = g.c as f64;
            let f = (z1.z() * c + g.d as f64) * (w * c - g.a as f64) / c + 1.0 / c;
            assert!((mu(&g, z1, w) - f).norm() < 1e-12);
        }
    }

    #[test]
    fn enumeration_counts() {
        // Entries in {-1, 0, 1}: 20 matrices of determinant one.
        assert_eq!(enumerate_matrices(1, 1).len(), 20);
        assert_eq!(brute_count(1, 1), 20);
        for (m, h) in [(1, 2), (1, 3), (2, 1), (2, 3), (3, 2), (6, 3)] {
            let all = enumerate_matrices(m as u32, h as u32);
            assert_eq!(all.len(), brute_count(m, h), "m={m} h={h}");
            let mut uniq = all.clone();
            uniq.sort_by_key(|g| (g.a, g.b, g.c, g.d));
            uniq.dedup();
            assert_eq!(uniq.len(), all.len());
            assert!(all.iter().all(|g| g.det() == m && g.height() <= h));
        }
    }

    #[test]
    fn enumeration_closed_under_negation() {
        let all = enumerate_matrices(1, 5);
        for g in &all {
            assert!(all.contains(&g.neg()));
        }
    }

    #[test]
    fn omega_terms_pair_up() {
        let (z1, z2) = (pt(0.1, 1.2), pt(-0.3, 0.9));
        for g in enumerate_matrices(1, 3) {
            let t = Kernel::Omega { k: 12 }.term(mu(&g, z1, z2.z()), mu(&g, z1, z2.conj()));
            let gn = g.neg();
            let tn = Kernel::Omega { k: 12 }.term(mu(&gn, z1, z2.z()), mu(&gn, z1, z2.conj()));
            assert!((t - tn).norm() <= 1e-12 * t.norm());
        }
    }

    #[test]
    fn s_series_examples() {
        let policy = TruncationPolicy::default();
        let v = s_series_direct(Complex64::new(0.0, 1.0), 0, 2.0, &policy).unwrap();
        // Σ (1+ν²)^{-2} = (π/2)(coth π + π / sinh² π).
        let pi = std::f64::consts::PI;
        let exact = pi / 2.0 * (1.0 / pi.tanh() + pi / pi.sinh().powi(2));
        assert!((v.value.re - exact).abs() < 1e-8, "{} vs {exact}", v.value.re);
        assert!(v.value.im.abs() < 1e-15);
        let z = Complex64::new(0.37, 0.81);
        for n in [0, 1, 2] {
            let a = s_series_direct(z, n, 1.8, &policy).unwrap().value;
            let b = s_series_direct(z + 1.0, n, 1.8, &policy).unwrap().value;
            assert!((a - b).norm() < 1e-10);
        }
        assert!(s_series_direct(Complex64::new(1.0, 0.0), 0, 2.0, &policy).is_err());
    }

    #[test]
    fn xi0_matches_restricted_enumeration() {
        let (z1, z2) = (pt(0.1, 1.2), pt(-0.3, 0.9));
        let policy = TruncationPolicy::default();
        let xi0 = xi0_direct(z1, z2, 0, 2.0, &policy).unwrap();
        // The enumeration restricted to c = 0: a = d = ±1, |b| <= H.
        let mut acc = ComplexSum::default();
        for_each_with_c(1, 20_000, 0, |g| {
            acc.add(Kernel::Xi { n: 0, s: 2.0 }.term(mu(&g, z1, z2.z()), mu(&g, z1, z2.conj())));
        });
        let value = acc.value();
        assert!((xi0.value - value).norm() < 1e-10 * xi0.value.norm(), "{} vs {}", xi0.value, value);
    }

    #[test]
    fn xi0_converges_at_boundary_point() {
        let (z1, z2) = (pt(0.1, 1.2), pt(-0.3, 0.9));
        let policy = TruncationPolicy::default();
        let a = xi0_direct(z1, z2, 1, 1.0, &policy).unwrap();
        let b = xi0_direct(z1, z2, 1, 1.0, &TruncationPolicy { b_range: 40_000, ..policy }).unwrap();
        assert!((a.value - b.value).norm() <= a.err_estimate.max(1e-12));
        assert!(a.err_estimate < 1e-8);
    }

    #[test]
    fn xi0_pairs_match_unpaired_brute_force() {
        let (z1, z2) = (pt(0.2, 1.1), pt(-0.35, 0.95));
        let (n, s) = (1, 1.6);
        let mut brute = Complex64::new(0.0, 0.0);
        for b in -200_000i64..=200_000 {
            for sign in [1, -1] {
                let g = IntMatrix2::new(sign, sign * b, 0, sign);
                brute += Kernel::Xi { n, s }.term(mu(&g, z1, z2.z()), mu(&g, z1, z2.conj()));
            }
        }
        let v = xi0_direct(z1, z2, n, s, &TruncationPolicy::default()).unwrap();
        // Brute force misses a tail of order 2·2·B^{-1.4}/1.4 ≈ 1.1e-7.
        assert!((v.value - brute).norm() < 3e-7, "{} vs {brute}", v.value);
    }

    #[test]
    fn periodicity_of_direct_sum() {
        let (z1, z2) = (pt(0.1, 1.2), pt(-0.3, 0.9));
        let policy = TruncationPolicy::default().with_height(60);
        let a = xi_direct(z1, z2, 1, 2.0, &policy).unwrap();
        let b = xi_direct(z1.translate(1.0), z2.translate(1.0), 1, 2.0, &policy).unwrap();
        assert!((a.value - b.value).norm() < 1e-3 * a.value.norm());
    }

    #[test]
    fn rejects_divergent_s() {
        let (z1, z2) = (pt(0.1, 1.2), pt(-0.3, 0.9));
        let policy = TruncationPolicy::default();
        assert!(xi_direct(z1, z2, 1, 1.0, &policy).is_err());
        assert!(psi_direct(PsiKind::One, z1, z2, 1.0, &policy).is_err());
        assert!(omega_direct(z1, z2, 3, 1, &policy).is_err());
        let warn = xi_direct(z1, z2, 1, 1.05, &policy.with_height(20).with_tol(1e-2));
        if let Ok(r) = warn {
            assert!(r.warnings[0].starts_with("NotAbsolutelyConvergent"));
        }
    }

    #[test]
    fn psi_partial_sums_monotone_and_positive() {
        let (z1, z2) = (pt(0.1, 1.2), pt(-0.3, 0.9));
        let sums = lattice_sum(Kernel::Psi1 { s: 1.4 }, z1, z2, 1, 64, |_| true);
        assert!(sums.full.im == 0.0 && sums.full.re > sums.half.re && sums.half.re > sums.quarter.re);
    }

    #[test]
    fn omega_n_identity_term() {
        let (z1, z2) = (pt(0.0, 1.0), pt(0.0, 2.0));
        let m1 = mu(&IntMatrix2::IDENTITY, z1, z2.z());
        let m2 = mu(&IntMatrix2::IDENTITY, z1, z2.conj());
        let t = Kernel::OmegaN { n: 1, s: 1.0 }.term(m1, m2);
        // μ₂ = -2i - i = -3i: conj(μ₂)² / |μ₂|⁴ = (3i)²/81 = -1/9.
        assert!((t - Complex64::new(-1.0 / 9.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn kernel_s1_n1_is_reciprocal_product() {
        let (m1, m2) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.4));
        let t = Kernel::Xi { n: 1, s: 1.0 }.term(m1, m2);
        assert!((t - 1.0 / (m1 * m2)).norm() < 1e-15);
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::default().validate().is_ok());
        assert!(TruncationPolicy::default().with_tol(0.5).validate().is_err());
        assert!(TruncationPolicy { height: 0, ..Default::default() }.validate().is_err());
    }
}
