//! Characteristic exponents of the driving Lévy processes and the complex
//! special functions the pricing transform needs.
//!
//! Everything here is a pure function; thread-safe by construction.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Parameters of the tempered-stable subordinator driving variance jumps.
///
/// `a` scales jump intensity, `b` is the exponential tempering rate and
/// `c` is the jump-activity exponent.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubordinatorParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SubordinatorParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let p = Self { a, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::domain(format!("jump intensity a must be > 0, got {}", self.a)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::domain(format!("tempering rate b must be > 0, got {}", self.b)));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::domain(format!("activity exponent c must be in (0,1), got {}", self.c)));
        }
        Ok(())
    }
}

/// Parameters of the symmetric stable auxiliary process and the sinusoidal
/// jump amplitude.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StableParams {
    /// Stability index, in (1, 2).
    pub alpha: f64,
    /// Sinusoidal amplitude, >= 0.
    pub zeta: f64,
}

impl StableParams {
    pub fn new(alpha: f64, zeta: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::domain(format!("stability index must be in (1,2), got {alpha}")));
        }
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(Error::domain(format!("amplitude must be >= 0, got {zeta}")));
        }
        Ok(Self { alpha, zeta })
    }
}

/// Gamma(x) for negative non-integer x in (-1, 0), via reflection.
///
/// Direct Lanczos evaluation next to the pole at 0 loses digits; the
/// reflection form stays stable for c near 1.
pub fn gamma_neg(c: f64) -> f64 {
    debug_assert!(c > 0.0 && c < 1.0);
    -std::f64::consts::PI / (c * gamma(c) * (std::f64::consts::PI * c).sin())
}

/// Log characteristic function of the subordinator at unit time,
/// `a Γ(-c) ((b - il)^c - b^c)` on the principal branch.
pub fn char_exponent(l: f64, p: &SubordinatorParams) -> Result<Complex64> {
    p.validate()?;
    Ok(char_exponent_unchecked(Complex64::new(l, 0.0), p))
}

/// Same as [`char_exponent`] but skips validation and accepts a complex
/// frequency; used inside quadrature loops where the argument is `l * H`.
#[inline]
pub fn char_exponent_unchecked(l: Complex64, p: &SubordinatorParams) -> Complex64 {
    if p.a == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let base = Complex64::new(p.b, 0.0) - Complex64::new(0.0, 1.0) * l;
    // b > 0 keeps the argument off the principal branch cut
    (base.powf(p.c) - Complex64::new(p.b.powf(p.c), 0.0)) * (p.a * gamma_neg(p.c))
}

/// Mean jump rate `a Γ(1-c) / b^{1-c}` of the subordinator.
pub fn mean_jump_rate(p: &SubordinatorParams) -> Result<f64> {
    p.validate()?;
    Ok(mean_jump_rate_unchecked(p))
}

#[inline]
pub fn mean_jump_rate_unchecked(p: &SubordinatorParams) -> f64 {
    if p.a == 0.0 {
        return 0.0;
    }
    p.a * gamma(1.0 - p.c) / p.b.powf(1.0 - p.c)
}

/// Characteristic function `e^{-|l|^alpha}` of the symmetric stable driver
/// at unit time.
pub fn stable_cf(l: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::domain(format!("stability index must be in (1,2), got {alpha}")));
    }
    Ok((-l.abs().powf(alpha)).exp())
}

// ---------------------------------------------------------------------------
// complex error function
// ---------------------------------------------------------------------------

/// Complementary error function for complex argument.
///
/// Power series below |z| = 1, trapezoid summation (Salzer/Hunter–Regan)
/// above, reflection for the left half-plane. Relative accuracy ~1e-13 on
/// |z| <= 30 away from the f64 overflow wedge near the imaginary axis.
pub fn erfc_complex(z: Complex64) -> Complex64 {
    if z.re < 0.0 {
        return Complex64::new(2.0, 0.0) - erfc_complex(-z);
    }
    if z.norm_sqr() < 1.0 {
        return erfc_series(z);
    }
    // trapezoid nodes at n*h have poles at z = i n h; nudge h if z sits on one
    let v = erfc_trapezoid(z, 0.5);
    if v.is_finite() {
        v
    } else {
        erfc_trapezoid(z, 0.47)
    }
}

fn erfc_series(z: Complex64) -> Complex64 {
    // erf(z) = 2/sqrt(pi) * sum (-1)^n z^{2n+1} / (n! (2n+1))
    let zz = z * z;
    let mut term = z;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..60 {
        sum += term / (2.0 * n as f64 + 1.0);
        term = -term * zz / (n as f64 + 1.0);
        if term.norm_sqr() < 1e-40 {
            break;
        }
    }
    Complex64::new(1.0, 0.0) - sum * (2.0 / SQRT_PI)
}

fn erfc_trapezoid(z: Complex64, h: f64) -> Complex64 {
    const N: usize = 16;
    let z2 = z * z;
    let e = (-z2).exp();
    let mut s = 1.0 / z2;
    for n in 1..=N {
        let nh2 = (n as f64 * h) * (n as f64 * h);
        s += 2.0 * (-nh2).exp() / (z2 + nh2);
    }
    let mut val = z * e * s * (h / std::f64::consts::PI);
    let w = z * (2.0 * std::f64::consts::PI / h);
    if w.re < 700.0 {
        val += 2.0 / (Complex64::new(1.0, 0.0) - w.exp());
    }
    val
}

/// Upper incomplete gamma function of order 3/2 on the principal branch,
/// via `Γ(3/2, z) = (√π/2) erfc(√z) + √z e^{-z}`.
pub fn upper_gamma_3half(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::domain("non-finite argument"));
    }
    let sz = z.sqrt(); // principal branch
    let v = erfc_complex(sz) * (SQRT_PI / 2.0) + sz * (-z).exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow("upper_gamma_3half"))
    }
}

// ---------------------------------------------------------------------------
// Bessel J sequence (used by the series form of the characteristic function)
// ---------------------------------------------------------------------------

/// First-kind Bessel functions J_0(x) .. J_kmax(x) for x >= 0, by Miller's
/// downward recurrence with the standard even-order normalization.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    debug_assert!(x >= 0.0);
    if x < 1e-12 {
        let mut out = vec![0.0; kmax + 1];
        out[0] = 1.0;
        if kmax >= 1 {
            out[1] = x / 2.0;
        }
        return out;
    }
    let start = {
        let m = kmax.max(x.ceil() as usize) + 20 + (x.sqrt() as usize);
        m + (m & 1) // even
    };
    let mut jp1 = 0.0_f64; // J_{k+1}
    let mut j = 1e-30_f64; // J_k, seeded at k = start
    let mut out = vec![0.0; kmax + 1];
    let mut norm = if start % 2 == 0 { 2.0 * j } else { 0.0 };
    for k in (1..=start).rev() {
        let jm1 = (2.0 * k as f64 / x) * j - jp1;
        jp1 = j;
        j = jm1; // J_{k-1}
        // rescale to dodge overflow for large start orders
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
        if k - 1 <= kmax {
            out[k - 1] = j;
        }
        if (k - 1) % 2 == 0 {
            norm += if k == 1 { j } else { 2.0 * j };
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}
