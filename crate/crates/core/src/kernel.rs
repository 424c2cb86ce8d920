//! The piecewise power-law/exponential Volterra kernel, its window-averaged
//! form, and the two lag integrals the characteristic function consumes.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{char_exponent_unchecked, SubordinatorParams};

/// Default averaging window: the index is a 30-day measure.
pub const DEFAULT_DELTA: f64 = 30.0 / 365.0;

/// Kernel parameters: roughness exponent `d`, mean-reversion speed `kappa`
/// and averaging window `delta` (years).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelParams {
    pub d: f64,
    pub kappa: f64,
    pub delta: f64,
}

impl KernelParams {
    pub fn new(d: f64, kappa: f64, delta: f64) -> Result<Self> {
        let p = Self { d, kappa, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.5 && self.d < 1.0) {
            return Err(Error::domain(format!("roughness exponent must be in (0.5,1), got {}", self.d)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::domain(format!("mean-reversion speed must be > 0, got {}", self.kappa)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::domain(format!("averaging window must be > 0, got {}", self.delta)));
        }
        Ok(())
    }

    /// Lag at which the kernel switches from the power-law branch to the
    /// exponential tail.
    #[inline]
    pub fn breakpoint(&self) -> f64 {
        (1.0 - self.d) / self.kappa
    }

    /// Gamma(d - 1), negative on d in (0.5, 1); evaluated away from the
    /// pole via Gamma(d+1) = d (d-1) Gamma(d-1).
    #[inline]
    fn gamma_dm1(&self) -> f64 {
        gamma(self.d + 1.0) / (self.d * (self.d - 1.0))
    }
}

/// Two-branch kernel value h(x) at lag x > 0.
pub fn kernel_h(x: f64, kp: &KernelParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("lag must be > 0, got {x}")));
    }
    kp.validate()?;
    Ok(kernel_h_unchecked(x, kp))
}

#[inline]
pub(crate) fn kernel_h_unchecked(x: f64, kp: &KernelParams) -> f64 {
    let (d, kappa) = (kp.d, kp.kappa);
    let brk = kp.breakpoint();
    let tail_den = (1.0 - d).powf(2.0 - d) * kp.gamma_dm1();
    if x < brk {
        (x.powf(d - 1.0) - brk.powf(d - 1.0)) / gamma(d) - kappa.powf(1.0 - d) / tail_den
    } else {
        -(std::f64::consts::E * kappa).powf(1.0 - d) * (-kappa * x).exp() / tail_den
    }
}

/// Window-averaged kernel `(1/delta) * int_0^delta h(x+u) du`, in the
/// three-branch closed form. Branch selection compares x and x + delta
/// against the kernel breakpoint.
pub fn kernel_h_avg(x: f64, kp: &KernelParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("lag must be >= 0, got {x}")));
    }
    kp.validate()?;
    Ok(kernel_h_avg_unchecked(x, kp))
}

#[inline]
pub(crate) fn kernel_h_avg_unchecked(x: f64, kp: &KernelParams) -> f64 {
    let (d, kappa, delta) = (kp.d, kp.kappa, kp.delta);
    let brk = kp.breakpoint();
    if x + delta < brk {
        ((x + delta).powf(d) - x.powf(d)) / (delta * gamma(d + 1.0))
    } else {
        let den = kappa.powf(d) * delta * (1.0 - d).powf(2.0 - d) * kp.gamma_dm1();
        if x < brk {
            (brk.powf(d) - x.powf(d)) / (delta * gamma(d + 1.0))
                + ((-kappa * (x + delta) + 1.0 - d).exp() - 1.0) / den
        } else {
            -(-kappa * (x + delta) + 1.0 - d).exp() * ((kappa * delta).exp() - 1.0) / den
        }
    }
}

/// Interior breakpoints of the averaged kernel on the lag interval
/// (lo, hi): lags where `x + delta` or `x` crosses the kernel breakpoint.
pub(crate) fn avg_kernel_splits(lo: f64, hi: f64, kp: &KernelParams) -> Vec<f64> {
    let brk = kp.breakpoint();
    let mut pts = vec![lo];
    for p in [brk - kp.delta, brk] {
        if p > lo && p < hi {
            pts.push(p);
        }
    }
    pts.push(hi);
    pts
}

/// Deterministic compensator integral `int_{t0}^{t} H(t - s) ds`, i.e. the
/// lag integral of the averaged kernel over [0, t - t0].
///
/// Composite quadrature, range split at both kernel breakpoints; panels are
/// graded toward lag zero where the kernel derivative is unbounded.
pub fn avg_kernel_integral(t0: f64, t: f64, kp: &KernelParams) -> Result<f64> {
    avg_kernel_integral_n(t0, t, kp, 512)
}

pub fn avg_kernel_integral_n(t0: f64, t: f64, kp: &KernelParams, panels: usize) -> Result<f64> {
    if !(t > t0) || t0 < 0.0 {
        return Err(Error::domain(format!("need t > t0 >= 0, got t0={t0}, t={t}")));
    }
    kp.validate()?;
    let pts = avg_kernel_splits(0.0, t - t0, kp);
    let mut acc = 0.0;
    for (i, w) in pts.windows(2).enumerate() {
        let f = |u: f64| kernel_h_avg_unchecked(u, kp);
        acc += if i == 0 {
            quad::simpson_graded(w[0], w[1], panels / 4, f)
        } else {
            quad::simpson(w[0], w[1], panels, f)
        };
    }
    Ok(acc)
}

/// Complex line integral `int_{t0}^{t} log cf_X(l * H(t - s)) ds` of the
/// subordinator exponent along the averaged kernel.
pub fn log_cf_kernel_integral(
    l: f64,
    t0: f64,
    t: f64,
    kp: &KernelParams,
    sp: &SubordinatorParams,
) -> Result<Complex64> {
    log_cf_kernel_integral_n(l, t0, t, kp, sp, 512)
}

pub fn log_cf_kernel_integral_n(
    l: f64,
    t0: f64,
    t: f64,
    kp: &KernelParams,
    sp: &SubordinatorParams,
    panels: usize,
) -> Result<Complex64> {
    if !(t > t0) {
        return Err(Error::domain(format!("need t > t0, got t0={t0}, t={t}")));
    }
    kp.validate()?;
    sp.validate()?;
    if l == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let pts = avg_kernel_splits(0.0, t - t0, kp);
    let mut acc = Complex64::new(0.0, 0.0);
    for w in pts.windows(2) {
        acc += quad::simpson_c(w[0], w[1], panels, |u| {
            char_exponent_unchecked(
                Complex64::new(l * kernel_h_avg_unchecked(u, kp), 0.0),
                sp,
            )
        });
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table6() -> KernelParams {
        KernelParams::new(0.769302, 7.798968, DEFAULT_DELTA).unwrap()
    }

    fn table6_sub() -> SubordinatorParams {
        SubordinatorParams::new(0.049762, 0.849782, 0.8575).unwrap()
    }

    #[test]
    fn kernel_continuous_at_breakpoint() {
        let kp = table6();
        let b = kp.breakpoint();
        let eps = 1e-12;
        let left = kernel_h(b - eps, &kp).unwrap();
        let right = kernel_h(b + eps, &kp).unwrap();
        assert!((left - right).abs() < 1e-9, "jump {}", (left - right).abs());
    }

    #[test]
    fn kernel_tail_positive() {
        // Gamma(d-1) < 0 on d in (0.5,1) makes the tail branch positive
        let kp = table6();
        let b = kp.breakpoint();
        for m in [1.0, 1.5, 2.0, 5.0, 10.0] {
            assert!(kernel_h(b * m, &kp).unwrap() > 0.0);
        }
    }

    #[test]
    fn kernel_matches_reference_at_twice_breakpoint() {
        let kp = table6();
        let v = kernel_h(2.0 * kp.breakpoint(), &kp).unwrap();
        assert!((v - 1.489911957120052670831).abs() < 1e-12 * v.abs(), "got {v}");
    }

    #[test]
    fn kernel_rejects_nonpositive_lag() {
        assert!(kernel_h(0.0, &table6()).is_err());
        assert!(kernel_h(-1.0, &table6()).is_err());
    }

    #[test]
    fn avg_kernel_matches_reference_point() {
        let kp = table6();
        let v = kernel_h_avg(kp.breakpoint() / 2.0, &kp).unwrap();
        assert!((v - 1.559662470737201999556).abs() < 1e-12 * v.abs(), "got {v}");
    }

    #[test]
    fn avg_kernel_continuous_at_both_boundaries() {
        let kp = table6();
        let b = kp.breakpoint();
        let eps = 1e-12;
        for x in [b - kp.delta, b] {
            if x < 0.0 {
                continue;
            }
            let left = kernel_h_avg(x - eps, &kp).unwrap();
            let right = kernel_h_avg(x + eps, &kp).unwrap();
            assert!((left - right).abs() < 1e-9, "jump at {x}: {}", (left - right).abs());
        }
    }

    #[test]
    fn avg_kernel_matches_brute_force_average() {
        // independent route: adaptive quadrature of the raw kernel
        let kp = table6();
        let b = kp.breakpoint();
        for x in [1e-4, 0.2 * b, 0.9 * b, 0.99 * b, 1.5 * b, 4.0 * b] {
            let f = |u: f64| kernel_h_unchecked(x + u, &kp);
            let mut brute = 0.0;
            // split where x+u crosses the breakpoint
            let cross = b - x;
            if cross > 0.0 && cross < kp.delta {
                brute += quad::adaptive(&f, 0.0, cross, 1e-12);
                brute += quad::adaptive(&f, cross, kp.delta, 1e-12);
            } else {
                brute = quad::adaptive(&f, 0.0, kp.delta, 1e-12);
            }
            brute /= kp.delta;
            let closed = kernel_h_avg(x, &kp).unwrap();
            assert!((closed - brute).abs() < 1e-7, "x={x}: closed={closed} brute={brute}");
        }
    }

    #[test]
    fn avg_kernel_tail_decays_exponentially() {
        let kp = table6();
        let b = kp.breakpoint();
        let x = 10.0 * b;
        let v = kernel_h_avg(x, &kp).unwrap();
        assert!(v.abs() <= (-kp.kappa * x).exp() * 100.0);
    }

    #[test]
    fn integral_vanishes_with_empty_range() {
        let kp = table6();
        let v = avg_kernel_integral(0.0, 1e-9, &kp).unwrap();
        assert!(v.abs() < 1e-8);
        assert!(avg_kernel_integral(1.0, 1.0, &kp).is_err());
    }

    #[test]
    fn integral_is_additive() {
        let kp = table6();
        let t = 100.0 / 365.0;
        let m = 31.0 / 365.0;
        let whole = avg_kernel_integral(0.0, t, &kp).unwrap();
        // interior split: integral over lags [0,m] plus integral of the
        // shifted kernel; with a convolution kernel the additivity reads
        // int_0^t = int_0^m + int_m^t of H(u) du
        let a = avg_kernel_integral(0.0, m, &kp).unwrap();
        let pts = avg_kernel_splits(m, t, &kp);
        let mut bpart = 0.0;
        for w in pts.windows(2) {
            bpart += quad::simpson(w[0], w[1], 512, |u| kernel_h_avg_unchecked(u, &kp));
        }
        assert!((whole - (a + bpart)).abs() < 1e-9);
    }

    #[test]
    fn integral_matches_reference_value() {
        let kp = table6();
        let v = avg_kernel_integral(0.0, 20.0 / 365.0, &kp).unwrap();
        assert!((v - 0.07829143825671484685752).abs() < 1e-8, "got {v}");
    }

    #[test]
    fn log_cf_integral_trivial_and_symmetry() {
        let kp = table6();
        let sp = table6_sub();
        let t = 48.0 / 365.0;
        let v0 = log_cf_kernel_integral(0.0, 0.0, t, &kp, &sp).unwrap();
        assert_eq!(v0, Complex64::new(0.0, 0.0));
        let v = log_cf_kernel_integral(5.0, 0.0, t, &kp, &sp).unwrap();
        let vc = log_cf_kernel_integral(-5.0, 0.0, t, &kp, &sp).unwrap();
        assert!((v.conj() - vc).norm() < 1e-10);
        assert!(v.re <= 0.0);
    }

    #[test]
    fn log_cf_integral_matches_reference_value() {
        let kp = table6();
        let sp = table6_sub();
        let v = log_cf_kernel_integral(5.0, 0.0, 48.0 / 365.0, &kp, &sp).unwrap();
        let want = Complex64::new(-0.0321515447607494136603, 0.2027242898076271087428);
        assert!((v - want).norm() < 1e-7, "got {v}, want {want}");
    }
}
