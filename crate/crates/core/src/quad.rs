//! Composite and adaptive Simpson quadrature shared by the integral layers.

use num_complex::Complex64;

/// Composite Simpson over [lo, hi] with `panels` panels (forced even).
pub fn simpson<F: FnMut(f64) -> f64>(lo: f64, hi: f64, panels: usize, mut f: F) -> f64 {
    let n = panels.max(2) + (panels & 1);
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + h * i as f64);
    }
    acc * h / 3.0
}

/// Complex-valued composite Simpson.
pub fn simpson_c<F: FnMut(f64) -> Complex64>(
    lo: f64,
    hi: f64,
    panels: usize,
    mut f: F,
) -> Complex64 {
    let n = panels.max(2) + (panels & 1);
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(lo + h * i as f64) * w;
    }
    acc * (h / 3.0)
}

/// Simpson node/weight grid: returns (nodes, weights) for `panels` panels.
pub fn simpson_grid(lo: f64, hi: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let n = panels.max(2) + (panels & 1);
    let h = (hi - lo) / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
    let weights: Vec<f64> = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Adaptive Simpson with absolute tolerance, real-valued.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    let m = 0.5 * (lo + hi);
    let (fl, fm, fh) = (f(lo), f(m), f(hi));
    let whole = (hi - lo) / 6.0 * (fl + 4.0 * fm + fh);
    adaptive_step(f, lo, hi, fl, fm, fh, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    fl: f64,
    fm: f64,
    fh: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + m);
    let rm = 0.5 * (m + hi);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - lo) / 6.0 * (fl + 4.0 * flm + fm);
    let right = (hi - m) / 6.0 * (fm + 4.0 * frm + fh);
    let delta = left + right - whole;
    // negated comparison so a NaN estimate terminates instead of recursing
    if depth == 0 || !(delta.abs() > 15.0 * tol) {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, lo, m, fl, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive_step(f, m, hi, fm, frm, fh, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson, complex-valued.
pub fn adaptive_c<F: Fn(f64) -> Complex64>(f: &F, lo: f64, hi: f64, tol: f64) -> Complex64 {
    let m = 0.5 * (lo + hi);
    let (fl, fm, fh) = (f(lo), f(m), f(hi));
    let whole = (fl + fm * 4.0 + fh) * ((hi - lo) / 6.0);
    adaptive_step_c(f, lo, hi, fl, fm, fh, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step_c<F: Fn(f64) -> Complex64>(
    f: &F,
    lo: f64,
    hi: f64,
    fl: Complex64,
    fm: Complex64,
    fh: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64 {
    let m = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + m);
    let rm = 0.5 * (m + hi);
    let (flm, frm) = (f(lm), f(rm));
    let left = (fl + flm * 4.0 + fm) * ((m - lo) / 6.0);
    let right = (fm + frm * 4.0 + fh) * ((hi - m) / 6.0);
    let delta = left + right - whole;
    if depth == 0 || !(delta.norm() > 15.0 * tol) {
        left + right + delta / 15.0
    } else {
        adaptive_step_c(f, lo, m, fl, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive_step_c(f, m, hi, fm, frm, fh, right, tol / 2.0, depth - 1)
    }
}

/// Composite Simpson over a segment whose integrand has an endpoint with
/// unbounded derivative at `lo`: the segment is subdivided geometrically
/// toward `lo` so no single panel spans the steep region.
pub fn simpson_graded<F: FnMut(f64) -> f64>(
    lo: f64,
    hi: f64,
    panels_per_seg: usize,
    mut f: F,
) -> f64 {
    let (nodes, weights) = graded_grid(lo, hi, panels_per_seg);
    nodes.iter().zip(&weights).map(|(x, w)| w * f(*x)).sum()
}

/// Node/weight form of [`simpson_graded`]: geometric segments shrinking
/// toward `lo`, composite Simpson on each.
pub fn graded_grid(lo: f64, hi: f64, panels_per_seg: usize) -> (Vec<f64>, Vec<f64>) {
    const LEVELS: usize = 16;
    let len = hi - lo;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut right = hi;
    for lev in 0..LEVELS {
        let left = if lev + 1 == LEVELS { lo } else { lo + len * 0.25_f64.powi(lev as i32 + 1) };
        let (n, w) = simpson_grid(left, right, panels_per_seg);
        nodes.extend(n);
        weights.extend(w);
        right = left;
    }
    (nodes, weights)
}

/// Filon coefficients for `int f(x) cos(k x) dx` at panel phase `theta = k h`.
/// Power series below the cancellation threshold, closed form above.
pub fn filon_coeffs(theta: f64) -> (f64, f64, f64) {
    let t = theta;
    if t.abs() < 0.1 {
        let t2 = t * t;
        let alpha = t * t2 * (2.0 / 45.0 + t2 * (-2.0 / 315.0 + t2 * (2.0 / 4725.0)));
        let beta = 2.0 / 3.0 + t2 * (2.0 / 15.0 + t2 * (-4.0 / 105.0 + t2 * (2.0 / 567.0)));
        let gamma = 4.0 / 3.0 + t2 * (-2.0 / 15.0 + t2 * (1.0 / 210.0 + t2 * (-1.0 / 11340.0)));
        (alpha, beta, gamma)
    } else {
        let (s, c) = t.sin_cos();
        let t3 = t * t * t;
        let alpha = (t * t + t * s * c - 2.0 * s * s) / t3;
        let beta = 2.0 * (t * (1.0 + c * c) - 2.0 * s * c) / t3;
        let gamma = 4.0 * (s - t * c) / t3;
        (alpha, beta, gamma)
    }
}

/// Composite Filon quadrature of `f(x) cos(k x)` over `[lo, hi]` with an
/// even number of uniform panels: the envelope `f` is interpolated by
/// parabolas and the oscillatory moments integrated exactly, so accuracy
/// does not degrade as `k` grows.
pub fn filon_cos<F: FnMut(f64) -> f64>(
    mut f: F,
    k: f64,
    lo: f64,
    hi: f64,
    panels: usize,
) -> f64 {
    assert!(panels >= 2 && panels % 2 == 0, "filon needs an even panel count");
    let k = k.abs();
    let h = (hi - lo) / panels as f64;
    let (alpha, beta, gamma) = filon_coeffs(k * h);
    let mut c_even = 0.0;
    let mut c_odd = 0.0;
    let mut f_lo = 0.0;
    let mut f_hi = 0.0;
    for i in 0..=panels {
        let x = lo + i as f64 * h;
        let fx = f(x);
        let cosv = fx * (k * x).cos();
        if i == 0 {
            f_lo = fx;
            c_even += 0.5 * cosv;
        } else if i == panels {
            f_hi = fx;
            c_even += 0.5 * cosv;
        } else if i % 2 == 0 {
            c_even += cosv;
        } else {
            c_odd += cosv;
        }
    }
    h * (alpha * (f_hi * (k * hi).sin() - f_lo * (k * lo).sin()) + beta * c_even + gamma * c_odd)
}
