#!/usr/bin/env python3
"""Generate frozen high-precision reference values for the Rust test suite.

All values are computed with mpmath at 50 significant digits and written to
crates/core/tests/data/.  Rerun after changing any grid definition:

    python3 tools/gen_oracle.py
"""
import mpmath as mp
import os

mp.mp.dps = 50

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "data")

A, B, C = mp.mpf("0.049762"), mp.mpf("0.849782"), mp.mpf("0.8575")
D, KAP = mp.mpf("0.769302"), mp.mpf("7.798968")
ALPHA = mp.mpf("1.715")
ZETA = mp.mpf("0.01")
DELTA = mp.mpf(30) / 365


def log_phi_x(l, a=A, b=B, c=C):
    return a * mp.gamma(-c) * ((b - 1j * l) ** c - b ** c)


def mean_jump_rate(a=A, b=B, c=C):
    return a * mp.gamma(1 - c) / b ** (1 - c)


def kernel_h(x, d=D, kap=KAP):
    brk = (1 - d) / kap
    if x < brk:
        return (x ** (d - 1) - brk ** (d - 1)) / mp.gamma(d) - kap ** (1 - d) / (
            (1 - d) ** (2 - d) * mp.gamma(d - 1)
        )
    return -((mp.e * kap) ** (1 - d)) * mp.exp(-kap * x) / ((1 - d) ** (2 - d) * mp.gamma(d - 1))


def kernel_h_avg(x, d=D, kap=KAP, delta=DELTA):
    brk = (1 - d) / kap
    den = kap ** d * delta * (1 - d) ** (2 - d) * mp.gamma(d - 1)
    if x + delta < brk:
        return ((x + delta) ** d - x ** d) / (delta * mp.gamma(d + 1))
    if x < brk:
        return (brk ** d - x ** d) / (delta * mp.gamma(d + 1)) + (
            mp.exp(-kap * (x + delta) + 1 - d) - 1
        ) / den
    return -mp.exp(-kap * (x + delta) + 1 - d) * (mp.exp(kap * delta) - 1) / den


def split_points(lo, hi, d=D, kap=KAP, delta=DELTA):
    brk = (1 - d) / kap
    pts = [lo] + [p for p in (brk - delta, brk) if lo < p < hi] + [hi]
    return pts


def fmt(x):
    return mp.nstr(x, 22)


def write(name, lines):
    path = os.path.join(OUT, name)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    print("wrote", path)


scalars = []
v = log_phi_x(1)
scalars.append(f"char_exponent_l1 {fmt(mp.re(v))} {fmt(mp.im(v))}")
scalars.append(f"mean_jump_rate {fmt(mean_jump_rate())} 0")
g32 = mp.gammainc(mp.mpf(3) / 2, 1 + 1j)
scalars.append(f"upper_gamma_3half_1p1i {fmt(mp.re(g32))} {fmt(mp.im(g32))}")
ec = mp.erfc(mp.mpc("0.5", "0.5"))
scalars.append(f"erfc_0p5_0p5i {fmt(mp.re(ec))} {fmt(mp.im(ec))}")

brk = (1 - D) / KAP
scalars.append(f"kernel_h_at_2brk {fmt(kernel_h(2 * brk))} 0")
scalars.append(f"kernel_h_avg_at_half_brk {fmt(kernel_h_avg(brk / 2))} 0")

# integral of the averaged kernel over [0, 20/365]
t = mp.mpf(20) / 365
pts = split_points(mp.mpf(0), t)
int_h = mp.mpf(0)
for lo, hi in zip(pts[:-1], pts[1:]):
    int_h += mp.quad(kernel_h_avg, [lo, hi])
scalars.append(f"integral_h_avg_t20 {fmt(int_h)} 0")

# complex line integral of log phi_X(l * H_delta(u)) over u in [0, 48/365], l = 5
t = mp.mpf(48) / 365
pts = split_points(mp.mpf(0), t)
val = mp.mpc(0)
for lo, hi in zip(pts[:-1], pts[1:]):
    val += mp.quad(lambda u: log_phi_x(5 * kernel_h_avg(u)), [lo, hi])
scalars.append(f"integral_log_cf_l5_t48 {fmt(mp.re(val))} {fmt(mp.im(val))}")

# inner frequency integral at x = 0, tau = 1
v = mp.quad(lambda e: mp.exp(-e ** ALPHA), [0, 30])
scalars.append(f"inner_ell_x0_tau1 {fmt(v)} 0")
# same integrand, tau = 10, effectively untruncated upper bound
v = mp.quad(lambda e: mp.exp(-10 * e ** ALPHA), [0, 1000])
scalars.append(f"inner_ell_x0_tau10_untruncated {fmt(v)} 0")
v = mp.quad(lambda e: mp.cos(e / 2) * mp.exp(-e ** ALPHA), [0, 30])
scalars.append(f"inner_ell_xhalf_tau1 {fmt(v)} 0")

# oscillation-damping factor at l=1, x=0.5, Z0=0
Ac = (mp.exp(-DELTA) - 1) / (-mp.mpf(1))
w = ZETA / DELTA * (Ac * mp.cos(mp.mpf("0.5")) + DELTA)
psi = mp.exp(1j * 1 * w)
scalars.append(f"psi_l1_xhalf {fmt(mp.re(psi))} {fmt(mp.im(psi))}")

write("oracle_scalars.txt", scalars)

# ---- complex special-function grids -------------------------------------
import random

random.seed(20250102)

def grid_points():
    pts = []
    # the pricing transform evaluates erfc at sqrt(i K^2 l): arg pi/4 ray
    ks = [mp.mpf(9 + i) / 100 for i in range(0, 20)]
    for i in range(250):
        k = ks[i % len(ks)]
        l = mp.mpf(10) ** (mp.mpf(-4) + mp.mpf(8) * ((i // len(ks)) / mp.mpf(12)))
        z = mp.sqrt(1j * k * k * l)
        if abs(z) <= 30:
            pts.append(z)
    # general coverage of the disc |z| <= 30, both half-planes; skip the
    # wedge where |erfc| overflows the f64 exponent range (Re z^2 < -600)
    while len(pts) < 500:
        re = mp.mpf(random.uniform(-30, 30))
        im = mp.mpf(random.uniform(-30, 30))
        z = mp.mpc(re, im)
        if abs(z) <= 30 and re * re - im * im > -600:
            pts.append(z)
    return pts


pts = grid_points()
lines = []
for z in pts:
    e = mp.erfc(z)
    lines.append(f"{fmt(mp.re(z))} {fmt(mp.im(z))} {fmt(mp.re(e))} {fmt(mp.im(e))}")
write("oracle_erfc_grid.txt", lines)

lines = []
for z in pts:
    g = mp.gammainc(mp.mpf(3) / 2, z)
    lines.append(f"{fmt(mp.re(z))} {fmt(mp.im(z))} {fmt(mp.re(g))} {fmt(mp.im(g))}")
write("oracle_gamma32_grid.txt", lines)
