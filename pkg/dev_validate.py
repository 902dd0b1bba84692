"""Dev-only: validate truncmath against mpmath (50 digits). Not shipped."""
import math
import sys
import numpy as np
import mpmath as mp

sys.path.insert(0, "src")
from sbprune import truncmath as tm

mp.mp.dps = 50


def mp_erfcx(x):
    return mp.exp(x * x) * mp.erfc(x)


def mp_phi(x):
    return mp.ncdf(x)


def mp_trunc_stats(mu, sigma, a, b):
    """mean, var, entropy, kl via mpmath quadrature in standardized space."""
    mu, sigma, a, b = map(mp.mpf, (mu, sigma, a, b))
    al = (a - mu) / sigma
    be = (b - mu) / sigma
    x0 = min(max(mp.mpf(0), al), be)

    def w(x):
        return mp.exp(-((x - x0) * (x + x0)) / 2)

    pts = sorted(set([float(al), float(be)] + [float(min(max(x0 + k, al), be)) for k in
                 [-40, -10, -3, -1, -0.1, 0, 0.1, 1, 3, 10, 40]]))
    segs = list(zip(pts[:-1], pts[1:]))

    def integ(f):
        return mp.fsum(mp.quad(f, [mp.mpf(p), mp.mpf(q)]) for p, q in segs if q > p)

    W = integ(w)
    mean = integ(lambda x: mp.exp(mu + sigma * x) * w(x)) / W
    var = integ(lambda x: (mp.exp(mu + sigma * x) - mean) ** 2 * w(x)) / W
    # entropy of t = mu + sigma x；log Z = log phi(x0)+log W
    logZ = -x0 * x0 / 2 - mp.log(mp.sqrt(2 * mp.pi)) + mp.log(W)
    # H_x = log Z - (1/Z) int phi log phi = logZ - logphi(x0) - (int w logw)/W
    wlw = integ(lambda x: w(x) * (-((x - x0) * (x + x0)) / 2))
    Hx = logZ - (-x0 * x0 / 2 - mp.log(mp.sqrt(2 * mp.pi))) - wlw / W
    H = Hx + mp.log(sigma)
    kl = mp.log(b - a) - H
    return mean, var, H, kl, logZ


def rel(a, b):
    b = float(b)
    if b == 0:
        return abs(float(a))
    return abs(float(a) - b) / abs(b)


print("== erfcx ==")
worst = 0.0
for x in list(np.linspace(0, 0.47, 40)) + list(np.linspace(0.47, 4.0, 80)) + \
        list(np.geomspace(4.0, 1e8, 80)) + list(np.linspace(-5, -0.01, 30)):
    e = rel(tm.erfcx(float(x)), mp_erfcx(mp.mpf(float(x))))
    worst = max(worst, e)
print("worst rel err:", worst)

print("== cdf/ppf ==")
worst = 0.0
for x in np.linspace(-37, 8, 120):
    worst = max(worst, rel(tm.std_normal_cdf(float(x)), mp_phi(float(x))))
print("cdf worst rel:", worst)
worst = 0.0
for pp in list(np.geomspace(1e-300, 0.5, 80)) + list(1 - np.geomspace(1e-16, 0.5, 40)):
    y = tm.inv_std_normal_cdf(float(pp))
    worst = max(worst, abs(float(mp_phi(y)) - pp) / pp)
print("ppf round-trip worst rel (in p):", worst)

print("== inv_log_q ==")
worst = 0.0
for L in [-2, -5, -20, -100, -690, -1e4, -1e6, -2.5e6]:
    x = tm._inv_log_q(float(L))
    lq = mp.log(1 - mp_phi(mp.mpf(x)))
    worst = max(worst, abs(float(lq) - L) / abs(L))
print("inv_log_q worst rel (in logq):", worst)

print("== moments / entropy / kl over stress grid ==")
rng = np.random.default_rng(0)
cases = []
# clamped box random
for _ in range(120):
    mu = rng.uniform(-20, 5)
    sig = math.exp(rng.uniform(-6, 3))
    cases.append((mu, sig))
# squeeze stress corners
for mu in [0.01, 0.05, 0.5, 1.0, 2.5, 5.0]:
    for sig in [math.exp(-6), 0.005, 0.01, 0.05, 0.1, 0.3, 1.0]:
        cases.append((mu, sig))
# left-side squeeze (outside clamp box, stability grid)
for mu in [-30, -25, -21]:
    for sig in [0.4, 1.0, 5.0, 20.0]:
        cases.append((mu, sig))
for mu in [-30, -10, 0, 10]:
    for sig in [0.4, 5.0, 20.0]:
        cases.append((mu, sig))

wm = wv = ws = wk = 0.0
bad = []
for mu, sig in cases:
    p = tm.TruncParams(mu=mu, sigma=sig, a=-20.0, b=0.0)
    mean, var, H, kl, logZ = mp_trunc_stats(mu, sig, -20, 0)
    em = rel(tm.mean_trunc_lognormal(p), mean)
    ev = rel(tm.variance_trunc_lognormal(p), var)
    esnr = rel(tm.snr_trunc_lognormal(p), mean / mp.sqrt(var))
    ekl = abs(tm.kl_trunc_logn_vs_trunc_logu(p) - float(kl))
    wm, wv, ws, wk = max(wm, em), max(wv, ev), max(ws, esnr), max(wk, ekl)
    if ev > 1e-9 or em > 1e-10 or ekl > 1e-8:
        lam, sgn = tm._squeeze_tilt(p)
        bad.append((mu, sig, em, ev, ekl, lam, tm._use_series(lam, sig) if sgn else False))
print(f"mean worst rel {wm:.3e}  var worst rel {wv:.3e}  snr worst rel {ws:.3e}  kl worst abs {wk:.3e}")
for b_ in bad[:15]:
    print("  suspicious:", b_)

print("== kl_grad vs FD ==")
worst = 0.0
for mu, sig in cases[:60]:
    p = tm.TruncParams(mu=mu, sigma=sig)
    gmu, gsig = tm.kl_grad(p)
    h = 1e-5
    fmu = (tm.kl_trunc_logn_vs_trunc_logu(tm.TruncParams(mu + h, sig)) -
           tm.kl_trunc_logn_vs_trunc_logu(tm.TruncParams(mu - h, sig))) / (2 * h)
    hs = min(1e-5, sig / 1000)
    fsig = (tm.kl_trunc_logn_vs_trunc_logu(tm.TruncParams(mu, sig + hs)) -
            tm.kl_trunc_logn_vs_trunc_logu(tm.TruncParams(mu, sig - hs))) / (2 * hs)
    scale_mu = max(abs(fmu), 1e-8)
    scale_sig = max(abs(fsig), 1e-8)
    worst = max(worst, abs(gmu - fmu) / scale_mu, abs(gsig - fsig) / scale_sig)
print("kl_grad worst rel vs FD:", worst)

print("== sampler CDF round trip ==")
worst = 0.0
for mu, sig in [(-2, 1), (-10, 5), (0.5, 0.01), (5, 0.0025), (-19, 0.1), (2, 2)]:
    p = tm.TruncParams(mu=mu, sigma=sig)
    for u in [1e-12, 1e-7, 0.001, 0.3, 0.5, 0.9, 1 - 1e-7]:
        th = tm.sample_trunc_lognormal(p, u)
        # analytic CDF F(th) should equal u
        al, be = mp.mpf(p.alpha), mp.mpf(p.beta)
        x = (mp.log(th) - mu) / sig
        F = (mp_phi(x) - mp_phi(al)) / (mp_phi(be) - mp_phi(al))
        err = abs(float(F) - u) / max(u, 1e-12)
        worst = max(worst, err)
print("sampler round-trip worst rel (in u):", worst)

print("== sample_grad vs FD ==")
worst = 0.0
for mu, sig in [(-2.0, 1.0), (-0.5, 3.0), (-10.0, 0.5), (0.5, 0.05), (-19.5, 0.3)]:
    p = tm.TruncParams(mu=mu, sigma=sig)
    for u in [0.05, 0.3, 0.7, 0.95]:
        dmu, dsig = tm.sample_grad(p, u)
        h = 1e-6
        fmu = (tm.sample_trunc_lognormal(tm.TruncParams(mu + h, sig), u) -
               tm.sample_trunc_lognormal(tm.TruncParams(mu - h, sig), u)) / (2 * h)
        hs = sig * 1e-6
        fsig = (tm.sample_trunc_lognormal(tm.TruncParams(mu, sig + hs), u) -
                tm.sample_trunc_lognormal(tm.TruncParams(mu, sig - hs), u)) / (2 * hs)
        worst = max(worst,
                    abs(dmu - fmu) / max(abs(fmu), 1e-12),
                    abs(dsig - fsig) / max(abs(fsig), 1e-12))
print("sample_grad worst rel vs FD:", worst)
print("done")
