"""Dev: pinpoint big-sigma mean/var discrepancies with three-way comparison."""
import math, sys
import numpy as np
import mpmath as mp
from scipy import integrate

sys.path.insert(0, "src")
from sbprune import truncmath as tm

mp.mp.dps = 60


def scipy_stats(mu, sigma, a, b):
    al = (a - mu) / sigma
    be = (b - mu) / sigma
    x0 = min(max(0.0, al), be)

    def w(x):
        return math.exp(-0.5 * (x - x0) * (x + x0))

    pts = sorted({min(max(x0 + k, al), be) for k in
                  (-50, -20, -8, -3, -1, 0, 1, 3, 8, 20, 50)} | {al, be})
    pts = [p for p in pts if al < p < be]
    kw = dict(points=pts, limit=400, epsabs=0.0, epsrel=1e-13)
    W = integrate.quad(w, al, be, **kw)[0]
    mean = integrate.quad(lambda x: math.exp(mu + sigma * x) * w(x), al, be, **kw)[0] / W
    var = integrate.quad(lambda x: (math.exp(mu + sigma * x) - mean) ** 2 * w(x), al, be, **kw)[0] / W
    return mean, var


def mp_stats(mu, sigma, a, b):
    mu, sigma, a, b = map(mp.mpf, (mu, sigma, a, b))
    al = (a - mu) / sigma
    be = (b - mu) / sigma
    x0 = min(max(mp.mpf(0), al), be)
    w = lambda x: mp.exp(-((x - x0) * (x + x0)) / 2)
    pts = sorted(set([float(al), float(be)] + [float(min(max(x0 + k, al), be)) for k in
                 [-40, -10, -3, -1, -0.1, 0, 0.1, 1, 3, 10, 40]]))
    segs = [(p, q) for p, q in zip(pts[:-1], pts[1:]) if q > p]
    integ = lambda f: mp.fsum(mp.quad(f, [mp.mpf(p), mp.mpf(q)]) for p, q in segs)
    W = integ(w)
    mean = integ(lambda x: mp.exp(mu + sigma * x) * w(x)) / W
    var = integ(lambda x: (mp.exp(mu + sigma * x) - mean) ** 2 * w(x)) / W
    return float(mean), float(var)


cases = [(-6.409375213364429, 11.197066385103124),
         (0.33175598000681106, 9.159578803695316),
         (-4.834105605820504, 1.7602732432669947),
         (-17.89961641044038, 4.453976661303378),
         (0.396338853038305, 0.0025406038284489),
         (-2.0, 1.0)]
for mu, sig in cases:
    p = tm.TruncParams(mu=mu, sigma=sig)
    mine_m = tm.mean_trunc_lognormal(p)
    mine_v = tm.variance_trunc_lognormal(p)
    s_m, s_v = scipy_stats(mu, sig, -20, 0)
    m_m, m_v = mp_stats(mu, sig, -20, 0)
    print(f"mu={mu:9.4f} sig={sig:9.5f}")
    print(f"  mean: mine={mine_m:.12e} scipy={s_m:.12e} mp={m_m:.12e}")
    print(f"  var : mine={mine_v:.12e} scipy={s_v:.12e} mp={m_v:.12e}")
