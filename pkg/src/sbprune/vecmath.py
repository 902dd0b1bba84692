"""Vectorized counterparts of the scalar truncated-normal routines.

Training touches minibatch-by-group arrays of noise draws and pathwise
gradients every step, which is far too hot for per-element Python calls.
This module re-implements the exact algorithms of :mod:`sbprune.truncmath`
(same rational approximations, same log-domain branch structure) on numpy
arrays; tests pin the two implementations against each other elementwise.

All math here is float64 regardless of the tensor dtype used by the network.
"""

from __future__ import annotations

import numpy as np

from .truncmath import (
    _ERF_A,
    _ERF_B,
    _ERF_C,
    _ERF_D,
    _ERF_P,
    _ERF_Q,
    _PPF_A,
    _PPF_B,
    _PPF_C,
    _PPF_D,
)

_SQRT2 = np.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_INV_SQRT_PI = 1.0 / np.sqrt(np.pi)
_SQRT_PI_OVER_2 = np.sqrt(0.5 * np.pi)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
_LOG_TINY = -690.0
_LOG_HALF = float(np.log(0.5))


def erfcx(x):
    """Elementwise scaled complementary error function (x may be any sign)."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.empty_like(ax)

    m1 = ax < 0.46875
    if m1.any():
        z = ax[m1] * ax[m1]
        num = _ERF_A[4] * z
        den = z.copy()
        for i in range(3):
            num = (num + _ERF_A[i]) * z
            den = (den + _ERF_B[i]) * z
        erf = ax[m1] * (num + _ERF_A[3]) / (den + _ERF_B[3])
        out[m1] = np.exp(z) * (1.0 - erf)

    m2 = (~m1) & (ax <= 4.0)
    if m2.any():
        y = ax[m2]
        num = _ERF_C[8] * y
        den = y.copy()
        for i in range(7):
            num = (num + _ERF_C[i]) * y
            den = (den + _ERF_D[i]) * y
        out[m2] = (num + _ERF_C[7]) / (den + _ERF_D[7])

    m3 = ax > 4.0
    if m3.any():
        y = ax[m3]
        z = 1.0 / (y * y)
        num = _ERF_P[5] * z
        den = z.copy()
        for i in range(4):
            num = (num + _ERF_P[i]) * z
            den = (den + _ERF_Q[i]) * z
        r = z * (num + _ERF_P[4]) / (den + _ERF_Q[4])
        out[m3] = (_INV_SQRT_PI - r) / y

    neg = x < 0.0
    if neg.any():
        z = x[neg] * x[neg]
        with np.errstate(over="ignore"):
            out[neg] = 2.0 * np.exp(z) - out[neg]
    return out


def erf(x):
    """Elementwise erf built from the same rational kernels as erfcx."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.empty_like(ax)
    m1 = ax < 0.46875
    if m1.any():
        z = ax[m1] * ax[m1]
        num = _ERF_A[4] * z
        den = z.copy()
        for i in range(3):
            num = (num + _ERF_A[i]) * z
            den = (den + _ERF_B[i]) * z
        out[m1] = ax[m1] * (num + _ERF_A[3]) / (den + _ERF_B[3])
    m2 = ~m1
    if m2.any():
        y = ax[m2]
        out[m2] = 1.0 - erfcx(y) * np.exp(-y * y)
    return np.where(x < 0.0, -out, out)


def _ell(x):
    """log(erfcx(x / sqrt 2) / 2) for x >= 0 arrays."""
    return np.log(0.5 * erfcx(x / _SQRT2))


def log_q(x):
    """log(1 - Phi(x)) for x >= 0 arrays."""
    return _ell(x) - 0.5 * x * x


def _expm1_neg_guard(lq):
    # log1p(-exp(lq)) with the deep-tail shortcut used by the scalar code
    out = np.where(lq > _LOG_TINY, np.log1p(-np.exp(np.minimum(lq, -1e-300))), 0.0)
    return out


def log_phi(x):
    """log Phi(x), any sign."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    m = x <= 0.0
    if m.any():
        out[m] = log_q(-x[m])
    if (~m).any():
        out[~m] = _expm1_neg_guard(log_q(x[~m]))
    return out


def log_q_signed(x):
    """log(1 - Phi(x)), any sign."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    m = x >= 0.0
    if m.any():
        out[m] = log_q(x[m])
    if (~m).any():
        out[~m] = _expm1_neg_guard(log_q(-x[~m]))
    return out


# --- Phi differences, decomposed as quad + rest exactly like the scalar code

_POS, _NEG, _MID = 1, -1, 0


def log_delta_phi(hi, lo):
    """(quad, rest, case) arrays for log(Phi(hi) - Phi(lo)), hi > lo."""
    hi = np.asarray(hi, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi, lo = np.broadcast_arrays(hi, lo)
    quad = np.zeros_like(hi)
    rest = np.empty_like(hi)
    case = np.zeros(hi.shape, dtype=np.int8)

    pos = lo >= 0.0
    if pos.any():
        h, l = hi[pos], lo[pos]
        dlq = _ell(h) - _ell(l) - 0.5 * (h - l) * (h + l)
        rest[pos] = _ell(l) + _expm1_neg_guard(dlq)
        quad[pos] = -0.5 * l * l
        case[pos] = _POS

    neg = hi <= 0.0
    if neg.any():
        h, l = hi[neg], lo[neg]
        dlq = _ell(-l) - _ell(-h) - 0.5 * (l - h) * (l + h)
        rest[neg] = _ell(-h) + _expm1_neg_guard(dlq)
        quad[neg] = -0.5 * h * h
        case[neg] = _NEG

    mid = ~(pos | neg)
    if mid.any():
        h, l = hi[mid], lo[mid]
        rest[mid] = np.log(0.5 * (erf(h / _SQRT2) + erf(-l / _SQRT2)))
    return quad, rest, case


def log_z(alpha, beta):
    quad, rest, _ = log_delta_phi(beta, alpha)
    return quad + rest


def phi_ratios(alpha, beta):
    """(phi(alpha)/Z, phi(beta)/Z) arrays, stable in either tail."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    alpha, beta = np.broadcast_arrays(alpha, beta)
    r_a = np.empty_like(alpha)
    r_b = np.empty_like(alpha)

    neg = beta <= 0.0
    if neg.any():
        a, b = alpha[neg], beta[neg]
        dlq = _ell(-a) - _ell(-b) - 0.5 * (a - b) * (a + b)
        base = -_LOG_SQRT_2PI - _ell(-b) - _expm1_neg_guard(dlq)
        r_b[neg] = np.exp(base)
        r_a[neg] = np.exp(base + 0.5 * (b - a) * (b + a))

    pos = alpha >= 0.0
    if pos.any():
        a, b = alpha[pos], beta[pos]
        dlq = _ell(b) - _ell(a) - 0.5 * (b - a) * (b + a)
        base = -_LOG_SQRT_2PI - _ell(a) - _expm1_neg_guard(dlq)
        r_a[pos] = np.exp(base)
        r_b[pos] = np.exp(base + 0.5 * (a - b) * (a + b))

    mid = ~(neg | pos)
    if mid.any():
        a, b = alpha[mid], beta[mid]
        z = 0.5 * (erf(b / _SQRT2) + erf(-a / _SQRT2))
        r_a[mid] = np.exp(-0.5 * a * a) / (np.sqrt(2.0 * np.pi) * z)
        r_b[mid] = np.exp(-0.5 * b * b) / (np.sqrt(2.0 * np.pi) * z)
    return r_a, r_b


# --- KL and its gradients -----------------------------------------------------


def kl_and_grads(mu, log_sigma, a, b):
    """Per-group KL(trunc log-normal || trunc log-uniform) and gradients.

    Returns (kl, dkl_dmu, dkl_dlog_sigma) arrays; the log-sigma gradient
    includes the chain factor sigma = exp(log_sigma).
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.exp(np.asarray(log_sigma, dtype=np.float64))
    alpha = (a - mu) / sigma
    beta = (b - mu) / sigma
    r_a, r_b = phi_ratios(alpha, beta)
    t = 0.5 * (alpha * r_a - beta * r_b)
    entropy = 0.5 * np.log(2.0 * np.pi * np.e) + np.log(sigma) + log_z(alpha, beta) + t
    kl = np.log(b - a) - entropy
    zmu = (r_a - r_b) / sigma
    nmu = (r_b * (1.0 - beta * beta) - r_a * (1.0 - alpha * alpha)) / (2.0 * sigma)
    d_mu = (t - 1.0) * zmu - nmu
    nsig = (beta * r_b * (1.0 - beta * beta) - alpha * r_a * (1.0 - alpha * alpha)) / (2.0 * sigma)
    d_sigma = -1.0 / sigma - (2.0 * t / sigma) * (1.0 - t) - nsig
    return kl, d_mu, d_sigma * sigma


# --- quantiles and sampling ---------------------------------------------------


def _acklam(p):
    p = np.asarray(p, dtype=np.float64)
    out = np.empty_like(p)
    lo = p < 0.02425
    hi = p > 0.97575
    mid = ~(lo | hi)
    if lo.any():
        q = np.sqrt(-2.0 * np.log(p[lo]))
        out[lo] = _tail_rational(q)
    if hi.any():
        q = np.sqrt(-2.0 * np.log1p(-p[hi]))
        out[hi] = -_tail_rational(q)
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        num = ((((_PPF_A[0] * r + _PPF_A[1]) * r + _PPF_A[2]) * r + _PPF_A[3]) * r + _PPF_A[4]) * r + _PPF_A[5]
        den = ((((_PPF_B[0] * r + _PPF_B[1]) * r + _PPF_B[2]) * r + _PPF_B[3]) * r + _PPF_B[4]) * r + 1.0
        out[mid] = num * q / den
    return out


def _tail_rational(q):
    num = ((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3]) * q + _PPF_C[4]) * q + _PPF_C[5]
    den = (((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q + _PPF_D[3]) * q + 1.0
    return num / den


def _refine_lower(y, p):
    """Halley step on Phi for p <= 1/2 (y <= ~0), tail-safe."""
    mills = _SQRT_PI_OVER_2 * erfcx(-y / _SQRT2)
    t = mills * -np.expm1(np.log(p) - log_q(-y))
    return y - t / (1.0 + 0.5 * y * t)


def inv_log_q(target):
    """Vector solve of log Q(x) = target, x >= 0, target <= log(1/2)."""
    target = np.asarray(target, dtype=np.float64)
    x = np.empty_like(target)
    rep = target > _LOG_TINY
    if rep.any():
        x[rep] = -_acklam(np.exp(target[rep]))
    deep = ~rep
    if deep.any():
        v = -target[deep]
        xd = np.sqrt(2.0 * v)
        for _ in range(3):
            xd = np.sqrt(2.0 * (v - np.log(xd) - _LOG_SQRT_2PI))
        x[deep] = xd
    for _ in range(3):
        x += (log_q(x) - target) * erfcx(x / _SQRT2) / _SQRT_2_OVER_PI
        np.maximum(x, 0.0, out=x)
    return x


def trunc_std_normal_ppf(alpha, beta, u):
    """Quantile of the truncated standard normal; log-domain throughout."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    alpha, beta, u = np.broadcast_arrays(alpha, beta, u)
    log_u = np.log(u)
    log_1mu = np.log1p(-u)
    log_w = np.logaddexp(log_phi(alpha) + log_1mu, log_phi(beta) + log_u)
    log_1mw = np.logaddexp(log_q_signed(alpha) + log_1mu, log_q_signed(beta) + log_u)

    y = np.empty_like(log_w)
    deep_lo = log_w < _LOG_TINY
    deep_hi = (~deep_lo) & (log_1mw < _LOG_TINY)
    low = (~deep_lo) & (~deep_hi) & (log_w <= _LOG_HALF)
    high = ~(deep_lo | deep_hi | low)
    if deep_lo.any():
        y[deep_lo] = -inv_log_q(log_w[deep_lo])
    if deep_hi.any():
        y[deep_hi] = inv_log_q(log_1mw[deep_hi])
    if low.any():
        w = np.exp(log_w[low])
        y[low] = _refine_lower(_acklam(w), w)
    if high.any():
        wq = np.exp(log_1mw[high])
        y[high] = -_refine_lower(_acklam(wq), wq)
    return y


def sample(mu, log_sigma, a, b, u):
    """Noise draws theta = exp(mu + sigma * y(u)), clipped into (e^a, e^b).

    mu/log_sigma broadcast against u (e.g. (G,) against (M, G)).  Returns
    (theta, y); y is needed again by the backward pass.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.exp(np.asarray(log_sigma, dtype=np.float64))
    alpha = (a - mu) / sigma
    beta = (b - mu) / sigma
    y = trunc_std_normal_ppf(alpha, beta, u)
    theta = np.exp(mu + sigma * y)
    lo = np.nextafter(np.exp(a), np.inf)
    hi = np.nextafter(np.exp(b), -np.inf)
    np.clip(theta, lo, hi, out=theta)
    return theta, y


def sample_grad_factors(mu, log_sigma, a, b, u, y):
    """(f_mu, f_sigma) with dtheta/dmu = theta f_mu, dtheta/dsigma = theta f_sigma."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.exp(np.asarray(log_sigma, dtype=np.float64))
    alpha = (a - mu) / sigma
    beta = (b - mu) / sigma
    u = np.asarray(u, dtype=np.float64)
    e_lo = np.log1p(-u) + 0.5 * (y - alpha) * (y + alpha)
    e_hi = np.log(u) + 0.5 * (y - beta) * (y + beta)
    with np.errstate(over="ignore"):
        t_lo = np.exp(e_lo)
        t_hi = np.exp(e_hi)
    f_mu = 1.0 - (t_lo + t_hi)
    f_sigma = y - (alpha * t_lo + beta * t_hi)
    return f_mu, f_sigma
