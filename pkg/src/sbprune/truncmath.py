"""Scalar numerics for the truncated normal / truncated log-normal family.

Everything here works on the log-space parameterization: theta = exp(t) where
t follows a normal N(mu, sigma^2) restricted to [a, b].  With

    alpha = (a - mu) / sigma      beta = (b - mu) / sigma
    Z     = Phi(beta) - Phi(alpha)

the closed forms implemented below are

    entropy   H  = log(sqrt(2 pi e) sigma Z) + (alpha phi(alpha) - beta phi(beta)) / (2 Z)
    KL(q||p)     = log(b - a) - H          (p = log-uniform on [e^a, e^b])
    E[theta]     = exp(mu + sigma^2/2) / Z * [Phi(sigma - alpha) - Phi(sigma - beta)]
    E[theta^2]   = exp(2 mu + 2 sigma^2) / Z * [Phi(2 sigma - alpha) - Phi(2 sigma - beta)]
    Var[theta]   = E[theta^2] - E[theta]^2
    sample       = exp(mu + sigma * PhiInv(Phi(alpha) + Z u)),  u in (0, 1)

Evaluated literally, these expressions collapse in double precision long
before the parameters become extreme: Phi differences underflow, and the
variance loses all significant digits when the distribution concentrates
against a truncation boundary.  The implementation therefore never forms a
bare Phi difference.  All tail masses are carried as logarithms built from
the scaled complementary error function erfcx(x) = exp(x^2) erfc(x), the
large quadratic terms that would dominate those logarithms are cancelled
symbolically before any floating-point subtraction, and the variance switches
to a moment expansion of the boundary-tilted half-normal when the direct
log-domain second difference runs out of precision.  All arithmetic is
64-bit even though downstream tensors are 32-bit.

Functions are pure; the module is safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "TruncParams",
    "std_normal_pdf",
    "std_normal_cdf",
    "inv_std_normal_cdf",
    "erfcx",
    "trunc_normal_entropy",
    "kl_trunc_logn_vs_trunc_logu",
    "sample_trunc_lognormal",
    "sample_grad",
    "mean_trunc_lognormal",
    "variance_trunc_lognormal",
    "snr_trunc_lognormal",
    "kl_grad",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
_SQRT_PI_OVER_2 = math.sqrt(0.5 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_LOG_TINY = -690.0  # below this, exp() underflows; route through log-domain code

# ---------------------------------------------------------------------------
# Parameter container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncParams:
    """Parameters of a truncated log-normal: N(mu, sigma^2) on [a, b] in log space.

    mu and sigma describe the pre-truncation normal; a < b are the log-space
    truncation bounds shared by posterior and prior.
    """

    mu: float
    sigma: float
    a: float = -20.0
    b: float = 0.0

    def __post_init__(self):
        for name in ("mu", "sigma", "a", "b"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"TruncParams.{name} must be finite, got {v!r}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")

    @property
    def alpha(self) -> float:
        return (self.a - self.mu) / self.sigma

    @property
    def beta(self) -> float:
        return (self.b - self.mu) / self.sigma


# ---------------------------------------------------------------------------
# Standard-normal special functions
# ---------------------------------------------------------------------------


def std_normal_pdf(x: float) -> float:
    """Density of the standard normal, exp(-x^2/2) / sqrt(2 pi)."""
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x!r}")
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def std_normal_cdf(x: float) -> float:
    """CDF of the standard normal via erfc, accurate deep into the lower tail."""
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x!r}")
    return 0.5 * math.erfc(-x / _SQRT2)


# Cody-style rational approximations for erf / erfc / erfcx.  Three regions;
# coefficients give ~1 ulp over the full double range, which matters here:
# computing erfcx as exp(x^2)*erfc(x) would inject a relative error of order
# eps*x^2 that the log-domain machinery below cannot tolerate.

_ERF_A = (
    3.16112374387056560e00,
    1.13864154151050156e02,
    3.77485237685302021e02,
    3.20937758913846947e03,
    1.85777706184603153e-1,
)
_ERF_B = (
    2.36012909523441209e01,
    2.44024637934444173e02,
    1.28261652607737228e03,
    2.84423683343917062e03,
)
_ERF_C = (
    5.64188496988670089e-1,
    8.88314979438837594e00,
    6.61191906371416295e01,
    2.98635138197400131e02,
    8.81952221241769090e02,
    1.71204761263407058e03,
    2.05107837782607147e03,
    1.23033935479799725e03,
    2.15311535474403846e-8,
)
_ERF_D = (
    1.57449261107098347e01,
    1.17693950891312499e02,
    5.37181101862009858e02,
    1.62138957456669019e03,
    3.29079923573345963e03,
    4.36261909014324716e03,
    3.43936767414372164e03,
    1.23033935480374942e03,
)
_ERF_P = (
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
)
_ERF_Q = (
    2.56852019228982242e00,
    1.87295284992346047e00,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
)


def _erfcx_nonneg(x: float) -> float:
    """erfcx on x >= 0 (rational approximations, three regions)."""
    if x < 0.46875:
        # erfcx = exp(x^2) * (1 - erf(x)); the exp factor is benign here.
        z = x * x
        num = _ERF_A[4] * z
        den = z
        for i in range(3):
            num = (num + _ERF_A[i]) * z
            den = (den + _ERF_B[i]) * z
        erf = x * (num + _ERF_A[3]) / (den + _ERF_B[3])
        return math.exp(z) * (1.0 - erf)
    if x <= 4.0:
        num = _ERF_C[8] * x
        den = x
        for i in range(7):
            num = (num + _ERF_C[i]) * x
            den = (den + _ERF_D[i]) * x
        return (num + _ERF_C[7]) / (den + _ERF_D[7])
    # x > 4: erfcx = (1/sqrt(pi) - z*P(z)/Q(z)) / x with z = 1/x^2
    z = 1.0 / (x * x)
    num = _ERF_P[5] * z
    den = z
    for i in range(4):
        num = (num + _ERF_P[i]) * z
        den = (den + _ERF_Q[i]) * z
    r = z * (num + _ERF_P[4]) / (den + _ERF_Q[4])
    return (_INV_SQRT_PI - r) / x


def erfcx(x: float) -> float:
    """Scaled complementary error function exp(x^2) erfc(x).

    Decays like 1/(x sqrt(pi)) for large positive x, so it never over- or
    underflows there; for negative x it grows like 2 exp(x^2) and saturates
    to +inf below about -26.6.
    """
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x!r}")
    if x >= 0.0:
        return _erfcx_nonneg(x)
    z = x * x
    if z > 709.0:
        return math.inf
    return 2.0 * math.exp(z) - _erfcx_nonneg(-x)


# Acklam's rational approximation to the standard normal quantile, refined by
# one Halley step on Phi.  Good to ~1e-15 after refinement.

_PPF_A = (
    -3.969683028665376e01,
    2.209460984245205e02,
    -2.759285104469687e02,
    1.383577518672690e02,
    -3.066479806614716e01,
    2.506628277459239e00,
)
_PPF_B = (
    -5.447609879822406e01,
    1.615858368580409e02,
    -1.556989798598866e02,
    6.680131188771972e01,
    -1.328068155288572e01,
)
_PPF_C = (
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e00,
    -2.549732539343734e00,
    4.374664141464968e00,
    2.938163982698783e00,
)
_PPF_D = (
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e00,
    3.754408661907416e00,
)


def _ppf_tail_acklam(q: float) -> float:
    """Lower-tail rational in q = sqrt(-2 log p); already negative."""
    return (
        ((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3]) * q + _PPF_C[4]) * q
        + _PPF_C[5]
    ) / ((((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q + _PPF_D[3]) * q + 1.0)


def _ppf_acklam(p: float) -> float:
    if p < 0.02425:
        return _ppf_tail_acklam(math.sqrt(-2.0 * math.log(p)))
    if p <= 0.97575:
        q = p - 0.5
        r = q * q
        return (
            (((((_PPF_A[0] * r + _PPF_A[1]) * r + _PPF_A[2]) * r + _PPF_A[3]) * r + _PPF_A[4]) * r + _PPF_A[5])
            * q
            / (((((_PPF_B[0] * r + _PPF_B[1]) * r + _PPF_B[2]) * r + _PPF_B[3]) * r + _PPF_B[4]) * r + 1.0)
        )
    return -_ppf_tail_acklam(math.sqrt(-2.0 * math.log1p(-p)))


def _ppf_refine_lower(y: float, p: float) -> float:
    """One Halley refinement of y ~ PhiInv(p) for p <= 1/2 (so y <= ~0).

    The correction e/phi(y) is evaluated as a Mills-ratio product so it stays
    finite arbitrarily deep in the tail where phi underflows:
        e/phi(y) = [Phi(y)/phi(y)] * (1 - p/Phi(y)).
    """
    mills = _SQRT_PI_OVER_2 * _erfcx_nonneg(-y / _SQRT2)  # Phi(y)/phi(y), y <= 0
    t = mills * -math.expm1(math.log(p) - _log_q(-y))
    return y - t / (1.0 + 0.5 * y * t)


def inv_std_normal_cdf(p: float) -> float:
    """Quantile of the standard normal; p must lie strictly inside (0, 1)."""
    if not (isinstance(p, (int, float)) and 0.0 < p < 1.0):
        raise ValueError(f"p must be in the open interval (0, 1), got {p!r}")
    p = float(p)
    if p <= 0.5:
        return _ppf_refine_lower(_ppf_acklam(p), p)
    q = 1.0 - p
    return -_ppf_refine_lower(_ppf_acklam(q), q)


# ---------------------------------------------------------------------------
# Log-domain tail machinery
# ---------------------------------------------------------------------------
#
# ell(x) = log( erfcx(x / sqrt 2) / 2 )  for x >= 0, so that the upper tail is
#
#     Q(x) = 1 - Phi(x) = exp( ell(x) - x^2/2 ).
#
# ell is O(log x) and carries full relative precision; the -x^2/2 part is the
# piece that must be cancelled symbolically, never numerically.


def _ell(x: float) -> float:
    return math.log(0.5 * _erfcx_nonneg(x / _SQRT2))


def _log_q(x: float) -> float:
    """log(1 - Phi(x)) for x >= 0."""
    return _ell(x) - 0.5 * x * x


def _log_q_signed(x: float) -> float:
    """log(1 - Phi(x)) for any x."""
    if x >= 0.0:
        return _log_q(x)
    lq = _log_q(-x)  # = log Phi(x) mirrored
    return math.log1p(-math.exp(lq)) if lq > _LOG_TINY else -math.exp(lq)


def _log_phi_cdf(x: float) -> float:
    """log Phi(x) for any x."""
    if x <= 0.0:
        return _log_q(-x)
    lq = _log_q(x)
    return math.log1p(-math.exp(lq)) if lq > _LOG_TINY else -math.exp(lq)


# Case tags for a Phi difference Phi(hi) - Phi(lo), hi > lo.
_POS = 1  # both args >= 0: evaluated as Q(lo) - Q(hi)
_NEG = -1  # both args <= 0: evaluated as Q(-hi) - Q(-lo)
_MID = 0  # interval straddles zero: evaluated as an erf sum, O(1) value


def _log_delta_phi(hi: float, lo: float):
    """Decompose log(Phi(hi) - Phi(lo)) as quad + rest.

    quad is the large quadratic part (0 or -x^2/2 of the dominant tail
    argument) that callers cancel symbolically; rest is an O(log) remainder
    carrying full precision.  Returns (quad, rest, case).
    """
    if lo >= 0.0:
        dlq = _ell(hi) - _ell(lo) - 0.5 * (hi - lo) * (hi + lo)
        rest = _ell(lo) + (math.log1p(-math.exp(dlq)) if dlq > _LOG_TINY else 0.0)
        return -0.5 * lo * lo, rest, _POS
    if hi <= 0.0:
        dlq = _ell(-lo) - _ell(-hi) - 0.5 * (lo - hi) * (lo + hi)
        rest = _ell(-hi) + (math.log1p(-math.exp(dlq)) if dlq > _LOG_TINY else 0.0)
        return -0.5 * hi * hi, rest, _NEG
    val = 0.5 * (math.erf(hi / _SQRT2) + math.erf(-lo / _SQRT2))
    return 0.0, math.log(val), _MID


def _log_z(alpha: float, beta: float) -> float:
    quad, rest, _ = _log_delta_phi(beta, alpha)
    return quad + rest


def _phi_ratios(alpha: float, beta: float):
    """(phi(alpha)/Z, phi(beta)/Z) without forming phi or Z separately.

    The dominant side is an erfcx ratio with no large exponentials; the
    recessive side carries an exp((x^2 - y^2)/2) factor that underflows
    harmlessly when the interval sits deep in one tail.
    """
    if beta <= 0.0:
        dlq = _ell(-alpha) - _ell(-beta) - 0.5 * (alpha - beta) * (alpha + beta)
        c = math.log1p(-math.exp(dlq)) if dlq > _LOG_TINY else 0.0
        base = -_LOG_SQRT_2PI - _ell(-beta) - c
        r_beta = math.exp(base)
        r_alpha = math.exp(base + 0.5 * (beta - alpha) * (beta + alpha))
        return r_alpha, r_beta
    if alpha >= 0.0:
        dlq = _ell(beta) - _ell(alpha) - 0.5 * (beta - alpha) * (beta + alpha)
        c = math.log1p(-math.exp(dlq)) if dlq > _LOG_TINY else 0.0
        base = -_LOG_SQRT_2PI - _ell(alpha) - c
        r_alpha = math.exp(base)
        r_beta = math.exp(base + 0.5 * (alpha - beta) * (alpha + beta))
        return r_alpha, r_beta
    z = 0.5 * (math.erf(beta / _SQRT2) + math.erf(-alpha / _SQRT2))
    return std_normal_pdf(alpha) / z, std_normal_pdf(beta) / z


# ---------------------------------------------------------------------------
# Entropy / KL and their gradients
# ---------------------------------------------------------------------------


def trunc_normal_entropy(p: TruncParams) -> float:
    """Differential entropy of N(mu, sigma^2) truncated to [a, b]."""
    alpha, beta = p.alpha, p.beta
    r_alpha, r_beta = _phi_ratios(alpha, beta)
    t = 0.5 * (alpha * r_alpha - beta * r_beta)
    return 0.5 * math.log(2.0 * math.pi * math.e) + math.log(p.sigma) + _log_z(alpha, beta) + t


def kl_trunc_logn_vs_trunc_logu(p: TruncParams) -> float:
    """KL divergence from the truncated log-normal to the truncated log-uniform.

    Equals log(b - a) minus the truncated-normal entropy; both distributions
    live on theta in [e^a, e^b] and the divergence is invariant under the
    log transform.  Nonnegative for all valid parameters.
    """
    return math.log(p.b - p.a) - trunc_normal_entropy(p)


def kl_grad(p: TruncParams):
    """(dKL/dmu, dKL/dsigma) of kl_trunc_logn_vs_trunc_logu, in closed form."""
    alpha, beta = p.alpha, p.beta
    sigma = p.sigma
    r_alpha, r_beta = _phi_ratios(alpha, beta)
    t = 0.5 * (alpha * r_alpha - beta * r_beta)
    zmu = (r_alpha - r_beta) / sigma  # (dZ/dmu) / Z
    nmu = (r_beta * (1.0 - beta * beta) - r_alpha * (1.0 - alpha * alpha)) / (2.0 * sigma)
    d_mu = (t - 1.0) * zmu - nmu
    nsig = (beta * r_beta * (1.0 - beta * beta) - alpha * r_alpha * (1.0 - alpha * alpha)) / (
        2.0 * sigma
    )
    d_sigma = -1.0 / sigma - (2.0 * t / sigma) * (1.0 - t) - nsig
    return d_mu, d_sigma


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------
#
# log E[theta^k] = k mu + k^2 sigma^2 / 2 + log(Phi(k sigma - alpha) - Phi(k sigma - beta)) - log Z.
#
# When the mass is squeezed against a boundary the quadratic parts of the two
# log differences cancel against k mu + k^2 sigma^2 / 2 *exactly* (to k*b on
# the right boundary, k*a on the left); performing that cancellation in
# floating point would destroy the result, so it is done symbolically below.


def _log_moment(p: TruncParams, k: int) -> float:
    alpha, beta, sigma = p.alpha, p.beta, p.sigma
    ks = k * sigma
    quad_n, rest_n, case_n = _log_delta_phi(ks - alpha, ks - beta)
    quad_z, rest_z, case_z = _log_delta_phi(beta, alpha)
    if case_z == _NEG and case_n == _POS:
        return k * p.b + rest_n - rest_z
    if case_z == _POS and case_n == _NEG:
        return k * p.a + rest_n - rest_z
    return (k * p.mu + 0.5 * k * k * sigma * sigma + quad_n - quad_z) + rest_n - rest_z


def mean_trunc_lognormal(p: TruncParams) -> float:
    """E[theta] for theta truncated log-normal; always inside (e^a, e^b)."""
    m = math.exp(_log_moment(p, 1))
    lo, hi = math.exp(p.a), math.exp(p.b)
    if m <= lo:
        m = math.nextafter(lo, math.inf)
    elif m >= hi:
        m = math.nextafter(hi, -math.inf)
    return m


def _log_var_ratio_direct(p: TruncParams) -> float:
    """g = log(E[theta^2] / E[theta]^2), by symbolic cancellation of quadratics."""
    alpha, beta, sigma = p.alpha, p.beta, p.sigma
    quad_z, rest_z, case_z = _log_delta_phi(beta, alpha)
    quad_1, rest_1, case_1 = _log_delta_phi(sigma - alpha, sigma - beta)
    quad_2, rest_2, case_2 = _log_delta_phi(2.0 * sigma - alpha, 2.0 * sigma - beta)
    if case_z == _NEG or (case_z == _POS and case_1 == _NEG and case_2 == _NEG):
        # beta <= 0 forces both shifted pairs positive; alpha >= 2 sigma forces
        # both negative.  Either way every quadratic cancels identically.
        return rest_2 + rest_z - 2.0 * rest_1
    quad = sigma * sigma + quad_2 + quad_z - 2.0 * quad_1
    return quad + rest_2 + rest_z - 2.0 * rest_1


# --- boundary-squeeze moment series -----------------------------------------
#
# With the mass squeezed against a boundary, substitute v = distance from the
# boundary in standardized units; v then has density proportional to
# exp(-lam v - v^2/2) on [0, oo) with tilt lam = alpha or -beta.  Raw moments
# q_k = E[v^k] obey I_{k+1} = k I_{k-1} - lam I_k, whose decaying solution is
# recovered stably from the continued fraction
#
#     r_k = I_k / I_{k-1} = k / (lam + r_{k+1}),
#
# or, for small tilt, from the lambda-expansion around half-normal moments.
# Var(theta)/E[theta]^2 then follows from a central-moment expansion of
# E[exp(+-2 sigma v)] / E[exp(+-sigma v)]^2 in which every term is tiny, so
# nothing cancels.

_SERIES_K = 18
_CF_DEPTH = 150


def _tilted_halfnormal_raw_moments(lam: float, kmax: int):
    """Raw moments q_0..q_kmax of density ~ exp(-lam v - v^2/2), v >= 0."""
    if lam >= 2.0:
        j = kmax + _CF_DEPTH
        r = 0.5 * (-lam + math.sqrt(lam * lam + 4.0 * (j + 1)))
        ratios = [0.0] * (j + 1)
        while j >= 1:
            r = j / (lam + r)
            ratios[j] = r
            j -= 1
        q = [1.0]
        acc = 1.0
        for k in range(1, kmax + 1):
            acc *= ratios[k]
            q.append(acc)
        return q
    # small tilt: S_k = sum_j (-lam)^j H_{k+j} / j!  with half-normal moments H
    mtop = kmax + 400
    h = [0.0] * (mtop + 1)
    h[0] = _SQRT_PI_OVER_2
    h[1] = 1.0
    for m in range(2, mtop + 1):
        h[m] = (m - 1) * h[m - 2]
    def s(k: int) -> float:
        terms = []
        c = 1.0  # (-lam)^j / j!
        for j in range(0, mtop - k):
            term = c * h[k + j]
            terms.append(term)
            if j > 8 and abs(term) < 1e-20 * abs(terms[0]):
                break
            c *= -lam / (j + 1)
        return math.fsum(terms)
    s0 = s(0)
    return [s(k) / s0 for k in range(kmax + 1)]


def _var_ratio_series(lam: float, sigma: float, sign: float) -> float:
    """Var(theta)/E[theta]^2 via the tilted-half-normal expansion.

    sign is -1.0 when squeezed at b (theta carries exp(-sigma v)) and +1.0
    when squeezed at a.
    """
    q = _tilted_halfnormal_raw_moments(lam, _SERIES_K)
    c = q[1]
    # central moments rho_k = E[(v - c)^k]
    rho = [1.0, 0.0]
    for k in range(2, _SERIES_K + 1):
        acc = []
        binom = 1.0
        power = 1.0  # (-c)^(k-i) built backwards
        # sum_i C(k,i) q_i (-c)^(k-i)
        powers = [(-c) ** (k - i) for i in range(k + 1)]
        for i in range(k + 1):
            acc.append(binom * q[i] * powers[i])
            binom = binom * (k - i) / (i + 1)
        rho.append(math.fsum(acc))
    w = sign * sigma
    u_terms = []
    wd_terms = []
    wk = w * w  # w^k starting at k=2
    fact = 2.0  # k!
    for k in range(2, _SERIES_K + 1):
        u_terms.append(wk * rho[k] / fact)
        wd_terms.append(wk * rho[k] * (2.0 ** k - 2.0) / fact)
        wk *= w
        fact *= k + 1
    u = math.fsum(u_terms)
    wd = math.fsum(wd_terms)  # = W - 2U
    var = wd - u * u
    one_plus_u = 1.0 + u
    return max(var, 0.0) / (one_plus_u * one_plus_u)


def _squeeze_tilt(p: TruncParams):
    """(lam, sign) when the mass hugs a boundary, else (0, 0)."""
    if p.beta <= 0.0:
        return -p.beta, -1.0
    if p.alpha >= 0.0:
        return p.alpha, 1.0
    return 0.0, 0.0


def _use_series(lam: float, sigma: float) -> bool:
    # Direct log-domain evaluation of g loses precision once g itself falls
    # to a few eps worth of the O(log) remainders; that happens only for a
    # small sigma pressed against a boundary.  The thresholds overlap: on the
    # switching curve both routes are good to ~1e-10 relative.
    return lam >= 0.35 and sigma * sigma / (1.0 + lam * lam) < 3e-5


def variance_trunc_lognormal(p: TruncParams) -> float:
    """Var[theta]; nonnegative, at most (e^b - e^a)^2 / 4."""
    lam, sign = _squeeze_tilt(p)
    m = math.exp(_log_moment(p, 1))
    if sign != 0.0 and _use_series(lam, p.sigma):
        ratio = _var_ratio_series(lam, p.sigma, sign)
    else:
        ratio = math.expm1(_log_var_ratio_direct(p))
    return max(m * m * ratio, 0.0)


def snr_trunc_lognormal(p: TruncParams) -> float:
    """Signal-to-noise ratio E[theta] / sqrt(Var[theta]).

    Returns +inf when the variance underflows to zero (sigma effectively 0:
    the noise is a deterministic scale, infinitely far from prunable).
    """
    lam, sign = _squeeze_tilt(p)
    if sign != 0.0 and _use_series(lam, p.sigma):
        ratio = _var_ratio_series(lam, p.sigma, sign)
    else:
        ratio = math.expm1(_log_var_ratio_direct(p))
    if ratio <= 0.0:
        return math.inf
    return 1.0 / math.sqrt(ratio)


# ---------------------------------------------------------------------------
# Sampling and its pathwise derivatives
# ---------------------------------------------------------------------------


def _inv_log_q(target: float) -> float:
    """Solve log Q(x) = target for x >= 0 and target <= log(1/2).

    For representable tail probabilities the start point comes from the
    rational quantile approximation; below the double underflow limit it
    comes from the asymptotic inversion of -x^2/2 - log(x sqrt(2 pi)).
    Newton steps on log Q (slope -sqrt(2/pi)/erfcx(x/sqrt 2)) finish the job
    and are immune to under/overflow.
    """
    if target > _LOG_TINY:
        x = -_ppf_acklam(math.exp(target))
    else:
        v = -target
        x = math.sqrt(2.0 * v)
        for _ in range(3):
            x = math.sqrt(2.0 * (v - math.log(x) - _LOG_SQRT_2PI))
    for _ in range(3):
        e = _erfcx_nonneg(x / _SQRT2)
        x += (_log_q(x) - target) * e / _SQRT_2_OVER_PI
        if x < 0.0:
            x = 0.0
    return x


def _trunc_std_normal_ppf(alpha: float, beta: float, u: float) -> float:
    """Quantile of the truncated standard normal on [alpha, beta] at u in (0,1).

    Works entirely in log probability so that neither Phi(alpha) nor the mass
    Z has to be representable as a double.
    """
    log_lo = _log_phi_cdf(alpha)
    log_hi = _log_phi_cdf(beta)
    log_u = math.log(u)
    log_1mu = math.log1p(-u)
    # w = Phi(alpha)(1-u) + Phi(beta)u, exact rearrangement of Phi(alpha) + Z u
    log_w = _logaddexp(log_lo + log_1mu, log_hi + log_u)
    lq_lo = _log_q_signed(alpha)
    lq_hi = _log_q_signed(beta)
    log_1mw = _logaddexp(lq_lo + log_1mu, lq_hi + log_u)
    if log_w < _LOG_TINY:
        return -_inv_log_q(log_w)
    if log_1mw < _LOG_TINY:
        return _inv_log_q(log_1mw)
    if log_w <= -0.6931471805599453:  # w <= 1/2: resolve from the lower side
        w = math.exp(log_w)
        return _ppf_refine_lower(_ppf_acklam(w), w)
    wq = math.exp(log_1mw)
    return -_ppf_refine_lower(_ppf_acklam(wq), wq)


def _logaddexp(x: float, y: float) -> float:
    if x < y:
        x, y = y, x
    d = y - x
    return x + math.log1p(math.exp(d)) if d > _LOG_TINY else x


def sample_trunc_lognormal(p: TruncParams, u: float) -> float:
    """Inverse-CDF sample exp(mu + sigma PhiInv(Phi(alpha) + Z u)).

    Strictly increasing in u, differentiable in (mu, sigma) at fixed u, and
    always strictly inside (e^a, e^b) (boundary-rounded results are nudged by
    one ulp).
    """
    if not (isinstance(u, (int, float)) and 0.0 < u < 1.0):
        raise ValueError(f"u must be in the open interval (0, 1), got {u!r}")
    y = _trunc_std_normal_ppf(p.alpha, p.beta, float(u))
    theta = math.exp(p.mu + p.sigma * y)
    lo, hi = math.exp(p.a), math.exp(p.b)
    if theta <= lo:
        theta = math.nextafter(lo, math.inf)
    elif theta >= hi:
        theta = math.nextafter(hi, -math.inf)
    return theta


def sample_grad(p: TruncParams, u: float):
    """Pathwise derivatives (dtheta/dmu, dtheta/dsigma) at fixed u.

    Includes the dependence of alpha, beta, Z on (mu, sigma):

        dtheta/dmu    = theta (1 - [(1-u) phi(alpha) + u phi(beta)] / phi(y))
        dtheta/dsigma = theta (y - [(1-u) alpha phi(alpha) + u beta phi(beta)] / phi(y))

    The pdf ratios are evaluated as exp((y^2 - x^2)/2) in log space, combined
    with log(1-u) / log(u) so extreme weights never overflow.
    """
    if not (isinstance(u, (int, float)) and 0.0 < u < 1.0):
        raise ValueError(f"u must be in the open interval (0, 1), got {u!r}")
    u = float(u)
    alpha, beta = p.alpha, p.beta
    y = _trunc_std_normal_ppf(alpha, beta, u)
    theta = math.exp(p.mu + p.sigma * y)
    e_lo = math.log1p(-u) + 0.5 * (y - alpha) * (y + alpha)
    e_hi = math.log(u) + 0.5 * (y - beta) * (y + beta)
    t_lo = math.exp(e_lo)
    t_hi = math.exp(e_hi)
    d_mu = theta * (1.0 - (t_lo + t_hi))
    d_sigma = theta * (y - (alpha * t_lo + beta * t_hi))
    return d_mu, d_sigma
