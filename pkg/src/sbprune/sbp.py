"""The multiplicative-noise layer: group-shared truncated log-normal noise.

During training every object in the minibatch gets its own noise draw per
group (features in a group share a scalar).  At evaluation time the noise is
replaced by its expectation, with groups below the SNR threshold forced to
exactly zero.  KL terms against the truncated log-uniform prior and all
pathwise gradients come from :mod:`truncmath` / :mod:`vecmath`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import truncmath, vecmath
from .errors import ShapeError, StateError

# Keep PhiInv finite: uniforms are drawn from (EPS_U, 1 - EPS_U).
EPS_U = 1e-7

# Clamp box applied after every optimizer step; keeps Z bounded away from 0
# and inside the numerically validated region.
MU_MIN, MU_MAX = -20.0, 5.0
LOG_SIGMA_MIN, LOG_SIGMA_MAX = -6.0, 3.0

DEFAULT_INIT_MU = 0.0
DEFAULT_INIT_SIGMA = 0.1  # near-deterministic noise with mean close to e^b = 1


class GroupPattern:
    """Assignment of flat feature indices to shared-noise groups.

    `group_of` must be a surjective map onto 0..n_groups-1; features in the
    same group are multiplied by the same noise scalar in every draw.
    """

    def __init__(self, input_shape, group_of, n_groups, kind="custom"):
        input_shape = tuple(int(s) for s in input_shape)
        if len(input_shape) == 0 or any(s <= 0 for s in input_shape):
            raise ValueError(f"input_shape must be nonempty and positive, got {input_shape}")
        group_of = np.asarray(group_of, dtype=np.int64)
        n_features = int(np.prod(input_shape))
        if group_of.shape != (n_features,):
            raise ValueError(
                f"group_of must have one entry per feature ({n_features}), got shape {group_of.shape}"
            )
        if n_groups <= 0:
            raise ValueError(f"n_groups must be positive, got {n_groups}")
        if group_of.min() < 0 or group_of.max() >= n_groups:
            raise ValueError("group indices out of range")
        present = np.bincount(group_of, minlength=n_groups)
        if (present == 0).any():
            empty = int(np.flatnonzero(present == 0)[0])
            raise ValueError(f"group {empty} has no features (map must be surjective)")
        self.input_shape = input_shape
        self.group_of = group_of
        self.n_groups = int(n_groups)
        self.kind = kind

    @property
    def n_features(self) -> int:
        return int(np.prod(self.input_shape))

    @classmethod
    def per_feature(cls, input_shape):
        n = int(np.prod([int(s) for s in input_shape]))
        return cls(input_shape, np.arange(n), n, kind="per_feature")

    @classmethod
    def per_channel(cls, input_shape):
        """One group per channel of an (H, W, C) activation: g(h, w, c) = c."""
        if len(input_shape) != 3:
            raise ValueError(f"per_channel needs an (H, W, C) shape, got {input_shape}")
        h, w, c = (int(s) for s in input_shape)
        return cls((h, w, c), np.tile(np.arange(c), h * w), c, kind="per_channel")

    def __eq__(self, other):
        return (
            isinstance(other, GroupPattern)
            and self.input_shape == other.input_shape
            and self.n_groups == other.n_groups
            and np.array_equal(self.group_of, other.group_of)
        )


@dataclass
class PruneReport:
    snr: np.ndarray
    kept: np.ndarray
    kept_count: int
    threshold: float
    group_labels: list[str] | None = None

    @property
    def total(self) -> int:
        return int(self.kept.size)


class SbpLayer:
    """Trainable noise layer over a fixed group pattern.

    Mutable training state (cached draws) confines an instance to one logical
    training thread; evaluation of frozen parameters is read-only.
    """

    def __init__(
        self,
        pattern: GroupPattern,
        a: float = -20.0,
        b: float = 0.0,
        init_mu: float = DEFAULT_INIT_MU,
        init_sigma: float = DEFAULT_INIT_SIGMA,
        prune_threshold: float = 1.0,
    ):
        if not a < b:
            raise ValueError(f"need a < b, got {a}, {b}")
        if prune_threshold < 0:
            raise ValueError("prune_threshold must be >= 0")
        self.pattern = pattern
        self.a = float(a)
        self.b = float(b)
        self.prune_threshold = float(prune_threshold)
        g = pattern.n_groups
        self.mu = np.full(g, float(init_mu))
        self.log_sigma = np.full(g, math.log(float(init_sigma)))
        self.grad_mu = np.zeros(g)
        self.grad_log_sigma = np.zeros(g)
        self.last_u = None
        self.last_noise = None
        self._last_x = None
        self._version = 0
        self._eval_cache = None

    # -- parameter bookkeeping

    def touch(self):
        """Invalidate caches after external mutation of mu/log_sigma."""
        self._version += 1

    def clamp_params(self):
        np.clip(self.mu, MU_MIN, MU_MAX, out=self.mu)
        np.clip(self.log_sigma, LOG_SIGMA_MIN, LOG_SIGMA_MAX, out=self.log_sigma)
        self.touch()

    def params(self):
        return [("mu", self.mu, self.grad_mu), ("log_sigma", self.log_sigma, self.grad_log_sigma)]

    # -- forward / backward

    def _check_shape(self, x):
        if x.ndim != 1 + len(self.pattern.input_shape) or x.shape[1:] != self.pattern.input_shape:
            raise ShapeError(
                f"expected input (M, {', '.join(map(str, self.pattern.input_shape))}), got {x.shape}"
            )

    def forward_train(self, x, rng: np.random.Generator):
        """One independent noise vector per minibatch object; caches draws."""
        self._check_shape(x)
        m = x.shape[0]
        g = self.pattern.n_groups
        u = rng.uniform(EPS_U, 1.0 - EPS_U, size=(m, g))
        theta, y = vecmath.sample(self.mu, self.log_sigma, self.a, self.b, u)
        self.last_u = u
        self.last_noise = theta
        self._last_y = y
        self._last_x = x
        scale = theta[:, self.pattern.group_of].astype(x.dtype, copy=False)
        return x * scale.reshape(x.shape)

    def forward_eval(self, x):
        """Deterministic: kept groups scaled by their noise expectation, pruned ones zeroed."""
        self._check_shape(x)
        scales = self.eval_scales()
        scale = scales[self.pattern.group_of].astype(x.dtype, copy=False)
        return x * scale.reshape(self.pattern.input_shape)

    def backward(self, grad_y):
        """Data-term gradients only (KL gradients are added by the loss assembler).

        Returns (grad_x, grad_mu, grad_log_sigma); also stores the two group
        gradients on the layer.
        """
        if self.last_noise is None:
            raise StateError("backward called without a cached forward_train pass")
        x = self._last_x
        if grad_y.shape != x.shape:
            raise ShapeError(f"grad_y shape {grad_y.shape} != input shape {x.shape}")
        m = x.shape[0]
        g = self.pattern.n_groups
        group_of = self.pattern.group_of
        theta = self.last_noise
        scale = theta[:, group_of].astype(grad_y.dtype, copy=False).reshape(x.shape)
        grad_x = grad_y * scale

        gyx = (np.asarray(grad_y, dtype=np.float64) * np.asarray(x, dtype=np.float64)).reshape(m, -1)
        flat_idx = (group_of[None, :] + g * np.arange(m)[:, None]).ravel()
        s = np.bincount(flat_idx, weights=gyx.ravel(), minlength=m * g).reshape(m, g)

        f_mu, f_sigma = vecmath.sample_grad_factors(
            self.mu, self.log_sigma, self.a, self.b, self.last_u, self._last_y
        )
        dtheta_dmu = theta * f_mu
        dtheta_dsigma = theta * f_sigma
        self.grad_mu = (s * dtheta_dmu).sum(axis=0)
        self.grad_log_sigma = (s * dtheta_dsigma).sum(axis=0) * np.exp(self.log_sigma)
        return grad_x, self.grad_mu, self.grad_log_sigma

    # -- divergence bookkeeping

    def kl_sum(self) -> float:
        kl, _, _ = vecmath.kl_and_grads(self.mu, self.log_sigma, self.a, self.b)
        return float(kl.sum())

    def kl_sum_grads(self):
        """(d/dmu, d/dlog_sigma) of kl_sum, per group."""
        _, d_mu, d_ls = vecmath.kl_and_grads(self.mu, self.log_sigma, self.a, self.b)
        return d_mu, d_ls

    # -- pruning

    def snr_per_group(self) -> np.ndarray:
        sigma = np.exp(self.log_sigma)
        return np.array(
            [
                truncmath.snr_trunc_lognormal(
                    truncmath.TruncParams(float(self.mu[i]), float(sigma[i]), self.a, self.b)
                )
                for i in range(self.pattern.n_groups)
            ]
        )

    def eval_scales(self) -> np.ndarray:
        cached = self._eval_cache
        if cached is not None and cached[0] == self._version:
            return cached[1]
        sigma = np.exp(self.log_sigma)
        snr = self.snr_per_group()
        means = np.array(
            [
                truncmath.mean_trunc_lognormal(
                    truncmath.TruncParams(float(self.mu[i]), float(sigma[i]), self.a, self.b)
                )
                for i in range(self.pattern.n_groups)
            ]
        )
        scales = np.where(snr >= self.prune_threshold, means, 0.0)
        self._eval_cache = (self._version, scales)
        return scales

    def prune_report(self, group_labels=None) -> PruneReport:
        snr = self.snr_per_group()
        kept = snr >= self.prune_threshold
        return PruneReport(
            snr=snr,
            kept=kept,
            kept_count=int(kept.sum()),
            threshold=self.prune_threshold,
            group_labels=group_labels,
        )
