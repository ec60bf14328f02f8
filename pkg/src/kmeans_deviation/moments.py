"""Empirical moment estimation and the envelope function.

The envelope ``s(x) = 4 d(x, mu)^2 / sigma^2 + 8`` dominates every
normalized quantization loss pointwise and has second moment
``E[s(x)^2] = 128 + 16 * m4hat``, which is what ties sample-size bounds to
the kurtosis.

Estimators are plain plug-in means (divide by n, no bias correction), so
identities like the shifted-variance form of the kurtosis hold exactly on
every sample. Sums are accumulated with numpy's pairwise summation over
``d(x, mu)^2`` computed once, which keeps cancellation in fourth/eighth
powers controlled at n = 1e7 scale and keeps reductions deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import AssumptionUnavailableError, DegenerateSampleError, PreconditionError
from .distributions import MomentProfile


@dataclass(frozen=True)
class EmpiricalMoments:
    """Plug-in moment estimates of a sample.

    ``m4hat_hat`` is the empirical kurtosis (normalized fourth moment of
    d(x, mu_hat)); ``mphat_hat[p]`` the standardized p-th moments for the
    requested orders. The power-mean inequality (m4hat_hat >= 1) and the
    Hoelder chain m4hat_hat <= mphat_hat[p]^(4/p) are checked at
    construction up to float slack.
    """

    n: int
    mu_hat: np.ndarray
    sigma2_hat: float
    m4hat_hat: float
    mphat_hat: dict[int, float]

    def __post_init__(self):
        if self.m4hat_hat < 1 - 1e-12:
            raise PreconditionError(
                f"empirical kurtosis {self.m4hat_hat} violates the power-mean bound >= 1"
            )
        for p, val in self.mphat_hat.items():
            if self.m4hat_hat > val ** (4.0 / p) + 1e-9:
                raise PreconditionError(
                    f"empirical Hoelder chain violated: m4hat_hat={self.m4hat_hat} "
                    f"> mphat_hat[{p}]^(4/{p})={val ** (4.0 / p)}"
                )


def _as_matrix(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise PreconditionError("sample must be an (n, d) matrix or a 1-d vector")
    return x


def _centered_dist2(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return np.sum((x - mu) ** 2, axis=1)


def estimate_moments(
    sample,
    ps: Sequence[int] = (),
    mu: Optional[np.ndarray] = None,
) -> EmpiricalMoments:
    """Plug-in moments of a sample; centered at its mean unless ``mu`` given.

    ``ps`` lists extra standardized moment orders (integers >= 4). Constant
    samples are rejected since every downstream formula needs sigma^2 > 0.
    """
    x = _as_matrix(sample)
    n = x.shape[0]
    if n < 2:
        raise PreconditionError("need n >= 2 points to estimate moments")
    for p in ps:
        if int(p) != p or p < 4:
            raise PreconditionError(f"standardized moment order must be an integer >= 4, got {p}")
    center = np.mean(x, axis=0) if mu is None else np.atleast_1d(np.asarray(mu, dtype=float))
    d2 = _centered_dist2(x, center)
    sigma2 = float(np.mean(d2))
    if sigma2 <= 0:
        raise DegenerateSampleError("degenerate: zero variance")
    m4 = float(np.mean(d2**2)) / sigma2**2
    mphat = {int(p): float(np.mean(d2 ** (p / 2.0))) / sigma2 ** (p / 2.0) for p in ps}
    return EmpiricalMoments(n=n, mu_hat=center, sigma2_hat=sigma2, m4hat_hat=m4, mphat_hat=mphat)


def envelope(x, mu, sigma2: float):
    """Envelope value ``4 d(x, mu)^2 / sigma2 + 8`` (always >= 8).

    Accepts a single point or an (n, d) batch; returns a float or an array.
    """
    if sigma2 <= 0:
        raise PreconditionError("sigma2 must be positive")
    pts = np.asarray(x, dtype=float)
    single = pts.ndim <= 1
    pts = np.atleast_2d(pts)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    vals = 4.0 * _centered_dist2(pts, mu) / sigma2 + 8.0
    return float(vals[0]) if single else vals


def envelope_second_moment(profile: MomentProfile) -> float:
    """E[s(x)^2] = 128 + 16 * m4hat for the profile's distribution."""
    if profile.m4hat is None:
        raise AssumptionUnavailableError(
            "assumption unavailable: envelope second moment needs the kurtosis m4hat"
        )
    return 128.0 + 16.0 * profile.m4hat


def moors_identity_check(sample, mu: Optional[np.ndarray] = None) -> tuple[float, float]:
    """Kurtosis as shifted variance: returns (m4hat_hat, Var(d^2)/sigma^4 + 1).

    The identity E[d^4] = Var(d^2) + E[d^2]^2 is algebraic, so both routes
    agree to float rounding (|lhs - rhs| <= 1e-9 * max(1, lhs)) on any
    non-degenerate sample. The variance route is normalized by sigma^4 so
    the identity holds at any scale, not just unit variance.
    """
    x = _as_matrix(sample)
    if x.shape[0] < 2:
        raise PreconditionError("need n >= 2 points")
    center = np.mean(x, axis=0) if mu is None else np.atleast_1d(np.asarray(mu, dtype=float))
    d2 = _centered_dist2(x, center)
    sigma2 = float(np.mean(d2))
    if sigma2 <= 0:
        raise DegenerateSampleError("degenerate: zero variance")
    lhs = float(np.mean(d2**2)) / sigma2**2
    var_d2 = float(np.mean((d2 - sigma2) ** 2))
    rhs = var_d2 / sigma2**2 + 1.0
    return lhs, rhs
