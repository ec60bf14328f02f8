"""k-Means geometry: quantization errors, normalized loss, and Lloyd's algorithm.

Distance scans are brute force over centers (desk-scale k and d keep this
auditable); summation is numpy pairwise with a fixed chunk size so results
are deterministic. Lloyd's iterations are deterministic given a seed:
k-means++ seeding, nearest-center ties broken by lowest center index, and
an emptied cluster reseeded to the point farthest from its nearest center.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm as _norm, t as _tdist

from ._rng import generator_for
from .errors import PreconditionError
from . import distributions as dist
from .distributions import DistributionSpec

_CHUNK = 1 << 16


@dataclass(frozen=True)
class CenterSet:
    """A candidate solution: k centers in R^d (duplicates allowed)."""

    centers: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.shape[0] < 1:
            raise PreconditionError("need at least one center")
        object.__setattr__(self, "centers", c)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


CentersLike = Union[CenterSet, np.ndarray, list, tuple]


def _centers(Q: CentersLike) -> np.ndarray:
    if isinstance(Q, CenterSet):
        return Q.centers
    return CenterSet(np.asarray(Q, dtype=float)).centers


def _as_points(X) -> np.ndarray:
    """Coerce a sample to (n, d); a 1-d vector means n scalar points."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise PreconditionError("sample must be an (n, d) matrix or a 1-d vector")
    return X


def _min_dist2(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Squared distance of each row of X to its nearest center in C."""
    out = np.empty(X.shape[0])
    for lo in range(0, X.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, X.shape[0])
        diff = X[lo:hi, None, :] - C[None, :, :]
        out[lo:hi] = np.min(np.sum(diff * diff, axis=2), axis=1)
    return out


def dist2(x, Q: CentersLike):
    """min_q ||x - q||^2; a float for one point, a vector for an (n, d) batch."""
    C = _centers(Q)
    pts = np.asarray(x, dtype=float)
    single = pts.ndim <= 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != C.shape[1]:
        raise PreconditionError(
            f"dimension mismatch: points have d={pts.shape[1]}, centers d={C.shape[1]}"
        )
    vals = _min_dist2(pts, C)
    return float(vals[0]) if single else vals


def empirical_error(X, Q: CentersLike) -> float:
    """Mean squared distance of sample rows to their nearest center."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 1:
        raise PreconditionError("sample must contain at least one point")
    return float(np.mean(dist2(X, Q)))


def normalized_loss(x, Q: CentersLike, sigma2: float, expQ: float):
    """d(x,Q)^2 / (sigma2/2 + expQ/2); dominated by the envelope pointwise."""
    if sigma2 <= 0:
        raise PreconditionError("sigma2 must be positive")
    if expQ < 0:
        raise PreconditionError("expected error must be nonnegative")
    return dist2(x, Q) / (0.5 * sigma2 + 0.5 * expQ)


# ---------------------------------------------------------------------------
# Expected quantization error
# ---------------------------------------------------------------------------

def _gauss_piece(a, b, q):
    # int_a^b (z - q)^2 phi(z) dz on the standard normal, closed form.
    i0 = _norm.cdf(b) - _norm.cdf(a)
    pa = _norm.pdf(a) if np.isfinite(a) else 0.0
    pb = _norm.pdf(b) if np.isfinite(b) else 0.0
    apa = a * pa if np.isfinite(a) else 0.0
    bpb = b * pb if np.isfinite(b) else 0.0
    i1 = pa - pb
    i2 = i0 + apa - bpb
    return i2 - 2.0 * q * i1 + q * q * i0


def _regions(centers: np.ndarray):
    cs = np.sort(centers.ravel())
    bounds = np.concatenate(([-np.inf], 0.5 * (cs[:-1] + cs[1:]), [np.inf]))
    return cs, bounds


def _gauss1d_error(mean: float, scale: float, centers: np.ndarray) -> float:
    cs, bounds = _regions((centers - mean) / scale)
    total = 0.0
    for i, q in enumerate(cs):
        total += _gauss_piece(bounds[i], bounds[i + 1], q)
    return scale * scale * total


def _uniform1d_error(lo: float, hi: float, centers: np.ndarray) -> float:
    cs, bounds = _regions(centers)
    total = 0.0
    for i, q in enumerate(cs):
        a, b = max(bounds[i], lo), min(bounds[i + 1], hi)
        if b <= a:
            continue
        total += ((b - q) ** 3 - (a - q) ** 3) / 3.0
    return total / (hi - lo)


def _pareto_piece(alpha: float, s: float, a: float, b: float, q: float) -> float:
    # int_a^b (x - q)^2 alpha s^alpha x^(-alpha-1) dx via truncated raw moments.
    a = max(a, s)
    if b <= a:
        return 0.0

    def raw(r):
        upper = 0.0 if np.isinf(b) else b ** (r - alpha)
        return alpha * s**alpha * (upper - a ** (r - alpha)) / (r - alpha)

    return raw(2) - 2.0 * q * raw(1) + q * q * raw(0)


def _student1d_error(nu: float, scale: float, centers: np.ndarray) -> float:
    cs, bounds = _regions(centers / scale)
    total = 0.0
    for i, q in enumerate(cs):
        val, _ = quad(
            lambda z, qq=q: (z - qq) ** 2 * _tdist.pdf(z, nu),
            bounds[i],
            bounds[i + 1],
            epsabs=1e-11,
            epsrel=1e-11,
        )
        total += val
    return scale * scale * total


def _atoms_error(points: np.ndarray, weights: np.ndarray, C: np.ndarray) -> float:
    d2 = _min_dist2(points, C)
    return float(np.sum(weights * d2))


def expected_error(source, Q: CentersLike, mode: str = "auto") -> float:
    """Expected quantization error E[d(x, Q)^2].

    ``source`` is either a DistributionSpec (analytic mode) or a reference
    sample matrix (reference mode). Analytic mode covers k = 1 for every
    family (variance plus squared distance of the single center to the
    mean), exact atom sums for Bernoulli and the empirical family, and
    exact or quadrature region integrals for the one-dimensional continuous
    families. Multi-center problems over multidimensional families have no
    closed form: pass a large held-out reference sample instead.
    """
    C = _centers(Q)
    is_spec = isinstance(source, DistributionSpec)
    if mode == "auto":
        mode = "analytic" if is_spec else "reference"
    if mode == "reference":
        ref = source.data if is_spec and source.family == dist.EMPIRICAL else source
        if isinstance(ref, DistributionSpec):
            raise PreconditionError("reference mode requires a reference sample matrix")
        return empirical_error(ref, C)
    if mode != "analytic":
        raise PreconditionError(f"unknown mode {mode!r}")
    if not is_spec:
        raise PreconditionError("analytic mode requires a DistributionSpec")

    spec = source
    fam = spec.family
    if fam == dist.EMPIRICAL:
        if spec.data is None:
            raise PreconditionError("no sample loaded")
        return empirical_error(spec.data, C)
    if fam == dist.BERNOULLI:
        p = spec.params["p"]
        atoms = np.array([[0.0], [1.0]])
        return _atoms_error(atoms, np.array([1.0 - p, p]), C)

    profile = dist.analytic_profile(spec)
    if C.shape[0] == 1:
        diff = profile.mu - C[0]
        return profile.sigma2 + float(diff @ diff)

    if spec.dim == 1:
        flat = C.ravel()
        if fam == dist.GAUSSIAN:
            return _gauss1d_error(float(spec.params["mean"][0]), spec.params["scale"], flat)
        if fam == dist.UNIFORM_BALL:
            c0 = float(spec.params["center"][0])
            half = 0.5 * spec.params["diameter"]
            return _uniform1d_error(c0 - half, c0 + half, flat)
        if fam == dist.PARETO:
            cs, bounds = _regions(flat)
            return float(
                sum(
                    _pareto_piece(
                        spec.params["alpha"], spec.params["scale"], bounds[i], bounds[i + 1], q
                    )
                    for i, q in enumerate(cs)
                )
            )
        if fam == dist.STUDENT_T:
            if spec.params["nu"] <= 2:
                raise PreconditionError("expected error is infinite for Student-t with nu <= 2")
            return _student1d_error(spec.params["nu"], spec.params["scale"], flat)
        if fam == dist.MIXTURE:
            total = 0.0
            for w, m_c, s_c in zip(
                spec.params["weights"], spec.params["means"], spec.params["scales"]
            ):
                total += w * _gauss1d_error(float(m_c[0]), float(s_c), flat)
            return total

    raise PreconditionError(
        f"no closed form for k={C.shape[0]} centers on family {fam!r} in "
        f"d={spec.dim}: use reference mode with a held-out sample"
    )


# ---------------------------------------------------------------------------
# Solution generators
# ---------------------------------------------------------------------------

def _assignments(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Index of the nearest center per row; ties go to the lowest index."""
    out = np.empty(X.shape[0], dtype=np.intp)
    for lo in range(0, X.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, X.shape[0])
        diff = X[lo:hi, None, :] - C[None, :, :]
        out[lo:hi] = np.argmin(np.sum(diff * diff, axis=2), axis=1)
    return out


def kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding (D^2 sampling); deterministic given the generator."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    if m < k:
        raise PreconditionError(f"insufficient points: need at least k={k}, got {m}")
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(m)]
    if k == 1:
        return centers
    d2 = _min_dist2(X, centers[:1])
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            u = rng.random() * total
            idx = min(int(np.searchsorted(np.cumsum(d2), u, side="right")), m - 1)
        else:
            idx = int(rng.integers(m))
        centers[j] = X[idx]
        d2 = np.minimum(d2, _min_dist2(X, centers[j : j + 1]))
    return centers


def lloyd(
    X,
    k: int,
    seed: int,
    max_iters: int = 100,
    return_history: bool = False,
):
    """k-means++ seeding followed by Lloyd iterations to assignment fixpoint.

    Deterministic given ``seed``. Returns the converged CenterSet, or
    ``(CenterSet, errors)`` with the empirical error after seeding and after
    each update when ``return_history`` is set (the sequence never increases).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    if m < k:
        raise PreconditionError(f"insufficient points: need at least k={k}, got {m}")
    rng = generator_for(seed)
    C = kmeans_pp(X, k, rng)
    history = [empirical_error(X, C)]
    prev = None
    for _ in range(max_iters):
        assign = _assignments(X, C)
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign
        new_C = np.empty_like(C)
        empty = []
        for j in range(k):
            mask = assign == j
            if mask.any():
                new_C[j] = X[mask].mean(axis=0)
            else:
                empty.append(j)
        if empty:
            d2min = _min_dist2(X, C)
            for j in empty:
                idx = int(np.argmax(d2min))
                new_C[j] = X[idx]
                d2min[idx] = -1.0
        C = new_C
        history.append(empirical_error(X, C))
    result = CenterSet(C)
    return (result, history) if return_history else result
