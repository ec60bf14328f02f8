"""Catalog of data-generating distributions on R^d.

Each family comes with a seeded, bit-reproducible sampler and (where closed
forms exist) analytic moment metadata: mean, variance sigma^2 = E[d(x,mu)^2],
the normalized fourth moment m4hat = E[d(x,mu)^4]/sigma^4, standardized
higher moments mphat[p] = E[d(x,mu)^p]/sigma^p, a subgaussian tail
certificate (a, b), and a support diameter.

Sampling algorithms are fixed so identical ``(spec, n, seed)`` inputs give
bit-identical output regardless of platform or worker count:

* all streams come from Philox keyed by the seed (see :mod:`._rng`);
* Gaussians use numpy's ziggurat ``standard_normal``;
* Student-t and Pareto use inverse-CDF transforms of ``random()`` uniforms;
* uniform-ball draws a Gaussian direction then a radius ``(R/2) * u^(1/d)``;
* mixtures draw component uniforms first, then one Gaussian block;
* the empirical family resamples loaded rows with ``integers()``.

Heavy-tailed families (Student-t, Pareto) and Bernoulli are scalar only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln, stdtrit

from ._rng import check_seed, generator_for
from .errors import AssumptionUnavailableError, PreconditionError

GAUSSIAN = "isotropic-gaussian"
BERNOULLI = "bernoulli-scalar"
STUDENT_T = "student-t-scalar"
PARETO = "pareto-scalar"
UNIFORM_BALL = "uniform-ball"
MIXTURE = "gaussian-mixture"
EMPIRICAL = "empirical"

FAMILIES = (GAUSSIAN, BERNOULLI, STUDENT_T, PARETO, UNIFORM_BALL, MIXTURE, EMPIRICAL)
_SCALAR_FAMILIES = (BERNOULLI, STUDENT_T, PARETO)

# Standardized moment orders filled by analytic_profile when defined.
PROFILE_MOMENT_ORDERS = (8, 12, 16)

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class MomentProfile:
    """Moment metadata of a distribution; optional fields may be absent.

    Invariants enforced at construction: sigma2 in (0, inf); m4hat >= 1
    (power-mean inequality E[d^2]^2 <= E[d^4]); m4hat <= mphat[p]^(4/p) for
    every stored p (Hoelder); and m4hat <= diameter^4/sigma2^2 when the
    support diameter is known.
    """

    mu: np.ndarray
    sigma2: float
    m4hat: Optional[float] = None
    mphat: Optional[dict[int, float]] = None
    subgauss: Optional[tuple[float, float]] = None
    diameter: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)))
        if not (0 < self.sigma2 < math.inf):
            raise PreconditionError(f"sigma2 must lie in (0, inf), got {self.sigma2}")
        if self.m4hat is not None:
            if not self.m4hat >= 1 - 1e-12:
                raise PreconditionError(
                    f"m4hat must be >= 1 (power-mean inequality), got {self.m4hat}"
                )
            if self.mphat:
                for p, mp_val in self.mphat.items():
                    if self.m4hat > mp_val ** (4.0 / p) * (1 + 1e-9):
                        raise PreconditionError(
                            f"m4hat={self.m4hat} exceeds mphat[{p}]^(4/{p})="
                            f"{mp_val ** (4.0 / p)} (Hoelder chain)"
                        )
            if self.diameter is not None:
                cap = self.diameter**4 / self.sigma2**2
                if self.m4hat > cap * (1 + 1e-9):
                    raise PreconditionError(
                        f"m4hat={self.m4hat} exceeds diameter^4/sigma^4={cap}"
                    )
        if self.subgauss is not None:
            a, b = self.subgauss
            if not (a > 1 and b > 0):
                raise PreconditionError(f"invalid subgaussian certificate (a={a}, b={b})")
        if self.diameter is not None and not self.diameter > 0:
            raise PreconditionError("diameter must be positive")


@dataclass(frozen=True)
class DistributionSpec:
    """Parametric model of a distribution P on R^d.

    ``params`` holds family-specific values (see the constructors below);
    ``data`` is only set for the empirical family.
    """

    family: str
    dim: int
    params: dict = field(default_factory=dict)
    data: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PreconditionError(f"unknown family {self.family!r}")
        if self.dim < 1:
            raise PreconditionError("dim must be >= 1")
        if self.family in _SCALAR_FAMILIES and self.dim != 1:
            raise PreconditionError(f"{self.family} requires dim = 1")


def gaussian(dim: int = 1, scale: float = 1.0, mean=0.0) -> DistributionSpec:
    """Isotropic Gaussian on R^d with per-coordinate standard deviation ``scale``."""
    if scale <= 0:
        raise PreconditionError("scale must be positive")
    mean = np.broadcast_to(np.atleast_1d(np.asarray(mean, dtype=float)), (dim,)).copy()
    return DistributionSpec(GAUSSIAN, dim, {"scale": float(scale), "mean": mean})


def bernoulli(p: float) -> DistributionSpec:
    """Bernoulli on {0, 1} with P[x=1] = p, p in (0, 1)."""
    if not 0 < p < 1:
        raise PreconditionError(f"Bernoulli p must lie in (0,1), got {p}")
    return DistributionSpec(BERNOULLI, 1, {"p": float(p)})


def student_t(nu: float, scale: float = 1.0) -> DistributionSpec:
    """Scaled Student-t with nu > 0 degrees of freedom (scalar)."""
    if nu <= 0 or scale <= 0:
        raise PreconditionError("Student-t requires nu > 0 and scale > 0")
    return DistributionSpec(STUDENT_T, 1, {"nu": float(nu), "scale": float(scale)})


def pareto(alpha: float, scale: float = 1.0) -> DistributionSpec:
    """Pareto (type I) on [scale, inf) with shape alpha > 0 (scalar)."""
    if alpha <= 0 or scale <= 0:
        raise PreconditionError("Pareto requires alpha > 0 and scale > 0")
    return DistributionSpec(PARETO, 1, {"alpha": float(alpha), "scale": float(scale)})


def uniform_ball(diameter: float, dim: int = 1, center=0.0) -> DistributionSpec:
    """Uniform distribution on a ball of the given diameter in R^d."""
    if diameter <= 0:
        raise PreconditionError("diameter must be positive")
    center = np.broadcast_to(np.atleast_1d(np.asarray(center, dtype=float)), (dim,)).copy()
    return DistributionSpec(UNIFORM_BALL, dim, {"diameter": float(diameter), "center": center})


def gaussian_mixture(weights, means, scales) -> DistributionSpec:
    """Mixture of isotropic Gaussian components.

    ``means`` has shape (n_components, d); ``weights`` and ``scales`` have
    length n_components. Weights must sum to 1 within 1e-12.
    """
    weights = np.asarray(weights, dtype=float)
    means = np.atleast_2d(np.asarray(means, dtype=float))
    scales = np.asarray(scales, dtype=float)
    if weights.ndim != 1 or len(weights) != means.shape[0] or len(weights) != len(scales):
        raise PreconditionError("weights, means, scales must have matching component counts")
    if np.any(weights <= 0):
        raise PreconditionError("mixture weights must be positive")
    if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
        raise PreconditionError(f"mixture weights must sum to 1 within {_WEIGHT_TOL}")
    if np.any(scales <= 0):
        raise PreconditionError("mixture scales must be positive")
    return DistributionSpec(
        MIXTURE,
        means.shape[1],
        {"weights": weights, "means": means, "scales": scales},
    )


def empirical(data) -> DistributionSpec:
    """Empirical distribution backed by a loaded sample (rows = points)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.size == 0:
        raise PreconditionError("empirical family requires at least one point")
    return DistributionSpec(EMPIRICAL, data.shape[1], {}, data=data)


def load_empirical_csv(path) -> DistributionSpec:
    """Load an empirical distribution from CSV (one point per row).

    A header line is auto-detected: if any token of the first line does not
    parse as a float the line is skipped.
    """
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    skip = 0
    tokens = [t.strip() for t in first.strip().split(",") if t.strip() != ""]
    if not tokens:
        raise PreconditionError(f"no sample loaded: {path} is empty")
    try:
        [float(t) for t in tokens]
    except ValueError:
        skip = 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if data.size == 0:
        raise PreconditionError(f"no sample loaded: {path} has no data rows")
    spec = empirical(data)
    spec.params["path"] = str(path)
    return spec


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample(spec: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """Draw n i.i.d. points from ``spec`` as an (n, d) array.

    Identical ``(spec, n, seed)`` yields bit-identical output; the stream is
    keyed only by ``seed`` (see module docstring for draw-order rules).
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    check_seed(seed)
    g = generator_for(seed)
    d = spec.dim
    fam = spec.family
    if fam == GAUSSIAN:
        z = g.standard_normal((n, d))
        return spec.params["mean"] + spec.params["scale"] * z
    if fam == BERNOULLI:
        u = g.random(n)
        return (u < spec.params["p"]).astype(float).reshape(n, 1)
    if fam == STUDENT_T:
        u = np.maximum(g.random(n), 1e-300)
        x = stdtrit(spec.params["nu"], u)
        return (spec.params["scale"] * x).reshape(n, 1)
    if fam == PARETO:
        u = g.random(n)
        x = spec.params["scale"] * (1.0 - u) ** (-1.0 / spec.params["alpha"])
        return x.reshape(n, 1)
    if fam == UNIFORM_BALL:
        u = g.random(n)
        z = g.standard_normal((n, d))
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        radius = 0.5 * spec.params["diameter"] * u ** (1.0 / d)
        return spec.params["center"] + radius[:, None] * (z / norms)
    if fam == MIXTURE:
        weights = spec.params["weights"]
        u = g.random(n)
        idx = np.searchsorted(np.cumsum(weights), u, side="right")
        idx = np.minimum(idx, len(weights) - 1)
        z = g.standard_normal((n, d))
        return spec.params["means"][idx] + spec.params["scales"][idx, None] * z
    if fam == EMPIRICAL:
        if spec.data is None:
            raise PreconditionError("no sample loaded")
        idx = g.integers(0, spec.data.shape[0], size=n)
        return spec.data[idx].copy()
    raise PreconditionError(f"unknown family {fam!r}")


# ---------------------------------------------------------------------------
# Analytic moments
# ---------------------------------------------------------------------------

def _gaussian_mphat(d: int, p: int) -> float:
    # E[chi2_d^(p/2)] = 2^(p/2) Gamma(d/2+p/2)/Gamma(d/2); normalize by (d)^(p/2).
    log_val = 0.5 * p * math.log(2.0) + gammaln(0.5 * (d + p)) - gammaln(0.5 * d)
    return math.exp(log_val - 0.5 * p * math.log(d))


def _bernoulli_abs_moment(p: float, r: int) -> float:
    # d(x, mu) equals p with prob 1-p and 1-p with prob p.
    return (1 - p) * p**r + p * (1 - p) ** r


def _student_t_mphat(nu: float, p: int) -> float:
    # E|T|^p = nu^(p/2) Gamma((p+1)/2) Gamma((nu-p)/2) / (sqrt(pi) Gamma(nu/2));
    # dividing by sigma^p = (nu/(nu-2))^(p/2) cancels the nu factor.
    log_val = (
        0.5 * p * math.log(nu - 2)
        + gammaln(0.5 * (p + 1))
        + gammaln(0.5 * (nu - p))
        - 0.5 * math.log(math.pi)
        - gammaln(0.5 * nu)
    )
    return math.exp(log_val)


def _pareto_central_moment(alpha: float, scale: float, r: int) -> float:
    # E[(x - mu)^r] for even r via binomial expansion of raw moments
    # E[x^j] = alpha * scale^j / (alpha - j), defined for j < alpha.
    mu = alpha * scale / (alpha - 1)
    total = 0.0
    for j in range(r + 1):
        raw = alpha * scale**j / (alpha - j)
        total += math.comb(r, j) * raw * (-mu) ** (r - j)
    return total


def _uniform_ball_mphat(d: int, p: int) -> float:
    # E[||x||^p] = d/(d+p) * a^p for the ball of radius a; scale cancels.
    return (d + 2) ** (p / 2.0) / (d ** (p / 2.0 - 1) * (d + p))


def analytic_profile(spec: DistributionSpec) -> MomentProfile:
    """Closed-form MomentProfile for a parametric family.

    Fields without a closed form (or undefined for the given parameters,
    e.g. Student-t kurtosis at nu <= 4) are left absent rather than raising.
    The empirical family is rejected: estimate from the sample instead.

    Note on the Gaussian kurtosis: the isotropic Gaussian has
    m4hat = 1 + 2/d (3 in one dimension). A commonly quoted value of "2"
    matches this formula only at d = 2; this library always reports the
    formula value.
    """
    fam = spec.family
    d = spec.dim
    if fam == EMPIRICAL:
        raise PreconditionError(
            "analytic profile requires a parametric family; "
            "use estimate_moments on the loaded sample"
        )
    if fam == GAUSSIAN:
        scale = spec.params["scale"]
        mphat = {p: _gaussian_mphat(d, p) for p in PROFILE_MOMENT_ORDERS}
        subgauss = (2.0, 1.0) if d == 1 else None
        return MomentProfile(
            mu=spec.params["mean"],
            sigma2=d * scale**2,
            m4hat=1.0 + 2.0 / d,
            mphat=mphat,
            subgauss=subgauss,
        )
    if fam == BERNOULLI:
        p = spec.params["p"]
        s2 = p * (1 - p)
        mphat = {
            q: _bernoulli_abs_moment(p, q) / s2 ** (q / 2.0)
            for q in PROFILE_MOMENT_ORDERS
        }
        return MomentProfile(
            mu=np.array([p]),
            sigma2=s2,
            m4hat=_bernoulli_abs_moment(p, 4) / s2**2,
            mphat=mphat,
            diameter=1.0,
        )
    if fam == STUDENT_T:
        nu = spec.params["nu"]
        scale = spec.params["scale"]
        if nu <= 2:
            raise AssumptionUnavailableError(
                f"Student-t with nu={nu} has no finite variance (requires nu > 2)"
            )
        m4 = 3 * (nu - 2) / (nu - 4) if nu > 4 else None
        mphat = {p: _student_t_mphat(nu, p) for p in PROFILE_MOMENT_ORDERS if nu > p}
        return MomentProfile(
            mu=np.array([0.0]),
            sigma2=scale**2 * nu / (nu - 2),
            m4hat=m4,
            mphat=mphat or None,
        )
    if fam == PARETO:
        alpha = spec.params["alpha"]
        scale = spec.params["scale"]
        if alpha <= 2:
            raise AssumptionUnavailableError(
                f"Pareto with alpha={alpha} has no finite variance (requires alpha > 2)"
            )
        s2 = _pareto_central_moment(alpha, scale, 2)
        m4 = _pareto_central_moment(alpha, scale, 4) / s2**2 if alpha > 4 else None
        mphat = {
            p: _pareto_central_moment(alpha, scale, p) / s2 ** (p / 2.0)
            for p in PROFILE_MOMENT_ORDERS
            if alpha > p
        }
        return MomentProfile(
            mu=np.array([alpha * scale / (alpha - 1)]),
            sigma2=s2,
            m4hat=m4,
            mphat=mphat or None,
        )
    if fam == UNIFORM_BALL:
        R = spec.params["diameter"]
        a = 0.5 * R
        mphat = {p: _uniform_ball_mphat(d, p) for p in PROFILE_MOMENT_ORDERS}
        return MomentProfile(
            mu=spec.params["center"],
            sigma2=d / (d + 2.0) * a**2,
            m4hat=(d + 2.0) ** 2 / (d * (d + 4.0)),
            mphat=mphat,
            diameter=R,
        )
    if fam == MIXTURE:
        w = spec.params["weights"]
        means = spec.params["means"]
        scales = spec.params["scales"]
        mu = w @ means
        r2 = np.sum((means - mu) ** 2, axis=1)
        sigma2 = float(np.sum(w * (d * scales**2 + r2)))
        fourth = np.sum(
            w
            * (
                r2**2
                + (4.0 + 2.0 * d) * scales**2 * r2
                + d * (d + 2.0) * scales**4
            )
        )
        return MomentProfile(mu=mu, sigma2=sigma2, m4hat=float(fourth) / sigma2**2)
    raise PreconditionError(f"unknown family {fam!r}")


# ---------------------------------------------------------------------------
# Scaling and spec strings
# ---------------------------------------------------------------------------

def scale_spec(spec: DistributionSpec, lam: float) -> DistributionSpec:
    """Distribution of lam * x for x ~ spec (multiplies sigma^2 by lam^2).

    Bernoulli cannot be scaled within its family (support must stay {0,1}).
    """
    if lam <= 0:
        raise PreconditionError("lam must be positive")
    fam = spec.family
    if fam == GAUSSIAN:
        return gaussian(spec.dim, lam * spec.params["scale"], lam * spec.params["mean"])
    if fam == STUDENT_T:
        return student_t(spec.params["nu"], lam * spec.params["scale"])
    if fam == PARETO:
        return pareto(spec.params["alpha"], lam * spec.params["scale"])
    if fam == UNIFORM_BALL:
        return uniform_ball(lam * spec.params["diameter"], spec.dim, lam * spec.params["center"])
    if fam == MIXTURE:
        return gaussian_mixture(
            spec.params["weights"], lam * spec.params["means"], lam * spec.params["scales"]
        )
    if fam == EMPIRICAL:
        return empirical(lam * spec.data)
    raise PreconditionError(f"family {fam} does not support scaling")


_ALIASES = {
    "gaussian": GAUSSIAN,
    "normal": GAUSSIAN,
    GAUSSIAN: GAUSSIAN,
    "bernoulli": BERNOULLI,
    BERNOULLI: BERNOULLI,
    "student-t": STUDENT_T,
    STUDENT_T: STUDENT_T,
    "pareto": PARETO,
    PARETO: PARETO,
    "uniform-ball": UNIFORM_BALL,
    "mixture": MIXTURE,
    MIXTURE: MIXTURE,
    "empirical": EMPIRICAL,
}


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split("~")])


def parse_spec_string(text: str) -> DistributionSpec:
    """Parse a compact ``family:key=val,...`` spec string.

    Examples: ``gaussian:d=1``, ``gaussian:d=2,scale=0.5``,
    ``student-t:nu=5``, ``bernoulli:p=0.5``, ``pareto:alpha=5``,
    ``uniform-ball:R=1,d=2``,
    ``mixture:weights=0.5|0.5,means=-2|2,scales=1|1``,
    ``empirical:path=data.csv``. Vector values use ``~`` between
    coordinates and ``|`` between mixture components.
    """
    family, _, rest = text.partition(":")
    family = family.strip().lower()
    if family not in _ALIASES:
        raise PreconditionError(f"unknown family {family!r} in spec string")
    kv: dict[str, str] = {}
    if rest.strip():
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not _:
                raise PreconditionError(f"malformed spec item {item!r}")
            kv[key.strip()] = val.strip()
    fam = _ALIASES[family]
    try:
        if fam == GAUSSIAN:
            spec = gaussian(
                dim=int(kv.pop("d", 1)),
                scale=float(kv.pop("scale", 1.0)),
                mean=_parse_vector(kv.pop("mean", "0")),
            )
        elif fam == BERNOULLI:
            spec = bernoulli(float(kv.pop("p")))
        elif fam == STUDENT_T:
            spec = student_t(float(kv.pop("nu")), float(kv.pop("scale", 1.0)))
        elif fam == PARETO:
            spec = pareto(float(kv.pop("alpha")), float(kv.pop("scale", 1.0)))
        elif fam == UNIFORM_BALL:
            spec = uniform_ball(
                float(kv.pop("R")), int(kv.pop("d", 1)), _parse_vector(kv.pop("center", "0"))
            )
        elif fam == MIXTURE:
            weights = [float(t) for t in kv.pop("weights").split("|")]
            means = [_parse_vector(t) for t in kv.pop("means").split("|")]
            scales = [float(t) for t in kv.pop("scales").split("|")]
            spec = gaussian_mixture(weights, means, scales)
        else:
            spec = load_empirical_csv(kv.pop("path"))
    except KeyError as exc:
        raise PreconditionError(f"spec string for {family!r} is missing key {exc}") from None
    if kv:
        raise PreconditionError(f"unknown keys {sorted(kv)} for family {family!r}")
    return spec


def _fmt(v) -> str:
    return repr(float(v))


def format_spec_string(spec: DistributionSpec) -> str:
    """Inverse of :func:`parse_spec_string` (empirical specs need a path)."""
    fam = spec.family
    if fam == GAUSSIAN:
        mean = "~".join(_fmt(v) for v in spec.params["mean"])
        return f"gaussian:d={spec.dim},scale={_fmt(spec.params['scale'])},mean={mean}"
    if fam == BERNOULLI:
        return f"bernoulli:p={_fmt(spec.params['p'])}"
    if fam == STUDENT_T:
        return f"student-t:nu={_fmt(spec.params['nu'])},scale={_fmt(spec.params['scale'])}"
    if fam == PARETO:
        return f"pareto:alpha={_fmt(spec.params['alpha'])},scale={_fmt(spec.params['scale'])}"
    if fam == UNIFORM_BALL:
        center = "~".join(_fmt(v) for v in spec.params["center"])
        return f"uniform-ball:R={_fmt(spec.params['diameter'])},d={spec.dim},center={center}"
    if fam == MIXTURE:
        weights = "|".join(_fmt(v) for v in spec.params["weights"])
        means = "|".join("~".join(_fmt(v) for v in row) for row in spec.params["means"])
        scales = "|".join(_fmt(v) for v in spec.params["scales"])
        return f"mixture:weights={weights},means={means},scales={scales}"
    if fam == EMPIRICAL:
        path = spec.params.get("path")
        if path:
            return f"empirical:path={path}"
        return "empirical:<in-memory>"
    raise PreconditionError(f"unknown family {fam!r}")
