"""Deviation experiment harness.

Measures, over adversarially chosen candidate center sets, how far the
empirical quantization error of a seeded sample strays from the expected
error, sweeps the sample size, and fits the convergence exponent of the
normalized deviation. Also reproduces the three impossibility arguments
(absolute-error scaling, unrestricted-solution divergence, and the
Bernoulli all-ones event) as numeric reports.

Per cell ``(m, replicate)`` the candidate families are:

* ``iid_p``          -- center sets drawn i.i.d. from P, independent of the sample
* ``kmpp``           -- k-means++ seedings of the sample
* ``lloyd``          -- Lloyd's converged centers on the sample
* ``perturb_small``  -- Gaussian perturbations of the Lloyd solution, scale 0.1 sigma
* ``perturb_large``  -- same at scale sigma
* ``emp_mean``       -- the sample mean (k = 1 only)
* ``pop_mean``       -- k copies of the population mean (expected error exactly
  sigma^2, so the restricted statistic below is never over an empty set)

Two statistics are recorded per cell: ``delta_abs``, the largest absolute
deviation |phi - E| over candidates whose expected error is at most sigma^2
(mirroring the restricted supremum a comparison at unit variance uses), and
``delta_norm``, the largest deviation normalized by (sigma^2 + E)/2 over all
candidates, which is scale-free. Candidate streams are keyed by
(master_seed, m, replicate, family, index), so candidate sets are nested in
``candidates_per_cell`` and results are independent of thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from ._rng import (
    CANDIDATE_IID,
    CANDIDATE_KMPP,
    CANDIDATE_LLOYD,
    CANDIDATE_PERTURB,
    CELL,
    REFERENCE,
    SAMPLE,
    check_seed,
    derive_seed,
    generator_for,
)
from .errors import InvariantViolationError, PreconditionError
from . import distributions as dist
from .distributions import DistributionSpec, MomentProfile, format_spec_string
from .quantization import CenterSet, empirical_error, expected_error, kmeans_pp, lloyd

PERTURB_RADII = (0.1, 1.0)  # in units of sigma
_MAX_CELL_RETRIES = 3

CSV_HEADER = "m,replicate,delta_abs,delta_norm,argmax_kind,seed"


@dataclass(frozen=True)
class ExperimentConfig:
    """One deviation experiment: distribution, solution size, and sweep grid."""

    spec: DistributionSpec
    k: int
    m_grid: tuple[int, ...]
    replicates: int
    candidates_per_cell: int = 8
    master_seed: int = 0
    restrict_to_unit: bool = True
    reference_size: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if len(self.m_grid) == 0:
            raise PreconditionError("m_grid must be nonempty")
        if any(b <= a for a, b in zip(self.m_grid, self.m_grid[1:])):
            raise PreconditionError("m_grid must be strictly increasing")
        if self.m_grid[0] < 1 or self.m_grid[-1] >= 2**32:
            raise PreconditionError("sample sizes must lie in [1, 2^32)")
        if self.replicates < 1:
            raise PreconditionError("replicates must be >= 1")
        if self.candidates_per_cell < 1:
            raise PreconditionError("candidates_per_cell must be >= 1")
        if self.k < 1:
            raise PreconditionError("k must be >= 1")
        check_seed(self.master_seed)

    def resolved_reference_size(self) -> int:
        if self.reference_size is not None:
            return int(self.reference_size)
        return max(1_000_000, 100 * self.m_grid[-1])

    def echo(self, threads: int = 1) -> dict:
        """Full resolved configuration for output headers (round-trippable)."""
        return {
            "dist": format_spec_string(self.spec),
            "k": self.k,
            "m_grid": list(self.m_grid),
            "replicates": self.replicates,
            "candidates_per_cell": self.candidates_per_cell,
            "master_seed": self.master_seed,
            "restrict_to_unit": self.restrict_to_unit,
            "reference_size": self.resolved_reference_size(),
            "threads": threads,
        }


@dataclass(frozen=True)
class DeviationRecord:
    """Deviation statistics of one experiment cell."""

    m: int
    replicate: int
    delta_abs: float
    delta_norm: float
    argmax_kind: str
    seed: int
    argmax_index: int = -1

    def __post_init__(self):
        for name in ("delta_abs", "delta_norm"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvariantViolationError(f"{name} must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class RateFit:
    """OLS fit of ln(deviation) against ln(m): slope is the decay exponent."""

    slope: float
    intercept: float
    stderr_slope: float
    r2: float


@dataclass(frozen=True)
class SweepResult:
    records: list
    fit: Optional[RateFit]
    replicate_fits: list
    per_m_mean_delta_norm: dict
    oracle_kind: str
    oracle_noise: float


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def population_profile(spec: DistributionSpec) -> MomentProfile:
    """Moment profile of the data-generating distribution.

    Parametric families use closed forms; the empirical family's population
    IS the loaded sample, so its moments are computed from it exactly.
    """
    if spec.family != dist.EMPIRICAL:
        return dist.analytic_profile(spec)
    if spec.data is None:
        raise PreconditionError("no sample loaded")
    mu = spec.data.mean(axis=0)
    d2 = np.sum((spec.data - mu) ** 2, axis=1)
    sigma2 = float(np.mean(d2))
    if sigma2 <= 0:
        raise PreconditionError("degenerate: zero variance")
    m4 = float(np.mean(d2**2)) / sigma2**2
    return MomentProfile(mu=mu, sigma2=sigma2, m4hat=m4)


def _analytic_supported(spec: DistributionSpec, k: int) -> bool:
    if k == 1 or spec.family in (dist.BERNOULLI, dist.EMPIRICAL):
        return True
    return spec.dim == 1 and spec.family in (
        dist.GAUSSIAN,
        dist.UNIFORM_BALL,
        dist.PARETO,
        dist.STUDENT_T,
        dist.MIXTURE,
    )


def make_oracle(cfg: ExperimentConfig):
    """Expected-error oracle for the sweep.

    Returns ``(oracle_fn, kind, noise)``. Analytic oracles are exact
    (noise 0). When no closed form exists a held-out reference sample is
    drawn once with a stream disjoint from every cell, and ``noise`` is the
    standard error of the reference mean at a probe solution.
    """
    spec = cfg.spec
    if _analytic_supported(spec, cfg.k):
        return (lambda C: expected_error(spec, C, mode="analytic")), "analytic", 0.0
    n_ref = cfg.resolved_reference_size()
    ref = dist.sample(spec, n_ref, derive_seed(cfg.master_seed, REFERENCE))
    probe = dist.sample(spec, cfg.k, derive_seed(cfg.master_seed, REFERENCE, 1))
    from .quantization import dist2 as _d2

    probe_d2 = _d2(ref, probe)
    noise = float(np.std(probe_d2) / math.sqrt(n_ref))
    return (lambda C: expected_error(ref, C, mode="reference")), "reference", noise


# ---------------------------------------------------------------------------
# Candidates and per-cell statistics
# ---------------------------------------------------------------------------

def _build_candidates(
    spec: DistributionSpec,
    profile: MomentProfile,
    X: np.ndarray,
    k: int,
    cell_seed: int,
    n_per_family: int,
) -> list[tuple[str, np.ndarray]]:
    cands: list[tuple[str, np.ndarray]] = []
    for i in range(n_per_family):
        cands.append(("iid_p", dist.sample(spec, k, derive_seed(cell_seed, CANDIDATE_IID, i))))
    for i in range(n_per_family):
        g = generator_for(cell_seed, CANDIDATE_KMPP, i)
        cands.append(("kmpp", kmeans_pp(X, k, g)))
    lloyd_centers = lloyd(X, k, derive_seed(cell_seed, CANDIDATE_LLOYD)).centers
    cands.append(("lloyd", lloyd_centers))
    sigma = math.sqrt(profile.sigma2)
    for r_idx, radius in enumerate(PERTURB_RADII):
        kind = "perturb_small" if radius < 1 else "perturb_large"
        for i in range(n_per_family):
            g = generator_for(cell_seed, CANDIDATE_PERTURB, r_idx, i)
            noise = radius * sigma * g.standard_normal(lloyd_centers.shape)
            cands.append((kind, lloyd_centers + noise))
    if k == 1:
        cands.append(("emp_mean", X.mean(axis=0)[None, :]))
    cands.append(("pop_mean", np.repeat(profile.mu[None, :], k, axis=0)))
    return cands


@dataclass(frozen=True)
class CellDetails:
    """Per-candidate audit data for one cell."""

    X: np.ndarray
    kinds: list
    candidates: list
    phi: np.ndarray
    expected: np.ndarray
    sigma2: float
    oracle_tol: float


def _stats_from_values(
    phi: np.ndarray,
    expected: np.ndarray,
    sigma2: float,
    restrict: bool,
    oracle_tol: float,
):
    deltas = np.abs(phi - expected)
    norms = deltas / (0.5 * sigma2 + 0.5 * expected)
    argmax_index = int(np.argmax(norms))
    if restrict:
        mask = expected <= sigma2 * (1.0 + oracle_tol)
    else:
        mask = np.ones_like(deltas, dtype=bool)
    delta_abs = float(np.max(deltas[mask])) if mask.any() else 0.0
    return delta_abs, float(norms[argmax_index]), argmax_index


def measure_cell(
    cfg: ExperimentConfig,
    m: int,
    replicate: int,
    oracle=None,
    with_details: bool = False,
):
    """Run one experiment cell: draw the sample, score all candidates.

    A degenerate draw (zero sample variance) is retried with a derived seed
    at most three times. Returns a DeviationRecord, or
    ``(record, CellDetails)`` when ``with_details`` is set.
    """
    if oracle is None:
        oracle_fn, _, noise = make_oracle(cfg)
    else:
        oracle_fn, _, noise = oracle
    profile = population_profile(cfg.spec)
    sigma2 = profile.sigma2
    oracle_tol = 0.0 if noise == 0.0 else 3.0 * noise / sigma2

    last_err = None
    for retry in range(_MAX_CELL_RETRIES + 1):
        cell_seed = derive_seed(cfg.master_seed, CELL, m, replicate, retry)
        X = dist.sample(cfg.spec, m, derive_seed(cell_seed, SAMPLE))
        spread = float(np.sum((X - X.mean(axis=0)) ** 2))
        if spread <= 0.0:
            last_err = f"degenerate sample at m={m}, replicate={replicate}, retry={retry}"
            continue
        cands = _build_candidates(
            cfg.spec, profile, X, cfg.k, cell_seed, cfg.candidates_per_cell
        )
        phi = np.array([empirical_error(X, C) for _, C in cands])
        expected = np.array([oracle_fn(C) for _, C in cands])
        delta_abs, delta_norm, argmax_index = _stats_from_values(
            phi, expected, sigma2, cfg.restrict_to_unit, oracle_tol
        )
        record = DeviationRecord(
            m=m,
            replicate=replicate,
            delta_abs=delta_abs,
            delta_norm=delta_norm,
            argmax_kind=cands[argmax_index][0],
            seed=cell_seed,
            argmax_index=argmax_index,
        )
        if not with_details:
            return record
        details = CellDetails(
            X=X,
            kinds=[kind for kind, _ in cands],
            candidates=[C for _, C in cands],
            phi=phi,
            expected=expected,
            sigma2=sigma2,
            oracle_tol=oracle_tol,
        )
        return record, details
    raise PreconditionError(f"cell could not be drawn without degeneracy: {last_err}")


# ---------------------------------------------------------------------------
# Sweeps and rate fitting
# ---------------------------------------------------------------------------

def fit_rate(ms: Sequence[float], values: Sequence[float]) -> RateFit:
    """OLS of ln(values) on ln(ms); needs >= 4 grid points, positive values."""
    ms = np.asarray(ms, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ms) < 4:
        raise PreconditionError("rate fit requires at least 4 grid points")
    if np.any(values <= 0):
        raise PreconditionError("rate fit requires positive deviation values")
    res = linregress(np.log(ms), np.log(values))
    return RateFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        stderr_slope=float(res.stderr),
        r2=float(res.rvalue) ** 2,
    )


def run_cells(cfg: ExperimentConfig, threads: int = 1) -> tuple[list, str, float]:
    """Execute all (m, replicate) cells; output order is fixed by the grid.

    Cells are pure functions of (config, m, replicate), so the result is
    byte-identical for any ``threads`` value.
    """
    oracle = make_oracle(cfg)
    keys = [(m, r) for m in cfg.m_grid for r in range(cfg.replicates)]
    if threads <= 1:
        records = [measure_cell(cfg, m, r, oracle=oracle) for m, r in keys]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {key: pool.submit(measure_cell, cfg, *key, oracle=oracle) for key in keys}
            records = [futures[key].result() for key in keys]
    return records, oracle[1], oracle[2]


def rate_sweep(cfg: ExperimentConfig, threads: int = 1, fit: bool = True) -> SweepResult:
    """Run the full sweep and fit ln(mean delta_norm) against ln(m).

    Replicates are averaged before the log (reducing the skew of the max
    statistic); per-replicate fits are also returned for auditing.
    """
    if fit and len(cfg.m_grid) < 4:
        raise PreconditionError("rate fitting needs |m_grid| >= 4")
    records, oracle_kind, oracle_noise = run_cells(cfg, threads=threads)
    by_m: dict[int, list] = {m: [] for m in cfg.m_grid}
    for rec in records:
        by_m[rec.m].append(rec.delta_norm)
    per_m_mean = {m: float(np.mean(vals)) for m, vals in by_m.items()}
    main_fit = None
    replicate_fits: list[RateFit] = []
    if fit:
        main_fit = fit_rate(list(per_m_mean), list(per_m_mean.values()))
        for r in range(cfg.replicates):
            series = [rec.delta_norm for rec in records if rec.replicate == r]
            replicate_fits.append(fit_rate(list(cfg.m_grid), series))
    return SweepResult(
        records=records,
        fit=main_fit,
        replicate_fits=replicate_fits,
        per_m_mean_delta_norm=per_m_mean,
        oracle_kind=oracle_kind,
        oracle_noise=oracle_noise,
    )


# ---------------------------------------------------------------------------
# Scale invariance
# ---------------------------------------------------------------------------

def _scaled_stats(details: CellDetails, lam: float, restrict: bool):
    X = lam * details.X
    phi = np.array([empirical_error(X, lam * C) for C in details.candidates])
    expected = lam * lam * details.expected
    sigma2 = lam * lam * details.sigma2
    return _stats_from_values(phi, expected, sigma2, restrict, details.oracle_tol)


def joint_scale_check(cfg: ExperimentConfig, m: int, replicate: int, lam: float) -> dict:
    """Re-evaluate one cell with sample, candidates, and oracle jointly scaled.

    The normalized statistic is a ratio of lambda^2-scaled quantities, so it
    must be unchanged (up to float rounding) and the argmax candidate index
    must match exactly; the restricted absolute statistic scales by lambda^2.
    """
    record, details = measure_cell(cfg, m, replicate, with_details=True)
    s_abs, s_norm, s_idx = _scaled_stats(details, lam, cfg.restrict_to_unit)
    denom = max(abs(record.delta_norm), 1e-300)
    return {
        "lambda": lam,
        "base_delta_abs": record.delta_abs,
        "base_delta_norm": record.delta_norm,
        "base_argmax_index": record.argmax_index,
        "scaled_delta_abs": s_abs,
        "scaled_delta_norm": s_norm,
        "scaled_argmax_index": s_idx,
        "delta_norm_rel_diff": abs(s_norm - record.delta_norm) / denom,
        "argmax_index_equal": s_idx == record.argmax_index,
        "delta_abs_ratio": s_abs / record.delta_abs if record.delta_abs > 0 else math.nan,
    }


# ---------------------------------------------------------------------------
# Impossibility reproductions
# ---------------------------------------------------------------------------

def counterexample_scaling(lam: float, cfg: ExperimentConfig, epsilon: float = 0.1) -> dict:
    """Absolute-error guarantees break under scaling: deviation grows as lambda^2.

    Measures the restricted absolute deviation on a base cell and on the
    jointly lambda-scaled version; their ratio is lambda^2 (to rounding), so
    once lambda exceeds 1/sqrt(a * epsilon) -- with a the base deviation --
    the scaled deviation exceeds any fixed absolute tolerance epsilon.
    """
    if lam <= 0:
        raise PreconditionError("lam must be positive")
    record, details = measure_cell(cfg, cfg.m_grid[0], 0, with_details=True)
    if record.delta_abs <= 0:
        raise PreconditionError("base cell has zero restricted deviation; enlarge candidates")
    s_abs, _, _ = _scaled_stats(details, lam, cfg.restrict_to_unit)
    ratio = s_abs / record.delta_abs
    a = record.delta_abs
    lam_threshold = 1.0 / math.sqrt(a * epsilon)
    return {
        "lambda": lam,
        "m": cfg.m_grid[0],
        "delta_abs_base": a,
        "delta_abs_scaled": s_abs,
        "ratio": ratio,
        "expected_ratio": lam * lam,
        "ratio_rel_error": abs(ratio - lam * lam) / (lam * lam),
        "epsilon": epsilon,
        "lambda_threshold": lam_threshold,
        "exceeds_epsilon": s_abs > epsilon,
        "threshold_applies": lam > lam_threshold,
    }


def counterexample_divergence(X, q_grid: Sequence[float], sigma2: float) -> dict:
    """Unrestricted solutions diverge: deviation at center q grows like 2|mean| q.

    For a one-dimensional sample from a zero-mean distribution with known
    variance, the deviation |phi({q}) - (sigma^2 + q^2)| equals
    |phi({mu_hat}) - sigma^2 + mu_hat^2 - 2 q mu_hat| identically, which is
    unbounded in q whenever the sample mean mu_hat is nonzero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != 1:
        raise PreconditionError("divergence counterexample is one-dimensional")
    if sigma2 <= 0:
        raise PreconditionError("sigma2 must be positive")
    mu_hat = float(X.mean())
    phi_mu = empirical_error(X, np.array([[mu_hat]]))
    if mu_hat == 0.0:
        return {
            "degenerate": True,
            "message": "degenerate: divergence slope zero (sample mean is exactly 0)",
            "mu_hat": 0.0,
            "slope_theoretical": 0.0,
        }
    qs = np.asarray(sorted(q_grid), dtype=float)
    direct = np.array(
        [abs(empirical_error(X, np.array([[q]])) - (sigma2 + q * q)) for q in qs]
    )
    identity = np.abs(phi_mu - sigma2 + mu_hat**2 - 2.0 * qs * mu_hat)
    rel_err = np.abs(direct - identity) / np.maximum(np.abs(direct), 1e-300)
    slope_measured = abs(direct[-1] - direct[-2]) / (qs[-1] - qs[-2])
    return {
        "degenerate": False,
        "mu_hat": mu_hat,
        "phi_at_mu_hat": phi_mu,
        "q_grid": qs.tolist(),
        "deviation_direct": direct.tolist(),
        "deviation_identity": identity.tolist(),
        "identity_max_rel_error": float(np.max(rel_err)),
        "slope_measured": float(slope_measured),
        "slope_theoretical": 2.0 * abs(mu_hat),
        "diverges": True,
    }


def counterexample_bernoulli(m: int, delta: float) -> dict:
    """No distribution-free guarantee: the all-ones Bernoulli event defeats any (m, eps, delta).

    With p = (delta^(1/m) + 1)/2 the all-ones sample has probability
    p^m >= delta, yet on it the empirical error at the center 1 is zero
    while the expected error is 1 - p > 0, forcing the relative guarantee's
    tolerance above 1.
    """
    if m < 1:
        raise PreconditionError("m must be >= 1")
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie strictly in (0,1)")
    p_floor = delta ** (1.0 / m)
    p = 0.5 * (p_floor + 1.0)
    all_ones_prob = p**m
    ones = np.ones((m, 1))
    phi = empirical_error(ones, np.array([[1.0]]))
    expected_at_one = 1.0 - p
    sigma2 = p * (1.0 - p)
    return {
        "m": m,
        "delta": delta,
        "p_lower_bound": p_floor,
        "p": p,
        "all_ones_prob": all_ones_prob,
        "prob_geq_delta": all_ones_prob >= delta,
        "phi_all_ones_at_center_one": phi,
        "expected_error_at_center_one": expected_at_one,
        "sigma2": sigma2,
        "sigma2_leq_expected": sigma2 <= expected_at_one,
        "implied_epsilon_lower_bound": 1.0,
        "guarantee_fails": phi == 0.0 and expected_at_one > 0.0,
    }


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def records_to_csv(records: Sequence[DeviationRecord]) -> str:
    """Fixed-schema CSV body; float fields use shortest round-trip repr."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.m},{r.replicate},{r.delta_abs!r},{r.delta_norm!r},{r.argmax_kind},{r.seed}"
        )
    return "\n".join(lines) + "\n"


def sweep_summary(cfg: ExperimentConfig, result: SweepResult, threads: int = 1) -> dict:
    """JSON-ready sweep summary: config echo, fits, per-m means, oracle noise."""
    fit_dict = None
    if result.fit is not None:
        fit_dict = {
            "slope": result.fit.slope,
            "intercept": result.fit.intercept,
            "stderr_slope": result.fit.stderr_slope,
            "r2": result.fit.r2,
        }
    return {
        "config": cfg.echo(threads=threads),
        "fit": fit_dict,
        "replicate_fits": [
            {"slope": f.slope, "intercept": f.intercept, "stderr_slope": f.stderr_slope, "r2": f.r2}
            for f in result.replicate_fits
        ],
        "per_m_mean_delta_norm": {str(m): v for m, v in result.per_m_mean_delta_norm.items()},
        "oracle": {"kind": result.oracle_kind, "noise": result.oracle_noise},
    }
