"""Variance estimators for ranked set, judgment post-stratified and double samples.

``concomitant_variance`` is the kernel-regression estimator: it smooths ``y``
and ``y**2`` against the concomitant over the measured units, averages both
fits over the full concomitant pool, and returns second moment minus squared
first moment. The rest are the rank-based competitors it is compared with.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from rssvar.kernreg import (
    InsufficientDataError,
    RegressionData,
    bandwidth_grid,
    nw_estimate,
    select_bandwidths,
)
from rssvar.sampling import DesignError, Sample, Scheme


class EstimatorId(str, enum.Enum):
    RSS = "RSS"
    M = "M"
    JPS = "JPS"
    F = "F"
    N = "N"
    N_DS = "N_DS"


class UnsupportedProfileError(KeyError):
    """No Frey-Feeman weights are available for a stratum-size profile."""


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    estimator_id: EstimatorId
    bandwidths: Optional[tuple[float, float]] = None

    def __post_init__(self):
        value = float(self.value)
        if not np.isfinite(value):
            raise FloatingPointError(f"{self.estimator_id.value} estimate is not finite: {value}")
        object.__setattr__(self, "value", value)

    def __float__(self):
        return self.value


# rank -> measured values; ranks with no observations may map to empty arrays
StratifiedData = Mapping[int, Sequence[float]]

# (s_1 >= ... >= s_m) -> m x m array, only the upper triangle i <= j is read
WeightProvider = Callable[[tuple[int, ...]], np.ndarray]


def _nonempty_strata(data: StratifiedData) -> list[tuple[int, np.ndarray]]:
    strata = [(r, np.asarray(v, dtype=float)) for r, v in sorted(data.items())]
    strata = [(r, v) for r, v in strata if v.size]
    if not strata:
        raise InsufficientDataError("every stratum is empty")
    return strata


def var_rss_empirical(ys) -> VarianceEstimate:
    ys = np.asarray(ys, dtype=float)
    if ys.size < 2:
        raise InsufficientDataError("empirical variance needs N >= 2")
    return VarianceEstimate(float(np.var(ys, ddof=1)), EstimatorId.RSS)


def _sum_sq_dev(v: np.ndarray) -> float:
    return float(np.sum(np.square(v - v.mean()))) if v.size else 0.0


def _pair_sq_sum(v: np.ndarray) -> float:
    """Sum of (v_i - v_j)**2 over all ordered pairs."""
    return 2 * v.size * _sum_sq_dev(v)


def var_maceachern(sample: Union[Sample, StratifiedData], k: Optional[int] = None) -> VarianceEstimate:
    """MacEachern / Perron-Sinha estimator for a balanced ranked set sample.

    Accepts a :class:`Sample` drawn by RSS or a rank -> values mapping in which
    each of the ``k`` ranks holds the same number ``n >= 2`` of values.
    """
    if isinstance(sample, Sample):
        if sample.scheme is not Scheme.RSS:
            raise DesignError(f"MacEachern estimator needs an RSS sample, got {sample.scheme.name}")
        strata, k = sample.strata(), sample.k
    else:
        strata = sample
        k = k if k is not None else max(strata)
    groups = [np.asarray(strata.get(r, ()), dtype=float) for r in range(1, k + 1)]
    sizes = {g.size for g in groups}
    if len(sizes) != 1:
        raise DesignError(f"MacEachern estimator needs a balanced sample, got stratum sizes {sorted(g.size for g in groups)}")
    n = sizes.pop()
    if n < 2:
        raise InsufficientDataError("MacEachern estimator needs n >= 2 per rank")
    ss = sum(_sum_sq_dev(g) for g in groups)
    means = np.array([g.mean() for g in groups])
    # centered forms of the two double sums
    within = 2 * n * ss
    between = 2 * n * (k - 1) * ss + 2 * k * n * n * _sum_sq_dev(means)
    value = between / (2 * n * n * k * k) + within / (2 * n * (n - 1) * k * k)
    return VarianceEstimate(value, EstimatorId.M)


def var_jps_stratified(data: StratifiedData) -> VarianceEstimate:
    """Equal-weight stratified estimator over the nonempty post-strata."""
    strata = _nonempty_strata(data)
    # mean of squares minus squared mean, rearranged as within plus between
    within = np.mean([_sum_sq_dev(v) / v.size for _, v in strata])
    means = np.array([v.mean() for _, v in strata])
    between = _sum_sq_dev(means) / means.size
    return VarianceEstimate(float(within + between), EstimatorId.JPS)


def var_frey_feeman(data: StratifiedData, weights: WeightProvider) -> VarianceEstimate:
    """Frey-Feeman pairwise-difference estimator with externally supplied weights."""
    strata = _nonempty_strata(data)
    # stable sort keeps rank order among equal sizes
    ordered = [v for _, v in sorted(strata, key=lambda rv: -rv[1].size)]
    profile = tuple(v.size for v in ordered)
    w = np.asarray(weights(profile), dtype=float)
    m = len(ordered)
    if w.shape != (m, m):
        raise UnsupportedProfileError(f"weights for profile {profile} must be {m}x{m}, got {w.shape}")
    value = 0.0
    for i in range(m):
        value += w[i, i] * _pair_sq_sum(ordered[i]) / 2
        for j in range(i + 1, m):
            d = ordered[i][:, None] - ordered[j][None, :]
            value += w[i, j] * float(np.sum(d * d))
    return VarianceEstimate(value, EstimatorId.F)


def concomitant_variance(
    ys,
    xs,
    pool,
    h1: Optional[float] = None,
    h2: Optional[float] = None,
    estimator_id: EstimatorId = EstimatorId.N,
) -> VarianceEstimate:
    """Kernel-regression variance estimate from measured ``(ys, xs)`` and the concomitant pool.

    ``h1`` and ``h2`` override the CV-selected bandwidths of the first and
    second moment regressions. The result is not clamped at zero.
    """
    ys = np.asarray(ys, dtype=float)
    xs = np.asarray(xs, dtype=float)
    pool = np.asarray(pool, dtype=float)
    if ys.size < 2:
        raise InsufficientDataError("kernel variance estimator needs N >= 2")
    if pool.size == 0:
        raise InsufficientDataError("empty concomitant pool")
    responses = np.vstack([ys, ys * ys])
    if h1 is None or h2 is None:
        fits = select_bandwidths(xs, responses, bandwidth_grid(ys.size))
        h1 = fits[0].h if h1 is None else h1
        h2 = fits[1].h if h2 is None else h2
    m1 = nw_estimate(pool, RegressionData(xs, responses[0]), h1)
    m2 = nw_estimate(pool, RegressionData(xs, responses[1]), h2)
    value = float(np.mean(m2) - np.mean(m1) ** 2)
    return VarianceEstimate(value, estimator_id, (float(h1), float(h2)))


def var_concomitant(sample: Sample) -> VarianceEstimate:
    eid = EstimatorId.N_DS if sample.scheme is Scheme.DS else EstimatorId.N
    return concomitant_variance(sample.y, sample.x, sample.pool, estimator_id=eid)


# --- Frey-Feeman weight providers ---------------------------------------------


class TableWeights:
    """Weights looked up by exact size profile, e.g. parsed from a weights file."""

    def __init__(self, table: Mapping[tuple[int, ...], np.ndarray]):
        self.table = {tuple(p): np.asarray(w, dtype=float) for p, w in table.items()}

    def __call__(self, profile: tuple[int, ...]) -> np.ndarray:
        try:
            return self.table[tuple(profile)]
        except KeyError:
            raise UnsupportedProfileError(f"no weights for stratum-size profile {profile}") from None

    def __len__(self):
        return len(self.table)


def constant_weights(w: float) -> WeightProvider:
    """Stub provider: every coefficient equals ``w``. For structural tests only."""
    return lambda profile: np.full((len(profile), len(profile)), float(w))


def pooled_weights(profile: tuple[int, ...]) -> np.ndarray:
    """Stub provider ``w_ij = 1 / (N (N - 1))``, which reduces the estimator to the sample variance."""
    n = sum(profile)
    return np.full((len(profile), len(profile)), 1.0 / (n * (n - 1)))


def upper_triangle(profile: Sequence[int], flat: Sequence[float]) -> np.ndarray:
    """Unpack ``w_11 w_12 ... w_1m w_22 ... w_mm`` into a symmetric matrix."""
    m = len(profile)
    flat = np.asarray(flat, dtype=float)
    if flat.size != m * (m + 1) // 2:
        raise ValueError(f"profile {tuple(profile)} needs {m * (m + 1) // 2} weights, got {flat.size}")
    w = np.zeros((m, m))
    w[np.triu_indices(m)] = flat
    return w + np.triu(w, 1).T
