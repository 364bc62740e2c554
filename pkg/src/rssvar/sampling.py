"""Sampling designs under the Dell-Clutter imperfect-ranking model.

Units are standard bivariate normal pairs ``(y_latent, x)`` with correlation
``rho``. The concomitant ``x`` is always what gets ranked; the target value
recorded for a measured unit is ``transform(y_latent)``.

Every :class:`Sample` stores its concomitant pool with the measured units'
``x`` values first (in unit order) followed by the unmeasured ones. Estimators
only ever sum over the pool, so the ordering is free, and fixing it makes the
CSV round trip bit-exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy import special


class DesignError(ValueError):
    """Invalid sampling design parameters."""


class Scheme(str, enum.Enum):
    RSS = "rss"
    JPS = "jps"
    DS = "ds"


class TargetTransform(str, enum.Enum):
    """Map from the latent normal ``Y`` to the target variable."""

    IDENTITY = "identity"
    NORMAL_CDF = "cdf"
    NEG_LOG_NORMAL_CDF = "neglogcdf"

    @property
    def increasing(self) -> bool:
        return self is not TargetTransform.NEG_LOG_NORMAL_CDF

    @property
    def label(self) -> str:
        return {
            TargetTransform.IDENTITY: "Y",
            TargetTransform.NORMAL_CDF: "Phi(Y)",
            TargetTransform.NEG_LOG_NORMAL_CDF: "-ln(Phi(Y))",
        }[self]


@dataclass(frozen=True)
class RankingModel:
    rho: float

    def __post_init__(self):
        if not np.isfinite(self.rho) or abs(self.rho) > 1:
            raise DesignError(f"rho must lie in [-1, 1], got {self.rho}")


class MeasuredUnit(NamedTuple):
    y: float
    x: float
    rank: int  # 0 means unranked (double sampling)


@dataclass(frozen=True, eq=False)
class Sample:
    """Measured units plus the concomitant pool used for ranking.

    ``design_size`` is the number of cycles ``n`` for RSS and DS, and the
    measured size ``N`` for JPS.
    """

    scheme: Scheme
    k: int
    design_size: int
    y: np.ndarray
    x: np.ndarray
    rank: np.ndarray
    pool: np.ndarray

    @property
    def N(self) -> int:
        return len(self.y)

    @property
    def units(self) -> list[MeasuredUnit]:
        return [MeasuredUnit(float(a), float(b), int(r)) for a, b, r in zip(self.y, self.x, self.rank)]

    @property
    def stratum_counts(self) -> np.ndarray:
        if self.scheme is Scheme.DS:
            return np.zeros(self.k, dtype=int)
        return np.bincount(self.rank, minlength=self.k + 1)[1:]

    def strata(self) -> dict[int, np.ndarray]:
        """Measured target values grouped by judgment rank ``1..k``."""
        if self.scheme is Scheme.DS:
            raise DesignError("double samples carry no judgment ranks")
        return {r: self.y[self.rank == r] for r in range(1, self.k + 1)}

    def __iter__(self) -> Iterator[MeasuredUnit]:
        return iter(self.units)


def apply_transform(t: TargetTransform, y_latent):
    t = TargetTransform(t)
    if t is TargetTransform.IDENTITY:
        return y_latent
    if t is TargetTransform.NORMAL_CDF:
        return special.ndtr(y_latent)
    # log_ndtr keeps precision in the upper tail where Phi(y) rounds to 1
    return -special.log_ndtr(y_latent)


def draw_bivariate(model: RankingModel, size, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` pairs; returns ``(y_latent, x)`` arrays of that shape."""
    y = rng.standard_normal(size)
    z = rng.standard_normal(size)
    x = model.rho * y + np.sqrt(1.0 - model.rho**2) * z
    return y, x


def draw_bivariate_pair(model: RankingModel, rng: np.random.Generator) -> tuple[float, float]:
    y, x = draw_bivariate(model, 1, rng)
    return float(y[0]), float(x[0])


def _check_design(name: str, value: int) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise DesignError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def draw_rss_sample(
    n: int,
    k: int,
    model: RankingModel,
    t: TargetTransform,
    rng: np.random.Generator,
) -> Sample:
    """Balanced ranked set sample with ``n`` cycles of set size ``k``.

    Units are ordered cycle by cycle, rank ``1..k`` within each cycle.
    """
    n = _check_design("n", n)
    k = _check_design("k", k)
    y_lat, x = draw_bivariate(model, (n, k, k), rng)  # cycle, set, unit within set
    # stable sort breaks floating-point ties by draw order
    order = np.argsort(x, axis=2, kind="stable")
    pick = order[:, np.arange(k), np.arange(k)]  # r-th smallest in the r-th set
    cyc = np.arange(n)[:, None]
    sets = np.arange(k)[None, :]
    y_meas = y_lat[cyc, sets, pick]
    x_meas = x[cyc, sets, pick]

    measured = np.zeros((n, k, k), dtype=bool)
    measured[cyc, sets, pick] = True
    pool = np.concatenate([x_meas.ravel(), x[~measured]])
    rank = np.tile(np.arange(1, k + 1), n)
    return Sample(
        Scheme.RSS, k, n,
        y=np.asarray(apply_transform(t, y_meas.ravel()), dtype=float),
        x=x_meas.ravel(),
        rank=rank,
        pool=pool,
    )


def draw_jps_sample(
    N: int,
    k: int,
    model: RankingModel,
    t: TargetTransform,
    rng: np.random.Generator,
) -> Sample:
    """Judgment post-stratified sample of ``N`` measured units.

    Each measured unit is ranked against ``k - 1`` fresh supplemental units;
    supplemental units are full bivariate draws with ``y`` discarded.
    """
    N = _check_design("N", N)
    k = _check_design("k", k)
    y_meas, x_meas = draw_bivariate(model, N, rng)
    _, x_supp = draw_bivariate(model, (N, k - 1), rng)
    # ties go to the measured unit (it was drawn first)
    rank = 1 + np.sum(x_supp < x_meas[:, None], axis=1)
    pool = np.concatenate([x_meas, x_supp.ravel()])
    return Sample(
        Scheme.JPS, k, N,
        y=np.asarray(apply_transform(t, y_meas), dtype=float),
        x=x_meas,
        rank=rank.astype(int),
        pool=pool,
    )


def draw_ds_sample(
    n: int,
    k: int,
    model: RankingModel,
    t: TargetTransform,
    rng: np.random.Generator,
) -> Sample:
    """Double sample matching an RSS design: ``N0 = n k^2`` concomitants, ``N = n k`` measured."""
    n = _check_design("n", n)
    k = _check_design("k", k)
    n0, n_meas = n * k * k, n * k
    y_lat, x = draw_bivariate(model, n0, rng)
    chosen = rng.choice(n0, size=n_meas, replace=False)
    rest = np.ones(n0, dtype=bool)
    rest[chosen] = False
    return Sample(
        Scheme.DS, k, n,
        y=np.asarray(apply_transform(t, y_lat[chosen]), dtype=float),
        x=x[chosen],
        rank=np.zeros(n_meas, dtype=int),
        pool=np.concatenate([x[chosen], x[rest]]),
    )


def draw_sample(
    scheme: Scheme | str,
    N: int,
    k: int,
    model: RankingModel,
    t: TargetTransform,
    rng: np.random.Generator,
) -> Sample:
    """Draw any scheme by total measured size ``N`` (``N % k == 0`` for RSS and DS)."""
    scheme = Scheme(scheme)
    N = _check_design("N", N)
    k = _check_design("k", k)
    if scheme is Scheme.JPS:
        return draw_jps_sample(N, k, model, t, rng)
    if N % k:
        raise DesignError(f"{scheme.name} needs N divisible by k, got N={N}, k={k}")
    draw = draw_rss_sample if scheme is Scheme.RSS else draw_ds_sample
    return draw(N // k, k, model, t, rng)
