"""Nadaraya-Watson regression with a Gaussian kernel and grid-searched CV bandwidth.

Leave-one-out CV uses the hat-matrix identity

    CV(h) = mean(((y_i - m(x_i, h)) / (1 - H_ii)) ** 2),    H_ii = k(0) / sum_j k((x_i - x_j) / h)

Both ``y_i - m(x_i, h)`` and ``1 - H_ii`` are formed from off-diagonal kernel
sums rather than by subtraction, so the shortcut stays accurate when a point
is nearly isolated (``H_ii`` close to 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)
GRID_STEP = 0.01
HAT_GUARD = 1e-12
# scores this close to the minimum count as tied; the shortcut is accurate far below this
TIE_RTOL = 1e-10


class InsufficientDataError(ValueError):
    pass


class BandwidthSelectionError(ArithmeticError):
    pass


def gaussian_kernel(u):
    """Standard normal density."""
    return np.exp(-0.5 * np.square(u)) / SQRT_2PI


@dataclass(frozen=True)
class RegressionData:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).ravel()
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.shape != ys.shape or xs.size == 0:
            raise InsufficientDataError(
                f"xs and ys must be nonempty and of equal length, got {xs.size} and {ys.size}"
            )
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("regression data must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self):
        return self.xs.size


@dataclass(frozen=True)
class BandwidthGrid:
    lo: float
    hi: float
    step: float = GRID_STEP
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.lo > 0 and self.hi >= self.lo and self.step > 0):
            raise ValueError(f"bad grid lo={self.lo}, hi={self.hi}, step={self.step}")
        # 1e-9 absorbs rounding in (hi - lo) / step; hi itself is not forced in
        m = math.floor((self.hi - self.lo) / self.step + 1e-9)
        object.__setattr__(self, "values", self.lo + self.step * np.arange(m + 1))

    def __len__(self):
        return self.values.size


def bandwidth_grid(N: int) -> BandwidthGrid:
    """Search grid ``[N^(-1/4) / 3, 3 N^(-1/4)]`` in steps of 0.01."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    base = N ** -0.25
    return BandwidthGrid(base / 3.0, 3.0 * base)


@dataclass(frozen=True)
class RegressionFit:
    data: RegressionData
    h: float
    cv: float

    def predict(self, x):
        return nw_estimate(x, self.data, self.h)


def nw_estimate(x, data: RegressionData, h: float):
    """Kernel-weighted average of ``data.ys`` at ``x`` (scalar or array).

    Where every weight underflows to zero the nearest design point's response
    is returned instead.
    """
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    xq = np.asarray(x, dtype=float)
    diff = (xq.reshape(-1, 1) - data.xs[None, :]) / h
    w = gaussian_kernel(diff)
    den = w.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (w @ data.ys) / den
    dead = den == 0
    if np.any(dead):
        nearest = np.argmin(np.abs(diff[dead]), axis=1)
        out[dead] = data.ys[nearest]
    return out.reshape(xq.shape) if xq.ndim else float(out[0])


def _offdiag_weights(xs: np.ndarray, hs: np.ndarray) -> np.ndarray:
    """Kernel weights between distinct design points, shape ``(len(hs), N, N)``.

    Scaled so the diagonal weight would be 1 (the ``1/sqrt(2 pi)`` cancels in
    every ratio); the diagonal itself is left at 0. Only the upper triangle
    is exponentiated.
    """
    n = xs.size
    iu, ju = np.triu_indices(n, 1)
    d2 = np.square(xs[iu] - xs[ju])
    v = np.exp(d2[None, :] * (-0.5 / np.square(hs))[:, None])
    w = np.zeros((hs.size, n, n))
    w[:, iu, ju] = v
    w[:, ju, iu] = v
    return w


def hat_diag(data: RegressionData, h: float) -> np.ndarray:
    """Diagonal of the Nadaraya-Watson smoother matrix at the design points."""
    if len(data) < 2:
        raise InsufficientDataError("leave-one-out needs at least 2 points")
    w = _offdiag_weights(data.xs, np.array([float(h)]))[0]
    return 1.0 / (1.0 + w.sum(axis=1))


def cv_scores(xs, responses, hs) -> np.ndarray:
    """Shortcut CV scores for several responses over several bandwidths at once.

    ``responses`` has shape ``(R, N)`` (or ``(N,)``); the result has shape
    ``(R, len(hs))`` with ``inf`` wherever some ``1 - H_ii`` falls below the guard.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.atleast_2d(np.asarray(responses, dtype=float))
    hs = np.atleast_1d(np.asarray(hs, dtype=float))
    if xs.size < 2:
        raise InsufficientDataError("leave-one-out needs at least 2 points")
    w = _offdiag_weights(xs, hs)
    off = w.sum(axis=2)                        # (G, N)
    total = off + 1.0                          # unnormalized diagonal weight is 1
    # residual numerator sum_{j != i} w_ij (y_i - y_j)
    dy = ys[:, :, None] - ys[:, None, :]      # (R, N, N); exact zeros for constant ys
    # batched over i: (N, G, N) @ (N, N, R) -> (N, G, R)
    num = np.matmul(w.transpose(1, 0, 2), dy.transpose(1, 2, 0)).transpose(2, 1, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        one_minus_h = off / total
        resid = num / total[None]
        scaled = resid / one_minus_h[None]
    score = np.mean(np.square(scaled), axis=2)
    bad = np.any(one_minus_h < HAT_GUARD, axis=1)
    score[:, bad] = np.inf
    return score


def cv_score(data: RegressionData, h: float) -> float:
    return float(cv_scores(data.xs, data.ys, [h])[0, 0])


def loo_cv_score(data: RegressionData, h: float) -> float:
    """Leave-one-out CV by explicit refitting; the slow route kept for cross-checks."""
    n = len(data)
    if n < 2:
        raise InsufficientDataError("leave-one-out needs at least 2 points")
    keep = ~np.eye(n, dtype=bool)
    errs = [
        data.ys[i] - nw_estimate(data.xs[i], RegressionData(data.xs[keep[i]], data.ys[keep[i]]), h)
        for i in range(n)
    ]
    return float(np.mean(np.square(errs)))


def _argmin_first(scores: np.ndarray, grid: np.ndarray) -> tuple[float, float]:
    if not np.any(np.isfinite(scores)):
        raise BandwidthSelectionError("every grid bandwidth is degenerate for this data")
    best = np.min(scores)
    # a flat CV curve (two points, nearest-neighbour regime) differs only by rounding
    i = int(np.argmax(scores <= best + TIE_RTOL * abs(best)))
    return float(grid[i]), float(scores[i])


def select_bandwidths(xs, responses, grid: BandwidthGrid) -> list[RegressionFit]:
    """Independently CV-select a bandwidth for each response row, sharing the kernel matrix."""
    ys = np.atleast_2d(np.asarray(responses, dtype=float))
    scores = cv_scores(xs, ys, grid.values)
    fits = []
    for row, sc in zip(ys, scores):
        h, cv = _argmin_first(sc, grid.values)
        fits.append(RegressionFit(RegressionData(xs, row), h, cv))
    return fits


def select_bandwidth(data: RegressionData, grid: BandwidthGrid) -> RegressionFit:
    return select_bandwidths(data.xs, data.ys, grid)[0]
