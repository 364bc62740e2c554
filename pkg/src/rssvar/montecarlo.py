"""Monte Carlo relative-efficiency study.

Each replication gets its own random stream derived from
``(base_seed, scenario_id, rep_index)``, so a scenario's result does not depend
on how replications are split across worker processes. Per-replication
estimates are stored in replication order and reduced once at the end.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from rssvar.estimators import (
    EstimatorId,
    WeightProvider,
    var_concomitant,
    var_frey_feeman,
    var_jps_stratified,
    var_maceachern,
    var_rss_empirical,
)
from rssvar.sampling import (
    DesignError,
    RankingModel,
    Scheme,
    TargetTransform,
    draw_ds_sample,
    draw_jps_sample,
    draw_rss_sample,
)

log = logging.getLogger(__name__)

DEFAULT_SEED = 20140527
DEFAULT_REPS = 10_000


class DegenerateEstimatorError(ArithmeticError):
    pass


class ScenarioError(RuntimeError):
    """An estimator failed inside a replication; the scenario is abandoned."""


def true_variance(t: TargetTransform) -> float:
    t = TargetTransform(t)
    # N(0, 1), Uniform(0, 1) and Exponential(1)
    return 1.0 / 12.0 if t is TargetTransform.NORMAL_CDF else 1.0


def relative_efficiency(mse_ref: float, mse_est: float) -> float:
    if mse_est <= 0:
        raise DegenerateEstimatorError(f"estimator MSE is {mse_est}; relative efficiency undefined")
    return mse_ref / mse_est


def mse(estimates, truth: float) -> float:
    return float(np.mean(np.square(np.asarray(estimates, dtype=float) - truth)))


def reference_estimator(scheme: Scheme) -> EstimatorId:
    return EstimatorId.JPS if Scheme(scheme) is Scheme.JPS else EstimatorId.RSS


def default_estimators(scheme: Scheme, with_frey: bool = False) -> tuple[EstimatorId, ...]:
    scheme = Scheme(scheme)
    if scheme is Scheme.RSS:
        return (EstimatorId.RSS, EstimatorId.M, EstimatorId.N, EstimatorId.N_DS)
    if scheme is Scheme.JPS:
        base = (EstimatorId.JPS, EstimatorId.N)
        return base + (EstimatorId.F,) if with_frey else base
    return (EstimatorId.RSS, EstimatorId.N_DS)


@dataclass(frozen=True)
class Scenario:
    scheme: Scheme
    N: int
    k: int
    rho: float
    transform: TargetTransform
    reps: int = DEFAULT_REPS
    base_seed: int = DEFAULT_SEED
    estimators: Optional[tuple[EstimatorId, ...]] = None
    weights: Optional[WeightProvider] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "transform", TargetTransform(self.transform))
        RankingModel(self.rho)
        if self.reps < 1:
            raise DesignError(f"reps must be >= 1, got {self.reps}")
        if self.N < 1 or self.k < 1:
            raise DesignError(f"N and k must be positive, got N={self.N}, k={self.k}")
        if self.scheme is not Scheme.JPS and self.N % self.k:
            raise DesignError(f"{self.scheme.name} needs N divisible by k, got N={self.N}, k={self.k}")
        ests = self.estimators
        if ests is None:
            ests = default_estimators(self.scheme, self.weights is not None)
        ests = tuple(EstimatorId(e) for e in ests)
        ref = reference_estimator(self.scheme)
        if ref not in ests:
            ests = (ref,) + ests
        if EstimatorId.F in ests and self.weights is None:
            raise DesignError("the Frey-Feeman estimator needs a weights provider")
        allowed = set(default_estimators(self.scheme, with_frey=True))
        if not set(ests) <= allowed:
            raise DesignError(f"estimators {sorted(set(ests) - allowed)} do not apply to {self.scheme.name}")
        object.__setattr__(self, "estimators", ests)

    @property
    def scenario_id(self) -> int:
        """Stable 64-bit id of the design; excludes reps so prefixes of longer runs agree."""
        key = f"{self.scheme.value}|{self.N}|{self.k}|{float(self.rho)!r}|{self.transform.value}"
        return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    estimates: dict[EstimatorId, np.ndarray] = field(repr=False)
    mse: dict[EstimatorId, float]
    re: dict[EstimatorId, float]
    true_variance: float
    reps_used: int


def replication_seed(base_seed: int, scenario_id: int, rep_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed), int(scenario_id), int(rep_index)])


def replication_rng(s: Scenario, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(replication_seed(s.base_seed, s.scenario_id, rep_index))


def replicate(s: Scenario, rep_index: int) -> np.ndarray:
    """Estimates of one replication, in ``s.estimators`` order."""
    rng = replication_rng(s, rep_index)
    model = RankingModel(s.rho)
    wanted = s.estimators
    out = {}
    if s.scheme is Scheme.JPS:
        sample = draw_jps_sample(s.N, s.k, model, s.transform, rng)
        strata = sample.strata()
        out[EstimatorId.JPS] = var_jps_stratified(strata).value
        if EstimatorId.N in wanted:
            out[EstimatorId.N] = var_concomitant(sample).value
        if EstimatorId.F in wanted:
            out[EstimatorId.F] = var_frey_feeman(strata, s.weights).value
    else:
        n = s.N // s.k
        if s.scheme is Scheme.RSS:
            sample = draw_rss_sample(n, s.k, model, s.transform, rng)
            out[EstimatorId.RSS] = var_rss_empirical(sample.y).value
            if EstimatorId.M in wanted:
                out[EstimatorId.M] = var_maceachern(sample).value
            if EstimatorId.N in wanted:
                out[EstimatorId.N] = var_concomitant(sample).value
            if EstimatorId.N_DS in wanted:
                # an independent companion design drawn further along the same stream
                ds = draw_ds_sample(n, s.k, model, s.transform, rng)
                out[EstimatorId.N_DS] = var_concomitant(ds).value
        else:
            ds = draw_ds_sample(n, s.k, model, s.transform, rng)
            out[EstimatorId.RSS] = var_rss_empirical(ds.y).value
            if EstimatorId.N_DS in wanted:
                out[EstimatorId.N_DS] = var_concomitant(ds).value
    return np.array([out[e] for e in wanted])


def _replicate_range(s: Scenario, start: int, stop: int) -> np.ndarray:
    rows = np.empty((stop - start, len(s.estimators)))
    for i in range(start, stop):
        try:
            rows[i - start] = replicate(s, i)
        except (ArithmeticError, ValueError, KeyError) as exc:
            raise ScenarioError(f"{s}: replication {i} failed: {exc}") from exc
    return rows


def summarize(s: Scenario, table: np.ndarray) -> ScenarioResult:
    truth = true_variance(s.transform)
    estimates = {e: table[:, j] for j, e in enumerate(s.estimators)}
    mses = {e: mse(v, truth) for e, v in estimates.items()}
    ref = mses[reference_estimator(s.scheme)]
    res = {e: relative_efficiency(ref, m) for e, m in mses.items()}
    return ScenarioResult(s, estimates, mses, res, truth, table.shape[0])


def run_scenario(s: Scenario, workers: int = 1, chunk: int = 500) -> ScenarioResult:
    bounds = [(a, min(a + chunk, s.reps)) for a in range(0, s.reps, chunk)]
    if workers <= 1 or len(bounds) == 1:
        parts = [_replicate_range(s, a, b) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_replicate_range, s, a, b) for a, b in bounds]
            parts = [f.result() for f in futures]
    result = summarize(s, np.vstack(parts))
    log.info("%s N=%d k=%d rho=%s %s: %s", s.scheme.name, s.N, s.k, s.rho, s.transform.value,
             {e.value: round(v, 3) for e, v in result.re.items()})
    return result


def run_scenarios(
    scenarios: Sequence[Scenario],
    workers: int = 1,
    progress: Optional[Callable[[ScenarioResult], None]] = None,
) -> list[ScenarioResult]:
    results = []
    for s in scenarios:
        r = run_scenario(s, workers=workers)
        if progress is not None:
            progress(r)
        results.append(r)
    return results


TABLE_SIZES = ((15, 3), (15, 5), (30, 3), (30, 5), (45, 3), (45, 5))
TABLE_RHOS = (0.0, 0.8, 1.0)
TABLE_TRANSFORMS = tuple(TargetTransform)


def table_scenarios(
    which: int,
    reps: int = DEFAULT_REPS,
    base_seed: int = DEFAULT_SEED,
    weights: Optional[WeightProvider] = None,
) -> list[Scenario]:
    """The 54 cells of the RSS (``which=1``) or JPS (``which=2``) efficiency table."""
    if which not in (1, 2):
        raise ValueError(f"table must be 1 or 2, got {which}")
    scheme = Scheme.RSS if which == 1 else Scheme.JPS
    return [
        Scenario(scheme, N, k, rho, t, reps=reps, base_seed=base_seed,
                 weights=weights if which == 2 else None)
        for N, k in TABLE_SIZES
        for rho in TABLE_RHOS
        for t in TABLE_TRANSFORMS
    ]
