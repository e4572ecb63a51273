"""Seeded Monte-Carlo experiment runner with CSV emission.

Replications are independent tasks keyed by their replication index: trial
``i`` always uses ``RngStream(base_seed, i)``, so results are identical
whether replications run serially or across processes.  Per-replication
outcomes are gathered into arrays indexed by replication before reduction,
making the aggregation independent of scheduling and chunking.
"""
from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import algos
from .env import Problem, RngStream, Setting, gaps, make_setting, true_labels

__all__ = [
    "ALGORITHMS",
    "ExperimentConfig",
    "ErrorEstimate",
    "ResultRow",
    "CSV_HEADER",
    "wilson_interval",
    "simple_regret",
    "run_trial",
    "run_experiment",
    "render_csv",
    "write_csv",
]

ALGORITHMS = ("explore", "naive", "uniform", "ctb")

CSV_HEADER = (
    "setting,algo,K,T,delta,sigma,tau,reps,errors,error_rate,"
    "ci_low,ci_high,mean_simple_regret,seed,skipped"
)

#: Two-sided 95% normal quantile used by the Wilson interval.
_Z95 = statistics.NormalDist().inv_cdf(0.975)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep definition: instance family, algorithms, budget, and seeding."""

    setting: Setting
    algos: Tuple[str, ...]
    K: int
    T: int
    delta: float
    sigma: float = 1.0
    tau: float = 0.0
    reps: int = 1
    base_seed: int = 0
    sweep_param: Optional[str] = None  # "delta" or "K"
    sweep_values: Optional[Tuple[float, ...]] = None
    custom_means: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "algos", tuple(self.algos))
        if not self.algos:
            raise ValueError("algos must be nonempty")
        for name in self.algos:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.setting is Setting.CUSTOM:
            if not self.custom_means:
                raise ValueError("custom setting requires custom_means")
            object.__setattr__(self, "custom_means", tuple(float(x) for x in self.custom_means))
        elif self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.sweep_param is not None:
            if self.sweep_param not in ("delta", "K"):
                raise ValueError("sweep_param must be 'delta' or 'K'")
            vals = tuple(self.sweep_values or ())
            if not vals:
                raise ValueError("sweep_values must be nonempty when sweeping")
            if any(y <= x for x, y in zip(vals, vals[1:])):
                raise ValueError("sweep_values must be strictly increasing")
            if self.setting is Setting.CUSTOM:
                raise ValueError("sweeps are not supported for custom instances")
            object.__setattr__(self, "sweep_values", vals)


@dataclass(frozen=True)
class ErrorEstimate:
    """Aggregated mis-classification statistics over one cell of the sweep."""

    errors: int
    rate: float
    ci_low: float
    ci_high: float
    mean_simple_regret: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.ci_low <= self.rate <= self.ci_high <= 1.0:
            raise ValueError("confidence interval must bracket the rate")


@dataclass(frozen=True)
class ResultRow:
    setting: str
    algo: str
    K: int
    T: int
    delta: float
    sigma: float
    tau: float
    reps: int
    seed: int
    skipped: bool
    estimate: Optional[ErrorEstimate] = None


def wilson_interval(errors: int, n: int, z: float = _Z95) -> Tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n < 1 or not 0 <= errors <= n:
        raise ValueError("need 0 <= errors <= n with n >= 1")
    p = errors / n
    z2n = z * z / n
    denom = 1.0 + z2n
    center = (p + z2n / 2.0) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / n + z2n / (4.0 * n))
    # The score interval brackets p exactly; guard the float boundary cases.
    return min(max(0.0, center - half), p), max(min(1.0, center + half), p)


def _build_instance(config: ExperimentConfig, K: int, delta: float) -> Problem:
    if config.setting is Setting.CUSTOM:
        return Problem(np.asarray(config.custom_means), config.sigma, config.tau)
    return make_setting(config.setting, K, delta, config.tau, config.sigma)


def _run_algo(problem: Problem, algo: str, T: int, rng: RngStream) -> algos.AlgoResult:
    if algo == "explore":
        return algos.explore(problem, T, rng)
    if algo == "naive":
        return algos.naive(problem, T, rng)
    if algo == "uniform":
        return algos.uniform(problem, T, rng)
    if algo == "ctb":
        return algos.ctb(problem, T, rng)
    raise ValueError(f"unknown algorithm {algo!r}")


def simple_regret(predicted: np.ndarray, truth: np.ndarray, gap_values: np.ndarray) -> float:
    """Largest gap among mislabeled arms; 0 when the classification is perfect."""
    mismatch = np.asarray(predicted) != np.asarray(truth)
    if not mismatch.any():
        return 0.0
    return float(np.max(np.asarray(gap_values)[mismatch]))


def _trial(problem: Problem, truth: np.ndarray, gap_values: np.ndarray,
           algo: str, T: int, rng: RngStream) -> Tuple[bool, float]:
    result = _run_algo(problem, algo, T, rng)
    mismatch = result.q_hat.labels != truth
    if not mismatch.any():
        return False, 0.0
    return True, float(np.max(gap_values[mismatch]))


def run_trial(config: ExperimentConfig, algo: str, rep_index: int) -> Tuple[bool, float]:
    """Run replication ``rep_index`` of ``algo``; returns ``(error occurred, simple regret)``.

    The regret of a perfect replication is 0; otherwise it is the largest gap
    among mislabeled arms.
    """
    problem = _build_instance(config, config.K, config.delta)
    truth = true_labels(problem).labels
    gap_values = gaps(problem).gaps
    rng = RngStream(config.base_seed, rep_index)
    return _trial(problem, truth, gap_values, algo, config.T, rng)


def _run_block(config: ExperimentConfig, K: int, delta: float, algo: str,
               start: int, stop: int) -> Tuple[int, np.ndarray, np.ndarray]:
    problem = _build_instance(config, K, delta)
    truth = true_labels(problem).labels
    gap_values = gaps(problem).gaps
    errs = np.zeros(stop - start, dtype=bool)
    regrets = np.zeros(stop - start, dtype=np.float64)
    for i, rep in enumerate(range(start, stop)):
        rng = RngStream(config.base_seed, rep)
        errs[i], regrets[i] = _trial(problem, truth, gap_values, algo, config.T, rng)
    return start, errs, regrets


def _grid(config: ExperimentConfig) -> List[Tuple[int, float]]:
    if config.sweep_param == "delta":
        return [(config.K, float(v)) for v in config.sweep_values]
    if config.sweep_param == "K":
        return [(int(v), config.delta) for v in config.sweep_values]
    return [(config.K, config.delta)]


def run_experiment(config: ExperimentConfig, threads: int = 1) -> List[ResultRow]:
    """Run the sweep and aggregate each (grid point, algorithm) cell.

    Grid points whose budget precondition fails are emitted with the
    ``skipped`` flag instead of aborting the sweep; other exceptions
    propagate.  Output is identical for every ``threads`` value.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    rows: List[ResultRow] = []
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for K, delta in _grid(config):
            for algo in config.algos:
                try:
                    problem = _build_instance(config, K, delta)
                    truth = true_labels(problem).labels
                    gap_values = gaps(problem).gaps
                    _trial(problem, truth, gap_values, algo, config.T,
                           RngStream(config.base_seed, 0))
                except algos.BudgetError:
                    rows.append(ResultRow(config.setting.value, algo, K, config.T, delta,
                                          config.sigma, config.tau, config.reps,
                                          config.base_seed, skipped=True))
                    continue
                errs = np.zeros(config.reps, dtype=bool)
                regrets = np.zeros(config.reps, dtype=np.float64)
                if pool is None:
                    _, errs[:], regrets[:] = _run_block(config, K, delta, algo, 0, config.reps)
                else:
                    chunk = max(1, math.ceil(config.reps / (threads * 4)))
                    futures = [
                        pool.submit(_run_block, config, K, delta, algo, s,
                                    min(s + chunk, config.reps))
                        for s in range(0, config.reps, chunk)
                    ]
                    for fut in futures:
                        start, e, r = fut.result()
                        errs[start : start + e.size] = e
                        regrets[start : start + r.size] = r
                n_err = int(errs.sum())
                ci_low, ci_high = wilson_interval(n_err, config.reps)
                est = ErrorEstimate(n_err, n_err / config.reps, ci_low, ci_high,
                                    float(np.sum(regrets) / config.reps))
                rows.append(ResultRow(config.setting.value, algo, K, config.T, delta,
                                      config.sigma, config.tau, config.reps,
                                      config.base_seed, skipped=False, estimate=est))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def _f(x: float) -> str:
    return f"{x:.6f}"


def _row_line(row: ResultRow) -> str:
    est = row.estimate
    errors = est.errors if est else 0
    rate = est.rate if est else 0.0
    ci_low = est.ci_low if est else 0.0
    ci_high = est.ci_high if est else 0.0
    regret = est.mean_simple_regret if est else 0.0
    fields = [
        row.setting, row.algo, str(row.K), str(row.T), _f(row.delta), _f(row.sigma),
        _f(row.tau), str(row.reps), str(errors), _f(rate), _f(ci_low), _f(ci_high),
        _f(regret), str(row.seed), str(int(row.skipped)),
    ]
    return ",".join(fields)


def render_csv(rows: Sequence[ResultRow], comment: Optional[str] = None) -> str:
    """Render rows in the fixed schema (floats with six decimal places).

    ``comment`` (the reproducing configuration) is emitted first as a
    ``#``-prefixed line.  Rows are rendered in the order given, which
    ``run_experiment`` produces grid-major, algorithm-minor.
    """
    if not rows:
        raise ValueError("rows must be nonempty")
    lines = []
    if comment is not None:
        lines.append("# " + comment)
    lines.append(CSV_HEADER)
    lines.extend(_row_line(r) for r in rows)
    return "\n".join(lines) + "\n"


def write_csv(rows: Sequence[ResultRow], path, comment: Optional[str] = None) -> None:
    """Write :func:`render_csv` output to ``path`` with byte-stable newlines."""
    text = render_csv(rows, comment)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
