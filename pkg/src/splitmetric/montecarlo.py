"""Monte Carlo simulation of the full regression pipeline.

Every trial draws a Gaussian design and noise, then for every training size
``p`` from ``n + 1`` to ``m - 1`` fits least squares on the first ``p`` rows
and scores the remaining rows. The squared gap between the per-point test
loss and ``sigma**2``, averaged over trials, is the empirical integrity
metric that :func:`splitmetric.integrity.integrity_f` predicts (after
division by ``sigma**4``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._parallel import check_seed, chunk_bounds, item_rng, ordered_map
from .errors import DomainError
from .integrity import SplitProblem, integrity_f, optimal_p

__all__ = [
    "SimulationConfig",
    "IntegrityEstimate",
    "SimulationResult",
    "run_integrity_simulation",
    "TraceIdentityReport",
    "check_trace_identities",
    "OverlayRow",
    "Comparison",
    "empirical_vs_analytic",
]

log = logging.getLogger(__name__)

_TRIAL_CHUNK = 2048
_RANK_TOL = 1e-10

# spawn-key prefixes keep the setup stream disjoint from per-trial streams
_SETUP_KEY = 0
_TRIAL_KEY = 1


@dataclass
class SimulationConfig:
    m: int
    n: int
    sigma: float = 1.0
    trials: int = 100_000
    seed: int = 0
    coeffs: np.ndarray | None = None
    covariance: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1 or self.m < self.n + 5:
            raise DomainError(f"need n >= 1 and m >= n + 5, got m={self.m}, n={self.n}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        self.seed = check_seed(self.seed)
        if self.coeffs is not None:
            self.coeffs = np.asarray(self.coeffs, dtype=float)
            if self.coeffs.shape != (self.n,):
                raise DomainError(f"coeffs must have shape ({self.n},), got {self.coeffs.shape}")
        if self.covariance is not None:
            cov = np.asarray(self.covariance, dtype=float)
            if cov.shape != (self.n, self.n) or not np.allclose(cov, cov.T):
                raise DomainError("covariance must be a symmetric n x n matrix")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise DomainError("covariance is not positive definite") from None
            self.covariance = cov

    def model(self) -> tuple[np.ndarray, np.ndarray]:
        """True coefficients ``b`` and upper Cholesky factor ``R`` (``cov = R'R``).

        Whatever is not supplied is drawn from the config's setup stream:
        ``b`` standard normal and ``cov = G'G + n I`` with ``G`` standard normal.
        """
        rng = item_rng(self.seed, _SETUP_KEY)
        b = rng.standard_normal(self.n) if self.coeffs is None else self.coeffs
        if self.covariance is None:
            g = rng.standard_normal((self.n, self.n))
            cov = g.T @ g + self.n * np.eye(self.n)
        else:
            cov = self.covariance
        return b, np.linalg.cholesky(cov).T


class IntegrityEstimate(NamedTuple):
    p: int
    mean_sq_dev: float
    std_err: float


@dataclass
class SimulationResult:
    config: SimulationConfig
    per_p: list[IntegrityEstimate]
    empirical_argmin: int
    skipped: dict[int, int] = field(default_factory=dict)

    def normalized(self) -> np.ndarray:
        """``mean_sq_dev / sigma**4`` per ``p``, comparable to ``integrity_f``."""
        return np.array([e.mean_sq_dev for e in self.per_p]) / self.config.sigma**4


class _Moments(NamedTuple):
    count: np.ndarray
    mean: np.ndarray
    m2: np.ndarray


def _combine(a: _Moments, b: _Moments) -> _Moments:
    # Chan et al. pairwise update; order of combination is fixed by the caller
    count = a.count + b.count
    safe = np.where(count > 0, count, 1)
    delta = b.mean - a.mean
    mean = a.mean + delta * b.count / safe
    m2 = a.m2 + b.m2 + delta**2 * a.count * b.count / safe
    return _Moments(count, mean, m2)


def _simulate_chunk(config: SimulationConfig, b, r, lo: int, hi: int) -> _Moments:
    m, n, sigma = config.m, config.n, config.sigma
    size = hi - lo
    x = np.empty((size, m, n))
    eps = np.empty((size, m))
    for j, t in enumerate(range(lo, hi)):
        rng = item_rng(config.seed, _TRIAL_KEY, t)
        x[j] = rng.standard_normal((m, n))
        eps[j] = rng.standard_normal(m)
    z = x @ r
    y = z @ b + sigma * eps

    ps = range(n + 1, m)
    count = np.zeros(len(ps))
    mean = np.zeros(len(ps))
    m2 = np.zeros(len(ps))
    for k, p in enumerate(ps):
        q, rr = np.linalg.qr(z[:, :p, :])
        diag = np.abs(np.diagonal(rr, axis1=1, axis2=2))
        ok = diag.min(axis=1) > _RANK_TOL * diag.max(axis=1)
        rhs = np.einsum("tpn,tp->tn", q, y[:, :p])
        coef = np.linalg.solve(rr[ok], rhs[ok][..., None])[..., 0]
        resid = np.einsum("tqn,tn->tq", z[ok, p:, :], coef) - y[ok, p:]
        dev = (np.mean(resid * resid, axis=1) - sigma**2) ** 2
        count[k] = dev.size
        if dev.size:
            mean[k] = dev.mean()
            m2[k] = np.sum((dev - mean[k]) ** 2)
    return _Moments(count, mean, m2)


def run_integrity_simulation(config: SimulationConfig, threads: int | None = None) -> SimulationResult:
    """Estimate the integrity metric for every ``p`` in ``[n + 1, m - 1]``.

    Trial ``t`` draws from a stream keyed by ``(seed, t)`` and trials are
    reduced in fixed-size blocks in block order, so the result is bit-identical
    for any ``threads``.
    """
    b, r = config.model()
    blocks = chunk_bounds(config.trials, _TRIAL_CHUNK)
    parts = ordered_map(lambda blk: _simulate_chunk(config, b, r, *blk), blocks, threads)
    acc = parts[0]
    for part in parts[1:]:
        acc = _combine(acc, part)

    ps = list(range(config.n + 1, config.m))
    skipped = {p: config.trials - int(c) for p, c in zip(ps, acc.count) if c < config.trials}
    if skipped:
        log.warning("skipped rank-deficient training blocks: %s", skipped)
    per_p = []
    for k, p in enumerate(ps):
        c = acc.count[k]
        se = math.sqrt(acc.m2[k] / (c - 1) / c) if c > 1 else math.nan
        per_p.append(IntegrityEstimate(p, float(acc.mean[k]), se))
    means = np.array([e.mean_sq_dev for e in per_p])
    argmin = ps[int(np.argmin(means))]
    return SimulationResult(config, per_p, argmin, skipped)


@dataclass
class TraceIdentityReport:
    """Sampled versus exact values of the three Gaussian trace identities."""

    estimates: tuple[float, float, float]
    exact: tuple[float, float, float]

    @property
    def rel_errors(self) -> tuple[float, float, float]:
        return tuple(abs(e / x - 1) for e, x in zip(self.estimates, self.exact))


def check_trace_identities(
    a: int,
    b: int,
    trials: int,
    seed: int,
    S: np.ndarray | None = None,
    M: np.ndarray | None = None,
) -> TraceIdentityReport:
    """Check ``E[e'Se] = tr S``, ``E[(e'Se)^2] = (tr S)^2 + 2 tr S^2`` and
    ``E[(e'Mf)(f'M'e)] = tr M'M`` by sampling standard normal ``e``, ``f``.

    ``S`` (``a x a``, positive definite) and ``M`` (``a x b``) are drawn at
    random unless given.
    """
    if a < 1 or b < 1 or trials < 1:
        raise DomainError(f"need a, b, trials >= 1, got a={a}, b={b}, trials={trials}")
    rng = item_rng(check_seed(seed), 0)
    if S is None:
        g = rng.standard_normal((a, a))
        S = g.T @ g + a * np.eye(a)
    if M is None:
        M = rng.standard_normal((a, b))
    S = np.asarray(S, dtype=float)
    M = np.asarray(M, dtype=float)
    e = rng.standard_normal((trials, a))
    f = rng.standard_normal((trials, b))
    quad = np.einsum("ti,ij,tj->t", e, S, e)
    bil = np.einsum("ti,ij,tj->t", e, M, f)
    estimates = (float(quad.mean()), float((quad**2).mean()), float((bil**2).mean()))
    tr = float(np.trace(S))
    exact = (tr, tr * tr + 2 * float(np.trace(S @ S)), float(np.trace(M.T @ M)))
    return TraceIdentityReport(estimates, exact)


class OverlayRow(NamedTuple):
    p: int
    normalized: float
    normalized_se: float
    analytic_f: float | None


@dataclass
class Comparison:
    result: SimulationResult
    empirical_argmin: int
    optimal_p: int
    rows: list[OverlayRow]

    @property
    def argmin_gap(self) -> int:
        return abs(self.empirical_argmin - self.optimal_p)

    def row(self, p: int) -> OverlayRow:
        return self.rows[p - self.rows[0].p]


def empirical_vs_analytic(config: SimulationConfig, threads: int | None = None) -> Comparison:
    """Simulate and overlay ``mean_sq_dev / sigma**4`` on ``integrity_f``.

    ``analytic_f`` is ``None`` below ``p = n + 4`` where the expectation is
    infinite.
    """
    result = run_integrity_simulation(config, threads)
    problem = SplitProblem(config.m, config.n)
    s4 = config.sigma**4
    lo = problem.p_range[0]
    rows = [
        OverlayRow(e.p, e.mean_sq_dev / s4, e.std_err / s4, integrity_f(problem, e.p) if e.p >= lo else None)
        for e in result.per_p
    ]
    return Comparison(result, result.empirical_argmin, optimal_p(problem), rows)
