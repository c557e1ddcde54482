r"""Negative moments of the Jacobi ensemble.

The Jacobi ensemble with parameters :math:`(n, \alpha, \beta, \gamma)` is the
joint eigenvalue density on :math:`(0, 1)^n`

.. math::

    w(x) \propto \prod_{i<j} |x_i - x_j|^{2\gamma}
                 \prod_i x_i^{\alpha - 1} (1 - x_i)^{\beta - 1}.

For real Gaussian ``X`` (``p x n``) and ``Y`` (``(m - p) x n``) the eigenvalues
of ``X'X (X'X + Y'Y)^{-1}`` follow this law with ``alpha = (p - n + 1)/2``,
``beta = (m - p - n + 1)/2`` and ``gamma = 1/2``.

Closed forms live next to :func:`sample_jacobi`, a direct matrix-model sampler
that serves as an independent check on every formula here.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import chunk_bounds, check_seed, item_rng, ordered_map
from .errors import DivergentMomentError, DomainError, NumericalError

__all__ = [
    "JacobiParams",
    "params_from_split",
    "log_selberg",
    "aomoto_product",
    "inv_moment_1",
    "inv_moment_2",
    "inv_cross_moment",
    "sample_jacobi",
    "empirical_moments",
]

log = logging.getLogger(__name__)

REAL_GAMMA = 0.5

_SAMPLE_CHUNK = 4096
_MAX_RESAMPLE = 16


@dataclass(frozen=True)
class JacobiParams:
    """Parameters of the Jacobi ensemble.

    ``beta`` may be zero or negative: the split ``p > m - n`` maps there, the
    density itself degenerates, but the negative-moment formulas remain the
    correct expectations (they are rational in ``beta`` and agree with the
    Wishart computation they continue). Anything that needs the density,
    such as :func:`log_selberg`, rejects ``beta <= 0``.
    """

    n_eigen: int
    alpha: float
    beta: float
    gamma: float = REAL_GAMMA

    def __post_init__(self):
        if int(self.n_eigen) != self.n_eigen or self.n_eigen < 1:
            raise DomainError(f"n_eigen must be a positive integer, got {self.n_eigen}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not math.isfinite(self.beta):
            raise DomainError(f"beta must be finite, got {self.beta}")

    @property
    def has_density(self) -> bool:
        return self.beta > 0


def _split_alpha_beta(m: int, n: int, p: int) -> tuple[float, float]:
    return 0.5 * (p - n + 1), 0.5 * (m - p - n + 1)


def params_from_split(m: int, n: int, p: int, gamma: float = REAL_GAMMA) -> JacobiParams:
    """Jacobi parameters of a train/test split of ``m`` points in ``n`` dimensions.

    ``p`` must lie in ``[n + 4, m - 1]``, the range where the second inverse
    moment exists and the test set is nonempty.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    lo, hi = n + 4, m - 1
    if not lo <= p <= hi:
        raise DomainError(f"p={p} outside the admissible interval [n+4, m-1] = [{lo}, {hi}]")
    alpha, beta = _split_alpha_beta(m, n, p)
    return JacobiParams(n, alpha, beta, gamma)


def log_selberg(params: JacobiParams) -> float:
    """Logarithm of Selberg's normalisation integral ``S_n(alpha, beta, gamma)``."""
    if not params.has_density:
        raise DomainError(f"Selberg integral diverges for beta={params.beta} <= 0")
    a, b, g, n = params.alpha, params.beta, params.gamma, params.n_eigen
    lg = math.lgamma
    total = 0.0
    for i in range(n):
        total += (
            lg(a + i * g) + lg(b + i * g) + lg(1 + (i + 1) * g)
            - lg(a + b + (n + i - 1) * g) - lg(1 + g)
        )
    return total


def aomoto_product(params: JacobiParams, k: int) -> float:
    """Expectation of ``x_1 x_2 ... x_k`` (Aomoto's product formula).

    ``k = n_eigen`` is accepted: the product then equals the Selberg ratio
    ``S_n(alpha + 1, beta, gamma) / S_n(alpha, beta, gamma)``.
    """
    n = params.n_eigen
    if not 0 <= k <= n:
        raise DomainError(f"k must lie in [0, n_eigen={n}], got {k}")
    a, b, g = params.alpha, params.beta, params.gamma
    out = 1.0
    for i in range(1, k + 1):
        out *= (a + (n - i) * g) / (a + b + (2 * n - i - 1) * g)
    return out


def _numerator(params: JacobiParams) -> float:
    return params.alpha + params.beta + (params.n_eigen - 1) * params.gamma - 1


def inv_moment_1(params: JacobiParams) -> float:
    """``<x_1^{-1}>``; finite only for ``alpha > 1``."""
    if not params.alpha > 1:
        raise DivergentMomentError(f"<x^-1> diverges for alpha={params.alpha} <= 1")
    return _numerator(params) / (params.alpha - 1)


def inv_moment_2(params: JacobiParams) -> float:
    """``<x_1^{-2}>``; finite only for ``alpha > 2``."""
    a, b, g, n = params.alpha, params.beta, params.gamma, params.n_eigen
    if not a > 2:
        raise DivergentMomentError(f"<x^-2> diverges for alpha={a} <= 2")
    lead = _numerator(params) / ((a - 1) * (a - 2))
    return lead * (a + b - 2 + g * (n - 1) * (a + b + n * g - 1) / (a + g - 1))


def inv_cross_moment(params: JacobiParams) -> float:
    """``<x_1^{-1} x_2^{-1}>`` for two distinct eigenvalues."""
    a, b, g, n = params.alpha, params.beta, params.gamma, params.n_eigen
    if n < 2:
        raise DomainError("the cross moment needs at least two eigenvalues")
    if not a > 1:
        raise DivergentMomentError(f"<x1^-1 x2^-1> diverges for alpha={a} <= 1")
    return _numerator(params) * (a + b + n * g - 1) / ((a - 1) * (a + g - 1))


# -- matrix-model sampler ---------------------------------------------------


def _gram_pair(seed: int, i: int, attempt: int, m: int, n: int, p: int):
    z = item_rng(seed, i, attempt).standard_normal((m, n))
    a = z[:p].T @ z[:p]
    return a, a + z[p:].T @ z[p:]


def _jacobi_eigs(a: np.ndarray, s: np.ndarray) -> np.ndarray:
    # a v = lam s v reduced to L^-1 a L^-T with s = L L', which stays symmetric.
    chol = np.linalg.cholesky(s)
    w = np.linalg.solve(chol, a)
    c = np.linalg.solve(chol, np.swapaxes(w, -1, -2))
    c = 0.5 * (c + np.swapaxes(c, -1, -2))
    return np.linalg.eigvalsh(c)


def _inside_unit(ev: np.ndarray) -> np.ndarray:
    return np.all((ev > 0) & (ev < 1), axis=-1)


def _sample_chunk(seed, m, n, p, lo, hi):
    pairs = [_gram_pair(seed, i, 0, m, n, p) for i in range(lo, hi)]
    a = np.stack([x for x, _ in pairs])
    s = np.stack([y for _, y in pairs])
    try:
        eigs = _jacobi_eigs(a, s)
        bad = ~_inside_unit(eigs)
    except np.linalg.LinAlgError:
        # batched Cholesky fails as a whole; redo the block one sample at a time
        eigs = np.empty((hi - lo, n))
        bad = np.ones(hi - lo, dtype=bool)
    for j in np.flatnonzero(bad):
        eigs[j] = _resample(seed, lo + j, m, n, p)
    return eigs


def _resample(seed, i, m, n, p):
    for attempt in range(_MAX_RESAMPLE):
        try:
            ev = _jacobi_eigs(*_gram_pair(seed, i, attempt, m, n, p))
        except np.linalg.LinAlgError:
            continue
        if _inside_unit(ev):
            if attempt:
                log.warning("jacobi sample %d was singular; resampled with sub-seed attempt %d", i, attempt)
            return ev
    raise NumericalError(f"sample {i}: no nonsingular draw after {_MAX_RESAMPLE} attempts")


def sample_jacobi(m: int, n: int, p: int, count: int, seed: int, threads: int | None = None) -> np.ndarray:
    """Draw Jacobi-ensemble eigenvalues from the Gaussian matrix model.

    Parameters
    ----------
    m, n, p : int
        Split geometry. ``X`` is ``p x n`` and ``Y`` is ``(m - p) x n``; the
        sampler needs ``n + 1 <= p <= m - n`` so that both Gram matrices are
        nonsingular and every eigenvalue lies strictly inside ``(0, 1)``.
    count : int
        Number of samples.
    seed : int
        Unsigned 64-bit seed. Sample ``i`` depends only on ``(seed, i)``.
    threads : int, optional
        Worker cap; the output does not depend on it.

    Returns
    -------
    numpy.ndarray
        ``(count, n)`` array, each row one sample's eigenvalues in ascending
        order.
    """
    seed = check_seed(seed)
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    if n < 1 or not n + 1 <= p <= m - n:
        raise DomainError(f"sampler needs n+1 <= p <= m-n, got m={m}, n={n}, p={p}")
    blocks = chunk_bounds(count, _SAMPLE_CHUNK)
    parts = ordered_map(lambda b: _sample_chunk(seed, m, n, p, *b), blocks, threads)
    return np.concatenate(parts, axis=0)


def empirical_moments(eigs: np.ndarray) -> dict[str, tuple[float, float]]:
    """Sample means and standard errors of the three negative moments.

    Each sample contributes its average over eigenvalues (or over ordered
    pairs of distinct eigenvalues), which has the same expectation as the
    single-eigenvalue moment by exchangeability.
    """
    eigs = np.asarray(eigs, dtype=float)
    n = eigs.shape[1]
    inv = 1.0 / eigs
    s1 = inv.sum(axis=1)
    s2 = (inv * inv).sum(axis=1)
    per_sample = {"inv1": s1 / n, "inv2": s2 / n}
    if n >= 2:
        per_sample["cross"] = (s1 * s1 - s2) / (n * (n - 1))
    out = {}
    for name, v in per_sample.items():
        out[name] = (float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan)
    return out
