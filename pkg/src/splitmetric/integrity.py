"""Integrity-optimal training-set size for ordinary least squares.

With ``m`` Gaussian points in ``n`` dimensions, training on ``p`` of them and
testing on the remaining ``m - p``, the expected squared gap between the
per-point test loss and the noise variance (in units of ``sigma**4``) is

    f(m, n, p) = (6 + m n (2 + n) - (8 + n (2 + n) - 2 p) p)
                 / ((m - p) (p - n - 3) (p - n - 1))

on ``n + 4 <= p <= m - 1``. ``f`` is convex there, and its stationary point
is the unique root in ``(n + 3, m)`` of a monic quartic ``delta(p)`` whose
coefficients depend on ``(m, n)`` only. Noise level, true coefficients and
feature covariance never enter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import jacobi_moments as jm
from .errors import DomainError, NumericalError

__all__ = [
    "SplitProblem",
    "QuarticCoeffs",
    "IntegrityCurve",
    "integrity_f",
    "integrity_f_unsimplified",
    "quartic_coeffs",
    "delta_eval",
    "solve_real_root",
    "optimal_p",
    "asymptotic_p",
    "leading_term",
    "integrity_curve",
]

_ROOT_RTOL = 1e-12
_MAX_ITER = 200


@dataclass(frozen=True)
class SplitProblem:
    """Dataset size ``m`` and feature dimension ``n``; requires ``m >= n + 5``."""

    m: int
    n: int

    def __post_init__(self):
        for name in ("m", "n"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise DomainError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if self.m < self.n + 5:
            raise DomainError(
                f"need m >= n + 5 so that [n+4, m-1] is nonempty; got m={self.m}, n={self.n}"
            )

    @property
    def p_range(self) -> tuple[int, int]:
        """Admissible training sizes, inclusive."""
        return self.n + 4, self.m - 1


@dataclass(frozen=True)
class QuarticCoeffs:
    """Exact integer coefficients of ``delta(p)``, ascending powers."""

    c0: int
    c1: int
    c2: int
    c3: int
    c4: int = 1

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.c0, self.c1, self.c2, self.c3, self.c4)


@dataclass(frozen=True)
class IntegrityCurve:
    problem: SplitProblem
    entries: list[tuple[int, float]]
    argmin_p: int

    @property
    def p(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries])

    @property
    def f(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])


def _check_p(problem: SplitProblem, p) -> None:
    lo, hi = problem.p_range
    if not lo <= p <= hi:
        raise DomainError(f"p={p} outside the admissible interval [n+4, m-1] = [{lo}, {hi}]")


def _f_parts(m, n, p):
    num = 6 + m * n * (2 + n) - (8 + n * (2 + n) - 2 * p) * p
    den = (m - p) * (p - n - 3) * (p - n - 1)
    return num, den


def integrity_f(problem: SplitProblem, p) -> float:
    """Expected squared deviation of the test loss from the noise, over ``sigma**4``."""
    _check_p(problem, p)
    num, den = _f_parts(problem.m, problem.n, p)
    return float(num / den)


def _integrity_f_exact(problem: SplitProblem, p: int) -> Fraction:
    num, den = _f_parts(problem.m, problem.n, int(p))
    return Fraction(num, den)


def integrity_f_unsimplified(problem: SplitProblem, p: int, gamma: float = jm.REAL_GAMMA) -> float:
    """Same quantity assembled from Jacobi-ensemble negative moments.

    Kept as an independent check on :func:`integrity_f`:

        (3 n <x^-2> + n (n - 1) <x1^-1 x2^-1> - 2 n^2 <x^-1>
         + n^2 - 2 n + 2 (m - p)) / (m - p)^2
    """
    _check_p(problem, p)
    m, n = problem.m, problem.n
    params = jm.params_from_split(m, n, p, gamma)
    total = 3 * n * jm.inv_moment_2(params) - 2 * n * n * jm.inv_moment_1(params)
    if n >= 2:
        total += n * (n - 1) * jm.inv_cross_moment(params)
    total += n * n - 2 * n + 2 * (m - p)
    return total / (m - p) ** 2


def quartic_coeffs(problem: SplitProblem) -> QuarticCoeffs:
    m, n = problem.m, problem.n
    return QuarticCoeffs(
        c0=9 + n * (m * m * (2 + n) ** 2 + 3 * (4 + n) - 2 * m * (5 + 2 * n)),
        c1=-24 - n * (12 + m * m * (2 + n) + 2 * m * n * (3 + n)),
        c2=22 + n * (8 + 2 * m * (1 + n) + n * (3 + n)),
        c3=-(8 + n * (2 + n)),
        c4=1,
    )


def delta_eval(problem: SplitProblem, p) -> float:
    """Evaluate ``delta(p)`` by Horner's rule (exactly when ``p`` is an integer)."""
    coeffs = quartic_coeffs(problem).as_tuple()
    if float(p).is_integer():
        p = int(p)
        acc = 0
        for c in reversed(coeffs):
            acc = acc * p + c
        return float(acc)
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * p + float(c)
    return acc


def _scaled_quartic(problem: SplitProblem) -> tuple[float, np.ndarray]:
    # delta(s q) / s^4 in the variable q = p / s, s = m^(2/3); all coefficients O(1)-ish.
    s = problem.m ** (2.0 / 3.0)
    coeffs = quartic_coeffs(problem).as_tuple()
    d = np.array([float(Fraction(c)) / s ** (4 - k) for k, c in enumerate(coeffs)])
    return s, d


def _horner(d: np.ndarray, q: float) -> tuple[float, float, float]:
    """Value, derivative and absolute-term scale of the polynomial at ``q``."""
    val = der = scale = 0.0
    aq = abs(q)
    for c in d[::-1]:
        der = der * q + val
        val = val * q + c
        scale = scale * aq + abs(c)
    return val, der, scale


def solve_real_root(problem: SplitProblem) -> float:
    """Unique real root of ``delta`` in ``(n + 3, m)``.

    ``f`` is strictly convex on that interval and ``delta`` is a positive
    multiple of the numerator of ``f'``, so ``delta(n + 3) < 0 < delta(m)``
    and exactly one root lies between. It is found by bisection safeguarding
    Newton steps, on the rescaled variable ``p / m**(2/3)``.
    """
    s, d = _scaled_quartic(problem)
    lo, hi = (problem.n + 3) / s, problem.m / s
    f_lo, _, _ = _horner(d, lo)
    f_hi, _, _ = _horner(d, hi)
    if not (f_lo < 0 < f_hi):
        raise NumericalError(
            f"no admissible root: delta does not change sign on (n+3, m) for m={problem.m}, n={problem.n}"
        )
    q = 0.5 * (lo + hi)
    for _ in range(_MAX_ITER):
        val, der, scale = _horner(d, q)
        if abs(val) <= _ROOT_RTOL * scale:
            break
        if val < 0:
            lo = q
        else:
            hi = q
        step_ok = der != 0
        if step_ok:
            nq = q - val / der
            step_ok = lo < nq < hi
        q = nq if step_ok else 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    else:
        raise NumericalError(f"root refinement did not converge for m={problem.m}, n={problem.n}")
    return float(q * s)


def _exact_argmin(problem: SplitProblem, candidates) -> int:
    """Smallest ``p`` among ``candidates`` attaining the exact minimum of ``f``."""
    best_p, best_f = None, None
    for p in sorted(set(int(c) for c in candidates)):
        v = _integrity_f_exact(problem, p)
        if best_f is None or v < best_f:
            best_p, best_f = p, v
    return best_p


def optimal_p(problem: SplitProblem) -> int:
    """Integer training size minimising :func:`integrity_f`.

    The real root is bracketed by its floor and ceiling; whichever gives the
    smaller ``f`` wins, the smaller ``p`` on an exact tie. Comparisons are done
    in exact rational arithmetic.
    """
    lo, hi = problem.p_range
    if lo == hi:
        return lo
    r = solve_real_root(problem)
    cands = [min(max(c, lo), hi) for c in (math.floor(r), math.ceil(r))]
    return _exact_argmin(problem, cands)


def leading_term(problem: SplitProblem) -> float:
    n = problem.n
    return (2 * n + n * n) ** (1.0 / 3.0) * problem.m ** (2.0 / 3.0)


def asymptotic_p(problem: SplitProblem, order: int) -> float:
    """Large-``m`` expansion of the optimal training size, first ``order`` terms (1-4)."""
    if order not in (1, 2, 3, 4):
        raise DomainError(f"order must be in [1, 4], got {order}")
    m, n = float(problem.m), problem.n
    g = n * (2 + n)
    g13 = g ** (1.0 / 3.0)
    terms = (
        m ** (2.0 / 3.0) * g13,
        -(m ** (1.0 / 3.0)) * 2 * n * (1 + n) / (3 * g13),
        (6 + n + n * n) / 3.0,
        -(m ** (-1.0 / 3.0))
        * 2 * n * n * (216 + 230 * n + 87 * n**2 + 24 * n**3 + 5 * n**4)
        / (81 * g ** (5.0 / 3.0)),
    )
    return math.fsum(terms[:order])


def integrity_curve(problem: SplitProblem) -> IntegrityCurve:
    lo, hi = problem.p_range
    ps = np.arange(lo, hi + 1)
    num, den = _f_parts(problem.m, problem.n, ps.astype(float))
    f = num / den
    # float scan first, then settle near-ties exactly so the argmin matches optimal_p
    fmin = f.min()
    near = ps[f <= fmin * (1 + 1e-9)]
    argmin = _exact_argmin(problem, near)
    return IntegrityCurve(problem, [(int(p), float(v)) for p, v in zip(ps, f)], argmin)
