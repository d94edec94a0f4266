"""Limited-memory BFGS with a strong-Wolfe line search."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError, NumericalError

log = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], tuple[float, np.ndarray]]

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
LINE_SEARCH_FAILURE = "line_search_failure"


@dataclass(frozen=True)
class OptimizerConfig:
    memory: int = 10
    max_iterations: int = 300
    gradient_tolerance: float = 1e-5
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 40
    initial_point: np.ndarray | None = None

    def __post_init__(self):
        if self.memory < 1:
            raise InputError("memory must be >= 1")
        if self.max_iterations < 0:
            raise InputError("max_iterations must be >= 0")
        if not self.gradient_tolerance > 0:
            raise InputError("gradient_tolerance must be positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise InputError("line search needs 0 < c1 < c2 < 1")


@dataclass
class OptimizationTrace:
    iterations: int
    final_value: float
    gradient_norm: float
    reason: str
    values: list[float] = field(default_factory=list, repr=False)
    evaluations: int = 0
    min_curvature: float = float("inf")


class _Counted:
    def __init__(self, f: Oracle):
        self.f = f
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return self.f(x)

    def trial(self, x):
        """Evaluate at a line-search trial point; non-finite results read as +inf."""
        try:
            value, grad = self(x)
        except (NumericalError, FloatingPointError):
            return np.inf, None
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return np.inf, None
        return value, grad


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def _zoom(f, x, d, f0, dphi0, lo, hi, c1, c2, budget):
    a_lo, f_lo, d_lo = lo
    a_hi, f_hi, d_hi = hi
    for _ in range(budget):
        width = a_hi - a_lo
        a = None
        if np.isfinite(f_hi) and d_hi is not None:
            a = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
        left, right = sorted((a_lo + 0.1 * width, a_hi - 0.1 * width))
        if a is None or not left <= a <= right:
            a = a_lo + 0.5 * width
        fa, ga = f.trial(x + a * d)
        da = None if ga is None else float(ga @ d)
        if fa > f0 + c1 * a * dphi0 or fa >= f_lo:
            a_hi, f_hi, d_hi = a, fa, da
        else:
            if abs(da) <= -c2 * dphi0:
                return a, fa, ga
            if da * (a_hi - a_lo) >= 0:
                a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
            a_lo, f_lo, d_lo = a, fa, da
        if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
            break
    return None


def _line_search(f, x, fx, gx, d, step, c1, c2, budget):
    """Strong Wolfe search along ``d``; returns ``(step, value, grad)`` or ``None``."""
    dphi0 = float(gx @ d)
    prev = (0.0, fx, dphi0)
    a = step
    for i in range(budget):
        fa, ga = f.trial(x + a * d)
        da = None if ga is None else float(ga @ d)
        if fa > fx + c1 * a * dphi0 or (i > 0 and fa >= prev[1]):
            return _zoom(f, x, d, fx, dphi0, prev, (a, fa, da), c1, c2, budget - i)
        if abs(da) <= -c2 * dphi0:
            return a, fa, ga
        if da >= 0:
            return _zoom(f, x, d, fx, dphi0, (a, fa, da), prev, c1, c2, budget - i)
        prev = (a, fa, da)
        a *= 2.0
    return None


def _direction(g, pairs):
    """Two-loop recursion: ``-H g`` from the stored ``(s, y, 1/y.s)`` pairs."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        alpha = rho * float(s @ q)
        q -= alpha * y
        alphas.append(alpha)
    if pairs:
        s, y, rho = pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), alpha in zip(pairs, reversed(alphas)):
        beta = rho * float(y @ q)
        q += (alpha - beta) * s
    return -q


def minimize(f: Oracle, config: OptimizerConfig | None = None,
             x0: np.ndarray | None = None) -> tuple[np.ndarray, OptimizationTrace]:
    """Minimize ``f`` (returning value and gradient) from ``x0`` or ``config.initial_point``.

    Stops when the sup-norm of the gradient drops to ``gradient_tolerance`` or
    the iteration budget runs out. A failed line search ends the run and
    returns the best iterate so far.
    """
    config = config or OptimizerConfig()
    if x0 is None:
        x0 = config.initial_point
    if x0 is None:
        raise InputError("no initial point given")
    f = _Counted(f)
    x = np.array(x0, dtype=float).ravel()
    fx, gx = f(x)
    gx = np.asarray(gx, dtype=float).ravel()
    if not np.isfinite(fx) or not np.all(np.isfinite(gx)):
        raise NumericalError("objective is not finite at the initial point")

    pairs: deque = deque(maxlen=config.memory)
    values = [float(fx)]
    min_curv = float("inf")
    reason = MAX_ITERATIONS
    it = 0
    while True:
        gnorm = float(np.max(np.abs(gx))) if gx.size else 0.0
        if gnorm <= config.gradient_tolerance:
            reason = CONVERGED
            break
        if it >= config.max_iterations:
            break
        d = _direction(gx, pairs)
        if float(gx @ d) >= 0:
            pairs.clear()
            d = -gx
        step = 1.0 if pairs else min(1.0, 1.0 / float(np.linalg.norm(gx)))
        found = _line_search(f, x, fx, gx, d, step, config.c1, config.c2, config.max_line_search)
        if found is None and pairs:
            # retry once along steepest descent with a fresh memory
            pairs.clear()
            d = -gx
            found = _line_search(f, x, fx, gx, d, min(1.0, 1.0 / float(np.linalg.norm(gx))),
                                 config.c1, config.c2, config.max_line_search)
        if found is None:
            reason = LINE_SEARCH_FAILURE
            log.debug("line search failed at iteration %d", it)
            break
        a, f_new, g_new = found
        x_new = x + a * d
        g_new = np.asarray(g_new, dtype=float).ravel()
        s, y = x_new - x, g_new - gx
        sy = float(s @ y)
        if sy > 0:
            pairs.append((s, y, 1.0 / sy))
            min_curv = min(min_curv, sy)
        x, fx, gx = x_new, float(f_new), g_new
        values.append(fx)
        it += 1
    trace = OptimizationTrace(it, float(fx), float(np.max(np.abs(gx))) if gx.size else 0.0, reason,
                              values, f.calls, min_curv)
    return x, trace
