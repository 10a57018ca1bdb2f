"""Adaptive Simpson quadrature with an evaluation budget.

All integrands used in this package are numpy-vectorized callables, so the
adaptive refinement processes whole batches of subintervals per pass instead
of recursing one interval at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalError, ParameterError

DEFAULT_BUDGET = 1 << 20
_MIN_WIDTH_FACTOR = 1e-13


@dataclass(frozen=True)
class QuadResult:
    """Value of an integral together with an absolute error estimate."""

    value: float
    abs_error_estimate: float


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-10,
    budget: int = DEFAULT_BUDGET,
) -> QuadResult:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    ``f`` must accept and return numpy arrays.  Each subinterval is accepted
    once the Richardson error estimate ``(S2 - S1)/15`` falls below the
    tolerance share proportional to its width.  Raises
    :class:`NumericalError` when more than ``budget`` evaluations would be
    needed.
    """
    if tol <= 0:
        raise ParameterError(f"quadrature tolerance must be positive, got {tol!r}")
    if a == b:
        return QuadResult(0.0, 0.0)

    span = b - a
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    mid = 0.5 * (lo + hi)
    flo = np.asarray(f(lo), dtype=float)
    fmid = np.asarray(f(mid), dtype=float)
    fhi = np.asarray(f(hi), dtype=float)
    evals = 3
    s_whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    total = 0.0
    err_total = 0.0
    min_width = abs(span) * _MIN_WIDTH_FACTOR

    while lo.size:
        evals += 2 * lo.size
        if evals > budget:
            raise NumericalError(
                f"quadrature budget of {budget} evaluations exhausted "
                f"(tolerance {tol:g} unachievable)"
            )
        m1 = 0.5 * (lo + mid)
        m2 = 0.5 * (mid + hi)
        fm1 = np.asarray(f(m1), dtype=float)
        fm2 = np.asarray(f(m2), dtype=float)
        s_left = (mid - lo) / 6.0 * (flo + 4.0 * fm1 + fmid)
        s_right = (hi - mid) / 6.0 * (fmid + 4.0 * fm2 + fhi)
        err = (s_left + s_right - s_whole) / 15.0
        width = hi - lo
        done = (np.abs(err) <= tol * np.abs(width) / abs(span)) | (width <= min_width)
        if not np.all(np.isfinite(err)):
            bad = ~np.isfinite(err)
            raise NumericalError(
                "non-finite integrand encountered near "
                f"x={mid[bad][0]:.17g}"
            )

        total += float(np.sum(s_left[done] + s_right[done] + err[done]))
        err_total += float(np.sum(np.abs(err[done])))

        keep = ~done
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        new_mid = np.concatenate([m1[keep], m2[keep]])
        flo = np.concatenate([flo[keep], fmid[keep]])
        fhi = np.concatenate([fmid[keep], fhi[keep]])
        fmid = np.concatenate([fm1[keep], fm2[keep]])
        s_whole = np.concatenate([s_left[keep], s_right[keep]])
        mid = new_mid

    return QuadResult(total, err_total)


def integrate_power_upper(
    f2: Callable[[np.ndarray, np.ndarray], np.ndarray],
    a: float,
    b: float,
    power: float,
    tol: float = 1e-10,
    budget: int = DEFAULT_BUDGET,
) -> QuadResult:
    """Integrate over ``[a, b]`` when the integrand behaves like
    ``(b - s)^power`` (possibly times slowly varying log factors) near ``b``.

    ``f2(s, dist)`` receives both the abscissa and ``dist = b - s`` computed
    without cancellation.  Substituting ``s = b - (b - a) w^q`` with
    ``q = 3/(1 + power)`` turns the endpoint behaviour into ``w^2``, which the
    Simpson rule handles comfortably; the transformed integrand is pinned to 0
    at ``w = 0``.
    """
    if power <= -1.0:
        raise NumericalError(f"endpoint power {power} is not integrable")
    if a == b:
        return QuadResult(0.0, 0.0)
    span = b - a
    q = 3.0 / (1.0 + power)

    def g(w):
        w = np.asarray(w, dtype=float)
        out = np.zeros_like(w)
        pos = w > 0.0
        if np.any(pos):
            wp = w[pos]
            dist = span * wp**q
            out[pos] = f2(b - dist, dist) * (span * q) * wp ** (q - 1.0)
        return out

    return adaptive_simpson(g, 0.0, 1.0, tol, budget)
