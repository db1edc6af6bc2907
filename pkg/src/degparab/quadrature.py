"""Adaptive panel quadrature for cumulative coefficients on [0, t].

Integrands may oscillate rapidly near t = 0 (ellipticity floors like
1 + sin(1/t)), so the initial subdivision is geometric toward the origin:
panels [t*2^-(m+1), t*2^-m] down to a head panel narrower than 1e-9.
Panels are then refined worst-first until the error estimate meets the
requested tolerance or the panel budget runs out.
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

GAUSS_ORDER = 16
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)

# Innermost geometric panel is cut below this width; the head panel is still
# integrated (Gauss nodes are interior, so the integrand is never evaluated
# at the singular endpoint 0).
HEAD_WIDTH = 1e-9


class QuadratureError(RuntimeError):
    """Raised when adaptive refinement exhausts its budget.

    Carries the best value computed so far and the achieved error estimate.
    """

    def __init__(self, message, value, error_estimate):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


def geometric_panels(t, breakpoints=()):
    """Initial panel list for [0, t]: geometric toward 0, split at breakpoints."""
    if t < 0:
        raise ValueError(f"integration endpoint must be nonnegative, got {t}")
    if t == 0:
        return []
    depth = max(0, math.ceil(math.log2(t / HEAD_WIDTH)))
    edges = [t * 2.0 ** (-m) for m in range(depth + 1)]
    edges.append(0.0)
    edges = sorted(set(edges))
    cuts = sorted(b for b in breakpoints if 0.0 < b < t)
    for b in cuts:
        if all(abs(b - e) > 1e-300 for e in edges):
            edges.append(b)
    edges.sort()
    return list(zip(edges[:-1], edges[1:]))


def _panel_sums(f, lo, hi):
    """Gauss-Legendre sums over a batch of panels; lo, hi are 1d arrays."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = f(nodes.ravel()).reshape(nodes.shape)
    return half * (vals @ _GL_WEIGHTS)


def integrate_to(f, t, breakpoints=(), rtol=1e-10, atol=1e-14, max_panels=4000):
    """Integral of a vectorized scalar integrand over [0, t].

    Each panel carries a halved-panel refinement estimate; the reported
    value sums the halved estimates, and refinement bisects the worst
    panel until the total error estimate passes max(atol, rtol*|value|).
    Raises QuadratureError once max_panels panels exist and the target is
    still missed.
    """
    panels = geometric_panels(t, breakpoints)
    if not panels:
        return 0.0

    lo = np.array([p[0] for p in panels])
    hi = np.array([p[1] for p in panels])
    mid = 0.5 * (lo + hi)
    coarse = _panel_sums(f, lo, hi)
    left = _panel_sums(f, lo, mid)
    right = _panel_sums(f, mid, hi)
    fine = left + right
    err = np.abs(coarse - fine)

    # heap of (-err, tiebreak, a, b, fine_value); counter breaks err ties
    counter = itertools.count()
    heap = [(-e, next(counter), a, b, v)
            for e, a, b, v in zip(err, lo, hi, fine)]
    heapq.heapify(heap)
    total = float(np.sum(fine))
    total_err = float(np.sum(err))
    n_panels = len(heap)

    while total_err > max(atol, rtol * abs(total)):
        if n_panels >= max_panels:
            raise QuadratureError(
                f"quadrature did not converge within {max_panels} panels: "
                f"achieved error estimate {total_err:.3e} "
                f"(target {max(atol, rtol * abs(total)):.3e})",
                value=total, error_estimate=total_err)
        neg_e, _, a, b, v = heapq.heappop(heap)
        total -= v
        total_err += neg_e  # neg_e = -err of the popped panel
        m = 0.5 * (a + b)
        sub_lo = np.array([a, m])
        sub_hi = np.array([m, b])
        sub_mid = 0.5 * (sub_lo + sub_hi)
        c = _panel_sums(f, sub_lo, sub_hi)
        fl = _panel_sums(f, sub_lo, sub_mid)
        fr = _panel_sums(f, sub_mid, sub_hi)
        fn = fl + fr
        er = np.abs(c - fn)
        for i in range(2):
            heapq.heappush(heap, (-er[i], next(counter),
                                  sub_lo[i], sub_hi[i], fn[i]))
        total += float(np.sum(fn))
        total_err += float(np.sum(er))
        n_panels += 1

    return total


def integrate_matrix_to(a, dim, t, breakpoints=(), rtol=1e-10, atol=1e-14,
                        max_panels=4000):
    """Entrywise integral over [0, t] of a matrix path a(t) -> (dim, dim).

    The path is evaluated one time point at a time (matrix callables are
    rarely vectorized); symmetry is used to integrate each entry once.
    """
    out = np.zeros((dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            def entry(ts, _i=i, _j=j):
                return np.array([a(s)[_i, _j] for s in np.atleast_1d(ts)])

            val = integrate_to(entry, t, breakpoints=breakpoints,
                               rtol=rtol, atol=atol, max_panels=max_panels)
            out[i, j] = val
            out[j, i] = val
    return out
