"""Grid-plus-golden-section maximization on an interval."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-6, max_iter: int = 200) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[lo, hi]`` to bracket width ``tol``.

    The endpoints are also evaluated, so a monotone ``f`` returns the
    better endpoint exactly.
    """
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > tol and it < max_iter:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        it += 1
    cands = [(lo, f(lo)), (x1, f1), (x2, f2), (hi, f(hi))]
    # smallest argument among the maximal values
    best = max(cands, key=lambda t: (t[1], -t[0]))
    return best


def grid_refine_max(f_grid: Callable[[np.ndarray], np.ndarray], f: Callable[[float], float],
                    lo: float, hi: float, npts: int, tol: float) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Global grid search then local golden-section refinement.

    Ties on the grid go to the smallest argument; the refined point is kept
    only if it does not lose to the best grid value.
    Returns ``(x_best, f_best, grid, values)``.
    """
    grid = np.linspace(lo, hi, npts)
    vals = np.asarray(f_grid(grid), dtype=float)
    k = int(np.argmax(vals))
    xg, fg = float(grid[k]), float(vals[k])
    a = float(grid[max(k - 1, 0)])
    b = float(grid[min(k + 1, npts - 1)])
    xr, fr = golden_section_max(f, a, b, tol)
    if fr > fg or (fr == fg and xr < xg):
        return xr, fr, grid, vals
    return xg, fg, grid, vals
