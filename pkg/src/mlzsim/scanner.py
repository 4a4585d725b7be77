"""Parameter sweeps hunting couplings where cyclic products turn real.

For a one-parameter family of models, the sweep evaluates the Im/Re ratios
of the 3- and 4-cycle amplitude products at a fixed evolution time over a
coupling grid; a simultaneous sign change of both ratios marks a candidate
exactly-solvable member of the family.  Candidates are refined by
bisecting each ratio's bracket and accepting when the two roots agree
within a window and both ratio magnitudes are small at the midpoint.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidParameter, MlzError
from .model import MlzModel
from .propagate import PropagationSettings, cyclic_products, evolve_unitary


@dataclass(frozen=True)
class SweepResult:
    """Per-grid-point cyclic-product ratios for a one-parameter family.

    ``flags`` holds None for clean points, "degenerate" where a real part
    vanished, or the error name for failed propagations (those points carry
    NaN ratios).
    """

    grid: np.ndarray
    r3: np.ndarray
    r4: np.ndarray
    t_max: float
    family: str
    flags: tuple
    triple: tuple = (1, 2, 3)
    quad: tuple = (1, 2, 3, 4)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.size == 0 or np.any(np.diff(grid) <= 0):
            raise InvalidParameter("grid must be nonempty and strictly increasing")
        for name in ("grid", "r3", "r4"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _max_workers() -> int:
    env = os.environ.get("MLZ_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _ratios_at(generator: Callable[[float], MlzModel], g: float,
               settings: PropagationSettings,
               triple: Sequence[int], quad: Sequence[int]):
    ev = evolve_unitary(generator(g), settings)
    cp = cyclic_products(ev.u, triple, quad)
    flag = "degenerate" if (cp.degenerate3 or cp.degenerate4) else None
    return cp.r3, cp.r4, flag


def sweep(generator: Callable[[float], MlzModel], param_range: tuple[float, float],
          grid_size: int, t_max: float,
          settings: Optional[PropagationSettings] = None,
          triple: Sequence[int] = (1, 2, 3), quad: Sequence[int] = (1, 2, 3, 4),
          family: str = "") -> SweepResult:
    """Evaluate cyclic-product ratios over a uniform coupling grid.

    Grid points are independent pure computations; they are evaluated in a
    thread pool capped by the ``MLZ_THREADS`` environment variable and
    aggregated by index, so the result does not depend on scheduling.
    Propagation failures are recorded per point rather than raised.
    """
    lo, hi = param_range
    if not (hi > lo and grid_size >= 2):
        raise InvalidParameter("need an increasing range and grid_size >= 2")
    if settings is None:
        settings = PropagationSettings(t_max=t_max)
    grid = np.linspace(lo, hi, grid_size)
    r3 = np.full(grid_size, np.nan)
    r4 = np.full(grid_size, np.nan)
    flags: list = [None] * grid_size

    def worker(idx: int):
        try:
            return idx, _ratios_at(generator, grid[idx], settings, triple, quad)
        except MlzError as exc:
            return idx, (np.nan, np.nan, type(exc).__name__)

    workers = _max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(worker, range(grid_size)))
    else:
        results = [worker(i) for i in range(grid_size)]
    for idx, (v3, v4, flag) in results:
        r3[idx], r4[idx], flags[idx] = v3, v4, flag
    return SweepResult(grid=grid, r3=r3, r4=r4, t_max=t_max, family=family,
                       flags=tuple(flags), triple=tuple(triple), quad=tuple(quad))


@dataclass(frozen=True)
class RefineSettings:
    """Bisection policy for :func:`find_simultaneous_zero`."""

    window: float = 0.02
    threshold: float = 1e-2
    xtol: float = 1e-4
    max_iter: int = 60
    confirm_t_factors: tuple = ()

    def __post_init__(self):
        if self.window <= 0 or self.threshold <= 0 or self.xtol <= 0:
            raise InvalidParameter("refine settings must be positive")


def _brackets(grid: np.ndarray, values: np.ndarray) -> list[tuple[float, float]]:
    out = []
    for a, b, va, vb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if np.isfinite(va) and np.isfinite(vb) and va * vb < 0:
            out.append((a, b))
    return out


def _bisect(fun: Callable[[float], float], lo: float, hi: float,
            xtol: float, max_iter: int) -> Optional[float]:
    flo = fun(lo)
    if flo == 0:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fun(mid)
        if fmid == 0 or hi - lo < xtol:
            return mid
        if flo * fmid < 0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return None


def find_simultaneous_zero(sweep_result: SweepResult,
                           generator: Callable[[float], MlzModel],
                           settings: Optional[PropagationSettings] = None,
                           refine: RefineSettings = RefineSettings()) -> Optional[dict]:
    """Locate a coupling where both cyclic ratios cross zero together.

    Brackets sign changes of ``r3`` and ``r4`` on the sweep grid, bisects
    each, and accepts a pair of roots within ``refine.window`` whose
    midpoint keeps both ratio magnitudes below ``refine.threshold``.
    Optional ``confirm_t_factors`` re-evaluate the midpoint at stretched
    evolution times and require the threshold to keep holding.  Returns
    ``{"g_star", "root_r3", "root_r4", "r3", "r4"}`` or None; absence of a
    candidate is a normal outcome.
    """
    if settings is None:
        settings = PropagationSettings(t_max=sweep_result.t_max)
    triple, quad = sweep_result.triple, sweep_result.quad
    cache: dict[float, tuple[float, float]] = {}

    def ratios(g: float) -> tuple[float, float]:
        if g not in cache:
            v3, v4, _ = _ratios_at(generator, g, settings, triple, quad)
            cache[g] = (v3, v4)
        return cache[g]

    b3 = _brackets(sweep_result.grid, sweep_result.r3)
    b4 = _brackets(sweep_result.grid, sweep_result.r4)
    candidates = []
    for lo3, hi3 in b3:
        for lo4, hi4 in b4:
            if min(hi3, hi4) - max(lo3, lo4) < -refine.window:
                continue
            root3 = _bisect(lambda g: ratios(g)[0], lo3, hi3,
                            refine.xtol, refine.max_iter)
            root4 = _bisect(lambda g: ratios(g)[1], lo4, hi4,
                            refine.xtol, refine.max_iter)
            if root3 is None or root4 is None:
                continue
            if abs(root3 - root4) > refine.window:
                continue
            g_star = 0.5 * (root3 + root4)
            r3, r4 = ratios(g_star)
            if max(abs(r3), abs(r4)) > refine.threshold:
                continue
            confirmed = True
            for factor in refine.confirm_t_factors:
                stretched = PropagationSettings(
                    t_max=settings.t_max * factor, dt0=settings.dt0,
                    step_rule=settings.step_rule, scheme=settings.scheme,
                    unitarity_tol=settings.unitarity_tol,
                    hard_tol=settings.hard_tol,
                    overflow_limit=settings.overflow_limit)
                c3, c4, _ = _ratios_at(generator, g_star, stretched, triple, quad)
                if max(abs(c3), abs(c4)) > refine.threshold:
                    confirmed = False
                    break
            if not confirmed:
                continue
            candidates.append({
                "g_star": g_star, "root_r3": root3, "root_r4": root4,
                "r3": r3, "r4": r4,
            })
    if not candidates:
        return None
    return min(candidates, key=lambda c: max(abs(c["r3"]), abs(c["r4"])))
