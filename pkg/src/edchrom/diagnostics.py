"""Observables used to judge simulations: mass, oscillations, fronts, orders."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .isotherm import LangmuirParams


@dataclass
class DiagnosticsRecord:
    time: float
    total_mass: np.ndarray
    oscillation_index: float
    front_position: float
    c_min: np.ndarray
    c_max: np.ndarray
    fronts: np.ndarray = field(default=None, repr=False)
    inflow: np.ndarray = field(default=None, repr=False)
    outflow: np.ndarray = field(default=None, repr=False)


def total_mass(w: np.ndarray, dz: float) -> np.ndarray:
    """``sum_j w_ij dz`` per component, with exactly rounded summation."""
    w = np.atleast_2d(w)
    return np.array([math.fsum(row) * dz for row in w])


def _envelope_tv(v: np.ndarray) -> float:
    # total variation of the piecewise-monotone path first -> extreme ->
    # other extreme -> last, taking whichever extreme order the data allow
    lo, hi = v.min(), v.max()
    i_lo, j_lo = np.flatnonzero(v == lo)[[0, -1]]
    i_hi, j_hi = np.flatnonzero(v == hi)[[0, -1]]
    best = np.inf
    if i_lo <= j_hi:
        best = abs(v[0] - lo) + (hi - lo) + abs(v[-1] - hi)
    if i_hi <= j_lo:
        best = min(best, abs(hi - v[0]) + (hi - lo) + abs(v[-1] - lo))
    return best


def oscillation_index(c: np.ndarray, reference_bounds, w: np.ndarray | None = None,
                      eta: np.ndarray | None = None) -> float:
    """Relative size of spurious oscillations, maximised over components.

    For each component with upper bound ``U`` (largest injected value) the
    index is ``(overshoot above U + undershoot below 0 + TV excess) / U``
    where the TV excess is the total variation beyond that of the monotone
    pieces joining the end values through the global extremes. Monotone or
    single-hump profiles inside ``[0, U]`` score 0.

    Concentrations coming out of the inversion are clamped at zero, so when
    the conserved values ``w`` (and ``eta``) are supplied the undershoot is
    read from them instead, using ``c ~ w / (1 + eta)`` near zero.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    n = c.shape[0]
    bounds = np.broadcast_to(np.asarray(reference_bounds, dtype=float), (n,))
    under = np.maximum(0.0, -c.min(axis=1))
    if w is not None:
        w = np.atleast_2d(np.asarray(w, dtype=float))
        if not np.all(np.isfinite(w)):
            return math.inf
        k = 1.0 + (np.zeros(n) if eta is None else np.asarray(eta, dtype=float))
        under = np.maximum(under, -w.min(axis=1) / k)
    worst = 0.0
    for v, U, neg in zip(c, bounds, under):
        if not np.all(np.isfinite(v)):
            return math.inf
        scale = U if U > 0 else max(float(np.abs(v).max()), 1.0)
        over = max(0.0, float(v.max()) - U) + float(neg)
        tv = float(np.abs(np.diff(v)).sum())
        excess = max(0.0, tv - _envelope_tv(v))
        worst = max(worst, (over + excess) / scale)
    return worst


def front_position(c: np.ndarray, component: int, dz: float) -> float:
    """Interface position of the steepest jump of one component; NaN if flat.

    Ties go to the downstream-most interface.
    """
    v = np.atleast_2d(c)[component]
    jumps = np.abs(np.diff(v))
    if jumps.size == 0 or jumps.max() == 0.0:
        return math.nan
    k = jumps.size - 1 - int(np.argmax(jumps[::-1]))
    return (k + 1) * dz


def _longest_run(v: np.ndarray, rel_tol: float, floor: float) -> tuple[int, int]:
    # (first cell, length) of the longest flat run; length 0 if none
    best, start = 0, 0
    n = v.size
    i = 0
    while i < n:
        if v[i] < floor:
            i += 1
            continue
        lo = hi = v[i]
        j = i
        while j + 1 < n and v[j + 1] >= floor:
            lo2, hi2 = min(lo, v[j + 1]), max(hi, v[j + 1])
            if hi2 - lo2 > rel_tol * hi2:
                break
            lo, hi, j = lo2, hi2, j + 1
        if j - i + 1 > best:
            best, start = j - i + 1, i
        i += 1
    return start, best


def longest_plateau(v: np.ndarray, dz: float, rel_tol: float = 1e-3,
                    floor: float = 1e-3) -> tuple[float, float]:
    """Longest run of cells whose values stay within ``rel_tol`` (relative to
    the run's maximum) and above ``floor``, as ``(width, mean level)``.

    Returns ``(0.0, 0.0)`` when no cell reaches ``floor``.
    """
    v = np.asarray(v, dtype=float)
    start, n = _longest_run(v, rel_tol, floor)
    return n * dz, (float(v[start:start + n].mean()) if n else 0.0)


def plateau_width(v: np.ndarray, dz: float, rel_tol: float = 1e-3, floor: float = 1e-3) -> float:
    return longest_plateau(v, dz, rel_tol, floor)[0]


def displacement_plateau(snapshots, component: int, displacer: int, dz: float,
                         min_width: float = 0.01, rel_tol: float = 1e-3,
                         floor: float = 1e-3) -> bool:
    """Whether ``component`` forms a plateau of the displacement train.

    ``snapshots`` is a time-ordered sequence of ``(N, m)`` concentration
    fields. Two consecutive fields must each hold a flat run of the component
    at least ``min_width`` long, the two levels must agree within ``rel_tol``,
    and in both fields the run must be joined to the displacer front without
    a gap: every cell between the last cell where the displacer exceeds
    ``floor`` and the start of the run carries a total concentration above
    ``floor``. Flat zones of a band that elutes ahead of the displacer are
    separated from it by such a gap.
    """
    found = []
    for c in snapshots:
        c = np.asarray(c, dtype=float)
        start, n = _longest_run(c[component], rel_tol, floor)
        if n * dz < min_width:
            found.append(None)
            continue
        level = float(c[component, start:start + n].mean())
        behind = np.flatnonzero(c[displacer] > floor)
        front = behind[-1] if behind.size else -1
        between = c[:, front + 1:start].sum(axis=0)
        found.append(level if front >= 0 and np.all(between > floor) else None)
    for h0, h1 in zip(found, found[1:]):
        if h0 is not None and h1 is not None and abs(h1 - h0) <= rel_tol * max(h0, h1):
            return True
    return False


def operating_line_check(iso: LangmuirParams, displacer_index: int, c_d: float) -> np.ndarray:
    """Which components can form a rectangular zone ahead of the displacer.

    The operating line is the chord of the displacer's single-component
    isotherm through the origin, slope ``s = a_d / (1 + b_d c_d)``. Component
    ``i`` is flagged when its own isotherm crosses that line at positive
    concentration, i.e. when ``a_i > s`` (equality is not a crossing). The
    displacer entry is always False.
    """
    if not c_d > 0:
        raise ValueError("displacer concentration must be positive")
    s = iso.a[displacer_index] / (1.0 + iso.b[displacer_index] * c_d)
    flags = iso.a > s
    flags[displacer_index] = False
    return flags


def self_convergence_order(coarse, medium, fine, dz: float = 1.0) -> float:
    """Observed order ``log2(|u_h - u_h/2|_1 / |u_h/2 - u_h/4|_1)``.

    The three solutions must already live on a common set of points.
    Returns NaN when the finer difference is at rounding level.
    """
    coarse, medium, fine = (np.asarray(x, dtype=float) for x in (coarse, medium, fine))
    e1 = float(np.abs(coarse - medium).sum()) * dz
    e2 = float(np.abs(medium - fine).sum()) * dz
    if e2 <= 1e-15 * max(float(np.abs(fine).sum()) * dz, 1e-300) or e1 == 0.0:
        return math.nan
    return math.log2(e1 / e2)


def restrict_point_values(fine: np.ndarray, factor: int) -> np.ndarray:
    """Sample a finer cell-centred grid at the coarse centres (``factor`` odd)."""
    if factor % 2 != 1:
        raise ValueError("cell centres only coincide for odd refinement factors")
    return np.asarray(fine)[..., factor // 2::factor]


def make_record(t: float, w: np.ndarray, c: np.ndarray, dz: float, bounds,
                inflow=None, outflow=None, eta=None) -> DiagnosticsRecord:
    fronts = np.array([front_position(c, i, dz) for i in range(c.shape[0])])
    return DiagnosticsRecord(
        time=t,
        total_mass=total_mass(w, dz),
        oscillation_index=oscillation_index(c, bounds, w, eta),
        front_position=fronts[0],
        c_min=c.min(axis=1),
        c_max=c.max(axis=1),
        fronts=fronts,
        inflow=None if inflow is None else np.array(inflow),
        outflow=None if outflow is None else np.array(outflow),
    )
