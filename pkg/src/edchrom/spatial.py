"""Spatial discretization on the normalized column ``z in [0, 1]``.

Cell ``j`` (1-based) sits at ``z_j = (j - 1/2) dz``. Interface fluxes are
stored in ``(N, m + 1)`` arrays where slot ``k`` is the interface
``z_{k+1/2}``; slot 0 is the inlet and slot ``m`` the outlet.

The inlet slot of the convective flux array carries the prescribed total
flux ``u c_inj(t)`` and the inlet slot of the diffusive flux array is zero,
so that every row of the right-hand side, boundary rows included, is the
plain flux difference ``-(F_{j+1/2} - F_{j-1/2}) / dz`` with ``F = f - g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .isotherm import LangmuirParams, forward_map_W

WENO_EPS = 1e-6
N_GHOST_IN = 2
N_GHOST_OUT = 3


@dataclass(frozen=True)
class Grid:
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("a grid needs at least 2 cells")

    @property
    def dz(self) -> float:
        return 1.0 / self.m

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(1, self.m + 1) - 0.5) * self.dz

    @property
    def interfaces(self) -> np.ndarray:
        return np.arange(self.m + 1) * self.dz


@dataclass(frozen=True)
class PhysicalParams:
    """Interstitial velocity ``u`` and apparent axial dispersion ``Da``.

    When ``Nt`` (theoretical plates) is given, ``Da = L u / (2 Nt)`` with
    ``L = 1`` overrides any ``Da`` passed in.
    """

    u: float
    Da: float = 0.0
    Nt: float | None = None

    def __post_init__(self):
        if not self.u > 0:
            raise ValueError("u must be positive")
        if self.Nt is not None:
            if not self.Nt > 0:
                raise ValueError("Nt must be positive")
            object.__setattr__(self, "Da", self.u / (2.0 * self.Nt))
        if self.Da < 0:
            raise ValueError("Da must be non-negative")


@dataclass(frozen=True)
class InjectionSegment:
    t_start: float
    t_end: float
    c: tuple

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(x) for x in self.c))
        if not self.t_end > self.t_start:
            raise ValueError("injection segment needs t_end > t_start")
        if any(x < 0 for x in self.c):
            raise ValueError("injected concentrations must be non-negative")


@dataclass(frozen=True)
class InjectionProfile:
    """Piecewise-constant ``c_inj(t)``; each segment is active on ``[t_start, t_end)``."""

    n_components: int
    segments: tuple = ()

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: s.t_start))
        for s in segs:
            if len(s.c) != self.n_components:
                raise ValueError("segment concentration has the wrong length")
        for s0, s1 in zip(segs, segs[1:]):
            if s1.t_start < s0.t_end:
                raise ValueError("injection segments overlap")
        object.__setattr__(self, "segments", segs)

    def __call__(self, t: float) -> np.ndarray:
        for s in self.segments:
            if s.t_start <= t < s.t_end:
                return np.array(s.c)
        return np.zeros(self.n_components)

    def breakpoints(self) -> list[float]:
        pts = set()
        for s in self.segments:
            pts.add(s.t_start)
            if math.isfinite(s.t_end):
                pts.add(s.t_end)
        return sorted(pts)

    def max_concentration(self) -> np.ndarray:
        out = np.zeros(self.n_components)
        for s in self.segments:
            out = np.maximum(out, s.c)
        return out


@dataclass
class StateField:
    """Conserved values ``w`` and concentrations ``c``, both ``(N, m)``."""

    w: np.ndarray
    c: np.ndarray
    rho: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def zeros(cls, n_components: int, m: int) -> StateField:
        return cls(np.zeros((n_components, m)), np.zeros((n_components, m)), np.ones(m))

    @classmethod
    def from_c(cls, c, iso: LangmuirParams) -> StateField:
        c = np.array(c, dtype=float)
        return cls(forward_map_W(c, iso), c)

    def copy(self) -> StateField:
        rho = None if self.rho is None else self.rho.copy()
        return StateField(self.w.copy(), self.c.copy(), rho)


# -- ghost cells -------------------------------------------------------------

def ghost_inlet(c_j, j: int, c_inj, params: PhysicalParams, grid: Grid):
    """Linear extrapolation to ghost ``1 - j`` honouring ``u c - Da c_z = u c_inj``.

    The line through ``(-s, ghost)`` and ``(s, c_j)``, ``s = (j - 1/2) dz``,
    meets the inlet condition at ``z = 0`` when
    ``ghost = ((Da/u - s) c_j + 2 s c_inj) / (Da/u + s)``; constants are
    reproduced for every ``Da`` and ``Da = 0`` gives ``2 c_inj - c_j``.
    """
    s = (j - 0.5) * grid.dz
    r = params.Da / params.u
    return ((r - s) * np.asarray(c_j) + 2.0 * s * np.asarray(c_inj)) / (r + s)


def ghost_outlet(field: np.ndarray, j: int) -> np.ndarray:
    """Mirror ghost ``m + j`` = cell ``m + 1 - j`` (zero gradient at ``z = 1``)."""
    return field[..., field.shape[-1] - j]


def pad_with_ghosts(v: np.ndarray, v_inj, params: PhysicalParams, grid: Grid) -> np.ndarray:
    """``(N, m + 5)`` array holding cells ``-1 .. m + 3``; cell ``k`` is at column ``k + 1``."""
    N, m = v.shape
    out = np.empty((N, m + N_GHOST_IN + N_GHOST_OUT))
    out[:, N_GHOST_IN:N_GHOST_IN + m] = v
    for j in range(1, N_GHOST_IN + 1):
        out[:, N_GHOST_IN - j] = ghost_inlet(v[:, j - 1], j, v_inj, params, grid)
    for j in range(1, N_GHOST_OUT + 1):
        out[:, N_GHOST_IN + m - 1 + j] = ghost_outlet(v, j)
    return out


# -- WENO5 -------------------------------------------------------------------

def weno5_reconstruct(v0, v1, v2, v3, v4, eps: float = WENO_EPS):
    """Jiang-Shu WENO5 value at the right edge of the cell holding ``v2``."""
    b0 = 13.0 / 12.0 * (v0 - 2 * v1 + v2) ** 2 + 0.25 * (v0 - 4 * v1 + 3 * v2) ** 2
    b1 = 13.0 / 12.0 * (v1 - 2 * v2 + v3) ** 2 + 0.25 * (v1 - v3) ** 2
    b2 = 13.0 / 12.0 * (v2 - 2 * v3 + v4) ** 2 + 0.25 * (3 * v2 - 4 * v3 + v4) ** 2
    a0 = 0.1 / (eps + b0) ** 2
    a1 = 0.6 / (eps + b1) ** 2
    a2 = 0.3 / (eps + b2) ** 2
    q0 = (2 * v0 - 7 * v1 + 11 * v2) / 6.0
    q1 = (-v1 + 5 * v2 + 2 * v3) / 6.0
    q2 = (2 * v2 + 5 * v3 - v4) / 6.0
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


def _split_flux_weno(fp: np.ndarray, fm: np.ndarray, n: int) -> np.ndarray:
    """Sum of left-biased ``f+`` and right-biased ``f-`` reconstructions.

    ``fp``/``fm`` are padded so that interface ``k`` (k = 0 .. n-1) uses
    columns ``k .. k+4`` for ``f+`` and ``k+1 .. k+5`` for ``f-``.
    """
    s = [fp[..., i:i + n] for i in range(5)]
    plus = weno5_reconstruct(*s)
    t = [fm[..., i + 1:i + 1 + n] for i in range(5)]
    minus = weno5_reconstruct(t[4], t[3], t[2], t[1], t[0])
    return plus + minus


def weno5_convective_fluxes(state: StateField, params: PhysicalParams, grid: Grid,
                            c_inj, iso: LangmuirParams) -> np.ndarray:
    """Interface fluxes of ``f(w) = u C(w)`` with Lax-Friedrichs splitting ``alpha = u``.

    Slots ``1 .. m`` hold WENO5 fluxes; slot 0 holds the prescribed inlet
    total flux ``u c_inj``.
    """
    if grid.m < 5:
        raise ValueError("WENO5 needs at least 5 cells")
    u = params.u
    c_inj = np.asarray(c_inj, dtype=float)
    cp = pad_with_ghosts(state.c, c_inj, params, grid)
    wp = pad_with_ghosts(state.w, forward_map_W(c_inj, iso), params, grid)
    fp = 0.5 * u * (cp + wp)
    fm = 0.5 * u * (cp - wp)
    m = grid.m
    fhat = np.empty((state.c.shape[0], m + 1))
    # padded column k+1 is cell k; interface k+1/2 needs cells k-2..k+3
    fhat[:, 1:] = _split_flux_weno(fp, fm, m)
    fhat[:, 0] = u * c_inj
    return fhat


def upwind_fluxes(state: StateField, params: PhysicalParams, grid: Grid, c_inj) -> np.ndarray:
    """First-order upwind fluxes ``u c_j`` (all characteristic speeds are positive)."""
    fhat = np.empty((state.c.shape[0], grid.m + 1))
    fhat[:, 1:] = params.u * state.c
    fhat[:, 0] = params.u * np.asarray(c_inj, dtype=float)
    return fhat


def weno5_periodic_fluxes(w: np.ndarray, u: float) -> np.ndarray:
    """WENO5 fluxes for the linear flux ``f = u w`` on a periodic grid.

    Test harness only: returns ``(..., m)`` fluxes at interfaces ``j + 1/2``.
    """
    n = w.shape[-1]
    pad = np.concatenate([w[..., -3:], w, w[..., :3]], axis=-1)
    fp = u * pad
    fm = np.zeros_like(pad)
    # interface j+1/2 (j = 0..n-1) needs cells j-2..j+2 for f+: columns j+1..j+5
    return _split_flux_weno(fp[..., 1:], fm[..., 1:], n)


# -- diffusion ---------------------------------------------------------------

def diffusive_fluxes(c: np.ndarray, params: PhysicalParams, grid: Grid) -> np.ndarray:
    """Centered ``Da (c_{j+1} - c_j) / dz``; zero at the outlet, inlet slot unused (zero)."""
    g = np.zeros((c.shape[0], grid.m + 1))
    if params.Da:
        g[:, 1:-1] = params.Da * np.diff(c, axis=1) / grid.dz
    return g


def flux_divergence(fhat: np.ndarray, ghat: np.ndarray, grid: Grid) -> np.ndarray:
    return -np.diff(fhat - ghat, axis=1) / grid.dz


def matrix_A(grid: Grid, params: PhysicalParams):
    """Three diagonals ``(lower, main, upper)`` of the diffusion matrix (scaled by ``Da/dz^2``)."""
    mu = params.Da / grid.dz**2
    main = np.full(grid.m, -2.0 * mu)
    main[0] = main[-1] = -mu
    off = np.full(grid.m - 1, mu)
    return off, main, off.copy()


def apply_A(c: np.ndarray, A) -> np.ndarray:
    """Row-vector product ``c . A`` for each component (``A`` is symmetric)."""
    lower, main, upper = A
    out = c * main
    out[:, 1:] += c[:, :-1] * upper
    out[:, :-1] += c[:, 1:] * lower
    return out


def split_rhs(state: StateField, params: PhysicalParams, grid: Grid, c_inj,
              iso: LangmuirParams, order: int = 5):
    """Convective part (inlet flux included) and diffusive part of ``w'(t)``."""
    if order == 5:
        fhat = weno5_convective_fluxes(state, params, grid, c_inj, iso)
    elif order == 1:
        fhat = upwind_fluxes(state, params, grid, c_inj)
    else:
        raise ValueError("order must be 1 or 5")
    L = -np.diff(fhat, axis=1) / grid.dz
    ghat = diffusive_fluxes(state.c, params, grid)
    D = np.diff(ghat, axis=1) / grid.dz
    return L, D, fhat


def assemble_rhs(state: StateField, params: PhysicalParams, grid: Grid, c_inj,
                 iso: LangmuirParams, order: int = 5) -> np.ndarray:
    L, D, _ = split_rhs(state, params, grid, c_inj, iso, order)
    return L + D


def mass_flux_balance(fhat: np.ndarray) -> np.ndarray:
    """Net boundary inflow ``u c_inj - f_{m+1/2}`` per component (compensated)."""
    return np.array([math.fsum((row[0], -row[-1])) for row in fhat])
