"""Fully discrete schemes and the simulation driver.

Conservative schemes advance ``w`` and recover ``c = C(w)`` per cell after
each step. The non-conservative comparison scheme (``NCS1``/``NCS2``)
advances ``c`` directly through the linearised equation
``W'(c) c_t = -u c_z + Da c_zz`` and so does not conserve the discrete mass.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .errors import SolverError
from .isotherm import NEG_TOL, RHO0_TOL, LangmuirParams, denominator, forward_map_W, inverse_map_C
from .spatial import (
    Grid,
    InjectionProfile,
    PhysicalParams,
    StateField,
    diffusive_fluxes,
    ghost_inlet,
    split_rhs,
)
from .stage_solver import NewtonConfig, build_rhs_G, newton_solve_stage


class SchemeKind(enum.Enum):
    UPWIND_FE = "upwind-fe"
    EXPLICIT_RK2 = "explicit-rk2"
    IMEX_RK2 = "imex-rk2"
    NCS1 = "ncs1"
    NCS2 = "ncs2"

    @property
    def conservative(self) -> bool:
        return self not in (SchemeKind.NCS1, SchemeKind.NCS2)


class BoundarySampling(enum.Enum):
    """When ``c_inj`` is sampled inside a step.

    ``STAGE``: steps are clipped at injection breakpoints; the first stage
    uses ``c_inj(t_n)`` and the second ``c_inj(t_n + dt/2)``.
    ``STEP_START``: no clipping at injection breakpoints and ``c_inj(t_n)`` is
    held for the whole step, so a pulse injects for a whole number of steps.
    """

    STAGE = "stage"
    STEP_START = "step-start"


@dataclass(frozen=True)
class Column:
    """Everything a step needs besides the state."""

    iso: LangmuirParams
    physics: PhysicalParams
    grid: Grid
    injection: InjectionProfile
    sampling: BoundarySampling = BoundarySampling.STAGE
    rho_tol: float = RHO0_TOL
    neg_tol: float = NEG_TOL

    def c_inj(self, t_n: float, dt: float, stage: int) -> np.ndarray:
        if stage == 0 or self.sampling is BoundarySampling.STEP_START:
            return self.injection(t_n)
        return self.injection(t_n + 0.5 * dt)


@dataclass
class StepStats:
    """Accumulated over a run: boundary mass fluxes and Newton iteration counts."""

    inflow: np.ndarray
    outflow: np.ndarray
    newton_iterations: list = field(default_factory=list)
    newton_histories: list = field(default_factory=list)

    @classmethod
    def empty(cls, n: int) -> StepStats:
        return cls(np.zeros(n), np.zeros(n))

    def add_flux(self, dt: float, fhat: np.ndarray):
        self.inflow += dt * fhat[:, 0]
        self.outflow += dt * fhat[:, -1]


def _finish(w: np.ndarray, state: StateField, col: Column) -> StateField:
    c, rho = inverse_map_C(w, col.iso, tol=col.rho_tol, guess=state.rho,
                           neg_tol=col.neg_tol, return_rho=True)
    return StateField(w, c, np.atleast_1d(rho))


# -- conservative schemes -----------------------------------------------------

def step_upwind_fe(state: StateField, dt: float, t_n: float, col: Column,
                   stats: StepStats | None = None) -> StateField:
    L, D, fhat = split_rhs(state, col.physics, col.grid, col.c_inj(t_n, dt, 0), col.iso, order=1)
    if stats is not None:
        stats.add_flux(dt, fhat)
    return _finish(state.w + dt * (L + D), state, col)


def step_explicit_rk2(state: StateField, dt: float, t_n: float, col: Column,
                      stats: StepStats | None = None) -> StateField:
    L, D, _ = split_rhs(state, col.physics, col.grid, col.c_inj(t_n, dt, 0), col.iso)
    half = _finish(state.w + 0.5 * dt * (L + D), state, col)
    L, D, fhat = split_rhs(half, col.physics, col.grid, col.c_inj(t_n, dt, 1), col.iso)
    if stats is not None:
        stats.add_flux(dt, fhat)
    return _finish(state.w + dt * (L + D), half, col)


def step_imex_rk2(state: StateField, dt: float, t_n: float, col: Column,
                  newton_cfg: NewtonConfig | None = None,
                  stats: StepStats | None = None) -> StateField:
    L, _, _ = split_rhs(state, col.physics, col.grid, col.c_inj(t_n, dt, 0), col.iso)
    G = build_rhs_G(state.w, dt, L)
    stage = newton_solve_stage(G, state.c, col.iso, col.grid, col.physics, dt, newton_cfg,
                               neg_tol=col.neg_tol)
    half = StateField(stage.w, stage.c, state.rho)
    L, D, fhat = split_rhs(half, col.physics, col.grid, col.c_inj(t_n, dt, 1), col.iso)
    if stats is not None:
        stats.add_flux(dt, fhat)
        stats.newton_iterations.append(stage.iterations)
        stats.newton_histories.append(stage.history)
    return _finish(state.w + dt * (L + D), state, col)


# -- non-conservative comparison scheme ------------------------------------

def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _ncs_rate(c: np.ndarray, c_inj, col: Column, order: int) -> tuple[np.ndarray, np.ndarray]:
    """``dc/dt = W'(c)^{-1} r`` where ``r`` is the flux difference of ``u c - Da c_z``."""
    u, grid = col.physics.u, col.grid
    fhat = np.empty((c.shape[0], grid.m + 1))
    fhat[:, 0] = u * np.asarray(c_inj, dtype=float)
    if order == 1:
        fhat[:, 1:] = u * c
    else:
        left = ghost_inlet(c[:, 0], 1, c_inj, col.physics, grid)
        ext = np.concatenate([left[:, None], c, c[:, -1:]], axis=1)
        slope = _minmod(ext[:, 1:-1] - ext[:, :-2], ext[:, 2:] - ext[:, 1:-1])
        fhat[:, 1:] = u * (c + 0.5 * slope)
    ghat = diffusive_fluxes(c, col.physics, grid)
    r = -np.diff(fhat - ghat, axis=1) / grid.dz
    # Sherman-Morrison on W'(c) = D + tau b^T, one cell per column
    iso = col.iso
    p = denominator(c, iso)
    d = 1.0 + iso.eta[:, None] / p
    tau = -iso.eta[:, None] * c / p**2
    Dr, Dt = r / d, tau / d
    b = iso.b[:, None]
    coef = (b * Dr).sum(axis=0) / (1.0 + (b * Dt).sum(axis=0))
    return Dr - Dt * coef, fhat


def step_ncs(state: StateField, dt: float, t_n: float, col: Column, order: int = 1,
             stats: StepStats | None = None) -> StateField:
    """Advance concentrations directly (upwind/FE for order 1, minmod MUSCL/midpoint for order 2)."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if order == 1:
        rate, fhat = _ncs_rate(state.c, col.c_inj(t_n, dt, 0), col, 1)
        c = state.c + dt * rate
    else:
        rate, _ = _ncs_rate(state.c, col.c_inj(t_n, dt, 0), col, 2)
        half = state.c + 0.5 * dt * rate
        rate, fhat = _ncs_rate(half, col.c_inj(t_n, dt, 1), col, 2)
        c = state.c + dt * rate
    if stats is not None:
        stats.add_flux(dt, fhat)
    return StateField(forward_map_W(c, col.iso), c, None)


# -- stability bounds ---------------------------------------------------------

def explicit_stability_bound(physics: PhysicalParams, grid: Grid, C0: float = 1.0) -> float:
    """Largest ``dt/dz`` for explicit schemes: ``C0 / (u + 2 Da / dz)``."""
    return C0 / (physics.u + 2.0 * physics.Da / grid.dz)


def imex_stability_bound(physics: PhysicalParams, C1: float = 1.0) -> float:
    """Largest ``dt/dz`` for IMEX-RK2: ``C1 / u``, independent of ``Da``."""
    return C1 / physics.u


# -- driver -------------------------------------------------------------------

@dataclass
class RunConfig:
    grid: Grid
    physics: PhysicalParams
    iso: LangmuirParams
    injection: InjectionProfile
    dt_over_dz: float
    t_final: float
    snapshots: tuple = ()
    scheme: SchemeKind = SchemeKind.IMEX_RK2
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    sampling: BoundarySampling = BoundarySampling.STAGE
    rho_tol: float = RHO0_TOL
    undershoot_tol: float = 1e-2
    initial_c: np.ndarray | None = None
    name: str = "run"

    def __post_init__(self):
        if not self.dt_over_dz > 0:
            raise ValueError("dt_over_dz must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        snaps = tuple(sorted(float(s) for s in self.snapshots)) or (float(self.t_final),)
        if snaps[0] < 0 or snaps[-1] > self.t_final:
            raise ValueError("snapshot times must lie in [0, t_final]")
        self.snapshots = snaps
        if self.injection.n_components != self.iso.n_components:
            raise ValueError("injection profile and isotherm disagree on N")

    @property
    def dt(self) -> float:
        return self.dt_over_dz * self.grid.dz

    def column(self) -> Column:
        # WENO undershoots near sharp fronts are tolerated (and clamped for the
        # inversion only) up to a fraction of the largest conserved value that
        # is injected or present initially
        w_max = max(float(np.max(forward_map_W(self.injection.max_concentration(), self.iso))),
                    float(np.max(self.initial_state().w)))
        neg_tol = max(self.undershoot_tol * w_max, NEG_TOL)
        return Column(self.iso, self.physics, self.grid, self.injection, self.sampling,
                      self.rho_tol, neg_tol)

    def initial_state(self) -> StateField:
        N, m = self.iso.n_components, self.grid.m
        if self.initial_c is None:
            return StateField.zeros(N, m)
        c = np.broadcast_to(np.asarray(self.initial_c, dtype=float), (N, m)).copy()
        return StateField.from_c(c, self.iso)


@dataclass
class Snapshot:
    time: float
    state: StateField
    record: diagnostics.DiagnosticsRecord


def take_step(state: StateField, dt: float, t_n: float, col: Column, scheme: SchemeKind,
              newton_cfg: NewtonConfig | None = None, stats: StepStats | None = None) -> StateField:
    if scheme is SchemeKind.UPWIND_FE:
        return step_upwind_fe(state, dt, t_n, col, stats)
    if scheme is SchemeKind.EXPLICIT_RK2:
        return step_explicit_rk2(state, dt, t_n, col, stats)
    if scheme is SchemeKind.IMEX_RK2:
        return step_imex_rk2(state, dt, t_n, col, newton_cfg, stats)
    return step_ncs(state, dt, t_n, col, 1 if scheme is SchemeKind.NCS1 else 2, stats)


def _breakpoints(cfg: RunConfig) -> list[float]:
    pts = set(cfg.snapshots) | {cfg.t_final}
    if cfg.sampling is BoundarySampling.STAGE:
        pts |= {t for t in cfg.injection.breakpoints() if 0 < t < cfg.t_final}
    return sorted(t for t in pts if t > 0)


def run(cfg: RunConfig, stats: StepStats | None = None, callback=None) -> list[Snapshot]:
    """Advance from ``t = 0`` to ``cfg.t_final``, recording the requested snapshots.

    A step that would overshoot a snapshot (or, with stage sampling, an
    injection breakpoint) is shortened to land on it exactly.
    ``callback(t, state)`` is called after every step.
    """
    col = cfg.column()
    stats = stats if stats is not None else StepStats.empty(cfg.iso.n_components)
    dz, dt = cfg.grid.dz, cfg.dt
    state = cfg.initial_state()
    bounds = np.maximum(cfg.injection.max_concentration(), state.c.max(axis=1))
    out = []
    snaps = list(cfg.snapshots)

    def emit(t):
        rec = diagnostics.make_record(t, state.w, state.c, dz, bounds, stats.inflow, stats.outflow,
                                      eta=cfg.iso.eta)
        out.append(Snapshot(t, state.copy(), rec))

    t = 0.0
    while snaps and snaps[0] <= 0.0:
        snaps.pop(0)
        emit(0.0)
    for target in _breakpoints(cfg):
        while t < target:
            h = dt
            if t + h >= target - 1e-9 * dt:
                h, t_next = target - t, target
            else:
                t_next = t + h
            try:
                state = take_step(state, h, t, col, cfg.scheme, cfg.newton, stats)
            except SolverError as exc:
                exc.time = t
                raise
            except ValueError as exc:
                raise SolverError(f"step from t={t:.6g} failed: {exc}", time=t) from exc
            t = t_next
            if callback is not None:
                callback(t, state)
        while snaps and snaps[0] <= t:
            snaps.pop(0)
            emit(t)
    return out
