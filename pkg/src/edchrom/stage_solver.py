"""Implicit stage of the IMEX-RK2 scheme.

The stage equation ``w - (dt/2) D(w) = G`` is rewritten in the unknown
concentrations ``c`` (so the diffusion term becomes linear)::

    F(c) = W*(c) - (dt/2) c.A - G = 0

and solved by Newton's method. The Jacobian is block tridiagonal with full
``N x N`` diagonal blocks ``E^k + (1 or 2) theta I`` and off-diagonal blocks
``-theta I``, ``theta = Da dt / (2 dz^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import SolverError
from .isotherm import NEG_TOL, LangmuirParams, denominator, forward_map_W, inverse_map_C, jacobian_W_batch
from .spatial import Grid, PhysicalParams, apply_A, matrix_A


@dataclass
class BlockTridiagonal:
    """``diag`` is ``(m, N, N)``; ``lower[k]`` couples row ``k+1`` to ``k``, ``upper[k]`` row ``k`` to ``k+1``."""

    diag: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        m, N, N2 = self.diag.shape
        if N != N2 or self.lower.shape != (m - 1, N, N) or self.upper.shape != (m - 1, N, N):
            raise ValueError("inconsistent block dimensions")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply to an ``(N, m)`` array of block vectors."""
        X = x.T
        y = np.einsum("kij,kj->ki", self.diag, X)
        y[1:] += np.einsum("kij,kj->ki", self.lower, X[:-1])
        y[:-1] += np.einsum("kij,kj->ki", self.upper, X[1:])
        return y.T

    def to_dense(self) -> np.ndarray:
        m, N, _ = self.diag.shape
        A = np.zeros((N * m, N * m))
        for k in range(m):
            A[k * N:(k + 1) * N, k * N:(k + 1) * N] = self.diag[k]
            if k + 1 < m:
                A[(k + 1) * N:(k + 2) * N, k * N:(k + 1) * N] = self.lower[k]
                A[k * N:(k + 1) * N, (k + 1) * N:(k + 2) * N] = self.upper[k]
        return A


@dataclass
class NewtonConfig:
    tol: float = 1e-12
    max_iter: int = 25
    initial_guess: str = "previous"  # or "decoupled": columnwise inverse of G
    min_denominator: float = 0.5

    def __post_init__(self):
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("NewtonConfig needs tol > 0 and max_iter >= 1")
        if self.initial_guess not in ("previous", "decoupled"):
            raise ValueError("initial_guess must be 'previous' or 'decoupled'")


@dataclass
class StageResult:
    c: np.ndarray
    w: np.ndarray
    iterations: int
    history: list = field(default_factory=list)


# -- block Thomas sweep --------------------------------------------------------

@numba.njit(cache=True)
def _lu_factor(a, piv):
    # in-place partial-pivoting LU of a small dense block; returns False if singular
    n = a.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale = max(scale, abs(a[i, j]))
    if scale == 0.0:
        return False
    for k in range(n):
        p = k
        big = abs(a[k, k])
        for i in range(k + 1, n):
            if abs(a[i, k]) > big:
                big = abs(a[i, k])
                p = i
        piv[k] = p
        if big <= 1e-15 * scale:
            return False
        if p != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = tmp
        for i in range(k + 1, n):
            a[i, k] /= a[k, k]
            for j in range(k + 1, n):
                a[i, j] -= a[i, k] * a[k, j]
    return True


@numba.njit(cache=True)
def _lu_solve(a, piv, b):
    # b is (n,) or (n, r), overwritten with the solution
    n = a.shape[0]
    for k in range(n):
        p = piv[k]
        if p != k:
            for c in range(b.shape[1]):
                tmp = b[k, c]
                b[k, c] = b[p, c]
                b[p, c] = tmp
    for c in range(b.shape[1]):
        for i in range(n):
            s = b[i, c]
            for j in range(i):
                s -= a[i, j] * b[j, c]
            b[i, c] = s
        for i in range(n - 1, -1, -1):
            s = b[i, c]
            for j in range(i + 1, n):
                s -= a[i, j] * b[j, c]
            b[i, c] = s / a[i, i]


@numba.njit(cache=True)
def _block_thomas(diag, lower, upper, rhs):
    m, n, _ = diag.shape
    lu = diag.copy()
    piv = np.zeros((m, n), dtype=np.int64)
    gamma = np.zeros((max(m - 1, 0), n, n))
    y = rhs.copy()
    for k in range(m):
        if k > 0:
            # lu[k] -= lower[k-1] @ gamma[k-1];  y[k] -= lower[k-1] @ y[k-1]
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for l in range(n):
                        s += lower[k - 1, i, l] * gamma[k - 1, l, j]
                    lu[k, i, j] -= s
                s = 0.0
                for l in range(n):
                    s += lower[k - 1, i, l] * y[k - 1, l]
                y[k, i] -= s
        if not _lu_factor(lu[k], piv[k]):
            return k, y
        yk = y[k].reshape((n, 1)).copy()
        _lu_solve(lu[k], piv[k], yk)
        y[k] = yk[:, 0]
        if k < m - 1:
            g = upper[k].copy()
            _lu_solve(lu[k], piv[k], g)
            gamma[k] = g
    for k in range(m - 2, -1, -1):
        for i in range(n):
            s = 0.0
            for l in range(n):
                s += gamma[k, i, l] * y[k + 1, l]
            y[k, i] -= s
    return -1, y


def block_tridiag_solve(A: BlockTridiagonal, rhs: np.ndarray) -> np.ndarray:
    """Solve ``A x = rhs`` for ``rhs`` of shape ``(N, m)`` by a block LU sweep.

    No pivoting between blocks; each pivot block is factored with partial
    pivoting. Raises :class:`SolverError` naming the first singular pivot.
    """
    diag = np.ascontiguousarray(A.diag, dtype=float)
    bad, x = _block_thomas(diag, np.ascontiguousarray(A.lower, dtype=float),
                           np.ascontiguousarray(A.upper, dtype=float),
                           np.ascontiguousarray(np.asarray(rhs, dtype=float).T))
    if bad >= 0:
        raise SolverError(f"singular pivot block at index {bad}", block=int(bad))
    return x.T


# -- stage system ---------------------------------------------------------------

def build_rhs_G(w_n: np.ndarray, dt: float, L: np.ndarray) -> np.ndarray:
    return w_n + 0.5 * dt * L


def stage_residual(c: np.ndarray, G: np.ndarray, iso: LangmuirParams, grid: Grid,
                   params: PhysicalParams, dt: float, A=None) -> np.ndarray:
    if A is None:
        A = matrix_A(grid, params)
    return forward_map_W(c, iso) - 0.5 * dt * apply_A(c, A) - G


def newton_jacobian(c: np.ndarray, iso: LangmuirParams, grid: Grid,
                    params: PhysicalParams, dt: float) -> BlockTridiagonal:
    theta = 0.5 * dt * params.Da / grid.dz**2
    N, m = c.shape
    diag = jacobian_W_batch(c, iso)
    eye = np.eye(N)
    diag += 2.0 * theta * eye
    diag[0] -= theta * eye
    diag[-1] -= theta * eye
    off = np.broadcast_to(-theta * eye, (m - 1, N, N)).copy()
    return BlockTridiagonal(diag, off, off.copy())


def _scaled_norm(F: np.ndarray, G: np.ndarray) -> float:
    return float(np.max(np.abs(F))) / (1.0 + float(np.max(np.abs(G))))


def newton_solve_stage(G: np.ndarray, warm_start_c: np.ndarray, iso: LangmuirParams,
                       grid: Grid, params: PhysicalParams, dt: float,
                       cfg: NewtonConfig | None = None, neg_tol: float = NEG_TOL) -> StageResult:
    """Newton iteration for ``F(c) = 0`` starting from the previous step's ``c``.

    Without dispersion the cells decouple and the stage is a columnwise
    inversion of ``G``, which is returned directly (zero iterations); small
    negative entries down to ``-neg_tol`` are clamped for that inversion.
    Iterates whose ``1 + b.c`` falls below ``cfg.min_denominator`` in some
    cell are pulled back halfway toward the previous iterate.
    """
    cfg = cfg or NewtonConfig()
    if params.Da == 0.0:
        c = inverse_map_C(G, iso, neg_tol=neg_tol)
        return StageResult(c, forward_map_W(c, iso), 0, [0.0])

    A = matrix_A(grid, params)
    if cfg.initial_guess == "decoupled":
        c = inverse_map_C(np.maximum(G, 0.0), iso)
    else:
        c = np.array(warm_start_c, dtype=float)
    F = stage_residual(c, G, iso, grid, params, dt, A)
    history = [_scaled_norm(F, G)]
    it = 0
    while history[-1] > cfg.tol:
        if it == cfg.max_iter:
            raise SolverError(
                f"Newton did not converge in {cfg.max_iter} iterations "
                f"(scaled residual {history[-1]:.3e})", history=history)
        J = newton_jacobian(c, iso, grid, params, dt)
        delta = block_tridiag_solve(J, F)
        c_new = c - delta
        for _ in range(60):
            if np.all(denominator(c_new, iso) > cfg.min_denominator):
                break
            c_new = 0.5 * (c_new + c)
        else:
            raise SolverError("Newton iterate left the admissible region", history=history)
        c = c_new
        F = stage_residual(c, G, iso, grid, params, dt, A)
        history.append(_scaled_norm(F, G))
        it += 1
    return StageResult(c, forward_map_W(c, iso), it, history)
