"""Langmuir algebra linking mobile-phase concentrations ``c`` and conserved
variables ``w = c + ((1 - eps)/eps) q(c)``.

Everything here works on a single state vector of length ``N`` or, where
noted, on a batch of states stored column-wise as an ``(N, m)`` array so that
a whole grid can be inverted at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SolverError

RHO0_TOL = 1e-14
RHO0_MAXITER = 100
NEG_TOL = 1e-11
SECULAR_WIDTH = 1e-13


@dataclass(frozen=True)
class LangmuirParams:
    """Langmuir isotherm ``q_i = a_i c_i / (1 + b.c)`` plus total porosity.

    ``a`` must be strictly increasing; this fixes the elution order and the
    ordering of the secular-equation poles.
    """

    a: np.ndarray
    b: np.ndarray
    epsilon: float
    eta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.ndim != 1 or a.shape != b.shape:
            raise ValueError("a and b must be 1-D vectors of equal length")
        if np.any(a <= 0) or np.any(np.diff(a) <= 0):
            raise ValueError("Henry coefficients must satisfy 0 < a_1 < ... < a_N")
        if np.any(b <= 0):
            raise ValueError("b_i must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        a.flags.writeable = False
        b.flags.writeable = False
        eta = (1.0 - self.epsilon) / self.epsilon * a
        eta.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "eta", eta)

    @property
    def n_components(self) -> int:
        return self.a.size

    @classmethod
    def from_eta(cls, eta, b, epsilon: float = 0.5) -> LangmuirParams:
        """Build parameters that produce the given ``eta`` at porosity ``epsilon``."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        return cls(eta * epsilon / (1.0 - epsilon), b, epsilon)


def _col(v: np.ndarray, c: np.ndarray) -> np.ndarray:
    # broadcast a per-component vector against c of shape (N,) or (N, m)
    return v if c.ndim == 1 else v[:, None]


def denominator(c, p: LangmuirParams) -> np.ndarray:
    """``1 + b.c`` for one state or for every column of a batch."""
    c = np.asarray(c, dtype=float)
    return 1.0 + np.tensordot(p.b, c, axes=(0, 0))


def adsorbed_q(c, p: LangmuirParams) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    den = denominator(c, p)
    assert np.all(den > 0), "1 + b.c must be positive"
    return _col(p.a, c) * c / den


def forward_map_W(c, p: LangmuirParams) -> np.ndarray:
    """Conserved variables ``W_i(c) = c_i (1 + eta_i / (1 + b.c))``."""
    c = np.asarray(c, dtype=float)
    den = denominator(c, p)
    return c * (1.0 + _col(p.eta, c) / den)


def residual_R(y: float, w, p: LangmuirParams) -> float:
    """Rational function whose unique positive root gives ``1 + b.C(w)``."""
    w = np.asarray(w, dtype=float)
    shifted = y + p.eta
    if np.any(shifted == 0):
        raise DomainError("residual_R evaluated at a pole y = -eta_i")
    return 1.0 - y + float(np.sum(y * p.b * w / shifted))


def _clamp_negative(w: np.ndarray, neg_tol: float) -> np.ndarray:
    if np.any(w < 0):
        if np.any(w < -neg_tol):
            raise DomainError(
                f"conserved variable {w.min():.3e} is below -{neg_tol:g}; "
                "cannot invert outside the non-negative orthant"
            )
        w = np.where(w < 0, 0.0, w)
    return w


def rho0(w, p: LangmuirParams, tol: float = RHO0_TOL, guess=None,
         maxiter: int = RHO0_MAXITER, neg_tol: float = NEG_TOL) -> np.ndarray | float:
    """Unique positive root of :func:`residual_R`, bracketed by ``[1, 1 + b.w]``.

    Accepts a single state ``(N,)`` or a batch ``(N, m)``. The root is found
    by Newton's method safeguarded with bisection: ``R`` is concave for
    ``y > 0``, so Newton started right of the root never leaves the bracket,
    and any step that would leave it (possible from a warm start ``guess``
    on the left) is replaced by the bracket midpoint.
    """
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1
    W = _clamp_negative(w.reshape(w.shape[0], -1), neg_tol)
    bw = p.b[:, None] * W
    eta = p.eta[:, None]
    lo = np.ones(W.shape[1])
    hi = 1.0 + bw.sum(axis=0)
    scale = hi.copy()
    if guess is None:
        y = hi.copy()
    else:
        y = np.clip(np.broadcast_to(np.asarray(guess, dtype=float), lo.shape), lo, hi)

    done = bw.sum(axis=0) == 0.0
    y[done] = 1.0
    for _ in range(maxiter):
        active = ~done
        if not active.any():
            break
        ya = y[active]
        s = ya + eta
        r = 1.0 - ya + np.sum(ya * bw[:, active] / s, axis=0)
        dr = -1.0 + np.sum(bw[:, active] * eta / s**2, axis=0)
        conv = np.abs(r) <= tol * scale[active]
        # maintain the sign bracket R(lo) >= 0 >= R(hi)
        lo_a = np.where(r > 0, ya, lo[active])
        hi_a = np.where(r < 0, ya, hi[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dr != 0, r / dr, np.inf)
        ynew = ya - step
        bad = ~((ynew > lo_a) & (ynew < hi_a))
        ynew = np.where(bad, 0.5 * (lo_a + hi_a), ynew)
        small = np.abs(ynew - ya) <= tol * ya
        ynew = np.where(conv, ya, ynew)
        lo[active], hi[active] = lo_a, hi_a
        y[active] = ynew
        idx = np.flatnonzero(active)
        done[idx[conv | small]] = True
    else:
        if not done.all():
            bad = np.flatnonzero(~done)
            raise SolverError(
                f"rho0 did not converge in {maxiter} iterations for {bad.size} state(s)",
                bracket=(lo[bad], hi[bad]),
            )
    return float(y[0]) if single else y


def inverse_map_C(w, p: LangmuirParams, tol: float = RHO0_TOL, guess=None,
                  neg_tol: float = NEG_TOL, return_rho: bool = False):
    """Concentrations ``C_i(w) = w_i / (1 + eta_i / rho0(w))``.

    With ``return_rho=True`` also returns ``rho0`` so callers can reuse it
    as a warm start on the next evaluation.
    """
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1
    W = _clamp_negative(w.reshape(w.shape[0], -1), neg_tol)
    rho = np.atleast_1d(rho0(W, p, tol=tol, guess=guess, neg_tol=neg_tol))
    c = W / (1.0 + p.eta[:, None] / rho[None, :])
    if single:
        c, rho = c[:, 0], float(rho[0])
    return (c, rho) if return_rho else c


def closed_form_c_single(w, eta: float, b: float):
    """Explicit inverse of ``w = c (1 + eta / (1 + b c))`` for one component."""
    w = np.asarray(w, dtype=float)
    A = 1.0 + eta - b * w
    root = np.sqrt(A * A + 4.0 * b * w)
    # two algebraically equal forms; pick the one free of cancellation
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(A > 0, 2.0 * w / (root + A), (root - A) / (2.0 * b))
    out = np.where(w == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def jacobian_W(c, p: LangmuirParams) -> np.ndarray:
    """``W'(c) = D + tau b^T`` with ``d_i = 1 + eta_i/p``, ``tau_i = -eta_i c_i / p^2``."""
    c = np.asarray(c, dtype=float)
    pc = denominator(c, p)
    return np.diag(1.0 + p.eta / pc) - np.outer(p.eta * c / pc**2, p.b)


def jacobian_W_batch(c: np.ndarray, p: LangmuirParams) -> np.ndarray:
    """Jacobians for every column of ``c`` (shape ``(N, m)``), returned as ``(m, N, N)``."""
    pc = denominator(c, p)
    N, m = c.shape
    J = -(p.eta[:, None] * c / pc**2).T[:, :, None] * p.b[None, None, :]
    idx = np.arange(N)
    J[:, idx, idx] += 1.0 + p.eta[None, :] / pc[:, None]
    return J


def secular_S(lam: float, c, p: LangmuirParams) -> float:
    c = np.asarray(c, dtype=float)
    pc = float(denominator(c, p))
    d = 1.0 + p.eta / pc
    diff = lam - d
    if np.any(diff == 0):
        raise DomainError("secular_S evaluated at a pole lambda = d_i")
    return 1.0 + float(np.sum(p.eta * p.b * c / diff)) / pc**2


def eigenvalues_W_prime(c, p: LangmuirParams, tol: float = 1e-8,
                        width: float = SECULAR_WIDTH) -> np.ndarray:
    """Eigenvalues of ``W'(c)`` as the roots of the secular function.

    Root ``k`` is isolated in ``(1, d_1)`` for ``k = 1`` and in
    ``(d_{k-1}, d_k)`` otherwise; ``S`` decreases on each interval, so plain
    bisection converges. One Newton step polishes the result. A root passes
    when ``|S| <= tol`` or, where the poles cluster and ``S`` is too steep for
    that, when its Newton correction is within a few ulps.
    """
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise DomainError("eigen-decomposition needs every c_i > 0 (a pole degenerates at c_i = 0)")
    pc = float(denominator(c, p))
    d = 1.0 + p.eta / pc
    g = p.eta * p.b * c / pc**2

    def S(lam):
        return 1.0 + np.sum(g[None, :] / (lam[:, None] - d[None, :]), axis=1)

    lo = np.concatenate(([1.0], d[:-1]))
    hi = d.copy()
    # bisection on all intervals at once
    for _ in range(200):
        if np.all(hi - lo <= width):
            break
        mid = 0.5 * (lo + hi)
        right = S(mid) > 0
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    else:
        raise SolverError("secular bisection did not reach the requested width",
                          bracket=(lo, hi))
    lam = 0.5 * (lo + hi)
    dS = -np.sum(g[None, :] / (lam[:, None] - d[None, :]) ** 2, axis=1)
    polished = lam - S(lam) / dS
    inside = (polished >= lo) & (polished <= hi)
    lam = np.where(inside, polished, lam)
    res = np.abs(S(lam))
    # near clustered poles S is so steep that |S| cannot reach tol even at
    # the closest double; accept roots whose Newton correction is a few ulps
    slope = np.abs(np.sum(g[None, :] / (lam[:, None] - d[None, :]) ** 2, axis=1))
    ok = (res <= tol) | (res <= 4.0 * np.finfo(float).eps * lam * slope)
    if not np.all(ok):
        raise SolverError(f"secular residual {res.max():.2e} exceeds {tol:g}",
                          bracket=(lo, hi))
    return lam
