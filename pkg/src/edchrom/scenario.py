"""Scenario files (YAML) and the shipped experiment presets.

A scenario is a mapping with the sections ``isotherm``, ``physics``,
``grid``, ``time``, ``injection`` and an optional ``scheme``, plus an
optional top-level ``name``. Unknown keys are rejected everywhere so that a
typo never silently falls back to a default.

Example::

    name: single_elution
    isotherm: {a: [1.0], b: [1.0], epsilon: 0.5}
    physics: {u: 1.0, Da: 0.0}          # or Nt: <plates> instead of Da
    grid: {m: 100}
    time: {dt_over_dz: 0.9, t_final: 1.4, snapshots: [0.5, 1.0, 1.4]}
    injection:
      segments:
        - {t_start: 0.0, t_end: 0.2, c: [1.0]}
    scheme: {kind: imex-rk2, boundary_sampling: step-start}
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .integrators import BoundarySampling, RunConfig, SchemeKind
from .isotherm import RHO0_TOL, LangmuirParams
from .spatial import Grid, InjectionProfile, InjectionSegment, PhysicalParams
from .stage_solver import NewtonConfig


class ScenarioError(ValueError):
    """A scenario violates the schema; the message names the key."""


@dataclass
class Scenario:
    """A validated run configuration plus scenario-level extras."""

    config: RunConfig
    displacer: int | None = None  # 0-based index of the displacer, if any


_SECTIONS = {
    "name": False,
    "isotherm": True,
    "physics": True,
    "grid": True,
    "time": True,
    "injection": True,
    "scheme": False,
}


# -- small typed accessors -------------------------------------------------------

def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ScenarioError(f"{where}: expected a mapping, got {type(d).__name__}")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {', '.join(map(str, unknown))}; "
                            f"allowed: {', '.join(allowed)}")


def _require(d, key, where):
    if key not in d:
        raise ScenarioError(f"{where}.{key}: required key is missing")
    return d[key]


def _number(value, where, *, positive=False, nonneg=False, allow_inf=False) -> float:
    if isinstance(value, bool):
        raise ScenarioError(f"{where}: expected a number, got a boolean")
    try:
        # YAML 1.1 reads "1e-12" as a string; accept any float literal
        x = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: expected a number, got {value!r}") from None
    if math.isnan(x) or (math.isinf(x) and not allow_inf):
        raise ScenarioError(f"{where}: must be finite")
    if positive and not x > 0:
        raise ScenarioError(f"{where}: must be > 0 (got {x!r})")
    if nonneg and x < 0:
        raise ScenarioError(f"{where}: must be >= 0 (got {x!r})")
    return x


def _integer(value, where, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{where}: must be >= {minimum} (got {value})")
    return value


def _vector(value, where, n=None, **kw) -> list[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ScenarioError(f"{where}: expected a non-empty list of numbers")
    out = [_number(v, f"{where}[{i}]", **kw) for i, v in enumerate(value)]
    if n is not None and len(out) != n:
        raise ScenarioError(f"{where}: expected {n} entries, got {len(out)}")
    return out


def _enum(kind, value, where):
    try:
        return kind(value)
    except ValueError:
        choices = ", ".join(k.value for k in kind)
        raise ScenarioError(f"{where}: {value!r} is not one of {choices}") from None


# -- parsing ----------------------------------------------------------------------

def scenario_from_dict(doc) -> Scenario:
    """Validate a scenario mapping and build the run configuration."""
    _check_keys(doc, list(_SECTIONS), "scenario")
    for key, required in _SECTIONS.items():
        if required:
            _require(doc, key, "scenario")

    iso_d = doc["isotherm"]
    _check_keys(iso_d, ["a", "b", "epsilon"], "isotherm")
    a = _vector(_require(iso_d, "a", "isotherm"), "isotherm.a", positive=True)
    b = _vector(_require(iso_d, "b", "isotherm"), "isotherm.b", n=len(a), positive=True)
    eps = _number(_require(iso_d, "epsilon", "isotherm"), "isotherm.epsilon")
    if not 0 < eps < 1:
        raise ScenarioError(f"isotherm.epsilon: must lie in (0, 1) (got {eps!r})")
    if any(x >= y for x, y in zip(a, a[1:])):
        raise ScenarioError("isotherm.a: Henry coefficients must be strictly increasing")
    iso = LangmuirParams(a, b, eps)
    n = len(a)

    ph = doc["physics"]
    _check_keys(ph, ["u", "Da", "Nt"], "physics")
    u = _number(_require(ph, "u", "physics"), "physics.u", positive=True)
    if ("Da" in ph) == ("Nt" in ph):
        raise ScenarioError("physics: give exactly one of Da or Nt")
    if "Nt" in ph:
        physics = PhysicalParams(u, Nt=_number(ph["Nt"], "physics.Nt", positive=True))
    else:
        physics = PhysicalParams(u, Da=_number(ph["Da"], "physics.Da", nonneg=True))

    gr = doc["grid"]
    _check_keys(gr, ["m"], "grid")
    grid = Grid(_integer(_require(gr, "m", "grid"), "grid.m", minimum=5))

    tm = doc["time"]
    _check_keys(tm, ["dt_over_dz", "t_final", "snapshots"], "time")
    ratio = _number(_require(tm, "dt_over_dz", "time"), "time.dt_over_dz", positive=True)
    t_final = _number(_require(tm, "t_final", "time"), "time.t_final", nonneg=True)
    snaps = tm.get("snapshots", [t_final])
    snaps = _vector(snaps, "time.snapshots", nonneg=True)
    if max(snaps) > t_final:
        raise ScenarioError("time.snapshots: every snapshot must be <= t_final")

    inj = doc["injection"]
    _check_keys(inj, ["segments", "displacer"], "injection")
    raw = _require(inj, "segments", "injection")
    if not isinstance(raw, list):
        raise ScenarioError("injection.segments: expected a list")
    segments = []
    for i, seg in enumerate(raw):
        where = f"injection.segments[{i}]"
        _check_keys(seg, ["t_start", "t_end", "c"], where)
        t0 = _number(_require(seg, "t_start", where), f"{where}.t_start", nonneg=True)
        t1 = _number(_require(seg, "t_end", where), f"{where}.t_end", allow_inf=True)
        if not t1 > t0:
            raise ScenarioError(f"{where}: t_end must exceed t_start")
        c = _vector(_require(seg, "c", where), f"{where}.c", n=n, nonneg=True)
        segments.append(InjectionSegment(t0, t1, tuple(c)))
    try:
        injection = InjectionProfile(n, tuple(segments))
    except ValueError as exc:
        raise ScenarioError(f"injection.segments: {exc}") from None
    displacer = None
    if "displacer" in inj:
        displacer = _integer(inj["displacer"], "injection.displacer", minimum=1) - 1
        if displacer >= n:
            raise ScenarioError(f"injection.displacer: component {displacer + 1} does not exist")
        if not injection.max_concentration()[displacer] > 0:
            raise ScenarioError("injection.displacer: the displacer is never injected")

    sc = doc.get("scheme", {}) or {}
    _check_keys(sc, ["kind", "boundary_sampling", "newton_tol", "newton_max_iter",
                     "newton_initial_guess", "rho_tol", "undershoot_tol"], "scheme")
    kind = _enum(SchemeKind, sc.get("kind", SchemeKind.IMEX_RK2.value), "scheme.kind")
    sampling = _enum(BoundarySampling, sc.get("boundary_sampling", BoundarySampling.STAGE.value),
                     "scheme.boundary_sampling")
    guess = sc.get("newton_initial_guess", "previous")
    if guess not in ("previous", "decoupled"):
        raise ScenarioError("scheme.newton_initial_guess: must be 'previous' or 'decoupled'")
    newton = NewtonConfig(
        tol=_number(sc.get("newton_tol", NewtonConfig.tol), "scheme.newton_tol", positive=True),
        max_iter=_integer(sc.get("newton_max_iter", NewtonConfig.max_iter),
                          "scheme.newton_max_iter", minimum=1),
        initial_guess=guess,
    )
    rho_tol = _number(sc.get("rho_tol", RHO0_TOL), "scheme.rho_tol", positive=True)
    undershoot = _number(sc.get("undershoot_tol", 1e-2), "scheme.undershoot_tol", nonneg=True)

    name = doc.get("name", "run")
    if not isinstance(name, str) or not name or any(ch in name for ch in "/\\"):
        raise ScenarioError("name: expected a non-empty string usable in file names")

    cfg = RunConfig(grid=grid, physics=physics, iso=iso, injection=injection,
                    dt_over_dz=ratio, t_final=t_final, snapshots=tuple(snaps), scheme=kind,
                    newton=newton, sampling=sampling, rho_tol=rho_tol,
                    undershoot_tol=undershoot, name=name)
    return Scenario(cfg, displacer)


def parse_scenario(path) -> Scenario:
    """Read and validate a YAML scenario file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: not valid YAML ({exc})") from None
    return scenario_from_dict(doc)


# -- canonical form ---------------------------------------------------------------

def scenario_to_dict(scn: Scenario) -> dict:
    """Canonical mapping for a scenario; parsing it gives back an equal scenario."""
    cfg = scn.config
    if cfg.initial_c is not None:
        raise ValueError("initial conditions cannot be expressed in a scenario file")
    physics = {"u": cfg.physics.u}
    if cfg.physics.Nt is not None:
        physics["Nt"] = float(cfg.physics.Nt)
    else:
        physics["Da"] = cfg.physics.Da
    injection = {"segments": [
        {"t_start": s.t_start, "t_end": s.t_end, "c": list(s.c)} for s in cfg.injection.segments
    ]}
    if scn.displacer is not None:
        injection["displacer"] = scn.displacer + 1
    return {
        "name": cfg.name,
        "isotherm": {"a": cfg.iso.a.tolist(), "b": cfg.iso.b.tolist(), "epsilon": cfg.iso.epsilon},
        "physics": physics,
        "grid": {"m": cfg.grid.m},
        "time": {"dt_over_dz": float(cfg.dt_over_dz), "t_final": float(cfg.t_final),
                 "snapshots": [float(s) for s in cfg.snapshots]},
        "injection": injection,
        "scheme": {
            "kind": cfg.scheme.value,
            "boundary_sampling": cfg.sampling.value,
            "newton_tol": cfg.newton.tol,
            "newton_max_iter": cfg.newton.max_iter,
            "newton_initial_guess": cfg.newton.initial_guess,
            "rho_tol": cfg.rho_tol,
            "undershoot_tol": cfg.undershoot_tol,
        },
    }


def emit_scenario(scn: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scn), sort_keys=False, default_flow_style=None)


# -- presets ----------------------------------------------------------------------

def _single_elution(name, Da, m, ratio, t_final, snapshots, kind):
    # one component, a = b = 1, eps = 0.5, u = 1, unit pulse on [0, 0.2];
    # c_inj is held over whole steps so the pulse spans a whole number of steps
    return {
        "name": name,
        "isotherm": {"a": [1.0], "b": [1.0], "epsilon": 0.5},
        "physics": {"u": 1.0, "Da": Da},
        "grid": {"m": m},
        "time": {"dt_over_dz": ratio, "t_final": t_final, "snapshots": snapshots},
        "injection": {"segments": [{"t_start": 0.0, "t_end": 0.2, "c": [1.0]}]},
        "scheme": {"kind": kind, "boundary_sampling": "step-start"},
    }


def _displacement(name, c_displacer, t_final, snapshots):
    # three components a = (4, 5, 6), b = (4, 5, 1), eps = 0.5, u = 0.2 and
    # Nt = 10000 plates (Da = 1e-5); components 1 and 2 enter at unit
    # concentration on [0, 0.1], then the displacer is fed indefinitely
    return {
        "name": name,
        "isotherm": {"a": [4.0, 5.0, 6.0], "b": [4.0, 5.0, 1.0], "epsilon": 0.5},
        "physics": {"u": 0.2, "Nt": 10000.0},
        "grid": {"m": 1000},
        "time": {"dt_over_dz": 4.0, "t_final": t_final, "snapshots": snapshots},
        "injection": {
            "segments": [
                {"t_start": 0.0, "t_end": 0.1, "c": [1.0, 1.0, 0.0]},
                {"t_start": 0.1, "t_end": math.inf, "c": [0.0, 0.0, c_displacer]},
            ],
            "displacer": 3,
        },
        "scheme": {"kind": "imex-rk2"},
    }


PRESETS = {
    # no dispersion: mass comparison of conservative and non-conservative schemes
    "single_elution": _single_elution("single_elution", 0.0, 100, 0.9, 1.4, [0.5, 1.0, 1.4],
                                      "imex-rk2"),
    # weak dispersion, explicit scheme just inside its time-step bound at m = 500
    "single_elution_da0005": _single_elution("single_elution_da0005", 0.0005, 500, 0.6, 0.5,
                                             [0.5], "explicit-rk2"),
    # stronger dispersion on a fine grid, beyond the explicit bound: IMEX only
    "single_elution_da005": _single_elution("single_elution_da005", 0.005, 2000, 0.9, 0.5,
                                            [0.5], "imex-rk2"),
    # base case of the explicit stability sweep; vary --m and --dt-over-dz
    "stability_sweep": _single_elution("stability_sweep", 0.0005, 100, 0.9, 0.5, [0.5],
                                        "explicit-rk2"),
    "displacement_exp1": _displacement("displacement_exp1", 1.0, 16.0, [1.0, 4.0, 8.0, 12.0, 16.0]),
    "displacement_exp2": _displacement("displacement_exp2", 0.5, 24.0, [1.0, 8.0, 16.0, 24.0]),
    "displacement_exp3": _displacement("displacement_exp3", 0.1, 24.0, [1.0, 12.0, 24.0]),
}


def preset_dict(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


def load_preset(name: str) -> Scenario:
    return scenario_from_dict(preset_dict(name))
