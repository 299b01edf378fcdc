"""Scenario files: JSON documents describing one experiment."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import body_from_dict
from .correlations import Observable
from .errors import ConfigError, OrthospecError
from .orthospectrum import TorusFourierSeries

COMMANDS = ("spectrum", "count", "zeta", "residues", "scan", "guinand", "correlation",
            "laplace", "mellin")
BODY_COMMANDS = {"spectrum", "count", "zeta", "residues", "scan", "guinand"}
OBSERVABLE_COMMANDS = {"correlation", "laplace", "mellin"}

BODY_KEYS = {"point": {"kind", "coords"}, "ball": {"kind", "center", "radius"},
             "ellipsoid": {"kind", "center", "Q"}, "support_series_2d": {"kind", "a0", "cos", "sin"}}

# documented defaults; every key may be overridden in the "tolerances" block
DEFAULT_TOLERANCES = {
    "scan_threshold": 0.25,      # growth exponent above which tau is flagged
    "scan_max_residual": 0.5,    # RMS log residual above which a fit is inconclusive
    "residue_radius": 0.5,       # contour radius for residue estimates
    "singular_distance": 1e-4,   # Laplace transform refuses s closer than this to a singularity
    "guinand_ratio": 10.0,       # required atom / midgap ratio reported in the summary
}

TOP_KEYS = {"command", "dimension", "bodies", "T", "T0", "beta", "f", "s", "T_max", "method",
            "count_grid", "tau_grid", "scales", "sigma", "n_atoms", "observables", "t_grid",
            "t_split", "chi_cutoff", "probe", "threads", "tolerances", "output"}


@dataclass(frozen=True)
class Scenario:
    command: str
    dimension: int
    bodies: tuple = ()
    T: float | None = None
    T0: float | None = None
    beta: tuple | None = None
    f: TorusFourierSeries | None = None
    s: tuple = ()
    T_max: float | None = None
    method: str = "auto"
    count_grid: tuple = ()
    tau_grid: tuple = ()
    scales: tuple = ()
    sigma: float | None = None
    n_atoms: int = 20
    observables: tuple = ()
    t_grid: tuple = ()
    t_split: float = 200.0
    chi_cutoff: float = 5.0
    probe: bool = False
    threads: int = 1
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output: str | None = None


def _number(v, path, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError("expected a finite number", path)
    if positive and v <= 0:
        raise ConfigError("must be positive", path)
    if nonneg and v < 0:
        raise ConfigError("must be nonnegative", path)
    return float(v)


def _vector(v, dim, path):
    if not isinstance(v, list) or len(v) != dim:
        raise ConfigError(f"expected a list of {dim} numbers", path)
    return tuple(_number(x, f"{path}[{i}]") for i, x in enumerate(v))


def _complex(v, path):
    if isinstance(v, list):
        if len(v) != 2:
            raise ConfigError("complex numbers are written [re, im]", path)
        return complex(_number(v[0], f"{path}[0]"), _number(v[1], f"{path}[1]"))
    return complex(_number(v, path))


def _grid(v, path, positive=False):
    """A list of numbers or {"start", "stop", "step"} / {"start", "stop", "num"}."""
    if isinstance(v, list):
        if not v:
            raise ConfigError("grid is empty", path)
        return tuple(_number(x, f"{path}[{i}]", positive=positive) for i, x in enumerate(v))
    if isinstance(v, dict):
        extra = set(v) - {"start", "stop", "step", "num", "spacing"}
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r}", f"{path}.{sorted(extra)[0]}")
        a = _number(v.get("start"), f"{path}.start")
        b = _number(v.get("stop"), f"{path}.stop")
        if b < a:
            raise ConfigError("stop must not be below start", f"{path}.stop")
        if "step" in v:
            h = _number(v["step"], f"{path}.step", positive=True)
            n = int(math.floor((b - a) / h + 1e-9)) + 1
            pts = a + h * np.arange(n)
            # round away accumulated representation noise so grids are stable
            pts = np.round(pts, 12)
        elif "num" in v:
            n = v["num"]
            if not isinstance(n, int) or n < 1:
                raise ConfigError("num must be a positive integer", f"{path}.num")
            if v.get("spacing", "linear") == "log":
                if a <= 0:
                    raise ConfigError("log spacing needs start > 0", f"{path}.start")
                pts = np.geomspace(a, b, n)
            else:
                pts = np.linspace(a, b, n)
        else:
            raise ConfigError("grid needs step or num", path)
        if positive and pts[0] <= 0:
            raise ConfigError("grid values must be positive", f"{path}.start")
        return tuple(float(p) for p in pts)
    raise ConfigError("expected a list or a {start, stop, step|num} object", path)


def _body(spec, dim, path):
    if not isinstance(spec, dict):
        raise ConfigError("body must be an object", path)
    kind = spec.get("kind")
    if kind not in BODY_KEYS:
        raise ConfigError(f"unknown body kind {kind!r}", f"{path}.kind")
    extra = set(spec) - BODY_KEYS[kind]
    if extra:
        key = sorted(extra)[0]
        raise ConfigError(f"unknown key {key!r}", f"{path}.{key}")
    for key in BODY_KEYS[kind] - {"kind", "cos", "sin"}:
        if key not in spec:
            raise ConfigError("missing field", f"{path}.{key}")
    if kind == "point":
        _vector(spec["coords"], dim, f"{path}.coords")
    elif kind in ("ball", "ellipsoid"):
        _vector(spec["center"], dim, f"{path}.center")
    if kind == "ball":
        _number(spec["radius"], f"{path}.radius", positive=True)
    if kind == "ellipsoid":
        Q = spec["Q"]
        if not (isinstance(Q, list) and len(Q) == dim):
            raise ConfigError(f"Q must be a {dim}x{dim} matrix", f"{path}.Q")
        for i, row in enumerate(Q):
            _vector(row, dim, f"{path}.Q[{i}]")
    if kind == "support_series_2d":
        if dim != 2:
            raise ConfigError("support_series_2d bodies need dimension 2", f"{path}.kind")
        _number(spec["a0"], f"{path}.a0", positive=True)
        for key in ("cos", "sin"):
            vals = spec.get(key, [])
            if not isinstance(vals, list):
                raise ConfigError("expected a list of numbers", f"{path}.{key}")
            for i, x in enumerate(vals):
                _number(x, f"{path}.{key}[{i}]")
    try:
        return body_from_dict(spec)
    except OrthospecError as exc:
        raise ConfigError(str(exc), path) from None


def _fourier_series(v, dim, path):
    if not isinstance(v, list):
        raise ConfigError("f must be a list of {k, cos, sin} terms", path)
    terms = []
    for i, t in enumerate(v):
        tp = f"{path}[{i}]"
        if not isinstance(t, dict) or set(t) - {"k", "cos", "sin"}:
            raise ConfigError("term must be {k: [...], cos: a, sin: b}", tp)
        k = t.get("k")
        if not (isinstance(k, list) and len(k) == dim and all(isinstance(x, int) for x in k)):
            raise ConfigError(f"k must be a list of {dim} integers", f"{tp}.k")
        terms.append((tuple(k), _number(t.get("cos", 0.0), f"{tp}.cos"),
                      _number(t.get("sin", 0.0), f"{tp}.sin")))
    return TorusFourierSeries(tuple(terms))


def parse_scenario(text, command=None):
    """Validate a JSON scenario and fill defaults.

    ``command`` (from the command line) wins over a missing "command" key;
    when both are present they must agree.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} (line {exc.lineno})", "$") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object", "$")
    extra = set(doc) - TOP_KEYS
    if extra:
        key = sorted(extra)[0]
        raise ConfigError(f"unknown key {key!r}", key)
    cmd = doc.get("command", command)
    if command is not None and cmd != command:
        raise ConfigError(f"config is for {cmd!r} but command {command!r} was requested", "command")
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}", "command")
    dim = doc.get("dimension")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 2:
        raise ConfigError("dimension must be an integer >= 2", "dimension")
    kw = {"command": cmd, "dimension": dim}

    if cmd in BODY_COMMANDS:
        bodies = doc.get("bodies")
        if not isinstance(bodies, list) or len(bodies) != 2:
            raise ConfigError("expected a list of two bodies", "bodies")
        kw["bodies"] = tuple(_body(b, dim, f"bodies[{i}]") for i, b in enumerate(bodies))
    if cmd in OBSERVABLE_COMMANDS:
        obs = doc.get("observables")
        if not isinstance(obs, dict) or set(obs) - {"phi", "psi"} or "phi" not in obs:
            raise ConfigError("expected {phi: ..., psi: ...}", "observables")
        phi = Observable.from_dict(obs["phi"], "observables.phi")
        psi = Observable.from_dict(obs.get("psi", obs["phi"]), "observables.psi")
        for name, ob in (("phi", phi), ("psi", psi)):
            if ob.dim != dim:
                raise ConfigError(f"observable dimension {ob.dim} differs from {dim}",
                                  f"observables.{name}.dim")
        kw["observables"] = (phi, psi)

    if "T" in doc:
        kw["T"] = _number(doc["T"], "T", positive=True)
    if "T0" in doc:
        kw["T0"] = _number(doc["T0"], "T0", positive=True)
    if "beta" in doc:
        kw["beta"] = _vector(doc["beta"], dim, "beta")
    if "f" in doc:
        kw["f"] = _fourier_series(doc["f"], dim, "f")
    if "s" in doc:
        if not isinstance(doc["s"], list) or not doc["s"]:
            raise ConfigError("s must be a nonempty list", "s")
        kw["s"] = tuple(_complex(v, f"s[{i}]") for i, v in enumerate(doc["s"]))
    if "T_max" in doc:
        kw["T_max"] = _number(doc["T_max"], "T_max", positive=True)
    if "method" in doc:
        if doc["method"] not in ("auto", "direct", "continued"):
            raise ConfigError("method must be auto, direct or continued", "method")
        kw["method"] = doc["method"]
    if "count_grid" in doc:
        kw["count_grid"] = _grid(doc["count_grid"], "count_grid", positive=True)
    if "tau_grid" in doc:
        kw["tau_grid"] = _grid(doc["tau_grid"], "tau_grid")
    if "scales" in doc:
        sc = _grid(doc["scales"], "scales", positive=True)
        if len(sc) < 4 or any(b <= a for a, b in zip(sc, sc[1:])):
            raise ConfigError("need at least 4 increasing scales", "scales")
        kw["scales"] = sc
    if "sigma" in doc:
        kw["sigma"] = _number(doc["sigma"], "sigma", positive=True)
    if "n_atoms" in doc:
        n = doc["n_atoms"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ConfigError("n_atoms must be a positive integer", "n_atoms")
        kw["n_atoms"] = n
    if "t_grid" in doc:
        kw["t_grid"] = _grid(doc["t_grid"], "t_grid")
    if "t_split" in doc:
        kw["t_split"] = _number(doc["t_split"], "t_split", positive=True)
    if "chi_cutoff" in doc:
        c = _number(doc["chi_cutoff"], "chi_cutoff")
        if c <= 1:
            raise ConfigError("chi_cutoff must exceed 1", "chi_cutoff")
        kw["chi_cutoff"] = c
    if "probe" in doc:
        if not isinstance(doc["probe"], bool):
            raise ConfigError("probe must be true or false", "probe")
        kw["probe"] = doc["probe"]
    if "threads" in doc:
        n = doc["threads"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ConfigError("threads must be a positive integer", "threads")
        kw["threads"] = n
    tol = dict(DEFAULT_TOLERANCES)
    if "tolerances" in doc:
        if not isinstance(doc["tolerances"], dict):
            raise ConfigError("tolerances must be an object", "tolerances")
        for k, v in doc["tolerances"].items():
            if k not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {k!r}", f"tolerances.{k}")
            tol[k] = _number(v, f"tolerances.{k}", positive=True)
    kw["tolerances"] = tol
    if "output" in doc:
        if not isinstance(doc["output"], str):
            raise ConfigError("output must be a directory path", "output")
        kw["output"] = doc["output"]

    _check_command_requirements(cmd, kw)
    return Scenario(**kw)


def _check_command_requirements(cmd, kw):
    if cmd in ("spectrum", "count", "scan", "guinand") and "T" not in kw:
        raise ConfigError(f"command {cmd!r} needs T", "T")
    if cmd in ("zeta", "laplace", "mellin") and not kw.get("s"):
        raise ConfigError(f"command {cmd!r} needs an s grid", "s")
    if cmd == "guinand":
        beta = kw.get("beta")
        if beta is None:
            raise ConfigError("guinand needs beta", "beta")
        if all(abs(b - round(b)) < 1e-12 for b in beta):
            raise ConfigError("beta lies in Z^d, the case excluded for the Guinand-Meyer "
                              "measure (extra singularity at tau = 0)", "beta")
    if cmd == "scan" and "tau_grid" not in kw:
        raise ConfigError("scan needs tau_grid", "tau_grid")
    if cmd == "correlation" and "t_grid" not in kw:
        raise ConfigError("correlation needs t_grid", "t_grid")
    if cmd == "count" and "count_grid" in kw and "T" in kw and max(kw["count_grid"]) > kw["T"]:
        raise ConfigError("count_grid exceeds T", "count_grid")
    if cmd in ("spectrum", "count", "scan", "guinand"):
        from .orthospectrum import default_T0
        T0 = kw.get("T0") or default_T0(*kw["bodies"])
        if kw["T"] <= T0:
            raise ConfigError(f"T must exceed T0 = {T0:g}", "T")
