"""Correlation functions of the geodesic flow on the unit tangent bundle of the flat torus.

An observable is a finite Fourier sum phi(x, theta) = sum_xi phi_xi(theta) e^{i xi.x}
(up to the (2 pi)^(-d/2) normalisation).  The flow acts on mode xi by the
phase e^{i t xi.theta}, so

    Cor(t) = sum_xi int_{S^{d-1}} e^{i t xi.theta} phi_xi conj(psi_xi) dtheta.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

from .bodies import sphere_area, sphere_quadrature, tangent_basis
from .errors import (AccuracyError, ConfigError, DomainError, PoleError, PreconditionError,
                     ScaleError, SingularityError)
from .special import upper_gamma

TWO_PI = 2.0 * math.pi
MAX_LAMBDA = 1e5
SINGULAR_TOL = 1e-4
DEFAULT_T_SPLIT = 200.0


# --------------------------------------------------------------------------
# functions on the sphere
# --------------------------------------------------------------------------


def _rows(U):
    U = np.asarray(U, dtype=float)
    return U.reshape(1, -1) if U.ndim == 1 else U


class SphereFunction:
    """Closed-form complex function on S^{d-1}, evaluated on unit row vectors."""

    def __call__(self, U):
        U = _rows(U)
        return np.broadcast_to(np.asarray(self._eval(U), dtype=complex), (U.shape[0],)).copy()

    def __add__(self, other):
        return SumFunction((self, other))

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantFunction(SphereFunction):
    value: complex = 1.0

    def _eval(self, U):
        return complex(self.value)

    def to_dict(self):
        v = complex(self.value)
        return {"type": "constant", "value": [v.real, v.imag]}


@dataclass(frozen=True)
class BumpFunction(SphereFunction):
    """amplitude * exp(1 - 1/(1 - (angle/width)^2)) inside the cap of radius ``width``."""

    center: tuple
    width: float
    amplitude: complex = 1.0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        n = np.linalg.norm(c)
        if n == 0 or not 0 < self.width < math.pi:
            raise PreconditionError("bump needs a nonzero center and 0 < width < pi")
        object.__setattr__(self, "center", tuple(float(v) for v in c / n))

    def _eval(self, U):
        ang = np.arccos(np.clip(U @ np.asarray(self.center), -1.0, 1.0))
        x = ang / self.width
        inside = x < 1
        out = np.zeros(U.shape[0], dtype=complex)
        out[inside] = complex(self.amplitude) * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
        return out

    def to_dict(self):
        a = complex(self.amplitude)
        return {"type": "bump", "center": list(self.center), "width": self.width,
                "amplitude": [a.real, a.imag]}


@dataclass(frozen=True)
class HarmonicFunction(SphereFunction):
    """e^{i k phi} on the circle (k = degree), Y_l^m on S^2 (l = degree, m = order)."""

    dim: int
    degree: int
    order: int = 0
    amplitude: complex = 1.0

    def __post_init__(self):
        if self.dim == 3 and abs(self.order) > self.degree:
            raise PreconditionError("spherical harmonic needs |m| <= l")
        if self.dim == 3 and self.degree < 0:
            raise PreconditionError("spherical harmonic degree must be >= 0")

    def _eval(self, U):
        if self.dim == 2:
            phi = np.arctan2(U[:, 1], U[:, 0])
            return complex(self.amplitude) * np.exp(1j * self.degree * phi)
        polar = np.arccos(np.clip(U[:, 2], -1.0, 1.0))
        azim = np.arctan2(U[:, 1], U[:, 0])
        return complex(self.amplitude) * sph_harm_y(self.degree, self.order, polar, azim)

    def to_dict(self):
        a = complex(self.amplitude)
        out = {"type": "harmonic", "degree": self.degree, "amplitude": [a.real, a.imag]}
        if self.dim == 3:
            out["order"] = self.order
        return out


@dataclass(frozen=True)
class SumFunction(SphereFunction):
    terms: tuple

    def _eval(self, U):
        return sum(t(U) for t in self.terms)

    def to_dict(self):
        return [t.to_dict() for t in self.terms]


@dataclass(frozen=True)
class ConjugateProduct(SphereFunction):
    """left * conj(right)."""

    left: SphereFunction
    right: SphereFunction

    def _eval(self, U):
        return self.left(U) * np.conj(self.right(U))


@dataclass(frozen=True)
class ConjugateFunction(SphereFunction):
    """conj(f(theta)) evaluated at ``sign`` * theta."""

    f: SphereFunction
    sign: float = 1.0

    def _eval(self, U):
        return np.conj(self.f(self.sign * U))


def _complex(value, path):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ConfigError("expected a number or [re, im]", path)


def sphere_function_from_dict(spec, dim, path="coeff"):
    """Build a coefficient function from its JSON description."""
    if isinstance(spec, list):
        if not spec:
            raise ConfigError("empty coefficient list", path)
        parts = [sphere_function_from_dict(s, dim, f"{path}[{i}]") for i, s in enumerate(spec)]
        return parts[0] if len(parts) == 1 else SumFunction(tuple(parts))
    if not isinstance(spec, dict):
        raise ConfigError("coefficient must be an object or a list of objects", path)
    kind = spec.get("type")
    allowed = {"constant": {"type", "value"},
               "bump": {"type", "center", "width", "amplitude"},
               "harmonic": {"type", "degree", "order", "amplitude"}}
    if kind not in allowed:
        raise ConfigError(f"unknown coefficient type {kind!r}", f"{path}.type")
    extra = set(spec) - allowed[kind]
    if extra:
        raise ConfigError(f"unknown key {sorted(extra)[0]!r}", f"{path}.{sorted(extra)[0]}")
    amp = _complex(spec.get("amplitude", 1.0), f"{path}.amplitude")
    try:
        if kind == "constant":
            return ConstantFunction(_complex(spec.get("value", 1.0), f"{path}.value"))
        if kind == "bump":
            center = spec.get("center")
            if not isinstance(center, list) or len(center) != dim:
                raise ConfigError(f"center must be a list of {dim} numbers", f"{path}.center")
            return BumpFunction(tuple(float(c) for c in center), float(spec.get("width", 0.5)), amp)
        degree = spec.get("degree")
        if not isinstance(degree, int):
            raise ConfigError("degree must be an integer", f"{path}.degree")
        order = spec.get("order", 0)
        if not isinstance(order, int):
            raise ConfigError("order must be an integer", f"{path}.order")
        return HarmonicFunction(dim, degree, order, amp)
    except PreconditionError as exc:
        raise ConfigError(str(exc), path) from None


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------


class Observable:
    """Finite sum of torus modes with coefficient functions on the sphere.

    ``modes`` maps integer vectors xi to SphereFunction coefficients.  The
    coefficients are kept in closed form and sampled on ``quadrature``, a
    grid shared by all modes.  With ``real=True`` the coefficient at -xi
    must be the conjugate of the one at xi.
    """

    def __init__(self, dim, modes, real=False, quadrature=None):
        if dim not in (2, 3):
            raise PreconditionError(f"observables are implemented for d=2,3 (got {dim})")
        self.dim = dim
        items = []
        for xi, coeff in dict(modes).items():
            xi = tuple(int(v) for v in np.asarray(xi).ravel())
            if len(xi) != dim:
                raise PreconditionError(f"mode {xi} does not have {dim} components")
            if not isinstance(coeff, SphereFunction):
                raise PreconditionError(f"coefficient of mode {xi} is not a SphereFunction")
            items.append((xi, coeff))
        self.modes = dict(sorted(items))
        self.real = bool(real)
        self.quadrature = quadrature or sphere_quadrature(dim)
        self._samples = {}
        if self.real:
            self._check_reality()

    def _check_reality(self):
        for xi, f in self.modes.items():
            partner = tuple(-v for v in xi)
            if partner not in self.modes:
                raise PreconditionError(f"real observable is missing mode {partner}")
            a, b = self.samples(xi), self.samples(partner)
            if np.max(np.abs(a - np.conj(b)), initial=0.0) > 1e-12 * max(1.0, np.abs(a).max()):
                raise PreconditionError(f"coefficient at {partner} is not the conjugate of {xi}")

    def samples(self, xi):
        xi = tuple(xi)
        if xi not in self._samples:
            self._samples[xi] = self.modes[xi](self.quadrature.nodes)
        return self._samples[xi]

    def coefficient(self, xi):
        return self.modes.get(tuple(int(v) for v in xi))

    def norm(self):
        """L^2 norm on the unit tangent bundle (normalised torus measure)."""
        w = self.quadrature.weights
        return math.sqrt(sum(float(np.sum(w * np.abs(self.samples(xi)) ** 2)) for xi in self.modes))

    @classmethod
    def from_sphere_function(cls, f, dim, quadrature=None):
        return cls(dim, {(0,) * dim: f}, quadrature=quadrature)

    @classmethod
    def from_dict(cls, spec, path="observable"):
        if not isinstance(spec, dict):
            raise ConfigError("observable must be an object", path)
        extra = set(spec) - {"dim", "modes", "real"}
        if extra:
            key = sorted(extra)[0]
            raise ConfigError(f"unknown key {key!r}", f"{path}.{key}")
        dim = spec.get("dim")
        if dim not in (2, 3):
            raise ConfigError("dim must be 2 or 3", f"{path}.dim")
        modes = spec.get("modes")
        if not isinstance(modes, list) or not modes:
            raise ConfigError("modes must be a nonempty list", f"{path}.modes")
        out = {}
        for i, m in enumerate(modes):
            mp = f"{path}.modes[{i}]"
            if not isinstance(m, dict) or set(m) - {"xi", "coeff"}:
                raise ConfigError("mode must be {xi: [...], coeff: ...}", mp)
            xi = m.get("xi")
            if not (isinstance(xi, list) and len(xi) == dim and all(isinstance(v, int) for v in xi)):
                raise ConfigError(f"xi must be a list of {dim} integers", f"{mp}.xi")
            if tuple(xi) in out:
                raise ConfigError(f"duplicate mode {xi}", f"{mp}.xi")
            out[tuple(xi)] = sphere_function_from_dict(m.get("coeff", {"type": "constant"}), dim,
                                                       f"{mp}.coeff")
        try:
            return cls(dim, out, real=bool(spec.get("real", False)))
        except PreconditionError as exc:
            raise ConfigError(str(exc), path) from None

    def to_dict(self):
        return {"dim": self.dim, "real": self.real,
                "modes": [{"xi": list(xi), "coeff": f.to_dict()} for xi, f in self.modes.items()]}

    def key(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, Observable) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Observable(dim={self.dim}, modes={list(self.modes)})"


# --------------------------------------------------------------------------
# oscillatory integrals
# --------------------------------------------------------------------------


def _frame(xi):
    xi = np.asarray(xi, dtype=float)
    e = xi / np.linalg.norm(xi)
    if e.size == 2:
        return e, np.array([[-e[1], e[0]]])
    return e, np.asarray(tangent_basis(e)).reshape(3, 2).T


@dataclass
class ReducedIntegral:
    """I(t) = sum_j c_j exp(i t |xi| z_j), valid for |t| <= t_max."""

    freq: float
    z: np.ndarray
    c: np.ndarray
    t_max: float
    error: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.empty(flat.size, dtype=complex)
        for i in range(0, flat.size, 256):
            out[i:i + 256] = np.exp(1j * self.freq * np.outer(flat[i:i + 256], self.z)) @ self.c
        return out.reshape(t.shape)


def _reduce_at(F, e, basis, n, m):
    """Heights and weights for resolution (n, m)."""
    if e.size == 2:
        alpha = TWO_PI * np.arange(n) / n
        U = np.cos(alpha)[:, None] * e + np.sin(alpha)[:, None] * basis[0]
        return np.cos(alpha), F(U) * (TWO_PI / n)
    z, wz = np.polynomial.legendre.leggauss(n)
    psi = TWO_PI * np.arange(m) / m
    rho = np.sqrt(1.0 - z**2)
    U = (z[:, None, None] * e
         + rho[:, None, None] * (np.cos(psi)[None, :, None] * basis[0]
                                 + np.sin(psi)[None, :, None] * basis[1]))
    G = F(U.reshape(-1, 3)).reshape(n, m).sum(axis=1) * (TWO_PI / m)
    return z, wz * G


def reduce_integral(F, xi, t_max, rtol=1e-10, max_doublings=6):
    """Precompute I_F(xi, t) for |t| <= t_max with automatic refinement."""
    xi = np.asarray(xi, dtype=float)
    freq = float(np.linalg.norm(xi))
    lam = abs(t_max) * freq
    if lam > MAX_LAMBDA:
        raise ScaleError(f"t|xi| = {lam:g} exceeds the supported scale {MAX_LAMBDA:g}")
    e, basis = _frame(xi)
    d = e.size
    if d == 2:
        n = 1 << int(math.ceil(math.log2(max(128.0, 1.25 * lam + 96))))
        m = 0
    else:
        n, m = int(0.6 * lam + 48), 64
    probe = lam * np.array([1.0, 0.71, 0.37, 0.0]) / max(freq, 1e-300)
    z, c = _reduce_at(F, e, basis, n, m)
    scale = max(float(np.sum(np.abs(c))), 1e-300)
    err = math.inf
    for _ in range(max_doublings):
        n2, m2 = (2 * n, 0) if d == 2 else (int(1.5 * n) + 1, 2 * m)
        z2, c2 = _reduce_at(F, e, basis, n2, m2)
        a = ReducedIntegral(freq, z, c, t_max)(probe)
        b = ReducedIntegral(freq, z2, c2, t_max)(probe)
        err = float(np.max(np.abs(a - b)))
        z, c, n, m = z2, c2, n2, m2
        if err <= rtol * scale:
            break
    else:
        raise AccuracyError(f"oscillatory quadrature did not converge (error {err:.2e})")
    return ReducedIntegral(freq, z, c, abs(t_max), err)


def _sphere_integral(F, dim):
    q = sphere_quadrature(dim, 1024 if dim == 2 else (96, 192))
    return complex(q.integrate(F(q.nodes)))


def oscillatory_integral(F, xi, t):
    """I_F(xi, t) = int_{S^{d-1}} e^{i t xi.theta} F(theta) dtheta.

    ``t`` may be an array.  The quadrature is built in a frame aligned with
    xi: trapezoid in angle for d=2, Gauss-Legendre in xi.theta times a
    trapezoid in azimuth for d=3.
    """
    xi = np.asarray(xi, dtype=float).ravel()
    t_arr = np.asarray(t, dtype=float)
    if not np.any(xi) or not np.any(t_arr):
        val = _sphere_integral(F, xi.size)
        return val if t_arr.ndim == 0 else np.full(t_arr.shape, val, dtype=complex)
    red = reduce_integral(F, xi, float(np.max(np.abs(t_arr))))
    out = red(t_arr)
    return complex(out) if t_arr.ndim == 0 else out


# --------------------------------------------------------------------------
# correlations
# --------------------------------------------------------------------------


def _check_pair(phi, psi):
    if phi.dim != psi.dim:
        raise PreconditionError(f"dimension mismatch: {phi.dim} vs {psi.dim}")
    if phi.quadrature.nodes.shape != psi.quadrature.nodes.shape or not np.allclose(
            phi.quadrature.nodes, psi.quadrature.nodes):
        raise PreconditionError("observables must share the sphere grid")


def _bucket(t):
    return float(2.0 ** math.ceil(math.log2(max(float(t), 1.0))))


class CorrelationModel:
    """Cor_{phi,psi} with per-mode quadratures precomputed up to ``t_max``."""

    def __init__(self, phi, psi, t_max):
        _check_pair(phi, psi)
        self.phi, self.psi, self.dim, self.t_max = phi, psi, phi.dim, float(t_max)
        zero = (0,) * self.dim
        self.invariant = 0j
        if zero in phi.modes and zero in psi.modes:
            self.invariant = _sphere_integral(ConjugateProduct(phi.modes[zero], psi.modes[zero]),
                                              self.dim)
        self.modes = []
        for xi in phi.modes:
            if xi == zero or xi not in psi.modes:
                continue
            F = ConjugateProduct(phi.modes[xi], psi.modes[xi])
            self.modes.append((xi, F, reduce_integral(F, xi, self.t_max)))
        self._cache = {}

    @property
    def frequencies(self):
        return sorted({r.freq for _, _, r in self.modes})

    def mode_values(self, t):
        return [red(t) for _, _, red in self.modes]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.max(np.abs(t), initial=0.0) > self.t_max * (1 + 1e-12):
            raise DomainError(f"t exceeds precomputed range {self.t_max}")
        out = np.full(t.shape, self.invariant, dtype=complex)
        for v in self.mode_values(t):
            out = out + v
        return out

    def pole_values(self, xi_index):
        """(F(+xi/|xi|), F(-xi/|xi|)) for mode number ``xi_index``."""
        xi, F, _ = self.modes[xi_index]
        e = np.asarray(xi, dtype=float) / np.linalg.norm(xi)
        return complex(F(e)[0]), complex(F(-e)[0])

    def tail_coefficients(self, t_split, span=20.0, n=401):
        """Per-mode coefficients of I(t) ~ sum_+- e^{+-i t|xi|} t^-a (A + B/t + C/t^2).

        A is the stationary-phase value; B and C are fitted by least squares
        against the quadrature on [t_split, t_split + span].
        """
        key = ("tail", float(t_split), float(span), int(n))
        if key not in self._cache:
            self._cache[key] = self._fit_tail(t_split, span, n)
        return self._cache[key]

    def _fit_tail(self, t_split, span, n):
        a = (self.dim - 1) / 2
        t = np.linspace(t_split, t_split + span, n)
        out = []
        for k, (xi, F, red) in enumerate(self.modes):
            r = red.freq
            fp, fm = self.pole_values(k)
            pref = (TWO_PI / r) ** a
            A = np.array([np.exp(-1j * math.pi * a / 2) * pref * fp,
                          np.exp(1j * math.pi * a / 2) * pref * fm])
            ep, em = np.exp(1j * r * t), np.exp(-1j * r * t)
            resid = red(t) - t**-a * (A[0] * ep + A[1] * em)
            X = np.column_stack([ep * t ** (-a - 1), em * t ** (-a - 1),
                                 ep * t ** (-a - 2), em * t ** (-a - 2)])
            sol, *_ = np.linalg.lstsq(X, resid, rcond=None)
            out.append((r, A, sol[:2], sol[2:]))
        return out

    def mellin_samples(self, chi_cutoff, t_split):
        """s-independent pieces of the Mellin quadrature, computed once."""
        key = ("mellin", float(chi_cutoff), float(t_split))
        if key not in self._cache:
            t0, w0 = _gl_panels(1.0, chi_cutoff)
            chi = mellin_cutoff(t0, chi_cutoff)
            c0 = 0.5 * (1.0 + chi_cutoff)
            t1, w1 = _gl_panels(c0, t_split)
            osc = np.zeros(t1.shape, dtype=complex)
            for v in self.mode_values(t1):
                osc += v
            self._cache[key] = (t0, w0, chi, self(t0), t1,
                                w1 * (1.0 - mellin_cutoff(t1, chi_cutoff)), osc)
        return self._cache[key]


@lru_cache(maxsize=32)
def correlation_model(phi, psi, t_max):
    return CorrelationModel(phi, psi, _bucket(t_max))


def correlation(phi, psi, t):
    """Cor_{phi,psi}(t), including the invariant term <P0 phi, P0 psi>."""
    t_arr = np.asarray(t, dtype=float)
    model = correlation_model(phi, psi, float(np.max(np.abs(t_arr), initial=1.0)))
    out = model(t_arr)
    return complex(out) if t_arr.ndim == 0 else out


def invariant_term(phi, psi):
    return correlation_model(phi, psi, 1.0).invariant


def stationary_phase_leading(phi, psi, t):
    """<P0 phi, P0 psi> + (2 pi/t)^a sum_+- e^{-+i pi a/2} sum_xi e^{+-i t|xi|} |xi|^-a F_xi(+-xi/|xi|)

    with a = (d-1)/2 and F_xi = phi_xi conj(psi_xi).
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 1):
        raise PreconditionError("stationary phase needs t >= 1")
    _check_pair(phi, psi)
    model = correlation_model(phi, psi, 1.0)
    a = (model.dim - 1) / 2
    out = np.full(t_arr.shape, model.invariant, dtype=complex)
    for k, (xi, F, red) in enumerate(model.modes):
        r = red.freq
        fp, fm = model.pole_values(k)
        pref = (TWO_PI / (t_arr * r)) ** a
        out = out + pref * (np.exp(-1j * math.pi * a / 2) * np.exp(1j * t_arr * r) * fp
                            + np.exp(1j * math.pi * a / 2) * np.exp(-1j * t_arr * r) * fm)
    return complex(out) if t_arr.ndim == 0 else out


def projectors(phi):
    """(P0 phi, Pi0+ phi, Pi0- phi).

    P0 phi is the mode-0 coefficient; Pi0+- map each nonzero mode xi to the
    value of its coefficient at +-xi/|xi|.
    """
    zero = (0,) * phi.dim
    P0 = phi.modes.get(zero, ConstantFunction(0.0))
    plus, minus = {}, {}
    for xi, f in phi.modes.items():
        if xi == zero:
            continue
        e = np.asarray(xi, dtype=float) / np.linalg.norm(xi)
        plus[xi] = complex(f(e)[0])
        minus[xi] = complex(f(-e)[0])
    return P0, plus, minus


# --------------------------------------------------------------------------
# anisotropic Sobolev norms
# --------------------------------------------------------------------------


def _drop_roundoff(c):
    """Zero coefficients at the level of floating-point noise.

    High Sobolev weights would otherwise amplify round-off into the norm.
    """
    floor = 64 * np.finfo(float).eps * np.max(np.abs(c), initial=0.0)
    return np.where(np.abs(c) > floor, c, 0.0)


def _circle_sobolev_sq(f, M, n_start=256, n_max=1 << 15, rtol=1e-6):
    n = n_start
    while True:
        phi = TWO_PI * np.arange(n) / n
        vals = f(np.column_stack([np.cos(phi), np.sin(phi)]))
        c = _drop_roundoff(np.fft.fft(vals) / n)
        k = np.fft.fftfreq(n, 1.0 / n)
        wts = (1.0 + k**2) ** M
        energy = wts * np.abs(c) ** 2
        total = float(np.sum(energy))
        tail = float(np.sum(energy[np.abs(k) > n / 4]))
        if tail <= rtol * max(total, 1e-300):
            return TWO_PI * total
        if n >= n_max:
            raise AccuracyError(f"circle grid of {n} nodes too coarse for H^{M}")
        n *= 2


@lru_cache(maxsize=8)
def _legendre_table(L, n_z):
    z, wz = np.polynomial.legendre.leggauss(n_z)
    polar = np.arccos(z)
    ls, ms = [], []
    for l in range(L + 1):
        for m in range(-l, l + 1):
            ls.append(l)
            ms.append(m)
    ls, ms = np.array(ls), np.array(ms)
    # Y_l^m(polar, 0): normalised associated Legendre part
    P = np.real(sph_harm_y(ls[:, None], ms[:, None], polar[None, :], 0.0))
    return z, wz, ls, ms, P


def _sphere_sobolev_sq(f, M, L_start=32, L_max=128, rtol=1e-6):
    L = L_start
    while True:
        n_z, n_psi = L + 2, 2 * L + 4
        z, wz, ls, ms, P = _legendre_table(L, n_z)
        psi = TWO_PI * np.arange(n_psi) / n_psi
        rho = np.sqrt(1 - z**2)
        U = np.stack([rho[:, None] * np.cos(psi)[None, :], rho[:, None] * np.sin(psi)[None, :],
                      np.broadcast_to(z[:, None], (n_z, n_psi))], axis=-1)
        vals = f(U.reshape(-1, 3)).reshape(n_z, n_psi)
        # azimuthal Fourier coefficient int f e^{-i m psi} dpsi
        Fm = np.fft.fft(vals, axis=1) * (TWO_PI / n_psi)
        coef = _drop_roundoff(np.sum(wz[None, :] * P * Fm[:, ms % n_psi].T, axis=1))
        wts = (1.0 + ls * (ls + 1.0)) ** M
        energy = wts * np.abs(coef) ** 2
        total = float(np.sum(energy))
        tail = float(np.sum(energy[ls > 0.75 * L]))
        if tail <= rtol * max(total, 1e-300):
            return total
        if L >= L_max:
            raise AccuracyError(f"spherical harmonic degree {L} too low for H^{M}")
        L *= 2


def sobolev_norm_sq(f, dim, M):
    """||f||^2_{H^M(S^{d-1})} from spectral coefficients."""
    return _circle_sobolev_sq(f, M) if dim == 2 else _sphere_sobolev_sq(f, M)


def anisotropic_norm(u, M, N):
    """(sum_xi <xi>^{2N} ||u_xi||^2_{H^M(S^{d-1})})^(1/2)."""
    total = 0.0
    for xi, f in u.modes.items():
        bracket = 1.0 + float(np.dot(xi, xi))
        total += bracket**N * sobolev_norm_sq(f, u.dim, M)
    return math.sqrt(total)


# --------------------------------------------------------------------------
# Laplace and Mellin transforms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TransformValue:
    s: complex
    value: complex
    parts: dict = field(default_factory=dict)

    def to_dict(self):
        return {"s": [self.s.real, self.s.imag], "value": [self.value.real, self.value.imag],
                "parts": {k: [v.real, v.imag] for k, v in self.parts.items()}}


def _phi1(z):
    """(e^z - 1)/z, stable near 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[small]
    out[small] = 1 + zs / 2 + zs**2 / 6 + zs**3 / 24 + zs**4 / 120
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def _exp_tail(z, b, T):
    """int_T^inf e^{-z t} t^{-b} dt = z^{b-1} Gamma(1-b, zT), analytically continued."""
    z = complex(z)
    return complex(np.exp((b - 1) * np.log(z)) * upper_gamma(1 - b, z * T))


def singular_points(phi, psi):
    model = correlation_model(phi, psi, 1.0)
    pts = [0j]
    for r in model.frequencies:
        pts += [1j * r, -1j * r]
    return pts


def laplace_transform(phi, psi, s, t_split=DEFAULT_T_SPLIT, probe=False):
    """int_0^inf e^{-st} Cor(t) dt for Re(s) >= 0 off the singular points.

    The part on [0, t_split] is integrated exactly in t for every sphere
    quadrature node; beyond t_split each mode follows its stationary-phase
    expansion with a fitted first correction, integrated in closed form.
    """
    s = complex(s)
    if s.real < 0:
        raise DomainError("Laplace transform needs Re(s) >= 0")
    for p in singular_points(phi, psi):
        dist = abs(s - p)
        if dist == 0 or (dist < SINGULAR_TOL and not probe):
            raise SingularityError(f"s = {s} is at the singular point {p}")
    model = correlation_model(phi, psi, t_split + 25.0)
    ts = float(t_split)
    cutoff = model.invariant * ts * complex(_phi1(np.array(-s * ts)))
    for _, _, red in model.modes:
        cutoff += complex(np.sum(red.c * ts * _phi1((1j * red.freq * red.z - s) * ts)))
    tail = 0j
    a = (model.dim - 1) / 2
    for r, A, B, C in model.tail_coefficients(ts):
        for sign, k in ((1, 0), (-1, 1)):
            z = s - sign * 1j * r
            tail += (A[k] * _exp_tail(z, a, ts) + B[k] * _exp_tail(z, a + 1, ts)
                     + C[k] * _exp_tail(z, a + 2, ts))
    if model.invariant != 0:
        tail += model.invariant * np.exp(-s * ts) / s
    return TransformValue(s, complex(cutoff + tail), {"cutoff": complex(cutoff), "tail": complex(tail)})


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def mellin_cutoff(t, chi_cutoff):
    """Smooth chi: 1 on [1, (1+c)/2], 0 beyond c = chi_cutoff."""
    c0 = 0.5 * (1.0 + chi_cutoff)
    return 1.0 - _smoothstep((np.asarray(t, dtype=float) - c0) / (chi_cutoff - c0))


def _gl_panels(a, b, width=0.5, order=24):
    n = max(1, int(math.ceil((b - a) / width)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n + 1)
    h = np.diff(edges) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    return (mid[:, None] + h[:, None] * x).ravel(), (h[:, None] * w).ravel()


def mellin_transform(phi, psi, s, chi_cutoff=5.0, t_split=DEFAULT_T_SPLIT):
    """int_1^inf t^{-s} Cor(t) dt split with a smooth cutoff chi.

    M0 = int chi t^-s Cor is entire.  M_inf carries the invariant term
    exactly, c (1/(s-1) - int chi t^-s), so its only pole is at s = 1 with
    residue <P0 phi, P0 psi>; the oscillating modes are integrated
    numerically up to t_split and by their expansion beyond.
    """
    s = complex(s)
    if abs(s - 1) < 1e-12:
        raise PoleError("the Mellin transform has a pole at s = 1")
    if not chi_cutoff > 1:
        raise PreconditionError("chi_cutoff must exceed 1")
    ts = max(float(t_split), chi_cutoff + 1.0)
    model = correlation_model(phi, psi, ts + 25.0)
    t0, w0, chi, cor0, t1, w1, osc = model.mellin_samples(chi_cutoff, ts)
    ws = w0 * np.exp(-s * np.log(t0))
    M0 = complex(np.sum(ws * chi * cor0))
    Minf = model.invariant * (1.0 / (s - 1) - complex(np.sum(ws * chi)))
    Minf += complex(np.sum(w1 * np.exp(-s * np.log(t1)) * osc))
    a = (model.dim - 1) / 2
    for r, A, B, C in model.tail_coefficients(ts):
        for sign, k in ((1, 0), (-1, 1)):
            z = -sign * 1j * r
            Minf += (A[k] * _exp_tail(z, s + a, ts) + B[k] * _exp_tail(z, s + a + 1, ts)
                     + C[k] * _exp_tail(z, s + a + 2, ts))
    return TransformValue(s, M0 + Minf, {"M0": M0, "Minf": complex(Minf)})


# --------------------------------------------------------------------------
# fitting helpers
# --------------------------------------------------------------------------


def envelope_exponent(t, values, n_windows=24):
    """Slope of log(max |values|) per log-spaced window against log t."""
    t = np.asarray(t, dtype=float)
    v = np.abs(np.asarray(values))
    edges = np.geomspace(t.min(), t.max(), n_windows + 1)
    centers, peaks = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (t >= lo) & (t <= hi)
        if sel.any():
            i = np.argmax(v[sel])
            centers.append(t[sel][i])
            peaks.append(v[sel][i])
    slope, _ = np.polyfit(np.log(centers), np.log(peaks), 1)
    return float(slope)
