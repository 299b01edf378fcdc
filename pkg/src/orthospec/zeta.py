"""Epstein and convex zeta functions, their continuation and residues."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import rgamma

from .bodies import ball_volume, intrinsic_volumes, minkowski_difference, steiner_coefficients
from .errors import DomainError, PoleError, PreconditionError
from .orthospectrum import TWO_PI, default_T0, lattice_ball, length_spectrum, solve_perpendiculars
from .special import upper_gamma

POLE_TOL = 1e-6
MAX_IM_S = 100.0


@dataclass(frozen=True)
class ZetaValue:
    s: complex
    value: complex
    tail_bound: float
    method: str

    def to_dict(self):
        return {"s": [self.s.real, self.s.imag], "value": [self.value.real, self.value.imag],
                "method": self.method, "tail_bound": self.tail_bound}


@dataclass(frozen=True)
class PoleReport:
    location: int
    residue: complex
    predicted: complex
    relative_gap: float
    method: str = "contour"

    def to_dict(self):
        return {"location": self.location, "residue": [self.residue.real, self.residue.imag],
                "predicted": [self.predicted.real, self.predicted.imag],
                "relative_gap": self.relative_gap, "method": self.method}


def _fsum_complex(z):
    z = np.asarray(z, dtype=complex).ravel()
    return complex(math.fsum(z.real), math.fsum(z.imag))


# --------------------------------------------------------------------------
# Epstein zeta
# --------------------------------------------------------------------------


def _lattice_points(d, radius):
    m = int(math.ceil(radius)) + 1
    ax = np.arange(-m, m + 1)
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)


def epstein_zeta(q, s):
    """sum over xi in Z^d, xi != -q, of |xi + q|^(-s), for every s != d.

    A shift within 1e-14 of Z^d is snapped onto the lattice.

    Theta splitting at t = 1:
        pi^(-s/2) Gamma(s/2) Z(s) = 2/(s-d) - 2 delta/s
            + sum'_xi  (pi|xi+q|^2)^(-s/2)     Gamma(s/2, pi|xi+q|^2)
            + sum_{k!=0} e^{2 pi i k.q} (pi|k|^2)^((s-d)/2) Gamma((d-s)/2, pi|k|^2)
    with delta = 1 when q is a lattice point.
    """
    q = np.asarray(q, dtype=float).ravel()
    d = q.size
    s = complex(s)
    if abs(s - d) < 1e-12:
        raise PoleError(f"Epstein zeta has a pole at s = d = {d}")
    if abs(s.imag) > MAX_IM_S:
        raise DomainError(f"|Im s| = {abs(s.imag):g} exceeds overflow guard {MAX_IM_S:g}")
    on_lattice = bool(np.all(np.abs(q - np.round(q)) < 1e-14))
    if on_lattice:
        # within round-off of the lattice: the xi = -q term is the excluded one
        q = np.round(q)
    if s == 0:
        return ZetaValue(s, -1.0 + 0j if on_lattice else 0j, 0.0, "continued")
    x_max = 60.0 + 3.0 * abs(s)
    radius = math.sqrt(x_max / math.pi)

    pts = _lattice_points(d, radius + np.abs(q).max())
    y = pts + q
    x = math.pi * np.einsum("ij,ij->i", y, y)
    keep = (x <= x_max) & (x > 0 if on_lattice else np.ones_like(x, dtype=bool))
    x = x[keep]
    primal = upper_gamma(s / 2, x) * np.exp(-(s / 2) * np.log(x))

    k = _lattice_points(d, radius)
    xk = math.pi * np.einsum("ij,ij->i", k, k)
    keep = (xk > 0) & (xk <= x_max)
    k, xk = k[keep], xk[keep]
    a = (d - s) / 2
    dual = np.exp(2j * math.pi * (k @ q)) * upper_gamma(a, xk) * np.exp(-a * np.log(xk))

    lam = 2.0 / (s - d) + _fsum_complex(primal) + _fsum_complex(dual)
    if on_lattice:
        lam -= 2.0 / s
    value = lam * complex(np.exp((s / 2) * math.log(math.pi)) * rgamma(s / 2))
    tail = math.exp(-x_max) * x_max ** (abs(s) + d) * abs(complex(rgamma(s / 2)))
    return ZetaValue(s, complex(value), float(tail), "continued")


# --------------------------------------------------------------------------
# convex zeta
# --------------------------------------------------------------------------


def _pow_neg(lengths, s):
    return np.exp(-s * np.log(lengths))


def _phi1(z):
    """(e^z - 1)/z, stable near z = 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    out = np.empty_like(z)
    zs = z[small]
    out[small] = 1 + zs / 2 + zs**2 / 6 + zs**3 / 24
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb if zb.size else zb
    return out


def default_zeta_cutoff(d, target_count=20000):
    """Cutoff whose ball holds about ``target_count`` lattice points."""
    return TWO_PI * (target_count / ball_volume(d)) ** (1.0 / d)


class ConvexZeta:
    """Zeta function of the ortholength spectrum of (K1, K2).

    The spectrum is computed once up to ``T_max`` and reused for every s.
    Counting function N(T) is split as N = P + R with P the Steiner
    polynomial of K1 - K2 scaled by (2 pi)^-d, P(T) = sum_l c_l T^l, with
    the constant shifted by the number of excluded short orthogeodesics.
    With ``smoothing`` the cutoff value S(T_max) is averaged against a
    C-infinity bump over T_max in [T_max/2, T_max]; this kills the
    oscillating part of R and gains several digits.
    """

    def __init__(self, K1, K2, T_max=None, T1=None, smoothing=True, workers=1):
        self.K1, self.K2 = K1, K2
        self.D = minkowski_difference(K1, K2)
        self.d = d = K1.dim
        self.T0 = default_T0(K1, K2)
        self.T_max = float(T_max or default_zeta_cutoff(d))
        self.T1 = float(T1 if T1 is not None else max(self.T0, 4 * math.pi))
        if not self.T0 < self.T1 < self.T_max:
            raise PreconditionError(f"need T0 < T1 < T_max, got {self.T0}, {self.T1}, {self.T_max}")
        self.smoothing = smoothing
        self.spectrum = _cached_spectrum(K1, K2, self.T_max, workers)
        self.lengths = self.spectrum.lengths
        self.steiner = steiner_coefficients(self.D)
        self.c = self.steiner / TWO_PI**d
        # N(T) skips orthogeodesics of length <= T0 (and overlapping translates),
        # which the lattice-point polynomial still counts
        self.n_short = _count_short(K1, K2, self.T0)
        self.c = self.c.copy()
        self.c[0] -= self.n_short
        self.n_T1 = int(np.searchsorted(self.lengths, self.T1, side="right"))
        self._remainder_constant = self._fit_remainder_constant()

    # -- counting --------------------------------------------------------
    def counting(self, T):
        return np.searchsorted(self.lengths, np.asarray(T, dtype=float), side="right")

    def steiner_count(self, T):
        return np.polyval(self.c[::-1], np.asarray(T, dtype=float))

    def _fit_remainder_constant(self):
        T = np.concatenate([self.lengths[self.n_T1:], [self.T_max]])
        if T.size == 0:
            return 0.0
        # N jumps at each length; check both one-sided limits
        hi = np.arange(self.n_T1 + 1, self.n_T1 + T.size + 1)
        lo = hi - 1
        P = self.steiner_count(T)
        R = np.maximum(np.abs(hi - P), np.abs(lo - P))
        return float(np.max(R / T ** (self.d - 1)))

    # -- direct ----------------------------------------------------------
    def direct(self, s, T_max=None):
        s = complex(s)
        d = self.d
        if s.real <= d:
            raise DomainError(f"direct sum needs Re(s) > d = {d}; use the continued form")
        T_max = self.T_max if T_max is None else float(T_max)
        if T_max > self.T_max:
            raise DomainError(f"T_max={T_max} exceeds precomputed cutoff {self.T_max}")
        n = int(np.searchsorted(self.lengths, T_max, side="right"))
        value = _fsum_complex(_pow_neg(self.lengths[:n], s))
        return ZetaValue(s, value, self.direct_tail_bound(s.real, T_max), "direct")

    def direct_tail_bound(self, sigma, T_max):
        """Rigorous bound on sum_{l > T_max} l^-sigma.

        Lattice points of 2 pi Z^d at distance <= T from D number at most
        P(T + rho) and at least P(T - rho) - P(T0 + rho), rho = pi sqrt(d)
        the covering radius; Abel summation then bounds the tail by
        sigma * int_{T_max}^inf [P(T+rho) - P(T_max-rho) + P(T0+rho)] T^(-sigma-1) dT.
        """
        d = self.d
        rho = math.pi * math.sqrt(d)
        const = -self.steiner_count(max(T_max - rho, 0.0)) + self.steiner_count(self.T0 + rho)
        total = const * T_max ** (-sigma)
        for l in range(d + 1):
            for j in range(l + 1):
                total += (self.c[l] * math.comb(l, j) * rho ** (l - j)
                          * sigma * T_max ** (j - sigma) / (sigma - j))
        return float(total)

    # -- continuation ------------------------------------------------------
    def pole_terms(self, s):
        """c_l s T1^(l-s) / (s - l) for l = 1..d: the closed-form pole part."""
        s = complex(s)
        ls = np.arange(1, self.d + 1)
        return self.c[1:] * s * np.exp((ls - s) * math.log(self.T1)) / (s - ls)

    def pole_residues(self):
        """l * c_l, the residues carried by ``pole_terms``."""
        return np.arange(1, self.d + 1) * self.c[1:]

    def _cutoff_value(self, s, T, cum):
        """S(T) = sum_{l<=T} l^-s - N(T) T^-s + sum_l c_l s T^(l-s)/(s-l)."""
        n = np.searchsorted(self.lengths, T, side="right")
        partial = np.where(n > 0, cum[np.maximum(n - 1, 0)], 0.0)
        logT = np.log(T)
        val = partial - n * np.exp(-s * logT) + self.c[0] * np.exp(-s * logT)
        for l in range(1, self.d + 1):
            val = val + self.c[l] * s * np.exp((l - s) * logT) / (s - l)
        return val

    def continued(self, s, T1=None):
        """Continuation to Re(s) > d - 1, s != d."""
        s = complex(s)
        d = self.d
        if s.real <= d - 1:
            raise DomainError(f"Re(s) = {s.real:g} is outside the validated strip Re(s) > {d - 1}")
        if abs(s - d) < POLE_TOL:
            raise PoleError(f"s is within {POLE_TOL:g} of the pole at s = {d}")
        for l in range(1, d):
            if abs(s - l) < POLE_TOL:
                raise PoleError(f"pole at s = {l}")
        T1 = self.T1 if T1 is None else float(T1)
        L = self.lengths
        low = L[L <= T1]
        n1 = low.size
        entire = (_fsum_complex(_pow_neg(low, s)) - n1 * np.exp(-s * math.log(T1))
                  + self.c[0] * np.exp(-s * math.log(T1)))
        pole = complex(np.sum(self.c[1:] * s * np.exp((np.arange(1, d + 1) - s) * math.log(T1))
                              / (s - np.arange(1, d + 1))))
        # remainder s * int_{T1}^{Tm} (N - P) T^(-s-1) dT, averaged over Tm
        terms = _pow_neg(L, s)
        cum = np.cumsum(terms)
        if self.smoothing:
            a, b = 0.5 * self.T_max, self.T_max
            m = 4096
            x = (np.arange(m) + 0.5) / m
            weight = np.exp(-1.0 / (x * (1.0 - x)))
            weight /= weight.sum()
            Tm_nodes = a + (b - a) * x
            S = complex(np.sum(weight * self._cutoff_value(s, Tm_nodes, cum)))
        else:
            S = complex(self._cutoff_value(s, np.array([self.T_max]), cum)[0])
        # S already equals entire + pole + remainder; keep the split for reporting
        remainder = S - entire - pole
        tail = (abs(s) * self._remainder_constant * (0.5 * self.T_max) ** (d - 1 - s.real)
                / (s.real - d + 1))
        value = ZetaValue(s, complex(S), float(tail), "continued")
        object.__setattr__(value, "parts", {"entire": complex(entire), "pole": pole,
                                            "remainder": complex(remainder)})
        return value


def _count_short(K1, K2, T0):
    xis = lattice_ball(K1.dim, T0 + K1.max_norm + K2.max_norm)
    valid, L, _ = solve_perpendiculars(K1, K2, xis)
    return int(np.sum(~valid | (L <= T0)))


@lru_cache(maxsize=16)
def _cached_spectrum(K1, K2, T, workers=1):
    return length_spectrum(K1, K2, T, workers=workers)


@lru_cache(maxsize=16)
def convex_zeta(K1, K2, T_max=None):
    """Shared ConvexZeta instance for a body pair."""
    return ConvexZeta(K1, K2, T_max)


def convex_zeta_direct(K1, K2, s, T_max):
    """Partial sum over ortholengths <= T_max plus a rigorous tail bound."""
    return ConvexZeta(K1, K2, T_max=T_max).direct(s)


def convex_zeta_continued(K1, K2, s, T_max=None):
    return convex_zeta(K1, K2, T_max).continued(s)


# --------------------------------------------------------------------------
# residues
# --------------------------------------------------------------------------


def residue_estimate(f, pole, radius, n=64):
    """(1/2 pi i) times the contour integral of f on |s - pole| = radius.

    Trapezoid rule with n nodes, offset by half a step from the real axis.
    """
    theta = 2.0 * math.pi * (np.arange(n) + 0.5) / n
    e = np.exp(1j * theta)
    vals = np.array([complex(f(pole + radius * ek)) for ek in e])
    return complex(radius * np.mean(vals * e))


def predicted_residue(D, l):
    """l pi^(l/2) V_{d-l}(D) / (Gamma(l/2 + 1) (2 pi)^d)."""
    d = D.dim
    V = intrinsic_volumes(D)
    return l * ball_volume(l) * V[d - l] / TWO_PI**d


def residues(K1, K2, T_max=None, radius=0.5):
    """PoleReport for s = 1..d.

    s = d is measured by contour integration of the continued zeta; the
    lower poles lie outside the validated strip, so their residues are
    measured on the closed-form polynomial part only.
    """
    Z = convex_zeta(K1, K2, T_max)
    d = Z.d
    reports = []
    for l in range(1, d + 1):
        pred = predicted_residue(Z.D, l)
        if l == d:
            res = residue_estimate(lambda s: Z.continued(s).value, d, radius)
            method = "contour"
        else:
            res = residue_estimate(lambda s, l=l: Z.pole_terms(s)[l - 1], l, radius)
            method = "polynomial-part"
        gap = abs(res - pred) / abs(pred) if pred != 0 else abs(res)
        reports.append(PoleReport(l, res, complex(pred), float(gap), method))
    return reports
