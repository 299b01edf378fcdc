"""Dirac combs of ortholengths, singular-support scans and the Guinand-Meyer measure."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, RangeError

MERGE_RTOL = 1e-10


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite atomic measure sum_j w_j delta_{p_j}.

    ``cutoff`` is the largest |p| up to which the atoms are complete (inf
    for synthetic measures).  ``growth`` bounds the polynomial growth of the
    untruncated measure: total |weight| on [-T, T] is O(T^growth).
    """

    positions: np.ndarray
    weights: np.ndarray
    growth: float = 0.0
    cutoff: float = math.inf

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=complex).ravel()
        if p.shape != w.shape:
            raise PreconditionError("positions and weights must have equal length")
        if not np.all(np.isfinite(p)):
            raise PreconditionError("atom positions must be finite")
        p, w = _merge(p, w)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.positions.size

    @property
    def atoms(self):
        return list(zip(self.positions.tolist(), self.weights.tolist()))

    def __add__(self, other):
        return AtomicMeasure(np.concatenate([self.positions, other.positions]),
                             np.concatenate([self.weights, other.weights]),
                             max(self.growth, other.growth), min(self.cutoff, other.cutoff))

    def scale(self, c):
        return AtomicMeasure(self.positions, c * self.weights, self.growth, self.cutoff)


def _merge(p, w):
    if p.size == 0:
        return p, w
    order = np.argsort(p, kind="stable")
    p, w = p[order], w[order]
    gap = np.diff(p) > MERGE_RTOL * np.maximum(1.0, np.abs(p[1:]))
    starts = np.concatenate([[0], np.flatnonzero(gap) + 1])
    return p[starts], np.add.reduceat(w, starts)


def dirac_comb(spec):
    """Unit atoms at the ortholengths of ``spec`` (holonomy ignored)."""
    if len(spec) == 0:
        raise PreconditionError("empty spectrum")
    return AtomicMeasure(spec.lengths, np.ones(len(spec), dtype=complex),
                         growth=float(spec.dim), cutoff=spec.T)


# --------------------------------------------------------------------------
# windowed Fourier transform and scans
# --------------------------------------------------------------------------


def _window_sums(m, taus, sigmas, kernel, block=512):
    """sum_p w_p e^{-i tau p} kernel(p, sigma) for all tau (rows) and sigma (cols)."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
    out = np.zeros((taus.size, sigmas.size), dtype=complex)
    if len(m) == 0:
        return out
    p = m.positions
    G = m.weights[:, None] * kernel(p[:, None], sigmas[None, :])
    for i in range(0, taus.size, block):
        E = np.exp(-1j * np.outer(taus[i:i + block], p))
        out[i:i + block] = E @ G
    return out


def _gaussian(p, sigma):
    return np.exp(-0.5 * (p / sigma) ** 2)


def windowed_fourier(m, tau, sigma):
    """<m, e^{-i tau t} exp(-(t/sigma)^2/2)>.

    This is the Fourier transform of m convolved with a unit-mass Gaussian
    of width 1/sigma, so it stays bounded as sigma grows exactly where the
    transform is smooth.
    """
    if np.any(np.asarray(sigma) <= 0):
        raise PreconditionError("sigma must be positive")
    out = _window_sums(m, tau, sigma, _gaussian)
    if np.ndim(tau) == 0 and np.ndim(sigma) == 0:
        return complex(out[0, 0])
    return out.reshape(np.shape(tau) + np.shape(sigma))


def window_truncation_bound(m, sigma, mass_per_length=None):
    """Rough bound on the window mass of atoms beyond ``m.cutoff``.

    ``mass_per_length(T)`` bounds the total |weight| on [T, T+1]; by default
    it is grown from the observed density near the cutoff as T^(growth-1).
    """
    T = m.cutoff
    if not math.isfinite(T) or len(m) == 0:
        return 0.0
    if mass_per_length is None:
        near = np.abs(m.positions) > 0.8 * T
        rho = np.sum(np.abs(m.weights[near])) / (0.2 * T) / T ** max(m.growth - 1, 0)
        mass_per_length = lambda t: rho * t ** max(m.growth - 1, 0)  # noqa: E731
    t = T + sigma * np.linspace(0, 12, 2001)
    f = mass_per_length(t) * np.exp(-0.5 * (t / sigma) ** 2)
    return float(np.trapezoid(f, t))


@dataclass
class ScanReport:
    tau: np.ndarray
    scales: np.ndarray
    values: np.ndarray
    exponents: np.ndarray
    residuals: np.ndarray
    flags: np.ndarray
    inconclusive: np.ndarray
    singular_set: np.ndarray
    threshold: float
    truncation_error: float = 0.0
    runs: list = field(default_factory=list)

    def rows(self):
        """(tau, scale, re, im, exponent, flag) rows for CSV export."""
        for i, t in enumerate(self.tau):
            flag = "inconclusive" if self.inconclusive[i] else int(self.flags[i])
            for j, s in enumerate(self.scales):
                v = self.values[i, j]
                yield (float(t), float(s), float(v.real), float(v.imag),
                       float(self.exponents[i]), flag)

    def summary(self):
        return {"threshold": self.threshold, "scales": self.scales.tolist(),
                "singular_set": self.singular_set.tolist(),
                "flagged_runs": [[float(a), float(b)] for a, b in self.runs],
                "n_inconclusive": int(self.inconclusive.sum()),
                "truncation_error": self.truncation_error}


def growth_exponents(values, scales):
    """Least-squares slope of log|values| against log(scales), with RMS residual."""
    x = np.log(np.asarray(scales, dtype=float))
    y = np.log(np.maximum(np.abs(values), 1e-300))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y.T, rcond=None)
    resid = y - (A @ coef).T
    return coef[0], np.sqrt(np.mean(resid**2, axis=-1))


def singularity_scan(m, tau_grid, scales, threshold=0.25, max_residual=0.5, workers=1):
    """Flag tau where the windowed transform grows like sigma^e with e > threshold.

    Consecutive flagged grid points form a run; each run contributes the
    grid point of largest exponent to ``singular_set``.
    """
    tau = np.asarray(tau_grid, dtype=float).ravel()
    scales = np.asarray(scales, dtype=float).ravel()
    if scales.size < 4:
        raise PreconditionError("need at least 4 scales")
    if np.any(np.diff(scales) <= 0) or scales[0] <= 0:
        raise PreconditionError("scales must be positive and increasing")
    if workers > 1 and tau.size > 1:
        parts = np.array_split(np.arange(tau.size), workers)
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(lambda idx: _window_sums(m, tau[idx], scales, _gaussian), parts))
        values = np.concatenate(chunks, axis=0)
    else:
        values = _window_sums(m, tau, scales, _gaussian)
    if len(m) == 0:
        exps, resid = np.zeros(tau.size), np.zeros(tau.size)
    else:
        exps, resid = growth_exponents(values, scales)
    inconclusive = resid > max_residual
    flags = (exps > threshold) & ~inconclusive
    runs, centers = [], []
    idx = np.flatnonzero(flags)
    if idx.size:
        breaks = np.flatnonzero(np.diff(idx) > 1)
        for seg in np.split(idx, breaks + 1):
            runs.append((tau[seg[0]], tau[seg[-1]]))
            centers.append(tau[seg[np.argmax(exps[seg])]])
    return ScanReport(tau, scales, values, exps, resid, flags, inconclusive,
                      np.array(centers), threshold, window_truncation_bound(m, scales[-1]), runs)


def lattice_norms(d, cutoff, shift=None):
    """Sorted distinct values |xi + shift| <= cutoff over xi in Z^d."""
    shift = np.zeros(d) if shift is None else np.asarray(shift, dtype=float)
    r = int(math.ceil(cutoff + np.abs(shift).max())) + 1
    ax = np.arange(-r, r + 1)
    grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    v = np.linalg.norm(grid + shift, axis=1)
    v = np.sort(v[v <= cutoff])
    if v.size == 0:
        return v
    keep = np.concatenate([[True], np.diff(v) > 1e-9])
    return v[keep]


# --------------------------------------------------------------------------
# Guinand-Meyer measure
# --------------------------------------------------------------------------


def guinand_meyer_measure(spec12, spec21, d=None):
    """Symmetrised holonomy-weighted comb.

    Atoms at +l with weight e^{i hol}/l^((d-1)/2) from ``spec12`` and at -l
    with weight (-i)^(d-1) e^{-i hol}/l^((d-1)/2) from ``spec21``.
    """
    d = spec12.dim if d is None else int(d)
    if spec12.dim != d or spec21.dim != d:
        raise PreconditionError("spectra dimension does not match d")
    if spec12.beta is None or spec21.beta is None:
        raise PreconditionError("both spectra need a closed one-form beta")
    if not np.allclose(spec12.beta, spec21.beta, rtol=0, atol=1e-15):
        raise PreconditionError("spectra were built with different beta")
    beta = np.asarray(spec12.beta)
    if np.all(np.abs(beta - np.round(beta)) < 1e-12):
        raise PreconditionError(
            "beta lies in Z^d: this is the excluded case, where the transform "
            "picks up an extra singularity at tau = 0")
    a = (d - 1) / 2
    w12 = spec12.phases / spec12.lengths**a
    w21 = (-1j) ** (d - 1) * np.conj(spec21.phases) / spec21.lengths**a
    return AtomicMeasure(np.concatenate([spec12.lengths, -spec21.lengths]),
                         np.concatenate([w12, w21]), growth=(d + 1) / 2,
                         cutoff=min(spec12.T, spec21.T))


def _fejer(p, sigma):
    return np.clip(1.0 - np.abs(p) / sigma, 0.0, None)


def atom_extract(m, lam, sigma):
    """Mass of the Fourier transform of m at lam, seen through a Fejer kernel.

    (2 pi/sigma) sum_{|p|<sigma} w_p e^{i lam p} (1 - |p|/sigma).  This pairs
    the transform with sinc^2(sigma (tau - lam)/2), which is 1 at lam, so a
    Dirac atom c delta_lam returns c up to leakage of order 1/sigma^2 from
    other atoms and of order 1/sigma from smooth parts.
    """
    if sigma <= 0:
        raise PreconditionError("sigma must be positive")
    if sigma > m.cutoff * (1 + 1e-12):
        raise RangeError(f"sigma={sigma} needs atoms beyond the cutoff {m.cutoff}")
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    vals = _window_sums(m, -lam_arr, [sigma], _fejer)[:, 0] * (2 * math.pi / sigma)
    return complex(vals[0]) if np.ndim(lam) == 0 else vals.reshape(np.shape(lam))
