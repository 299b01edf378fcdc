"""Orthogeodesics between K1 and the lattice translates K2 + 2*pi*xi.

For a lattice vector xi let D = K1 - K2 and w = 2*pi*xi.  The common
perpendicular maximises F(u) = <w, u> - h_D(u) over unit u; the maximum is
dist(w, D) when positive.  The solver is a Riemannian Newton iteration on the
sphere, vectorised over many xi at once, with a sampled restart and a
projected-gradient fallback for the rare elements Newton does not settle.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bodies import (ConvexBody, _ball_like_radius, minkowski_difference,
                     sphere_quadrature, steiner_coefficients)
from .errors import PreconditionError, RangeError, SolverError

KKT_TOL = 1e-8
TWO_PI = 2.0 * np.pi


# --------------------------------------------------------------------------
# closed one-form  beta = sum_j beta_j dx_j + df
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusFourierSeries:
    """Real trigonometric polynomial on R^d / 2 pi Z^d.

    ``terms`` is a tuple of (k, a, b) meaning a*cos(k.x) + b*sin(k.x).
    """

    terms: tuple = ()

    def __post_init__(self):
        clean = tuple((tuple(int(v) for v in k), float(a), float(b)) for k, a, b in self.terms)
        object.__setattr__(self, "terms", clean)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        for k, a, b in self.terms:
            kx = x @ np.asarray(k, dtype=float)
            out += a * np.cos(kx) + b * np.sin(kx)
        return out

    def to_list(self):
        return [{"k": list(k), "cos": a, "sin": b} for k, a, b in self.terms]


def holonomy_phase(beta, f, foot1, foot2):
    """exp(i * integral of beta along the segment foot1 -> foot2)."""
    foot1 = np.atleast_2d(foot1)
    foot2 = np.atleast_2d(foot2)
    angle = np.zeros(foot1.shape[0])
    if beta is not None:
        angle = angle + (foot2 - foot1) @ np.asarray(beta, dtype=float)
    if f is not None and f.terms:
        angle = angle + f(foot2) - f(foot1)
    return np.exp(1j * angle)


# --------------------------------------------------------------------------
# records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Orthogeodesic:
    xi: tuple
    length: float
    direction: np.ndarray
    foot1: np.ndarray
    foot2: np.ndarray
    holonomy_phase: complex = 1.0 + 0.0j

    @property
    def displacement(self):
        return self.foot2 - self.foot1


@dataclass(frozen=True, eq=False)
class LengthSpectrum:
    """Orthogeodesics with T0 < length <= T, stored column-wise.

    Rows are sorted by (length, xi lexicographically).
    """

    K1: ConvexBody
    K2: ConvexBody
    T0: float
    T: float
    xi: np.ndarray
    lengths: np.ndarray
    directions: np.ndarray
    foot1: np.ndarray
    foot2: np.ndarray
    phases: np.ndarray
    beta: tuple | None = None
    f: TorusFourierSeries | None = None
    orientation: str = "K1->K2"

    @property
    def dim(self):
        return self.K1.dim

    @property
    def displacement(self):
        return self.foot2 - self.foot1

    def __len__(self):
        return len(self.lengths)

    def records(self):
        return [Orthogeodesic(tuple(int(v) for v in self.xi[i]), float(self.lengths[i]),
                              self.directions[i], self.foot1[i], self.foot2[i],
                              complex(self.phases[i]))
                for i in range(len(self))]

    def truncate(self, T):
        if T > self.T:
            raise RangeError(f"T={T} exceeds spectrum cutoff {self.T}")
        n = int(np.searchsorted(self.lengths, T, side="right"))
        return LengthSpectrum(self.K1, self.K2, self.T0, T, self.xi[:n], self.lengths[:n],
                              self.directions[:n], self.foot1[:n], self.foot2[:n],
                              self.phases[:n], self.beta, self.f, self.orientation)

    def metadata(self):
        return {"K1": self.K1.to_dict(), "K2": self.K2.to_dict(), "T0": self.T0, "T": self.T,
                "beta": None if self.beta is None else list(self.beta),
                "f": None if self.f is None else self.f.to_list(),
                "orientation": self.orientation, "count": len(self)}


# --------------------------------------------------------------------------
# solver
# --------------------------------------------------------------------------


def _objective(D, W, U):
    return np.sum(W * U, axis=1) - D._h(U)


def _normalize(X):
    return X / np.linalg.norm(X, axis=1)[:, None]


def _newton(D, W, U, max_iter=60, tol=1e-13):
    """Riemannian Newton ascent of F(u) = <w,u> - h_D(u), elementwise.

    Every element follows its own iteration (own damping, own stopping), so
    results do not depend on how the batch is partitioned.
    """
    n, d = W.shape
    U = U.copy()
    F = _objective(D, W, U)
    scale = 1.0 + np.linalg.norm(W, axis=1)
    done = np.zeros(n, dtype=bool)
    eye = np.eye(d)
    for _ in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        u, w = U[act], W[act]
        g = w - D._grad(u)
        ug = np.sum(u * g, axis=1)
        pg = g - ug[:, None] * u
        pg_norm = np.linalg.norm(pg, axis=1)
        fin = pg_norm <= tol * scale[act]
        done[act[fin]] = True
        keep = ~fin
        act, u, w, ug, pg = act[keep], u[keep], w[keep], ug[keep], pg[keep]
        if act.size == 0:
            break
        P = eye[None] - u[:, :, None] * u[:, None, :]
        H = D._hess(u)
        A = P @ H @ P + ug[:, None, None] * P + u[:, :, None] * u[:, None, :]
        ok = ug > 0
        v = np.empty_like(pg)
        if ok.any():
            v[ok] = np.linalg.solve(A[ok], pg[ok][:, :, None])[:, :, 0]
        # not locally concave yet: gradient step of length ~ |pg| / |w|
        v[~ok] = pg[~ok] / (1.0 + np.linalg.norm(w[~ok], axis=1))[:, None]
        step = np.ones(act.size)
        f0 = F[act]
        pending = np.ones(act.size, dtype=bool)
        for _ in range(40):
            idx = np.flatnonzero(pending)
            if idx.size == 0:
                break
            cand = _normalize(u[idx] + step[idx, None] * v[idx])
            fc = _objective(D, w[idx], cand)
            good = fc >= f0[idx] - 1e-15 * scale[act[idx]]
            gi = idx[good]
            U[act[gi]] = cand[good]
            F[act[gi]] = fc[good]
            pending[gi] = False
            step[idx[~good]] *= 0.5
        # line search exhausted: stationary to working precision
        done[act[pending]] = True
    return U, F


def _projected_gradient(D, w, u, max_iter=5000):
    w, u = w[None], u[None]
    f = _objective(D, w, u)[0]
    step = 1.0 / (1.0 + np.linalg.norm(w))
    for _ in range(max_iter):
        g = w - D._grad(u)
        pg = g - np.sum(u * g) * u
        if np.linalg.norm(pg) <= 1e-12 * (1.0 + np.linalg.norm(w)):
            break
        while step > 1e-18:
            cand = _normalize(u + step * pg)
            fc = _objective(D, w, cand)[0]
            if fc > f:
                u, f = cand, fc
                step *= 2.0
                break
            step *= 0.5
        else:
            break
    return u[0], f


def _sampled_start(D, W):
    quad = sphere_quadrature(D.dim, 2048 if D.dim == 2 else (48, 96))
    vals = W @ quad.nodes.T - D._h(quad.nodes)[None, :]
    best = np.argmax(vals, axis=1)
    return quad.nodes[best]


def _kkt_residual(D, W, U, F):
    foot_gap = W - D._grad(U)
    return np.linalg.norm(foot_gap - F[:, None] * U, axis=1)


def solve_perpendiculars(K1, K2, xis, method="auto"):
    """Batch common perpendiculars.

    Returns (valid mask, lengths, directions).  ``valid`` is False where the
    bodies meet (max F <= 0).
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=np.int64))
    D = minkowski_difference(K1, K2)
    W = TWO_PI * xis.astype(float)
    n = W.shape[0]
    r = _ball_like_radius(D)
    if r is not None and method != "newton":
        c = D.steiner_point
        diff = W - c
        dist = np.linalg.norm(diff, axis=1)
        L = dist - r
        valid = L > 0
        U = np.zeros_like(W)
        U[valid] = diff[valid] / dist[valid, None]
        return valid, np.where(valid, L, 0.0), U

    anchor = D.steiner_point
    diff = W - anchor
    dn = np.linalg.norm(diff, axis=1)
    U0 = np.zeros_like(W)
    nz = dn > 0
    # far lattice points: start along xi, as the bodies are small
    U0[nz] = diff[nz] / dn[nz, None]
    U0[~nz, 0] = 1.0
    U, F = _newton(D, W, U0)
    res = _kkt_residual(D, W, U, F)
    bad = np.flatnonzero((res > KKT_TOL) | (F <= 0) | ~np.isfinite(F))
    if bad.size:
        U1 = _sampled_start(D, W[bad])
        Ub, Fb = _newton(D, W[bad], U1)
        U[bad], F[bad] = Ub, Fb
        res[bad] = _kkt_residual(D, W[bad], Ub, Fb)
    still = np.flatnonzero((res > KKT_TOL) & (F > 0))
    for i in still:
        U[i], F[i] = _projected_gradient(D, W[i], U[i])
        res[i] = _kkt_residual(D, W[i:i + 1], U[i:i + 1], F[i:i + 1])[0]
    failed = (res > KKT_TOL) & (F > 0)
    if failed.any():
        raise SolverError(f"common perpendicular did not converge for {failed.sum()} lattice vectors",
                          xis[failed])
    valid = F > 0
    return valid, np.where(valid, F, 0.0), U


def common_perpendicular(K1, K2, xi, beta=None, f=None):
    """The orthogeodesic from K1 to K2 + 2 pi xi, or None if the bodies meet."""
    if K1.dim != K2.dim:
        raise PreconditionError(f"dimension mismatch: {K1.dim} vs {K2.dim}")
    xi = np.asarray(xi, dtype=np.int64).reshape(1, -1)
    valid, L, U = solve_perpendiculars(K1, K2, xi)
    if not valid[0]:
        return None
    u = U[0]
    foot1 = K1.grad(u)
    foot2 = TWO_PI * xi[0] + K2.grad(-u)
    phase = holonomy_phase(beta, f, foot1, foot2)[0]
    return Orthogeodesic(tuple(int(v) for v in xi[0]), float(L[0]), u, foot1, foot2, complex(phase))


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------


def default_T0(K1, K2):
    """diam(K1) + diam(K2) + 1."""
    return K1.diameter + K2.diameter + 1.0


def lattice_ball(d, radius):
    """Integer vectors with |2 pi xi| <= radius, in lexicographic order."""
    m = int(math.floor(radius / TWO_PI))
    ax = np.arange(-m, m + 1)
    grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    keep = np.einsum("ij,ij->i", grid, grid) * TWO_PI**2 <= radius**2
    return grid[keep]


def length_spectrum(K1, K2, T, beta=None, f=None, T0=None, workers=1, chunk=20000,
                    orientation="K1->K2"):
    """All orthogeodesics with T0 < length <= T, sorted deterministically."""
    if K1.dim != K2.dim:
        raise PreconditionError(f"dimension mismatch: {K1.dim} vs {K2.dim}")
    d = K1.dim
    T0 = default_T0(K1, K2) if T0 is None else float(T0)
    if not T > T0:
        raise PreconditionError(f"T={T} must exceed T0={T0}")
    if beta is not None and len(beta) != d:
        raise PreconditionError(f"beta must have {d} components")
    xis = lattice_ball(d, T + K1.max_norm + K2.max_norm)
    blocks = [xis[i:i + chunk] for i in range(0, len(xis), chunk)]
    failures = []

    def run(block):
        try:
            return solve_perpendiculars(K1, K2, block)
        except SolverError as exc:
            failures.extend(exc.xi)
            return None

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    if failures:
        raise SolverError(f"solver failed for {len(failures)} lattice vectors", failures)
    valid = np.concatenate([r[0] for r in results])
    L = np.concatenate([r[1] for r in results])
    U = np.concatenate([r[2] for r in results])
    keep = valid & (L > T0) & (L <= T)
    xis, L, U = xis[keep], L[keep], U[keep]
    order = np.lexsort(tuple(xis[:, j] for j in range(d - 1, -1, -1)) + (L,))
    xis, L, U = xis[order], L[order], U[order]
    foot1 = K1.grad(U) if len(U) else np.zeros((0, d))
    foot2 = TWO_PI * xis + (K2.grad(-U) if len(U) else np.zeros((0, d)))
    phases = holonomy_phase(beta, f, foot1, foot2) if len(U) else np.zeros(0, complex)
    return LengthSpectrum(K1, K2, T0, float(T), xis, L, U, foot1, foot2, phases,
                          None if beta is None else tuple(float(b) for b in beta), f, orientation)


def swapped_spectrum(spec, T=None, workers=1):
    """The spectrum of the pair (K2, K1) with the same beta and f."""
    return length_spectrum(spec.K2, spec.K1, spec.T if T is None else T, spec.beta, spec.f,
                           T0=spec.T0, workers=workers,
                           orientation="K2->K1" if spec.orientation == "K1->K2" else "K1->K2")


def counting_function(spec, T):
    """#{gamma : T0 < length <= T}."""
    T = np.asarray(T, dtype=float)
    if np.any(T > spec.T):
        raise RangeError(f"T exceeds spectrum cutoff {spec.T}")
    return np.searchsorted(spec.lengths, T, side="right")


def steiner_count(K1, K2, T):
    """Vol((K1 - K2) + T B) / (2 pi)^d, the lattice-point prediction."""
    D = minkowski_difference(K1, K2)
    a = steiner_coefficients(D)
    return np.polyval(a[::-1], np.asarray(T, dtype=float)) / TWO_PI ** D.dim


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------


def spectrum_to_csv(spec):
    """CSV text with a leading '# {json metadata}' line."""
    d = spec.dim
    buf = io.StringIO()
    buf.write("# " + json.dumps(spec.metadata(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"xi{j}" for j in range(d)] + ["length"] + [f"u{j}" for j in range(d)]
               + [f"foot1_{j}" for j in range(d)] + [f"foot2_{j}" for j in range(d)]
               + ["phase_re", "phase_im"])
    for i in range(len(spec)):
        w.writerow([int(v) for v in spec.xi[i]] + [repr(float(spec.lengths[i]))]
                   + [repr(float(v)) for v in spec.directions[i]]
                   + [repr(float(v)) for v in spec.foot1[i]]
                   + [repr(float(v)) for v in spec.foot2[i]]
                   + [repr(float(spec.phases[i].real)), repr(float(spec.phases[i].imag))])
    return buf.getvalue()


def read_spectrum_csv(text):
    """Parse ``spectrum_to_csv`` output into (metadata, column dict)."""
    lines = text.splitlines()
    meta = json.loads(lines[0][2:])
    rows = list(csv.reader(lines[1:]))
    header, body = rows[0], rows[1:]
    cols = {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}
    return meta, cols
