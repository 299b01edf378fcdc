"""Strictly convex bodies described by their support functions.

Every body exposes the positively homogeneous extension ``h(x)`` of its
support function together with its gradient (the inverse Gauss map on unit
vectors) and its Euclidean Hessian.  Restricted to the tangent plane of the
sphere at ``u`` that Hessian is the matrix of principal radii of curvature,
which is all the Steiner machinery needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .errors import AccuracyError, InvalidBodyError, PreconditionError

UNIT_TOL = 1e-12


def ball_volume(d):
    """Volume of the unit ball in R^d."""
    return math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0))


def sphere_area(d):
    """(d-1)-volume of the unit sphere in R^d."""
    return d * ball_volume(d)


def _as_rows(u, dim):
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    if u.shape[-1] != dim:
        raise PreconditionError(f"expected vectors of dimension {dim}, got {u.shape[-1]}")
    return u, single


def _unsqueeze(val, single):
    return val[0] if single else val


# --------------------------------------------------------------------------
# sphere quadrature
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Nodes and positive weights on S^{d-1}; weights sum to its area.

    For d=2 the rule is the equispaced trapezoid rule, exact on
    trigonometric polynomials of degree < ``len(nodes)``.  For d=3 it is
    Gauss-Legendre in cos(colatitude) times equispaced longitude.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


def circle_quadrature(n=512, offset=0.0):
    phi = offset + 2.0 * np.pi * np.arange(n) / n
    nodes = np.column_stack([np.cos(phi), np.sin(phi)])
    weights = np.full(n, 2.0 * np.pi / n)
    return SphereQuadrature(2, nodes, weights, degree=n - 1)


def sphere2_quadrature(n_theta=64, n_phi=128):
    z, wz = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    rho = np.sqrt(1.0 - zz**2)
    nodes = np.stack([rho * np.cos(pp), rho * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    weights = (wz[:, None] * np.full(n_phi, 2.0 * np.pi / n_phi)[None, :]).ravel()
    return SphereQuadrature(3, nodes, weights, degree=min(2 * n_theta - 1, n_phi - 1))


def sphere_quadrature(dim, resolution=None):
    """Default quadrature: 512 nodes on the circle, 64x128 on S^2."""
    if dim == 2:
        return circle_quadrature(resolution or 512)
    if dim == 3:
        n_theta, n_phi = resolution or (64, 128)
        return sphere2_quadrature(n_theta, n_phi)
    raise PreconditionError(f"sphere quadrature only implemented for d=2,3 (got d={dim})")


def tangent_basis(u):
    """Orthonormal basis of u-perp, shape (n, d, d-1), for d = 2, 3."""
    u = np.atleast_2d(u)
    d = u.shape[1]
    if d == 2:
        return np.stack([-u[:, 1], u[:, 0]], axis=-1)[:, :, None]
    if d == 3:
        a = np.zeros_like(u)
        use_x = np.abs(u[:, 0]) < 0.9
        a[use_x, 0] = 1.0
        a[~use_x, 1] = 1.0
        e1 = a - np.sum(a * u, axis=1)[:, None] * u
        e1 /= np.linalg.norm(e1, axis=1)[:, None]
        e2 = np.cross(u, e1)
        return np.stack([e1, e2], axis=-1)
    raise PreconditionError("tangent bases are only needed (and built) for d=2,3")


# --------------------------------------------------------------------------
# bodies
# --------------------------------------------------------------------------


class ConvexBody:
    """Base class.  Subclasses are frozen dataclasses, hence hashable."""

    kind = "abstract"
    dim: int

    # -- support function and its derivatives on batches of vectors --------
    def h(self, x):
        """Homogeneous support function on arbitrary nonzero vectors."""
        x, single = _as_rows(x, self.dim)
        return _unsqueeze(self._h(x), single)

    def grad(self, x):
        x, single = _as_rows(x, self.dim)
        return _unsqueeze(self._grad(x), single)

    def hess(self, x):
        x, single = _as_rows(x, self.dim)
        return _unsqueeze(self._hess(x), single)

    def radii_matrix(self, u):
        """Tangential Hessian (principal radii of curvature) at unit u."""
        u, single = _as_rows(u, self.dim)
        E = tangent_basis(u)
        R = np.einsum("nia,nij,njb->nab", E, self._hess(u), E)
        return _unsqueeze(R, single)

    # -- geometry ---------------------------------------------------------
    def reflect(self):
        """The body -K."""
        raise NotImplementedError

    def translate(self, v):
        raise NotImplementedError

    @property
    def steiner_point(self):
        """A point in the relative interior, used as a solver anchor."""
        raise NotImplementedError

    @property
    def diameter(self):
        raise NotImplementedError

    @property
    def max_norm(self):
        """Upper bound for max |k| over k in K."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    @property
    def is_ball_like(self):
        """True for points and balls, which have closed-form geometry."""
        return False


def _unit(x):
    n = np.linalg.norm(x, axis=1)
    return x / n[:, None], n


@dataclass(frozen=True)
class Point(ConvexBody):
    coords: tuple
    kind = "point"

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        if len(self.coords) < 2:
            raise InvalidBodyError("bodies must live in dimension d >= 2")

    @property
    def dim(self):
        return len(self.coords)

    @cached_property
    def _p(self):
        return np.array(self.coords)

    def _h(self, x):
        return x @ self._p

    def _grad(self, x):
        return np.broadcast_to(self._p, x.shape).copy()

    def _hess(self, x):
        return np.zeros((x.shape[0], self.dim, self.dim))

    def reflect(self):
        return Point(tuple(-c for c in self.coords))

    def translate(self, v):
        return Point(tuple(np.add(self.coords, v)))

    @property
    def steiner_point(self):
        return self._p.copy()

    @property
    def diameter(self):
        return 0.0

    @property
    def max_norm(self):
        return float(np.linalg.norm(self._p))

    @property
    def is_ball_like(self):
        return True

    @property
    def radius(self):
        return 0.0

    @property
    def center(self):
        return self.coords

    def to_dict(self):
        return {"kind": "point", "coords": list(self.coords)}


@dataclass(frozen=True)
class Ball(ConvexBody):
    center: tuple
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if len(self.center) < 2:
            raise InvalidBodyError("bodies must live in dimension d >= 2")
        if not self.radius > 0.0:
            raise InvalidBodyError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self):
        return len(self.center)

    @cached_property
    def _c(self):
        return np.array(self.center)

    def _h(self, x):
        return x @ self._c + self.radius * np.linalg.norm(x, axis=1)

    def _grad(self, x):
        u, _ = _unit(x)
        return self._c + self.radius * u

    def _hess(self, x):
        u, n = _unit(x)
        eye = np.eye(self.dim)[None]
        return self.radius * (eye - u[:, :, None] * u[:, None, :]) / n[:, None, None]

    def reflect(self):
        return Ball(tuple(-c for c in self.center), self.radius)

    def translate(self, v):
        return Ball(tuple(np.add(self.center, v)), self.radius)

    @property
    def steiner_point(self):
        return self._c.copy()

    @property
    def diameter(self):
        return 2.0 * self.radius

    @property
    def max_norm(self):
        return float(np.linalg.norm(self._c)) + self.radius

    @property
    def is_ball_like(self):
        return True

    def to_dict(self):
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Ellipsoid(ConvexBody):
    """{c + x : x^T Q^{-1} x <= 1}, support h(u) = c.u + sqrt(u^T Q u)."""

    center: tuple
    Q: tuple
    kind = "ellipsoid"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        Q = np.asarray(self.Q, dtype=float)
        d = len(self.center)
        if Q.shape != (d, d):
            raise InvalidBodyError(f"Q must be {d}x{d}, got shape {Q.shape}")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-14 * max(1.0, np.abs(Q).max())):
            raise InvalidBodyError("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise InvalidBodyError("Q must be positive definite (strict convexity)")
        object.__setattr__(self, "Q", tuple(tuple(float(v) for v in row) for row in Q))

    @property
    def dim(self):
        return len(self.center)

    @cached_property
    def _c(self):
        return np.array(self.center)

    @cached_property
    def _Q(self):
        return np.array(self.Q)

    def _h(self, x):
        return x @ self._c + np.sqrt(np.einsum("ni,ij,nj->n", x, self._Q, x))

    def _grad(self, x):
        Qx = x @ self._Q
        q = np.sqrt(np.sum(Qx * x, axis=1))
        return self._c + Qx / q[:, None]

    def _hess(self, x):
        Qx = x @ self._Q
        q = np.sqrt(np.sum(Qx * x, axis=1))
        return (self._Q[None] / q[:, None, None]
                - Qx[:, :, None] * Qx[:, None, :] / q[:, None, None] ** 3)

    def reflect(self):
        return Ellipsoid(tuple(-c for c in self.center), self.Q)

    def translate(self, v):
        return Ellipsoid(tuple(np.add(self.center, v)), self.Q)

    @property
    def steiner_point(self):
        return self._c.copy()

    @cached_property
    def semi_axes(self):
        return np.sqrt(np.linalg.eigvalsh(self._Q))

    @property
    def diameter(self):
        return 2.0 * float(self.semi_axes.max())

    @property
    def max_norm(self):
        return float(np.linalg.norm(self._c) + self.semi_axes.max())

    def to_dict(self):
        return {"kind": "ellipsoid", "center": list(self.center), "Q": [list(r) for r in self.Q]}


@dataclass(frozen=True)
class SupportSeries2D(ConvexBody):
    """Planar body with h(phi) = a0 + sum_k cos_k cos(k phi) + sin_k sin(k phi).

    The k = 1 coefficients are the Steiner point; strict convexity means
    h + h'' > 0 everywhere, checked on a dense grid at construction.
    """

    a0: float
    cos: tuple = ()
    sin: tuple = ()
    kind = "support_series_2d"
    check_points: int = field(default=4096, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "a0", float(self.a0))
        n = max(len(self.cos), len(self.sin))
        cos = tuple(float(v) for v in self.cos) + (0.0,) * (n - len(self.cos))
        sin = tuple(float(v) for v in self.sin) + (0.0,) * (n - len(self.sin))
        object.__setattr__(self, "cos", cos)
        object.__setattr__(self, "sin", sin)
        phi = 2.0 * np.pi * np.arange(self.check_points) / self.check_points
        curv = self.curvature_radius(phi)
        if curv.min() <= 0.0:
            raise InvalidBodyError(
                f"support series is not strictly convex: min(h + h'') = {curv.min():.3e}")

    dim = 2

    @cached_property
    def _k(self):
        return np.arange(1, len(self.cos) + 1, dtype=float)

    def _terms(self, phi, order):
        kphi = np.multiply.outer(phi, self._k)
        c, s = np.cos(kphi), np.sin(kphi)
        a, b = np.array(self.cos), np.array(self.sin)
        k = self._k
        if order == 0:
            return self.a0 + c @ a + s @ b
        if order == 1:
            return -(s * k) @ a + (c * k) @ b
        if order == 2:
            return -(c * k**2) @ a - (s * k**2) @ b
        raise ValueError(order)

    def h_phi(self, phi):
        return self._terms(np.asarray(phi, dtype=float), 0)

    def curvature_radius(self, phi):
        phi = np.asarray(phi, dtype=float)
        return self._terms(phi, 0) + self._terms(phi, 2)

    def _h(self, x):
        r = np.linalg.norm(x, axis=1)
        phi = np.arctan2(x[:, 1], x[:, 0])
        return r * self._terms(phi, 0)

    def _grad(self, x):
        phi = np.arctan2(x[:, 1], x[:, 0])
        h, dh = self._terms(phi, 0), self._terms(phi, 1)
        c, s = np.cos(phi), np.sin(phi)
        return np.column_stack([h * c - dh * s, h * s + dh * c])

    def _hess(self, x):
        r = np.linalg.norm(x, axis=1)
        phi = np.arctan2(x[:, 1], x[:, 0])
        rho = self.curvature_radius(phi) / r
        t = np.column_stack([-np.sin(phi), np.cos(phi)])
        return rho[:, None, None] * t[:, :, None] * t[:, None, :]

    def reflect(self):
        sign = np.where(self._k % 2 == 1, -1.0, 1.0)
        return SupportSeries2D(self.a0, tuple(sign * self.cos), tuple(sign * self.sin))

    def translate(self, v):
        cos, sin = list(self.cos) or [0.0], list(self.sin) or [0.0]
        cos[0] += float(v[0])
        sin[0] += float(v[1])
        return SupportSeries2D(self.a0, tuple(cos), tuple(sin))

    @property
    def steiner_point(self):
        if not self.cos:
            return np.zeros(2)
        return np.array([self.cos[0], self.sin[0]])

    @cached_property
    def _dense_h(self):
        phi = 2.0 * np.pi * np.arange(self.check_points) / self.check_points
        return self.h_phi(phi), np.abs(self._terms(phi, 1)).max()

    @property
    def diameter(self):
        h, dh = self._dense_h
        width = h + np.roll(h, self.check_points // 2)
        return float(width.max() + 2 * dh * np.pi / self.check_points)

    @property
    def max_norm(self):
        h, dh = self._dense_h
        return float(max(h.max(), 0.0) + dh * 2 * np.pi / self.check_points)

    def to_dict(self):
        return {"kind": "support_series_2d", "a0": self.a0,
                "cos": list(self.cos), "sin": list(self.sin)}


@dataclass(frozen=True)
class MinkowskiSum(ConvexBody):
    """K_1 + ... + K_m; support functions add."""

    parts: tuple
    kind = "minkowski_sum"

    def __post_init__(self):
        dims = {p.dim for p in self.parts}
        if len(dims) != 1:
            raise PreconditionError(f"dimension mismatch among summands: {sorted(dims)}")

    @property
    def dim(self):
        return self.parts[0].dim

    def _h(self, x):
        return sum(p._h(x) for p in self.parts)

    def _grad(self, x):
        return sum(p._grad(x) for p in self.parts)

    def _hess(self, x):
        return sum(p._hess(x) for p in self.parts)

    def reflect(self):
        return MinkowskiSum(tuple(p.reflect() for p in self.parts))

    def translate(self, v):
        return MinkowskiSum((self.parts[0].translate(v),) + self.parts[1:])

    @property
    def steiner_point(self):
        return sum(p.steiner_point for p in self.parts)

    @property
    def diameter(self):
        return sum(p.diameter for p in self.parts)

    @property
    def max_norm(self):
        return sum(p.max_norm for p in self.parts)

    def to_dict(self):
        return {"kind": "minkowski_sum", "parts": [p.to_dict() for p in self.parts]}


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def body_from_dict(spec):
    """Parse the JSON body description used in configs."""
    kind = spec.get("kind")
    try:
        if kind == "point":
            return Point(tuple(spec["coords"]))
        if kind == "ball":
            return Ball(tuple(spec["center"]), spec["radius"])
        if kind == "ellipsoid":
            return Ellipsoid(tuple(spec["center"]), spec["Q"])
        if kind == "support_series_2d":
            return SupportSeries2D(spec["a0"], tuple(spec.get("cos", ())), tuple(spec.get("sin", ())))
    except KeyError as exc:
        raise InvalidBodyError(f"missing field {exc.args[0]!r} for body kind {kind!r}") from None
    raise InvalidBodyError(f"unknown body kind {kind!r}")


def _check_unit(u):
    u = np.asarray(u, dtype=float)
    norms = np.linalg.norm(np.atleast_2d(u), axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise PreconditionError(f"direction must be a unit vector (|u| = {norms.max():.15g})")
    return u


def support(body, u):
    """h_K(u) for unit u."""
    return body.h(_check_unit(u))


def boundary_point(body, u):
    """The boundary point with outward normal u, i.e. the gradient of h at u."""
    return body.grad(_check_unit(u))


def minkowski_sum(K1, K2):
    if K1.dim != K2.dim:
        raise PreconditionError(f"dimension mismatch: {K1.dim} vs {K2.dim}")
    if isinstance(K2, Point):
        return K1.translate(K2.coords)
    if isinstance(K1, Point):
        return K2.translate(K1.coords)
    if isinstance(K1, Ball) and isinstance(K2, Ball):
        return Ball(tuple(np.add(K1.center, K2.center)), K1.radius + K2.radius)
    parts = []
    for K in (K1, K2):
        parts.extend(K.parts if isinstance(K, MinkowskiSum) else (K,))
    return MinkowskiSum(tuple(parts))


def minkowski_difference(K1, K2):
    """K1 - K2 = {a - b}, with support h_{K1}(u) + h_{K2}(-u)."""
    if K1.dim != K2.dim:
        raise PreconditionError(f"dimension mismatch: {K1.dim} vs {K2.dim}")
    return minkowski_sum(K1, K2.reflect())


def _ball_like_radius(K):
    if isinstance(K, (Point, Ball)):
        return K.radius
    if isinstance(K, MinkowskiSum) and all(isinstance(p, (Point, Ball)) for p in K.parts):
        return sum(p.radius for p in K.parts)
    return None


def _steiner_integral(K, t, quad):
    u = quad.nodes
    R = K.radii_matrix(u)
    h = K.h(u)
    m = K.dim - 1
    t = np.atleast_1d(np.asarray(t, dtype=float))
    eye = np.eye(m)
    out = np.empty(t.shape)
    for i, ti in enumerate(t):
        det = np.linalg.det(R + ti * eye) if m > 1 else R[:, 0, 0] + ti
        out[i] = quad.integrate((h + ti) * det) / K.dim
    return out


def steiner_volume(K, t, quad=None, rtol=1e-8):
    """Volume of the outer parallel body K + tB.

    Computed by the mixed-volume boundary integral
    (1/d) * int_S (h + t) det(R + t I) dsigma, with R the radii matrix.  The
    result is cross-checked against the same integral on a rule of half the
    resolution; disagreement beyond ``rtol`` raises AccuracyError.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise PreconditionError("t must be nonnegative")
    d = K.dim
    r = _ball_like_radius(K)
    if r is not None:
        return ball_volume(d) * (r + t_arr) ** d
    if d not in (2, 3):
        raise PreconditionError(f"generic bodies only supported for d=2,3 (got d={d})")
    quad = quad or sphere_quadrature(d)
    fine = _steiner_integral(K, t_arr, quad)
    if d == 2:
        coarse_quad = circle_quadrature(len(quad.nodes) // 2, offset=np.pi / len(quad.nodes))
    else:
        n_theta = int(round(np.sqrt(len(quad.nodes) / 2)))
        coarse_quad = sphere2_quadrature(max(n_theta // 2, 4), max(n_theta, 8))
    coarse = _steiner_integral(K, t_arr, coarse_quad)
    err = np.abs(fine - coarse) / np.maximum(np.abs(fine), 1e-300)
    if np.any(err > rtol):
        raise AccuracyError(
            f"Steiner integral not resolved: relative change {err.max():.2e} on refinement")
    return fine.reshape(t_arr.shape) if t_arr.ndim else float(fine[0])


def steiner_coefficients(K, quad=None):
    """Coefficients a_l of Vol(K + tB) = sum_l a_l t^l, l = 0..d."""
    d = K.dim
    r = _ball_like_radius(K)
    if r is not None:
        return np.array([math.comb(d, l) * r ** (d - l) for l in range(d + 1)]) * ball_volume(d)
    nodes = 0.5 * np.arange(d + 1)
    vols = steiner_volume(K, nodes, quad)
    V = np.vander(nodes, d + 1, increasing=True)
    return np.linalg.solve(V, vols)


def intrinsic_volumes(K, quad=None):
    """(V_0, ..., V_d): V_{d-l} = a_l / omega_l with omega_l the unit-ball volume."""
    d = K.dim
    if isinstance(K, Point):
        out = np.zeros(d + 1)
        out[0] = 1.0
        return out
    a = steiner_coefficients(K, quad)
    V = np.empty(d + 1)
    for l in range(d + 1):
        V[d - l] = a[l] / ball_volume(l)
    return V
