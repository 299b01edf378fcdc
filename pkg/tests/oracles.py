"""Independent reference values used across the test modules."""
import math

import mpmath
import numpy as np


def ellipse_distance(points, a, b, iters=200):
    """Euclidean distance from ``points`` (n, 2) to the solid ellipse x^2/a^2 + y^2/b^2 <= 1.

    The nearest boundary point of an exterior point (x, y) is
    (a^2 x/(t + a^2), b^2 y/(t + b^2)) with t > 0 the root of
    (a x/(t + a^2))^2 + (b y/(t + b^2))^2 = 1, found here by bisection.
    """
    p = np.abs(np.atleast_2d(np.asarray(points, dtype=float)))
    x, y = p[:, 0], p[:, 1]
    inside = (x / a) ** 2 + (y / b) ** 2 <= 1
    lo = np.zeros_like(x)
    hi = np.maximum(a, b) * np.hypot(x, y) + 1.0
    for _ in range(iters):
        t = 0.5 * (lo + hi)
        g = (a * x / (t + a * a)) ** 2 + (b * y / (t + b * b)) ** 2 - 1
        lo = np.where(g > 0, t, lo)
        hi = np.where(g > 0, hi, t)
    t = 0.5 * (lo + hi)
    qx, qy = a * a * x / (t + a * a), b * b * y / (t + b * b)
    return np.where(inside, 0.0, np.hypot(x - qx, y - qy))


def epstein_z2_oracle(s):
    """sum over nonzero xi in Z^2 of |xi|^(-s) = 4 zeta(s/2) beta(s/2)."""
    s = mpmath.mpc(s)
    beta = mpmath.dirichlet(s / 2, [0, 1, 0, -1])
    return complex(4 * mpmath.zeta(s / 2) * beta)


def shell_counts(d, radius_sq):
    """Number of xi in Z^d with |xi|^2 = n, for n <= radius_sq."""
    r = int(math.isqrt(radius_sq))
    ax = np.arange(-r, r + 1)
    grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    n2 = np.sum(grid**2, axis=1)
    return np.bincount(n2[n2 <= radius_sq], minlength=radius_sq + 1)
