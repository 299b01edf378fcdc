"""Upper incomplete gamma function for complex order, vectorised."""
import mpmath
import numpy as np

# below this |x| the continued fraction converges slowly; defer to mpmath
CF_MIN_ARG = 1.5


def _gamma_cf(a, x, max_iter=400, eps=1e-16):
    """Modified Lentz evaluation of the Legendre continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full(np.broadcast(a, x).shape, 1.0 / tiny, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(h.shape, dtype=bool)
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > eps
        if not active.any():
            break
    return np.exp(-x + a * np.log(x)) * h


def upper_gamma(a, x):
    """Gamma(a, x) = int_x^inf t^(a-1) e^(-t) dt, broadcasting over a and x.

    ``x`` may be complex with Re(x) >= 0 (principal branch of x^a).
    """
    a, x = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(x, dtype=complex))
    shape = a.shape
    a, x = a.ravel(), x.ravel()
    out = np.empty(a.shape, dtype=complex)
    big = np.abs(x) >= CF_MIN_ARG
    if big.any():
        out[big] = _gamma_cf(a[big], x[big])
    for i in np.flatnonzero(~big):
        out[i] = complex(mpmath.gammainc(mpmath.mpc(a[i]), mpmath.mpc(x[i])))
    return out.reshape(shape)
