"""Oscillatory integrals, correlations, projectors, Sobolev norms and transforms."""
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import j1

from orthospec.correlations import (BumpFunction, ConstantFunction, HarmonicFunction, Observable,
                                    SumFunction, anisotropic_norm, correlation, envelope_exponent,
                                    invariant_term, laplace_transform, mellin_transform,
                                    oscillatory_integral, projectors, stationary_phase_leading)
from orthospec.errors import (AccuracyError, ConfigError, DomainError, PoleError,
                              PreconditionError, ScaleError, SingularityError)

ONE = ConstantFunction(1.0)
SIN = SumFunction((HarmonicFunction(2, 1, amplitude=-0.5j), HarmonicFunction(2, -1, amplitude=0.5j)))


def single(dim, xi, f=ONE):
    return Observable(dim, {xi: f})


def mixed2():
    return Observable(2, {(0, 0): ONE,
                          (1, 0): SumFunction((ONE, HarmonicFunction(2, 1, amplitude=0.5))),
                          (1, 2): BumpFunction((0.3, 1.0), 0.8)})


def mixed3():
    return Observable(3, {(0, 0, 0): ConstantFunction(0.5),
                          (1, 0, 0): SumFunction((ONE, HarmonicFunction(3, 1, 0, 0.5))),
                          (0, 1, 1): HarmonicFunction(3, 2, 1)})


# --------------------------------------------------------------------------
# oscillatory integrals
# --------------------------------------------------------------------------


def test_oscillatory_integral_at_zero():
    f = SumFunction((ONE, HarmonicFunction(2, 2, amplitude=0.3)))
    assert oscillatory_integral(f, (1, 0), 0.0) == pytest.approx(2 * math.pi, abs=1e-12)
    assert oscillatory_integral(ONE, (0, 1, 0), 0.0) == pytest.approx(4 * math.pi, abs=1e-12)


@pytest.mark.parametrize("xi", [(1, 0), (2, 3), (-5, 1)])
def test_bessel_oracle_d2(xi):
    r = math.hypot(*xi)
    t = np.array([0.3, 1.0, 7.5, 40.0, 180.0])
    vals = oscillatory_integral(ONE, xi, t)
    ref = [2 * math.pi * float(mpmath.besselj(0, ti * r)) for ti in t]
    np.testing.assert_allclose(vals, ref, atol=1e-9)


@pytest.mark.parametrize("xi", [(1, 0, 0), (1, 1, 2)])
def test_sinc_oracle_d3(xi):
    r = math.sqrt(sum(v * v for v in xi))
    t = np.array([0.5, 3.0, 25.0, 150.0])
    np.testing.assert_allclose(oscillatory_integral(ONE, xi, t), 4 * math.pi * np.sin(t * r) / (t * r),
                               atol=1e-9)


def test_scale_guard():
    with pytest.raises(ScaleError):
        oscillatory_integral(ONE, (3, 4), 3e4)


def _nonstationary_envelope(dim):
    if dim == 2:
        xi, bump = (1, 0), BumpFunction((0.0, 1.0), math.pi / 2 - 0.3)
    else:
        xi, bump = (0, 0, 1), BumpFunction((1.0, 0.0, 0.0), math.pi / 2 - 0.3)
    t = np.linspace(5, 300, 6000)
    return t, oscillatory_integral(bump, xi, t)


@pytest.mark.parametrize("dim", [2, 3])
def test_nonstationary_phase_decay(dim):
    t, vals = _nonstationary_envelope(dim)
    for N in (1, 2, 3):
        # sup over [T, 2T] of |I| t^N must fall once t is past the transition
        scaled = np.abs(vals) * t**N
        late = scaled[t > 150].max()
        early = scaled[(t > 30) & (t < 60)].max()
        assert late < early
    assert envelope_exponent(t[t > 50], vals[t > 50]) < -3


# --------------------------------------------------------------------------
# correlations
# --------------------------------------------------------------------------


def test_constant_observable_is_invariant():
    for dim, area in ((2, 2 * math.pi), (3, 4 * math.pi)):
        phi = single(dim, (0,) * dim)
        np.testing.assert_allclose(correlation(phi, phi, np.linspace(0, 50, 7)), area, atol=1e-12)


def test_single_mode_bessel():
    phi = single(2, (1, 0))
    t = np.linspace(0, 60, 121)
    ref = np.array([2 * math.pi * float(mpmath.besselj(0, ti)) for ti in t])
    np.testing.assert_allclose(correlation(phi, phi, t), ref, atol=1e-8)


@pytest.mark.parametrize("make", [mixed2, mixed3])
def test_flow_unitarity(make):
    phi = make()
    psi = Observable(phi.dim, {xi: SumFunction((f, ConstantFunction(0.2j))) for xi, f in phi.modes.items()})
    assert correlation(phi, phi, 0.0) == pytest.approx(phi.norm() ** 2, rel=1e-8)
    vals = correlation(phi, psi, np.linspace(0, 120, 301))
    assert np.abs(vals).max() <= phi.norm() * psi.norm() * (1 + 1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 150))
def test_time_symmetry(t):
    phi, psi = mixed2(), Observable(2, {(1, 0): HarmonicFunction(2, 1), (1, 2): ONE, (0, 0): ONE})
    assert correlation(phi, psi, -t) == pytest.approx(np.conj(correlation(psi, phi, t)), abs=1e-10)


def test_invariant_limit():
    phi = mixed2()
    t = np.linspace(50, 400, 6000)
    gap = correlation(phi, phi, t) - invariant_term(phi, phi)
    assert envelope_exponent(t, gap) == pytest.approx(-0.5, abs=0.1)


def test_stationary_phase_single_mode():
    phi = single(2, (1, 0))
    t = np.array([1.0, 10.0, 100.0])
    lead = stationary_phase_leading(phi, phi, t)
    np.testing.assert_allclose(lead, np.sqrt(2 * math.pi / t) * 2 * np.cos(t - math.pi / 4), atol=1e-12)
    with pytest.raises(PreconditionError):
        stationary_phase_leading(phi, phi, 0.5)


def test_vanishing_pole_values():
    # coefficient sin(phi) vanishes at +-xi/|xi|: Cor = 2 pi J1(t)/t
    phi = single(2, (1, 0), SIN)
    t = np.linspace(50, 400, 6000)
    np.testing.assert_allclose(stationary_phase_leading(phi, phi, t), 0, atol=1e-14)
    cor = correlation(phi, phi, t)
    np.testing.assert_allclose(cor, 2 * math.pi * j1(t) / t, atol=1e-10)
    assert envelope_exponent(t, cor) == pytest.approx(-1.5, abs=0.1)


@pytest.mark.parametrize("make", [mixed2, mixed3])
def test_remainder_order(make):
    phi = make()
    t = np.linspace(50, 400, 6000)
    rem = correlation(phi, phi, t) - stationary_phase_leading(phi, phi, t)
    assert envelope_exponent(t, rem) == pytest.approx(-(phi.dim + 1) / 2, abs=0.15)


def test_domain_and_pair_checks():
    with pytest.raises(PreconditionError):
        correlation(single(2, (1, 0)), single(3, (1, 0, 0)), 1.0)
    with pytest.raises(PreconditionError):
        Observable(4, {(1, 0, 0, 0): ONE})


# --------------------------------------------------------------------------
# projectors
# --------------------------------------------------------------------------


def test_projector_examples():
    P0, plus, minus = projectors(single(2, (1, 0)))
    assert complex(P0(np.array([[1.0, 0.0]]))[0]) == 0
    g = HarmonicFunction(2, 1, amplitude=0.5 + 0.2j)
    P0, plus, minus = projectors(single(2, (0, 0), g))
    assert P0 is g and not plus and not minus
    P0, plus, minus = projectors(single(2, (1, 0), g))
    assert plus[(1, 0)] == pytest.approx(0.5 + 0.2j)
    assert minus[(1, 0)] == pytest.approx(-(0.5 + 0.2j))


@pytest.mark.parametrize("make", [mixed2, mixed3])
def test_projector_idempotent(make):
    phi = make()
    P0, _, _ = projectors(phi)
    again = projectors(Observable(phi.dim, {(0,) * phi.dim: P0}))
    assert again[0] is P0 and not again[1] and not again[2]


# --------------------------------------------------------------------------
# anisotropic norms
# --------------------------------------------------------------------------


def test_norm_of_constant():
    for dim, area in ((2, 2 * math.pi), (3, 4 * math.pi)):
        for M in (0, 2, 5):
            u = single(dim, (0,) * dim)
            assert anisotropic_norm(u, M, 0) == pytest.approx(math.sqrt(area), rel=1e-10)


@pytest.mark.parametrize("N", [-2.5, 1, 3])
def test_norm_mode_scaling(N):
    f = SumFunction((ONE, HarmonicFunction(2, 3, amplitude=0.2)))
    u = single(2, (2, 1), f)
    assert anisotropic_norm(u, 2, N) == pytest.approx(6.0 ** (N / 2) * anisotropic_norm(u, 2, 0),
                                                      rel=1e-12)


def test_norm_harmonic_weights():
    u = single(3, (0, 0, 0), HarmonicFunction(3, 4, 2))
    assert anisotropic_norm(u, 1.5, 0) ** 2 == pytest.approx(21.0**1.5, rel=1e-9)
    v = single(2, (0, 0), HarmonicFunction(2, 5))
    assert anisotropic_norm(v, 2, 0) ** 2 == pytest.approx(2 * math.pi * 26.0**2, rel=1e-9)


def test_norm_accuracy_guard():
    # a compact bump on S^2 is not resolved in H^5 by degree-128 harmonics
    with pytest.raises(AccuracyError):
        anisotropic_norm(single(3, (0, 0, 0), BumpFunction((0, 0, 1), 0.4)), 5, 0)


REMAINDER_CASES = [
    lambda: mixed2(),
    lambda: single(2, (2, 1), SumFunction((ONE, HarmonicFunction(2, 2, amplitude=0.4)))),
    lambda: Observable(2, {(1, 1): BumpFunction((1.0, 1.0), 1.0), (0, 1): HarmonicFunction(2, -1)}),
    lambda: mixed3(),
    lambda: single(3, (1, 2, 0), SumFunction((ONE, HarmonicFunction(3, 1, 1, 0.3)))),
]


@pytest.mark.parametrize("case", range(len(REMAINDER_CASES)))
def test_remainder_bounded_by_anisotropic_norms(case):
    phi = REMAINDER_CASES[case]()
    d = phi.dim
    t = np.linspace(20, 300, 3000)
    rem = np.abs(correlation(phi, phi, t) - stationary_phase_leading(phi, phi, t))
    N = 1
    norm = anisotropic_norm(phi, 2 * N + d, -(N + (d - 1) / 2))
    assert np.max(rem * t ** ((d + 1) / 2)) <= norm**2


# --------------------------------------------------------------------------
# Laplace and Mellin transforms
# --------------------------------------------------------------------------


@pytest.mark.parametrize("s", [2.0, 2.0 + 3j, 0.5 - 1j])
def test_laplace_oracles(s):
    phi2, phi3 = single(2, (1, 0)), single(3, (1, 0, 0))
    ref2 = 2 * math.pi / (np.sqrt(s - 1j) * np.sqrt(s + 1j))
    assert laplace_transform(phi2, phi2, s).value == pytest.approx(ref2, abs=1e-10)
    ref3 = 4 * math.pi * complex(mpmath.atan(1 / mpmath.mpc(s)))
    assert laplace_transform(phi3, phi3, s).value == pytest.approx(ref3, abs=1e-10)


def test_laplace_invariant_part():
    phi = single(2, (0, 0))
    for s in (0.3, 1 + 2j):
        assert laplace_transform(phi, phi, s).value == pytest.approx(2 * math.pi / s, rel=1e-12)


def test_laplace_errors():
    phi = single(2, (1, 0))
    with pytest.raises(DomainError):
        laplace_transform(phi, phi, -0.1)
    with pytest.raises(SingularityError):
        laplace_transform(phi, phi, 1j + 1e-6)
    with pytest.raises(SingularityError):
        laplace_transform(phi, phi, 1j, probe=True)
    assert np.isfinite(laplace_transform(phi, phi, 1j + 1e-6, probe=True).value)


def test_laplace_boundary_values_converge():
    phi = Observable(2, {(1, 0): ConstantFunction(1 / math.sqrt(4 * math.pi)),
                         (1, 1): HarmonicFunction(2, 1, amplitude=1 / math.sqrt(4 * math.pi))})
    sq = np.sqrt(np.arange(11, 43))
    mids = 0.5 * (sq[1:] + sq[:-1])
    for tau in mids[(mids > 3.4) & (mids < 6.5)][:10]:
        a = laplace_transform(phi, phi, 1e-2 + 1j * tau).value
        b = laplace_transform(phi, phi, 1e-3 + 1j * tau).value
        assert abs(a - b) < 1e-3


def test_mellin_constant_correlation():
    phi = single(2, (0, 0))
    for s in (-3.0, 0.0, 2.5 + 1j, 5.0):
        assert mellin_transform(phi, phi, s).value == pytest.approx(2 * math.pi / (s - 1), rel=1e-12)
    with pytest.raises(PoleError):
        mellin_transform(phi, phi, 1.0)


def test_mellin_bessel_oracle():
    phi = single(2, (1, 0))
    s = 1.5
    mpmath.mp.dps = 20
    ref = 2 * math.pi * float(mpmath.quadosc(lambda t: t ** -s * mpmath.besselj(0, t),
                                             [1, mpmath.inf], omega=1))
    mpmath.mp.dps = 15
    assert mellin_transform(phi, phi, s).value == pytest.approx(ref, abs=1e-7)


def test_mellin_entire_part_independent_of_cutoff_shape():
    phi = mixed2()
    for s in (-3.0, 0.0, 5.0):
        v = mellin_transform(phi, phi, s)
        assert np.isfinite(v.parts["M0"])
        w = mellin_transform(phi, phi, s, chi_cutoff=4.0)
        assert v.value == pytest.approx(w.value, rel=1e-7, abs=1e-7)


# --------------------------------------------------------------------------
# configs
# --------------------------------------------------------------------------


def test_observable_from_dict_and_errors():
    spec = {"dim": 2, "modes": [{"xi": [1, 0], "coeff": {"type": "harmonic", "degree": 1}},
                                {"xi": [-1, 0], "coeff": {"type": "harmonic", "degree": -1}}],
            "real": False}
    phi = Observable.from_dict(spec)
    assert Observable.from_dict(phi.to_dict()) == phi
    with pytest.raises(ConfigError) as exc:
        Observable.from_dict({"dim": 2, "modes": [{"xi": [1, 0], "coef": {}}]})
    assert exc.value.path == "observable.modes[0]"
    with pytest.raises(ConfigError) as exc:
        Observable.from_dict({"dim": 2, "modes": [{"xi": [1, 0], "coeff": {"type": "wave"}}]})
    assert exc.value.path == "observable.modes[0].coeff.type"
    with pytest.raises(ConfigError):
        Observable.from_dict({"dim": 2, "real": True,
                              "modes": [{"xi": [1, 0], "coeff": {"type": "constant", "value": [0, 1]}}]})
