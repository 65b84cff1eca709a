import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rclab import geometry as geo

RNG = np.random.default_rng(20260810)

ALL_SPECS = [
    geo.l1(1),
    geo.l1(2),
    geo.l2(2),
    geo.linf(2),
    geo.weighted_lp((1.0, 2.5), 1.5),
    geo.weighted_lp((0.5, 1.0, 2.0), 1.0),
    geo.polyhedral([(1, 1), (1, -1), (-1, 1), (-1, -1)]),  # l1 as support function
    geo.l2(3),
    geo.l1(3),
]


def test_norm_eval_closed_forms():
    assert geo.norm_eval(geo.l1(2), (2, 1)) == 3
    assert geo.norm_eval(geo.l2(2), (3, 4)) == 5
    assert geo.norm_eval(geo.linf(2), (-2, 1)) == 2


def test_norm_eval_dimension_mismatch():
    with pytest.raises(geo.GeometryError):
        geo.norm_eval(geo.l1(2), (1, 2, 3))


def test_poly_matches_l1():
    spec = geo.polyhedral([(1, 1), (1, -1), (-1, 1), (-1, -1)])
    X = RNG.integers(-20, 21, size=(500, 2))
    assert np.allclose(geo.norm_eval_many(spec, X), np.abs(X).sum(axis=1))


def test_poly_requires_symmetry():
    with pytest.raises(geo.GeometryError):
        geo.polyhedral([(1, 0), (0, 1)])


def test_poly_requires_spanning():
    with pytest.raises(geo.GeometryError):
        geo.polyhedral([(1, 0), (-1, 0)])


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.family}-d{s.d}")
def test_norm_axioms_sampled(spec):
    X = RNG.normal(size=(400, spec.d)) * 10
    Y = RNG.normal(size=(400, spec.d)) * 10
    lam = RNG.normal(size=400) * 5
    rx = geo.norm_eval_many(spec, X)
    ry = geo.norm_eval_many(spec, Y)
    assert (rx[np.abs(X).sum(axis=1) > 0] > 0).all()
    assert geo.norm_eval(spec, np.zeros(spec.d)) == 0.0
    # homogeneity and symmetry
    assert np.allclose(geo.norm_eval_many(spec, lam[:, None] * X), np.abs(lam) * rx)
    # triangle inequality
    assert (geo.norm_eval_many(spec, X + Y) <= rx + ry + 1e-9).all()


@given(st.integers(-50, 50), st.integers(-50, 50))
@settings(max_examples=60, deadline=None)
def test_l1_triangle_hypothesis(a, b):
    spec = geo.l1(2)
    x = np.array([a, b])
    y = np.array([b, -a])
    assert geo.norm_eval(spec, x + y) <= geo.norm_eval(spec, x) + geo.norm_eval(spec, y) + 1e-12


def test_dual_l1_axis_face():
    duals = geo.dual_vectors(geo.l1(2), (1, 0))
    assert len(duals) == 2
    assert not duals[0].unique
    ts = sorted(d.t for d in duals)
    assert ts == [(1.0, -1.0), (1.0, 1.0)]
    assert duals[0].facial_extent is not None


def test_dual_l1_generic_unique():
    s = np.array([2.0, 1.0]) / np.sqrt(5)
    (dv,) = geo.dual_vectors(geo.l1(2), s)
    assert dv.unique
    assert np.allclose(dv.t, (1.0, 1.0))


def test_dual_l2_self():
    for _ in range(20):
        s = RNG.normal(size=2)
        s /= np.sqrt(s @ s)
        (dv,) = geo.dual_vectors(geo.l2(2), s)
        assert dv.unique
        assert np.allclose(dv.t, s, atol=1e-12)


def test_dual_linf_face():
    duals = geo.dual_vectors(geo.linf(2), (1, 1))
    assert len(duals) == 2
    assert sorted(d.t for d in duals) == [(0.0, 1.0), (1.0, 0.0)]
    (dv,) = geo.dual_vectors(geo.linf(2), (1, 0.3))
    assert dv.unique and dv.t == (1.0, 0.0)


def test_dual_l1_d3_corner_face():
    duals = geo.dual_vectors(geo.l1(3), (1, 0, 0))
    assert len(duals) == 4
    for dv in duals:
        assert dv.t[0] == 1.0 and abs(dv.t[1]) == 1.0 and abs(dv.t[2]) == 1.0


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.family}-d{s.d}")
def test_wulff_membership_10k(spec):
    # every dual vector satisfies t.x <= rho(x) on 10^4 random lattice points
    s = np.arange(1, spec.d + 1, dtype=float)
    X = RNG.integers(-100, 101, size=(10_000, spec.d)).astype(float)
    rho = geo.norm_eval_many(spec, X)
    for dv in geo.dual_vectors(spec, s) + geo.dual_vectors(spec, np.eye(spec.d)[0]):
        assert (X @ dv.t_arr() <= rho + 1e-9 * np.maximum(1.0, rho)).all()


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.family}-d{s.d}")
def test_surcharge_nonnegative_and_zero_on_ray(spec):
    s = np.ones(spec.d)
    duals = geo.dual_vectors(spec, s)
    X = RNG.integers(-100, 101, size=(10_000, spec.d)).astype(float)
    for dv in duals:
        vals = geo.surcharge_many(spec, dv, X)
        assert (vals >= 0).all()
        for k in (0.0, 1.0, 3.0, 17.5):
            assert geo.surcharge(spec, dv, k * s) <= 1e-9 * max(1.0, k)


def test_surcharge_values():
    l1 = geo.l1(2)
    (dv,) = geo.dual_vectors(l1, (1, 0.5))  # t = (1, 1)
    t_axis = geo.dual_vectors(l1, (1, 0))[0]
    t10 = geo.DualVector(t=(1.0, 0.0), s=(1.0, 0.0), unique=False)
    assert geo.surcharge(l1, t10, (5, 0)) == 0.0
    assert geo.surcharge(l1, t10, (0, 3)) == 3.0
    l2 = geo.l2(2)
    (e1,) = geo.dual_vectors(l2, (1, 0))
    assert geo.surcharge(l2, e1, (3, 4)) == pytest.approx(2.0)


def test_surcharge_rejects_outside_wulff():
    with pytest.raises(geo.GeometryError):
        geo.surcharge(geo.l1(2), (2.0, 0.0), (1, 0))


def test_g_limit_c1_case_is_zero():
    l2 = geo.l2(2)
    (dv,) = geo.dual_vectors(l2, (1, 0))
    val, conv = geo.g_limit(l2, dv, (1, 0), (0, 7))
    assert conv and val < 1e-3


def test_g_limit_l1_off_axis():
    l1 = geo.l1(2)
    dv = geo.DualVector(t=(1.0, 0.0), s=(1.0, 0.0), unique=False)
    val, conv = geo.g_limit(l1, dv, (1, 0), (0, 4))
    assert conv and val == pytest.approx(4.0)


def test_g_limit_l1_on_axis():
    l1 = geo.l1(2)
    dv = geo.DualVector(t=(1.0, 0.0), s=(1.0, 0.0), unique=False)
    val, conv = geo.g_limit(l1, dv, (1, 0), (3, 0))
    assert conv and val == 0.0


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.family}-d{s.d}")
def test_g_limit_monotone_nonincreasing(spec):
    # literal step-by-step monotonicity over the doubling schedule
    s = np.ones(spec.d)
    dv = geo.dual_vectors(spec, s)[0]
    for _ in range(20):
        y = RNG.integers(-10, 11, size=spec.d)
        vals = [geo.surcharge(spec, dv, n * s - y) for n in (1, 2, 4, 8, 16, 32, 64)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
        geo.g_limit(spec, dv, s, y)  # must not raise


def test_sample_dual_face_members():
    spec = geo.l1(2)
    samples = geo.sample_dual_face(spec, (1, 0), 7)
    assert len(samples) == 7
    X = RNG.integers(-50, 51, size=(2000, 2)).astype(float)
    rho = geo.norm_eval_many(spec, X)
    for dv in samples:
        assert abs(np.dot(dv.t, dv.s) - 1.0) < 1e-9
        assert (X @ dv.t_arr() <= rho + 1e-9).all()


def test_linf_equivalence_bounds():
    for spec in ALL_SPECS:
        c_low, c_high = geo.linf_equivalence_bounds(spec)
        assert 0 < c_low <= c_high
        X = RNG.integers(-40, 41, size=(2000, spec.d)).astype(float)
        rho = geo.norm_eval_many(spec, X)
        xinf = np.abs(X).max(axis=1)
        assert (rho >= c_low * xinf - 1e-9).all()
        assert (rho <= c_high * xinf + 1e-9).all()
