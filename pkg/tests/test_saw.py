import math

import numpy as np
import pytest

from rclab import couplings as cpl
from rclab import geometry as geo
from rclab import rc_exact as rcx
from rclab import saw


@pytest.fixture(scope="module")
def cp1():
    return cpl.normalize(geo.l1(1), cpl.polynomial(2.0))


@pytest.fixture(scope="module")
def heavy():
    return cpl.normalize(geo.l1(1), cpl.polynomial(0.5))


def test_walk_weight_basics(cp1):
    assert saw.walk_weight(cp1, 0.5, [(0,)]) == 1.0
    j3 = cpl.coupling_eval(cp1, (3,))
    assert saw.walk_weight(cp1, 0.5, [(0,), (3,)]) == pytest.approx(0.5 * j3)
    # translation invariance
    w0 = saw.walk_weight(cp1, 0.7, [(0,), (2,), (3,)])
    w1 = saw.walk_weight(cp1, 0.7, [(5,), (7,), (8,)])
    assert w0 == pytest.approx(w1)


def test_walk_weight_rejects_self_intersection(cp1):
    with pytest.raises(saw.SelfIntersection):
        saw.walk_weight(cp1, 0.5, [(0,), (1,), (0,)])


def test_saw_two_point_nearest_neighbour_unique(cp1):
    # nearest-neighbour steps only: the unique SAW 0 -> 1 is the direct step
    j1 = cpl.coupling_eval(cp1, (1,))
    for length in (1, 3, 5):
        val = saw.saw_two_point(cp1, 0.4, (1,), length, r_step=1)
        assert val == pytest.approx(0.4 * j1)


def test_saw_two_point_l1_is_direct_step(cp1):
    lam = 0.3
    val = saw.saw_two_point(cp1, lam, (2,), 1, r_step=4)
    assert val == pytest.approx(lam * cpl.coupling_eval(cp1, (2,)))


def test_saw_two_point_monotone(cp1):
    vals_l = [saw.saw_two_point(cp1, 0.5, (2,), L, r_step=3) for L in (1, 2, 3, 4, 5)]
    assert all(b >= a for a, b in zip(vals_l, vals_l[1:]))
    assert vals_l[1] > vals_l[0]
    vals_r = [saw.saw_two_point(cp1, 0.5, (2,), 3, r_step=r) for r in (2, 3, 4)]
    assert all(b >= a for a, b in zip(vals_r, vals_r[1:]))
    vals_lam = [saw.saw_two_point(cp1, lam, (2,), 3, r_step=3) for lam in (0.2, 0.5, 0.8)]
    assert all(b >= a for a, b in zip(vals_lam, vals_lam[1:]))


def test_saw_two_point_budget(cp1):
    with pytest.raises(rcx.BudgetExceeded):
        saw.saw_two_point(cp1, 0.5, (2,), 6, r_step=20, budget=10_000)


def test_saw_lambda_zero(cp1):
    assert saw.saw_two_point(cp1, 0.0, (3,), 4) == 0.0
    assert saw.saw_two_point(cp1, 0.0, (0,), 4) == 1.0


def test_cone_build_d1(heavy):
    dv = geo.dual_vectors(heavy.norm, (1.0,))[0]
    cone = saw.build_cone(heavy, dv, r=64)
    steps = np.asarray(cone.steps)
    assert (steps > 0).all()  # positive axis only
    u = np.asarray(cone.witness)
    assert ((steps @ u) > 0).all()
    s = geo.surcharge_many(heavy.norm, dv, steps.astype(float))
    assert (s <= cone.delta * np.abs(steps[:, 0]) + 1e-12).all()


def test_cone_build_d2_l1():
    cp = cpl.normalize(geo.l1(2), cpl.polynomial(1.0))
    (dv,) = geo.dual_vectors(cp.norm, (2.0, 1.0))  # unique dual t=(1,1)
    cone = saw.build_cone(cp, dv, r=12)
    steps = np.asarray(cone.steps, dtype=float)
    u = np.asarray(cone.witness)
    assert ((steps @ u) > 0).all()
    # off-axis steps present
    ref = steps[0]
    assert (np.abs(np.cross(steps, ref)) > 1e-9).any()


def test_cone_concatenations_self_avoiding(heavy):
    dv = geo.dual_vectors(heavy.norm, (1.0,))[0]
    cone = saw.build_cone(heavy, dv, r=32)
    rng = np.random.default_rng(123)
    for _ in range(10_000):
        ks = rng.integers(0, len(cone.steps), size=rng.integers(1, 8))
        walk = saw.concatenate_steps(cone, ks)  # raises on self-intersection
        assert walk.length == len(ks)


def test_cone_j_continuity(heavy):
    dv = geo.dual_vectors(heavy.norm, (1.0,))[0]
    cone = saw.build_cone(heavy, dv, r=256)
    j0 = saw.cone_j(cone, heavy, 0.0)
    gaps = [abs(saw.cone_j(cone, heavy, e) - j0) for e in (0.01, 0.001, 0.0001)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.01 * j0


def test_divergence_certificate_alpha_half(heavy):
    # d=1, alpha=0.5, lambda=0.5: J_R grows ~ sqrt(R), certificate fires
    dv = geo.dual_vectors(heavy.norm, (1.0,))[0]
    cone = saw.build_cone(heavy, dv, r=2048)
    res = saw.cone_series(cone, heavy, lam=0.5, eps=0.001)
    assert res.certificate
    assert res.lam_j >= 2.0  # lambda^{-1} = 2 exceeded
    assert res.partial_sums[-1] > 1e6
    assert res.thresholds_crossed[-1] >= 1e6


def test_no_certificate_when_series_converges(cp1):
    dv = geo.dual_vectors(cp1.norm, (1.0,))[0]
    cone = saw.build_cone(cp1, dv, r=2048)
    res = saw.cone_series(cone, cp1, lam=0.1, eps=0.001)
    assert not res.certificate
    assert res.partial_sums[-1] < 10.0


def test_bridge_doc(cp1):
    rec = saw.saw_rc_bridge_doc(cp1, beta=0.5, lam=0.02, q=2.0)
    assert rec["saw_below_rc"]
    assert rec["saw_partial_sum"] > 0
    rec0 = saw.saw_rc_bridge_doc(cp1, beta=0.5, lam=0.0, q=2.0)
    assert rec0["saw_partial_sum"] == 0.0
