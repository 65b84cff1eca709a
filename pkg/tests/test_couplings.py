import math

import numpy as np
import pytest

from rclab import couplings as cpl
from rclab import geometry as geo

# frozen by direct high-precision summation (mpmath, 40 digits):
#   2 * polylog(alpha, 1/e) for the enveloped d=1 polynomial family,
#   2 * zeta(2) for the alpha=2 family without envelope.
Z_D1_A2_ENV = 0.81750857469779253807
Z_D1_A3_ENV = 0.77399084842039950027
Z_D1_A2_NOENV = 3.2898681336964528729
J3_D1_A2_ENV = 0.0067667748773927973057


@pytest.fixture(scope="module")
def spec_a2():
    return cpl.normalize(geo.l1(1), cpl.polynomial(2.0))


@pytest.fixture(scope="module")
def spec_a05():
    return cpl.normalize(geo.l1(1), cpl.polynomial(0.5))


def test_normalizer_matches_oracle(spec_a2):
    assert spec_a2.z == pytest.approx(Z_D1_A2_ENV, rel=1e-10)
    spec3 = cpl.normalize(geo.l1(1), cpl.polynomial(3.0))
    assert spec3.z == pytest.approx(Z_D1_A3_ENV, rel=1e-10)


def test_normalizer_no_envelope_exact_zeta():
    spec = cpl.normalize(geo.l1(1), cpl.polynomial(2.0, envelope=False))
    assert spec.z == pytest.approx(Z_D1_A2_NOENV, rel=1e-9)


def test_coupling_eval(spec_a2):
    assert cpl.coupling_eval(spec_a2, (0,)) == 0.0
    assert cpl.coupling_eval(spec_a2, (3,)) == pytest.approx(J3_D1_A2_ENV, rel=1e-10)
    assert cpl.coupling_eval(spec_a2, (3,)) == cpl.coupling_eval(spec_a2, (-3,))


def test_total_mass_bookkeeping(spec_a2):
    # truncated mass plus recorded tail bound is exactly one by construction
    assert cpl.truncated_mass(spec_a2) + spec_a2.tail_bound == pytest.approx(1.0, abs=1e-12)
    assert spec_a2.norm_gap <= cpl.EPS_NORM


def test_normalizer_stable_under_doubling():
    za = cpl.normalize(geo.l1(1), cpl.polynomial(2.0), trunc_radius=2 ** 10).z
    zb = cpl.normalize(geo.l1(1), cpl.polynomial(2.0), trunc_radius=2 ** 11).z
    assert abs(za - zb) / za < cpl.EPS_NORM


def test_non_summable():
    with pytest.raises(cpl.NonSummableError):
        cpl.normalize(geo.l1(1), cpl.polynomial(0.5, envelope=False))
    with pytest.raises(cpl.NonSummableError):
        cpl.normalize(geo.l1(1), cpl.polynomial(1.0, envelope=False))


def test_prefactor_subexponential_on_doubling():
    for pref in (cpl.polynomial(2.5), cpl.stretched_exp(1.0, 0.5)):
        xs = np.array([2.0 ** k for k in range(1, 16)])
        ratios = np.log(pref.psi_of_rho(xs)) / xs
        assert abs(ratios[-1]) < 1e-2
        assert abs(ratios[-1]) < 0.1 * abs(ratios[0])


def _dual(norm, s):
    return geo.dual_vectors(norm, s)[0]


def test_j_series_converges_d1_alpha2(spec_a2):
    v = cpl.j_series(spec_a2, _dual(spec_a2.norm, (1.0,)))
    assert v.verdict == cpl.CONVERGES
    assert v.diagnostic == pytest.approx(-2.0, abs=0.1)
    assert all(b >= a for a, b in zip(v.partial_sums, v.partial_sums[1:]))


def test_j_series_diverges_d1_alpha05(spec_a05):
    v = cpl.j_series(spec_a05, _dual(spec_a05.norm, (1.0,)))
    assert v.verdict == cpl.DIVERGES
    assert v.diagnostic == pytest.approx(-0.5, abs=0.1)


def test_j_series_stretched_l2_converges():
    spec = cpl.normalize(geo.l2(2), cpl.stretched_exp(1.0, 0.5))
    v = cpl.j_series(spec, _dual(spec.norm, (1.0, 0.0)))
    assert v.verdict == cpl.CONVERGES
    assert v.diagnostic < -1 - cpl.DELTA_FIT


def test_j_series_verdict_stable_under_doubling():
    for alpha in (0.5, 2.0):
        va = cpl.j_series(
            cpl.normalize(geo.l1(1), cpl.polynomial(alpha), trunc_radius=2 ** 10),
            (1.0,),
        )
        vb = cpl.j_series(
            cpl.normalize(geo.l1(1), cpl.polynomial(alpha), trunc_radius=2 ** 11),
            (1.0,),
        )
        assert va.verdict == vb.verdict


def test_j_series_requires_envelope():
    spec = cpl.normalize(geo.l1(1), cpl.polynomial(2.0, envelope=False))
    with pytest.raises(ValueError):
        cpl.j_series(spec, (1.0,))


def test_saturation_criterion_d1(spec_a2, spec_a05):
    v, _ = cpl.saturation_criterion(spec_a2, (1.0,))
    assert v == cpl.SATURATION_POSITIVE
    v, _ = cpl.saturation_criterion(spec_a05, (1.0,))
    assert v == cpl.SATURATION_ZERO


def test_saturation_criterion_l2_alpha1_zero():
    spec = cpl.normalize(geo.l2(2), cpl.polynomial(1.0))
    v, _ = cpl.saturation_criterion(spec, (1.0, 0.0))
    assert v == cpl.SATURATION_ZERO


def test_saturation_monotone_in_alpha():
    verdicts = []
    for alpha in (0.6, 1.3, 2.0, 3.0):
        spec = cpl.normalize(geo.l1(1), cpl.polynomial(alpha))
        verdicts.append(cpl.saturation_criterion(spec, (1.0,))[0])
    seen_positive = False
    for v in verdicts:
        if v == cpl.SATURATION_POSITIVE:
            seen_positive = True
        assert not (seen_positive and v == cpl.SATURATION_ZERO)


def test_saturation_face_sampling_l1_d2_axis():
    # along the l1 axis the dual face is a segment; interior tilts converge
    # for alpha > 1 even though the extreme tilts need alpha > 2
    spec = cpl.normalize(geo.l1(2), cpl.polynomial(1.5))
    v, detail = cpl.saturation_criterion(spec, (1.0, 0.0), face_samples=5)
    assert v == cpl.SATURATION_POSITIVE


def test_alpha_sat_d1():
    grid = np.round(np.arange(0.5, 2.05, 0.1), 10)
    lo, hi, est = cpl.alpha_sat_estimate(geo.l1(1), (1.0,), grid)
    assert est == pytest.approx(1.0, abs=1e-12)
    assert hi - lo == pytest.approx(0.1, abs=1e-9)
    assert 1.0 <= est <= 1.0 + 1e-12  # inside [1, d]


def test_alpha_sat_d2_l2():
    grid = np.round(np.arange(1.0, 2.05, 0.1), 10)
    lo, hi, est = cpl.alpha_sat_estimate(geo.l2(2), (1.0, 0.0), grid)
    assert abs(est - 1.5) <= 0.1
    assert 1.0 <= est <= 2.0


def test_tail_mass_and_inverse(spec_a2):
    assert cpl.tail_mass(spec_a2, 0) == pytest.approx(1.0, abs=1e-12)
    grid = np.arange(1, 60)
    vals = [cpl.tail_mass(spec_a2, int(r)) for r in grid]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    for r in range(1, 51):
        assert cpl.tail_inverse(spec_a2, cpl.tail_mass(spec_a2, r)) == pytest.approx(r, abs=1e-9)
    # interpolation is monotone
    us = np.linspace(cpl.tail_mass(spec_a2, 40), cpl.tail_mass(spec_a2, 2), 50)
    rs = [cpl.tail_inverse(spec_a2, u) for u in us]
    assert all(b <= a for a, b in zip(rs, rs[1:]))
    with pytest.raises(ValueError):
        cpl.tail_inverse(spec_a2, 1.5)
    with pytest.raises(ValueError):
        cpl.tail_inverse(spec_a2, 0.0)


def test_tail_inverse_monotone_in_f(spec_a2):
    # K(f) = F^{-1}(1/(f log f)) is non-decreasing in f
    fs = [2.0, 4.0, 8.0, 16.0, 64.0, 256.0]
    ks = [cpl.tail_inverse(spec_a2, 1.0 / (f * math.log(f))) for f in fs]
    assert all(b >= a for a, b in zip(ks, ks[1:]))


def test_psi_property_constants(spec_a2):
    a, b = cpl.psi_property_constants(spec_a2)
    assert (a, b) == (1.0, 4.0)
    spec_se = cpl.normalize(geo.l1(1), cpl.stretched_exp(1.0, 0.5))
    a, b = cpl.psi_property_constants(spec_se)
    assert a == pytest.approx(2.0 - math.sqrt(2.0))
    assert b > 0
