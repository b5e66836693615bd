"""Kernel family tests.

Reference values were computed independently with sympy (exact symbolic
derivatives of the bump, evaluated at rational points with mpmath at 30
significant digits) and frozen here.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from localest.errors import (DomainTooSmall, MomentConditionViolated,
                             ProbeOutsideDomain, UnknownPreset)
from localest.kernels import (AntiderivativePair, antiderivative_pair, bump,
                              bump_derivative, get_kernel, l2_norm,
                              make_paper_kernels, rescale)

# phi^(n) at x in {-0.8, -1/3, 0.1, 0.5, 0.7}, n = 0..5 (symbolic oracle)
ORACLE_POINTS = np.array([-0.8, -1.0 / 3.0, 0.1, 0.5, 0.7])
ORACLE_VALUES = {
    0: [3.3382377953650063e-15, 1.3709590863840845e-06, 5.4428261386612045e-06,
        1.1253517471925912e-07, 6.0437474495933554e-11],
    1: [4.9455374746148235e-13, 1.3880960749638855e-05, -1.3328010134462698e-05,
        -2.4007503940108613e-06, -3.9036892407984759e-09],
    2: [6.8252996351049954e-11, 7.8080404216718553e-05, -1.0602846140027105e-04,
        4.0012506566847682e-05, 2.2513268597328631e-07],
    3: [8.7009574743713780e-09, -2.4009724296640957e-04, 7.7392671468638926e-04,
        -4.3960407214776656e-04, -1.1320777215995681e-05],
    4: [1.0133459960761039e-06, -7.5345150056501629e-03, 5.6054137090533291e-03,
        1.0044028315091367e-03, 4.7780518214410382e-04],
    5: [1.0620806849535923e-04, -4.0294063599511350e-03, -6.0724643205705579e-02,
        5.6311052797318656e-02, -1.5757193801758676e-02],
}

# squared L^2 norms of phi^(n) on (-1, 1) (mpmath quadrature, 30 digits)
ORACLE_NORM2 = {
    0: 1.3261481275719259e-11,
    1: 1.7965833375658795e-10,
    2: 6.8763727994563445e-09,
    3: 4.1356470501781247e-07,
    4: 3.3101082347483746e-05,
    5: 3.3225377092873572e-03,
}

INT_PHI = 2.9722833273431791e-06


def test_bump_derivative_matches_symbolic_oracle():
    for order, vals in ORACLE_VALUES.items():
        got = bump_derivative(order, ORACLE_POINTS)
        np.testing.assert_allclose(got, vals, rtol=1e-12)


def test_bump_vanishes_outside_support():
    xs = np.array([-2.0, -1.0, -1.0 + 1e-14, 1.0 - 1e-13, 1.0, 1.5])
    for order in range(6):
        assert np.all(bump_derivative(order, xs) == 0.0)


def test_bump_scalar_input_returns_float():
    v = bump(0.5)
    assert isinstance(v, float)
    assert v == pytest.approx(1.1253517471925912e-07, rel=1e-12)


def test_bump_derivative_order_out_of_range():
    with pytest.raises(ValueError):
        bump_derivative(7, 0.3)
    with pytest.raises(ValueError):
        bump_derivative(-1, 0.3)


def test_bump_derivative_matches_central_difference():
    xs = np.linspace(-0.95, 0.95, 41)
    h = 1e-4
    for order in range(1, 5):
        fd = (bump_derivative(order - 1, xs + h)
              - bump_derivative(order - 1, xs - h)) / (2.0 * h)
        exact = bump_derivative(order, xs)
        scale = np.max(np.abs(exact))
        np.testing.assert_allclose(fd, exact, atol=1e-6 * scale, rtol=1e-5)


def test_kernel_norms_match_reference():
    k1, k2 = make_paper_kernels()
    assert k1.norm() == pytest.approx(np.sqrt(ORACLE_NORM2[3]), rel=1e-10)
    assert k1.norm(1) == pytest.approx(np.sqrt(ORACLE_NORM2[4]), rel=1e-10)
    assert k1.norm(2) == pytest.approx(np.sqrt(ORACLE_NORM2[5]), rel=1e-10)
    assert k2.norm() == pytest.approx(np.sqrt(ORACLE_NORM2[1]), rel=1e-10)
    assert k1.antiderivative_norm(0) == pytest.approx(np.sqrt(ORACLE_NORM2[1]), rel=1e-10)
    assert k1.antiderivative_norm(1) == pytest.approx(np.sqrt(ORACLE_NORM2[2]), rel=1e-10)


def test_l2_norm_against_dense_trapezoid():
    k1, _ = make_paper_kernels()
    x = np.linspace(-1.0, 1.0, (1 << 20) + 1)
    ref = np.sqrt(np.trapezoid(k1.eval(x) ** 2, x))
    assert l2_norm(k1) == pytest.approx(ref, rel=1e-7)


def test_l2_norm_plain_callable():
    val = l2_norm(lambda x: np.sin(np.pi * x), support=(0.0, 1.0))
    assert val == pytest.approx(np.sqrt(0.5), rel=1e-10)
    with pytest.raises(ValueError):
        l2_norm(lambda x: x, derivative_order=1)


def test_kernel_moments():
    k1, k2 = make_paper_kernels()
    m0, m1 = k1.moments_by_quadrature()
    assert abs(m0) < 1e-12 and abs(m1) < 1e-12
    m0, m1 = k2.moments_by_quadrature()
    assert abs(m0) < 1e-12
    assert m1 == pytest.approx(-INT_PHI, rel=1e-10)
    assert k2.moment1 == pytest.approx(-INT_PHI, rel=1e-10)


def test_antiderivative_pair_recovers_known_antiderivative():
    # K1 has the exact second antiderivative phi'
    k1, _ = make_paper_kernels()
    pair = antiderivative_pair(k1)
    x = np.linspace(-1.0, 1.0, 10_001)
    assert np.max(np.abs(pair(x) - bump_derivative(1, x))) < 1e-8
    assert np.max(np.abs(pair.deriv(x) - bump_derivative(2, x))) < 1e-8
    assert isinstance(pair, AntiderivativePair)


def test_antiderivative_pair_rejects_nonzero_first_moment():
    _, k2 = make_paper_kernels()
    with pytest.raises(MomentConditionViolated):
        antiderivative_pair(k2)


def test_rescale_preserves_l2_norm():
    k1, _ = make_paper_kernels()
    for delta, x0 in [(0.05, 0.6), (0.2, 0.5), (0.01, 0.97)]:
        p = rescale(k1, delta, x0)
        lo, hi = p.support
        x = np.linspace(lo, hi, 1 << 16)
        norm = np.sqrt(np.trapezoid(p.eval(x) ** 2, x))
        assert norm == pytest.approx(k1.norm(), rel=1e-6)


def test_rescale_laplacian_scaling():
    k1, _ = make_paper_kernels()
    p_big = rescale(k1, 0.2, 0.5)
    p_small = rescale(k1, 0.1, 0.5)
    # delta^(-5/2) K''((x-x0)/delta): halving delta multiplies the peak
    # laplacian value by 2^(5/2)
    peak_big = np.max(np.abs(p_big.laplacian(np.linspace(0.3, 0.7, 20001))))
    peak_small = np.max(np.abs(p_small.laplacian(np.linspace(0.4, 0.6, 20001))))
    assert peak_small / peak_big == pytest.approx(2.0 ** 2.5, rel=1e-3)


@given(delta=st.floats(0.005, 0.45), x0=st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_rescale_support_inside_domain(delta, x0):
    k1, _ = make_paper_kernels()
    p = rescale(k1, delta, x0)
    lo, hi = p.support
    assert lo >= -1e-12 and hi <= 1.0 + 1e-12
    # outside its support the probe is identically zero
    assert p.eval(np.array([lo - 1e-9, hi + 1e-9])).tolist() == [0.0, 0.0]


def test_rescale_boundary_shift():
    k1, _ = make_paper_kernels()
    assert rescale(k1, 0.1, 0.02).x0 == pytest.approx(0.1)
    assert rescale(k1, 0.1, 0.99).x0 == pytest.approx(0.9)
    assert rescale(k1, 0.1, 0.5).x0 == pytest.approx(0.5)


def test_rescale_rejects_bad_geometry():
    k1, _ = make_paper_kernels()
    with pytest.raises(DomainTooSmall):
        rescale(k1, 0.5, 0.5)
    with pytest.raises(DomainTooSmall):
        rescale(k1, -0.1, 0.5)
    with pytest.raises(ProbeOutsideDomain):
        rescale(k1, 0.1, 1.2)


def test_custom_kernel_roundtrip(tmp_path):
    k1, _ = make_paper_kernels()
    x = np.linspace(-1.0, 1.0, 4097)
    path = tmp_path / "kernel.txt"
    np.savetxt(path, np.column_stack([x, k1.eval(x)]))
    k = get_kernel(f"custom:{path}")
    assert k.norm() == pytest.approx(k1.norm(), rel=1e-6)
    assert abs(k.moment0) < 1e-9 and abs(k.moment1) < 1e-9
    # moments vanish, so the loaded kernel gets an antiderivative too
    xs = np.linspace(-1.0, 1.0, 2001)
    assert np.max(np.abs(k.antiderivative(xs) - bump_derivative(1, xs))) < 1e-7


def test_get_kernel_presets():
    assert get_kernel("k1").name == "k1"
    assert get_kernel("k2").name == "k2"
    with pytest.raises(UnknownPreset):
        get_kernel("k3")
