import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bevdebias.bias import (
    BiasDecomposition,
    BiasDomainError,
    DegenerateBiasError,
    SingularViewError,
    analytic_bias,
    bias_coefficients,
    bias_field,
    coefficients_for_camera,
    oracle_bias,
    yaw_of_extrinsics,
)
from bevdebias.geometry import (
    CameraModel,
    EgoPoint,
    Extrinsics,
    Intrinsics,
    PixelPoint,
    euler_pose,
    unproject,
    yaw_only_extrinsics,
)


def planar_camera(theta: float, f: float = 1000.0, t=(0.0, 0.0, 0.0),
                  cu: float = 352.0, cv: float = 192.0) -> CameraModel:
    intr = Intrinsics(f, f, cu, cv, 704, 384)
    return CameraModel(intr, yaw_only_extrinsics(theta, np.array(t)), "planar")


def test_zero_bias_gives_zero_coefficients_and_shift():
    coeffs = bias_coefficients(BiasDecomposition.zero(), 0.3, 1000.0, 25.0)
    assert (coeffs.k_u, coeffs.b_u, coeffs.k_v, coeffs.b_v) == (0, 0, 0, 0)
    assert coeffs.denom_depth == pytest.approx(25.0 / math.cos(0.3))
    du, dv = analytic_bias(coeffs, 100.0, 50.0, 352.0, 192.0)
    assert (du, dv) == (0.0, 0.0)
    cam = planar_camera(0.3)
    assert oracle_bias(EgoPoint(5.0, 1.0, 20.0), BiasDecomposition.zero(), cam) \
        == pytest.approx((0.0, 0.0), abs=1e-12)


def test_lateral_bias_at_zero_yaw_is_constant_shift():
    delta, f, d = 0.25, 1000.0, 12.5
    bias = BiasDecomposition(0.0, (delta, 0.0, 0.0))
    coeffs = bias_coefficients(bias, 0.0, f, d)
    assert coeffs.k_u == 0.0
    assert coeffs.b_u == pytest.approx(f * delta)
    assert coeffs.denom_depth == pytest.approx(d)
    cam = planar_camera(0.0, f)
    for u, v in ((50.0, 30.0), (352.0, 192.0), (690.0, 380.0)):
        du, dv = analytic_bias(coeffs, u, v, cam.intrinsics.cu, cam.intrinsics.cv)
        assert du == pytest.approx(f * delta / d, rel=1e-12)
        assert dv == 0.0
        du_o, dv_o = oracle_bias(unproject(PixelPoint(u, v, d), cam), bias, cam)
        assert du_o == pytest.approx(du, rel=1e-9, abs=1e-9)
        assert dv_o == pytest.approx(dv, abs=1e-9)


def test_oracle_hand_example():
    # f=1000, depth 10, 0.1 m lateral shift: 1000 * 0.1 / 10 = 10 px
    cam = planar_camera(0.0, 1000.0)
    bias = BiasDecomposition(0.0, (0.1, 0.0, 0.0))
    p = unproject(PixelPoint(352.0, 192.0, 10.0), cam)
    du, dv = oracle_bias(p, bias, cam)
    assert du == pytest.approx(10.0, rel=1e-12)
    assert dv == pytest.approx(0.0, abs=1e-12)


def test_shift_at_principal_point_is_nonzero():
    # even the photocentric ray moves when the BEV branch shifts laterally
    bias = BiasDecomposition(0.0, (0.3, -0.2, 0.0))
    coeffs = bias_coefficients(bias, 0.4, 800.0, 20.0)
    du, dv = analytic_bias(coeffs, 352.0, 192.0, 352.0, 192.0)
    assert du != 0.0 and dv != 0.0
    assert du == pytest.approx(coeffs.b_u / coeffs.denom_depth)
    assert dv == pytest.approx(coeffs.b_v / coeffs.denom_depth)


def test_full_field_matches_per_pixel_oracle():
    theta, f, d = -0.35, 1260.0, 30.0
    cam = planar_camera(theta, f, t=(1.0, -0.5, 2.0))
    bias = BiasDecomposition(0.2, (0.4, -0.3, 0.25))
    du, dv = bias_field(bias, cam, d, stride=16)  # 44 x 24 lattice
    assert du.shape == (44, 24)
    for iw in range(0, 44, 7):
        for ih in range(0, 24, 5):
            u, v = (iw + 0.5) * 16.0, (ih + 0.5) * 16.0
            p = unproject(PixelPoint(u, v, d), cam)
            du_o, dv_o = oracle_bias(p, bias, cam)
            assert du[iw, ih] == pytest.approx(du_o, rel=1e-9, abs=1e-9)
            assert dv[iw, ih] == pytest.approx(dv_o, rel=1e-9, abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_analytic_matches_oracle_under_planar_assumptions(seed):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-1.0, 1.0)
    f = rng.uniform(400, 2000)
    cam = planar_camera(theta, f, t=tuple(rng.uniform(-5, 5, 3)),
                        cu=352.0 + rng.uniform(-50, 50),
                        cv=192.0 + rng.uniform(-30, 30))
    u, v = rng.uniform(0, 704), rng.uniform(0, 384)
    d = rng.uniform(5, 60)
    bias = BiasDecomposition(rng.uniform(-0.5, 0.5), tuple(rng.uniform(-1, 1, 3)))
    p = unproject(PixelPoint(u, v, d), cam)
    coeffs = bias_coefficients(bias, theta, f, d)
    du_a, dv_a = analytic_bias(coeffs, u, v, cam.intrinsics.cu, cam.intrinsics.cv)
    du_o, dv_o = oracle_bias(p, bias, cam)
    assert du_a == pytest.approx(du_o, rel=1e-9, abs=1e-9)
    assert dv_a == pytest.approx(dv_o, rel=1e-9, abs=1e-9)


def test_linear_in_lateral_bias_at_zero_yaw():
    f, d, dl_img = 900.0, 18.0, 0.4
    slope = f / (d + dl_img)
    for delta in (0.01, 0.1, 0.5, -0.3):
        coeffs = bias_coefficients(BiasDecomposition(dl_img, (delta, 0.0, 0.0)),
                                   0.0, f, d)
        du, _ = analytic_bias(coeffs, 500.0, 100.0, 352.0, 192.0)
        assert du == pytest.approx(slope * delta, rel=1e-12)


def test_exact_antisymmetry_in_vertical_bias():
    f, d, theta = 1100.0, 22.0, 0.6
    for ly in (0.05, 0.4, 1.3):
        plus = bias_coefficients(BiasDecomposition(0.1, (0.0, ly, 0.0)), theta, f, d)
        minus = bias_coefficients(BiasDecomposition(0.1, (0.0, -ly, 0.0)), theta, f, d)
        assert plus.denom_depth == minus.denom_depth
        du_p, dv_p = analytic_bias(plus, 400.0, 250.0, 352.0, 192.0)
        du_m, dv_m = analytic_bias(minus, 400.0, 250.0, 352.0, 192.0)
        assert du_p == du_m == 0.0
        assert dv_p == -dv_m


def test_singular_view_guard():
    with pytest.raises(SingularViewError):
        bias_coefficients(BiasDecomposition.zero(), math.pi / 2, 1000.0, 10.0)


def test_degenerate_denominator_guard():
    with pytest.raises(DegenerateBiasError):
        bias_coefficients(BiasDecomposition(-10.0, (0.0, 0.0, 0.0)), 0.0, 1000.0, 10.0)


def test_validity_domain_enforced_on_camera():
    bias = BiasDecomposition(0.0, (0.1, 0.0, 0.0))
    rect = CameraModel(Intrinsics(1000.0, 900.0, 352.0, 192.0, 704, 384),
                       yaw_only_extrinsics(0.2, np.zeros(3)))
    with pytest.raises(BiasDomainError):
        coefficients_for_camera(bias, rect, 10.0)
    pitched = CameraModel(Intrinsics(1000.0, 1000.0, 352.0, 192.0, 704, 384),
                          euler_pose(0.2, 0.1, 0.0, np.zeros(3)))
    with pytest.raises(BiasDomainError):
        coefficients_for_camera(bias, pitched, 10.0)


def test_yaw_extraction_round_trips():
    for theta in (-1.2, -0.3, 0.0, 0.7, 1.4):
        cam = planar_camera(theta, 1000.0, t=(2.0, 0.5, -1.0))
        assert yaw_of_extrinsics(cam) == pytest.approx(theta, abs=1e-12)


def test_oracle_accepts_general_cameras():
    # outside the planar validity domain the oracle still runs standalone
    cam = CameraModel(Intrinsics(800.0, 750.0, 352.0, 192.0, 704, 384),
                      euler_pose(0.5, 0.2, -0.1, np.array([1.0, 2.0, 0.5])))
    p = unproject(PixelPoint(300.0, 200.0, 15.0), cam)
    du, dv = oracle_bias(p, BiasDecomposition(0.2, (0.3, -0.1, 0.2)), cam)
    assert math.isfinite(du) and math.isfinite(dv)
