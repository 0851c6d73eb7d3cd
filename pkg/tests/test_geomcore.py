import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from gkflab.geomcore import (
    LkVector,
    SpaceDescriptor,
    cap_tube_volume,
    flag_coeff,
    from_kappa,
    hermite,
    lk_model_space,
    log_flag_coeff,
    sphere_surface,
    to_kappa,
    tube_volume_euclid,
    unit_ball_volume,
)


class TestSpecialFunctions:
    def test_unit_ball_volume_values(self):
        assert unit_ball_volume(0) == pytest.approx(1.0)
        assert unit_ball_volume(1) == pytest.approx(2.0)
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)

    def test_sphere_surface_values(self):
        assert sphere_surface(2) == pytest.approx(2.0 * math.pi)
        assert sphere_surface(3) == pytest.approx(4.0 * math.pi)

    def test_sphere_surface_rejects_zero(self):
        with pytest.raises(ValueError):
            sphere_surface(0)

    @pytest.mark.parametrize("n", [1, 2, 3, 7, 20, 101, 500, 2000])
    def test_surface_is_n_times_ball(self, n):
        # s_n = n * omega_n; in log space so n = 2000 stays finite
        lhs = math.log(n) + math.log(unit_ball_volume(n)) if n < 300 else None
        if lhs is not None:
            assert sphere_surface(n) / (n * unit_ball_volume(n)) == pytest.approx(
                1.0, rel=1e-12
            )
        else:
            from gkflab.geomcore import log_sphere_surface, log_unit_ball_volume

            assert log_sphere_surface(n) == pytest.approx(
                math.log(n) + log_unit_ball_volume(n), rel=1e-12
            )

    def test_flag_coeff_examples(self):
        # direct evaluation with plain factorials, independent of the
        # log-space implementation
        def direct(n, k):
            om = unit_ball_volume
            return (
                math.factorial(n)
                * om(n)
                / (math.factorial(k) * om(k) * math.factorial(n - k) * om(n - k))
            )

        assert flag_coeff(2, 1) == pytest.approx(math.pi / 2.0, rel=1e-12)
        assert flag_coeff(3, 1) == pytest.approx(2.0, rel=1e-12)
        for n in range(7):
            for k in range(n + 1):
                assert flag_coeff(n, k) == pytest.approx(direct(n, k), rel=1e-10)

    @given(st.integers(min_value=0, max_value=60), st.data())
    def test_flag_coeff_symmetry(self, n, data):
        k = data.draw(st.integers(min_value=0, max_value=n))
        assert flag_coeff(n, k) == pytest.approx(flag_coeff(n, n - k), rel=1e-10)
        assert flag_coeff(n, 0) == pytest.approx(1.0, rel=1e-12)
        assert flag_coeff(n, n) == pytest.approx(1.0, rel=1e-12)

    def test_flag_coeff_rejects_bad_k(self):
        with pytest.raises(ValueError):
            flag_coeff(3, -1)
        with pytest.raises(ValueError):
            flag_coeff(3, 4)

    def test_flag_coeff_large_n_finite(self):
        assert math.isfinite(log_flag_coeff(2000, 3))


class TestHermite:
    def test_small_orders(self):
        assert hermite(0, 1.7) == 1.0
        assert hermite(1, 1.7) == pytest.approx(1.7)
        assert hermite(2, 1.0) == pytest.approx(0.0, abs=1e-15)
        assert hermite(3, 2.0) == pytest.approx(2.0)  # u^3 - 3u at 2

    def test_recurrence_on_grid(self):
        u = np.linspace(-5.0, 5.0, 41)
        for n in range(1, 10):
            lhs = hermite(n + 1, u)
            rhs = u * hermite(n, u) - n * hermite(n - 1, u)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

    def test_parity(self):
        u = np.linspace(-5.0, 5.0, 21)
        for n in range(8):
            np.testing.assert_allclose(
                hermite(n, -u), (-1.0) ** n * hermite(n, u), rtol=1e-12, atol=1e-12
            )

    def test_extension_matches_gauss_tail(self):
        # H_{-1}(u) = sqrt(2 pi) exp(u^2/2) Psi(u)
        assert hermite(-1, 0.0) == pytest.approx(math.sqrt(2.0 * math.pi) * 0.5)
        for u in (-2.0, -0.5, 0.7, 3.0, 8.0):
            expected = math.sqrt(2.0 * math.pi) * math.exp(u * u / 2.0) * norm.sf(u)
            assert hermite(-1, u) == pytest.approx(expected, rel=1e-10)

    def test_rejects_below_minus_one(self):
        with pytest.raises(ValueError):
            hermite(-2, 0.0)


class TestLkVector:
    def test_length_validation(self):
        with pytest.raises(ValueError):
            LkVector(dim=2, values=(1.0, 2.0))

    def test_above_dim_is_zero(self):
        lk = LkVector(dim=1, values=(1.0, 3.0))
        assert lk[5] == 0.0


class TestModelSpaces:
    def test_rectangle_symmetric_polynomials(self):
        lk = lk_model_space(SpaceDescriptor.rectangle([3.0, 4.0]))
        assert lk.values == pytest.approx((1.0, 7.0, 12.0))
        lk3 = lk_model_space(SpaceDescriptor.rectangle([2.0, 3.0, 4.0]))
        assert lk3.values == pytest.approx((1.0, 9.0, 26.0, 24.0))

    def test_point_space(self):
        lk = lk_model_space(SpaceDescriptor.point())
        assert lk.dim == 0
        assert lk.values == (1.0,)

    def test_metric_scaling(self):
        lk = lk_model_space(SpaceDescriptor.rectangle([3.0, 4.0], metric_scale=4.0))
        assert lk.values == pytest.approx((1.0, 14.0, 48.0))

    @given(
        st.lists(st.floats(min_value=0.5, max_value=5.0), min_size=1, max_size=3),
        st.floats(min_value=0.25, max_value=4.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_rectangle_side_scaling(self, sides, c):
        # scaling every side by c multiplies L_j by c^j
        base = lk_model_space(SpaceDescriptor.rectangle(sides)).as_array()
        scaled = lk_model_space(
            SpaceDescriptor.rectangle([c * s for s in sides])
        ).as_array()
        np.testing.assert_allclose(
            scaled, base * c ** np.arange(len(sides) + 1), rtol=1e-10
        )

    def test_sphere(self):
        lk = lk_model_space(SpaceDescriptor.sphere2(1.0))
        assert lk.values == pytest.approx((2.0, 0.0, 4.0 * math.pi))
        lk2 = lk_model_space(SpaceDescriptor.sphere2(2.0))
        assert lk2.values[2] == pytest.approx(16.0 * math.pi)

    def test_ball_tube_is_grown_ball(self):
        # Steiner exactness: the tube polynomial around a ball must equal the
        # volume of the enlarged ball at every radius
        for n, radius in ((2, 1.5), (3, 0.8)):
            lk = lk_model_space(SpaceDescriptor.ball(n, radius))
            for rho in (0.1, 0.5, 2.0):
                expected = unit_ball_volume(n) * (radius + rho) ** n
                assert tube_volume_euclid(lk, n, rho) == pytest.approx(expected, rel=1e-10)

    def test_cap_curvatures(self):
        for alpha in (math.pi / 6.0, math.pi / 4.0, math.pi / 2.0):
            lk = lk_model_space(SpaceDescriptor.cap(alpha))
            assert lk[0] == pytest.approx(1.0, abs=1e-6)
            # half the rim circumference
            assert lk[1] == pytest.approx(math.pi * math.sin(alpha), rel=1e-6)
            assert lk[2] == pytest.approx(2.0 * math.pi * (1.0 - math.cos(alpha)), rel=1e-6)

    def test_cap_rejects_obtuse(self):
        with pytest.raises(ValueError):
            SpaceDescriptor.cap(2.0)

    def test_invalid_sides(self):
        with pytest.raises(ValueError):
            SpaceDescriptor.rectangle([3.0, -1.0])


class TestKappaConversion:
    def test_zero_kappa_is_identity(self):
        lk = LkVector(dim=2, values=(1.0, 7.0, 12.0))
        assert to_kappa(lk, 0.0).values == pytest.approx(lk.values)
        assert from_kappa(lk, 0.0).values == pytest.approx(lk.values)

    def test_documented_value(self):
        lk = LkVector(dim=2, values=(1.0, 7.0, 12.0))
        shifted = to_kappa(lk, 1.0)
        assert shifted.values == pytest.approx((1.0 - 6.0 / math.pi, 7.0, 12.0))
        back = from_kappa(shifted, 1.0)
        assert back.values == pytest.approx(lk.values, rel=1e-12)

    def test_top_order_unchanged(self):
        lk = LkVector(dim=3, values=(0.3, -2.0, 5.0, 11.0))
        assert to_kappa(lk, 2.5)[3] == pytest.approx(11.0)
        assert from_kappa(lk, 2.5)[3] == pytest.approx(11.0)

    @given(
        st.integers(min_value=0, max_value=6),
        st.sampled_from([-2.0, 0.5, 1.0, 5.0]),
        st.data(),
    )
    @settings(max_examples=60, deadline=None)
    def test_roundtrip(self, dim, kappa, data):
        values = data.draw(
            st.lists(
                st.floats(min_value=-100.0, max_value=100.0),
                min_size=dim + 1,
                max_size=dim + 1,
            )
        )
        lk = LkVector(dim=dim, values=tuple(values))
        back = from_kappa(to_kappa(lk, kappa), kappa).as_array()
        ref = lk.as_array()
        scale = np.maximum(np.abs(ref), 1.0)
        assert np.max(np.abs(back - ref) / scale) < 1e-10


class TestTubeVolume:
    def test_rectangle_examples(self):
        lk = LkVector(dim=2, values=(1.0, 7.0, 12.0))
        assert tube_volume_euclid(lk, 2, 0.0) == pytest.approx(12.0)
        assert tube_volume_euclid(lk, 2, 0.5) == pytest.approx(12.0 + 7.0 + math.pi / 4.0)

    def test_point_tube_is_disc(self):
        lk = LkVector(dim=0, values=(1.0,))
        assert tube_volume_euclid(lk, 2, 1.0) == pytest.approx(math.pi)

    def test_rejects_small_ambient(self):
        lk = LkVector(dim=2, values=(1.0, 7.0, 12.0))
        with pytest.raises(ValueError):
            tube_volume_euclid(lk, 1, 0.1)

    @pytest.mark.parametrize(
        "space,ambient",
        [
            (SpaceDescriptor.rectangle([3.0, 4.0]), 2),
            (SpaceDescriptor.ball(2, 1.5), 2),
        ],
    )
    def test_against_monte_carlo(self, space, ambient):
        # independent point-in-tube volume estimate (convexity makes the
        # polynomial exact, so only sampling error separates the two)
        rho = 0.4
        lk = lk_model_space(space)
        rng = np.random.default_rng(2024)
        n = 200_000
        if space.kind.value == "rectangle":
            sides = np.array(space.sides)
            lo, hi = -rho, sides + rho
            pts = rng.uniform(lo, hi, size=(n, ambient))
            dist = np.linalg.norm(pts - np.clip(pts, 0.0, sides), axis=1)
            box = float(np.prod(sides + 2 * rho))
        else:
            half = space.radius + rho
            pts = rng.uniform(-half, half, size=(n, ambient))
            dist = np.maximum(np.linalg.norm(pts, axis=1) - space.radius, 0.0)
            box = (2 * half) ** ambient
        p = (dist <= rho).mean()
        mc = box * p
        se = box * math.sqrt(p * (1 - p) / n)
        assert abs(mc - tube_volume_euclid(lk, ambient, rho)) <= 3 * se

    def test_cap_tube_against_monte_carlo(self):
        alpha, rho = math.pi / 4.0, 0.25
        rng = np.random.default_rng(7)
        n = 300_000
        pts = rng.uniform(-1.3, 1.3, size=(n, 3))
        # distance to the cap: clamp the polar angle to [0, alpha] on the arc
        r = np.linalg.norm(pts, axis=1)
        beta = np.arccos(np.clip(pts[:, 2] / np.maximum(r, 1e-300), -1.0, 1.0))
        delta = np.maximum(beta - alpha, 0.0)
        dist = np.sqrt(r**2 + 1.0 - 2.0 * r * np.cos(delta))
        p = (dist <= rho).mean()
        mc = 2.6**3 * p
        se = 2.6**3 * math.sqrt(p * (1 - p) / n)
        assert abs(mc - cap_tube_volume(alpha, rho)) <= 3 * se
        lk = lk_model_space(SpaceDescriptor.cap(alpha))
        assert abs(mc - tube_volume_euclid(lk, 3, rho)) <= 3 * se
