import math

import numpy as np
import pytest
from scipy.stats import norm

from gkflab.excursion import euler_char_grid, threshold_excursion
from gkflab.fieldsim import GridSpec, simulate_field
from gkflab.geomcore import LkVector, SpaceDescriptor, lk_model_space
from gkflab.gkf import (
    CanonicalSphereCovariance,
    CompositeKind,
    ExponentialCovariance,
    GaussianCovariance,
    ec_heuristic_tail,
    expected_ec_curve,
    expected_lk,
    expected_lk_composite,
    induced_metric_scale,
    threshold_for_ec_tail,
)
from gkflab.gmf import DomainDescriptor, GmfVector, gmf_closed_form_vector, gmf_halfline


class TestInducedMetric:
    def test_gaussian_kernel(self):
        assert induced_metric_scale(GaussianCovariance(1.0)) == pytest.approx(1.0)
        assert induced_metric_scale(GaussianCovariance(2.0)) == pytest.approx(0.25)

    def test_canonical_sphere(self):
        assert induced_metric_scale(CanonicalSphereCovariance()) == pytest.approx(1.0)

    def test_rejects_nonsmooth(self):
        with pytest.raises(ValueError):
            induced_metric_scale(ExponentialCovariance(1.0))

    def test_rejects_unknown(self):
        with pytest.raises(TypeError):
            induced_metric_scale(object())


class TestExpectedLk:
    def test_full_space_recovers_curvatures(self):
        lk = lk_model_space(SpaceDescriptor.rectangle([3.0, 4.0]))
        gmf = gmf_closed_form_vector(DomainDescriptor.full_space(1), 2)
        for i in range(3):
            assert expected_lk(i, lk, gmf).value == pytest.approx(lk[i])

    def test_point_space_half_line(self):
        lk = lk_model_space(SpaceDescriptor.point())
        for u in (-1.0, 0.0, 2.0):
            gmf = gmf_closed_form_vector(DomainDescriptor.half_line(u), 0)
            assert expected_lk(0, lk, gmf).value == pytest.approx(norm.sf(u))

    def test_interval_is_rice_formula(self):
        # 1-d closed form: Psi(u) + T exp(-u^2/2) / (2 pi)
        t_len, u = 10.0, 1.0
        lk = lk_model_space(SpaceDescriptor.rectangle([t_len]))
        gmf = gmf_closed_form_vector(DomainDescriptor.half_line(u), 1)
        pred = expected_lk(0, lk, gmf)
        assert pred.value == pytest.approx(
            norm.sf(u) + t_len * math.exp(-u * u / 2.0) / (2.0 * math.pi)
        )

    def test_rice_monte_carlo_oracle(self):
        # empirical component count of 1-d excursions
        t_len, u, ell, reps = 10.0, 1.0, 1.0, 600
        grid = GridSpec(dims=(100,), spacing=0.1)
        dom = DomainDescriptor.half_line(u)
        chis = np.empty(reps)
        for r in range(reps):
            sample = simulate_field(grid, ell, 1, np.random.SeedSequence([606, r]))
            chis[r] = euler_char_grid(threshold_excursion(sample, dom))
        lk = lk_model_space(SpaceDescriptor.rectangle([t_len], metric_scale=1.0 / ell**2))
        pred = expected_lk(0, lk, gmf_closed_form_vector(dom, 1)).value
        se = chis.std(ddof=1) / math.sqrt(reps)
        assert abs(chis.mean() - pred) <= 3.0 * se

    def test_linearity_in_both_vectors(self):
        rng = np.random.default_rng(1)
        lk_a = LkVector(dim=2, values=tuple(rng.normal(size=3)))
        lk_b = LkVector(dim=2, values=tuple(rng.normal(size=3)))
        gmf_a = GmfVector(k=1, values=(0.3, *rng.normal(size=2)), j_max=2)
        gmf_b = GmfVector(k=1, values=(0.6, *rng.normal(size=2)), j_max=2)
        a, b = 0.7, -1.3
        mixed_lk = LkVector(
            dim=2, values=tuple(a * np.array(lk_a.values) + b * np.array(lk_b.values))
        )
        for i in range(3):
            lhs = expected_lk(i, mixed_lk, gmf_a).value
            rhs = a * expected_lk(i, lk_a, gmf_a).value + b * expected_lk(i, lk_b, gmf_a).value
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
        mix_vals = 0.5 * np.array(gmf_a.values) + 0.5 * np.array(gmf_b.values)
        mixed_gmf = GmfVector(k=1, values=tuple(mix_vals), j_max=2)
        for i in range(3):
            lhs = expected_lk(i, lk_a, mixed_gmf).value
            rhs = 0.5 * expected_lk(i, lk_a, gmf_a).value + 0.5 * expected_lk(i, lk_a, gmf_b).value
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_top_order_keeps_only_mass_term(self):
        lk = lk_model_space(SpaceDescriptor.rectangle([3.0, 4.0]))
        dom = DomainDescriptor.half_line(0.7)
        pred = expected_lk(2, lk, gmf_closed_form_vector(dom, 0))
        assert pred.value == pytest.approx(12.0 * norm.sf(0.7))
        assert len(pred.terms) == 1

    def test_terms_sum_to_value(self):
        lk = lk_model_space(SpaceDescriptor.rectangle([10.0, 10.0]))
        pred = expected_lk(
            0, lk, gmf_closed_form_vector(DomainDescriptor.half_line(1.0), 2)
        )
        assert sum(pred.terms) == pytest.approx(pred.value, rel=1e-12)

    def test_insufficient_gmf_length_rejected(self):
        lk = lk_model_space(SpaceDescriptor.rectangle([3.0, 4.0]))
        gmf = gmf_closed_form_vector(DomainDescriptor.half_line(0.0), 1)
        with pytest.raises(ValueError):
            expected_lk(0, lk, gmf)

    def test_flag_row_at_order_zero_is_unit(self):
        # the i = 0 row of the pairing has unit flag coefficients, so the
        # value is the plain weighted sum of L_j M_j
        lk = lk_model_space(SpaceDescriptor.rectangle([2.0, 5.0]))
        dom = DomainDescriptor.half_line(0.5)
        gmf = gmf_closed_form_vector(dom, 2)
        manual = sum(
            (2.0 * math.pi) ** (-j / 2.0) * lk[j] * gmf[j] for j in range(3)
        )
        assert expected_lk(0, lk, gmf).value == pytest.approx(manual, rel=1e-12)


class TestEcCurve:
    def test_limits(self):
        rect = SpaceDescriptor.rectangle([10.0, 10.0])
        curve = dict(expected_ec_curve(rect, [-8.0, 8.0]))
        assert curve[-8.0] == pytest.approx(1.0, abs=1e-6)
        assert curve[8.0] == pytest.approx(0.0, abs=1e-6)
        sphere = SpaceDescriptor.sphere2(1.0)
        curve = dict(expected_ec_curve(sphere, [-8.0, 8.0]))
        assert curve[-8.0] == pytest.approx(2.0, abs=1e-6)

    def test_sphere_closed_form(self):
        sphere = SpaceDescriptor.sphere2(1.0)
        for u in (0.5, 1.0, 2.0):
            expected = 2.0 * norm.sf(u) + math.sqrt(2.0 / math.pi) * u * math.exp(
                -u * u / 2.0
            )
            assert expected_ec_curve(sphere, [u])[0][1] == pytest.approx(expected)


class TestComposite:
    def test_scalar_case_matches_two_sided_threshold(self):
        rect = SpaceDescriptor.rectangle([4.0, 6.0])
        u = 2.3
        pred = expected_lk_composite(0, rect, 1, CompositeKind.SUM_OF_SQUARES, u)
        # {x^2 >= u} = {|x| >= sqrt(u)}: by symmetry both half-lines contribute
        two_sided = GmfVector(
            k=1,
            values=tuple(2.0 * gmf_halfline(j, math.sqrt(u)) for j in range(3)),
            j_max=2,
        )
        lk = lk_model_space(rect)
        assert pred.value == pytest.approx(expected_lk(0, lk, two_sided).value, rel=1e-12)

    def test_point_space_is_chi2_tail(self):
        point = SpaceDescriptor.point()
        for u in (1.0, 3.0):
            pred = expected_lk_composite(0, point, 2, CompositeKind.SUM_OF_SQUARES, u)
            assert pred.value == pytest.approx(math.exp(-u / 2.0))

    def test_rejects_nonpositive_threshold(self):
        with pytest.raises(ValueError):
            expected_lk_composite(
                0, SpaceDescriptor.point(), 2, CompositeKind.SUM_OF_SQUARES, 0.0
            )


class TestHeuristicTail:
    def test_point_space_exact(self):
        for u in (0.0, 1.5):
            assert ec_heuristic_tail(SpaceDescriptor.point(), u) == pytest.approx(
                norm.sf(u)
            )

    def test_monotone_decay_beyond_last_sign_change(self):
        rect = SpaceDescriptor.rectangle([10.0, 10.0])
        us = np.linspace(2.0, 8.0, 25)
        vals = [ec_heuristic_tail(rect, u) for u in us]
        assert all(a > b > 0.0 for a, b in zip(vals, vals[1:]))

    def test_threshold_tuning(self):
        rect = SpaceDescriptor.rectangle([10.0, 10.0])
        u = threshold_for_ec_tail(rect, 0.05)
        assert ec_heuristic_tail(rect, u) == pytest.approx(0.05, rel=1e-8)
        with pytest.raises(ValueError):
            threshold_for_ec_tail(rect, -1.0)
