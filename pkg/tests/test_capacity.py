"""Capacity-region geometry: rank values, safe rates, membership, the face."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macgame import (
    ChannelModel,
    build_view,
    capacity_of,
    is_feasible,
    max_face_residual,
    prefix_feasible,
    safe_rate,
    sample_max_face,
)
from macgame.capacity import face_vertices, feasible_rows

LN2 = math.log(2.0)
LN3 = math.log(3.0)


def sym3_example():
    # P = 25, noise variance 0.1 -> per-user SNR 250
    return ChannelModel.symmetric_model(3, power=25.0, noise_var=0.1)


def snr_models(max_m=8):
    return st.lists(st.floats(0.01, 50.0), min_size=1, max_size=max_m).map(
        lambda s: ChannelModel(np.array(s)))


class TestCapacityOf:
    def test_symmetric_three_user_singleton(self):
        assert capacity_of(sym3_example(), {0}) == pytest.approx(math.log(251.0), abs=1e-12)
        assert math.log(251.0) == pytest.approx(5.525452939131784, abs=1e-9)

    def test_symmetric_three_user_grand(self):
        assert capacity_of(sym3_example(), {0, 1, 2}) == pytest.approx(
            math.log(751.0), abs=1e-12)

    def test_single_user_interval(self):
        model = ChannelModel(np.array([1.0]))
        assert capacity_of(model, {0}) == pytest.approx(LN2, abs=1e-15)

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError, match="empty subset"):
            capacity_of(sym3_example(), set())

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            capacity_of(sym3_example(), {0, 3})


class TestSafeRate:
    def test_symmetric_three_user(self):
        # direct formula ln(1 + 25/50.1); the difference C{1,2,3} - C{1,2}
        # is the independent cross-check
        model = sym3_example()
        r3 = safe_rate(model, 0, {0, 1, 2})
        assert r3 == pytest.approx(math.log1p(25.0 / 50.1), abs=1e-15)
        assert r3 == pytest.approx(math.log(751.0) - math.log(501.0), abs=1e-12)

    def test_asymmetric_two_user(self):
        model = ChannelModel(np.array([3.0, 1.0]))
        assert safe_rate(model, 0, {0, 1}) == pytest.approx(math.log(2.5), abs=1e-15)
        assert math.log(2.5) == pytest.approx(math.log(5.0) - math.log(2.0), abs=1e-15)

    def test_single_user_equals_own_capacity(self):
        model = ChannelModel(np.array([4.2]))
        assert safe_rate(model, 0, {0}) == capacity_of(model, {0})

    def test_user_outside_subset_rejected(self):
        with pytest.raises(ValueError):
            safe_rate(sym3_example(), 2, {0, 1})

    @given(snr_models())
    @settings(max_examples=200, deadline=None)
    def test_difference_identity(self, model):
        full = set(range(model.m))
        for i in range(model.m):
            rest = full - {i}
            expect = capacity_of(model, full) - (capacity_of(model, rest) if rest else 0.0)
            assert abs(safe_rate(model, i, full) - expect) <= 1e-12


class TestRankFunction:
    @given(snr_models())
    @settings(max_examples=100, deadline=None)
    def test_monotone_and_submodular(self, model):
        view = build_view(model)
        caps = view.cap
        masks = np.arange(caps.size)
        for i in range(model.m):
            base = masks[(masks >> i) & 1 == 0]
            grown = caps[base | (1 << i)]
            assert np.all(caps[base] <= grown + 1e-12)
            for j in range(model.m):
                if j == i:
                    continue
                both = base[(base >> j) & 1 == 0]
                gain_alone = caps[both | (1 << i)] - caps[both]
                gain_later = caps[both | (1 << i) | (1 << j)] - caps[both | (1 << j)]
                assert np.all(gain_later <= gain_alone + 1e-12)

    @given(snr_models())
    @settings(max_examples=100, deadline=None)
    def test_subadditive(self, model):
        view = build_view(model)
        full = capacity_of(model, range(model.m))
        assert full <= float(view.single_caps.sum()) + 1e-12

    def test_constraint_matrix_matches_three_user_pattern(self):
        view = build_view(sym3_example())
        expected = np.array([
            [1, 0, 0],
            [0, 1, 0],
            [0, 0, 1],
            [1, 1, 0],
            [1, 0, 1],
            [0, 1, 1],
            [1, 1, 1],
        ], dtype=float)
        assert np.array_equal(view.constraint_matrix, expected)
        table = view.rank_table()
        assert list(table) == [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]

    def test_too_many_users_rejected(self):
        with pytest.raises(ValueError, match="at most 20"):
            build_view(ChannelModel(np.ones(21)))


class TestFeasibility:
    def test_symmetric_three_user_near_face(self):
        view = build_view(sym3_example())
        assert is_feasible(view, [2.2071, 2.2071, 2.2071])

    def test_origin_always_feasible(self):
        view = build_view(sym3_example())
        assert is_feasible(view, np.zeros(3))

    def test_singleton_bound_violation(self):
        view = build_view(ChannelModel(np.array([1.0, 1.0])))
        assert not is_feasible(view, [0.70, 0.40])

    def test_dimension_mismatch_rejected(self):
        view = build_view(sym3_example())
        with pytest.raises(ValueError, match="length 3"):
            is_feasible(view, [0.1, 0.1])

    def test_prefix_oracle_agrees_on_lattice(self):
        # every point of the [0, C1]^3 lattice with step C1/20
        view = build_view(ChannelModel(np.array([1.5, 1.5, 1.5])))
        c1 = float(view.single_caps[0])
        axis = np.linspace(0.0, c1, 21)
        pts = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
        exhaustive = feasible_rows(view, pts)
        prefix = np.array([prefix_feasible(view, p) for p in pts])
        assert np.array_equal(exhaustive, prefix)

    def test_prefix_oracle_needs_symmetry(self):
        view = build_view(ChannelModel(np.array([3.0, 1.0])))
        with pytest.raises(ValueError):
            prefix_feasible(view, [0.1, 0.1])

    @given(snr_models(max_m=5), st.floats(1.01, 10.0), st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_scaling_enlarges_region(self, model, factor, seed):
        view = build_view(model)
        pts = sample_max_face(view, 5, seed=seed)
        bigger = build_view(ChannelModel(model.snr * factor))
        assert all(is_feasible(bigger, p) for p in pts)


class TestMaxFace:
    def test_boundary_point_on_face(self):
        view = build_view(ChannelModel(np.array([1.0, 1.0])))
        assert max_face_residual(view, [math.log(1.5), LN2]) == 0.0

    def test_equal_split_on_face(self):
        view = build_view(ChannelModel(np.array([1.0, 1.0])))
        assert max_face_residual(view, [LN3 / 2, LN3 / 2]) == 0.0

    def test_interior_point_sum_residual(self):
        view = build_view(ChannelModel(np.array([1.0, 1.0])))
        assert max_face_residual(view, [0.3, 0.3]) == pytest.approx(
            LN3 - 0.6, abs=1e-12)

    def test_sample_count_zero(self):
        view = build_view(ChannelModel(np.array([1.0, 1.0])))
        assert sample_max_face(view, 0, seed=1).shape == (0, 2)

    def test_samples_sit_on_face(self):
        view = build_view(ChannelModel(np.array([1.0, 1.0])))
        pts = sample_max_face(view, 100, seed=42)
        assert pts.shape == (100, 2)
        assert all(max_face_residual(view, p) == 0.0 for p in pts)

    def test_sampling_deterministic(self):
        view = build_view(sym3_example())
        a = sample_max_face(view, 50, seed=9)
        b = sample_max_face(view, 50, seed=9)
        assert np.array_equal(a, b)
        c = sample_max_face(view, 50, seed=10)
        assert not np.array_equal(a, c)

    def test_vertices_on_face(self):
        view = build_view(ChannelModel(np.array([3.0, 1.0, 0.5])))
        verts = face_vertices(view)
        assert verts.shape == (6, 3)
        assert all(max_face_residual(view, v) == 0.0 for v in verts)
