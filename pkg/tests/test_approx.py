"""Chord-and-tangent capacity approximation.

The load-bearing property is one-sided error: the approximate capacity must
never exceed the exact one anywhere inside the power box, because plans are
validated against the exact expression. Frozen numbers are hand-computed
from the secant and tangent formulas.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdbackhaul import PowerVector, DimensionMismatchError, hd_variant
from fdbackhaul.approx import (
    AffinePiece,
    aggregate_coefficients,
    build,
    chord_pieces,
    taylor_f2,
)
from fdbackhaul.model import capacity_matrix

from test_model import two_link_scenario


class TestChordPieces:
    def test_frozen_example(self):
        # B=1 through (1,0), (2,1), (4,2)
        pieces = chord_pieces(np.array([1.0, 2.0, 4.0]), 1.0)
        assert pieces == (AffinePiece(1.0, -1.0), AffinePiece(0.5, 0.0))

    def test_envelope_at_interior_point(self):
        pieces = chord_pieces(np.array([1.0, 2.0, 4.0]), 1.0)
        assert min(p.value(3.0) for p in pieces) == pytest.approx(1.5)
        assert min(p.value(2.0) for p in pieces) == pytest.approx(1.0)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            chord_pieces(np.array([1.0]), 1.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            chord_pieces(np.array([0.0, 1.0]), 1.0)

    def test_rejects_nonincreasing(self):
        with pytest.raises(ValueError):
            chord_pieces(np.array([1.0, 1.0, 2.0]), 1.0)

    @given(lo=st.floats(min_value=1e-12, max_value=1e-2),
           decades=st.floats(min_value=0.1, max_value=10.0),
           n=st.integers(min_value=2, max_value=24),
           bw=st.floats(min_value=1e5, max_value=4e7))
    @settings(max_examples=60, deadline=None)
    def test_secant_envelope_properties(self, lo, decades, n, bw):
        """Touches the log at every grid point, never exceeds it between."""
        pts = np.geomspace(lo, lo * 10 ** decades, n)
        pieces = chord_pieces(pts, bw)
        env = lambda s: min(p.value(s) for p in pieces)
        for s in pts:
            assert env(s) == pytest.approx(bw * math.log2(s),
                                           abs=1e-9 * bw, rel=1e-9)
        for s in np.geomspace(pts[0], pts[-1], 37):
            assert env(s) <= bw * math.log2(s) + 1e-9 * bw


class TestTaylorTangent:
    def test_frozen_example(self):
        tan = taylor_f2(2.0, 1.0)
        assert tan.slope == pytest.approx(0.7213475204444817, rel=1e-15)
        assert tan.intercept == pytest.approx(-0.4426950408889634, rel=1e-15)
        assert tan.value(4.0) == pytest.approx(2.4426950408889634, rel=1e-15)

    def test_tight_at_expansion(self):
        tan = taylor_f2(3.7e-9, 2e7)
        assert tan.value(3.7e-9) == pytest.approx(2e7 * math.log2(3.7e-9), rel=1e-12)

    @given(t0=st.floats(min_value=1e-12, max_value=1e2),
           t=st.floats(min_value=1e-12, max_value=1e2))
    @settings(max_examples=60, deadline=None)
    def test_never_below_log(self, t0, t):
        # concavity: the tangent dominates the log everywhere
        tan = taylor_f2(t0, 1e7)
        assert tan.value(t) >= 1e7 * math.log2(t) - 1e-6

    def test_rejects_nonpositive_point(self):
        with pytest.raises(ValueError):
            taylor_f2(0.0, 1.0)


def test_aggregate_coefficients_layout():
    s = two_link_scenario()
    signal, interference = aggregate_coefficients(s)
    assert signal.shape == (2, 2, 2) and interference.shape == (2, 2, 2)
    # diagonal carries the desired path, off-diagonal the cross gains
    np.testing.assert_allclose(signal[0, 0, :], [1e-4, 1e-4])
    np.testing.assert_allclose(signal[0, 1, :], [1e-6, 1e-6])
    np.testing.assert_allclose(interference[0, 0, :], 0.0)
    np.testing.assert_allclose(interference[0, 1, :], [1e-6, 1e-6])


class TestBuild:
    def test_shapes_and_anchor(self):
        s = two_link_scenario()
        p0 = PowerVector(np.full((2, 2), 1e-3))
        ap = build(s, p0, segments=8)
        assert ap.shape == (2, 2)
        assert ap.bandwidth == 1e7
        # the expansion point's aggregate is a breakpoint, so the chord
        # side is exact there and the tangent is exact on the t side
        s0 = ap.s_aggregate(np.asarray(p0.watts))
        t0 = ap.t_aggregate(np.asarray(p0.watts))
        exact = 1e7 * (np.log2(s0) - np.log2(t0))
        np.testing.assert_allclose(ap.capacity(p0), exact, rtol=1e-9)

    def test_anchor_is_a_breakpoint(self):
        s = two_link_scenario()
        p0 = PowerVector(np.full((2, 2), 1e-3))
        ap = build(s, p0, segments=8)
        s0 = ap.s_aggregate(np.asarray(p0.watts))
        for l in range(2):
            for f in range(2):
                bp = np.asarray(ap.breakpoints[l][f])
                assert np.min(np.abs(bp - s0[l, f])) <= 1e-9 * s0[l, f]

    def test_zero_expansion_point(self):
        s = two_link_scenario()
        ap = build(s, PowerVector.zeros(2, 2), segments=4)
        # t anchored at the noise floor: tangent tight there
        w = 1e-9
        assert ap.tangent(0, 0).value(w) == pytest.approx(1e7 * math.log2(w), rel=1e-12)
        np.testing.assert_allclose(ap.t0, w)

    def test_segment_validation(self):
        s = two_link_scenario()
        with pytest.raises(ValueError):
            build(s, PowerVector.zeros(2, 2), segments=0)
        build(s, PowerVector.zeros(2, 2), segments=1)

    def test_negative_expansion_rejected(self):
        s = two_link_scenario()
        with pytest.raises(ValueError):
            build(s, PowerVector(np.full((2, 2), -1e-6)), segments=4)

    def test_shape_mismatch_rejected(self):
        s = two_link_scenario()
        with pytest.raises(DimensionMismatchError):
            build(s, PowerVector.zeros(3, 2), segments=4)

    def test_breakpoint_tightness(self):
        """The chord side equals B*log2(s) at every breakpoint, the
        contract that makes warm starts feasible across iterations."""
        s = two_link_scenario()
        ap = build(s, PowerVector(np.full((2, 2), 2e-3)), segments=16)
        for l in range(2):
            for f in range(2):
                pieces = ap.pieces(l, f)
                for bp in np.asarray(ap.breakpoints[l][f]):
                    env = min(p.value(bp) for p in pieces)
                    assert abs(env - 1e7 * math.log2(bp)) <= 1e-9 * 1e7

    def test_conservative_on_sampled_box(self):
        s = two_link_scenario()
        ap = build(s, PowerVector(np.full((2, 2), 1e-3)), segments=12)
        rng = np.random.default_rng(42)
        caps = np.asarray(s.link_power_caps)
        xs = rng.uniform(0.0, 1.0, size=(500, 2, 2)) * caps[None, :, None]
        approx = ap.capacity_batch(xs)
        for i in range(xs.shape[0]):
            exact = capacity_matrix(s, PowerVector(xs[i]))
            assert np.all(approx[i] <= exact + 1e-9 * 1e7)

    def test_refinement_never_loosens(self):
        # doubling segments keeps the old grid points, so the envelope can
        # only move up toward the true log
        s = two_link_scenario()
        p0 = PowerVector.zeros(2, 2)
        rng = np.random.default_rng(3)
        caps = np.asarray(s.link_power_caps)
        xs = rng.uniform(0.0, 1.0, size=(100, 2, 2)) * caps[None, :, None]
        coarse = build(s, p0, segments=4).capacity_batch(xs)
        fine = build(s, p0, segments=8).capacity_batch(xs)
        finest = build(s, p0, segments=16).capacity_batch(xs)
        assert np.all(fine >= coarse - 1e-6)
        assert np.all(finest >= fine - 1e-6)

    def test_degenerate_pair_constant_piece(self):
        # a pair whose signal cannot rise above the noise floor collapses
        # to the constant f1 = B*log2(w)
        s = two_link_scenario()
        from dataclasses import replace
        from fdbackhaul import Gains
        g = s.gains
        weak = replace(s, gains=Gains(
            direct=np.full((2, 2), 1e-30),
            cross=np.zeros((2, 2, 2)), to_access=np.asarray(g.to_access)))
        ap = build(weak, PowerVector.zeros(2, 2), segments=8)
        assert int(ap.num_pieces[0, 0]) == 1
        assert ap.pieces(0, 0)[0] == AffinePiece(0.0, 1e7 * math.log2(1e-9))


class TestOverwhelmingAggressor:
    """Aggressors far above the victim's own signal leave the chord side."""

    def test_clamped_out_of_signal_only(self):
        s = hd_variant(two_link_scenario(), si_gamma=1e6)
        ap = build(s, PowerVector.zeros(2, 2), segments=8)
        # cross[0][1] = 1e6 towers over direct[0] * cap = 1e-4 * 0.05
        assert np.all(ap.signal_coeffs[0, 1, :] == 0.0)
        assert np.all(ap.interference_coeffs[0, 1, :] == 1e6)
        # the victim's own path always stays
        np.testing.assert_allclose(ap.signal_coeffs[0, 0, :], 1e-4)

    def test_moderate_aggressors_untouched(self):
        s = two_link_scenario()
        ap = build(s, PowerVector.zeros(2, 2), segments=8)
        signal, _ = aggregate_coefficients(s)
        np.testing.assert_allclose(ap.signal_coeffs, signal)

    def test_still_conservative_under_monster_gains(self):
        s = hd_variant(two_link_scenario(), si_gamma=1e6)
        ap = build(s, PowerVector.zeros(2, 2), segments=8)
        rng = np.random.default_rng(11)
        caps = np.asarray(s.link_power_caps)
        xs = rng.uniform(0.0, 1.0, size=(300, 2, 2)) * caps[None, :, None]
        approx = ap.capacity_batch(xs)
        for i in range(xs.shape[0]):
            exact = capacity_matrix(s, PowerVector(xs[i]))
            assert np.all(approx[i] <= exact + 1e-9 * 1e7)
