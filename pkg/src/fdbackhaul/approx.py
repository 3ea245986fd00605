"""Conservative linearization of the link-capacity expression.

The exact capacity of a link on a subchannel is a difference of two concave
terms in the power variables: B*log2 of the full received aggregate (desired
signal plus interference plus noise) minus B*log2 of the interference-plus-
noise aggregate. The first term is under-approximated by the chord (secant)
envelope of the log over a breakpoint grid; the second is over-approximated
by its tangent at an expansion point. Subtracting an over-estimate from an
under-estimate can only under-estimate, so any power vector that satisfies
the linearized capacity rows also satisfies the exact capacity. That
conservativeness is the load-bearing property of the whole pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .model import PowerVector, Scenario

# Largest ratio, full-power aggressor term over the victim's own full-power
# signal plus noise, still folded into the chord argument. Past it the pair
# is capacity-dead whenever the aggressor transmits at any useful level, and
# carrying the term would spread one row's coefficients beyond what float64
# pivoting resolves.
_SPAN_RATIO_LIMIT = 1e4


@dataclass(frozen=True)
class AffinePiece:
    """One affine function slope*x + intercept."""

    slope: float
    intercept: float

    def value(self, x: float) -> float:
        return self.slope * x + self.intercept


def chord_pieces(breakpoints, bandwidth: float) -> tuple[AffinePiece, ...]:
    """Secant segments of bandwidth*log2(s) through consecutive breakpoints.

    The pointwise minimum of the returned pieces lower-bounds the log on the
    whole breakpoint range and touches it exactly at every breakpoint.
    """
    bp = np.asarray(breakpoints, dtype=float)
    if bp.ndim != 1 or bp.size < 2:
        raise ValueError("need at least two breakpoints")
    if np.any(bp <= 0):
        raise ValueError("breakpoints must be positive")
    if np.any(np.diff(bp) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    logs = np.log2(bp)
    slopes = bandwidth * np.diff(logs) / np.diff(bp)
    intercepts = bandwidth * logs[:-1] - slopes * bp[:-1]
    return tuple(AffinePiece(float(a), float(b)) for a, b in zip(slopes, intercepts))


def taylor_f2(t0: float, bandwidth: float) -> AffinePiece:
    """First-order expansion of bandwidth*log2(t) at t0.

    Over-estimates the log everywhere on t > 0 and is exact at t0.
    """
    if t0 <= 0:
        raise ValueError("expansion point must be positive")
    slope = bandwidth / (t0 * math.log(2.0))
    intercept = bandwidth * math.log2(t0) - slope * t0
    return AffinePiece(slope, intercept)


def aggregate_coefficients(s: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient tensors of the two aggregates, indexed [link][source][f].

    signal includes the link's own desired gain on the diagonal;
    interference zeroes the diagonal out. Both share the cross gains off
    the diagonal, so signal - interference isolates the desired term.
    """
    signal = np.array(s.gains.cross)
    interference = np.array(s.gains.cross)
    idx = np.arange(s.num_links)
    signal[idx, idx, :] = s.gains.direct
    interference[idx, idx, :] = 0.0
    return signal, interference


@dataclass(frozen=True, eq=False)
class CapacityApprox:
    """Per (link, subchannel) chord pieces and tangent, plus the aggregate
    coefficient tensors needed to expand them into power-variable rows.

    Piece arrays are padded to a common depth by repeating each pair's last
    piece, which leaves the pointwise minimum unchanged and keeps
    evaluation vectorizable.
    """

    bandwidth: float
    expansion_point: PowerVector
    signal_coeffs: np.ndarray
    interference_coeffs: np.ndarray
    noise: np.ndarray
    breakpoints: tuple
    piece_slopes: np.ndarray
    piece_intercepts: np.ndarray
    num_pieces: np.ndarray
    tangent_slope: np.ndarray
    tangent_intercept: np.ndarray
    t0: np.ndarray
    s_max: np.ndarray
    t_max: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.noise.shape

    def pieces(self, link: int, f: int) -> tuple[AffinePiece, ...]:
        k = int(self.num_pieces[link, f])
        return tuple(AffinePiece(float(self.piece_slopes[link, f, i]),
                                 float(self.piece_intercepts[link, f, i]))
                     for i in range(k))

    def tangent(self, link: int, f: int) -> AffinePiece:
        return AffinePiece(float(self.tangent_slope[link, f]),
                           float(self.tangent_intercept[link, f]))

    def s_aggregate(self, x: np.ndarray) -> np.ndarray:
        """Full received aggregate per (link, f) for powers x of shape (L, F)."""
        return np.einsum("vaf,af->vf", self.signal_coeffs, x) + self.noise

    def t_aggregate(self, x: np.ndarray) -> np.ndarray:
        """Interference-plus-noise aggregate per (link, f)."""
        return np.einsum("vaf,af->vf", self.interference_coeffs, x) + self.noise

    def capacity_batch(self, xs: np.ndarray) -> np.ndarray:
        """Approximate capacities for a batch of power matrices (n, L, F)."""
        xs = np.asarray(xs, dtype=float)
        s_vals = np.einsum("vaf,naf->nvf", self.signal_coeffs, xs) + self.noise
        t_vals = np.einsum("vaf,naf->nvf", self.interference_coeffs, xs) + self.noise
        f1 = np.full(s_vals.shape, np.inf)
        # One pass per piece depth keeps peak memory at a single (n, L, F)
        # slab instead of materializing the full piece axis.
        for k in range(self.piece_slopes.shape[-1]):
            cand = self.piece_slopes[..., k] * s_vals + self.piece_intercepts[..., k]
            np.minimum(f1, cand, out=f1)
        if self.piece_slopes.shape[-1] == 0:
            f1 = np.zeros(s_vals.shape)
        return f1 - (self.tangent_slope * t_vals + self.tangent_intercept)

    def capacity(self, p: PowerVector) -> np.ndarray:
        """Approximate capacities per (link, f) at one power vector."""
        return self.capacity_batch(p.watts[None, :, :])[0]


def _pair_breakpoints(w: float, span: float, anchor: float, segments: int):
    """Geometric grid over [w, w + span] with the expansion point inserted.

    Returns None when the range is too thin to hold two distinct points, in
    which case the caller falls back to a single constant piece.
    """
    hi = w + span
    if span <= 0 or hi - w <= 1e-12 * hi:
        return None
    grid = np.geomspace(w, hi, segments + 1)
    pts = np.append(grid, min(max(anchor, w), hi))
    pts = np.unique(pts)
    kept = [float(pts[0])]
    for val in pts[1:]:
        if val - kept[-1] > 1e-12 * val:
            kept.append(float(val))
    if len(kept) < 2:
        return None
    return np.asarray(kept)


def build(s: Scenario, p0: PowerVector, segments: int = 16) -> CapacityApprox:
    """Construct the linearization around expansion point p0.

    Breakpoints for each (link, f) span from the pair's noise floor to its
    aggregate at the per-variable power caps, geometrically spaced, with one
    extra breakpoint forced at the aggregate of p0 so the chord envelope is
    exact there. The tangent is taken at p0's interference aggregate.

    Overwhelming aggressor terms (see _SPAN_RATIO_LIMIT) are left out of the
    signal aggregate, which can only lower the envelope; they still count in
    the interference aggregate.
    """
    if segments < 1:
        raise ValueError("segments must be >= 1")
    model._check_power_shape(s, p0)
    if np.any(p0.watts < 0):
        raise ValueError("expansion point must be nonnegative")

    nl, nf = s.num_links, s.num_subchannels
    bandwidth = s.spectrum.bandwidth
    signal, interference = aggregate_coefficients(s)
    noise = np.array(s.spectrum.noise_power)
    caps = np.asarray(s.link_power_caps)

    if nl:
        # An aggressor whose full-power term towers over the victim's own
        # best signal cannot coexist with useful capacity on that pair, yet
        # folding it into the chord argument stretches the grid across
        # decades no feasible plan visits and wrecks row conditioning.
        # Omitting it from the signal aggregate only lowers the envelope, so
        # the approximation stays conservative; the interference aggregate
        # keeps every term and still charges the pair in full.
        contrib = signal * caps[None, :, None]
        own = contrib[np.arange(nl), np.arange(nl), :]
        tame = contrib <= _SPAN_RATIO_LIMIT * (noise + own)[:, None, :]
        tame[np.arange(nl), np.arange(nl), :] = True
        signal = np.where(tame, signal, 0.0)

    x0 = p0.watts
    if nl:
        s0 = np.einsum("vaf,af->vf", signal, x0) + noise
        t0 = np.einsum("vaf,af->vf", interference, x0) + noise
        span_s = np.einsum("vaf,a->vf", signal, caps)
        span_t = np.einsum("vaf,a->vf", interference, caps)
    else:
        s0 = t0 = span_s = span_t = np.zeros((0, nf))

    all_breaks: list[list[np.ndarray]] = []
    all_pieces: list[list[tuple[AffinePiece, ...]]] = []
    depth = 1
    for l in range(nl):
        row_breaks, row_pieces = [], []
        for f in range(nf):
            w = float(noise[l, f])
            pts = _pair_breakpoints(w, float(span_s[l, f]), float(s0[l, f]), segments)
            if pts is None:
                row_breaks.append(np.asarray([w]))
                row_pieces.append((AffinePiece(0.0, bandwidth * math.log2(w)),))
            else:
                row_breaks.append(pts)
                row_pieces.append(chord_pieces(pts, bandwidth))
            depth = max(depth, len(row_pieces[-1]))
        all_breaks.append(row_breaks)
        all_pieces.append(row_pieces)

    piece_slopes = np.zeros((nl, nf, depth))
    piece_intercepts = np.zeros((nl, nf, depth))
    num_pieces = np.zeros((nl, nf), dtype=int)
    tangent_slope = np.zeros((nl, nf))
    tangent_intercept = np.zeros((nl, nf))
    for l in range(nl):
        for f in range(nf):
            ps = all_pieces[l][f]
            num_pieces[l, f] = len(ps)
            for k in range(depth):
                piece = ps[min(k, len(ps) - 1)]
                piece_slopes[l, f, k] = piece.slope
                piece_intercepts[l, f, k] = piece.intercept
            tan = taylor_f2(float(t0[l, f]), bandwidth)
            tangent_slope[l, f] = tan.slope
            tangent_intercept[l, f] = tan.intercept

    return CapacityApprox(
        bandwidth=bandwidth,
        expansion_point=p0,
        signal_coeffs=signal,
        interference_coeffs=interference,
        noise=noise,
        breakpoints=tuple(tuple(row) for row in all_breaks),
        piece_slopes=piece_slopes,
        piece_intercepts=piece_intercepts,
        num_pieces=num_pieces,
        tangent_slope=tangent_slope,
        tangent_intercept=tangent_intercept,
        t0=t0,
        s_max=noise + span_s,
        t_max=noise + span_t,
    )
