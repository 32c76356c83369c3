"""Attention-trace to time-window extraction.

Localizes evidence after the fact from a model's temporal attention: smooth,
min-max normalize, take the strongest frame as pivot, then grow a contiguous
window around it out of frames that stay above the mean score and within a
fixed distance of the pivot. Window endpoints snap outward to frame-bin
edges, so even a lone pivot yields a segment of one bin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .gaussian import FrameGrid, frame_times
from .temporal import TemporalSegment

DEFAULT_SMOOTH_W = 3
DEFAULT_DIST_CAP_S = 10.0


class DegenerateTraceWarning(UserWarning):
    """All scores equal after smoothing; extraction falls back to one bin."""


@dataclass(frozen=True)
class AttentionTrace:
    """Per-frame attention distribution over a frame grid."""

    scores: np.ndarray
    grid: FrameGrid

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=float)
        if scores.shape != (self.grid.n_frames,):
            raise ValueError(f"scores shape {scores.shape} != ({self.grid.n_frames},)")
        if np.any(scores < 0) or not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite and non-negative")
        total = float(scores.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"scores sum to {total}, expected 1")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)


def smooth_scores(scores: np.ndarray, smooth_w: int) -> np.ndarray:
    """Edge-truncated moving average; windows shrink at the boundaries."""
    if smooth_w < 1 or smooth_w % 2 == 0:
        raise ValueError(f"smooth_w must be odd and >= 1, got {smooth_w}")
    if smooth_w == 1:
        return np.asarray(scores, dtype=float).copy()
    h = smooth_w // 2
    n = len(scores)
    out = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - h), min(n, i + h + 1)
        out[i] = float(np.mean(scores[lo:hi]))
    return out


def _minmax(scores: np.ndarray) -> np.ndarray | None:
    lo, hi = float(scores.min()), float(scores.max())
    if hi - lo <= 1e-15:
        return None
    return (scores - lo) / (hi - lo)


def dynamic_threshold(trace: AttentionTrace, smooth_w: int = 1) -> float:
    """Mean of the min-max-normalized scores, 0 for a flat trace.

    smooth_w defaults to 1 (no smoothing) so the threshold reflects the raw
    attention distribution; pass an odd width to match extraction's view.
    """
    s = smooth_scores(trace.scores, smooth_w)
    norm = _minmax(s)
    if norm is None:
        return 0.0
    return float(norm.mean())


def extract_window(
    trace: AttentionTrace,
    smooth_w: int = DEFAULT_SMOOTH_W,
    dist_cap_s: float = DEFAULT_DIST_CAP_S,
) -> TemporalSegment:
    """Window around the attention peak; see extract_window_raw."""
    return extract_window_raw(trace.scores, trace.grid, smooth_w, dist_cap_s)


def extract_window_raw(
    scores: np.ndarray,
    grid: FrameGrid,
    smooth_w: int = DEFAULT_SMOOTH_W,
    dist_cap_s: float = DEFAULT_DIST_CAP_S,
) -> TemporalSegment:
    """Extraction for raw (not necessarily normalized) score arrays.

    Smooth, min-max normalize, pivot at the argmax (lowest index on ties),
    then include contiguous frames on each side whose normalized score is at
    least the mean normalized score and whose center lies within dist_cap_s
    seconds of the pivot center. The window spans the included frames' bins.
    Positive affine rescaling of scores cannot change the result because the
    min-max step cancels it.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (grid.n_frames,):
        raise ValueError(f"scores shape {scores.shape} != ({grid.n_frames},)")
    if dist_cap_s <= 0:
        raise ValueError(f"dist_cap_s must be positive, got {dist_cap_s}")
    smoothed = smooth_scores(scores, smooth_w)
    norm = _minmax(smoothed)
    n = grid.n_frames
    bin_w = grid.extent.duration / n
    if norm is None:
        warnings.warn(
            "attention trace is flat after smoothing; grounding to the first frame bin",
            DegenerateTraceWarning,
            stacklevel=2,
        )
        pivot = 0
        return TemporalSegment(0.0, bin_w)
    # tolerance keeps tie-breaking stable: affine-shifted inputs can perturb
    # exactly tied smoothed values by an ulp, which must not move the pivot
    tol = 1e-9
    pivot = int(np.argmax(norm >= 1.0 - tol))
    mean_norm = float(norm.mean())
    times = frame_times(grid)

    def ok(i: int) -> bool:
        return norm[i] >= mean_norm - tol and abs(times[i] - times[pivot]) <= dist_cap_s

    left = pivot
    while left - 1 >= 0 and ok(left - 1):
        left -= 1
    right = pivot
    while right + 1 < n and ok(right + 1):
        right += 1
    return TemporalSegment(left * bin_w, (right + 1) * bin_w)
