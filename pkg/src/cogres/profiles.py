"""Per-user, per-track characterization statistics and rate scaling.

Each user is summarized by two performance-independent numbers per track:
the longest time they took to answer a question correctly (a proxy for the
depth of their resources) and their mean correct-answer time relative to the
population (a speed factor).  Both are clamped to corpus percentiles and
used to rescale the global kinetic rate constants for that user.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from .ingest import Attempt, Outcome, Timeline, Track

__all__ = [
    "PercentileBounds",
    "CorpusStats",
    "TrackProfile",
    "UserProfile",
    "longest_correct_time",
    "relative_speed",
    "clamp",
    "f0",
    "scale_params",
    "build_corpus_stats",
    "build_profiles",
    "write_profiles",
    "PAPER_BOUNDS",
    "MIN_USERS_FOR_PERCENTILES",
]

# Fallback clamp bounds used when the corpus is too small to estimate its own
# percentiles: (p5, p95) per track for T_L seconds and dimensionless T_r.
PAPER_BOUNDS: Mapping[Track, Mapping[str, tuple[float, float]]] = {
    Track.MATH: {"t_l": (33.0, 200.0), "t_r": (0.46, 1.6)},
    Track.VERBAL: {"t_l": (29.0, 240.0), "t_r": (0.45, 1.7)},
}

MIN_USERS_FOR_PERCENTILES = 100

MODELED_TRACKS = (Track.MATH, Track.VERBAL)


@dataclass(frozen=True, slots=True)
class PercentileBounds:
    p5: float
    p95: float

    def __post_init__(self):
        if self.p5 > self.p95:
            raise ValueError(f"p5 {self.p5} exceeds p95 {self.p95}")


@dataclass(frozen=True)
class CorpusStats:
    """Frozen one-pass corpus statistics shared by all profile computations.

    ``question_mean_correct_time`` maps question_id to the mean time all
    users took to answer that question correctly.
    """

    question_mean_correct_time: Mapping[str, float]
    t_l_bounds: Mapping[Track, PercentileBounds]
    t_r_bounds: Mapping[Track, PercentileBounds]
    n_users: int

    def mean_correct_time(self, question_id: str) -> float | None:
        return self.question_mean_correct_time.get(question_id)


@dataclass(frozen=True, slots=True)
class TrackProfile:
    t_l: float
    t_r: float
    t_l_clamped: bool
    t_r_clamped: bool


@dataclass(frozen=True, slots=True)
class UserProfile:
    user_id: str
    tracks: Mapping[Track, TrackProfile]

    def get(self, track: Track) -> TrackProfile | None:
        return self.tracks.get(track)


def longest_correct_time(timeline: Timeline, track: Track) -> float | None:
    """Longest time the user spent on a correctly answered question.

    Returns None when the user has no correct answer in the track, which
    excludes them from modeling on that track.
    """
    best: float | None = None
    for att in timeline.attempts:
        if att.track is track and att.outcome is Outcome.CORRECT:
            if best is None or att.duration > best:
                best = float(att.duration)
    return best


def relative_speed(
    timeline: Timeline, track: Track, corpus: CorpusStats
) -> float | None:
    """Mean of T_i / <T_i> over the user's correct answers in the track.

    Values above 1 mean the user is slower than the population average on
    the questions they answered correctly.
    """
    ratios = []
    for att in timeline.attempts:
        if att.track is track and att.outcome is Outcome.CORRECT:
            mean = corpus.mean_correct_time(att.question_id)
            if mean is not None and mean > 0:
                ratios.append(att.duration / mean)
    if not ratios:
        return None
    return float(np.mean(ratios))


def clamp(value: float, p5: float, p95: float) -> float:
    if p5 > p95:
        raise ValueError("p5 must not exceed p95")
    return min(max(value, p5), p95)


def f0(t_l: float, rho: float) -> float:
    """Integral of (t+1)^(-rho) from 0 to t_l.

    Closed form: log(t_l + 1) at rho = 1 and
    ((t_l+1)^(1-rho) - 1) / (1-rho) otherwise, evaluated through expm1 so
    the two branches agree near rho = 1.
    """
    if t_l <= 0:
        raise ValueError("t_l must be positive")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 1.0:
        return math.log1p(t_l)
    return math.expm1((1.0 - rho) * math.log1p(t_l)) / (1.0 - rho)


def scale_params(params, profile: UserProfile, track: Track):
    """Rescale global kinetic parameters for one user and track.

    Every rate constant is divided by the user's T_r; the two-resource
    reservoir ceiling additionally picks up the factor f0(T_L, rho).
    Returns a new params object of the same type.
    """
    tp = profile.get(track)
    if tp is None:
        raise ValueError(f"user {profile.user_id} has no profile for {track.value}")
    # Import here to avoid a cycle: kinetics imports nothing from profiles.
    from .kinetics import OneResourceParams, TwoResourceParams

    if isinstance(params, OneResourceParams):
        return replace(params, k=params.k / tp.t_r, k_r=params.k_r / tp.t_r)
    if isinstance(params, TwoResourceParams):
        return replace(
            params,
            k_w=params.k_w / tp.t_r,
            k_b=params.k_b / tp.t_r,
            k_r=params.k_r / tp.t_r,
            b_max=params.b_max * f0(tp.t_l, params.rho) / tp.t_r,
        )
    raise TypeError(f"unsupported params type {type(params).__name__}")


def _percentile_bounds(values: list[float]) -> PercentileBounds:
    arr = np.asarray(values, dtype=float)
    return PercentileBounds(float(np.percentile(arr, 5)), float(np.percentile(arr, 95)))


def build_corpus_stats(
    timelines: Iterable[Timeline],
    min_users_for_percentiles: int = MIN_USERS_FOR_PERCENTILES,
) -> CorpusStats:
    """One pass over the corpus: per-question mean correct times and the
    per-track percentile clamp bounds for T_L and T_r.

    When fewer than ``min_users_for_percentiles`` users contribute to a
    track, the published reference bounds are used for it instead.
    """
    timelines = list(timelines)
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for tl in timelines:
        for att in tl.attempts:
            if att.outcome is Outcome.CORRECT:
                sums[att.question_id] = sums.get(att.question_id, 0.0) + att.duration
                counts[att.question_id] = counts.get(att.question_id, 0) + 1
    means = {q: sums[q] / counts[q] for q in sums}

    raw_t_l: dict[Track, list[float]] = {t: [] for t in MODELED_TRACKS}
    raw_t_r: dict[Track, list[float]] = {t: [] for t in MODELED_TRACKS}
    interim = CorpusStats(
        question_mean_correct_time=means, t_l_bounds={}, t_r_bounds={}, n_users=0
    )
    for tl in timelines:
        for track in MODELED_TRACKS:
            t_l = longest_correct_time(tl, track)
            if t_l is None:
                continue
            t_r = relative_speed(tl, track, interim)
            if t_r is None:
                continue
            raw_t_l[track].append(t_l)
            raw_t_r[track].append(t_r)

    t_l_bounds: dict[Track, PercentileBounds] = {}
    t_r_bounds: dict[Track, PercentileBounds] = {}
    for track in MODELED_TRACKS:
        if len(raw_t_l[track]) >= min_users_for_percentiles:
            t_l_bounds[track] = _percentile_bounds(raw_t_l[track])
            t_r_bounds[track] = _percentile_bounds(raw_t_r[track])
        else:
            t_l_bounds[track] = PercentileBounds(*PAPER_BOUNDS[track]["t_l"])
            t_r_bounds[track] = PercentileBounds(*PAPER_BOUNDS[track]["t_r"])
    return CorpusStats(
        question_mean_correct_time=means,
        t_l_bounds=t_l_bounds,
        t_r_bounds=t_r_bounds,
        n_users=len(timelines),
    )


def build_profiles(
    timelines: Iterable[Timeline], corpus: CorpusStats
) -> dict[str, UserProfile]:
    """Compute clamped per-track profiles for every user that qualifies.

    Users without any correct answer on a track get no profile for it;
    users with no profile on any modeled track are omitted entirely.
    """
    profiles: dict[str, UserProfile] = {}
    for tl in timelines:
        tracks: dict[Track, TrackProfile] = {}
        for track in MODELED_TRACKS:
            t_l_raw = longest_correct_time(tl, track)
            if t_l_raw is None:
                continue
            t_r_raw = relative_speed(tl, track, corpus)
            if t_r_raw is None:
                continue
            lb = corpus.t_l_bounds[track]
            rb = corpus.t_r_bounds[track]
            t_l = clamp(t_l_raw, lb.p5, lb.p95)
            t_r = clamp(t_r_raw, rb.p5, rb.p95)
            if t_l <= 0 or t_r <= 0:
                continue
            tracks[track] = TrackProfile(
                t_l=t_l,
                t_r=t_r,
                t_l_clamped=t_l != t_l_raw,
                t_r_clamped=t_r != t_r_raw,
            )
        if tracks:
            profiles[tl.user_id] = UserProfile(user_id=tl.user_id, tracks=tracks)
    return profiles


def write_profiles(
    profiles: Mapping[str, UserProfile], path, rho: float = 0.03
) -> None:
    """Export profiles to CSV; f0 is evaluated at the given rho."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["user_id", "track", "t_l", "t_r", "f0", "t_l_clamped", "t_r_clamped"]
        )
        for user_id in sorted(profiles):
            prof = profiles[user_id]
            for track in MODELED_TRACKS:
                tp = prof.get(track)
                if tp is None:
                    continue
                writer.writerow(
                    [
                        user_id,
                        track.value,
                        f"{tp.t_l:.10g}",
                        f"{tp.t_r:.10g}",
                        f"{f0(tp.t_l, rho):.10g}",
                        int(tp.t_l_clamped),
                        int(tp.t_r_clamped),
                    ]
                )
