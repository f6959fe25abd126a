"""Resource-depletion kinetics integrated over alternating work/rest intervals.

Two model families share the same integration machinery:

* one-resource: a single pool A drains while working (Michaelis-Menten in A)
  and relaxes back toward A_max while resting;
* two-resource: a fast pool A drains continuously and is replenished from a
  reservoir B during work, while B refills during rest.

All rates carry an anomalous time factor (t+1)^(-rho) where t is the time
since the current work or rest interval began.  Work on each question is its
own interval; consecutive rest spans accumulate into one interval.

The per-attempt integration loops are compiled with numba; the Python-level
``rate_one``/``rate_two``/``integrate_interval`` mirror the kernel math for
single intervals and tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit

from .ingest import Timeline, Track

__all__ = [
    "ModelKind",
    "OneResourceParams",
    "TwoResourceParams",
    "ResourceState",
    "ResourceTrajectory",
    "NumericsError",
    "rate_one",
    "rate_two",
    "integrate_interval",
    "trajectory",
    "timeline_arrays",
    "write_trajectories",
    "read_trajectories",
    "FITTED_ONE",
    "FITTED_TWO",
    "TRACK_CODES",
    "TRAJECTORY_COLUMNS",
]


class ModelKind(Enum):
    ONE_RESOURCE = "one"
    TWO_RESOURCE = "two"


class NumericsError(RuntimeError):
    """Integration produced a non-finite state."""


def _require_positive(**fields):
    for name, value in fields.items():
        if not value > 0:
            raise ValueError(f"{name} must be > 0, got {value}")


def _require_nonnegative(**fields):
    for name, value in fields.items():
        if not value >= 0:
            raise ValueError(f"{name} must be >= 0, got {value}")


@dataclass(frozen=True, slots=True)
class OneResourceParams:
    k: float
    k_r: float
    rho: float
    k_m: float
    a_max: float = 1.0

    def __post_init__(self):
        _require_nonnegative(k=self.k, k_r=self.k_r, rho=self.rho)
        _require_positive(k_m=self.k_m, a_max=self.a_max)

    @property
    def kind(self) -> ModelKind:
        return ModelKind.ONE_RESOURCE


@dataclass(frozen=True, slots=True)
class TwoResourceParams:
    k_w: float
    k_b: float
    k_r: float
    b_max: float
    rho: float
    k_a: float = 0.858
    k_b_sat: float = 0.1

    def __post_init__(self):
        _require_nonnegative(k_w=self.k_w, k_b=self.k_b, k_r=self.k_r, rho=self.rho)
        _require_positive(b_max=self.b_max, k_a=self.k_a, k_b_sat=self.k_b_sat)

    @property
    def kind(self) -> ModelKind:
        return ModelKind.TWO_RESOURCE


# Published fitted values; evaluate-mode defaults when no fit result is given.
FITTED_ONE = OneResourceParams(k=0.078, k_r=0.21, rho=1.0, k_m=0.44867)
FITTED_TWO = TwoResourceParams(k_w=0.003, k_b=0.118, k_r=0.00125, b_max=0.27, rho=0.03)


@dataclass(frozen=True, slots=True)
class ResourceState:
    """Instantaneous state: pool levels plus time since the interval began.

    ``b`` is None for the one-resource model.  ``t_interval`` is the caller's
    bookkeeping; integration advances it, interval entry resets it.
    """

    a: float
    b: float | None = None
    t_interval: float = 0.0


def _anomalous(t: float, rho: float) -> float:
    return (t + 1.0) ** (-rho)


def rate_one(state: ResourceState, working: bool, params: OneResourceParams) -> float:
    ft = _anomalous(state.t_interval, params.rho)
    if working:
        return -params.k * ft * state.a / (params.k_m + state.a)
    return params.k_r * ft * (params.a_max - state.a)


def rate_two(
    state: ResourceState, working: bool, params: TwoResourceParams
) -> tuple[float, float]:
    if state.b is None:
        raise ValueError("two-resource rate needs state.b")
    ft = _anomalous(state.t_interval, params.rho)
    f = params.k_w * ft * state.a / (params.k_a + state.a)
    if working:
        w2 = params.k_b * ft * (1.0 - state.a) * state.b / (params.k_b_sat + state.b)
        return -f + w2, -w2
    r2 = params.k_r * ft * (params.b_max - state.b)
    return -f, r2


# ---------------------------------------------------------------------------
# Compiled kernels.  Stage states are clamped to the invariant box before
# each rate evaluation so that every work-mode stage rate is <= 0 and every
# rest-mode stage rate is >= 0; together with the endpoint clamp this makes
# the monotonicity invariants hold structurally for any positive parameters,
# however stiff.


@njit(cache=True, nogil=True)
def _n_steps(duration: float, refine: int, l_max: float) -> int:
    # h = min(1s, duration/100, 1/L): at least 100 steps, at most 1s each,
    # and never wider than the fastest linearized rate allows.  L*h <= 1
    # keeps the fixed-step scheme well inside its stability region even at
    # the stiff corners of the parameter box.
    h = duration / 100.0
    if h > 1.0:
        h = 1.0
    if l_max * h > 1.0:
        h = 1.0 / l_max
    n = int(math.ceil(duration / h - 1e-9))
    return n * refine


@njit(cache=True, nogil=True)
def _rate1_clamped(
    a: float, t: float, working: bool, k: float, k_r: float, rho: float,
    k_m: float, a_max: float,
) -> float:
    if a < 0.0:
        a = 0.0
    elif a > a_max:
        a = a_max
    ft = (t + 1.0) ** (-rho)
    if working:
        return -k * ft * a / (k_m + a)
    return k_r * ft * (a_max - a)


@njit(cache=True, nogil=True)
def _advance_one(
    a: float, t0: float, duration: float, working: bool,
    k: float, k_r: float, rho: float, k_m: float, a_max: float, refine: int,
) -> float:
    if duration <= 0.0:
        return a
    l_max = k / k_m  # steepest work slope, at the origin of the saturation
    if k_r > l_max:
        l_max = k_r
    n = _n_steps(duration, refine, l_max)
    h = duration / n
    for i in range(n):
        t = t0 + i * h
        r1 = _rate1_clamped(a, t, working, k, k_r, rho, k_m, a_max)
        r2 = _rate1_clamped(a + 0.5 * h * r1, t + 0.5 * h, working, k, k_r, rho, k_m, a_max)
        r3 = _rate1_clamped(a + 0.5 * h * r2, t + 0.5 * h, working, k, k_r, rho, k_m, a_max)
        r4 = _rate1_clamped(a + h * r3, t + h, working, k, k_r, rho, k_m, a_max)
        a = a + (h / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
        if a < 0.0:
            a = 0.0
        elif a > a_max:
            a = a_max
    return a


@njit(cache=True, nogil=True)
def _rate2_clamped(
    a: float, b: float, t: float, working: bool,
    k_w: float, k_b: float, k_r: float, b_max: float, rho: float,
    k_a: float, k_b_sat: float,
):
    if a < 0.0:
        a = 0.0
    elif a > 1.0:
        a = 1.0
    if b < 0.0:
        b = 0.0
    elif b > b_max:
        b = b_max
    ft = (t + 1.0) ** (-rho)
    f = k_w * ft * a / (k_a + a)
    if working:
        w2 = k_b * ft * (1.0 - a) * b / (k_b_sat + b)
        return -f + w2, -w2
    return -f, k_r * ft * (b_max - b)


@njit(cache=True, nogil=True)
def _advance_two(
    a: float, b: float, t0: float, duration: float, working: bool,
    k_w: float, k_b: float, k_r: float, b_max: float, rho: float,
    k_a: float, k_b_sat: float, refine: int,
):
    if duration <= 0.0:
        return a, b
    l_max = k_b / k_b_sat  # reservoir drain dominates near b = 0
    if k_w / k_a > l_max:
        l_max = k_w / k_a
    if k_r > l_max:
        l_max = k_r
    n = _n_steps(duration, refine, l_max)
    h = duration / n
    for i in range(n):
        t = t0 + i * h
        da1, db1 = _rate2_clamped(a, b, t, working, k_w, k_b, k_r, b_max, rho, k_a, k_b_sat)
        da2, db2 = _rate2_clamped(
            a + 0.5 * h * da1, b + 0.5 * h * db1, t + 0.5 * h, working,
            k_w, k_b, k_r, b_max, rho, k_a, k_b_sat,
        )
        da3, db3 = _rate2_clamped(
            a + 0.5 * h * da2, b + 0.5 * h * db2, t + 0.5 * h, working,
            k_w, k_b, k_r, b_max, rho, k_a, k_b_sat,
        )
        da4, db4 = _rate2_clamped(
            a + h * da3, b + h * db3, t + h, working,
            k_w, k_b, k_r, b_max, rho, k_a, k_b_sat,
        )
        a = a + (h / 6.0) * (da1 + 2.0 * da2 + 2.0 * da3 + da4)
        b = b + (h / 6.0) * (db1 + 2.0 * db2 + 2.0 * db3 + db4)
        if a < 0.0:
            a = 0.0
        elif a > 1.0:
            a = 1.0
        if b < 0.0:
            b = 0.0
        elif b > b_max:
            b = b_max
    return a, b


@njit(cache=True, nogil=True)
def _traj_one(
    dur, gap, work,
    k: float, k_r: float, rho: float, k_m: float, a_max: float,
    a0: float, refine: int,
):
    n = dur.shape[0]
    a_start = np.empty(n, dtype=np.float64)
    a_end = np.empty(n, dtype=np.float64)
    a = a0
    t = 0.0
    resting = True
    for i in range(n):
        a_start[i] = a
        d = dur[i]
        if d > 0.0:
            if work[i]:
                # each question is its own work interval
                a = _advance_one(a, 0.0, d, True, k, k_r, rho, k_m, a_max, refine)
                resting = False
            else:
                if not resting:
                    resting = True
                    t = 0.0
                a = _advance_one(a, t, d, False, k, k_r, rho, k_m, a_max, refine)
                t += d
        a_end[i] = a
        g = gap[i]
        if g > 0.0:
            if not resting:
                resting = True
                t = 0.0
            a = _advance_one(a, t, g, False, k, k_r, rho, k_m, a_max, refine)
            t += g
    return a_start, a_end


@njit(cache=True, nogil=True)
def _traj_two(
    dur, gap, work,
    k_w: float, k_b: float, k_r: float, b_max: float, rho: float,
    k_a: float, k_b_sat: float, a0: float, b0: float, refine: int,
):
    n = dur.shape[0]
    a_start = np.empty(n, dtype=np.float64)
    a_end = np.empty(n, dtype=np.float64)
    b_start = np.empty(n, dtype=np.float64)
    b_end = np.empty(n, dtype=np.float64)
    a = a0
    b = b0
    t = 0.0
    resting = True
    for i in range(n):
        a_start[i] = a
        b_start[i] = b
        d = dur[i]
        if d > 0.0:
            if work[i]:
                a, b = _advance_two(a, b, 0.0, d, True, k_w, k_b, k_r, b_max, rho,
                                    k_a, k_b_sat, refine)
                resting = False
            else:
                if not resting:
                    resting = True
                    t = 0.0
                a, b = _advance_two(a, b, t, d, False, k_w, k_b, k_r, b_max, rho,
                                    k_a, k_b_sat, refine)
                t += d
        a_end[i] = a
        b_end[i] = b
        g = gap[i]
        if g > 0.0:
            if not resting:
                resting = True
                t = 0.0
            a, b = _advance_two(a, b, t, g, False, k_w, k_b, k_r, b_max, rho,
                                k_a, k_b_sat, refine)
            t += g
    return a_start, a_end, b_start, b_end


# ---------------------------------------------------------------------------
# Python-facing API.


def integrate_interval(
    state: ResourceState,
    duration_seconds: float,
    working: bool,
    params,
    refine: int = 1,
) -> ResourceState:
    """Advance one state over a single work or rest interval.

    The interval is assumed already entered: integration runs from
    ``state.t_interval`` to ``state.t_interval + duration``.  Callers reset
    t_interval to 0 when a new interval begins.
    """
    if duration_seconds < 0:
        raise ValueError("duration must be >= 0")
    if duration_seconds == 0:
        return state
    if isinstance(params, OneResourceParams):
        a = _advance_one(
            float(state.a), float(state.t_interval), float(duration_seconds),
            bool(working), params.k, params.k_r, params.rho, params.k_m,
            params.a_max, refine,
        )
        if not math.isfinite(a):
            raise NumericsError(
                f"non-finite state a={a} after {duration_seconds}s "
                f"(working={working}, params={params})"
            )
        return replace(state, a=a, t_interval=state.t_interval + duration_seconds)
    if isinstance(params, TwoResourceParams):
        if state.b is None:
            raise ValueError("two-resource integration needs state.b")
        a, b = _advance_two(
            float(state.a), float(state.b), float(state.t_interval),
            float(duration_seconds), bool(working),
            params.k_w, params.k_b, params.k_r, params.b_max, params.rho,
            params.k_a, params.k_b_sat, refine,
        )
        if not (math.isfinite(a) and math.isfinite(b)):
            raise NumericsError(
                f"non-finite state a={a} b={b} after {duration_seconds}s "
                f"(working={working}, params={params})"
            )
        return replace(state, a=a, b=b, t_interval=state.t_interval + duration_seconds)
    raise TypeError(f"unsupported params type {type(params).__name__}")


TRACK_CODES: Mapping[Track, int] = {Track.MATH: 0, Track.VERBAL: 1, Track.OTHER: 2}


def timeline_arrays(timeline: Timeline):
    """Flatten a timeline into (durations, gaps, track codes) float/int arrays.

    The trailing attempt has no gap_after; it contributes 0 (nothing to
    integrate after it).
    """
    n = len(timeline.attempts)
    dur = np.empty(n, dtype=np.float64)
    gap = np.empty(n, dtype=np.float64)
    code = np.empty(n, dtype=np.int8)
    for i, att in enumerate(timeline.attempts):
        dur[i] = att.duration
        gap[i] = 0.0 if att.gap_after is None else att.gap_after
        code[i] = TRACK_CODES[att.track]
    return dur, gap, code


@dataclass(frozen=True)
class ResourceTrajectory:
    """Per-attempt resource levels for one user under one model.

    Arrays are aligned with the timeline's attempts.  Entries are NaN where
    the attempt's track has no scaled parameters (untracked subjects, or the
    user lacks a profile for that track).  ``b_start``/``b_end`` are None for
    the one-resource model.
    """

    user_id: str
    kind: ModelKind
    a_start: np.ndarray
    a_end: np.ndarray
    b_start: np.ndarray | None
    b_end: np.ndarray | None

    def __len__(self) -> int:
        return self.a_start.shape[0]


def _track_series(dur, gap, code, track: Track, params, refine: int):
    work = code == TRACK_CODES[track]
    if isinstance(params, OneResourceParams):
        a_s, a_e = _traj_one(
            dur, gap, work, params.k, params.k_r, params.rho, params.k_m,
            params.a_max, params.a_max, refine,
        )
        b_s = b_e = None
    else:
        a_s, a_e, b_s, b_e = _traj_two(
            dur, gap, work, params.k_w, params.k_b, params.k_r, params.b_max,
            params.rho, params.k_a, params.k_b_sat, 0.0, params.b_max, refine,
        )
    return a_s, a_e, b_s, b_e


def trajectory(
    timeline: Timeline,
    scaled: Mapping[Track, object],
    refine: int = 1,
) -> ResourceTrajectory:
    """Resource levels at the start and end of every attempt.

    ``scaled`` maps each modeled track to that user's scaled parameter set;
    all values must be the same model type.  Each track's state evolves
    independently: it works during its own attempts and rests through
    everything else (other-track attempts, untracked attempts, gaps).
    """
    if not scaled:
        raise ValueError("need scaled params for at least one track")
    kinds = {type(p) for p in scaled.values()}
    if len(kinds) != 1:
        raise TypeError("mixed parameter types in scaled mapping")
    two = kinds == {TwoResourceParams}
    if not two and kinds != {OneResourceParams}:
        raise TypeError(f"unsupported params type {kinds.pop().__name__}")

    dur, gap, code = timeline_arrays(timeline)
    n = len(timeline.attempts)
    a_start = np.full(n, np.nan)
    a_end = np.full(n, np.nan)
    b_start = np.full(n, np.nan) if two else None
    b_end = np.full(n, np.nan) if two else None

    for track, params in scaled.items():
        if track is Track.OTHER:
            raise ValueError("untracked attempts cannot carry parameters")
        a_s, a_e, b_s, b_e = _track_series(dur, gap, code, track, params, refine)
        if not (np.all(np.isfinite(a_s)) and np.all(np.isfinite(a_e))):
            raise NumericsError(
                f"non-finite trajectory for user {timeline.user_id}, {track.value}"
            )
        mask = code == TRACK_CODES[track]
        a_start[mask] = a_s[mask]
        a_end[mask] = a_e[mask]
        if two:
            if not (np.all(np.isfinite(b_s)) and np.all(np.isfinite(b_e))):
                raise NumericsError(
                    f"non-finite trajectory for user {timeline.user_id}, {track.value}"
                )
            b_start[mask] = b_s[mask]
            b_end[mask] = b_e[mask]

    return ResourceTrajectory(
        user_id=timeline.user_id,
        kind=ModelKind.TWO_RESOURCE if two else ModelKind.ONE_RESOURCE,
        a_start=a_start,
        a_end=a_end,
        b_start=b_start,
        b_end=b_end,
    )


TRAJECTORY_COLUMNS = (
    "user_id", "attempt_index", "track", "a_start", "a_end", "b_start", "b_end",
)


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.10g}"


def write_trajectories(
    trajectories: Iterable[ResourceTrajectory],
    timelines: Mapping[str, Timeline],
    path,
) -> None:
    """Export per-attempt resource levels as CSV, sorted by user id."""
    by_user = {tr.user_id: tr for tr in trajectories}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for user_id in sorted(by_user):
            tr = by_user[user_id]
            tl = timelines[user_id]
            for i, att in enumerate(tl.attempts):
                b_s = tr.b_start[i] if tr.b_start is not None else math.nan
                b_e = tr.b_end[i] if tr.b_end is not None else math.nan
                writer.writerow(
                    [
                        user_id,
                        i,
                        att.track.value,
                        _fmt(tr.a_start[i]),
                        _fmt(tr.a_end[i]),
                        _fmt(b_s),
                        _fmt(b_e),
                    ]
                )


def read_trajectories(path) -> dict[str, ResourceTrajectory]:
    """Load an exported trajectory table, grouping rows by user."""
    rows: dict[str, list[tuple[int, str, float, float, float, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRAJECTORY_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"trajectory table missing columns: {sorted(missing)}")
        for row in reader:
            rows.setdefault(row["user_id"], []).append(
                (
                    int(row["attempt_index"]),
                    row["track"],
                    float(row["a_start"]) if row["a_start"] else math.nan,
                    float(row["a_end"]) if row["a_end"] else math.nan,
                    float(row["b_start"]) if row["b_start"] else math.nan,
                    float(row["b_end"]) if row["b_end"] else math.nan,
                )
            )
    out: dict[str, ResourceTrajectory] = {}
    for user_id, recs in rows.items():
        recs.sort(key=lambda r: r[0])
        a_s = np.array([r[2] for r in recs])
        a_e = np.array([r[3] for r in recs])
        b_s = np.array([r[4] for r in recs])
        b_e = np.array([r[5] for r in recs])
        two = bool(np.any(np.isfinite(b_s)))
        out[user_id] = ResourceTrajectory(
            user_id=user_id,
            kind=ModelKind.TWO_RESOURCE if two else ModelKind.ONE_RESOURCE,
            a_start=a_s,
            a_end=a_e,
            b_start=b_s if two else None,
            b_end=b_e if two else None,
        )
    return out
