"""Outcome normalization, repeat-exposure learning, and break-aligned series.

Raw correctness is confounded by who is answering and what is being asked.
The decile table estimates P(u,q), the chance that a user of net accuracy u
answers a question of net difficulty q correctly; performance is then the
residual delta_a - P(u,q), which averages to zero over the corpus and
isolates the within-user fluctuations the resource models try to explain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ingest import Attempt, Outcome, Timeline
from .profiles import CorpusStats

__all__ = [
    "ExpectedAccuracyTable",
    "PerformanceSample",
    "LearningSample",
    "BreakSeries",
    "BinnedStats",
    "build_expected_accuracy",
    "performance",
    "performance_samples",
    "learning_outcomes",
    "align_to_break",
    "performance_change_vs_gap",
    "relative_answer_speed",
    "binned_stats",
    "GRID_SIZE",
]

GRID_SIZE = 10


@dataclass(frozen=True)
class ExpectedAccuracyTable:
    """Decile-grid estimate of P(u,q) with add-1 smoothed cells.

    Unseen users or questions fall back to the overall corpus accuracy.
    """

    u_edges: np.ndarray
    q_edges: np.ndarray
    counts: np.ndarray
    corrects: np.ndarray
    user_bin: dict[str, int]
    question_bin: dict[str, int]
    user_value: dict[str, float]
    question_value: dict[str, float]
    global_accuracy: float

    def cell(self, ui: int, qi: int) -> float:
        return (self.corrects[ui, qi] + 1.0) / (self.counts[ui, qi] + 2.0)

    def expected(self, user_id: str, question_id: str) -> float:
        ui = self.user_bin.get(user_id)
        qi = self.question_bin.get(question_id)
        if ui is None or qi is None:
            return self.global_accuracy
        return self.cell(ui, qi)

    def marginal_accuracy(self) -> float:
        """Count-weighted mean over raw cell rates; equals corpus accuracy."""
        return float(self.corrects.sum() / self.counts.sum())

    def question_difficulty(self, question_id: str) -> float | None:
        """Net difficulty: fraction of correct answers across all users."""
        return self.question_value.get(question_id)


def build_expected_accuracy(
    attempts: Iterable[Attempt], grid_size: int = GRID_SIZE
) -> ExpectedAccuracyTable:
    attempts = list(attempts)
    if not attempts:
        raise ValueError("cannot build an accuracy table from zero attempts")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")

    user_n: dict[str, int] = {}
    user_c: dict[str, int] = {}
    q_n: dict[str, int] = {}
    q_c: dict[str, int] = {}
    for att in attempts:
        corr = 1 if att.correct else 0
        user_n[att.user_id] = user_n.get(att.user_id, 0) + 1
        user_c[att.user_id] = user_c.get(att.user_id, 0) + corr
        q_n[att.question_id] = q_n.get(att.question_id, 0) + 1
        q_c[att.question_id] = q_c.get(att.question_id, 0) + corr

    users = sorted(user_n)
    questions = sorted(q_n)
    u_vals = np.array([user_c[u] / user_n[u] for u in users])
    q_vals = np.array([q_c[q] / q_n[q] for q in questions])
    inner = np.linspace(1.0 / grid_size, 1.0 - 1.0 / grid_size, grid_size - 1)
    u_edges = np.quantile(u_vals, inner)
    q_edges = np.quantile(q_vals, inner)
    user_bin = {
        u: int(np.searchsorted(u_edges, v, side="right"))
        for u, v in zip(users, u_vals)
    }
    question_bin = {
        q: int(np.searchsorted(q_edges, v, side="right"))
        for q, v in zip(questions, q_vals)
    }

    counts = np.zeros((grid_size, grid_size))
    corrects = np.zeros((grid_size, grid_size))
    for att in attempts:
        ui = user_bin[att.user_id]
        qi = question_bin[att.question_id]
        counts[ui, qi] += 1
        if att.correct:
            corrects[ui, qi] += 1

    return ExpectedAccuracyTable(
        u_edges=u_edges,
        q_edges=q_edges,
        counts=counts,
        corrects=corrects,
        user_bin=user_bin,
        question_bin=question_bin,
        user_value={u: float(v) for u, v in zip(users, u_vals)},
        question_value={q: float(v) for q, v in zip(questions, q_vals)},
        global_accuracy=float(corrects.sum() / counts.sum()),
    )


@dataclass(frozen=True, slots=True)
class PerformanceSample:
    attempt: Attempt
    delta: int
    expected: float
    performance: float


def performance(attempt: Attempt, table: ExpectedAccuracyTable) -> float:
    delta = 1.0 if attempt.correct else 0.0
    return delta - table.expected(attempt.user_id, attempt.question_id)


def performance_samples(
    attempts: Iterable[Attempt], table: ExpectedAccuracyTable
) -> list[PerformanceSample]:
    out = []
    for att in attempts:
        delta = 1 if att.correct else 0
        exp = table.expected(att.user_id, att.question_id)
        out.append(PerformanceSample(att, delta, exp, delta - exp))
    return out


@dataclass(frozen=True, slots=True)
class LearningSample:
    """One exposure-to-next-recurrence pair of the same question."""

    first_index: int
    repeat_index: int
    first: Attempt
    repeat: Attempt
    learned: int
    time_before_break: int


def _session_end_times(timeline: Timeline) -> list[int]:
    """For each attempt, the end time of the last attempt in its session."""
    ends = [0] * len(timeline.attempts)
    for s, e in timeline.sessions:
        last_end = timeline.attempts[e - 1].end
        for i in range(s, e):
            ends[i] = last_end
    return ends


def learning_outcomes(
    timeline: Timeline, include_skipped: bool = True
) -> list[LearningSample]:
    """Pair each responded attempt with the next recurrence of its question.

    Walking backwards keeps one "next seen index" per question, so chained
    recurrences produce one sample per adjacent pair.  Abandoned exposures
    carry no response and never start a pair; skipped ones do unless
    disabled.
    """
    session_end = _session_end_times(timeline)
    next_seen: dict[str, int] = {}
    out_rev: list[LearningSample] = []
    for i in range(len(timeline.attempts) - 1, -1, -1):
        att = timeline.attempts[i]
        j = next_seen.get(att.question_id)
        next_seen[att.question_id] = i
        if att.outcome is Outcome.ABANDONED:
            continue
        if att.outcome is Outcome.SKIPPED and not include_skipped:
            continue
        if j is None:
            continue
        rep = timeline.attempts[j]
        out_rev.append(
            LearningSample(
                first_index=i,
                repeat_index=j,
                first=att,
                repeat=rep,
                learned=1 if rep.correct else 0,
                time_before_break=session_end[i] - att.end,
            )
        )
    out_rev.reverse()
    return out_rev


@dataclass(frozen=True)
class BreakSeries:
    """Per-position means over questions counted backwards from each break.

    Position 0 is the last question before a break (session end); position j
    is j questions earlier in the same session.
    """

    positions: np.ndarray
    perf_mean: np.ndarray
    perf_sem: np.ndarray
    perf_n: np.ndarray
    speed_mean: np.ndarray
    speed_sem: np.ndarray
    speed_n: np.ndarray
    learned_mean: np.ndarray
    learned_sem: np.ndarray
    learned_n: np.ndarray


def _mean_sem_n(buckets: list[list[float]]):
    means = np.full(len(buckets), np.nan)
    sems = np.full(len(buckets), np.nan)
    ns = np.zeros(len(buckets), dtype=np.int64)
    for i, vals in enumerate(buckets):
        ns[i] = len(vals)
        if vals:
            arr = np.asarray(vals)
            means[i] = arr.mean()
            if len(vals) > 1:
                sems[i] = arr.std(ddof=1) / np.sqrt(len(vals))
    return means, sems, ns


def relative_answer_speed(attempt: Attempt, corpus: CorpusStats) -> float | None:
    """Corpus mean time over this attempt's time; >1 means faster than average."""
    if attempt.duration <= 0:
        return None
    mean = corpus.mean_correct_time(attempt.question_id)
    if mean is None or mean <= 0:
        return None
    return mean / attempt.duration


def align_to_break(
    timelines: Iterable[Timeline],
    table: ExpectedAccuracyTable,
    corpus: CorpusStats,
    max_positions: int = 20,
) -> BreakSeries:
    perf: list[list[float]] = [[] for _ in range(max_positions)]
    speed: list[list[float]] = [[] for _ in range(max_positions)]
    learned: list[list[float]] = [[] for _ in range(max_positions)]
    for tl in timelines:
        learn_at = {s.first_index: s.learned for s in learning_outcomes(tl)}
        for s, e in tl.sessions:
            for i in range(s, e):
                pos = (e - 1) - i
                if pos >= max_positions:
                    continue
                att = tl.attempts[i]
                perf[pos].append(performance(att, table))
                spd = relative_answer_speed(att, corpus)
                if spd is not None:
                    speed[pos].append(spd)
                if i in learn_at:
                    learned[pos].append(float(learn_at[i]))
    p_m, p_s, p_n = _mean_sem_n(perf)
    s_m, s_s, s_n = _mean_sem_n(speed)
    l_m, l_s, l_n = _mean_sem_n(learned)
    return BreakSeries(
        positions=np.arange(max_positions),
        perf_mean=p_m, perf_sem=p_s, perf_n=p_n,
        speed_mean=s_m, speed_sem=s_s, speed_n=s_n,
        learned_mean=l_m, learned_sem=l_s, learned_n=l_n,
    )


def performance_change_vs_gap(
    timelines: Iterable[Timeline], table: ExpectedAccuracyTable
) -> tuple[np.ndarray, np.ndarray]:
    """Raw (gap_after, next-attempt performance change) pairs, unbinned."""
    gaps: list[float] = []
    deltas: list[float] = []
    for tl in timelines:
        prev_perf: float | None = None
        prev_gap: int | None = None
        for att in tl.attempts:
            cur = performance(att, table)
            if prev_perf is not None and prev_gap is not None:
                gaps.append(float(prev_gap))
                deltas.append(cur - prev_perf)
            prev_perf = cur
            prev_gap = att.gap_after
    return np.asarray(gaps), np.asarray(deltas)


@dataclass(frozen=True)
class BinnedStats:
    edges: np.ndarray
    centers: np.ndarray
    mean: np.ndarray
    sem: np.ndarray
    n: np.ndarray


def binned_stats(x, y, edges) -> BinnedStats:
    """Mean/sem/count of y within consecutive [edge, edge) bins of x.

    The last bin is closed on the right so the maximum lands inside it.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two bin edges")
    nb = edges.size - 1
    idx = np.searchsorted(edges, x, side="right") - 1
    idx[x == edges[-1]] = nb - 1
    buckets: list[list[float]] = [[] for _ in range(nb)]
    for b, val in zip(idx, y):
        if 0 <= b < nb:
            buckets[int(b)].append(float(val))
    mean, sem, n = _mean_sem_n(buckets)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return BinnedStats(edges=edges, centers=centers, mean=mean, sem=sem, n=n)
