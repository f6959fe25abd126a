"""Parse raw question-answering event logs into clean per-user timelines.

Raw records arrive as CSV rows with (at least) the columns

    outcome, user_id, question_id, track_name, round_started_at, deactivated_at

and are turned into per-user sequences of :class:`Attempt` with work
durations, inter-attempt gaps, coarse track tags, and break-segmented
sessions.  All timestamps are integer epoch seconds; sub-second input is
truncated.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Outcome",
    "Track",
    "RawRecord",
    "Attempt",
    "Timeline",
    "IngestStats",
    "IngestError",
    "DataQualityError",
    "parse_records",
    "compute_durations",
    "tag_track",
    "filter_users",
    "segment_sessions",
    "build_timelines",
    "ingest_csv",
    "write_attempts",
    "read_attempts",
    "DEFAULT_BREAK_SECONDS",
    "DEFAULT_MIN_ATTEMPTS",
]

DEFAULT_BREAK_SECONDS = 300
DEFAULT_MIN_ATTEMPTS = 15

REQUIRED_COLUMNS = (
    "outcome",
    "user_id",
    "question_id",
    "track_name",
    "round_started_at",
)


class IngestError(Exception):
    """Input cannot be read at all (missing file, undecodable, no header)."""


class DataQualityError(Exception):
    """Input is readable but too corrupted to trust."""


class Outcome(Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    SKIPPED = "skipped"
    ABANDONED = "abandoned"


class Track(Enum):
    MATH = "math"
    VERBAL = "verbal"
    OTHER = "other"


MATH_TRACKS = frozenset(
    {"ACT Math", "ACT Science", "GMAT Quantitative", "SAT Math"}
)
VERBAL_TRACKS = frozenset(
    {"ACT English", "ACT Reading", "SAT Reading", "SAT Writing"}
)

# Some exports of the same data encode outcomes as small integers.
_OUTCOME_CODES: Mapping[str, Outcome] = {
    "1": Outcome.CORRECT,
    "2": Outcome.INCORRECT,
    "3": Outcome.SKIPPED,
    "4": Outcome.ABANDONED,
}


@dataclass(frozen=True, slots=True)
class RawRecord:
    """One raw question-answer event, lightly validated."""

    user_id: str
    question_id: str
    track_name: str
    round_started_at: int
    deactivated_at: int | None
    outcome: Outcome


@dataclass(frozen=True, slots=True)
class Attempt:
    """One cleaned work episode on one question.

    ``end == start + duration`` always holds; ``gap_after`` is the idle time
    until the next attempt's start and is ``None`` for a user's last attempt.
    """

    user_id: str
    question_id: str
    track: Track
    start: int
    end: int
    duration: int
    outcome: Outcome
    gap_after: int | None

    @property
    def correct(self) -> bool:
        return self.outcome is Outcome.CORRECT


@dataclass(frozen=True, slots=True)
class Timeline:
    """A user's attempts in start-time order, partitioned into sessions.

    ``sessions`` holds half-open ``(start, stop)`` index ranges; consecutive
    attempts inside a session are separated by less than the break threshold.
    """

    user_id: str
    attempts: tuple[Attempt, ...]
    sessions: tuple[tuple[int, int], ...] = ()

    def __len__(self) -> int:
        return len(self.attempts)

    def session_slices(self) -> list[tuple[Attempt, ...]]:
        return [self.attempts[a:b] for a, b in self.sessions]


@dataclass(slots=True)
class IngestStats:
    rows_total: int = 0
    rows_malformed: int = 0
    duplicates_dropped: int = 0
    missing_end_dropped: int = 0
    negative_duration_dropped: int = 0
    users_below_min: int = 0

    def merge(self, other: "IngestStats") -> None:
        self.rows_total += other.rows_total
        self.rows_malformed += other.rows_malformed
        self.duplicates_dropped += other.duplicates_dropped
        self.missing_end_dropped += other.missing_end_dropped
        self.negative_duration_dropped += other.negative_duration_dropped
        self.users_below_min += other.users_below_min


def tag_track(track_name: str) -> Track:
    """Map a raw track name onto the coarse math/verbal/other tag."""
    if track_name in MATH_TRACKS:
        return Track.MATH
    if track_name in VERBAL_TRACKS:
        return Track.VERBAL
    return Track.OTHER


def _parse_timestamp(text: str) -> int | None:
    """Epoch seconds from either a numeric value or an ISO-ish datetime."""
    text = text.strip()
    if not text:
        return None
    try:
        return int(float(text))
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ValueError(f"unparseable timestamp {text!r}")
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _parse_outcome(text: str) -> Outcome:
    text = text.strip()
    low = text.lower()
    for member in Outcome:
        if member.value == low:
            return member
    if text in _OUTCOME_CODES:
        return _OUTCOME_CODES[text]
    raise ValueError(f"unknown outcome {text!r}")


def parse_records(stream) -> tuple[list[RawRecord], IngestStats]:
    """Read raw records from a CSV byte or text stream.

    Malformed rows are skipped and counted.  Raises :class:`IngestError` if
    the stream is unreadable or lacks the required header, and
    :class:`DataQualityError` if more than half of the data rows are
    malformed (or there are no data rows at all).
    """
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if hasattr(stream, "read") and isinstance(stream.read(0), bytes):
        stream = io.TextIOWrapper(stream, encoding="utf-8", errors="replace")

    try:
        reader = csv.DictReader(stream)
        header = reader.fieldnames
    except (OSError, UnicodeError) as exc:
        raise IngestError(f"cannot read input stream: {exc}") from exc
    if header is None:
        raise DataQualityError("input is empty (no header row)")
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise IngestError(f"input header is missing columns: {missing}")
    has_deactivated = "deactivated_at" in header

    stats = IngestStats()
    records: list[RawRecord] = []
    try:
        for row in reader:
            stats.rows_total += 1
            try:
                user_id = (row["user_id"] or "").strip()
                question_id = (row["question_id"] or "").strip()
                track_name = (row["track_name"] or "").strip()
                if not user_id or not question_id:
                    raise ValueError("empty identifier")
                started = _parse_timestamp(row["round_started_at"] or "")
                if started is None or started <= 0:
                    raise ValueError("bad round_started_at")
                deactivated = None
                if has_deactivated:
                    deactivated = _parse_timestamp(row.get("deactivated_at") or "")
                outcome = _parse_outcome(row["outcome"] or "")
            except (ValueError, KeyError, TypeError):
                stats.rows_malformed += 1
                continue
            records.append(
                RawRecord(
                    user_id=user_id,
                    question_id=question_id,
                    track_name=track_name,
                    round_started_at=started,
                    deactivated_at=deactivated,
                    outcome=outcome,
                )
            )
    except (OSError, UnicodeError, csv.Error) as exc:
        raise IngestError(f"cannot read input stream: {exc}") from exc

    if stats.rows_total == 0:
        raise DataQualityError("input contains a header but no data rows")
    if stats.rows_malformed * 2 > stats.rows_total:
        raise DataQualityError(
            f"{stats.rows_malformed} of {stats.rows_total} rows are malformed "
            "(more than 50%); refusing to continue"
        )
    return records, stats


def compute_durations(records: Sequence[RawRecord]) -> tuple[list[Attempt], IngestStats]:
    """Turn one user's time-ordered records into attempts with durations.

    Work on question i ends at min(deactivated_at_i, round_started_at_{i+1}):
    starting the next question is treated as the definitive end of the
    previous one.  Attempts with no deactivation and no following record are
    dropped, as are attempts whose resolved duration would be negative.
    """
    stats = IngestStats()
    resolved: list[tuple[RawRecord, int]] = []  # (record, end)
    for i, rec in enumerate(records):
        next_start = records[i + 1].round_started_at if i + 1 < len(records) else None
        candidates = [t for t in (rec.deactivated_at, next_start) if t is not None]
        if not candidates:
            stats.missing_end_dropped += 1
            continue
        end = min(candidates)
        if end < rec.round_started_at:
            stats.negative_duration_dropped += 1
            continue
        resolved.append((rec, end))

    attempts: list[Attempt] = []
    for j, (rec, end) in enumerate(resolved):
        gap: int | None = None
        if j + 1 < len(resolved):
            gap = resolved[j + 1][0].round_started_at - end
        attempts.append(
            Attempt(
                user_id=rec.user_id,
                question_id=rec.question_id,
                track=tag_track(rec.track_name),
                start=rec.round_started_at,
                end=end,
                duration=end - rec.round_started_at,
                outcome=rec.outcome,
                gap_after=gap,
            )
        )
    return attempts, stats


def segment_sessions(
    timeline: Timeline, break_threshold_seconds: int = DEFAULT_BREAK_SECONDS
) -> Timeline:
    """Split a timeline into sessions at gaps of at least the threshold."""
    if break_threshold_seconds <= 0:
        raise ValueError("break_threshold_seconds must be positive")
    sessions: list[tuple[int, int]] = []
    start = 0
    for i, att in enumerate(timeline.attempts):
        last = i == len(timeline.attempts) - 1
        if last or (att.gap_after is not None and att.gap_after >= break_threshold_seconds):
            sessions.append((start, i + 1))
            start = i + 1
    return replace(timeline, sessions=tuple(sessions))


def filter_users(
    timelines: Iterable[Timeline], min_attempts: int = DEFAULT_MIN_ATTEMPTS
) -> list[Timeline]:
    """Keep only users with at least ``min_attempts`` cleaned attempts."""
    if min_attempts < 1:
        raise ValueError("min_attempts must be >= 1")
    return [tl for tl in timelines if len(tl) >= min_attempts]


def build_timelines(
    records: Iterable[RawRecord],
    min_attempts: int = DEFAULT_MIN_ATTEMPTS,
    break_threshold_seconds: int = DEFAULT_BREAK_SECONDS,
) -> tuple[list[Timeline], IngestStats]:
    """Group records by user and produce filtered, session-segmented timelines.

    Records with identical (user_id, round_started_at) are deduplicated
    keeping the first occurrence, so duplicate export rows cannot inflate
    attempt counts.
    """
    stats = IngestStats()
    by_user: dict[str, list[RawRecord]] = {}
    seen: set[tuple[str, int]] = set()
    for rec in records:
        key = (rec.user_id, rec.round_started_at)
        if key in seen:
            stats.duplicates_dropped += 1
            continue
        seen.add(key)
        by_user.setdefault(rec.user_id, []).append(rec)

    timelines: list[Timeline] = []
    for user_id in sorted(by_user):
        user_records = sorted(by_user[user_id], key=lambda r: r.round_started_at)
        attempts, user_stats = compute_durations(user_records)
        stats.merge(user_stats)
        if len(attempts) < min_attempts:
            stats.users_below_min += 1
            continue
        timeline = Timeline(user_id=user_id, attempts=tuple(attempts))
        timelines.append(segment_sessions(timeline, break_threshold_seconds))
    return timelines, stats


def ingest_csv(
    path,
    min_attempts: int = DEFAULT_MIN_ATTEMPTS,
    break_threshold_seconds: int = DEFAULT_BREAK_SECONDS,
) -> tuple[list[Timeline], IngestStats]:
    """Full ingest pipeline: parse, dedupe, clean, filter, sessionize."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc}") from exc
    with fh:
        records, parse_stats = parse_records(fh)
    timelines, stats = build_timelines(
        records, min_attempts=min_attempts, break_threshold_seconds=break_threshold_seconds
    )
    parse_stats.merge(stats)
    return timelines, parse_stats


# -- attempt-table serialization ------------------------------------------

ATTEMPT_COLUMNS = (
    "user_id",
    "question_id",
    "track",
    "start",
    "end",
    "duration",
    "outcome",
    "gap_after",
)


def write_attempts(timelines: Iterable[Timeline], path) -> None:
    """Write the canonical attempt-table CSV consumed by downstream stages."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ATTEMPT_COLUMNS)
        for tl in timelines:
            for att in tl.attempts:
                writer.writerow(
                    [
                        att.user_id,
                        att.question_id,
                        att.track.value,
                        att.start,
                        att.end,
                        att.duration,
                        att.outcome.value,
                        "" if att.gap_after is None else att.gap_after,
                    ]
                )


def read_attempts(
    path, break_threshold_seconds: int = DEFAULT_BREAK_SECONDS
) -> list[Timeline]:
    """Read an attempt-table CSV back into session-segmented timelines."""
    by_user: dict[str, list[Attempt]] = {}
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataQualityError(f"{path} is empty")
        missing = [c for c in ATTEMPT_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise IngestError(f"attempt table {path} is missing columns: {missing}")
        for row in reader:
            gap = row["gap_after"]
            att = Attempt(
                user_id=row["user_id"],
                question_id=row["question_id"],
                track=Track(row["track"]),
                start=int(row["start"]),
                end=int(row["end"]),
                duration=int(row["duration"]),
                outcome=Outcome(row["outcome"]),
                gap_after=None if gap in ("", None) else int(gap),
            )
            by_user.setdefault(att.user_id, []).append(att)
    return [
        segment_sessions(
            Timeline(user_id=user, attempts=tuple(atts)), break_threshold_seconds
        )
        for user, atts in sorted(by_user.items())
    ]
