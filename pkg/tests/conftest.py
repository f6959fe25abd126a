import numpy as np
import pytest

from cogres.ingest import Attempt, Outcome, Timeline, Track, build_timelines, RawRecord


def make_attempt(
    user="u1",
    question="q1",
    track=Track.MATH,
    start=0,
    duration=10,
    outcome=Outcome.CORRECT,
    gap_after=5,
):
    return Attempt(
        user_id=user,
        question_id=question,
        track=track,
        start=start,
        end=start + duration,
        duration=duration,
        outcome=outcome,
        gap_after=gap_after,
    )


def make_timeline(spec, user="u1", break_threshold=300):
    """Build a session-segmented timeline from (question, duration, gap, outcome).

    ``spec`` rows may also carry a track as a fifth element.  Gaps are the
    idle seconds after each attempt; the last row's gap is ignored.
    """
    attempts = []
    t = 0
    sessions = []
    sess_start = 0
    for i, row in enumerate(spec):
        q, dur, gap, outcome = row[:4]
        track = row[4] if len(row) > 4 else Track.MATH
        last = i == len(spec) - 1
        attempts.append(
            Attempt(
                user_id=user,
                question_id=q,
                track=track,
                start=t,
                end=t + dur,
                duration=dur,
                outcome=outcome,
                gap_after=None if last else gap,
            )
        )
        if not last and gap >= break_threshold:
            sessions.append((sess_start, i + 1))
            sess_start = i + 1
        t += dur + gap
    sessions.append((sess_start, len(spec)))
    return Timeline(user_id=user, attempts=tuple(attempts), sessions=tuple(sessions))


def records_from_rows(rows):
    """(user, question, track_name, start, end, outcome) tuples to records."""
    return [
        RawRecord(
            user_id=u,
            question_id=q,
            track_name=tr,
            round_started_at=s,
            deactivated_at=e,
            outcome=o,
        )
        for u, q, tr, s, e, o in rows
    ]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
