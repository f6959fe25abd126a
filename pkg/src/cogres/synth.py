"""Synthetic cohorts with known resource dynamics and outcome links.

The generator runs the same compiled kinetics kernels used for fitting, so
a generated corpus is the ground truth for everything downstream: ingest
must reproduce its durations and gaps exactly, the MI estimator must agree
with the brute-force plug-in value on the hidden A_end, and fitting must
recover parameters that explain at least as much as the generating ones.

Outcomes are Bernoulli with P(correct | A_end) = logistic(beta0 + beta1 *
A_end + question offset).  The link is an oracle construction: any monotone
map from resources to accuracy produces the dependence the pipeline is
supposed to detect.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.special import expit

from .ingest import Outcome, RawRecord
from .kinetics import (
    OneResourceParams,
    TwoResourceParams,
    _traj_one,
    _traj_two,
)

__all__ = [
    "SynthConfig",
    "TruthRow",
    "SynthCohort",
    "generate_cohort",
    "oracle_mi",
    "write_cohort",
    "read_truth",
    "TRUTH_COLUMNS",
    "DEPLETING_PARAMS",
    "FROZEN_PARAMS",
]

# Ground-truth dynamics tuned so a default cohort shows the phenomenology
# the pipeline must detect: the reservoir converts fast (about one question
# after a break restores A), the leak drains A over a ~20-question session,
# and breaks refill the reservoir.  A_end then spans most of (0, 0.7).
DEPLETING_PARAMS = TwoResourceParams(
    k_w=0.004, k_b=0.05, k_r=0.001, b_max=0.8, rho=0.03
)
# Zero rates freeze every pool at its initial level: outcomes become i.i.d.
FROZEN_PARAMS = TwoResourceParams(
    k_w=0.0, k_b=0.0, k_r=0.0, b_max=0.8, rho=0.03
)


@dataclass(frozen=True)
class SynthConfig:
    """Cohort shape, ground-truth dynamics, and outcome link.

    Durations and gaps are integer seconds drawn from log-normals; gaps stay
    below the 300 s break threshold unless a break fires, in which case the
    gap is at least 300 s.
    """

    n_users: int
    questions_per_user: int
    params: OneResourceParams | TwoResourceParams
    beta0: float = -3.0
    beta1: float = 6.0
    duration_mu: float = 3.5
    duration_sigma: float = 0.8
    gap_mu: float = 2.5
    gap_sigma: float = 1.0
    break_probability: float = 0.05
    break_mu: float = 8.0
    break_sigma: float = 1.0
    question_pool: int = 200
    difficulty_sd: float = 0.0
    track_name: str = "ACT Math"
    user_prefix: str = "synth"
    start_time: int = 1_600_000_000
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1 or self.questions_per_user < 1:
            raise ValueError("cohort must have at least one user and question")
        if not 0.0 <= self.break_probability <= 1.0:
            raise ValueError("break_probability must be in [0,1]")
        if self.question_pool < 1:
            raise ValueError("question_pool must be >= 1")
        for name in ("beta0", "beta1", "duration_mu", "duration_sigma",
                     "gap_mu", "gap_sigma", "break_mu", "break_sigma",
                     "difficulty_sd"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True, slots=True)
class TruthRow:
    user_id: str
    attempt_index: int
    a_end: float
    p_correct: float


@dataclass(frozen=True)
class SynthCohort:
    """Ingest-format records plus the hidden per-attempt ground truth.

    ``truth`` is aligned 1:1 with ``records``; it is written only to the
    sidecar file, never to the ingest-format output.
    """

    config: SynthConfig
    records: tuple[RawRecord, ...]
    truth: tuple[TruthRow, ...] = field(repr=False)


def _draw_seconds(rng: np.random.Generator, mu: float, sigma: float,
                  lo: int, hi: int | None, size: int) -> np.ndarray:
    vals = np.rint(rng.lognormal(mu, sigma, size=size)).astype(np.int64)
    vals = np.maximum(vals, lo)
    if hi is not None:
        vals = np.minimum(vals, hi)
    return vals


def generate_cohort(config: SynthConfig) -> SynthCohort:
    """Simulate every user forward and draw outcomes from the hidden link.

    Per-user random streams are spawned from the master seed by index, so
    output is independent of evaluation order.
    """
    cfg = config
    pool_ss, *user_ss = np.random.SeedSequence(cfg.seed).spawn(cfg.n_users + 1)
    pool_rng = np.random.default_rng(pool_ss)
    offsets = (
        pool_rng.normal(0.0, cfg.difficulty_sd, size=cfg.question_pool)
        if cfg.difficulty_sd > 0
        else np.zeros(cfg.question_pool)
    )
    width = max(5, len(str(cfg.n_users - 1)))
    qwidth = max(5, len(str(cfg.question_pool - 1)))

    one = isinstance(cfg.params, OneResourceParams)
    records: list[RawRecord] = []
    truth: list[TruthRow] = []
    for u in range(cfg.n_users):
        rng = np.random.default_rng(user_ss[u])
        user_id = f"{cfg.user_prefix}{u:0{width}d}"
        nq = cfg.questions_per_user
        q_idx = rng.integers(0, cfg.question_pool, size=nq)
        dur = _draw_seconds(rng, cfg.duration_mu, cfg.duration_sigma, 1, None, nq)
        is_break = rng.random(nq) < cfg.break_probability
        short = _draw_seconds(rng, cfg.gap_mu, cfg.gap_sigma, 1, 299, nq)
        brk = _draw_seconds(rng, cfg.break_mu, cfg.break_sigma, 300, None, nq)
        gap = np.where(is_break, brk, short)

        work = np.ones(nq, dtype=np.bool_)
        fdur = dur.astype(np.float64)
        fgap = gap.astype(np.float64)
        p = cfg.params
        if one:
            _, a_end = _traj_one(
                fdur, fgap, work, p.k, p.k_r, p.rho, p.k_m, p.a_max,
                p.a_max, 1,
            )
        else:
            _, a_end, _, _ = _traj_two(
                fdur, fgap, work, p.k_w, p.k_b, p.k_r, p.b_max, p.rho,
                p.k_a, p.k_b_sat, 0.0, p.b_max, 1,
            )

        p_correct = expit(cfg.beta0 + cfg.beta1 * a_end + offsets[q_idx])
        correct = rng.random(nq) < p_correct

        t = cfg.start_time
        for j in range(nq):
            records.append(
                RawRecord(
                    user_id=user_id,
                    question_id=f"q{q_idx[j]:0{qwidth}d}",
                    track_name=cfg.track_name,
                    round_started_at=int(t),
                    deactivated_at=int(t + dur[j]),
                    outcome=Outcome.CORRECT if correct[j] else Outcome.INCORRECT,
                )
            )
            truth.append(
                TruthRow(
                    user_id=user_id,
                    attempt_index=j,
                    a_end=float(a_end[j]),
                    p_correct=float(p_correct[j]),
                )
            )
            t += int(dur[j]) + int(gap[j])

    return SynthCohort(config=cfg, records=tuple(records), truth=tuple(truth))


def oracle_mi(cohort: SynthCohort, n_bins: int = 64) -> float:
    """Plug-in MI (bits) between outcome and true A_end by quantile binning.

    The binning is the brute-force reference the NN estimator is checked
    against; a constant A_end collapses to one bin and zero information.
    """
    if n_bins < 2:
        raise ValueError("need at least 2 bins")
    a = np.array([t.a_end for t in cohort.truth])
    o = np.array(
        [1 if r.outcome is Outcome.CORRECT else 0 for r in cohort.records],
        dtype=np.int64,
    )
    edges = np.unique(np.quantile(a, np.linspace(0.0, 1.0, n_bins + 1)))
    if edges.size < 3:
        return 0.0
    bins = np.clip(np.searchsorted(edges, a, side="right") - 1, 0, edges.size - 2)
    n = a.size
    nb = edges.size - 1
    joint = np.zeros((nb, 2))
    np.add.at(joint, (bins, o), 1.0)
    joint /= n
    pb = joint.sum(axis=1)
    po = joint.sum(axis=0)
    mask = joint > 0
    outer = pb[:, None] * po[None, :]
    return float(np.sum(joint[mask] * np.log2(joint[mask] / outer[mask])))


TRUTH_COLUMNS = ("user_id", "attempt_index", "a_end", "p_correct")


def write_cohort(cohort: SynthCohort, records_path, truth_path) -> None:
    """Write the ingest-format CSV and the hidden-truth sidecar CSV."""
    with open(records_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["user_id", "question_id", "track_name", "round_started_at",
             "deactivated_at", "outcome"]
        )
        for r in cohort.records:
            writer.writerow(
                [r.user_id, r.question_id, r.track_name, r.round_started_at,
                 r.deactivated_at, r.outcome.value]
            )
    with open(truth_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRUTH_COLUMNS)
        for t in cohort.truth:
            writer.writerow(
                [t.user_id, t.attempt_index, f"{t.a_end:.10g}",
                 f"{t.p_correct:.10g}"]
            )


def read_truth(path) -> list[TruthRow]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                TruthRow(
                    user_id=row["user_id"],
                    attempt_index=int(row["attempt_index"]),
                    a_end=float(row["a_end"]),
                    p_correct=float(row["p_correct"]),
                )
            )
    return out
