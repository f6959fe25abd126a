"""Train/test splitting, MI-maximizing parameter fits, and evaluation reports.

The objective is the mutual information between question outcomes and the
model's resource levels at the start and end of each attempt, pooled over
the training users.  A derivative-free bound-constrained optimizer (COBYLA)
searches the free parameters; everything downstream of a parameter vector
is deterministic for a fixed seed, so the fit is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import Bounds, minimize

from . import infotheory
from .infotheory import MIEstimate
from .ingest import Outcome, Timeline, Track
from .kinetics import (
    FITTED_ONE,
    FITTED_TWO,
    ModelKind,
    OneResourceParams,
    ResourceTrajectory,
    TRACK_CODES,
    TwoResourceParams,
    _traj_one,
    _traj_two,
    timeline_arrays,
    trajectory,
)
from .metrics import ExpectedAccuracyTable, learning_outcomes
from .profiles import MODELED_TRACKS, UserProfile, f0

__all__ = [
    "SplitSpec",
    "SplitError",
    "FitConfig",
    "FitResult",
    "EvalRow",
    "CmiRow",
    "split_train_test",
    "split_hash",
    "objective_value",
    "fit",
    "compute_trajectories",
    "evaluate",
    "cmi_report",
    "write_fit_result",
    "read_fit_result",
    "write_eval_report",
    "write_cmi_report",
    "FREE_PARAMS",
]


class SplitError(RuntimeError):
    """The corpus cannot support the requested train/test split."""


@dataclass(frozen=True, slots=True)
class SplitSpec:
    """Selection rules for training and test users.

    Training attempts are additionally restricted per user to the second
    through the 5000th; the first attempt of each user never trains.
"""

    min_train_attempts: int = 500
    max_train_users: int = 250
    train_skip: int = 1
    train_cap: int = 5000
    min_test_attempts: int = 25
    min_test_accuracy: float = 0.2
    min_train_users: int = 10


def _accuracy(tl: Timeline) -> float:
    if not tl.attempts:
        return 0.0
    return sum(1 for a in tl.attempts if a.correct) / len(tl.attempts)


def split_train_test(
    timelines: Iterable[Timeline], spec: SplitSpec = SplitSpec()
) -> tuple[list[Timeline], list[Timeline]]:
    """Deterministic split: first qualifying users by ascending id train."""
    ordered = sorted(timelines, key=lambda tl: tl.user_id)
    train = [tl for tl in ordered if len(tl) >= spec.min_train_attempts]
    train = train[: spec.max_train_users]
    if len(train) < spec.min_train_users:
        raise SplitError(
            f"only {len(train)} users have >={spec.min_train_attempts} attempts; "
            f"need {spec.min_train_users}"
        )
    train_ids = {tl.user_id for tl in train}
    test = [
        tl
        for tl in ordered
        if tl.user_id not in train_ids
        and len(tl) >= spec.min_test_attempts
        and _accuracy(tl) >= spec.min_test_accuracy
    ]
    return train, test


def split_hash(train: Sequence[Timeline], test: Sequence[Timeline]) -> str:
    digest = hashlib.sha256()
    for tl in sorted(train, key=lambda t: t.user_id):
        digest.update(tl.user_id.encode())
        digest.update(b"\x00")
    digest.update(b"\x01")
    for tl in sorted(test, key=lambda t: t.user_id):
        digest.update(tl.user_id.encode())
        digest.update(b"\x00")
    return digest.hexdigest()


FREE_PARAMS: Mapping[ModelKind, tuple[str, ...]] = {
    ModelKind.ONE_RESOURCE: ("k", "k_r", "rho", "k_m"),
    ModelKind.TWO_RESOURCE: ("k_w", "k_b", "k_r", "b_max", "rho"),
}


@dataclass(frozen=True, slots=True)
class FitConfig:
    kind: ModelKind
    lower: float = 0.0001
    upper: float = 2.0
    max_evals: int = 500
    tol: float = 1e-4
    rhobeg: float = 0.1
    seed: int = 0
    n_shuffles: int = infotheory.DEFAULT_SHUFFLES
    k_neighbors: int = infotheory.DEFAULT_K
    alpha: float = infotheory.DEFAULT_ALPHA
    workers: int = -1
    a_max: float = 1.0
    k_a: float = 0.858
    k_b_sat: float = 0.1

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("lower bound must be below upper bound")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")

    def start_vector(self) -> np.ndarray:
        start = FITTED_ONE if self.kind is ModelKind.ONE_RESOURCE else FITTED_TWO
        return np.array(
            [getattr(start, name) for name in FREE_PARAMS[self.kind]], dtype=float
        )

    def params_from_vector(self, vec: np.ndarray):
        vals = dict(zip(FREE_PARAMS[self.kind], np.asarray(vec, dtype=float)))
        if self.kind is ModelKind.ONE_RESOURCE:
            return OneResourceParams(a_max=self.a_max, **vals)
        return TwoResourceParams(k_a=self.k_a, k_b_sat=self.k_b_sat, **vals)


@dataclass(frozen=True)
class FitResult:
    config: FitConfig
    params: OneResourceParams | TwoResourceParams
    train_mi: float
    trace: tuple[tuple[int, float], ...]
    n_evals: int
    budget_exhausted: bool
    split_digest: str = ""


# ---------------------------------------------------------------------------
# Objective machinery.  Everything that does not depend on the parameter
# vector is flattened into arrays once per fit.


@dataclass
class _UserArrays:
    dur: np.ndarray
    gap: np.ndarray
    code: np.ndarray
    outcome: np.ndarray
    tracks: list[tuple[int, float, float, np.ndarray]] = field(default_factory=list)
    # tracks holds (track code, t_r, t_l, row mask of pooled attempts)


def _prepare_users(
    timelines: Sequence[Timeline],
    profs: Mapping[str, UserProfile],
    skip: int,
    cap: int,
) -> list[_UserArrays]:
    prepared = []
    for tl in sorted(timelines, key=lambda t: t.user_id):
        prof = profs.get(tl.user_id)
        if prof is None:
            continue
        dur, gap, code = timeline_arrays(tl)
        n = len(tl.attempts)
        outcome = np.array(
            [1.0 if a.correct else 0.0 for a in tl.attempts], dtype=np.float64
        )
        in_window = np.zeros(n, dtype=bool)
        in_window[skip:cap] = True
        ua = _UserArrays(dur=dur, gap=gap, code=code, outcome=outcome)
        for track in MODELED_TRACKS:
            tp = prof.get(track)
            if tp is None:
                continue
            mask = in_window & (code == TRACK_CODES[track])
            if not mask.any():
                continue
            ua.tracks.append((TRACK_CODES[track], tp.t_r, tp.t_l, mask))
        if ua.tracks:
            prepared.append(ua)
    return prepared


def _pool_resources(
    prepared: Sequence[_UserArrays], params, cfg: FitConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Run the kernels and stack (outcome, resource columns) over all users."""
    one = cfg.kind is ModelKind.ONE_RESOURCE
    outcomes = []
    blocks = []
    for ua in prepared:
        for code, t_r, t_l, mask in ua.tracks:
            work = ua.code == code
            if one:
                k = params.k / t_r
                k_r = params.k_r / t_r
                a_s, a_e = _traj_one(
                    ua.dur, ua.gap, work, k, k_r, params.rho, params.k_m,
                    params.a_max, params.a_max, 1,
                )
                block = np.column_stack((a_s[mask], a_e[mask]))
            else:
                k_w = params.k_w / t_r
                k_b = params.k_b / t_r
                k_r = params.k_r / t_r
                b_max = params.b_max * f0(t_l, params.rho) / t_r
                a_s, a_e, b_s, b_e = _traj_two(
                    ua.dur, ua.gap, work, k_w, k_b, k_r, b_max, params.rho,
                    params.k_a, params.k_b_sat, 0.0, b_max, 1,
                )
                block = np.column_stack(
                    (a_s[mask], a_e[mask], b_s[mask], b_e[mask])
                )
            blocks.append(block)
            outcomes.append(ua.outcome[mask])
    if not blocks:
        raise SplitError("no pooled attempts: no training user has a usable profile")
    return np.concatenate(outcomes), np.vstack(blocks)


def objective_value(
    params,
    train: Sequence[Timeline],
    profs: Mapping[str, UserProfile],
    cfg: FitConfig,
    spec: SplitSpec = SplitSpec(),
) -> float:
    """MI in bits between outcomes and resource levels over the training pool."""
    prepared = _prepare_users(train, profs, spec.train_skip, spec.train_cap)
    return _objective_from_prepared(prepared, params, cfg)


def _objective_from_prepared(prepared, params, cfg: FitConfig) -> float:
    outcome, resources = _pool_resources(prepared, params, cfg)
    if not np.all(np.isfinite(resources)):
        return -10.0  # integration blew up; heavily penalized
    est = infotheory.mutual_information(
        outcome,
        resources,
        n_shuffles=cfg.n_shuffles,
        seed=cfg.seed,
        alpha=cfg.alpha,
        k_neighbors=cfg.k_neighbors,
        workers=cfg.workers,
    )
    return est.value


def fit(
    cfg: FitConfig,
    train: Sequence[Timeline],
    profs: Mapping[str, UserProfile],
    spec: SplitSpec = SplitSpec(),
    split_digest: str = "",
) -> FitResult:
    """Maximize the training MI over the free parameters within bounds.

    Starts from the published fitted values.  The best evaluated point is
    returned even if the optimizer's own final iterate differs.
    """
    prepared = _prepare_users(train, profs, spec.train_skip, spec.train_cap)
    if not prepared:
        raise SplitError("no training users with profiles")

    names = FREE_PARAMS[cfg.kind]
    x0 = np.clip(cfg.start_vector(), cfg.lower, cfg.upper)
    n_evals = 0
    best_mi = -math.inf
    best_x = x0.copy()
    trace: list[tuple[int, float]] = []

    def negative_mi(x: np.ndarray) -> float:
        nonlocal n_evals, best_mi, best_x
        if n_evals >= cfg.max_evals:
            # starve the optimizer once the budget is spent
            return 10.0
        n_evals += 1
        x = np.clip(x, cfg.lower, cfg.upper)
        mi = _objective_from_prepared(prepared, cfg.params_from_vector(x), cfg)
        if mi > best_mi:
            best_mi = mi
            best_x = x.copy()
            trace.append((n_evals, mi))
        return -mi

    minimize(
        negative_mi,
        x0,
        method="COBYLA",
        bounds=Bounds(np.full(len(names), cfg.lower), np.full(len(names), cfg.upper)),
        tol=cfg.tol,
        options={"maxiter": cfg.max_evals, "rhobeg": cfg.rhobeg},
    )

    return FitResult(
        config=cfg,
        params=cfg.params_from_vector(best_x),
        train_mi=best_mi,
        trace=tuple(trace),
        n_evals=n_evals,
        budget_exhausted=n_evals >= cfg.max_evals,
        split_digest=split_digest,
    )


# ---------------------------------------------------------------------------
# Test-set evaluation.


def _scaled_by_track(params, prof: UserProfile):
    from .profiles import scale_params

    return {
        track: scale_params(params, prof, track)
        for track in MODELED_TRACKS
        if prof.get(track) is not None
    }


def compute_trajectories(
    timelines: Sequence[Timeline],
    params,
    profs: Mapping[str, UserProfile],
) -> dict[str, ResourceTrajectory]:
    """Per-user trajectories under user-scaled parameters; skips unprofiled."""
    out: dict[str, ResourceTrajectory] = {}
    for tl in sorted(timelines, key=lambda t: t.user_id):
        prof = profs.get(tl.user_id)
        if prof is None:
            continue
        scaled = _scaled_by_track(params, prof)
        if not scaled:
            continue
        out[tl.user_id] = trajectory(tl, scaled)
    return out


@dataclass(frozen=True)
class _TestPool:
    """Column-aligned test-set arrays; rows are modeled attempts only."""

    outcome: np.ndarray
    r: np.ndarray
    r_begin: np.ndarray
    duration: np.ndarray
    gap_after: np.ndarray  # NaN when the attempt is the user's last
    u5: np.ndarray  # NaN without five same-track predecessors
    p_user: np.ndarray  # (t_l, t_r) of the attempt's track profile
    difficulty: np.ndarray
    learned: np.ndarray
    l_r: np.ndarray
    l_duration: np.ndarray
    l_gap: np.ndarray


def _u5_series(tl: Timeline) -> np.ndarray:
    """Fraction correct of the previous five same-track attempts, else NaN."""
    n = len(tl.attempts)
    out = np.full(n, np.nan)
    history: dict[Track, list[int]] = {}
    for i, att in enumerate(tl.attempts):
        past = history.setdefault(att.track, [])
        if len(past) >= 5:
            out[i] = sum(past[-5:]) / 5.0
        past.append(1 if att.correct else 0)
    return out


def _assemble_pool(
    timelines: Sequence[Timeline],
    trajectories: Mapping[str, ResourceTrajectory],
    profs: Mapping[str, UserProfile],
    table: ExpectedAccuracyTable,
) -> _TestPool:
    outcome, duration, gap_after, u5, difficulty = [], [], [], [], []
    p_user = []
    r_rows, rb_rows = [], []
    learned, l_dur, l_gap = [], [], []
    lr_rows = []
    for tl in sorted(timelines, key=lambda t: t.user_id):
        tr = trajectories.get(tl.user_id)
        prof = profs.get(tl.user_id)
        if tr is None or prof is None:
            continue
        two = tr.b_start is not None
        u5_vals = _u5_series(tl)
        usable = np.isfinite(tr.a_start) & np.isfinite(tr.a_end)

        def resource_row(i: int) -> list[float]:
            if two:
                return [tr.a_start[i], tr.a_end[i], tr.b_start[i], tr.b_end[i]]
            return [tr.a_start[i], tr.a_end[i]]

        for i, att in enumerate(tl.attempts):
            if not usable[i]:
                continue
            tp = prof.get(att.track)
            if tp is None:
                continue
            outcome.append(1.0 if att.correct else 0.0)
            r_rows.append(resource_row(i))
            rb_rows.append(
                [tr.a_start[i], tr.b_start[i]] if two else [tr.a_start[i]]
            )
            duration.append(float(att.duration))
            gap_after.append(
                float(att.gap_after) if att.gap_after is not None else np.nan
            )
            u5.append(u5_vals[i])
            p_user.append([tp.t_l, tp.t_r])
            d = table.question_difficulty(att.question_id)
            difficulty.append(d if d is not None else table.global_accuracy)
        for s in learning_outcomes(tl):
            i = s.first_index
            if not usable[i] or prof.get(tl.attempts[i].track) is None:
                continue
            learned.append(float(s.learned))
            lr_rows.append(resource_row(i))
            l_dur.append(float(tl.attempts[i].duration))
            g = tl.attempts[i].gap_after
            l_gap.append(float(g) if g is not None else np.nan)
    if not outcome:
        raise SplitError("empty evaluation pool: no modeled test attempts")
    return _TestPool(
        outcome=np.asarray(outcome),
        r=np.asarray(r_rows),
        r_begin=np.asarray(rb_rows),
        duration=np.asarray(duration),
        gap_after=np.asarray(gap_after),
        u5=np.asarray(u5),
        p_user=np.asarray(p_user),
        difficulty=np.asarray(difficulty),
        learned=np.asarray(learned),
        l_r=np.asarray(lr_rows) if lr_rows else np.empty((0, 2)),
        l_duration=np.asarray(l_dur),
        l_gap=np.asarray(l_gap),
    )


@dataclass(frozen=True)
class EvalRow:
    name: str
    target: str
    features: str
    n: int
    mi: MIEstimate
    control: MIEstimate
    entropy_bits: float
    pct_of_entropy: float


@dataclass(frozen=True)
class CmiRow:
    name: str
    target: str
    condition: str
    n: int
    value: MIEstimate


def _mi_row(
    name: str,
    target_label: str,
    feature_label: str,
    target: np.ndarray,
    features: np.ndarray,
    cfg: FitConfig,
    binary_target: bool,
    control_key: int,
) -> EvalRow:
    est = infotheory.mutual_information(
        target, features, n_shuffles=cfg.n_shuffles, seed=cfg.seed,
        alpha=cfg.alpha, k_neighbors=cfg.k_neighbors, workers=cfg.workers,
    )
    perm = np.random.default_rng([cfg.seed, control_key]).permutation(target.size)
    control = infotheory.mutual_information(
        target[perm], features, n_shuffles=cfg.n_shuffles, seed=cfg.seed,
        alpha=cfg.alpha, k_neighbors=cfg.k_neighbors, workers=cfg.workers,
    )
    if binary_target:
        denom = infotheory.binary_entropy(float(np.mean(target)))
    else:
        # self-MI through the same estimator; for effectively discrete
        # times this approaches the plug-in entropy of the values
        denom = infotheory.mutual_information(
            target, target, n_shuffles=cfg.n_shuffles, seed=cfg.seed,
            alpha=cfg.alpha, k_neighbors=cfg.k_neighbors, workers=cfg.workers,
        ).value
    pct = 100.0 * est.value / denom if denom > 0 else math.nan
    return EvalRow(
        name=name,
        target=target_label,
        features=feature_label,
        n=int(target.size),
        mi=est,
        control=control,
        entropy_bits=float(denom),
        pct_of_entropy=float(pct),
    )


def evaluate(
    params,
    test: Sequence[Timeline],
    profs: Mapping[str, UserProfile],
    table: ExpectedAccuracyTable,
    cfg: FitConfig,
    trajectories: Mapping[str, ResourceTrajectory] | None = None,
) -> list[EvalRow]:
    """The four headline rows: outcomes, learning, time on question, gap.

    Each row carries a shuffled-target control and the share of the target's
    marginal entropy the MI accounts for.
    """
    if trajectories is None:
        trajectories = compute_trajectories(test, params, profs)
    pool = _assemble_pool(test, trajectories, profs, table)
    rows = [
        _mi_row(
            "outcome_vs_resources", "correct", "R", pool.outcome, pool.r,
            cfg, binary_target=True, control_key=1,
        )
    ]
    if pool.learned.size >= infotheory.SANITY_FLOOR * (1 + pool.r.shape[1]):
        rows.append(
            _mi_row(
                "learning_vs_resources", "learned", "R", pool.learned,
                pool.l_r, cfg, binary_target=True, control_key=2,
            )
        )
    rows.append(
        _mi_row(
            "time_vs_initial_resources", "duration", "R_begin", pool.duration,
            pool.r_begin, cfg, binary_target=False, control_key=3,
        )
    )
    has_gap = np.isfinite(pool.gap_after)
    rows.append(
        _mi_row(
            "next_gap_vs_resources", "gap_after", "R", pool.gap_after[has_gap],
            pool.r[has_gap], cfg, binary_target=False, control_key=4,
        )
    )
    return rows


def _cmi_row(
    name: str,
    target_label: str,
    condition_label: str,
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    cfg: FitConfig,
) -> CmiRow:
    est = infotheory.conditional_mi(
        x, y, z, n_shuffles=cfg.n_shuffles, seed=cfg.seed,
        alpha=cfg.alpha, k_neighbors=cfg.k_neighbors, workers=cfg.workers,
    )
    return CmiRow(
        name=name,
        target=target_label,
        condition=condition_label,
        n=int(np.asarray(x).shape[0]),
        value=est,
    )


def cmi_report(
    params,
    test: Sequence[Timeline],
    profs: Mapping[str, UserProfile],
    table: ExpectedAccuracyTable,
    cfg: FitConfig,
    trajectories: Mapping[str, ResourceTrajectory] | None = None,
) -> list[CmiRow]:
    """Alternative-hypothesis screens: resource MI conditioned on confounds."""
    if trajectories is None:
        trajectories = compute_trajectories(test, params, profs)
    pool = _assemble_pool(test, trajectories, profs, table)
    rows: list[CmiRow] = []

    has_lgap = np.isfinite(pool.l_gap)
    if has_lgap.sum() >= 10 * (2 + pool.r.shape[1]):
        rows.append(
            _cmi_row(
                "learning_given_next_gap", "learned", "gap_after",
                pool.learned[has_lgap], pool.l_r[has_lgap],
                pool.l_gap[has_lgap], cfg,
            )
        )
        rows.append(
            _cmi_row(
                "learning_given_time", "learned", "duration",
                pool.learned, pool.l_r, pool.l_duration, cfg,
            )
        )
    has_u5 = np.isfinite(pool.u5)
    if has_u5.sum() >= 10 * (2 + pool.r.shape[1]):
        rows.append(
            _cmi_row(
                "outcome_given_recent_accuracy", "correct", "u5",
                pool.outcome[has_u5], pool.r[has_u5], pool.u5[has_u5], cfg,
            )
        )
    rows.append(
        _cmi_row(
            "outcome_given_user_scale", "correct", "t_l,t_r",
            pool.outcome, pool.r, pool.p_user, cfg,
        )
    )
    rows.append(
        _cmi_row(
            "outcome_given_time", "correct", "duration",
            pool.outcome, pool.r, pool.duration, cfg,
        )
    )
    rows.append(
        _cmi_row(
            "outcome_given_difficulty", "correct", "difficulty",
            pool.outcome, pool.r, pool.difficulty, cfg,
        )
    )
    has_both = has_u5 & np.isfinite(pool.gap_after)
    if has_both.sum() >= 10 * (2 + pool.r.shape[1]):
        rows.append(
            _cmi_row(
                "next_gap_given_recent_accuracy", "gap_after", "u5",
                pool.gap_after[has_both], pool.r[has_both],
                pool.u5[has_both], cfg,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Serialization: key=value text for the fit, CSV for the reports.


def write_fit_result(result: FitResult, path) -> None:
    lines = {
        "model": result.config.kind.value,
        "train_mi_bits": f"{result.train_mi:.10g}",
        "n_evals": str(result.n_evals),
        "budget_exhausted": str(int(result.budget_exhausted)),
        "seed": str(result.config.seed),
        "max_evals": str(result.config.max_evals),
        "tol": f"{result.config.tol:.10g}",
        "bound_lower": f"{result.config.lower:.10g}",
        "bound_upper": f"{result.config.upper:.10g}",
        "split_hash": result.split_digest,
    }
    for name in FREE_PARAMS[result.config.kind]:
        lines[f"param_{name}"] = f"{getattr(result.params, name):.10g}"
    if result.config.kind is ModelKind.ONE_RESOURCE:
        lines["param_a_max"] = f"{result.params.a_max:.10g}"
    else:
        lines["param_k_a"] = f"{result.params.k_a:.10g}"
        lines["param_k_b_sat"] = f"{result.params.k_b_sat:.10g}"
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(lines):
            fh.write(f"{key}={lines[key]}\n")


def read_fit_result(path):
    """Parse a fit file back into (params, metadata dict)."""
    meta: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    kind = ModelKind(meta["model"])
    fields = {
        name: float(meta[f"param_{name}"]) for name in FREE_PARAMS[kind]
    }
    if kind is ModelKind.ONE_RESOURCE:
        params = OneResourceParams(a_max=float(meta.get("param_a_max", 1.0)), **fields)
    else:
        params = TwoResourceParams(
            k_a=float(meta.get("param_k_a", 0.858)),
            k_b_sat=float(meta.get("param_k_b_sat", 0.1)),
            **fields,
        )
    return params, meta


def write_eval_report(rows: Sequence[EvalRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["row", "target", "features", "n", "mi_bits", "dispersion",
             "control_bits", "control_dispersion", "entropy_bits",
             "pct_of_entropy"]
        )
        for r in rows:
            writer.writerow(
                [r.name, r.target, r.features, r.n,
                 f"{r.mi.value:.10g}", f"{r.mi.dispersion:.10g}",
                 f"{r.control.value:.10g}", f"{r.control.dispersion:.10g}",
                 f"{r.entropy_bits:.10g}", f"{r.pct_of_entropy:.10g}"]
            )


def write_cmi_report(rows: Sequence[CmiRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["row", "target", "condition", "n", "cmi_bits", "dispersion"]
        )
        for r in rows:
            writer.writerow(
                [r.name, r.target, r.condition, r.n,
                 f"{r.value.value:.10g}", f"{r.value.dispersion:.10g}"]
            )
