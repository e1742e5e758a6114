"""Two-phase rating-study protocol with event-sourced persistence.

A study fixes a case list, a rater roster with group tags, a label
space, and per-(rater, phase) randomized case orderings.  Raters work
through phase T0 and then T1 (served in a different order); the trainer
records reference labels in the TRAINER pseudo-phase.  All mutations
append to a per-study JSON-lines event log whose records are exactly
the agreement module's rating format, so replaying the log rebuilds the
study state and feeds the report builder directly.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import agreement
from .agreement import RatingRecord
from .errors import (
    ConflictingRating,
    DuplicateStudyId,
    EmptyCaseList,
    EmptyInput,
    IncompleteStudy,
    LabelSpaceMismatch,
    OutOfOrderRating,
    PhaseNotOpen,
    StudyError,
)
from .geometry import SectorLabel, Space, label_from_string

RATER_PHASES = ("T0", "T1")
STATES = ("NOT_STARTED", "IN_PROGRESS", "COMPLETE")

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _ordering_seed(seed: int, rater: str, phase: str, attempt: int) -> int:
    """Deterministic per-(rater, phase) shuffle seed, redrawable on collision."""
    text = f"{seed}:{rater}:{phase}:{attempt}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def _permutation(cases: list[str], seed: int) -> list[str]:
    order = np.random.default_rng(seed).permutation(len(cases))
    return [cases[i] for i in order]


@dataclass
class Study:
    """In-memory study state: manifest fields plus the replayed ratings."""

    study_id: str
    space: Space
    cases: list[str]
    raters: dict[str, str]  # rater id -> group tag
    trainer: str
    seed: int
    created_at: str
    orderings: dict[str, dict[str, list[str]]]  # rater -> phase -> case ids
    assets: dict[str, str] = field(default_factory=dict)  # case id -> asset ref
    ratings: dict[tuple[str, str, str], RatingRecord] = field(default_factory=dict)
    directory: Path | None = None

    def asset_ref(self, case: str) -> str:
        return self.assets.get(case, case)

    def manifest_dict(self) -> dict:
        return {
            "id": self.study_id,
            "space": self.space.value,
            "cases": self.cases,
            "raters": self.raters,
            "trainer": self.trainer,
            "seed": self.seed,
            "created_at": self.created_at,
            "orderings": self.orderings,
            "assets": self.assets,
        }

    def events_path(self) -> Path | None:
        if self.directory is None:
            return None
        return self.directory / "events.jsonl"


def create_study(
    cases,
    raters,
    space: Space,
    seed: int,
    study_id: str,
    root=None,
    trainer_id: str = "trainer",
    trainer_labels: dict | None = None,
    assets: dict[str, str] | None = None,
    created_at: str | None = None,
) -> Study:
    """Create (and optionally persist) a study with seeded orderings.

    Each rater gets one permutation per phase, derived from
    (seed, rater, phase); the T1 draw is repeated with a bumped attempt
    counter until it differs from T0, so distinct orderings are
    guaranteed whenever the case list has at least two items.
    `trainer_labels` (case id -> label) records the full TRAINER phase
    at creation.
    """
    if not _ID_RE.match(study_id or ""):
        raise StudyError(f"study id {study_id!r} must be alphanumeric with ._-")
    cases = [str(c) for c in cases]
    if not cases:
        raise EmptyCaseList("a study needs at least one case")
    if len(set(cases)) != len(cases):
        raise StudyError("case ids must be unique")

    if isinstance(raters, dict):
        roster = {str(r): str(g) for r, g in raters.items()}
    else:
        roster = {}
        for item in raters:
            if isinstance(item, str):
                roster[item] = "all"
            else:
                rid, group = item
                roster[str(rid)] = str(group)
    if not roster:
        raise StudyError("a study needs at least one rater")
    if trainer_id in roster:
        raise StudyError(f"trainer id {trainer_id!r} clashes with a roster rater")

    space = Space(space)
    orderings: dict[str, dict[str, list[str]]] = {}
    for rater in sorted(roster):
        t0 = _permutation(cases, _ordering_seed(seed, rater, "T0", 0))
        attempt = 0
        t1 = _permutation(cases, _ordering_seed(seed, rater, "T1", attempt))
        while len(cases) > 1 and t1 == t0:
            attempt += 1
            t1 = _permutation(cases, _ordering_seed(seed, rater, "T1", attempt))
        orderings[rater] = {"T0": t0, "T1": t1}

    assets = {str(c): str(a) for c, a in (assets or {}).items()}
    unknown = set(assets) - set(cases)
    if unknown:
        raise StudyError(f"asset refs for unknown cases: {sorted(unknown)[:3]}")
    if trainer_labels is not None:
        missing = [c for c in cases if c not in trainer_labels]
        if missing:
            raise IncompleteStudy(
                f"trainer_labels misses {len(missing)} case(s), e.g. {missing[0]!r}"
            )
    study = Study(
        study_id=study_id,
        space=space,
        cases=cases,
        raters=roster,
        trainer=trainer_id,
        seed=int(seed),
        created_at=created_at or _now(),
        orderings=orderings,
        assets=assets,
    )

    if root is not None:
        directory = Path(root) / study_id
        if directory.exists():
            raise DuplicateStudyId(f"study {study_id!r} already exists at {directory}")
        directory.mkdir(parents=True)
        study.directory = directory
        with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(study.manifest_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        study.events_path().touch()

    if trainer_labels is not None:
        for case in cases:
            record_rating(study, trainer_id, "TRAINER", case, trainer_labels[case])
    return study


def load_study(root, study_id: str) -> Study:
    """Rebuild a study from its manifest and event log."""
    directory = Path(root) / study_id
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise StudyError(f"no study {study_id!r} under {root}")
    with open(manifest_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    study = Study(
        study_id=doc["id"],
        space=Space(doc["space"]),
        cases=list(doc["cases"]),
        raters=dict(doc["raters"]),
        trainer=doc["trainer"],
        seed=int(doc["seed"]),
        created_at=doc["created_at"],
        orderings={r: dict(p) for r, p in doc["orderings"].items()},
        assets=dict(doc.get("assets", {})),
        directory=directory,
    )
    events = study.events_path()
    if events.exists():
        for rec in agreement.load_ratings(events):
            key = (rec.rater_id, rec.phase, rec.case_id)
            prev = study.ratings.get(key)
            if prev is not None and prev.label != rec.label:
                raise ConflictingRating(
                    f"event log contains conflicting labels for {key}"
                )
            study.ratings[key] = rec
    return study


# ---------------------------------------------------------------------------
# state machine
# ---------------------------------------------------------------------------


def rated_count(study: Study, rater: str, phase: str) -> int:
    return sum(1 for c in study.cases if (rater, phase, c) in study.ratings)


def phase_state(study: Study, rater: str, phase: str) -> str:
    """NOT_STARTED / IN_PROGRESS / COMPLETE from the replayed ratings."""
    done = rated_count(study, rater, phase)
    if done == 0:
        return "NOT_STARTED"
    if done == len(study.cases):
        return "COMPLETE"
    return "IN_PROGRESS"


def _check_open(study: Study, rater: str, phase: str) -> None:
    if phase == "TRAINER":
        if rater != study.trainer:
            raise PhaseNotOpen(
                f"TRAINER phase is reserved for {study.trainer!r}, not {rater!r}"
            )
        return
    if rater not in study.raters:
        raise StudyError(f"unknown rater {rater!r}")
    if phase == "T0":
        return
    if phase == "T1":
        if phase_state(study, rater, "T0") != "COMPLETE":
            raise PhaseNotOpen(f"rater {rater!r} must finish T0 before T1 opens")
        return
    raise StudyError(f"unknown phase {phase!r}")


def _ordering_for(study: Study, rater: str, phase: str) -> list[str]:
    if phase == "TRAINER":
        return study.cases
    return study.orderings[rater][phase]


def next_item(study: Study, rater: str, phase: str) -> str | None:
    """First unrated case in the rater's phase ordering; None when done."""
    _check_open(study, rater, phase)
    for case in _ordering_for(study, rater, phase):
        if (rater, phase, case) not in study.ratings:
            return case
    return None


def record_rating(
    study: Study,
    rater: str,
    phase: str,
    case: str,
    label,
    ts: str | None = None,
    elapsed_s: float | None = None,
) -> RatingRecord:
    """Append one rating; idempotent for identical re-submissions.

    The case must be the rater's current item in the phase ordering;
    re-submitting the same (rater, phase, case, label) returns the
    stored record, while a different label for an already-rated case is
    rejected.
    """
    _check_open(study, rater, phase)
    if isinstance(label, SectorLabel):
        parsed = label
    else:
        parsed = label_from_string(str(label))
    if parsed.space is not study.space:
        raise LabelSpaceMismatch(
            f"label {parsed.value!r} lives in {parsed.space.value}, "
            f"study uses {study.space.value}"
        )
    if case not in study.cases:
        raise StudyError(f"unknown case {case!r}")

    key = (rater, phase, case)
    existing = study.ratings.get(key)
    if existing is not None:
        if existing.label == parsed:
            return existing
        raise ConflictingRating(
            f"{key} already rated {existing.label.value!r}, got {parsed.value!r}"
        )

    expected = next_item(study, rater, phase)
    if case != expected:
        raise OutOfOrderRating(f"expected case {expected!r} next, got {case!r}")

    record = RatingRecord(
        study_id=study.study_id,
        rater_id=rater,
        phase=phase,
        case_id=case,
        label=parsed,
        ts=ts or _now(),
    )
    events = study.events_path()
    if events is not None:
        doc = record.to_json_dict()
        if elapsed_s is not None:
            doc["elapsed_s"] = float(elapsed_s)
        with open(events, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
    study.ratings[key] = record
    return record


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------


def study_status(study: Study) -> dict:
    """Phase states, completion flag, and ordering-difference flags."""
    status = {
        "trainer": phase_state(study, study.trainer, "TRAINER"),
        "phases": {
            r: {p: phase_state(study, r, p) for p in RATER_PHASES}
            for r in sorted(study.raters)
        },
        "orderings_differ": {
            r: study.orderings[r]["T0"] != study.orderings[r]["T1"]
            for r in sorted(study.raters)
        },
    }
    if len(study.cases) <= 1:
        status["ordering_note"] = (
            "single-case study: T0 and T1 orderings are unavoidably identical"
        )
    status["complete"] = status["trainer"] == "COMPLETE" and all(
        st == "COMPLETE" for ph in status["phases"].values() for st in ph.values()
    )
    return status


def study_report(
    study: Study,
    strict: bool = False,
    bootstrap_b: int = 1000,
) -> dict:
    """Completion status plus the four agreement table blocks.

    The tables come from agreement.study_tables over the replayed
    event log; while the study is still incomplete they are omitted
    (or, with strict=True, IncompleteStudy propagates).  Bootstrap
    resampling is seeded from the study seed, so reports are
    deterministic.
    """
    status = study_status(study)

    report = {
        "study": study.study_id,
        "space": study.space.value,
        "n_cases": len(study.cases),
        "trainer": study.trainer,
        "raters": dict(sorted(study.raters.items())),
        "status": status,
        "tables": None,
    }
    report["text"] = None
    try:
        report["tables"] = agreement.study_tables(
            study.ratings.values(),
            grouping=study.raters,
            bootstrap_b=bootstrap_b,
            seed=study.seed,
        )
        report["text"] = agreement.render_study_tables(report["tables"])
    except (IncompleteStudy, EmptyInput) as exc:
        if strict:
            raise
        report["incomplete"] = str(exc)
    return report


# ---------------------------------------------------------------------------
# store (per-study serialization for the service layer)
# ---------------------------------------------------------------------------


class StudyStore:
    """Directory-backed study registry with per-study write locks."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._studies: dict[str, Study] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock(self, study_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(study_id, threading.Lock())

    def list_ids(self) -> list[str]:
        on_disk = {
            p.name for p in self.root.iterdir() if (p / "manifest.json").exists()
        }
        return sorted(on_disk | set(self._studies))

    def create(self, *, study_id: str, **kwargs) -> Study:
        with self._lock(study_id):
            if study_id in self._studies:
                raise DuplicateStudyId(f"study {study_id!r} already exists")
            study = create_study(study_id=study_id, root=self.root, **kwargs)
            self._studies[study_id] = study
            return study

    def get(self, study_id: str) -> Study:
        with self._lock(study_id):
            if study_id not in self._studies:
                self._studies[study_id] = load_study(self.root, study_id)
            return self._studies[study_id]

    def next_item(self, study_id: str, rater: str, phase: str):
        with self._lock(study_id):
            study = self._studies.get(study_id) or load_study(self.root, study_id)
            self._studies[study_id] = study
            return next_item(study, rater, phase), study

    def record(self, study_id: str, rater: str, phase: str, case: str, label,
               elapsed_s: float | None = None) -> RatingRecord:
        with self._lock(study_id):
            study = self._studies.get(study_id) or load_study(self.root, study_id)
            self._studies[study_id] = study
            return record_rating(study, rater, phase, case, label, elapsed_s=elapsed_s)

    def report(self, study_id: str, strict: bool = False, bootstrap_b: int = 1000) -> dict:
        with self._lock(study_id):
            study = self._studies.get(study_id) or load_study(self.root, study_id)
            self._studies[study_id] = study
            return study_report(study, strict=strict, bootstrap_b=bootstrap_b)
