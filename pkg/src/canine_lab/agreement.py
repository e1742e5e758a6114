"""Chance-corrected rater-agreement statistics.

Cohen's kappa for two raters, Fleiss' kappa for a fixed panel of raters,
95% confidence intervals (analytic and seeded bootstrap), qualitative
agreement bands, between-group z-tests, and a sample-size formula for
planning a two-rater kappa study.  `study_tables` turns a flat set of
rating records into the four standard report blocks: trainer
calibration, intra-rater reliability, group-pooled intra-rater
agreement, and per-phase Fleiss agreement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import (
    AgreementError,
    ChanceDegenerate,
    EmptyInput,
    IncompleteStudy,
    InvalidParameter,
    UnequalRaterCount,
    ZeroVariance,
)
from .geometry import SPACE_LABELS, SectorLabel, Space, label_from_string

# 95% two-sided normal critical value used for analytic CIs.
Z_CRIT_95 = 1.96

PHASES = ("T0", "T1", "TRAINER")

# Qualitative bands for kappa, lower-edge inclusive except the floor.
AGREEMENT_BANDS = (
    (0.01, "no agreement"),
    (0.20, "slight"),
    (0.40, "fair"),
    (0.60, "moderate"),
    (0.80, "substantial"),
    (1.00, "almost perfect"),
)


def label_agreement(kappa: float) -> str:
    """Map a kappa value to its qualitative agreement band.

    Below 0.01 (including every value <= 0) is "no agreement"; exactly
    1.0 is "perfect"; bands in between are closed on their upper edge.
    """
    if not math.isfinite(kappa):
        raise InvalidParameter(f"kappa must be finite, got {kappa!r}")
    if kappa < 0.01:
        return "no agreement"
    if kappa <= 0.20:
        return "slight"
    if kappa <= 0.40:
        return "fair"
    if kappa <= 0.60:
        return "moderate"
    if kappa <= 0.80:
        return "substantial"
    if kappa < 1.0:
        return "almost perfect"
    return "perfect"


@dataclass(frozen=True)
class KappaResult:
    """Point estimate plus uncertainty for a single kappa statistic."""

    kappa: float
    se: float
    ci_low: float
    ci_high: float
    n_items: int
    agreement_label: str
    method: str  # "cohen" | "fleiss"
    ci_method: str  # "analytic" | "bootstrap"

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_items": self.n_items,
            "agreement_label": self.agreement_label,
            "method": self.method,
            "ci_method": self.ci_method,
        }

    def summary(self) -> str:
        return (
            f"{self.kappa:.3f} [{self.ci_low:.3f}, {self.ci_high:.3f}] "
            f"{self.agreement_label}"
        )


@dataclass(frozen=True)
class KappaComparison:
    """Two-sided z-test between two independent kappa estimates."""

    z: float
    p_value: float
    k1: KappaResult
    k2: KappaResult

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "p_value": self.p_value,
            "k1": self.k1.to_dict(),
            "k2": self.k2.to_dict(),
        }


@dataclass(frozen=True)
class RatingRecord:
    """One label assigned by one rater to one case in one phase."""

    study_id: str
    rater_id: str
    phase: str
    case_id: str
    label: SectorLabel
    ts: str | None = None

    def __post_init__(self):
        if self.phase not in PHASES:
            raise AgreementError(
                f"phase must be one of {PHASES}, got {self.phase!r}"
            )

    def to_json_dict(self) -> dict:
        d = {
            "study": self.study_id,
            "rater": self.rater_id,
            "phase": self.phase,
            "case": self.case_id,
            "label": self.label.value,
        }
        if self.ts is not None:
            d["ts"] = self.ts
        return d


def _clamp(x: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, x))


def _bootstrap_ci(stat, n_items: int, b: int, seed: int):
    """Percentile bootstrap over item indices.

    `stat` maps an index array to a kappa value and may raise
    ChanceDegenerate for unlucky resamples, which are skipped.  Each
    replicate derives its own RNG from (seed, replicate), so results do
    not depend on evaluation order.  Returns (se, ci_low, ci_high).
    """
    if b < 2:
        raise InvalidParameter(f"bootstrap_b must be >= 2, got {b}")
    if seed < 0:
        raise InvalidParameter(f"seed must be non-negative, got {seed}")
    reps = np.full(b, np.nan)
    for i in range(b):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        idx = rng.integers(0, n_items, size=n_items)
        try:
            reps[i] = stat(idx)
        except ChanceDegenerate:
            continue
    good = reps[np.isfinite(reps)]
    if good.size < 2:
        raise ChanceDegenerate(
            "bootstrap failed: nearly all replicates were chance-degenerate"
        )
    se = float(np.std(good, ddof=1))
    lo, hi = np.percentile(good, [2.5, 97.5])
    return se, float(lo), float(hi)


def pair_count_matrix(pairs, k: int | None = None) -> np.ndarray:
    """Tally (rater A, rater B) label pairs into a k x k count matrix."""
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        raise EmptyInput("no rating pairs supplied")
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidParameter(f"expected an (n, 2) pair array, got {arr.shape}")
    if arr.min() < 0:
        raise InvalidParameter("labels must be non-negative integers")
    if k is None:
        k = int(arr.max()) + 1
    elif arr.max() >= k:
        raise InvalidParameter(f"label {int(arr.max())} out of range for k={k}")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (arr[:, 0], arr[:, 1]), 1)
    return counts


def _cohen_point(counts: np.ndarray) -> tuple[float, float, float]:
    """(kappa, p_o, p_e) from an integer pair-count matrix.

    p_o and p_e are each produced by a single float division of exact
    integer tallies, so hand-computable fixtures come out bit-exact.
    """
    n = int(counts.sum())
    match = int(np.trace(counts))
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    pe_num = int(rows @ cols)
    if pe_num == n * n:
        raise ChanceDegenerate(
            "both raters constant on the same category; kappa undefined"
        )
    p_o = match / n
    p_e = pe_num / (n * n)
    return (p_o - p_e) / (1.0 - p_e), p_o, p_e


def cohen_kappa_from_counts(
    counts,
    ci: str = "analytic",
    bootstrap_b: int = 1000,
    seed: int = 0,
) -> KappaResult:
    """Cohen's kappa from a pre-tallied k x k pair-count matrix."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
        raise InvalidParameter(f"counts must be square, got {counts.shape}")
    if counts.min() < 0:
        raise InvalidParameter("counts must be non-negative")
    n = int(counts.sum())
    if n < 1:
        raise EmptyInput("need at least 1 rated item")
    kappa, p_o, p_e = _cohen_point(counts)
    if ci == "analytic":
        se = math.sqrt(p_o * (1.0 - p_o) / (n * (1.0 - p_e) ** 2))
        lo = _clamp(kappa - Z_CRIT_95 * se, -1.0, 1.0)
        hi = _clamp(kappa + Z_CRIT_95 * se, -1.0, 1.0)
    elif ci == "bootstrap":
        # Expand the matrix back to item pairs and resample items.
        ai, bi = np.nonzero(counts)
        reps = counts[ai, bi]
        pairs = np.column_stack([np.repeat(ai, reps), np.repeat(bi, reps)])

        def stat(idx):
            return _cohen_point(pair_count_matrix(pairs[idx], counts.shape[0]))[0]

        se, lo, hi = _bootstrap_ci(stat, n, bootstrap_b, seed)
    else:
        raise InvalidParameter(f"unknown ci method {ci!r}")
    return KappaResult(
        kappa=kappa,
        se=se,
        ci_low=lo,
        ci_high=hi,
        n_items=n,
        agreement_label=label_agreement(kappa),
        method="cohen",
        ci_method=ci,
    )


def cohen_kappa(
    pairs,
    k: int | None = None,
    ci: str = "analytic",
    bootstrap_b: int = 1000,
    seed: int = 0,
) -> KappaResult:
    """Cohen's kappa for two raters.

    `pairs` is a sequence of (label_a, label_b) integer pairs with
    labels in 0..k-1; k is inferred from the data when omitted.  The
    analytic CI is kappa +/- 1.96 * sqrt(p_o(1-p_o) / (n(1-p_e)^2)),
    clamped to [-1, 1]; `ci="bootstrap"` resamples items instead.
    """
    counts = pair_count_matrix(pairs, k)
    return cohen_kappa_from_counts(counts, ci=ci, bootstrap_b=bootstrap_b, seed=seed)


def _fleiss_point(counts: np.ndarray, r: int) -> tuple[float, float, float]:
    """(kappa, p_bar, p_bar_e) from an (n_items, k) rater-count matrix.

    Both means are single float divisions of exact integer sums, which
    keeps algebraically equal fixtures (like p_bar == p_bar_e) exactly
    equal in float, so their kappa is exactly 0.0.
    """
    n = counts.shape[0]
    nr = n * r
    sq_sum = int((counts.astype(np.int64) ** 2).sum())
    p_bar = (sq_sum - nr) / (nr * (r - 1))
    col = counts.sum(axis=0)
    pe_num = int(col @ col)
    if pe_num == nr * nr:
        raise ChanceDegenerate("every rating is in one category; kappa undefined")
    p_bar_e = pe_num / (nr * nr)
    return (p_bar - p_bar_e) / (1.0 - p_bar_e), p_bar, p_bar_e


def fleiss_kappa(
    counts,
    r: int | None = None,
    ci: str = "analytic",
    bootstrap_b: int = 1000,
    seed: int = 0,
) -> KappaResult:
    """Fleiss' kappa for n items each rated by exactly r raters.

    `counts` is an (n_items, k) matrix whose row i gives how many of
    the r raters put item i in each category.  The analytic SE is the
    classical large-sample formula (exact only under the
    chance-agreement null), so bootstrap CIs are preferred for
    reporting clearly non-null kappas; pass `ci="bootstrap"`.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 0:
        raise EmptyInput("empty rating-count matrix")
    if counts.ndim != 2:
        raise InvalidParameter(f"counts must be 2-D, got shape {counts.shape}")
    if counts.min() < 0:
        raise InvalidParameter("counts must be non-negative")
    n = counts.shape[0]
    if n < 2:
        raise EmptyInput(f"need at least 2 items, got {n}")
    row_sums = counts.sum(axis=1)
    if r is None:
        r = int(row_sums[0])
    if r < 2:
        raise InvalidParameter(f"need at least 2 raters per item, got r={r}")
    bad = np.nonzero(row_sums != r)[0]
    if bad.size:
        i = int(bad[0])
        raise UnequalRaterCount(
            f"row {i} sums to {int(row_sums[i])}, expected r={r}"
        )

    kappa, p_bar, p_bar_e = _fleiss_point(counts, r)
    nr = n * r
    if ci == "analytic":
        p_j = counts.sum(axis=0) / nr
        var_core = p_bar_e - (2 * r - 3) * p_bar_e**2 + 2 * (r - 2) * float(
            (p_j**3).sum()
        )
        se = (
            math.sqrt(2.0 / (nr * (r - 1)))
            * math.sqrt(max(var_core, 0.0))
            / (1.0 - p_bar_e)
        )
        lo = _clamp(kappa - Z_CRIT_95 * se, -1.0, 1.0)
        hi = _clamp(kappa + Z_CRIT_95 * se, -1.0, 1.0)
    elif ci == "bootstrap":

        def stat(idx):
            return _fleiss_point(counts[idx], r)[0]

        se, lo, hi = _bootstrap_ci(stat, n, bootstrap_b, seed)
    else:
        raise InvalidParameter(f"unknown ci method {ci!r}")
    return KappaResult(
        kappa=kappa,
        se=se,
        ci_low=lo,
        ci_high=hi,
        n_items=n,
        agreement_label=label_agreement(kappa),
        method="fleiss",
        ci_method=ci,
    )


def compare_kappas(k1: KappaResult, k2: KappaResult) -> KappaComparison:
    """Two-sided z-test for the difference of two independent kappas."""
    if k1.se <= 0.0 or k2.se <= 0.0:
        raise ZeroVariance(
            f"both standard errors must be positive, got {k1.se} and {k2.se}"
        )
    z = (k1.kappa - k2.kappa) / math.sqrt(k1.se**2 + k2.se**2)
    p = 2.0 * (1.0 - NormalDist().cdf(abs(z)))
    return KappaComparison(z=z, p_value=_clamp(p, 0.0, 1.0), k1=k1, k2=k2)


def kappa_sample_size(
    ci_level: float,
    margin: float,
    prevalence: float,
    raters: int = 2,
    categories: int = 2,
) -> int:
    """Items needed so a two-rater binary kappa CI has the given half-width.

    Uses n = ceil(z^2 * p_o(1-p_o) / (margin^2 * (1-p_e)^2)) at the
    worst case p_o = 0.5, with p_e = prevalence^2 + (1-prevalence)^2
    from the assumed shared marginal.  Note the formula is specific to
    the two-rater, two-category design.
    """
    if not 0.0 < margin < 1.0:
        raise InvalidParameter(f"margin must be in (0, 1), got {margin}")
    if not 0.0 < prevalence < 1.0:
        raise InvalidParameter(f"prevalence must be in (0, 1), got {prevalence}")
    if not 0.0 < ci_level < 1.0:
        raise InvalidParameter(f"ci_level must be in (0, 1), got {ci_level}")
    if raters != 2 or categories != 2:
        raise InvalidParameter(
            "sample-size formula is defined for raters=2, categories=2; "
            f"got raters={raters}, categories={categories}"
        )
    z = NormalDist().inv_cdf(0.5 + ci_level / 2.0)
    p_e = prevalence**2 + (1.0 - prevalence) ** 2
    n = z * z * 0.25 / (margin * margin * (1.0 - p_e) ** 2)
    return math.ceil(n)


# ---------------------------------------------------------------------------
# Ratings file I/O (JSON lines)
# ---------------------------------------------------------------------------


def load_ratings(path) -> list[RatingRecord]:
    """Read rating records from a JSON-lines file.

    Each line holds {"study", "rater", "phase", "case", "label"} plus an
    optional "ts" timestamp; blank lines are skipped.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                records.append(
                    RatingRecord(
                        study_id=str(doc["study"]),
                        rater_id=str(doc["rater"]),
                        phase=str(doc["phase"]),
                        case_id=str(doc["case"]),
                        label=label_from_string(str(doc["label"])),
                        ts=doc.get("ts"),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise AgreementError(f"{path}:{lineno}: bad rating record: {exc}")
    return records


def write_ratings(records, path) -> None:
    """Write rating records as one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Study report (four table blocks per label space)
# ---------------------------------------------------------------------------


def _kr_cell(fn) -> dict:
    """Run a KappaResult computation, folding degeneracy into the cell."""
    try:
        return fn().to_dict()
    except ChanceDegenerate as exc:
        return {"degenerate": True, "note": str(exc)}


def _pairs_vs(lookup_a: dict, lookup_b: dict, cases) -> list[tuple[int, int]]:
    return [(lookup_a[c], lookup_b[c]) for c in cases]


def study_tables(
    records,
    grouping: dict[str, str] | None = None,
    bootstrap_b: int = 1000,
    seed: int = 0,
) -> dict:
    """Build the four agreement-report blocks from flat rating records.

    Per label space present in `records`, emits:

    (a) trainer_calibration - per-rater Cohen kappa against the TRAINER
        labels, separately at T0 and T1;
    (b) intra_rater - per-rater Cohen kappa of T0 vs T1;
    (c) group_intra - per-group kappa over the concatenated (T0, T1)
        pairs of the group's raters, plus a between-group z-test when
        exactly two groups are defined;
    (d) inter_rater - Fleiss kappa per phase, per group and overall
        (bootstrap CIs), plus between-group z-tests.

    Every rater must cover the full trainer case list at both T0 and
    T1; anything less raises IncompleteStudy.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no rating records supplied")

    study_space: dict[str, Space] = {}
    for rec in records:
        prev = study_space.setdefault(rec.study_id, rec.label.space)
        if prev is not rec.label.space:
            raise InvalidParameter(
                f"study {rec.study_id!r} mixes label spaces "
                f"{prev.value} and {rec.label.space.value}"
            )

    seen: dict[tuple, int] = {}
    for rec in records:
        key = (rec.study_id, rec.rater_id, rec.phase, rec.case_id)
        idx = rec.label.index
        if key in seen and seen[key] != idx:
            raise InvalidParameter(f"conflicting duplicate record for {key}")
        seen[key] = idx

    by_space: dict[Space, list[RatingRecord]] = {}
    for rec in records:
        by_space.setdefault(rec.label.space, []).append(rec)

    report: dict = {"studies": sorted(study_space), "spaces": {}}
    for space in sorted(by_space, key=lambda s: s.value):
        report["spaces"][space.value] = _space_tables(
            by_space[space], space, grouping, bootstrap_b, seed
        )
    return report


def _space_tables(records, space: Space, grouping, bootstrap_b: int, seed: int) -> dict:
    k = len(SPACE_LABELS[space])

    trainer_ids = sorted({r.rater_id for r in records if r.phase == "TRAINER"})
    if not trainer_ids:
        raise IncompleteStudy(f"label space {space.value}: no TRAINER records")
    if len(trainer_ids) > 1:
        raise InvalidParameter(
            f"label space {space.value}: multiple TRAINER raters {trainer_ids}"
        )
    trainer = trainer_ids[0]

    lookup: dict[tuple[str, str], dict[str, int]] = {}
    for rec in records:
        lookup.setdefault((rec.rater_id, rec.phase), {})[rec.case_id] = rec.label.index

    trainer_lookup = lookup[(trainer, "TRAINER")]
    cases = sorted(trainer_lookup)
    case_set = set(cases)
    if len(cases) < 2:
        raise IncompleteStudy(
            f"label space {space.value}: trainer rated {len(cases)} cases, need >= 2"
        )

    raters = sorted(
        {r.rater_id for r in records if r.phase in ("T0", "T1")}
    )
    if not raters:
        raise IncompleteStudy(f"label space {space.value}: no T0/T1 ratings")
    for rater in raters:
        for phase in ("T0", "T1"):
            got = lookup.get((rater, phase), {})
            if set(got) != case_set:
                raise IncompleteStudy(
                    f"label space {space.value}: rater {rater!r} phase {phase} "
                    f"covers {len(set(got) & case_set)}/{len(cases)} cases"
                )

    grouping = grouping or {}
    groups: dict[str, list[str]] = {}
    for rater in raters:
        groups.setdefault(grouping.get(rater, "all"), []).append(rater)
    group_names = sorted(groups)

    # (a) trainer calibration, per rater and phase
    trainer_calibration = {
        rater: {
            phase: _kr_cell(
                lambda rater=rater, phase=phase: cohen_kappa(
                    _pairs_vs(lookup[(rater, phase)], trainer_lookup, cases), k
                )
            )
            for phase in ("T0", "T1")
        }
        for rater in raters
    }

    # (b) intra-rater T0 vs T1
    intra_rater = {
        rater: _kr_cell(
            lambda rater=rater: cohen_kappa(
                _pairs_vs(lookup[(rater, "T0")], lookup[(rater, "T1")], cases), k
            )
        )
        for rater in raters
    }

    # (c) pooled intra-rater per group + z-test
    group_results: dict[str, KappaResult | None] = {}
    group_intra: dict = {"per_group": {}, "comparison": None}
    for name in group_names:
        pooled = []
        for rater in groups[name]:
            pooled.extend(
                _pairs_vs(lookup[(rater, "T0")], lookup[(rater, "T1")], cases)
            )
        try:
            res = cohen_kappa(pooled, k)
        except ChanceDegenerate as exc:
            group_results[name] = None
            group_intra["per_group"][name] = {"degenerate": True, "note": str(exc)}
        else:
            group_results[name] = res
            group_intra["per_group"][name] = res.to_dict()
    group_intra["comparison"] = _comparison(group_names, group_results)

    # (d) Fleiss per phase, per group and overall
    inter_rater: dict = {}
    for phase in ("T0", "T1"):
        per_group: dict = {}
        fleiss_results: dict[str, KappaResult | None] = {}
        for name in group_names:
            per_group[name], fleiss_results[name] = _fleiss_cell(
                groups[name], phase, lookup, cases, k, bootstrap_b, seed
            )
        overall_cell, _ = _fleiss_cell(
            raters, phase, lookup, cases, k, bootstrap_b, seed
        )
        inter_rater[phase] = {
            "per_group": per_group,
            "overall": overall_cell,
            "comparison": _comparison(group_names, fleiss_results),
        }

    return {
        "label_space": space.value,
        "labels": list(SPACE_LABELS[space]),
        "n_cases": len(cases),
        "trainer": trainer,
        "raters": raters,
        "groups": {name: groups[name] for name in group_names},
        "trainer_calibration": trainer_calibration,
        "intra_rater": intra_rater,
        "group_intra": group_intra,
        "inter_rater": inter_rater,
    }


def _fleiss_cell(rater_subset, phase, lookup, cases, k, bootstrap_b, seed):
    """Fleiss kappa cell for one phase and rater subset (None if not computable)."""
    if len(rater_subset) < 2:
        return (
            {"skipped": True, "note": f"need >= 2 raters, have {len(rater_subset)}"},
            None,
        )
    counts = np.zeros((len(cases), k), dtype=np.int64)
    for i, case in enumerate(cases):
        for rater in rater_subset:
            counts[i, lookup[(rater, phase)][case]] += 1
    try:
        res = fleiss_kappa(
            counts, r=len(rater_subset), ci="bootstrap",
            bootstrap_b=bootstrap_b, seed=seed,
        )
    except ChanceDegenerate as exc:
        return {"degenerate": True, "note": str(exc)}, None
    return res.to_dict(), res


def _comparison(group_names, results: dict) -> dict | None:
    """Between-group z-test when exactly two groups have usable results."""
    if len(group_names) != 2:
        return None
    a, b = group_names
    ka, kb = results.get(a), results.get(b)
    if ka is None or kb is None:
        return {"skipped": True, "note": "a group estimate is degenerate"}
    try:
        cmp = compare_kappas(ka, kb)
    except ZeroVariance as exc:
        return {"skipped": True, "note": str(exc)}
    return {"groups": [a, b], "z": cmp.z, "p_value": cmp.p_value}


# ---------------------------------------------------------------------------
# Plain-text rendering
# ---------------------------------------------------------------------------


def _fmt_cell(cell: dict) -> str:
    if cell.get("degenerate"):
        return "degenerate"
    if cell.get("skipped"):
        return f"skipped ({cell['note']})"
    return (
        f"{cell['kappa']:.3f} [{cell['ci_low']:.3f}, {cell['ci_high']:.3f}] "
        f"{cell['agreement_label']}"
    )


def _fmt_comparison(cmp: dict | None) -> str:
    if cmp is None:
        return "z-test: n/a (need exactly two groups)"
    if cmp.get("skipped"):
        return f"z-test: skipped ({cmp['note']})"
    return f"z-test {cmp['groups'][0]} vs {cmp['groups'][1]}: " \
           f"z = {cmp['z']:.3f}, p = {cmp['p_value']:.4f}"


def render_study_tables(report: dict) -> str:
    """Render a study_tables report as aligned plain text."""
    out = []
    for space_name, sp in report["spaces"].items():
        out.append(
            f"=== Label space {space_name} ({'/'.join(sp['labels'])}) — "
            f"{sp['n_cases']} cases, {len(sp['raters'])} raters ==="
        )
        width = max(len(r) for r in sp["raters"]) + 2

        out.append("")
        out.append("[A] Trainer calibration (Cohen's kappa vs trainer)")
        for rater in sp["raters"]:
            row = sp["trainer_calibration"][rater]
            out.append(
                f"  {rater:<{width}} T0: {_fmt_cell(row['T0'])}   "
                f"T1: {_fmt_cell(row['T1'])}"
            )

        out.append("")
        out.append("[B] Intra-rater reliability (T0 vs T1)")
        for rater in sp["raters"]:
            out.append(f"  {rater:<{width}} {_fmt_cell(sp['intra_rater'][rater])}")

        out.append("")
        out.append("[C] Group-pooled intra-rater agreement")
        gi = sp["group_intra"]
        gwidth = max(len(g) for g in sp["groups"]) + 2
        for name in sp["groups"]:
            out.append(f"  {name:<{gwidth}} {_fmt_cell(gi['per_group'][name])}")
        out.append(f"  {_fmt_comparison(gi['comparison'])}")

        out.append("")
        out.append("[D] Inter-rater agreement (Fleiss' kappa)")
        for phase in ("T0", "T1"):
            block = sp["inter_rater"][phase]
            out.append(f"  {phase}:")
            for name in sp["groups"]:
                out.append(
                    f"    {name:<{gwidth}} {_fmt_cell(block['per_group'][name])}"
                )
            out.append(f"    {'overall':<{gwidth}} {_fmt_cell(block['overall'])}")
            out.append(f"    {_fmt_comparison(block['comparison'])}")
        out.append("")
    return "\n".join(out)
