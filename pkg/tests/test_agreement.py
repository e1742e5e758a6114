"""Agreement statistics tests: kappa oracles, CIs, z-tests, study tables."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from canine_lab import agreement
from canine_lab.errors import (
    ChanceDegenerate,
    EmptyInput,
    IncompleteStudy,
    InvalidParameter,
    UnequalRaterCount,
    ZeroVariance,
)
from canine_lab.geometry import Space, SectorLabel


def _cohen_brute(counts: np.ndarray):
    """Exact rational Cohen kappa and analytic SE, or None when degenerate."""
    n = int(counts.sum())
    po = Fraction(int(np.trace(counts)), n)
    pe = Fraction(
        int(sum(int(counts[i].sum()) * int(counts[:, i].sum()) for i in range(counts.shape[0]))),
        n * n,
    )
    if pe == 1:
        return None
    kappa = (po - pe) / (1 - pe)
    se = math.sqrt(float(po) * (1.0 - float(po)) / (n * float((1 - pe)) ** 2))
    return float(kappa), se


def _all_count_matrices(max_n: int, k: int):
    """Every k x k tally with total 1..max_n (stars-and-bars enumeration)."""
    cells = k * k
    for n in range(1, max_n + 1):
        for combo in itertools.combinations_with_replacement(range(cells), n):
            counts = np.zeros((k, k), dtype=np.int64)
            for c in combo:
                counts[divmod(c, k)] += 1
            yield counts


def test_cohen_exhaustive_oracle_small():
    checked = degenerate = 0
    for counts in _all_count_matrices(4, 3):
        want = _cohen_brute(counts)
        if want is None:
            with pytest.raises(ChanceDegenerate):
                agreement.cohen_kappa_from_counts(counts)
            degenerate += 1
            continue
        got = agreement.cohen_kappa_from_counts(counts)
        assert abs(got.kappa - want[0]) <= 1e-12
        assert abs(got.se - want[1]) <= 1e-12
        assert got.ci_low == max(-1.0, got.kappa - 1.96 * got.se)
        assert got.ci_high == min(1.0, got.kappa + 1.96 * got.se)
        checked += 1
    assert checked > 600 and degenerate > 0


def test_cohen_known_values():
    res = agreement.cohen_kappa_from_counts(np.array([[20, 5], [10, 15]]))
    assert res.kappa == pytest.approx(0.4, abs=1e-12)
    assert res.agreement_label == "fair"
    assert res.n_items == 50

    pairs = list(zip((0, 0, 1, 1), (0, 1, 0, 1)))
    assert agreement.cohen_kappa(pairs).kappa == 0.0

    perfect = agreement.cohen_kappa([(0, 0), (1, 1), (2, 2)])
    assert perfect.kappa == 1.0
    assert perfect.agreement_label == "perfect"
    assert perfect.se == 0.0


def test_cohen_pairs_match_counts():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        a = rng.integers(0, 3, size=n)
        b = rng.integers(0, 3, size=n)
        counts = agreement.pair_count_matrix(list(zip(a, b)), k=3)
        try:
            from_counts = agreement.cohen_kappa_from_counts(counts)
        except ChanceDegenerate:
            with pytest.raises(ChanceDegenerate):
                agreement.cohen_kappa(list(zip(a, b)), k=3)
            continue
        from_pairs = agreement.cohen_kappa(list(zip(a, b)), k=3)
        assert from_pairs.kappa == from_counts.kappa
        assert from_pairs.se == from_counts.se


def test_permutation_and_relabel_invariance():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(4, 30))
        pairs = [(int(rng.integers(0, 3)), int(rng.integers(0, 3))) for _ in range(n)]
        try:
            base = agreement.cohen_kappa(pairs, k=3).kappa
        except ChanceDegenerate:
            continue
        shuffled = [pairs[i] for i in rng.permutation(n)]
        assert agreement.cohen_kappa(shuffled, k=3).kappa == base
        perm = rng.permutation(3)
        relabeled = [(int(perm[a]), int(perm[b])) for a, b in pairs]
        assert agreement.cohen_kappa(relabeled, k=3).kappa == pytest.approx(base, abs=1e-12)


def test_fleiss_hand_example_is_exactly_zero():
    res = agreement.fleiss_kappa(np.array([[3, 0], [2, 1], [1, 2]]))
    assert res.kappa == 0.0
    assert res.method == "fleiss"
    assert res.agreement_label == "no agreement"


def test_fleiss_input_validation():
    with pytest.raises(UnequalRaterCount):
        agreement.fleiss_kappa(np.array([[3, 0], [2, 2]]))
    with pytest.raises(EmptyInput):
        agreement.fleiss_kappa(np.zeros((0, 3), dtype=int))
    with pytest.raises(ChanceDegenerate):
        agreement.fleiss_kappa(np.array([[2, 0], [2, 0]]))
    with pytest.raises(InvalidParameter):
        agreement.fleiss_kappa(np.array([[1, 0], [1, 0]]))  # r=1 cannot pair


def _scott_pi(a, b):
    """Symmetrized two-rater agreement with pooled marginals, exact."""
    n = len(a)
    po = Fraction(sum(int(x == y) for x, y in zip(a, b)), n)
    pooled = {}
    for x in list(a) + list(b):
        pooled[x] = pooled.get(x, 0) + 1
    pe = sum(Fraction(c, 2 * n) ** 2 for c in pooled.values())
    if pe == 1:
        return None
    return float((po - pe) / (1 - pe))


def test_fleiss_r2_matches_symmetrized_pairwise():
    rng = np.random.default_rng(314)
    checked = 0
    for _ in range(300):
        n = int(rng.integers(2, 15))
        k = int(rng.integers(2, 4))
        a = rng.integers(0, k, size=n)
        b = rng.integers(0, k, size=n)
        counts = np.zeros((n, k), dtype=np.int64)
        for i in range(n):
            counts[i, a[i]] += 1
            counts[i, b[i]] += 1
        want = _scott_pi(a.tolist(), b.tolist())
        if want is None:
            with pytest.raises(ChanceDegenerate):
                agreement.fleiss_kappa(counts)
            continue
        got = agreement.fleiss_kappa(counts)
        assert got.kappa == pytest.approx(want, abs=1e-12)
        checked += 1
    assert checked > 250


def test_bootstrap_ci_contains_point_and_is_seeded():
    counts = np.array([[20, 5], [10, 15]])
    boot = agreement.cohen_kappa_from_counts(counts, ci="bootstrap", bootstrap_b=400, seed=7)
    again = agreement.cohen_kappa_from_counts(counts, ci="bootstrap", bootstrap_b=400, seed=7)
    assert boot == again
    assert boot.ci_method == "bootstrap"
    assert boot.ci_low <= boot.kappa <= boot.ci_high
    other = agreement.cohen_kappa_from_counts(counts, ci="bootstrap", bootstrap_b=400, seed=8)
    assert other != boot  # different seed, different replicate draw


def test_bootstrap_jitter_shrinks_with_more_replicates():
    counts = np.array([[18, 7, 2], [6, 21, 5], [3, 4, 16]])
    spreads = {}
    for b in (200, 2000):
        ses = [
            agreement.cohen_kappa_from_counts(counts, ci="bootstrap", bootstrap_b=b, seed=s).se
            for s in range(12)
        ]
        spreads[b] = float(np.var(ses))
    assert spreads[2000] < spreads[200]


def test_fleiss_bootstrap_ci():
    rng = np.random.default_rng(0)
    counts = np.zeros((30, 3), dtype=np.int64)
    for i in range(30):
        votes = rng.integers(0, 3, size=4)
        for v in votes:
            counts[i, v] += 1
    res = agreement.fleiss_kappa(counts, ci="bootstrap", bootstrap_b=300, seed=3)
    assert res.ci_low <= res.kappa <= res.ci_high
    assert res.ci_method == "bootstrap"


def test_agreement_band_edges():
    eps = 1e-9
    # floor and ceiling: below 0.01 is no agreement, exactly 1.0 is perfect
    assert agreement.label_agreement(0.01 - eps) == "no agreement"
    assert agreement.label_agreement(0.01) == "slight"
    assert agreement.label_agreement(1.0 - eps) == "almost perfect"
    assert agreement.label_agreement(1.0) == "perfect"
    # interior edges are closed on the upper side of each band
    for edge, low, high in (
        (0.20, "slight", "fair"),
        (0.40, "fair", "moderate"),
        (0.60, "moderate", "substantial"),
        (0.80, "substantial", "almost perfect"),
    ):
        assert agreement.label_agreement(edge - eps) == low
        assert agreement.label_agreement(edge) == low
        assert agreement.label_agreement(edge + eps) == high
    assert agreement.label_agreement(-0.4) == "no agreement"
    with pytest.raises(InvalidParameter):
        agreement.label_agreement(float("nan"))


def test_compare_kappas_z_test():
    se1, se2 = (0.75 - 0.68) / 3.92, (0.81 - 0.74) / 3.92
    k1 = agreement.KappaResult(0.72, se1, 0.68, 0.75, 306, "substantial", "cohen", "analytic")
    k2 = agreement.KappaResult(0.78, se2, 0.74, 0.81, 306, "substantial", "cohen", "analytic")
    cmp = agreement.compare_kappas(k1, k2)
    assert cmp.z == pytest.approx((0.72 - 0.78) / math.hypot(se1, se2), abs=1e-12)
    assert 0.005 <= cmp.p_value <= 0.03
    degenerate = agreement.KappaResult(1.0, 0.0, 1.0, 1.0, 10, "perfect", "cohen", "analytic")
    with pytest.raises(ZeroVariance):
        agreement.compare_kappas(k1, degenerate)


def test_kappa_sample_size_formula():
    assert agreement.kappa_sample_size(0.95, 0.2, 0.2) == 235
    assert agreement.kappa_sample_size(0.95, 0.4, 0.2) == 59
    assert agreement.kappa_sample_size(0.95, 0.2, 0.5) == 97
    assert agreement.kappa_sample_size(0.95, 0.1, 0.5) == 385
    # quadrupling precision requirement when halving the margin
    for margin, prevalence in ((0.2, 0.2), (0.1, 0.3)):
        n1 = agreement.kappa_sample_size(0.95, margin, prevalence)
        n2 = agreement.kappa_sample_size(0.95, 2 * margin, prevalence)
        assert n1 == pytest.approx(4 * n2, rel=0.02)
    with pytest.raises(InvalidParameter):
        agreement.kappa_sample_size(0.95, 0.0, 0.2)
    with pytest.raises(InvalidParameter):
        agreement.kappa_sample_size(0.95, 0.2, 1.0)
    with pytest.raises(InvalidParameter):
        agreement.kappa_sample_size(0.95, 0.2, 0.2, raters=3)


def _record(rater, phase, case, letter, study="st1"):
    return agreement.RatingRecord(
        study_id=study,
        rater_id=rater,
        phase=phase,
        case_id=case,
        label=SectorLabel(Space.THREE, letter),
    )


def _full_study(n_cases=20, raters=("r1", "r2", "r3", "r4"), flip=None):
    """All raters copy the trainer except `flip`: {(rater, phase): [cases...]}."""
    cases = [f"c{i:02d}" for i in range(n_cases)]
    letters = ["A", "B", "C"]
    truth = {c: letters[i % 3] for i, c in enumerate(cases)}
    records = [_record("trainer", "TRAINER", c, truth[c]) for c in cases]
    flip = flip or {}
    for rater in raters:
        for phase in ("T0", "T1"):
            flipped = set(flip.get((rater, phase), ()))
            for c in cases:
                letter = truth[c]
                if c in flipped:
                    letter = letters[(letters.index(letter) + 1) % 3]
                records.append(_record(rater, phase, c, letter))
    return records, cases, truth


def test_study_tables_all_copy_trainer():
    records, _, _ = _full_study()
    grouping = {"r1": "G1", "r2": "G1", "r3": "G2", "r4": "G2"}
    report = agreement.study_tables(records, grouping=grouping, bootstrap_b=100, seed=0)
    tables = report["spaces"]["THREE"]
    for rater_cells in tables["trainer_calibration"].values():
        for cell in rater_cells.values():
            assert cell["kappa"] == 1.0
    for cell in tables["intra_rater"].values():
        assert cell["kappa"] == 1.0
    for cell in tables["group_intra"]["per_group"].values():
        assert cell["kappa"] == 1.0
    for phase in ("T0", "T1"):
        assert tables["inter_rater"][phase]["overall"]["kappa"] == 1.0


def test_study_tables_intra_rater_matches_direct_cohen():
    flip = {("r1", "T1"): [f"c{i:02d}" for i in range(0, 20, 10)]}  # 10% of items
    records, cases, truth = _full_study(flip=flip)
    report = agreement.study_tables(records, bootstrap_b=100, seed=0)
    cell = report["spaces"]["THREE"]["intra_rater"]["r1"]

    by_key = {(r.rater_id, r.phase, r.case_id): r.label.index for r in records}
    pairs = [(by_key[("r1", "T0", c)], by_key[("r1", "T1", c)]) for c in cases]
    direct = agreement.cohen_kappa(pairs, k=3)
    assert cell["kappa"] == direct.kappa
    assert cell["se"] == direct.se


def test_study_tables_missing_phase_raises():
    records, _, _ = _full_study()
    pruned = [r for r in records if not (r.rater_id == "r4" and r.phase == "T1")]
    with pytest.raises(IncompleteStudy):
        agreement.study_tables(pruned)


def test_study_tables_requires_trainer():
    records, _, _ = _full_study()
    pruned = [r for r in records if r.phase != "TRAINER"]
    with pytest.raises(IncompleteStudy):
        agreement.study_tables(pruned)


def test_study_tables_render_and_comparison():
    flip = {
        ("r1", "T1"): ["c00", "c03"],
        ("r3", "T1"): ["c01", "c04", "c07", "c10"],
        ("r3", "T0"): ["c02"],
    }
    records, _, _ = _full_study(flip=flip)
    grouping = {"r1": "G1", "r2": "G1", "r3": "G2", "r4": "G2"}
    report = agreement.study_tables(records, grouping=grouping, bootstrap_b=100, seed=1)
    text = agreement.render_study_tables(report)
    for block in ("[A]", "[B]", "[C]", "[D]"):
        assert block in text
    cmp = report["spaces"]["THREE"]["group_intra"]["comparison"]
    assert cmp["groups"] == ["G1", "G2"]
    assert 0.0 <= cmp["p_value"] <= 1.0 and cmp["z"] > 0.0  # G1 agrees more


def test_study_tables_zero_variance_comparison_skipped():
    records, _, _ = _full_study()
    grouping = {"r1": "G1", "r2": "G1", "r3": "G2", "r4": "G2"}
    report = agreement.study_tables(records, grouping=grouping, bootstrap_b=100, seed=1)
    # two groups of perfect raters have zero-variance kappas: z-test skipped
    cmp = report["spaces"]["THREE"]["group_intra"]["comparison"]
    assert cmp["skipped"] is True and "positive" in cmp["note"]


def test_ratings_io_roundtrip(tmp_path):
    records, _, _ = _full_study(n_cases=4, raters=("r1",))
    path = tmp_path / "ratings.jsonl"
    agreement.write_ratings(records, path)
    back = agreement.load_ratings(path)
    assert back == records
    with pytest.raises(FileNotFoundError):
        agreement.load_ratings(tmp_path / "missing.jsonl")
