"""Shared fixtures and helpers for the canine-lab test suite."""

from __future__ import annotations

import numpy as np
import pytest

from canine_lab import geometry

# Published three-class confusion matrix (rows = true class, columns =
# predicted class) used as the golden reference for the metrics module,
# together with the externally reported summary values.
REFERENCE_COUNTS = [
    [114, 2, 2],
    [41, 56, 16],
    [5, 6, 64],
]

REFERENCE_METRICS = {
    "accuracy": 0.76470,
    "recalls": (0.96610, 0.49557, 0.85333),
    "precisions": (0.71250, 0.87500, 0.78048),
    "mae": 0.25817,
    "mse": 0.30392,
    "rmse": 0.55129,
    "macro_recall": 0.77167,
}


@pytest.fixture
def reference_counts() -> np.ndarray:
    return np.array(REFERENCE_COUNTS, dtype=np.int64)


def random_strip_case(rng: np.random.Generator, case_id: str = "rand"):
    """Build a jittered, non-crossing strip fixture.

    Returns (case, offsets, angles_deg).  Boundary line i crosses y=0 at
    offsets[i] and tilts by angles_deg[i] from vertical.  Gaps of at least
    6 units with tilts within +/-8 degrees keep the boundary order intact
    over the |y| <= 3 probe band used by the property tests.
    """
    start = rng.uniform(5.0, 15.0)
    gaps = rng.uniform(6.0, 14.0, size=3)
    offsets = start + np.concatenate([[0.0], np.cumsum(gaps)])
    angles = rng.uniform(-8.0, 8.0, size=4)
    case = geometry.make_strip_case(
        offsets=tuple(float(v) for v in offsets),
        angles_deg=tuple(float(v) for v in angles),
        canine_point=(float(offsets[0]) - 3.0, 0.0),
        case_id=case_id,
    )
    return case, offsets, angles


def probe_at(case: geometry.CanineCase, x: float, y: float) -> geometry.CanineCase:
    """Copy of the case with its canine point moved to (x, y)."""
    import dataclasses

    return dataclasses.replace(case, canine_point=geometry.Point2D(x, y))
