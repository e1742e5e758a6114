"""Sector-boundary geometry for unerupted maxillary canines.

Four boundary lines are derived from incisor landmarks (image pixels,
y increasing downward):

  d1  tangent through the distal crown/root heights of contour of the
      lateral incisor
  d2  long axis of the lateral incisor (crown tip to root apex)
  d3  tangent through the mesial crown/root heights of contour
  d4  long axis of the central incisor

Every line's normal is oriented so that positive signed distance means
"mesial side" (toward the midline).  The sign pattern of the four signed
distances places a canine crown point into one of five ordered sectors,
which merge down to the 4- and 3-sector systems.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import AmbiguousGeometry, DegenerateDirection, DegenerateLine, GeometryError

# Two defining points closer than this (px) cannot anchor a line.
COINCIDENT_TOL = 1e-6
# On-boundary tie band: |delta| <= EPS counts as mesial.
DEFAULT_EPS = 1e-9


class Space(str, Enum):
    """Label space of a sector classification system."""

    FIVE = "FIVE"
    FOUR = "FOUR"
    THREE = "THREE"


SPACE_LABELS: dict[Space, tuple[str, ...]] = {
    Space.FIVE: ("S1", "S2", "S3", "S4", "S5"),
    Space.FOUR: ("I", "II", "III", "IV"),
    Space.THREE: ("A", "B", "C"),
}


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class SectorLabel:
    space: Space
    value: str

    def __post_init__(self):
        if self.value not in SPACE_LABELS[self.space]:
            raise GeometryError(f"label {self.value!r} not in space {self.space.value}")

    @property
    def index(self) -> int:
        """0-based position within the space, ordered distal to mesial."""
        return SPACE_LABELS[self.space].index(self.value)


def label_from_string(value: str) -> SectorLabel:
    """Parse a bare label string; the three vocabularies are disjoint."""
    for space, labels in SPACE_LABELS.items():
        if value in labels:
            return SectorLabel(space, value)
    raise GeometryError(f"unrecognized sector label {value!r}")


@dataclass(frozen=True)
class Line2D:
    """Oriented line: unit direction plus unit normal pointing mesially."""

    anchor: Point2D
    direction: tuple[float, float]
    normal: tuple[float, float]

    def __post_init__(self):
        if abs(math.hypot(*self.direction) - 1.0) > 1e-9:
            raise GeometryError("direction must be a unit vector")
        dot = self.direction[0] * self.normal[0] + self.direction[1] * self.normal[1]
        if abs(dot) > 1e-9:
            raise GeometryError("normal must be perpendicular to direction")

    def signed_distance(self, p: Point2D) -> float:
        return (p.x - self.anchor.x) * self.normal[0] + (p.y - self.anchor.y) * self.normal[1]


@dataclass(frozen=True)
class IncisorAnnotation:
    """Landmarks of one incisor; hoc = height of contour.

    The lateral incisor needs all six points.  For the central incisor only
    the long axis (crown_tip, root_apex) is used and the tangent points may
    be omitted.
    """

    crown_tip: Point2D
    root_apex: Point2D
    distal_crown_hoc: Point2D | None = None
    distal_root_hoc: Point2D | None = None
    mesial_crown_hoc: Point2D | None = None
    mesial_root_hoc: Point2D | None = None

    def require_tangents(self) -> None:
        missing = [
            name
            for name in ("distal_crown_hoc", "distal_root_hoc", "mesial_crown_hoc", "mesial_root_hoc")
            if getattr(self, name) is None
        ]
        if missing:
            raise GeometryError(f"lateral incisor annotation missing {', '.join(missing)}")


@dataclass(frozen=True)
class CanineCase:
    """One unerupted canine on one side of one radiograph.

    Bilateral radiographs are ingested as two cases (id suffix A/B).
    """

    case_id: str
    side: str  # "left" | "right"
    canine_point: Point2D
    lateral: IncisorAnnotation
    central: IncisorAnnotation

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise GeometryError(f"side must be 'left' or 'right', got {self.side!r}")


@dataclass(frozen=True)
class SectorBoundarySet:
    d1: Line2D
    d2: Line2D
    d3: Line2D
    d4: Line2D
    mesial_dir: tuple[float, float]

    @property
    def lines(self) -> tuple[Line2D, Line2D, Line2D, Line2D]:
        return (self.d1, self.d2, self.d3, self.d4)


MERGE3_PRESETS: dict[str, dict[str, str]] = {
    # S1 alone is the safest/distal-most sector; everything mesial of the
    # lateral long axis is pooled as the high-risk class.
    "mesial-risk": {"S1": "C", "S2": "B", "S3": "A", "S4": "A", "S5": "A"},
    # Alternate pooling: distal sectors favorable, midline sector on its own.
    "distal-favorable": {"S1": "A", "S2": "A", "S3": "B", "S4": "B", "S5": "C"},
}

DEFAULT_MERGE3_PRESET = "mesial-risk"


@dataclass(frozen=True)
class MergeMap3:
    """Total map from the five sectors onto {A, B, C}.

    The image must be contiguous along the mesial direction: a 3-class
    value may not reappear after a different value interrupted it.
    """

    mapping: dict[str, str]
    preset: str = "custom"

    def __post_init__(self):
        five = SPACE_LABELS[Space.FIVE]
        missing = [s for s in five if s not in self.mapping]
        if missing:
            raise GeometryError(f"merge map not total, missing {missing}")
        bad = [v for v in self.mapping.values() if v not in SPACE_LABELS[Space.THREE]]
        if bad:
            raise GeometryError(f"merge map targets outside A/B/C: {bad}")
        seq = [self.mapping[s] for s in five]
        seen: list[str] = []
        for v in seq:
            if seen and v == seen[-1]:
                continue
            if v in seen:
                raise GeometryError(f"merge map not contiguous along mesial order: {seq}")
            seen.append(v)

    def apply(self, label: SectorLabel) -> SectorLabel:
        if label.space is not Space.FIVE:
            raise GeometryError("merge map applies to 5-sector labels")
        return SectorLabel(Space.THREE, self.mapping[label.value])

    @classmethod
    def from_preset(cls, name: str = DEFAULT_MERGE3_PRESET) -> "MergeMap3":
        if name not in MERGE3_PRESETS:
            raise GeometryError(f"unknown merge preset {name!r}, have {sorted(MERGE3_PRESETS)}")
        return cls(mapping=dict(MERGE3_PRESETS[name]), preset=name)


# ----------------------------------------------------------------------
# construction


def _line_through(a: Point2D, b: Point2D, mesial: tuple[float, float], what: str) -> Line2D:
    dx, dy = b.x - a.x, b.y - a.y
    norm = math.hypot(dx, dy)
    if norm <= COINCIDENT_TOL:
        raise DegenerateLine(f"{what}: defining points coincide at ({a.x}, {a.y})")
    dx, dy = dx / norm, dy / norm
    # candidate normal: direction rotated +90 degrees
    nx, ny = -dy, dx
    dot = nx * mesial[0] + ny * mesial[1]
    if abs(dot) <= 1e-12:
        raise DegenerateDirection(f"{what}: line parallel to the mesial axis, cannot orient")
    if dot < 0:
        nx, ny = -nx, -ny
    return Line2D(anchor=a, direction=(dx, dy), normal=(nx, ny))


def mesial_direction(case: CanineCase) -> tuple[float, float]:
    """Unit vector from the lateral crown tip toward the central crown tip."""
    dx = case.central.crown_tip.x - case.lateral.crown_tip.x
    dy = case.central.crown_tip.y - case.lateral.crown_tip.y
    norm = math.hypot(dx, dy)
    if norm <= COINCIDENT_TOL:
        raise DegenerateDirection("lateral and central crown tips coincide")
    return (dx / norm, dy / norm)


def side_consistent(case: CanineCase) -> bool:
    """Whether the declared side tag agrees with the derived mesial direction.

    Image convention: the patient's right side sits on the image left, so a
    right-side canine has its midline toward +x and vice versa.  A mismatch
    is reported as a warning, never an error.
    """
    mx = mesial_direction(case)[0]
    return mx > 0 if case.side == "right" else mx < 0


def build_boundaries(case: CanineCase) -> SectorBoundarySet:
    """Derive the four mesially-oriented boundary lines of a case."""
    case.lateral.require_tangents()
    mesial = mesial_direction(case)
    lat = case.lateral
    d1 = _line_through(lat.distal_crown_hoc, lat.distal_root_hoc, mesial, "d1 (lateral distal tangent)")
    d2 = _line_through(lat.crown_tip, lat.root_apex, mesial, "d2 (lateral long axis)")
    d3 = _line_through(lat.mesial_crown_hoc, lat.mesial_root_hoc, mesial, "d3 (lateral mesial tangent)")
    d4 = _line_through(case.central.crown_tip, case.central.root_apex, mesial, "d4 (central long axis)")
    return SectorBoundarySet(d1=d1, d2=d2, d3=d3, d4=d4, mesial_dir=mesial)


# ----------------------------------------------------------------------
# classification


def signed_distances(p: Point2D, b: SectorBoundarySet) -> tuple[float, float, float, float]:
    """Mesial-positive perpendicular distances from p to d1..d4 (px)."""
    return tuple(line.signed_distance(p) for line in b.lines)


def signed_distances_batch(points: np.ndarray, b: SectorBoundarySet) -> np.ndarray:
    """Vectorized signed distances: points (n, 2) -> deltas (n, 4)."""
    pts = np.asarray(points, dtype=float)
    anchors = np.array([(ln.anchor.x, ln.anchor.y) for ln in b.lines])  # (4, 2)
    normals = np.array([ln.normal for ln in b.lines])  # (4, 2)
    return np.einsum("nij,ij->ni", pts[:, None, :] - anchors[None, :, :], normals)


def _sector_indices(deltas: np.ndarray, eps: float) -> np.ndarray:
    """Map (n, 4) sign patterns to 0-based sector indices; reject crossings."""
    plus = deltas >= -eps  # ties count as mesial
    lead = plus.cumprod(axis=1).sum(axis=1)  # length of the leading run of +
    total = plus.sum(axis=1)
    bad = lead != total  # a + after a -: boundary lines cross near the point
    if bad.any():
        i = int(np.argmax(bad))
        raise AmbiguousGeometry(
            f"non-monotone sign pattern {['+' if s else '-' for s in plus[i]]} "
            f"at deltas {tuple(round(d, 6) for d in deltas[i])}"
        )
    return lead.astype(int)


def classify5(p: Point2D, b: SectorBoundarySet, eps: float = DEFAULT_EPS) -> SectorLabel:
    """Place a point into S1..S5 by the sign pattern of its four distances."""
    deltas = np.array([signed_distances(p, b)])
    idx = _sector_indices(deltas, eps)[0]
    return SectorLabel(Space.FIVE, SPACE_LABELS[Space.FIVE][idx])


def classify5_batch(points: np.ndarray, b: SectorBoundarySet, eps: float = DEFAULT_EPS) -> np.ndarray:
    """0-based sector indices for an (n, 2) array of points."""
    return _sector_indices(signed_distances_batch(points, b), eps)


def merge_to4(s: SectorLabel) -> SectorLabel:
    """S1..S3 map to I..III; the mesial tangent bounds sector IV, so S4 and S5 pool."""
    if s.space is not Space.FIVE:
        raise GeometryError("merge_to4 expects a 5-sector label")
    four = ("I", "II", "III", "IV", "IV")
    return SectorLabel(Space.FOUR, four[s.index])


def merge_to3(s: SectorLabel, m: MergeMap3 | None = None) -> SectorLabel:
    m = m or MergeMap3.from_preset()
    return m.apply(s)


def classify(
    case: CanineCase,
    space: Space = Space.FIVE,
    merge_map: MergeMap3 | None = None,
    eps: float = DEFAULT_EPS,
) -> SectorLabel:
    """Classify a case's canine point in the requested label space."""
    b = build_boundaries(case)
    s5 = classify5(case.canine_point, b, eps)
    if space is Space.FIVE:
        return s5
    if space is Space.FOUR:
        return merge_to4(s5)
    return merge_to3(s5, merge_map)


# ----------------------------------------------------------------------
# fixtures and transforms

def make_strip_case(
    offsets: Sequence[float] = (10.0, 20.0, 30.0, 40.0),
    canine_point: tuple[float, float] = (25.0, 0.0),
    angles_deg: Sequence[float] = (0.0, 0.0, 0.0, 0.0),
    crown_y: float = 25.0,
    root_y: float = -25.0,
    side: str = "right",
    case_id: str = "fixture",
) -> CanineCase:
    """Build a case whose four boundary lines sit at the given x offsets.

    Line i passes through x = offsets[i] at y = 0 and is tilted by
    angles_deg[i] from vertical (positive tilts the crown end mesially).
    offsets must increase distal-to-mesial; the mesial direction is +x.
    """
    if len(offsets) != 4 or len(angles_deg) != 4:
        raise GeometryError("need exactly four offsets and four angles")

    def pt(i: int, y: float) -> Point2D:
        return Point2D(offsets[i] + math.tan(math.radians(angles_deg[i])) * y, y)

    lateral = IncisorAnnotation(
        crown_tip=pt(1, crown_y),
        root_apex=pt(1, root_y),
        distal_crown_hoc=pt(0, crown_y),
        distal_root_hoc=pt(0, root_y),
        mesial_crown_hoc=pt(2, crown_y),
        mesial_root_hoc=pt(2, root_y),
    )
    central = IncisorAnnotation(crown_tip=pt(3, crown_y), root_apex=pt(3, root_y))
    return CanineCase(
        case_id=case_id,
        side=side,
        canine_point=Point2D(*canine_point),
        lateral=lateral,
        central=central,
    )


def transform_case(
    case: CanineCase,
    angle_deg: float = 0.0,
    scale: float = 1.0,
    translate: tuple[float, float] = (0.0, 0.0),
    mirror_x: float | None = None,
) -> CanineCase:
    """Apply mirror-then-rigid+scale to every landmark of a case.

    mirror_x reflects across the vertical axis x = mirror_x and flips the
    side tag, producing the contralateral case.
    """
    c, s = math.cos(math.radians(angle_deg)), math.sin(math.radians(angle_deg))
    tx, ty = translate

    def tp(p: Point2D | None) -> Point2D | None:
        if p is None:
            return None
        x, y = p.x, p.y
        if mirror_x is not None:
            x = 2.0 * mirror_x - x
        return Point2D(scale * (c * x - s * y) + tx, scale * (s * x + c * y) + ty)

    def ta(a: IncisorAnnotation) -> IncisorAnnotation:
        return IncisorAnnotation(
            crown_tip=tp(a.crown_tip),
            root_apex=tp(a.root_apex),
            distal_crown_hoc=tp(a.distal_crown_hoc),
            distal_root_hoc=tp(a.distal_root_hoc),
            mesial_crown_hoc=tp(a.mesial_crown_hoc),
            mesial_root_hoc=tp(a.mesial_root_hoc),
        )

    side = case.side
    if mirror_x is not None:
        side = "left" if side == "right" else "right"
    return CanineCase(
        case_id=case.case_id,
        side=side,
        canine_point=tp(case.canine_point),
        lateral=ta(case.lateral),
        central=ta(case.central),
    )


# ----------------------------------------------------------------------
# annotation file I/O


def _point_from_json(v, where: str) -> Point2D:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise GeometryError(f"{where}: expected [x, y], got {v!r}")
    return Point2D(float(v[0]), float(v[1]))


def case_from_dict(d: dict) -> CanineCase:
    lat = d["lateral"]
    cen = d["central"]
    lateral = IncisorAnnotation(
        crown_tip=_point_from_json(lat["crown_tip"], "lateral.crown_tip"),
        root_apex=_point_from_json(lat["root_apex"], "lateral.root_apex"),
        distal_crown_hoc=_point_from_json(lat["distal_crown_hoc"], "lateral.distal_crown_hoc"),
        distal_root_hoc=_point_from_json(lat["distal_root_hoc"], "lateral.distal_root_hoc"),
        mesial_crown_hoc=_point_from_json(lat["mesial_crown_hoc"], "lateral.mesial_crown_hoc"),
        mesial_root_hoc=_point_from_json(lat["mesial_root_hoc"], "lateral.mesial_root_hoc"),
    )
    central = IncisorAnnotation(
        crown_tip=_point_from_json(cen["crown_tip"], "central.crown_tip"),
        root_apex=_point_from_json(cen["root_apex"], "central.root_apex"),
    )
    return CanineCase(
        case_id=str(d["case_id"]),
        side=str(d["side"]),
        canine_point=_point_from_json(d["canine_point"], "canine_point"),
        lateral=lateral,
        central=central,
    )


def case_to_dict(case: CanineCase) -> dict:
    def xy(p: Point2D) -> list[float]:
        return [p.x, p.y]

    lat = case.lateral
    return {
        "case_id": case.case_id,
        "side": case.side,
        "canine_point": xy(case.canine_point),
        "lateral": {
            "crown_tip": xy(lat.crown_tip),
            "root_apex": xy(lat.root_apex),
            "distal_crown_hoc": xy(lat.distal_crown_hoc),
            "distal_root_hoc": xy(lat.distal_root_hoc),
            "mesial_crown_hoc": xy(lat.mesial_crown_hoc),
            "mesial_root_hoc": xy(lat.mesial_root_hoc),
        },
        "central": {
            "crown_tip": xy(case.central.crown_tip),
            "root_apex": xy(case.central.root_apex),
        },
    }


def load_annotations(path) -> list[tuple[str, list[CanineCase]]]:
    """Read annotation documents (one per radiograph) from a JSON file.

    The file may hold a single document or a list of documents:
    {"radiograph_id": ..., "cases": [...]}.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    docs = data if isinstance(data, list) else [data]
    out = []
    for doc in docs:
        rid = str(doc["radiograph_id"])
        out.append((rid, [case_from_dict(c) for c in doc["cases"]]))
    return out
