"""Desk-scale laboratory for sector classification of unerupted maxillary canines.

Submodules: geometry (boundary construction and sector labels),
agreement (kappa statistics and study tables), metrics (confusion-matrix
evaluation), distill (teacher-student training on synthetic data),
study (two-phase rating protocol), server/cli (HTTP and command-line
interfaces).
"""

from . import agreement, distill, errors, geometry, metrics, study
from .agreement import (
    KappaComparison,
    KappaResult,
    RatingRecord,
    cohen_kappa,
    compare_kappas,
    fleiss_kappa,
    kappa_sample_size,
    label_agreement,
    study_tables,
)
from .distill import (
    DistillConfig,
    MlpModel,
    Sample,
    SplitSpec,
    distill_student,
    gradient_check,
    kd_loss,
    one_hot,
    split,
    synth_generate,
    train_student_baseline,
    train_teacher,
)
from .errors import CanineLabError
from .geometry import (
    CanineCase,
    IncisorAnnotation,
    Line2D,
    MergeMap3,
    Point2D,
    SectorBoundarySet,
    SectorLabel,
    Space,
    build_boundaries,
    classify,
    classify5,
    merge_to3,
    merge_to4,
)
from .metrics import ConfusionMatrix, MetricReport, confusion, evaluate
from .study import Study, StudyStore, create_study, next_item, record_rating, study_report

__version__ = "0.1.0"
