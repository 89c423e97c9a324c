"""Criticism and adaptation of imprecise subjective probability assessments."""

from subjprob.model import (
    AssessmentTable,
    CaseRecord,
    DirichletCell,
    IntervalAssessment,
    QuestionSchema,
    validate_table,
)

__version__ = "0.1.0"

__all__ = [
    "AssessmentTable",
    "CaseRecord",
    "DirichletCell",
    "IntervalAssessment",
    "QuestionSchema",
    "validate_table",
    "__version__",
]
