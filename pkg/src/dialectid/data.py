"""Shared data model: dialect labels, utterances, vector sets, score tables.

Every container is immutable after construction (frozen dataclasses, numpy
arrays marked read-only), so instances can be shared freely across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_LABELS = ("EGY", "LEV", "GLF", "NOR", "MSA")


class Domain(Enum):
    """Which split an utterance belongs to."""

    TRN = "TRN"
    DEV = "DEV"
    TST = "TST"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out is arr:
        out = arr.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LabelSet:
    """Ordered, duplicate-free set of dialect labels, fixed per experiment."""

    labels: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self):
        if not self.labels:
            raise ValidationError("label set must be non-empty")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("label set contains duplicates: %r" % (self.labels,))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError("unknown label %r (label set %r)" % (label, self.labels))

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label):
        return label in self.labels


@dataclass(frozen=True)
class Utterance:
    """One utterance: unique id, split membership, optional dialect label."""

    id: str
    domain: Domain
    label: Optional[str] = None


@dataclass(frozen=True)
class IVectorSet:
    """Labeled collection of fixed-dimension embedding vectors.

    `vectors` is an (n, dim) float64 matrix aligned row-for-row with
    `utterances`. The matrix is read-only; derive new sets with
    :meth:`with_vectors` or :meth:`subset` instead of mutating.
    """

    dim: int
    utterances: tuple[Utterance, ...]
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _freeze(np.atleast_2d(self.vectors))
        object.__setattr__(self, "vectors", arr)
        object.__setattr__(self, "utterances", tuple(self.utterances))
        if arr.ndim != 2:
            raise ValidationError("vectors must be a 2-D matrix")
        if arr.shape[0] != len(self.utterances):
            raise ValidationError(
                "vector count %d does not match utterance count %d"
                % (arr.shape[0], len(self.utterances))
            )
        if self.dim <= 0:
            raise ValidationError("dim must be positive")
        # a declared dim differing from the matrix width is a reportable
        # violation (see validate_dataset), not a construction error

    @classmethod
    def build(cls, utterances: Sequence[Utterance], vectors: np.ndarray) -> "IVectorSet":
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        return cls(dim=int(vectors.shape[1]), utterances=tuple(utterances), vectors=vectors)

    def __len__(self):
        return len(self.utterances)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(u.id for u in self.utterances)

    def label_array(self) -> np.ndarray:
        """Labels as an object array; None entries stay None."""
        return np.array([u.label for u in self.utterances], dtype=object)

    def with_vectors(self, vectors: np.ndarray) -> "IVectorSet":
        """Same utterances, new vectors (dimension may change)."""
        return IVectorSet.build(self.utterances, vectors)

    def subset(self, indices) -> "IVectorSet":
        indices = np.asarray(indices)
        if indices.dtype == bool:
            indices = np.flatnonzero(indices)
        utts = tuple(self.utterances[i] for i in indices)
        return IVectorSet(dim=self.dim, utterances=utts, vectors=self.vectors[indices])

    def indices_for_label(self, label: str) -> np.ndarray:
        return np.array([i for i, u in enumerate(self.utterances) if u.label == label], dtype=int)

    def concat(self, other: "IVectorSet") -> "IVectorSet":
        if other.dim != self.dim:
            raise ValidationError("cannot concatenate sets of dim %d and %d" % (self.dim, other.dim))
        return IVectorSet(
            dim=self.dim,
            utterances=self.utterances + other.utterances,
            vectors=np.vstack([self.vectors, other.vectors]),
        )


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(dataset: IVectorSet) -> ValidationReport:
    """Collect every invariant violation in `dataset`.

    Violations are data, not failures: the report lists dim mismatches,
    duplicate ids and non-finite entries with the offending utterance id,
    and is empty for a well-formed set. Idempotent and side-effect free.
    """
    violations = []
    seen = set()
    for i, utt in enumerate(dataset.utterances):
        if utt.id in seen:
            violations.append("duplicate id: %s" % utt.id)
        seen.add(utt.id)
        row = dataset.vectors[i]
        if row.shape[0] != dataset.dim:
            violations.append("dim mismatch: %s has length %d, expected %d"
                              % (utt.id, row.shape[0], dataset.dim))
        if not np.all(np.isfinite(row)):
            violations.append("non-finite entry: %s" % utt.id)
    return ValidationReport(tuple(violations))


@dataclass(frozen=True)
class ScoreTable:
    """Utterances x dialects matrix of real scores for one system.

    When `calibrated` is true every cell must already lie in [0, 1].
    """

    system_id: str
    labels: tuple[str, ...]
    utt_ids: tuple[str, ...]
    scores: np.ndarray = field(repr=False)
    calibrated: bool = False

    def __post_init__(self):
        arr = _freeze(np.atleast_2d(self.scores))
        object.__setattr__(self, "scores", arr)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "utt_ids", tuple(self.utt_ids))
        if not self.labels:
            raise ValidationError("score table needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("score table labels contain duplicates")
        if len(set(self.utt_ids)) != len(self.utt_ids):
            raise ValidationError("score table utterance ids contain duplicates")
        if arr.shape != (len(self.utt_ids), len(self.labels)):
            raise ValidationError(
                "score matrix shape %r does not match %d utterances x %d labels"
                % (arr.shape, len(self.utt_ids), len(self.labels))
            )
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValidationError("score table contains non-finite scores")
        if self.calibrated and arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValidationError("calibrated score table has scores outside [0, 1]")

    def __len__(self):
        return len(self.utt_ids)

    def row_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.utt_ids)}
