"""Dialect mean models, interpolation, cosine scoring and S-norm.

A dialect model is the unit-normalized mean of the (already whitened and
length-normalized) vectors of one dialect. Two model sets fit on an
out-of-domain and an in-domain split can be blended per dialect with a
weight gamma in [0, 1]; both the averaged and the blended vectors are
re-normalized so cosine scoring reduces to a dot product.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import DEFAULT_LABELS, IVectorSet, ScoreTable
from .errors import NumericError, ValidationError

DEFAULT_GAMMA = 0.91


@dataclass(frozen=True)
class ModelProvenance:
    kind: str  # "averaged" | "interpolated"
    domain: Optional[str] = None
    gamma: Optional[float] = None


@dataclass(frozen=True)
class DialectModelSet:
    """One unit-norm model vector per dialect label."""

    labels: tuple[str, ...]
    models: np.ndarray = field(repr=False)  # (K, d), unit rows
    provenance: ModelProvenance = ModelProvenance("averaged")
    n_per_dialect: tuple[int, ...] = ()

    def __post_init__(self):
        models = np.ascontiguousarray(np.atleast_2d(self.models), dtype=np.float64)
        models.flags.writeable = False
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "n_per_dialect", tuple(self.n_per_dialect))
        if models.shape[0] != len(self.labels):
            raise ValidationError("model count %d does not match %d labels"
                                  % (models.shape[0], len(self.labels)))
        norms = np.linalg.norm(models, axis=1)
        if models.size and not np.allclose(norms, 1.0, atol=1e-9):
            raise ValidationError("dialect models must be unit-normalized")
        g = self.provenance.gamma
        if g is not None and not 0.0 <= g <= 1.0:
            raise ValidationError("gamma must lie in [0, 1], got %g" % g)

    @property
    def dim(self) -> int:
        return self.models.shape[1]


def fit_dialect_means(
    data: IVectorSet,
    labels: Sequence[str] = DEFAULT_LABELS,
    domain_desc: str = "",
) -> DialectModelSet:
    """Average each dialect's vectors and unit-normalize the result.

    Every label in `labels` must be present in `data`; the caller is
    expected to have post-processed (whitened + length-normalized) the
    vectors already.
    """
    models = []
    counts = []
    for label in labels:
        idx = data.indices_for_label(label)
        if idx.size == 0:
            raise ValidationError("no utterances for dialect %r" % label)
        mean = data.vectors[idx].mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            raise NumericError("dialect %r has a zero mean vector" % label)
        models.append(mean / norm)
        counts.append(int(idx.size))
    return DialectModelSet(
        labels=tuple(labels),
        models=np.array(models),
        provenance=ModelProvenance("averaged", domain=domain_desc or None),
        n_per_dialect=tuple(counts),
    )


def interpolate_models(
    trn: DialectModelSet, dev: DialectModelSet, gamma: float = DEFAULT_GAMMA
) -> DialectModelSet:
    """Blend per dialect: (1 - gamma) * trn + gamma * dev, then re-normalize."""
    if trn.labels != dev.labels:
        raise ValidationError("label sets differ: %r vs %r" % (trn.labels, dev.labels))
    if trn.dim != dev.dim:
        raise ValidationError("model dims differ: %d vs %d" % (trn.dim, dev.dim))
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError("gamma must lie in [0, 1], got %g" % gamma)
    mixed = (1.0 - gamma) * trn.models + gamma * dev.models
    norms = np.linalg.norm(mixed, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise NumericError("interpolation produced a zero model vector")
    return DialectModelSet(
        labels=trn.labels,
        models=mixed / norms,
        provenance=ModelProvenance("interpolated", gamma=float(gamma)),
        n_per_dialect=tuple(a + b for a, b in zip(trn.n_per_dialect, dev.n_per_dialect))
        if trn.n_per_dialect and dev.n_per_dialect else (),
    )


def cds_score(models: DialectModelSet, v: np.ndarray) -> np.ndarray:
    """Cosine similarity of v against every model; (K,) for one vector, (n, K) for a batch."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != models.dim:
        raise ValidationError("vector dim %d does not match model dim %d"
                              % (v.shape[-1], models.dim))
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise NumericError("cannot score a zero vector")
    return (v / norms) @ models.models.T


def snorm_scores(
    raw: ScoreTable,
    cohort_scores_per_model: Sequence[np.ndarray],
    cohort_scores_per_test: Sequence[np.ndarray],
) -> ScoreTable:
    """Symmetric score normalization.

    s' = 0.5 * ((s - mu_model)/sigma_model + (s - mu_test)/sigma_test),
    with per-model cohort statistics aligned to the table's labels and
    per-test statistics aligned to its rows.
    """
    if len(cohort_scores_per_model) != len(raw.labels):
        raise ValidationError("need one cohort score list per model/label")
    if len(cohort_scores_per_test) != len(raw.utt_ids):
        raise ValidationError("need one cohort score list per test utterance")

    def stats(scores):
        arr = np.asarray(scores, dtype=np.float64)
        mu = float(arr.mean())
        sigma = float(arr.std())
        if sigma == 0.0:
            raise NumericError("degenerate cohort: zero standard deviation")
        return mu, sigma

    model_stats = [stats(c) for c in cohort_scores_per_model]
    test_stats = [stats(c) for c in cohort_scores_per_test]
    out = np.empty_like(raw.scores)
    for i, (mu_t, sd_t) in enumerate(test_stats):
        for j, (mu_m, sd_m) in enumerate(model_stats):
            s = raw.scores[i, j]
            out[i, j] = 0.5 * ((s - mu_m) / sd_m + (s - mu_t) / sd_t)
    return ScoreTable(
        system_id=raw.system_id + "+snorm",
        labels=raw.labels,
        utt_ids=raw.utt_ids,
        scores=out,
        calibrated=False,
    )


def classify(scores: np.ndarray, labels: Sequence[str]) -> str:
    """Argmax label; exact ties go to the earliest label in the configured order."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.shape[0] == 0:
        raise ValidationError("scores must be a non-empty vector")
    if scores.shape[0] != len(labels):
        raise ValidationError("got %d scores for %d labels" % (scores.shape[0], len(labels)))
    return tuple(labels)[int(np.argmax(scores))]


def classify_rows(table: ScoreTable) -> dict[str, str]:
    """Per-row argmax decisions for a whole table."""
    return {
        utt: tuple(table.labels)[int(np.argmax(table.scores[i]))]
        for i, utt in enumerate(table.utt_ids)
    }
