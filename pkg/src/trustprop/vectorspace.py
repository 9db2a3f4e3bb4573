"""Embedding-space utilities: mean centering, cosine geometry, synthetic vectors.

Raw embedding corpora tend to occupy a narrow cone (all pairwise cosines high),
which destroys topical discrimination downstream.  The remedy used throughout
this package is simple mean centering fit once per corpus snapshot: subtract
the corpus mean, then renormalize to unit length.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateVectorError, ValidationError

# Norm below which a centered vector is considered to have no usable direction.
DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class CenteringModel:
    """Mean vector of a corpus snapshot, fit once and reused everywhere."""

    mean: np.ndarray
    sample_count: int

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def fit_centering(corpus: Iterable[np.ndarray]) -> CenteringModel:
    """Fit a centering model (arithmetic mean) over a corpus of embeddings.

    The corpus must be non-empty and dimensionally consistent.
    """
    vectors = [np.asarray(v, dtype=np.float64) for v in corpus]
    if not vectors:
        raise ValidationError("centering corpus is empty")
    dim = vectors[0].shape
    if len(dim) != 1:
        raise ValidationError("embeddings must be one-dimensional")
    for v in vectors:
        if v.shape != dim:
            raise ValidationError(
                f"dimension mismatch in centering corpus: {v.shape} != {dim}"
            )
    stacked = np.vstack(vectors)
    return CenteringModel(mean=stacked.mean(axis=0), sample_count=len(vectors))


def center_and_normalize(model: CenteringModel, v: np.ndarray) -> np.ndarray:
    """Subtract the corpus mean and rescale to unit length.

    Raises DegenerateVectorError if the centered vector has no direction left
    (norm below 1e-12); silently emitting a zero would poison every cosine
    computed from it downstream.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != model.mean.shape:
        raise ValidationError(
            f"vector dim {v.shape} does not match centering model {model.mean.shape}"
        )
    shifted = v - model.mean
    norm = float(np.linalg.norm(shifted))
    if norm < DEGENERATE_NORM:
        raise DegenerateVectorError(
            "vector is degenerate after centering (norm < 1e-12)"
        )
    return shifted / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against float drift."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"cosine shape mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cosine undefined for zero-norm input")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


# --- synthetic embedding space ------------------------------------------------

# Pairwise |cosine| ceiling the centroid family is orthogonalized down to.
CENTROID_MAX_COSINE = 0.2


def build_centroids(
    domains: Sequence[str],
    dim: int,
    seed: int,
    max_cosine: float = CENTROID_MAX_COSINE,
) -> dict[str, np.ndarray]:
    """Seeded near-orthogonal unit centroids, one per domain label.

    Random unit vectors are partially orthogonalized by iterative projection
    removal until every distinct pair satisfies |cosine| <= max_cosine.
    Deterministic for fixed (domains, dim, seed).
    """
    labels = list(domains)
    if len(set(labels)) != len(labels):
        raise ValidationError("duplicate domain labels")
    if not labels:
        raise ValidationError("no domain labels given")
    if len(labels) > dim:
        raise ValidationError(
            f"cannot fit {len(labels)} near-orthogonal centroids in dim {dim}"
        )
    rng = np.random.default_rng([seed, 0xC3])
    vecs = rng.standard_normal((len(labels), dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    # Leave a small margin under the contract so float drift cannot breach it.
    target = max_cosine - 0.02
    for _ in range(500):
        gram = vecs @ vecs.T
        np.fill_diagonal(gram, 0.0)
        if float(np.abs(gram).max()) <= target:
            break
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                c = float(vecs[i] @ vecs[j])
                if abs(c) > target:
                    vecs[j] = vecs[j] - 0.5 * c * vecs[i]
                    vecs[j] /= np.linalg.norm(vecs[j])
    gram = vecs @ vecs.T
    np.fill_diagonal(gram, 0.0)
    if float(np.abs(gram).max()) > max_cosine:
        raise ValidationError("centroid orthogonalization did not converge")
    return {label: vecs[k] for k, label in enumerate(labels)}


def synthetic_embedding(
    centroids: Mapping[str, np.ndarray],
    seed: int,
    domain_mix: Mapping[str, float],
    noise: float,
) -> np.ndarray:
    """Deterministic unit vector near a weighted blend of domain centroids.

    The blend is the normalized weighted sum of the named centroids; `noise`
    scales a seeded isotropic perturbation added before the final
    renormalization.
    """
    if noise < 0:
        raise ValidationError("noise must be >= 0")
    items = sorted(domain_mix.items())
    if not items or all(w == 0 for _, w in items):
        raise ValidationError("domain_mix has no mass")
    dim = None
    base = None
    for label, weight in items:
        if label not in centroids:
            raise ValidationError(f"unknown domain label {label!r}")
        if weight < 0:
            raise ValidationError("domain_mix weights must be >= 0")
        c = np.asarray(centroids[label], dtype=np.float64)
        if base is None:
            dim = c.shape[0]
            base = np.zeros(dim)
        base = base + weight * c
    norm = float(np.linalg.norm(base))
    if norm < DEGENERATE_NORM:
        raise ValidationError("domain_mix cancels to zero")
    base = base / norm
    if noise > 0.0:
        rng = np.random.default_rng([seed, 0x5E])
        g = rng.standard_normal(dim)
        g /= np.linalg.norm(g)
        base = base + noise * g
        base /= np.linalg.norm(base)
    return base
