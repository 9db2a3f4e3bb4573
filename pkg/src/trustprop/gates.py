"""Multiplicative gates that attenuate transfers by topical (mis)alignment.

Each gate maps evidence about one edge to a factor in [0, 1]; enabled gates
multiply together.  Because every factor is bounded by 1, gating can only
shrink a transfer, so the contraction argument for the damped iteration is
untouched.

The alignment gate has two forms: a softmax form comparing discrete topic
distributions via KL divergence, and a cosine proxy exp(-lambda * (1 - cos^2))
that works directly on embedding vectors and is the default in the continuous
engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from collections.abc import Mapping

import numpy as np

from .errors import ValidationError

DIST_TOL = 1e-9
SMOOTHING = 1e-6


@dataclass(frozen=True)
class TopicDistribution:
    """A probability distribution over domain labels."""

    probs: Mapping[str, float]

    def __post_init__(self) -> None:
        vals = np.asarray(list(self.probs.values()), dtype=np.float64)
        if vals.size == 0:
            raise ValidationError("topic distribution is empty")
        if (vals < 0).any():
            raise ValidationError("topic distribution entries must be >= 0")
        if abs(float(vals.sum()) - 1.0) > DIST_TOL:
            raise ValidationError("topic distribution must sum to 1")

    def as_array(self, domains: tuple[str, ...]) -> np.ndarray:
        return np.asarray([self.probs.get(d, 0.0) for d in domains])


def _as_dist(p, name: str) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-d distribution")
    if (arr < 0).any():
        raise ValidationError(f"{name} entries must be >= 0")
    if abs(float(arr.sum()) - 1.0) > DIST_TOL:
        raise ValidationError(f"{name} must sum to 1")
    return arr


def entropy(p) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    arr = _as_dist(p, "p")
    nz = arr[arr > 0]
    return float(-(nz * np.log(nz)).sum())


def kl_divergence(p_int, p_rep) -> float:
    """KL(p_int || p_rep) in nats; rejects unsmoothed zeros in the support."""
    pi = _as_dist(p_int, "p_int")
    pr = _as_dist(p_rep, "p_rep")
    if pi.shape != pr.shape:
        raise ValidationError("distributions must share support size")
    mask = pi > 0
    if (pr[mask] == 0).any():
        raise ValidationError(
            "p_rep has a zero where p_int has mass; smooth before comparing"
        )
    return float((pi[mask] * np.log(pi[mask] / pr[mask])).sum())


# --- individual gates ---------------------------------------------------------


def kl_gate_softmax(p_int, p_rep, lam: float = 1.0) -> float:
    """exp(-lambda * KL(p_int || p_rep)): 1.0 at perfect agreement."""
    if lam < 0:
        raise ValidationError("lambda must be >= 0")
    return math.exp(-lam * kl_divergence(p_int, p_rep))


def kl_gate_cosine(r: np.ndarray, e: np.ndarray, lam: float = 1.0) -> float:
    """Cosine proxy for the alignment gate: exp(-lambda * (1 - cos^2)).

    A zero-reputation sender has nothing to misalign, so the gate passes 1.0.
    """
    if lam < 0:
        raise ValidationError("lambda must be >= 0")
    r = np.asarray(r, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    norm = float(np.linalg.norm(r))
    if norm == 0.0:
        return 1.0
    c = float(np.clip(float(r @ e) / (norm * float(np.linalg.norm(e))), -1.0, 1.0))
    return math.exp(-lam * (1.0 - c * c))


def entropy_gate(p_int, strength: float = 1.0) -> float:
    """exp(-strength * H(p_int)): sharply-focused interactions pass more."""
    if strength < 0:
        raise ValidationError("strength must be >= 0")
    return math.exp(-strength * entropy(p_int))


def magnitude_ratio_gate(r: np.ndarray, e: np.ndarray) -> float:
    """Fraction of reputation magnitude aligned with the edge: max(0, R.e)/||R||."""
    r = np.asarray(r, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    norm = float(np.linalg.norm(r))
    if norm == 0.0:
        return 1.0
    return max(0.0, float(r @ e)) / norm


def confidence_gate(confidence: float) -> float:
    """Pass-through gate for an exogenous confidence score."""
    c = float(confidence)
    if not 0.0 <= c <= 1.0:
        raise ValidationError("confidence must lie in [0, 1]")
    return c


# --- topic distributions from embeddings -------------------------------------


def topic_distribution(
    v: np.ndarray,
    centroids: np.ndarray,
    smoothing: float = SMOOTHING,
) -> np.ndarray:
    """Softmax over cosine similarities to domain centroids, smoothed."""
    return topic_distribution_batch(np.asarray(v)[None, :], centroids, smoothing)[0]


def topic_distribution_batch(
    vs: np.ndarray,
    centroids: np.ndarray,
    smoothing: float = SMOOTHING,
) -> np.ndarray:
    """(m, E) vectors -> (m, D) smoothed softmax-over-cosine distributions."""
    vs = np.asarray(vs, dtype=np.float64)
    cents = np.asarray(centroids, dtype=np.float64)
    norms = np.linalg.norm(vs, axis=1, keepdims=True)
    cnorms = np.linalg.norm(cents, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    cos = (vs @ cents.T) / (safe * cnorms[None, :])
    cos = np.where(norms > 0, cos, 0.0)  # zero vector -> uniform
    z = np.exp(cos - cos.max(axis=1, keepdims=True))
    p = z / z.sum(axis=1, keepdims=True)
    if smoothing > 0:
        p = (p + smoothing) / (1.0 + p.shape[1] * smoothing)
    return p


# --- gate stack ---------------------------------------------------------------


@dataclass(frozen=True)
class KlGateConfig:
    enabled: bool = False
    lam: float = 1.0
    form: str = "cosine_proxy"  # or "softmax"

    def __post_init__(self) -> None:
        if self.form not in ("cosine_proxy", "softmax"):
            raise ValidationError(f"unknown kl gate form {self.form!r}")
        if self.lam < 0:
            raise ValidationError("lambda must be >= 0")


@dataclass(frozen=True)
class EntropyGateConfig:
    enabled: bool = False
    strength: float = 1.0

    def __post_init__(self) -> None:
        if self.strength < 0:
            raise ValidationError("strength must be >= 0")


@dataclass(frozen=True)
class MagnitudeGateConfig:
    enabled: bool = False


@dataclass(frozen=True)
class ConfidenceGateConfig:
    enabled: bool = False
    default_confidence: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.default_confidence <= 1.0:
            raise ValidationError("default_confidence must lie in [0, 1]")


@dataclass(frozen=True)
class GateStack:
    """Which gates are enabled, with their parameters.  All off by default."""

    kl: KlGateConfig = field(default_factory=KlGateConfig)
    entropy: EntropyGateConfig = field(default_factory=EntropyGateConfig)
    magnitude_ratio: MagnitudeGateConfig = field(default_factory=MagnitudeGateConfig)
    confidence: ConfidenceGateConfig = field(default_factory=ConfidenceGateConfig)

    @property
    def any_enabled(self) -> bool:
        return (
            self.kl.enabled
            or self.entropy.enabled
            or self.magnitude_ratio.enabled
            or self.confidence.enabled
        )

    def needs_distributions(self) -> bool:
        return self.entropy.enabled or (self.kl.enabled and self.kl.form == "softmax")


def apply_stack(
    stack: GateStack,
    r: np.ndarray,
    e: np.ndarray,
    p_int=None,
    p_rep=None,
    confidence: float | None = None,
) -> float:
    """Product of all enabled gate values for one edge; 1.0 if none enabled.

    Raises if an enabled gate is missing its required input.
    """
    value = 1.0
    if stack.kl.enabled:
        if stack.kl.form == "cosine_proxy":
            value *= kl_gate_cosine(r, e, stack.kl.lam)
        else:
            if p_int is None or p_rep is None:
                raise ValidationError("softmax kl gate requires p_int and p_rep")
            value *= kl_gate_softmax(p_int, p_rep, stack.kl.lam)
    if stack.entropy.enabled:
        if p_int is None:
            raise ValidationError("entropy gate requires p_int")
        value *= entropy_gate(p_int, stack.entropy.strength)
    if stack.magnitude_ratio.enabled:
        value *= magnitude_ratio_gate(r, e)
    if stack.confidence.enabled:
        if confidence is None:
            raise ValidationError("confidence gate requires a confidence value")
        value *= confidence_gate(confidence)
    return value


def stack_batch(
    stack: GateStack,
    r: np.ndarray,
    e: np.ndarray,
    confidence: np.ndarray | None = None,
    p_int: np.ndarray | None = None,
    p_rep: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized apply_stack over m edges; r, e are (m, E)."""
    m = r.shape[0]
    value = np.ones(m)
    if stack.kl.enabled:
        if stack.kl.form == "cosine_proxy":
            norms = np.linalg.norm(r, axis=1)
            dots = np.einsum("ij,ij->i", r, e)
            cos = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
            cos = np.clip(cos, -1.0, 1.0)
            g = np.exp(-stack.kl.lam * (1.0 - cos * cos))
            value *= np.where(norms > 0, g, 1.0)
        else:
            if p_int is None or p_rep is None:
                raise ValidationError("softmax kl gate requires p_int and p_rep")
            ratio = np.log(p_int / p_rep, out=np.zeros_like(p_int), where=p_int > 0)
            kl = (np.where(p_int > 0, p_int, 0.0) * ratio).sum(axis=1)
            value *= np.exp(-stack.kl.lam * kl)
    if stack.entropy.enabled:
        if p_int is None:
            raise ValidationError("entropy gate requires p_int")
        logs = np.log(p_int, out=np.zeros_like(p_int), where=p_int > 0)
        h = -(np.where(p_int > 0, p_int, 0.0) * logs).sum(axis=1)
        value *= np.exp(-stack.entropy.strength * h)
    if stack.magnitude_ratio.enabled:
        norms = np.linalg.norm(r, axis=1)
        dots = np.einsum("ij,ij->i", r, e)
        ratio = np.divide(
            np.maximum(dots, 0.0), norms, out=np.zeros_like(dots), where=norms > 0
        )
        value *= np.where(norms > 0, ratio, 1.0)
    if stack.confidence.enabled:
        if confidence is None:
            raise ValidationError("confidence gate requires per-edge confidences")
        value *= confidence
    return value
