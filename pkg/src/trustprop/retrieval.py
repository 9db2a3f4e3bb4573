"""Query-time scoring: single-score strategies, BM25, rank fusion, pipeline.

Converged reputation vectors double as a retrieval index.  The direct dot
product R[j].q mixes topical alignment with accumulated magnitude; the mixed
strategies expose that trade-off explicitly; the pipeline fuses lexical and
embedding channels with reciprocal-rank fusion and reranks by log-damped
magnitude.

All rankings break ties by descending score then ascending agent id, so
every ranked list is a deterministic function of its inputs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from collections import Counter
from collections.abc import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .graph import Agent
from .propagation import ReputationState

RRF_K = 60
BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class Query:
    id: str
    text: str
    embedding: np.ndarray
    expected_domains: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "embedding", np.asarray(self.embedding, dtype=np.float64)
        )
        object.__setattr__(self, "expected_domains", frozenset(self.expected_domains))


RankedList = list[tuple[str, float]]


def rank_scores(scores: Mapping[str, float]) -> RankedList:
    """Sort id->score into a ranked list (score desc, id asc on ties)."""
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


# --- single-score strategies --------------------------------------------------


def score_dot(state: ReputationState, query: Query) -> RankedList:
    """Rank by R[j] . q — magnitude and direction in one number."""
    q = _query_vector(state, query)
    dots = state.vectors @ q
    return rank_scores({aid: float(dots[i]) for i, aid in enumerate(state.agent_ids)})


def score_mixed(
    state: ReputationState,
    query: Query,
    beta_mix: float,
    variant: str = "power",
) -> RankedList:
    """Cosine-based score with tunable magnitude influence.

    ``power``:      cos(R, q) * ||R||^beta_mix   (0 -> pure cosine, 1 -> dot)
    ``log_damped``: cos(R, q) * (1 + beta_mix * ln(1 + ||R||))

    Zero-magnitude agents score 0 under both variants.
    """
    if variant not in ("power", "log_damped"):
        raise ValidationError(f"unknown mixed variant {variant!r}")
    if beta_mix < 0:
        raise ValidationError("beta_mix must be >= 0")
    q = _query_vector(state, query)
    norms = np.linalg.norm(state.vectors, axis=1)
    dots = state.vectors @ q
    cos = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    if variant == "power":
        with np.errstate(divide="ignore"):
            factor = np.where(norms > 0, norms**beta_mix, 0.0)
    else:
        factor = 1.0 + beta_mix * np.log1p(norms)
    scores = np.where(norms > 0, cos * factor, 0.0)
    return rank_scores({aid: float(scores[i]) for i, aid in enumerate(state.agent_ids)})


def _query_vector(state: ReputationState, query: Query) -> np.ndarray:
    q = query.embedding
    if q.shape[0] != state.vectors.shape[1]:
        raise ValidationError(
            f"query dim {q.shape[0]} does not match state width {state.vectors.shape[1]}"
        )
    return q


# --- lexical channel ----------------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _TOKEN_RE.findall(text.lower())


def bm25_scores(descriptions: Mapping[str, str], query_text: str) -> RankedList:
    """Okapi BM25 (k1=1.2, b=0.75) of the query against agent descriptions.

    Agents whose description shares no term with the query are excluded
    rather than listed at score zero.
    """
    terms = tokenize(query_text)
    if not terms:
        raise ValidationError("query has no usable terms")
    docs = {aid: tokenize(text) for aid, text in descriptions.items()}
    n_docs = len(docs)
    if n_docs == 0:
        return []
    avgdl = sum(len(toks) for toks in docs.values()) / n_docs
    # document frequency per query term
    df = Counter()
    for toks in docs.values():
        seen = set(toks)
        for t in set(terms):
            if t in seen:
                df[t] += 1
    idf = {
        t: math.log(1.0 + (n_docs - df[t] + 0.5) / (df[t] + 0.5))
        for t in set(terms)
        if df[t] > 0
    }
    scores: dict[str, float] = {}
    for aid, toks in docs.items():
        if not toks:
            continue
        tf = Counter(toks)
        s = 0.0
        overlap = False
        for t in terms:
            if t not in idf or tf[t] == 0:
                continue
            overlap = True
            freq = tf[t]
            denom = freq + BM25_K1 * (1.0 - BM25_B + BM25_B * len(toks) / avgdl)
            s += idf[t] * freq * (BM25_K1 + 1.0) / denom
        if overlap:
            scores[aid] = s
    return rank_scores(scores)


# --- fusion and pipeline ------------------------------------------------------


def rrf_merge(lists: Sequence[RankedList], k: int = RRF_K) -> RankedList:
    """Reciprocal-rank fusion: score(a) = sum over lists of 1/(k + rank_a)."""
    if k <= 0:
        raise ValidationError("rrf k must be positive")
    scores: dict[str, float] = {}
    for ranked in lists:
        for rank, (aid, _) in enumerate(ranked, start=1):
            scores[aid] = scores.get(aid, 0.0) + 1.0 / (k + rank)
    return rank_scores(scores)


def pipeline_search(
    state: ReputationState,
    agents: Sequence[Agent],
    query: Query,
    k: int = RRF_K,
) -> RankedList:
    """Three-channel retrieval with rank fusion and magnitude rerank.

    Channels: BM25 over agent descriptions, cosine of the query against
    profile embeddings, cosine against unit-normalized reputation vectors.
    Fused ranks are reweighted by ln(1 + ||R[j]||), so unknown agents cannot
    win on lexical overlap alone.
    """
    by_id = {a.id: a for a in agents}
    missing = [aid for aid in state.agent_ids if aid not in by_id]
    if missing:
        raise ValidationError(f"agents missing for state ids: {missing[:3]}")
    q = _query_vector(state, query)
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        raise ValidationError("query embedding is zero")

    channels: list[RankedList] = []
    descriptions = {aid: by_id[aid].description for aid in state.agent_ids}
    channels.append(bm25_scores(descriptions, query.text))

    profile_scores = {}
    for aid in state.agent_ids:
        p = by_id[aid].profile
        profile_scores[aid] = float(p @ q) / (float(np.linalg.norm(p)) * qn)
    channels.append(rank_scores(profile_scores))

    norms = np.linalg.norm(state.vectors, axis=1)
    dots = state.vectors @ q
    cos = np.divide(dots, norms * qn, out=np.zeros_like(dots), where=norms > 0)
    channels.append(
        rank_scores({aid: float(cos[i]) for i, aid in enumerate(state.agent_ids)})
    )

    fused = rrf_merge(channels, k=k)
    norm_by_id = {aid: float(norms[i]) for i, aid in enumerate(state.agent_ids)}
    reranked = {
        aid: score * math.log1p(norm_by_id.get(aid, 0.0)) for aid, score in fused
    }
    return rank_scores(reranked)


# --- evaluation ---------------------------------------------------------------


def precision_at_k(
    ranked: RankedList,
    agents: Sequence[Agent],
    expected_domains: frozenset[str] | set[str],
    k: int = 5,
    mode: str = "strict",
) -> float:
    """Fraction of the top k whose domain matches the expectation.

    ``strict`` counts primary-domain matches only; ``multilabel`` accepts
    secondary domains too.  The divisor is always k, even for short lists.
    """
    if mode not in ("strict", "multilabel"):
        raise ValidationError(f"unknown precision mode {mode!r}")
    if k <= 0:
        raise ValidationError("k must be positive")
    if not expected_domains:
        raise ValidationError("expected_domains is empty")
    by_id = {a.id: a for a in agents}
    hits = 0
    for aid, _ in ranked[:k]:
        agent = by_id.get(aid)
        if agent is None:
            raise ValidationError(f"ranked agent {aid!r} not in agents")
        if agent.primary_domain in expected_domains:
            hits += 1
        elif mode == "multilabel" and any(
            d in expected_domains for d in agent.secondary_domains
        ):
            hits += 1
    return hits / k
