"""File formats: line-delimited JSON corpora, state snapshots, flat configs.

All floats are serialized as their shortest round-trip decimal (what
``repr`` produces), so write → read → write is byte-stable and loaded
arrays are bit-identical to the originals.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ValidationError
from .gates import (
    ConfidenceGateConfig,
    EntropyGateConfig,
    GateStack,
    KlGateConfig,
    MagnitudeGateConfig,
)
from .graph import Agent, Edge, WeightConfig
from .harness import CorpusSpec
from .operators import OperatorKind
from .propagation import PropagationConfig, ReputationState
from .retrieval import Query
from .vectorspace import center_and_normalize, fit_centering

# --- flat config --------------------------------------------------------------

# (type, default) per dotted key; bool before int because bool is an int.
CONFIG_DEFAULTS: dict[str, tuple[type, Any]] = {
    "propagation.alpha": (float, 0.85),
    "propagation.epsilon": (float, 1e-4),
    "propagation.max_iters": (int, 200),
    "propagation.beta": (float, 0.15),
    "propagation.mode": (str, "continuous"),
    "propagation.operator": (str, "projection"),
    "propagation.hybrid_gamma": (float, 0.5),
    "propagation.hybrid_mode": (str, "per_edge_select"),
    "propagation.normalize_each_iter": (bool, False),
    "propagation.clamp_floor": (bool, True),
    "propagation.couple_c_with_damping": (bool, False),
    "propagation.top_k": (int, 1),
    "gates.kl.enabled": (bool, False),
    "gates.kl.lambda": (float, 1.0),
    "gates.kl.form": (str, "cosine_proxy"),
    "gates.entropy.enabled": (bool, False),
    "gates.entropy.strength": (float, 1.0),
    "gates.magnitude.enabled": (bool, False),
    "gates.confidence.enabled": (bool, False),
    "gates.confidence.default": (float, 0.5),
    "weights.payment_multiplier": (float, 3.0),
    "weights.blind_discount": (float, 0.3),
    "weights.same_owner_discount": (float, 0.1),
    "weights.verified_flag_multiplier": (float, 6.0),
    "corpus.seed": (int, 42),
    "corpus.n_agents": (int, 50),
    "corpus.hubs": (int, 5),
    "corpus.dormant": (int, 4),
    "corpus.malicious": (int, 2),
    "corpus.specialists": (int, 6),
    "corpus.labeled_edges": (int, 70),
    "corpus.payment_edges": (int, 14),
    "corpus.blind_edges": (int, 612),
    "corpus.n_queries": (int, 10),
    "corpus.cross_domain_queries": (int, 2),
    "corpus.embedding_dim": (int, 64),
    "corpus.exogenous_scale": (float, 0.5),
    "corpus.anisotropy": (float, 0.0),
    "retrieval.strategy": (str, "dot"),
    "retrieval.beta_mix": (float, 0.5),
    "retrieval.variant": (str, "power"),
    "retrieval.k": (int, 5),
    "attack.scenario": (str, "cross_domain_sybil"),
    "attack.flag_severity": (float, 0.95),
}


def _coerce(key: str, raw: str) -> Any:
    typ, _ = CONFIG_DEFAULTS[key]
    if typ is bool:
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValidationError(f"config key {key!r}: expected boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError as exc:
        raise ValidationError(f"config key {key!r}: {exc}") from exc


def parse_config(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines; unknown keys are errors, comments allowed."""
    cfg = {key: default for key, (_, default) in CONFIG_DEFAULTS.items()}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValidationError(f"config line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in CONFIG_DEFAULTS:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        cfg[key] = _coerce(key, value.strip())
    return cfg


def load_config(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {key: default for key, (_, default) in CONFIG_DEFAULTS.items()}
    return parse_config(Path(path).read_text())


def config_digest(cfg: Mapping[str, Any]) -> str:
    """Stable sha256 over the fully resolved config."""
    lines = [f"{key} = {cfg[key]!r}" for key in sorted(cfg)]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def propagation_config(cfg: Mapping[str, Any]) -> PropagationConfig:
    op_name = cfg["propagation.operator"]
    if op_name == "hybrid":
        operator = OperatorKind(
            "hybrid",
            hybrid_gamma=cfg["propagation.hybrid_gamma"],
            hybrid_mode=cfg["propagation.hybrid_mode"],
        )
    else:
        operator = OperatorKind.from_name(op_name)
    gates = GateStack(
        kl=KlGateConfig(
            enabled=cfg["gates.kl.enabled"],
            lam=cfg["gates.kl.lambda"],
            form=cfg["gates.kl.form"],
        ),
        entropy=EntropyGateConfig(
            enabled=cfg["gates.entropy.enabled"],
            strength=cfg["gates.entropy.strength"],
        ),
        magnitude_ratio=MagnitudeGateConfig(enabled=cfg["gates.magnitude.enabled"]),
        confidence=ConfidenceGateConfig(
            enabled=cfg["gates.confidence.enabled"],
            default_confidence=cfg["gates.confidence.default"],
        ),
    )
    return PropagationConfig(
        alpha=cfg["propagation.alpha"],
        epsilon=cfg["propagation.epsilon"],
        max_iters=cfg["propagation.max_iters"],
        beta=cfg["propagation.beta"],
        mode=cfg["propagation.mode"],
        operator=operator,
        gates=gates,
        normalize_each_iter=cfg["propagation.normalize_each_iter"],
        clamp_floor=cfg["propagation.clamp_floor"],
        couple_c_with_damping=cfg["propagation.couple_c_with_damping"],
    )


def weight_config(cfg: Mapping[str, Any]) -> WeightConfig:
    return WeightConfig(
        payment_multiplier=cfg["weights.payment_multiplier"],
        blind_discount=cfg["weights.blind_discount"],
        same_owner_discount=cfg["weights.same_owner_discount"],
        verified_flag_multiplier=cfg["weights.verified_flag_multiplier"],
    )


def corpus_spec(cfg: Mapping[str, Any]) -> CorpusSpec:
    n = cfg["corpus.n_agents"]
    hubs = cfg["corpus.hubs"]
    dormant = cfg["corpus.dormant"]
    malicious = cfg["corpus.malicious"]
    active = n - hubs - dormant - malicious
    if active < 0:
        raise ValidationError("corpus archetype counts exceed corpus.n_agents")
    return CorpusSpec(
        seed=cfg["corpus.seed"],
        n_agents=n,
        archetype_counts={
            "hub": hubs,
            "active": active,
            "dormant": dormant,
            "malicious": malicious,
        },
        cross_domain_specialists=cfg["corpus.specialists"],
        labeled_edges=cfg["corpus.labeled_edges"],
        payment_edges=cfg["corpus.payment_edges"],
        blind_edges=cfg["corpus.blind_edges"],
        n_queries=cfg["corpus.n_queries"],
        cross_domain_queries=cfg["corpus.cross_domain_queries"],
        embedding_dim=cfg["corpus.embedding_dim"],
        exogenous_scale=cfg["corpus.exogenous_scale"],
        anisotropy=cfg["corpus.anisotropy"],
    )


# --- JSONL corpora ------------------------------------------------------------


def _vec(arr: np.ndarray) -> list[float]:
    return [float(x) for x in arr]


def _dump_line(record: dict[str, Any]) -> str:
    return json.dumps(record, separators=(", ", ": "))


def agents_to_jsonl(agents: Iterable[Agent]) -> str:
    lines = []
    for a in agents:
        record: dict[str, Any] = {
            "id": a.id,
            "primary_domain": a.primary_domain,
            "secondary_domains": list(a.secondary_domains),
            "profile": _vec(a.profile),
            "teleport": _vec(a.teleport),
            "exogenous": _vec(a.exogenous),
            "archetype": a.archetype,
        }
        if a.owner_key is not None:
            record["owner_key"] = a.owner_key
        if a.description:
            record["description"] = a.description
        lines.append(_dump_line(record))
    return "\n".join(lines) + "\n"


def _records(text: str, what: str) -> Iterator[tuple[int, dict[str, Any]]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{what} line {lineno}: invalid json ({exc})") from exc


def agents_from_jsonl(text: str) -> list[Agent]:
    agents = []
    for lineno, rec in _records(text, "agents"):
        try:
            agents.append(
                Agent(
                    id=rec["id"],
                    primary_domain=rec["primary_domain"],
                    secondary_domains=tuple(rec.get("secondary_domains", ())),
                    profile=np.asarray(rec["profile"], dtype=float),
                    teleport=np.asarray(rec["teleport"], dtype=float),
                    exogenous=np.asarray(rec["exogenous"], dtype=float),
                    archetype=rec.get("archetype", "active"),
                    owner_key=rec.get("owner_key"),
                    description=rec.get("description", ""),
                )
            )
        except KeyError as exc:
            raise ValidationError(f"agents line {lineno}: missing field {exc}") from exc
    return agents


def edges_to_jsonl(edges: Iterable[Edge]) -> str:
    lines = []
    for e in edges:
        record: dict[str, Any] = {
            "sender": e.sender,
            "receiver": e.receiver,
            "kind": e.kind,
            "base_weight": e.base_weight,
        }
        if e.content is not None:
            record["content"] = _vec(e.content)
        record["payment"] = e.payment
        if e.kind == "flag":
            record["verified"] = e.verified
            record["severity"] = e.severity
        if e.confidence is not None:
            record["confidence"] = e.confidence
        lines.append(_dump_line(record))
    return "\n".join(lines) + "\n"


def edges_from_jsonl(text: str) -> list[Edge]:
    edges = []
    for lineno, rec in _records(text, "edges"):
        content = rec.get("content")
        try:
            kind = rec["kind"]
            edges.append(
                Edge(
                    sender=rec["sender"],
                    receiver=rec["receiver"],
                    kind=kind,
                    base_weight=rec.get("base_weight", 1.0),
                    content=None if content is None else np.asarray(content, dtype=float),
                    payment=rec.get("payment", False),
                    verified=rec.get("verified", False),
                    severity=rec.get("severity") if kind == "flag" else None,
                    confidence=rec.get("confidence"),
                )
            )
        except KeyError as exc:
            raise ValidationError(f"edges line {lineno}: missing field {exc}") from exc
    return edges


def queries_to_jsonl(queries: Iterable[Query]) -> str:
    lines = []
    for q in queries:
        record = {
            "id": q.id,
            "text": q.text,
            "embedding": _vec(q.embedding),
            "expected_domains": sorted(q.expected_domains),
        }
        lines.append(_dump_line(record))
    return "\n".join(lines) + "\n"


def queries_from_jsonl(text: str) -> list[Query]:
    queries = []
    for lineno, rec in _records(text, "queries"):
        try:
            queries.append(
                Query(
                    id=rec["id"],
                    text=rec["text"],
                    embedding=np.asarray(rec["embedding"], dtype=float),
                    expected_domains=frozenset(rec.get("expected_domains", ())),
                )
            )
        except KeyError as exc:
            raise ValidationError(f"queries line {lineno}: missing field {exc}") from exc
    return queries


def center_corpus(
    agents: Sequence[Agent], edges: Sequence[Edge], queries: Sequence[Query] = ()
) -> tuple[list[Agent], list[Edge], list[Query], np.ndarray]:
    """Fit a mean over every embedding in the files and re-center them all.

    Unit-norm fields (profiles, contents, query embeddings) are centered
    and renormalized; magnitude-carrying fields (teleport, exogenous) keep
    their norms but take the direction of their centered selves.
    Returns the transformed records plus the fitted mean.
    """
    cloud = [a.profile for a in agents]
    cloud += [e.content for e in edges if e.content is not None]
    cloud += [q.embedding for q in queries]
    if not cloud:
        raise ValidationError("nothing to center: no embeddings in the input files")
    model = fit_centering(cloud)

    def _recenter_scaled(v: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            return v
        return norm * center_and_normalize(model, v)

    new_agents = [
        replace(
            a,
            profile=center_and_normalize(model, a.profile),
            teleport=_recenter_scaled(a.teleport),
            exogenous=_recenter_scaled(a.exogenous),
        )
        for a in agents
    ]
    new_edges = [
        e if e.content is None else replace(e, content=center_and_normalize(model, e.content))
        for e in edges
    ]
    new_queries = [
        replace(q, embedding=center_and_normalize(model, q.embedding)) for q in queries
    ]
    return new_agents, new_edges, new_queries, model.mean


# --- snapshots ----------------------------------------------------------------


def snapshot_to_json(
    state: ReputationState, digest: str, mean: np.ndarray | None = None
) -> str:
    n, width = state.vectors.shape
    width_key = "E" if state.mode == "continuous" else "D"
    obj = {
        "dims": {"N": n, width_key: width},
        "mean": _vec(mean) if mean is not None else [],
        "agents": [
            {"id": aid, "r": _vec(state.vectors[i])}
            for i, aid in enumerate(state.agent_ids)
        ],
        "config_digest": digest,
        "mode": state.mode,
        "iterations": state.iterations,
        "converged": state.converged,
        "residuals": list(state.residuals),
    }
    return json.dumps(obj, indent=2) + "\n"


def snapshot_from_json(text: str) -> tuple[ReputationState, str, np.ndarray]:
    obj = json.loads(text)
    agents = obj["agents"]
    ids = tuple(rec["id"] for rec in agents)
    vectors = np.asarray([rec["r"] for rec in agents], dtype=float)
    dims = obj["dims"]
    width_key = "E" if "E" in dims else "D"
    if vectors.shape != (dims["N"], dims[width_key]):
        raise ValidationError("snapshot dims disagree with agent rows")
    state = ReputationState(
        vectors=vectors,
        agent_ids=ids,
        mode=obj.get("mode", "continuous"),
        iterations=obj.get("iterations", 0),
        residuals=tuple(obj.get("residuals", ())),
        converged=obj.get("converged", False),
    )
    return state, obj.get("config_digest", ""), np.asarray(obj.get("mean", []), dtype=float)


def residuals_to_csv(residuals: Sequence[float]) -> str:
    lines = ["iteration,residual"]
    for i, r in enumerate(residuals, start=1):
        lines.append(f"{i},{r!r}")
    return "\n".join(lines) + "\n"
