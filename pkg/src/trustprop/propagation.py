"""Damped fixed-point engines over the normalized graph.

Continuous form (one row per agent, E-dimensional):

    R'[j] = alpha * sum_i w(i->j) * gate_ij * f(R[i], e_ij) + (1 - alpha) * T[j] + C[j]

starting from R0 = T + C.  Because the transfer f is non-expansive, the
gates are bounded by 1 and each sender's weights sum to at most 1, the map
contracts with rate alpha and the iteration converges to a unique fixed
point from any start.

Discrete form (one row per agent, D domain buckets): per-domain transition
matrices M_d drive a linear damped iteration per bucket; flag edges enter as
a subtracted beta-scaled term, stable whenever alpha * (1 + beta) < 1.

The residual metric everywhere is the max over agents of the L2 change of
that agent's row — stricter than averaging, so convergence claims hold for
every agent individually.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from collections.abc import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .gates import GateStack, stack_batch, topic_distribution_batch
from .graph import Agent, NormalizedGraph
from .operators import OperatorKind, transfer_batch

logger = logging.getLogger(__name__)

MODES = ("continuous", "discrete")


@dataclass(frozen=True)
class PropagationConfig:
    alpha: float = 0.85
    epsilon: float = 1e-4
    max_iters: int = 200
    beta: float = 0.15
    mode: str = "continuous"
    operator: OperatorKind = field(default_factory=lambda: OperatorKind("projection"))
    gates: GateStack = field(default_factory=GateStack)
    normalize_each_iter: bool = False
    clamp_floor: bool = True
    couple_c_with_damping: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if self.beta < 0:
            raise ValidationError("beta must be >= 0")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")

    def check_negative_stability(self) -> None:
        """Negative-edge runs require alpha * (1 + beta) < 1."""
        if self.alpha * (1.0 + self.beta) >= 1.0:
            raise ValidationError(
                f"alpha*(1+beta) = {self.alpha * (1.0 + self.beta):.4f} >= 1; "
                "negative-edge iteration would not contract"
            )


@dataclass
class ReputationState:
    """Iteration state: vectors are (N, E) continuous or (N, D) discrete."""

    vectors: np.ndarray
    agent_ids: tuple[str, ...]
    mode: str = "continuous"
    iterations: int = 0
    residuals: tuple[float, ...] = ()
    converged: bool = False

    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=1)

    def row(self, agent_id: str) -> np.ndarray:
        return self.vectors[self.agent_ids.index(agent_id)]


def _max_row_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.linalg.norm(new - old, axis=1).max()) if new.size else 0.0


def _check_finite(arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise ValidationError("non-finite value during propagation; corrupt input?")


# --- continuous engine --------------------------------------------------------


def init_state(
    graph: NormalizedGraph,
    cfg: PropagationConfig,
    matrices: DomainMatrices | None = None,
) -> ReputationState:
    """R0 = T + C (projected onto domain buckets in discrete mode)."""
    ids = tuple(a.id for a in graph.agents)
    if cfg.mode == "continuous":
        vectors = graph.teleport + graph.exogenous
    else:
        if matrices is None:
            raise ValidationError("discrete init requires domain matrices")
        vectors = matrices.teleport + matrices.exogenous
    return ReputationState(vectors=vectors.copy(), agent_ids=ids, mode=cfg.mode)


def _edge_distributions(
    graph: NormalizedGraph,
    cfg: PropagationConfig,
    centroids: np.ndarray | None,
) -> np.ndarray | None:
    if not cfg.gates.needs_distributions():
        return None
    if centroids is None:
        raise ValidationError(
            "enabled gates need topic distributions; supply domain centroids"
        )
    return topic_distribution_batch(graph.pos_content, centroids)


def step_continuous(
    state: ReputationState,
    graph: NormalizedGraph,
    cfg: PropagationConfig,
    centroids: np.ndarray | None = None,
) -> tuple[ReputationState, float]:
    """One synchronous update of every agent's row; returns (state, residual)."""
    if state.mode != "continuous":
        raise ValidationError("step_continuous requires a continuous state")
    r = state.vectors
    acc = np.zeros_like(r)
    if graph.n_pos_edges:
        senders = graph.pos_sender
        rows = r[senders]
        transferred = transfer_batch(
            cfg.operator, rows, graph.pos_content, graph.pos_blind
        )
        coeff = graph.pos_weight
        if cfg.gates.any_enabled:
            conf = None
            if cfg.gates.confidence.enabled:
                conf = np.where(
                    np.isnan(graph.pos_confidence),
                    np.where(
                        graph.pos_blind,
                        cfg.gates.confidence.default_confidence,
                        1.0,
                    ),
                    graph.pos_confidence,
                )
            p_int = _edge_distributions(graph, cfg, centroids)
            p_rep = None
            if cfg.gates.kl.enabled and cfg.gates.kl.form == "softmax":
                if centroids is None:
                    raise ValidationError("softmax kl gate requires domain centroids")
                p_rep = topic_distribution_batch(rows, centroids)
            coeff = coeff * stack_batch(
                cfg.gates, rows, graph.pos_content, conf, p_int, p_rep
            )
        np.add.at(acc, graph.pos_receiver, coeff[:, None] * transferred)
    new = cfg.alpha * acc
    if cfg.couple_c_with_damping:
        new += (1.0 - cfg.alpha) * (graph.teleport + graph.exogenous)
    else:
        new += (1.0 - cfg.alpha) * graph.teleport + graph.exogenous
    if cfg.normalize_each_iter:
        norms = np.linalg.norm(new, axis=1, keepdims=True)
        np.divide(new, norms, out=new, where=norms > 0)
    _check_finite(new)
    residual = _max_row_change(new, r)
    next_state = replace(
        state,
        vectors=new,
        iterations=state.iterations + 1,
        residuals=state.residuals + (residual,),
    )
    return next_state, residual


# --- discrete engine ----------------------------------------------------------


@dataclass
class DomainMatrices:
    """Per-domain row-stochastic transitions plus domain-projected priors."""

    domains: tuple[str, ...]
    centroids: np.ndarray  # (D, E)
    mats: tuple[sp.csr_matrix, ...]  # each (N, N)
    teleport: np.ndarray  # (N, D)
    exogenous: np.ndarray  # (N, D)

    @property
    def n_domains(self) -> int:
        return len(self.domains)


def project_to_domains(vectors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Bucket E-dim vectors into D domains, preserving each row's L2 magnitude.

    Positive-part cosines to the centroids are L1-normalized per row and then
    scaled by the row norm; rows with no positive similarity stay zero.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    cents = np.asarray(centroids, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    cnorms = np.linalg.norm(cents, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    cos = (vectors @ cents.T) / (safe[:, None] * cnorms[None, :])
    sims = np.maximum(cos, 0.0)
    totals = sims.sum(axis=1)
    out = np.zeros_like(sims)
    ok = (totals > 0) & (norms > 0)
    out[ok] = sims[ok] / totals[ok, None] * norms[ok, None]
    return out


def build_domain_matrices(
    graph: NormalizedGraph,
    centroids: np.ndarray,
    top_k: int = 1,
) -> DomainMatrices:
    """Split each positive edge across its top-k domains by centroid cosine.

    Shares are proportional to max(0, cos(e_ij, centroid_d)) over the top-k
    domains; an edge with no positive similarity goes wholly to its argmax
    domain.  Each M_d is then row-normalized, so parallel edges collapse by
    summation and every non-empty row sums to one.
    """
    cents = np.asarray(centroids, dtype=np.float64)
    if cents.ndim != 2 or cents.shape[1] != graph.dim:
        raise ValidationError("centroids must be (D, E) matching the graph dim")
    n_domains = cents.shape[0]
    if not 1 <= top_k <= n_domains:
        raise ValidationError("top_k must lie in [1, D]")
    n = graph.n_agents
    rows: list[list[int]] = [[] for _ in range(n_domains)]
    cols: list[list[int]] = [[] for _ in range(n_domains)]
    data: list[list[float]] = [[] for _ in range(n_domains)]
    if graph.n_pos_edges:
        cnorms = np.linalg.norm(cents, axis=1)
        cos = (graph.pos_content @ cents.T) / cnorms[None, :]  # contents are unit
        for idx in range(graph.n_pos_edges):
            sims = cos[idx]
            order = np.argsort(-sims, kind="stable")[:top_k]
            kept = [d for d in order if sims[d] > 0]
            if not kept:
                kept = [int(order[0])]
                shares = [1.0]
            else:
                total = float(sum(sims[d] for d in kept))
                shares = [float(sims[d]) / total for d in kept]
            w = float(graph.pos_weight[idx])
            for d, share in zip(kept, shares):
                rows[d].append(int(graph.pos_sender[idx]))
                cols[d].append(int(graph.pos_receiver[idx]))
                data[d].append(w * share)
    mats = []
    for d in range(n_domains):
        m = sp.csr_matrix(
            (data[d], (rows[d], cols[d])), shape=(n, n), dtype=np.float64
        )
        sums = np.asarray(m.sum(axis=1)).ravel()
        scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
        m = sp.diags(scale) @ m
        mats.append(sp.csr_matrix(m))
    domains = tuple(f"d{d}" for d in range(n_domains))
    return DomainMatrices(
        domains=domains,
        centroids=cents,
        mats=tuple(mats),
        teleport=project_to_domains(graph.teleport, cents),
        exogenous=project_to_domains(graph.exogenous, cents),
    )


def build_negative_matrices(
    graph: NormalizedGraph,
    matrices: DomainMatrices,
) -> tuple[sp.csr_matrix, ...]:
    """Per-domain negative transitions from flag edges.

    Flags carry no content, so the same per-reporter normalized matrix is
    applied in every domain: moderation evidence is not topic-specific.
    """
    n = graph.n_agents
    m = sp.csr_matrix(
        (graph.neg_weight, (graph.neg_sender, graph.neg_receiver)),
        shape=(n, n),
        dtype=np.float64,
    )
    return tuple(m for _ in range(matrices.n_domains))


def _discrete_update(
    r: np.ndarray,
    matrices: DomainMatrices,
    cfg: PropagationConfig,
    neg: tuple[sp.csr_matrix, ...] | None,
) -> np.ndarray:
    new = np.empty_like(r)
    for d, mat in enumerate(matrices.mats):
        flow = mat.T @ r[:, d]
        if neg is not None:
            flow = flow - cfg.beta * (neg[d].T @ r[:, d])
        new[:, d] = cfg.alpha * flow
    if cfg.couple_c_with_damping:
        new += (1.0 - cfg.alpha) * (matrices.teleport + matrices.exogenous)
    else:
        new += (1.0 - cfg.alpha) * matrices.teleport + matrices.exogenous
    if neg is not None and cfg.clamp_floor:
        np.maximum(new, 0.0, out=new)
    return new


def step_discrete(
    state: ReputationState,
    matrices: DomainMatrices,
    cfg: PropagationConfig,
) -> tuple[ReputationState, float]:
    """One damped update of all domain buckets (positive edges only)."""
    if state.mode != "discrete":
        raise ValidationError("step_discrete requires a discrete state")
    new = _discrete_update(state.vectors, matrices, cfg, neg=None)
    _check_finite(new)
    residual = _max_row_change(new, state.vectors)
    next_state = replace(
        state,
        vectors=new,
        iterations=state.iterations + 1,
        residuals=state.residuals + (residual,),
    )
    return next_state, residual


def step_negative(
    state: ReputationState,
    matrices: DomainMatrices,
    neg: tuple[sp.csr_matrix, ...],
    cfg: PropagationConfig,
) -> tuple[ReputationState, float]:
    """Damped update with flag edges subtracted at strength beta.

    With beta = 0 this reduces exactly to step_discrete.  The optional floor
    clamp keeps buckets non-negative.
    """
    if state.mode != "discrete":
        raise ValidationError("step_negative requires a discrete state")
    cfg.check_negative_stability()
    if len(neg) != matrices.n_domains:
        raise ValidationError("negative matrices must match domain count")
    new = _discrete_update(state.vectors, matrices, cfg, neg=neg)
    _check_finite(new)
    residual = _max_row_change(new, state.vectors)
    next_state = replace(
        state,
        vectors=new,
        iterations=state.iterations + 1,
        residuals=state.residuals + (residual,),
    )
    return next_state, residual


# --- drivers ------------------------------------------------------------------


def run(
    graph: NormalizedGraph,
    cfg: PropagationConfig,
    initial: ReputationState | None = None,
    matrices: DomainMatrices | None = None,
    neg: tuple[sp.csr_matrix, ...] | None = None,
    centroids: np.ndarray | None = None,
) -> ReputationState:
    """Iterate until the residual drops below epsilon or max_iters is hit.

    Non-convergence is reported through state.converged rather than raised,
    so callers can decide how loudly to fail.
    """
    if cfg.mode == "discrete" and matrices is None:
        raise ValidationError("discrete mode requires domain matrices")
    if neg is not None:
        if cfg.mode != "discrete":
            raise ValidationError("negative edges run in discrete mode only")
        cfg.check_negative_stability()
    state = initial if initial is not None else init_state(graph, cfg, matrices)
    if state.mode != cfg.mode:
        raise ValidationError("initial state mode does not match config")
    for _ in range(cfg.max_iters):
        if cfg.mode == "continuous":
            state, residual = step_continuous(state, graph, cfg, centroids)
        elif neg is not None:
            state, residual = step_negative(state, matrices, neg, cfg)
        else:
            state, residual = step_discrete(state, matrices, cfg)
        if residual < cfg.epsilon:
            state.converged = True
            break
    if not state.converged:
        logger.warning(
            "propagation did not converge in %d iterations (residual %.3g)",
            state.iterations,
            state.residuals[-1] if state.residuals else float("nan"),
        )
    return state


def warm_start(
    previous: ReputationState,
    graph: NormalizedGraph,
    cfg: PropagationConfig,
    matrices: DomainMatrices | None = None,
    neg: tuple[sp.csr_matrix, ...] | None = None,
    centroids: np.ndarray | None = None,
) -> ReputationState:
    """Run against an updated graph, seeding from a previous converged state.

    Agents present in both keep their rows; new agents start at T + C.  After
    small edge churn this typically converges in a handful of iterations.
    """
    if previous.mode != cfg.mode:
        raise ValidationError("previous state mode does not match config")
    base = init_state(graph, cfg, matrices)
    width = base.vectors.shape[1]
    if previous.vectors.shape[1] != width:
        raise ValidationError("previous state width does not match the new graph")
    lookup = {aid: i for i, aid in enumerate(previous.agent_ids)}
    vectors = base.vectors.copy()
    for i, aid in enumerate(base.agent_ids):
        j = lookup.get(aid)
        if j is not None:
            vectors[i] = previous.vectors[j]
    seeded = ReputationState(
        vectors=vectors, agent_ids=base.agent_ids, mode=cfg.mode
    )
    return run(graph, cfg, initial=seeded, matrices=matrices, neg=neg, centroids=centroids)


# --- analysis helpers ---------------------------------------------------------


def steady_state_bound(
    teleport: np.ndarray, exogenous: np.ndarray, alpha: float
) -> float:
    """Magnitude ceiling implied by damping: ||T||_F + ||C||_F / (1 - alpha).

    Exogenous authority escapes damping, hence the 1/(1-alpha) factor; no
    amount of edge rewiring lifts a converged state past this ceiling.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1)")
    t = float(np.linalg.norm(teleport))
    c = float(np.linalg.norm(exogenous))
    return t + c / (1.0 - alpha)


def self_alignment(state: ReputationState, graph: NormalizedGraph) -> dict[str, float]:
    """cos(R[j], T[j]) per agent: how on-profile each reputation stayed.

    Agents with a zero reputation or teleport row are omitted.
    """
    if state.mode != "continuous":
        raise ValidationError("self_alignment applies to continuous states")
    out: dict[str, float] = {}
    for i, agent in enumerate(graph.agents):
        r = state.vectors[i]
        t = graph.teleport[i]
        rn = float(np.linalg.norm(r))
        tn = float(np.linalg.norm(t))
        if rn == 0.0 or tn == 0.0:
            continue
        out[agent.id] = float(np.clip(float(r @ t) / (rn * tn), -1.0, 1.0))
    return out


def centroids_from_agents(agents: Sequence[Agent]) -> tuple[tuple[str, ...], np.ndarray]:
    """Domain centroids as normalized mean profiles per primary domain.

    Derived purely from agent records so any serialized corpus reproduces
    the same taxonomy; domains are ordered by first appearance.
    """
    order: list[str] = []
    groups: dict[str, list[np.ndarray]] = {}
    for agent in agents:
        if agent.primary_domain not in groups:
            order.append(agent.primary_domain)
            groups[agent.primary_domain] = []
        groups[agent.primary_domain].append(agent.profile)
    cents = []
    for label in order:
        mean = np.mean(groups[label], axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < 1e-12:
            raise ValidationError(f"domain {label!r} has a degenerate mean profile")
        cents.append(mean / norm)
    return tuple(order), np.vstack(cents)


def residual_ratios(residuals: Sequence[float], skip: int = 1) -> list[float]:
    """Successive residual ratios r[k+1]/r[k], skipping the first `skip` steps."""
    out = []
    for k in range(skip, len(residuals) - 1):
        if residuals[k] > 0:
            out.append(residuals[k + 1] / residuals[k])
    return out
