"""Shared fixtures for the test suite.

The default synthetic corpus and its baseline propagation run are expensive
enough to be worth computing once per session; most behavioural tests only
read from them.
"""

import numpy as np
import pytest

from trustprop.graph import NormalizedGraph, normalize
from trustprop.harness import CorpusSpec, Corpus, generate_corpus
from trustprop.propagation import (
    PropagationConfig,
    ReputationState,
    run,
    steady_state_bound,
)


@pytest.fixture(scope="session")
def spec() -> CorpusSpec:
    return CorpusSpec()


@pytest.fixture(scope="session")
def corpus(spec: CorpusSpec) -> Corpus:
    return generate_corpus(spec)


@pytest.fixture(scope="session")
def graph(corpus: Corpus) -> NormalizedGraph:
    return normalize(corpus.agents, corpus.edges)


@pytest.fixture(scope="session")
def baseline(graph: NormalizedGraph) -> ReputationState:
    """Gates-off continuous run on the default corpus."""
    state = run(graph, PropagationConfig())
    assert state.converged
    return state


def assert_within_steady_bound(
    state: ReputationState,
    teleport: np.ndarray,
    exogenous: np.ndarray,
    alpha: float = 0.85,
    slack: float = 1e-6,
) -> None:
    """Every converged state must sit inside the damping-derived norm ceiling."""
    bound = steady_state_bound(teleport, exogenous, alpha)
    total = float(np.linalg.norm(state.vectors))
    assert total <= bound + slack, f"norm {total} exceeds bound {bound}"
