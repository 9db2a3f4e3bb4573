"""Command-line front end.

Verbs: ``gen-corpus``, ``propagate``, ``query``, ``attack``, ``bench``.
Exit codes: 0 success, 1 validation error (bad config, bad inputs, bad
usage), 2 propagation failed to converge, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ValidationError
from .files import (
    agents_from_jsonl,
    agents_to_jsonl,
    center_corpus,
    config_digest,
    corpus_spec,
    edges_from_jsonl,
    edges_to_jsonl,
    load_config,
    propagation_config,
    queries_from_jsonl,
    queries_to_jsonl,
    residuals_to_csv,
    snapshot_from_json,
    snapshot_to_json,
    weight_config,
)
from .graph import normalize
from .harness import (
    INJECTORS,
    format_table,
    generate_corpus,
    mean_precision,
    rank_queries,
    run_flag_scenario,
    run_scenario,
)
from .operators import OPERATOR_NAMES, OperatorKind
from .propagation import (
    build_domain_matrices,
    build_negative_matrices,
    centroids_from_agents,
    run,
)
from .retrieval import pipeline_search, precision_at_k, score_dot, score_mixed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NO_CONVERGENCE = 2
EXIT_IO = 3

BENCH_LABELED_COUNTS = (70, 156)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; reserve 2 for non-convergence.
    def error(self, message: str) -> None:  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    corpus = generate_corpus(corpus_spec(cfg))
    out = Path(args.out)
    _write(out / "agents.jsonl", agents_to_jsonl(corpus.agents))
    _write(out / "edges.jsonl", edges_to_jsonl(corpus.edges))
    _write(out / "queries.jsonl", queries_to_jsonl(corpus.queries))
    print(
        f"wrote {len(corpus.agents)} agents, {len(corpus.edges)} edges, "
        f"{len(corpus.queries)} queries to {out}"
    )
    return EXIT_OK


def _run_from_files(cfg, agents, edges):
    graph = normalize(agents, edges, weight_config(cfg))
    prop_cfg = propagation_config(cfg)
    matrices = neg = None
    if prop_cfg.mode == "discrete":
        _, centroids = centroids_from_agents(agents)
        matrices = build_domain_matrices(graph, centroids, top_k=cfg["propagation.top_k"])
        if graph.n_neg_edges:
            neg = build_negative_matrices(graph, matrices)
    return run(graph, prop_cfg, matrices=matrices, neg=neg)


def cmd_propagate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    agents = agents_from_jsonl(Path(args.agents).read_text())
    edges = edges_from_jsonl(Path(args.edges).read_text())
    mean = None
    if args.center:
        agents, edges, _, mean = center_corpus(agents, edges)
    state = _run_from_files(cfg, agents, edges)
    out = Path(args.out)
    _write(out / "snapshot.json", snapshot_to_json(state, config_digest(cfg), mean))
    _write(out / "residuals.csv", residuals_to_csv(state.residuals))
    print(
        f"{'converged' if state.converged else 'did not converge'} "
        f"after {state.iterations} iterations"
    )
    return EXIT_OK if state.converged else EXIT_NO_CONVERGENCE


def cmd_query(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    state, _, _ = snapshot_from_json(Path(args.snapshot).read_text())
    queries = queries_from_jsonl(Path(args.queries).read_text())
    agents = agents_from_jsonl(Path(args.agents).read_text())
    strategy = args.strategy or cfg["retrieval.strategy"]
    beta_mix = cfg["retrieval.beta_mix"]
    variant = cfg["retrieval.variant"]
    k = cfg["retrieval.k"]

    lines = ["query_id,rank,agent_id,score"]
    summary = []
    for q in queries:
        if strategy == "dot":
            ranked = score_dot(state, q)
        elif strategy == "cosine":
            ranked = score_mixed(state, q, 0.0, "power")
        elif strategy == "mixed":
            ranked = score_mixed(state, q, beta_mix, variant)
        elif strategy == "pipeline":
            ranked = pipeline_search(state, agents, q)
        else:
            raise ValidationError(f"unknown strategy {strategy!r}")
        for rank, (aid, score) in enumerate(ranked, start=1):
            lines.append(f"{q.id},{rank},{aid},{score!r}")
        if q.expected_domains:
            strict = precision_at_k(ranked, agents, q.expected_domains, k, "strict")
            multi = precision_at_k(ranked, agents, q.expected_domains, k, "multilabel")
            summary.append((q.id, strict, multi))
    _write(Path(args.out), "\n".join(lines) + "\n")
    if summary:
        print(f"precision@{k} ({strategy})")
        for qid, strict, multi in summary:
            print(f"  {qid}  strict={strict:.3f}  multilabel={multi:.3f}")
        mean_s = sum(s for _, s, _ in summary) / len(summary)
        mean_m = sum(m for _, _, m in summary) / len(summary)
        print(f"  mean  strict={mean_s:.3f}  multilabel={mean_m:.3f}")
    return EXIT_OK


def cmd_attack(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    scenario = args.scenario or cfg["attack.scenario"]
    if scenario not in INJECTORS:
        raise ValidationError(
            f"unknown scenario {scenario!r}; choose from {sorted(INJECTORS)}"
        )
    spec = corpus_spec(cfg)
    report = run_scenario(
        spec,
        scenario,
        propagation_config(cfg),
        weight_config(cfg),
        strategy=cfg["retrieval.strategy"],
    )
    out = Path(args.out)
    rows = report.csv_rows()
    _write(out / f"report_{scenario}.csv",
           "\n".join(",".join(r) for r in rows) + "\n")
    print(
        f"{scenario}: P@5 strict {report.p5_strict_baseline:.3f} -> "
        f"{report.p5_strict_attacked:.3f}, multilabel "
        f"{report.p5_multilabel_baseline:.3f} -> {report.p5_multilabel_attacked:.3f}"
    )
    ok = report.converged_baseline and report.converged_attacked
    if args.flag_defense:
        flag = run_flag_scenario(
            spec,
            severity=cfg["attack.flag_severity"],
            prop_cfg=propagation_config(cfg),
            weight_cfg=weight_config(cfg),
            scenario=scenario,
        )
        _write(out / "flag_defense.csv",
               "\n".join(",".join(r) for r in flag.csv_rows()) + "\n")
        for aid in flag.flagged:
            print(f"flag defense: {aid} magnitude reduced "
                  f"{100 * flag.reduction(aid):.1f}%")
        ok = ok and flag.converged_unflagged and flag.converged_flagged
    return EXIT_OK if ok else EXIT_NO_CONVERGENCE


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    base_spec = corpus_spec(cfg)
    weight_cfg = weight_config(cfg)
    base_prop = propagation_config(cfg)
    rows = []
    all_converged = True
    for labeled in BENCH_LABELED_COUNTS:
        spec = replace(
            base_spec,
            labeled_edges=labeled,
            payment_edges=min(base_spec.payment_edges, labeled),
        )
        corpus = generate_corpus(spec)
        graph = normalize(corpus.agents, corpus.edges, weight_cfg)
        for op_name in sorted(OPERATOR_NAMES):
            prop_cfg = replace(base_prop, operator=OperatorKind.from_name(op_name))
            state = run(graph, prop_cfg)
            all_converged = all_converged and state.converged
            rankings = rank_queries(state, corpus, cfg["retrieval.strategy"])
            rows.append(
                [
                    op_name,
                    str(labeled),
                    str(state.iterations),
                    f"{mean_precision(rankings, corpus, 'strict'):.3f}",
                    f"{mean_precision(rankings, corpus, 'multilabel'):.3f}",
                ]
            )
    header = ["operator", "labeled_edges", "iterations", "p5_strict", "p5_multilabel"]
    table = format_table(header, rows)
    _write(Path(args.out) / "bench.csv",
           "\n".join(",".join(r) for r in [header] + rows) + "\n")
    print(table, end="")
    return EXIT_OK if all_converged else EXIT_NO_CONVERGENCE


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trustprop", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a seeded synthetic corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("propagate", help="run propagation over corpus files")
    p.add_argument("--config", default=None)
    p.add_argument("--agents", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--center", action="store_true",
                   help="fit and apply mean-centering over the input files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("query", help="rank agents for queries against a snapshot")
    p.add_argument("--config", default=None)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--agents", required=True)
    p.add_argument("--strategy", default=None,
                   choices=("dot", "cosine", "mixed", "pipeline"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("attack", help="run an adversarial scenario report")
    p.add_argument("--config", default=None)
    p.add_argument("--scenario", default=None, choices=sorted(INJECTORS))
    p.add_argument("--flag-defense", action="store_true",
                   help="also run the flag-defense experiment")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="compare operators across edge densities")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
