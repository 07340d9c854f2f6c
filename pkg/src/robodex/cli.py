"""Command-line interface.

Subcommands mirror the service: harvest and ingest-report mutate a snapshot
store on disk; query, compare, and locate read it; eval fits the rating
model; serve starts the HTTP service.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bhm, datamodel
from .config import ServiceConfig, load_config
from .errors import RobodexError
from .graph import PropertyGraph
from .harvester import apply_report, fetch_record, ingest_record, parse_ddi
from .reports import parse_report

DEFAULT_STORE = "robodex.graph"


def _load_graph(path: str) -> PropertyGraph:
    try:
        return PropertyGraph.load(path)
    except FileNotFoundError:
        return PropertyGraph()


def _add_store(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--store", default=DEFAULT_STORE, help="graph snapshot file")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="robodex", description=__doc__)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("harvest", help="fetch a dataset's metadata export and ingest it")
    p.add_argument("--repo", required=True, help="repository base URL")
    p.add_argument("--doi", required=True, help="persistent identifier")
    p.add_argument("--report", help="path to the dataset's data report")
    _add_store(p)

    p = sub.add_parser("ingest-report", help="apply a data report to a harvested dataset")
    p.add_argument("--doi", required=True)
    p.add_argument("--report", required=True)
    _add_store(p)

    p = sub.add_parser("query", help="query the catalog")
    p.add_argument("--which-datasets", metavar="LABEL=NAME", help="datasets linked to an entity")
    p.add_argument("text", nargs="?", help="free natural-language question")
    _add_store(p)

    p = sub.add_parser("compare", help="compare datasets facet by facet")
    p.add_argument("dois", nargs="+")
    p.add_argument("--facets", nargs="*", default=None)
    _add_store(p)

    p = sub.add_parser("locate", help="locate a dataset's files")
    p.add_argument("doi")
    p.add_argument("--filter", action="append", default=[], metavar="KEY=VALUE")
    _add_store(p)

    p = sub.add_parser("eval", help="fit the hierarchical rating model")
    p.add_argument("--ratings", required=True, help="ratings CSV")
    p.add_argument("--dimension", required=True, choices=[d.value for d in bhm.Dimension])
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--burnin", type=int, default=2_000)
    p.add_argument("--json", action="store_true", help="print the full posterior summary as JSON")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--port", type=int, default=None)

    p = sub.add_parser("schema", help="print the data model as canonical JSON")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return _dispatch(args)
    except (RobodexError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "harvest":
        graph = _load_graph(args.store)
        raw = fetch_record(args.repo, args.doi)
        record = parse_ddi(raw, repo_base=args.repo)
        report = None
        if args.report:
            with open(args.report, "r", encoding="utf-8") as fh:
                report = parse_report(fh.read())
        summary = ingest_record(graph, record, report=report)
        graph.save(args.store)
        print(json.dumps(summary.to_json_dict()))
        return 0

    if args.command == "ingest-report":
        graph = _load_graph(args.store)
        with open(args.report, "r", encoding="utf-8") as fh:
            report = parse_report(fh.read())
        summary = apply_report(graph, args.doi, report)
        graph.save(args.store)
        print(json.dumps(summary.to_json_dict()))
        return 0

    if args.command == "query":
        graph = _load_graph(args.store)
        if args.which_datasets:
            label, _, name = args.which_datasets.partition("=")
            if not name:
                raise ValueError("--which-datasets takes LABEL=NAME")
            for node in graph.find_datasets_by(label.strip(), name.strip()):
                print(f"{node.properties.get('doi')}\t{node.properties.get('title')}")
            return 0
        if not args.text:
            raise ValueError("give a question or --which-datasets LABEL=NAME")
        from .retrieval import AnswerMode, HashingEmbeddingProvider, Providers, answer

        result = answer(args.text, graph, None, Providers(HashingEmbeddingProvider()), AnswerMode.GROUNDED)
        print(result.text)
        for source in result.sources:
            print(f"  [{source.kind}] {source.render()}")
        return 0

    if args.command == "compare":
        graph = _load_graph(args.store)
        table = graph.compare(args.dois, args.facets)
        print(json.dumps(table.to_json_dict(), indent=2))
        return 0

    if args.command == "locate":
        graph = _load_graph(args.store)
        filters = {}
        for item in args.filter:
            key, _, value = item.partition("=")
            if not value:
                raise ValueError(f"--filter takes KEY=VALUE, got {item!r}")
            filters[key.strip()] = value.strip()
        for node in graph.locate_files(args.doi, filters):
            print(node.properties.get("path"))
        return 0

    if args.command == "eval":
        table = bhm.load_ratings(args.ratings)
        summary = bhm.fit(
            table,
            bhm.Dimension(args.dimension),
            n_samples=args.samples,
            n_burnin=args.burnin,
            seed=args.seed,
        )
        if args.json:
            print(summary.to_json())
            return 0
        headline = ["grand_mean", f"dimension:{args.dimension}", "resid_var"]
        headline += sorted(k for k in summary.parameters if k.startswith("rater:"))
        print(f"{'parameter':<32} {'mean':>9} {'sd':>9} {'2.5%':>9} {'97.5%':>9} {'ess':>8} {'rhat':>6}")
        for name in headline:
            p = summary.parameters[name]
            print(
                f"{name:<32} {p.mean:>9.4f} {p.sd:>9.4f} {p.ci_low:>9.4f} {p.ci_high:>9.4f} "
                f"{p.ess:>8.0f} {p.rhat:>6.3f}"
            )
        if summary.convergence_warning:
            print("warning: split-chain ratio exceeded 1.1 for at least one parameter")
        return 0

    if args.command == "serve":
        import uvicorn

        from .service import ServiceState, create_app

        config = load_config(args.config) if args.config else ServiceConfig()
        if args.port is not None:
            config.port = args.port
        app = create_app(ServiceState(config))
        uvicorn.run(app, host="127.0.0.1", port=config.port)
        return 0

    if args.command == "schema":
        print(datamodel.builtin_schema().to_canonical_json())
        return 0

    raise ValueError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
