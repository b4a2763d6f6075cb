"""Command-line front end: pipeline runs, corpus evaluation, API server.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .api import create_app
from .config import PipelineConfig, load_config
from .errors import PlanforgeError, PreconditionError
from .evaluation import EvaluationCorpus, evaluate, star_subsample
from .gateway import Gateway, MockProvider, RemoteProvider
from .pipeline import Pipeline, PipelineError
from .store import CorpusFilter, Store

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class UsageError(Exception):
    pass


def _build_provider(config: PipelineConfig):
    if config.provider == "mock":
        fixtures = Path(config.fixtures_dir)
        if not fixtures.is_dir():
            raise PlanforgeError(
                f"mock fixtures not found at {fixtures}; generate them with"
                " `python -m planforge.mockdata --dir <path>`"
            )
        return MockProvider(fixtures)
    if config.provider == "remote":
        return RemoteProvider(config)
    raise UsageError(f"unknown provider: {config.provider}")


def cmd_pipeline_run(args) -> int:
    config = load_config(args.config, overrides={
        "seed": args.seed,
        "store_path": args.store,
        "provider": args.provider,
        "fixtures_dir": args.fixtures,
    })
    store = Store(config.store_path)
    try:
        gateway = Gateway(_build_provider(config), store=store, config=config)
        domain, manifest = Pipeline(store, gateway, config).run(args.domain, args.library)
        manifest_path = f"{config.store_path}.manifest.json"
        manifest.write(manifest_path)
        for stage, seconds in manifest.wall_times.items():
            print(f"stage {stage}: {seconds:.2f}s")
        counts = manifest.counts
        print(
            f"domain {domain.name!r}: {counts['use_cases']} use cases,"
            f" {counts['programs']} programs ({counts['valid_programs']} valid),"
            f" {counts['snippets']} snippets, {counts['clusters']} clusters"
        )
        print(f"manifest written to {manifest_path}")
        return 0
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    finally:
        store.close()


def _resolve_corpora(args, config: PipelineConfig, store: Store | None):
    corpora = []
    star_labels = set(args.star or [])
    seen = set()
    for spec_arg in args.corpus:
        if "=" not in spec_arg:
            raise UsageError(f"--corpus expects label=<path|domain>, got {spec_arg!r}")
        label, _, target = spec_arg.partition("=")
        label = label.strip()
        if not label or label in seen:
            raise UsageError(f"duplicate or empty corpus label in {spec_arg!r}")
        seen.add(label)

        path = Path(target)
        if path.is_dir():
            if label in star_labels:
                raise UsageError(f"--star only applies to domain corpora, not {label!r}")
            files = sorted(p for p in path.rglob("*.py") if p.is_file())
            corpus_filter = CorpusFilter()
            codes = [
                p.read_text(encoding="utf-8", errors="replace")
                for p in files
                if corpus_filter.accepts(p, p.read_text(encoding="utf-8", errors="replace"))
            ]
            if not codes:
                raise UsageError(f"corpus {label!r}: no files passed the filter in {path}")
            corpora.append(EvaluationCorpus(label=label, codes=codes))
            continue

        if store is None:
            raise UsageError(f"corpus {label!r}: {target!r} is not a directory and no --store given")
        domain = store.find_domain(target)
        if domain is None:
            raise UsageError(f"corpus {label!r}: no directory or domain named {target!r}")
        if label in star_labels:
            codes = star_subsample(store, domain.id, config)
            if not codes:
                raise UsageError(f"corpus {label!r}: domain has no candidates to subsample")
            corpora.append(EvaluationCorpus(label=label, codes=codes))
        else:
            snippets = [s for s in store.list_snippets(domain.id) if s.embedding]
            if not snippets:
                raise UsageError(f"corpus {label!r}: domain {target!r} has no embedded snippets")
            corpora.append(EvaluationCorpus(
                label=label,
                codes=[s.code for s in snippets],
                embeddings=np.array([s.embedding for s in snippets]),
            ))
    return corpora


def _parse_pairs(text: str | None, labels: set[str]):
    if not text:
        return []
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise UsageError(f"--pairs expects a:b entries, got {chunk!r}")
        a, _, b = chunk.partition(":")
        a, b = a.strip(), b.strip()
        if a not in labels or b not in labels:
            raise UsageError(f"unknown corpus label in pair {chunk!r}")
        pairs.append((a, b))
    return pairs


def cmd_eval_run(args) -> int:
    config = load_config(args.config, overrides={"seed": args.seed})
    store = Store(args.store) if args.store else None
    try:
        corpora = _resolve_corpora(args, config, store)
        pairs = _parse_pairs(args.pairs, {c.label for c in corpora})
        report = evaluate(corpora, pairs, config)
        if args.out:
            Path(args.out).write_text(report.to_json(), encoding="utf-8")
            print(f"report written to {args.out}")
        print(report.render_table(), end="")
        return 0
    finally:
        if store is not None:
            store.close()


def cmd_serve(args) -> int:
    import uvicorn

    config = load_config(args.config)
    store = Store(config.store_path)
    try:
        gateway = None
        if config.provider == "remote" or Path(config.fixtures_dir).is_dir():
            gateway = Gateway(_build_provider(config), store=store, config=config)
        app = create_app(store, gateway, config)
        print(f"serving on http://{config.api_host}:{config.api_port}", flush=True)
        uvicorn.run(app, host=config.api_host, port=config.api_port, log_level="warning")
        return 0
    finally:
        store.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planforge")
    sub = parser.add_subparsers(dest="command", required=True)

    pipeline = sub.add_parser("pipeline", help="corpus generation pipeline")
    pipeline_sub = pipeline.add_subparsers(dest="action", required=True)
    run = pipeline_sub.add_parser("run", help="run every pipeline stage for a domain")
    run.add_argument("--domain", required=True)
    run.add_argument("--library", required=True)
    run.add_argument("--provider", choices=["mock", "remote"], default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--store", default=None)
    run.add_argument("--fixtures", default=None)
    run.add_argument("--config", default=None)
    run.set_defaults(func=cmd_pipeline_run)

    ev = sub.add_parser("eval", help="corpus evaluation")
    ev_sub = ev.add_subparsers(dest="action", required=True)
    ev_run = ev_sub.add_parser("run", help="compute metric means and set distances")
    ev_run.add_argument("--corpus", action="append", required=True,
                        metavar="LABEL=PATH_OR_DOMAIN")
    ev_run.add_argument("--star", action="append", default=None, metavar="LABEL",
                        help="subsample this domain corpus to cluster representatives")
    ev_run.add_argument("--pairs", default=None, metavar="A:B,...")
    ev_run.add_argument("--out", default=None)
    ev_run.add_argument("--store", default=None)
    ev_run.add_argument("--seed", type=int, default=None)
    ev_run.add_argument("--config", default=None)
    ev_run.set_defaults(func=cmd_eval_run)

    serve = sub.add_parser("serve", help="start the authoring API")
    serve.add_argument("--config", required=True)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except PreconditionError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except PlanforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
