"""Corpus-level evaluation: complexity means, method sets, set distances.

Distances are computed between PCA-reduced embeddings (reduction fitted on
the pooled embeddings of every corpus in the report); when the pooled data is
degenerate the raw embeddings are used and the report says so.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .clustering import fit_pca
from .config import PipelineConfig
from .distances import hausdorff, wasserstein
from .embedding import HashEmbeddingProvider
from .errors import DegenerateDataError, PlanforgeError, PreconditionError
from .metrics import complexity_record, distinct_methods

METRIC_ORDER = [
    ("loc", "Lines of Code"),
    ("cyclomatic", "Cyclomatic Complexity"),
    ("halstead_volume", "Halstead Volume"),
    ("cognitive", "Cognitive Complexity"),
]


@dataclass
class EvaluationCorpus:
    label: str
    codes: list[str]
    embeddings: np.ndarray | None = None


@dataclass
class CorpusStats:
    label: str
    n: int
    means: dict[str, float]
    distinct_methods: list[str]


@dataclass
class PairDistance:
    pair: tuple[str, str]
    hausdorff: float
    wasserstein: float


@dataclass
class EvaluationReport:
    corpora: list[CorpusStats]
    distances: list[PairDistance]
    reduced_space: bool = True
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "corpora": [
                {
                    "label": c.label,
                    "n": c.n,
                    "means": {key: c.means[key] for key, _ in METRIC_ORDER},
                    "distinct_methods": c.distinct_methods,
                }
                for c in self.corpora
            ],
            "distances": [
                {
                    "pair": list(d.pair),
                    "hausdorff": d.hausdorff,
                    "wasserstein": d.wasserstein,
                }
                for d in self.distances
            ],
            "reduced_space": self.reduced_space,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def render_table(self) -> str:
        """Aligned text table: metric rows in the canonical order, then distances."""
        labels = [c.label for c in self.corpora]
        rows = [["Metric", *labels]]
        for key, display in METRIC_ORDER:
            rows.append(
                [display, *(f"{c.means[key]:.3f}" for c in self.corpora)]
            )
        lines = _align(rows)

        if self.distances:
            pair_labels = [f"{a}:{b}" for a, b in (d.pair for d in self.distances)]
            drows = [
                ["Distance", *pair_labels],
                ["Hausdorff", *(f"{d.hausdorff:.3f}" for d in self.distances)],
                ["Wasserstein", *(f"{d.wasserstein:.3f}" for d in self.distances)],
            ]
            lines += [""] + _align(drows)

        methods = [
            f"{c.label}: {', '.join(c.distinct_methods) if c.distinct_methods else '(none)'}"
            for c in self.corpora
        ]
        lines += ["", "Distinct methods:"] + [f"  {m}" for m in methods]
        return "\n".join(lines) + "\n"


def _align(rows: list[list[str]]) -> list[str]:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    out = []
    for row in rows:
        cells = [row[0].ljust(widths[0])] + [
            cell.rjust(widths[i]) for i, cell in enumerate(row[1:], start=1)
        ]
        out.append("  ".join(cells).rstrip())
    return out


def evaluate(
    corpora: list[EvaluationCorpus],
    pairs: list[tuple[str, str]] | None = None,
    config: PipelineConfig | None = None,
) -> EvaluationReport:
    config = config or PipelineConfig()
    pairs = pairs or []
    by_label: dict[str, EvaluationCorpus] = {}
    for corpus in corpora:
        if corpus.label in by_label:
            raise PreconditionError(f"duplicate corpus label: {corpus.label}")
        by_label[corpus.label] = corpus
    for a, b in pairs:
        for label in (a, b):
            if label not in by_label:
                raise PreconditionError(f"unknown corpus label in pairs: {label}")

    stats = []
    for corpus in corpora:
        records = []
        methods: set[str] = set()
        for i, code in enumerate(corpus.codes):
            try:
                records.append(complexity_record(code))
                methods |= distinct_methods(code)
            except Exception as exc:  # pragma: no cover - metrics are total
                raise PlanforgeError(
                    f"corpus {corpus.label!r} member {i}: {exc}"
                ) from exc
        n = len(records)
        means = {
            "loc": float(np.mean([r.loc for r in records])) if n else 0.0,
            "cyclomatic": float(np.mean([r.cyclomatic for r in records])) if n else 0.0,
            "halstead_volume": float(np.mean([r.halstead_volume for r in records])) if n else 0.0,
            "cognitive": float(np.mean([r.cognitive for r in records])) if n else 0.0,
        }
        stats.append(CorpusStats(
            label=corpus.label, n=n, means=means, distinct_methods=sorted(methods),
        ))

    notes: list[str] = []
    distances: list[PairDistance] = []
    reduced_space = True
    if pairs:
        provider = HashEmbeddingProvider(dim=config.embedding_dim)
        needed = sorted({label for pair in pairs for label in pair})
        raw: dict[str, np.ndarray] = {}
        for label in needed:
            corpus = by_label[label]
            if corpus.embeddings is None:
                corpus.embeddings = provider.embed_batch(corpus.codes)
            raw[label] = np.asarray(corpus.embeddings, dtype=float)
            if raw[label].size == 0:
                raise PreconditionError(f"corpus {label!r} has no members to embed")

        pooled = np.vstack([raw[label] for label in needed])
        try:
            model = fit_pca(pooled, config.pca_variance)
            spaces = {label: model.transform(raw[label]) for label in needed}
        except DegenerateDataError:
            reduced_space = False
            notes.append("pooled embeddings were degenerate; distances use the raw space")
            spaces = raw

        for a, b in pairs:
            distances.append(PairDistance(
                pair=(a, b),
                hausdorff=hausdorff(spaces[a], spaces[b]),
                wasserstein=wasserstein(spaces[a], spaces[b], seed=config.seed),
            ))

    return EvaluationReport(
        corpora=stats, distances=distances, reduced_space=reduced_space, notes=notes,
    )


def star_subsample(store, domain_id: int, config: PipelineConfig) -> list[str]:
    """Representative snippet codes: R centroid-nearest members of the L largest clusters."""
    candidates = store.list_candidates(domain_id)[: config.top_clusters]
    codes = []
    for cand in candidates:
        for sid in cand.snippet_ids[: config.n_representatives]:
            codes.append(store.get_snippet(sid).code)
    return codes
