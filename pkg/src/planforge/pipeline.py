"""Stage-by-stage corpus build: generation through named plan candidates.

Each stage runs inside one store transaction together with its completion
marker, so an interrupted run resumes at the first incomplete stage and never
leaves partial stage output behind.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import segmenter
from .candidates import assemble_candidates
from .clustering import fit_pca, select_k_and_cluster
from .config import PipelineConfig
from .embedding import HashEmbeddingProvider, content_hash
from .errors import MalformedResponseError, PreconditionError, TransportError
from .gateway import Gateway
from .models import Domain
from .store import Store

logger = logging.getLogger(__name__)

STAGES = [
    "use_cases",
    "programs",
    "validity",
    "annotation",
    "segmentation",
    "changeable_areas",
    "embedding",
    "clustering",
    "naming",
]


@dataclass
class RunManifest:
    config: dict
    counts: dict
    wall_times: dict = field(default_factory=dict)
    provider_id: str = "mock"
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "counts": self.counts,
                "wall_times": self.wall_times,
                "provider_id": self.provider_id,
                "seed": self.seed,
            },
            indent=2,
        ) + "\n"

    def write(self, path: str | Path):
        Path(path).write_text(self.to_json(), encoding="utf-8")


class PipelineError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class Pipeline:
    def __init__(self, store: Store, gateway: Gateway, config: PipelineConfig):
        self.store = store
        self.gateway = gateway
        self.config = config
        self.embedder = HashEmbeddingProvider(dim=config.embedding_dim)

    def run(self, domain_name: str, library_name: str) -> tuple[Domain, RunManifest]:
        domain = self.store.find_domain(domain_name)
        if domain is None:
            domain = self.store.add_domain(domain_name, library_name)
        done = self.store.completed_stages(domain.id)
        wall_times = {}
        for stage in STAGES:
            if stage in done:
                logger.info("stage %s already complete, skipping", stage)
                continue
            started = time.perf_counter()
            try:
                with self.store.transaction():
                    getattr(self, f"_stage_{stage}")(domain)
                    self.store.mark_stage(domain.id, stage)
            except Exception as exc:
                raise PipelineError(stage, exc) from exc
            wall_times[stage] = round(time.perf_counter() - started, 4)
        manifest = RunManifest(
            config=self.config.snapshot(),
            counts=self.store.counts(domain.id),
            wall_times=wall_times,
            provider_id=getattr(self.gateway.provider, "provider_id", "unknown"),
            seed=self.config.seed,
        )
        return domain, manifest

    # -- stages, in order

    def _stage_use_cases(self, domain: Domain):
        self.gateway.generate_use_cases(domain)

    def _stage_programs(self, domain: Domain):
        for use_case in self.store.list_use_cases(domain.id):
            self.gateway.generate_program(use_case)

    def _stage_validity(self, domain: Domain):
        for program in self.store.list_programs(domain.id):
            valid = segmenter.validate_syntax(program.raw_source)
            if valid != program.syntactically_valid:
                self.store.set_validity(program.id, valid)

    def _stage_annotation(self, domain: Domain):
        for program in self.store.list_programs(domain.id):
            if program.syntactically_valid:
                self.gateway.annotate_subgoals(program)

    def _stage_segmentation(self, domain: Domain):
        for program in self.store.list_programs(domain.id):
            if not program.syntactically_valid or not program.annotated_source:
                continue
            seg = segmenter.segment(program.annotated_source, program_id=program.id)
            self.store.replace_snippets(program.id, seg)

    def _stage_changeable_areas(self, domain: Domain):
        for snippet in self.store.list_snippets(domain.id):
            if not snippet.code.strip():
                continue
            fragments = self.gateway.extract_changeable_fragments(snippet)
            spans = segmenter.localize_fragments(snippet.code, fragments)
            self.store.set_snippet_spans(snippet.id, spans)

    def _stage_embedding(self, domain: Domain):
        for snippet in self.store.list_snippets(domain.id):
            if not snippet.code.strip():
                continue
            key = content_hash(snippet.code)
            vector = self.store.cached_embedding(self.embedder.provider_id, key)
            if vector is None:
                vector = self.embedder.embed(snippet.code).tolist()
                self.store.cache_embedding(self.embedder.provider_id, key, vector)
            self.store.set_snippet_embedding(snippet.id, vector)

    def _stage_clustering(self, domain: Domain):
        snippets = [s for s in self.store.list_snippets(domain.id) if s.embedding]
        if len(snippets) < self.config.k_min + 1:
            raise PreconditionError(
                f"need at least {self.config.k_min + 1} embedded snippets to cluster"
            )
        vectors = np.array([s.embedding for s in snippets])
        pca = fit_pca(vectors, self.config.pca_variance)
        reduced = pca.transform(vectors)
        result = select_k_and_cluster(reduced, self.config)
        self.store.clear_candidates(domain.id)
        assemble_candidates(
            domain_id=domain.id,
            clustering=result,
            snippets=snippets,
            reduced=reduced,
            store=self.store,
            gateway=None,  # naming happens in its own stage
            config=self.config,
        )

    def _stage_naming(self, domain: Domain):
        for candidate in self.store.list_candidates(domain.id):
            if not candidate.pending_name:
                continue
            reps = [self.store.get_snippet(sid) for sid in candidate.representative_ids]
            try:
                name = self.gateway.name_cluster(reps)
            except (TransportError, MalformedResponseError) as exc:
                logger.warning(
                    "naming candidate %s failed (%s); placeholder kept", candidate.id, exc
                )
                continue
            self.store.rename_candidate(candidate.id, name, pending=False)
