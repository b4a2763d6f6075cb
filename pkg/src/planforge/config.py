"""Pipeline configuration and the flat key=value config-file format."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import PreconditionError

_INT_KEYS = {
    "n_use_cases", "k_min", "k_max", "n_init", "max_iters",
    "top_clusters", "n_representatives", "seed", "embedding_dim",
    "api_port", "session_ttl",
}
_FLOAT_KEYS = {"pca_variance", "tol", "temperature"}


@dataclass
class PipelineConfig:
    n_use_cases: int = 100
    pca_variance: float = 0.90
    k_min: int = 2
    k_max: int = 10
    n_init: int = 10
    max_iters: int = 300
    tol: float = 1e-6
    top_clusters: int = 10
    n_representatives: int = 4
    seed: int = 7
    embedding_dim: int = 256

    # Operational settings, overridable from config files and flags.
    store_path: str = "planforge.db"
    provider: str = "mock"
    fixtures_dir: str = "fixtures"
    api_host: str = "127.0.0.1"
    api_port: int = 8712
    cors_origin: str = "*"
    session_ttl: int = 3600
    model: str = "gpt-4o"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    temperature: float = 0.0
    api_key_env: str = "PLANFORGE_API_KEY"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.pca_variance <= 1.0):
            raise PreconditionError("pca_variance must be in (0, 1]")
        if not (2 <= self.k_min <= self.k_max):
            raise PreconditionError("need 2 <= k_min <= k_max")
        if self.n_representatives < 1:
            raise PreconditionError("n_representatives must be >= 1")
        if self.top_clusters < 1:
            raise PreconditionError("top_clusters must be >= 1")

    def snapshot(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "extra":
                continue
            out[f.name] = getattr(self, f.name)
        return out


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment; blanks ignored."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PreconditionError(f"config line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in _INT_KEYS:
            values[key] = int(val)
        elif key in _FLOAT_KEYS:
            values[key] = float(val)
        else:
            values[key] = val
    return values


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    values: dict[str, object] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise PreconditionError(f"config file not found: {p}")
        values.update(parse_config_text(p.read_text(encoding="utf-8")))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)} - {"extra"}
    extra = {k: v for k, v in values.items() if k not in known}
    kwargs = {k: v for k, v in values.items() if k in known}
    return PipelineConfig(extra=extra, **kwargs)
