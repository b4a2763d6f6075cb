"""Deterministic fixture corpus for offline pipeline runs.

``build_fixture_dir`` drives the real pipeline against a throwaway in-memory
store using a provider that synthesizes plausible responses on demand and
records each one under the fixture key the mock provider will later look up.
The synthetic corpus is pure index arithmetic (no RNG), so the same config
always produces the same fixture tree, and exactly one program carries a
syntax error.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from .config import PipelineConfig
from .errors import MalformedResponseError
from .gateway import Gateway
from .pipeline import Pipeline
from .prompts import PromptKind, PromptRequest
from .store import Store
from .tokenizer import TokenKind, tokenize

DEFAULT_LIBRARY = "pandas"
BROKEN_ORDINAL = 13  # 1-based use-case ordinal whose program has a syntax error

_COLUMNS = ["price", "score", "age", "total", "rating",
            "quantity", "duration", "weight", "height", "volume"]
_KEYS = ["user_id", "order_id", "item_code", "label"]


def _col(i: int) -> str:
    return _COLUMNS[i % len(_COLUMNS)]


def _key(i: int) -> str:
    return _KEYS[i % len(_KEYS)]


def _read_csv(i):
    fname, h = f"data_{i}.csv", 3 + i % 4
    desc = f"Reading the file {fname} into a data table"
    raw = (
        "import pandas as pd\n\n"
        f'df = pd.read_csv("{fname}")\n'
        f"print(df.head({h}))\n"
    )
    annotated = (
        "# Import the data analysis library\n"
        "import pandas as pd\n\n"
        f"# Load the dataset from {fname}\n"
        f'df = pd.read_csv("{fname}")\n'
        f"# Show the first {h} rows\n"
        f"print(df.head({h}))\n"
    )
    return desc, raw, annotated


def _filter_rows(i):
    fname, col, thr = f"records_{i}.csv", _col(i), 10 + i
    desc = f"Filtering rows of {fname} where {col} exceeds a threshold"
    raw = (
        "import pandas as pd\n"
        f'df = pd.read_csv("{fname}")\n'
        f'subset = df[df["{col}"] > {thr}]\n'
        "print(len(subset))\n"
    )
    annotated = (
        "import pandas as pd\n"
        f'df = pd.read_csv("{fname}")\n'
        f"# Keep rows where {col} exceeds {thr}\n"
        f'subset = df[df["{col}"] > {thr}]\n'
        "# Report how many rows matched\n"
        "print(len(subset))\n"
    )
    return desc, raw, annotated


def _group_agg(i):
    fname, col, val = f"sales_{i}.csv", _key(i), _col(i)
    desc = f"Summarizing {fname} by grouping on {col}"
    raw = (
        "import pandas as pd\n\n"
        f'df = pd.read_csv("{fname}")\n'
        f'totals = df.groupby("{col}")["{val}"].sum()\n'
        "print(totals)\n"
    )
    annotated = (
        "# Bring in the tabular data tools\n"
        "import pandas as pd\n\n"
        f"# Read the raw sales records from {fname}\n"
        f'df = pd.read_csv("{fname}")\n'
        f"# Add up {val} per {col}\n"
        f'totals = df.groupby("{col}")["{val}"].sum()\n'
        "print(totals)\n"
    )
    return desc, raw, annotated


def _merge_tables(i):
    a, b, key = f"left_{i}.csv", f"right_{i}.csv", _key(i)
    desc = f"Combining {a} and {b} on a shared key"
    raw = (
        "import pandas as pd\n\n"
        f'left = pd.read_csv("{a}")\n'
        f'right = pd.read_csv("{b}")\n'
        f'merged = left.merge(right, on="{key}")\n'
        "print(merged.shape)\n"
    )
    annotated = (
        "# Import the data analysis library\n"
        "import pandas as pd\n\n"
        "# Load both tables to combine\n"
        f'left = pd.read_csv("{a}")\n'
        f'right = pd.read_csv("{b}")\n'
        f"# Join the tables on the {key} column\n"
        f'merged = left.merge(right, on="{key}")\n'
        "print(merged.shape)\n"
    )
    return desc, raw, annotated


def _sort_values(i):
    fname, col = f"scores_{i}.csv", _col(i)
    desc = f"Sorting records of {fname} by {col}"
    raw = (
        "import pandas as pd\n\n"
        f'df = pd.read_csv("{fname}")\n'
        f'ranked = df.sort_values("{col}", ascending=False)\n'
        "print(ranked.head(10))\n"
    )
    annotated = (
        "# Import the data analysis library\n"
        "import pandas as pd\n\n"
        f"# Load {fname} for ranking\n"
        f'df = pd.read_csv("{fname}")\n'
        f"# Order rows by {col}, largest first\n"
        f'ranked = df.sort_values("{col}", ascending=False)\n'
        "# Show the ten best rows\n"
        "print(ranked.head(10))\n"
    )
    return desc, raw, annotated


def _save_csv(i):
    fname, col = f"output_{i}.csv", _col(i)
    desc = f"Saving a processed table to {fname}"
    raw = (
        "import pandas as pd\n\n"
        f'df = pd.DataFrame({{"{col}": [1, 2, 3]}})\n'
        f'df.to_csv("{fname}", index=False)\n'
    )
    annotated = (
        "# Import the data analysis library\n"
        "import pandas as pd\n\n"
        f"# Build a small table with a {col} column\n"
        f'df = pd.DataFrame({{"{col}": [1, 2, 3]}})\n'
        f"# Write the table to {fname} without the index\n"
        f'df.to_csv("{fname}", index=False)\n'
    )
    return desc, raw, annotated


def _describe_stats(i):
    fname = f"survey_{i}.csv"
    desc = f"Computing summary statistics for {fname}"
    raw = (
        "import pandas as pd\n\n"
        f'df = pd.read_csv("{fname}")\n'
        "print(df.describe())\n"
    )
    annotated = (
        "# Import the data analysis library\n"
        "import pandas as pd\n\n"
        f"# Load the survey answers from {fname}\n"
        f'df = pd.read_csv("{fname}")\n'
        "# Print mean, spread and quartiles for every numeric column\n"
        "print(df.describe())\n"
    )
    return desc, raw, annotated


def _dropna_clean(i):
    fname, col = f"raw_{i}.csv", _col(i)
    desc = f"Cleaning missing values out of {fname}"
    raw = (
        "import pandas as pd\n"
        f'df = pd.read_csv("{fname}")\n'
        f'clean = df.dropna(subset=["{col}"])\n'
        "print(df.shape, clean.shape)\n"
    )
    annotated = (
        "import pandas as pd\n"
        f'df = pd.read_csv("{fname}")\n'
        f"# Drop rows missing a {col} value\n"
        f'clean = df.dropna(subset=["{col}"])\n'
        "# Compare sizes before and after cleaning\n"
        "print(df.shape, clean.shape)\n"
    )
    return desc, raw, annotated


def _rename_columns(i):
    fname, col = f"export_{i}.csv", _col(i)
    desc = f"Renaming columns of {fname} for readability"
    raw = (
        "import pandas as pd\n\n"
        f'df = pd.read_csv("{fname}")\n'
        f'df = df.rename(columns={{"{col}": "{col}_clean"}})\n'
        "print(df.columns.tolist())\n"
    )
    annotated = (
        "# Import the data analysis library\n"
        "import pandas as pd\n\n"
        f"# Load the exported table {fname}\n"
        f'df = pd.read_csv("{fname}")\n'
        f"# Give the {col} column a clearer name\n"
        f'df = df.rename(columns={{"{col}": "{col}_clean"}})\n'
        "print(df.columns.tolist())\n"
    )
    return desc, raw, annotated


def _pivot_table(i):
    fname, col, val = f"log_{i}.csv", _key(i), _col(i)
    desc = f"Pivoting {fname} into a wide table by {col}"
    raw = (
        "import pandas as pd\n\n"
        f'df = pd.read_csv("{fname}")\n'
        f'wide = df.pivot_table(index="{col}", values="{val}", aggfunc="mean")\n'
        "print(wide)\n"
    )
    annotated = (
        "# Import the data analysis library\n"
        "import pandas as pd\n\n"
        f"# Read the event log from {fname}\n"
        f'df = pd.read_csv("{fname}")\n'
        f"# Average {val} for each {col}\n"
        f'wide = df.pivot_table(index="{col}", values="{val}", aggfunc="mean")\n'
        "print(wide)\n"
    )
    return desc, raw, annotated


_FAMILIES = [
    _read_csv, _filter_rows, _group_agg, _merge_tables, _sort_values,
    _save_csv, _describe_stats, _dropna_clean, _rename_columns, _pivot_table,
]


class SyntheticCorpus:
    """Index-addressed synthetic programs for one domain."""

    def __init__(self, n_use_cases: int, broken_ordinal: int = BROKEN_ORDINAL):
        self.entries = []  # (description, raw, annotated)
        self.broken_ordinal = broken_ordinal if broken_ordinal <= n_use_cases else -1
        for idx in range(n_use_cases):
            desc, raw, annotated = _FAMILIES[idx % len(_FAMILIES)](idx)
            ordinal = idx + 1
            if ordinal == self.broken_ordinal:
                raw = raw.rstrip("\n").rstrip(")") + "\n"  # drop a closing paren
            self.entries.append((desc, raw, annotated))
        self.by_description = {d: (r, a) for d, r, a in self.entries}
        self.by_raw = {r: a for _, r, a in self.entries}

    def use_case_listing(self) -> str:
        return "\n".join(f"{i}. {d}" for i, (d, _, _) in enumerate(self.entries, start=1))


def changeable_response(snippet_code: str) -> str:
    """Fenced blocks for the string and number literals of a snippet."""
    fragments = []
    for token in tokenize(snippet_code):
        if token.kind in (TokenKind.STRING, TokenKind.NUMBER):
            fragments.append(token.text)
        if len(fragments) == 3:
            break
    if not fragments:
        return "These lines are part of the fixed idiom; nothing needs to change."
    return "\n\n".join(f"```\n{frag}\n```" for frag in fragments)


def name_response(cluster_text: str) -> str:
    """Majority subgoal comment of the cluster becomes its name."""
    goals: dict[str, int] = {}
    order: list[str] = []
    for line in cluster_text.splitlines():
        stripped = line.strip()
        if stripped.startswith("# "):
            goal = stripped[2:].strip()
            if goal not in goals:
                order.append(goal)
            goals[goal] = goals.get(goal, 0) + 1
    if not goals:
        return "Name: Shared setup code"
    best = max(order, key=lambda g: goals[g])
    return f"Name: {best}"


class RecordingProvider:
    """Synthesizes deterministic responses and records each under its fixture key."""

    def __init__(self, fixture_dir: Path, corpus: SyntheticCorpus):
        self.fixture_dir = Path(fixture_dir)
        self.corpus = corpus
        self.provider_id = "mock"
        self.max_in_flight = 1

    def complete(self, request: PromptRequest) -> str:
        text = self._respond(request)
        path = self.fixture_dir / request.kind.value / f"{request.fixture_key()}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return text

    def _respond(self, request: PromptRequest) -> str:
        values = request.values_dict()
        if request.kind is PromptKind.USE_CASES:
            return self.corpus.use_case_listing()
        if request.kind is PromptKind.CODE_FOR_USE_CASE:
            desc = values["USE_CASE"]
            raw, _ = self.corpus.by_description[desc]
            index = next(
                i for i, (d, _, _) in enumerate(self.corpus.entries) if d == desc
            )
            if index % 3 == 0:
                return f"```python\n{raw}\n```"  # strip removes exactly one newline
            return raw
        if request.kind is PromptKind.SUBGOAL_ANNOTATE:
            return self.corpus.by_raw[values["FULL_PROGRAM"]]
        if request.kind is PromptKind.CHANGEABLE_AREAS:
            return changeable_response(values["CODE_SNIPPET"])
        if request.kind is PromptKind.CLUSTER_NAME:
            return name_response(values["PROGRAMS_IN_CLUSTER"])
        raise MalformedResponseError(f"no synthetic response for {request.kind}")


def build_fixture_dir(
    fixture_dir: str | Path,
    config: PipelineConfig | None = None,
    domain_name: str = DEFAULT_LIBRARY,
    library_name: str = DEFAULT_LIBRARY,
) -> Path:
    """Populate ``fixture_dir`` by replaying the full pipeline in memory."""
    config = config or PipelineConfig()
    fixture_dir = Path(fixture_dir)
    fixture_dir.mkdir(parents=True, exist_ok=True)
    corpus = SyntheticCorpus(config.n_use_cases)
    store = Store(":memory:")
    try:
        provider = RecordingProvider(fixture_dir, corpus)
        gateway = Gateway(provider, store=store, config=config)
        Pipeline(store, gateway, config).run(domain_name, library_name)
    finally:
        store.close()
    return fixture_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Generate the deterministic mock-provider fixture tree."
    )
    parser.add_argument("--dir", required=True, help="output fixture directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--n-use-cases", type=int, default=None)
    parser.add_argument("--library", default=DEFAULT_LIBRARY)
    args = parser.parse_args(argv)
    overrides = {"seed": args.seed, "n_use_cases": args.n_use_cases}
    config = PipelineConfig(**{k: v for k, v in overrides.items() if v is not None})
    build_fixture_dir(args.dir, config, domain_name=args.library, library_name=args.library)
    print(f"fixtures written to {args.dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
