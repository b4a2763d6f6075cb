import json
from pathlib import Path

import pytest

from planforge.config import PipelineConfig
from planforge.gateway import Gateway, MockProvider
from planforge.mockdata import build_fixture_dir
from planforge.pipeline import Pipeline
from planforge.store import Store


@pytest.fixture()
def store(tmp_path):
    s = Store(tmp_path / "test.db")
    yield s
    s.close()


@pytest.fixture(scope="session")
def pipeline_config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory, pipeline_config):
    """Mock-provider fixture tree for the default config, built once."""
    path = tmp_path_factory.mktemp("fixtures")
    build_fixture_dir(path, pipeline_config)
    return path


@pytest.fixture(scope="session")
def populated(tmp_path_factory, fixture_dir, pipeline_config):
    """A store holding one complete mock pipeline run (session-wide, read-mostly)."""
    db = tmp_path_factory.mktemp("db") / "populated.db"
    store = Store(db)
    gateway = Gateway(MockProvider(fixture_dir), store=store, config=pipeline_config)
    domain, manifest = Pipeline(store, gateway, pipeline_config).run("pandas", "pandas")
    yield {"store": store, "domain": domain, "manifest": manifest,
           "db_path": db, "fixtures": fixture_dir}
    store.close()


def canonical(store: Store) -> str:
    return json.dumps(store.dump_state(), sort_keys=True)


@pytest.fixture()
def small_corpus(tmp_path):
    """Five files, three passing the default ingest filter."""
    root = tmp_path / "corpus"
    root.mkdir()
    files = {
        "alpha.py": 'from bs4 import BeautifulSoup\nsoup = BeautifulSoup(html)\nprint(soup.title)\n',
        "beta.py": 'from bs4 import BeautifulSoup\nsoup = BeautifulSoup(doc)\nlinks = soup.find_all("a")\n',
        "gamma.py": 'from bs4 import BeautifulSoup\nsoup = BeautifulSoup(page\n',  # syntax error
        "test_delta.py": 'from bs4 import BeautifulSoup\nsoup = BeautifulSoup(html)\n',
        "epsilon.py": 'import requests\nbody = requests.get(url).text\n',  # no constructor
    }
    for name, text in files.items():
        (root / name).write_text(text, encoding="utf-8")
    return root
