from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixture_corpus import FixtureTree, build_fixture_tree  # noqa: E402

from medcorpus.cli import main as cli_main  # noqa: E402


@pytest.fixture(scope="session")
def fixture_tree(tmp_path_factory) -> FixtureTree:
    return build_fixture_tree(tmp_path_factory.mktemp("fixture"))


@pytest.fixture(scope="session")
def corpus_dir(fixture_tree: FixtureTree) -> Path:
    out = fixture_tree.root / "corpus"
    code = cli_main(
        [
            "ingest",
            "--input", str(fixture_tree.xml_dir),
            "--output", str(out),
            "--min-tokens", "64",
            "--shard-size", "10",
        ]
    )
    assert code == 0
    return out


@pytest.fixture(scope="session")
def annotations_path(fixture_tree: FixtureTree) -> Path:
    return fixture_tree.annotations
