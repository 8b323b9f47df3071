import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from afforda import fixtures


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    """The bundled 3-sample / 2-clip dataset, built once per session."""
    root = tmp_path_factory.mktemp("fixture")
    fixtures.build_fixture(root)
    return root


@pytest.fixture(scope="session")
def scripted(tmp_path_factory):
    return fixtures.scripted_clip()
