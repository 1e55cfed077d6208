import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cropselect.knowledgebase import load_sample_db
from cropselect.schema import default_schema_path, load_default_schema
from cropselect.selection import SelectionStore


@pytest.fixture(scope="session")
def schema():
    return load_default_schema()


@pytest.fixture(scope="session")
def sample_db(schema):
    return load_sample_db(schema)


@pytest.fixture
def store(tmp_path):
    return SelectionStore(tmp_path / "selections")


@pytest.fixture
def writable_db_path(tmp_path):
    """A throwaway copy of the sample DB file for mutation tests."""
    from importlib import resources

    src = resources.files("cropselect.data").joinpath("sample.db")
    dst = tmp_path / "sample.db"
    dst.write_bytes(src.read_bytes())
    return dst


@pytest.fixture(scope="session")
def schema_path():
    return default_schema_path()
