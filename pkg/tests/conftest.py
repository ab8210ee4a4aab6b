import json
import shutil
import tempfile
from pathlib import Path

import pytest
from hypothesis import strategies as st

from core.model import RateProfile, TailRule, build_model
from utils.cache import matrix_cache, trajectory_cache

FIXTURE_MODELS = Path(__file__).parent / "fixtures" / "models"


def make_model(R, prefix, tail_rows=(), kind="constant"):
    """Build a ProcessModel from plain lists."""
    profile = RateProfile(
        R=R,
        prefix=tuple(tuple(float(x) for x in row) for row in prefix),
        tail=TailRule(kind=kind, block=tuple(tuple(float(x) for x in row) for row in tail_rows)),
    )
    return build_model(profile)


@st.composite
def random_models(draw, max_prefix=4):
    """Valid profiles with R in {1, 2, 3, 5} and rates in [0.1, 10]."""
    R = draw(st.sampled_from([1, 2, 3, 5]))
    rate = st.floats(min_value=0.1, max_value=10.0, allow_nan=False, allow_infinity=False)
    row = st.lists(rate, min_size=R + 1, max_size=R + 1)
    prefix = draw(st.lists(row, min_size=1, max_size=max_prefix))
    prefix[0] = [0.0] + prefix[0][1:]
    periodic = draw(st.booleans())
    if periodic:
        block = draw(st.lists(row, min_size=1, max_size=3))
        return make_model(R, prefix + [draw(row)], block, kind="periodic")
    return make_model(R, prefix + [draw(row)])


def profile_to_data(profile):
    """The JSON document a model file holds for this profile."""
    tail = {"kind": profile.tail.kind}
    if profile.tail.block:
        tail["block"] = [list(row) for row in profile.tail.block]
    return {"R": profile.R, "prefix": [list(row) for row in profile.prefix], "tail": tail}


def write_model_file(profile, path):
    path = Path(path)
    path.write_text(json.dumps(profile_to_data(profile), indent=2) + "\n", encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def clear_caches():
    """Each test starts from empty numeric caches."""
    matrix_cache.clear()
    trajectory_cache.clear()
    yield


@pytest.fixture
def mm1_model():
    """R=1, lambda=1, mu=2: the M/M/1 queue with load 1/2."""
    return make_model(1, [[0, 1]], [[2, 1]])


@pytest.fixture
def mm1_fast_model():
    """R=1, lambda=1, mu=3."""
    return make_model(1, [[0, 1]], [[3, 1]])


@pytest.fixture
def r2_model():
    """R=2, (mu, lambda1, lambda2) = (4, 1, 1) everywhere, site 0 = (0, 1, 1)."""
    return make_model(2, [[0, 1, 1], [4, 1, 1]])


@pytest.fixture
def r2_unit_entry_model():
    """As r2_model, but site 0 only jumps by +1."""
    return make_model(2, [[0, 1, 0], [4, 1, 1]])


@pytest.fixture
def symmetric_model():
    """R=1, lambda = mu = 1: null recurrent."""
    return make_model(1, [[0, 1]], [[1, 1]])


@pytest.fixture
def periodic_model():
    """R=2 with a two-row periodic tail, positive recurrent."""
    return make_model(2, [[0, 1, 0], [3, 1, 0.5]], [[4, 1, 1], [2, 0.5, 0.25]], kind="periodic")


@pytest.fixture
def temp_workspace():
    """Create a temporary workspace for file operations."""
    temp_dir = tempfile.mkdtemp()
    workspace = Path(temp_dir).resolve()
    yield workspace
    shutil.rmtree(temp_dir)


@pytest.fixture
def model_file_factory(temp_workspace):
    """Write a model document (dict or raw text) and return its path."""
    def _write(content, name="model.json"):
        path = temp_workspace / name
        if isinstance(content, str):
            path.write_text(content, encoding="utf-8")
        else:
            path.write_text(json.dumps(content), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def fixture_model_path():
    def _path(name):
        return FIXTURE_MODELS / name
    return _path
