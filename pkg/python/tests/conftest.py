"""
Shared fixtures for shrinklab tests.
"""

import json

import pytest

from shrinklab import RealScalar, build_liouville_vector


@pytest.fixture(scope="session")
def golden():
    """(sqrt(5) - 1) / 2 at the default precision."""
    return RealScalar.constant("golden")


@pytest.fixture(scope="session")
def liouville_d1_eq3():
    """Nested d=1 vector with an eq3 certificate of length 3 (Q = 2, 16, 32768)."""
    return build_liouville_vector(1, "eq3", 3)


@pytest.fixture(scope="session")
def liouville_d2_eq7():
    """Nested d=2 vector with an eq7 certificate of length 2 (Q = 3, 108)."""
    return build_liouville_vector(2, "eq7", 2)


@pytest.fixture(scope="session")
def convergent_eq3():
    """d=1 vector on convergents, eq3 law; q_n = 2, 5, 162, 39371."""
    return build_liouville_vector(1, "eq3", 4, on_convergents=True)


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict to a JSON file and return its path."""

    def _write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path

    return _write
