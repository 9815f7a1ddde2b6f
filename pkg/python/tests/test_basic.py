"""
Basic tests for the shrinklab package surface.
"""

import shrinklab
from shrinklab import ExperimentConfig, RealScalar, TorusPoint


def test_import():
    """Test that the main types can be imported."""
    assert ExperimentConfig is not None
    assert RealScalar is not None
    assert TorusPoint is not None


def test_version():
    """Test that version is available."""
    assert hasattr(shrinklab, "__version__")
    assert isinstance(shrinklab.__version__, str)


def test_all_names_exist():
    for name in shrinklab.__all__:
        assert hasattr(shrinklab, name), name


def test_config_repr():
    config = ExperimentConfig(kind="approx", params={"alpha": ["golden"], "q_max": 10})
    r = repr(config)
    assert "ExperimentConfig" in r
    assert "approx" in r


def test_torus_point_reduces():
    p = TorusPoint.of(1.25, -0.25)
    assert p.coords == (0.25, 0.75)
