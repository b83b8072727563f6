import pytest

from sandnet.config import ExperimentConfig


@pytest.fixture
def small_config() -> ExperimentConfig:
    """Fast variant of the default setup for module-level tests."""
    return ExperimentConfig().with_overrides(
        surface_width_mm=120.0,
        surface_height_mm=60.0,
        duration_limit_s=60.0,
    )


@pytest.fixture(scope="session")
def default_sweep_12():
    """Session-wide delay sweep at the default 12.5 mm tool (acceptance data)."""
    from sandnet.experiment import sweep

    cfg = ExperimentConfig().with_overrides(sweep_tool_radii_mm=[12.5])
    return cfg, sweep(cfg)


@pytest.fixture(scope="session")
def default_sweep_25():
    """Session-wide delay sweep at the 25 mm tool (calibration-table data)."""
    from sandnet.experiment import sweep

    cfg = ExperimentConfig().with_overrides(
        sweep_tool_radii_mm=[25.0], tool_radius_mm=25.0
    )
    return cfg, sweep(cfg)
