import numpy as np
import pytest

from sarnav import TargetScene
from sarnav.config import config_from_dict
from sarnav.sim import backproject, simulate_phase_history


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].replace("test_", "", 1)
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {name}: {outcome}", flush=True)


@pytest.fixture(scope="session")
def desk():
    """Shared 2 s desk geometry: trajectory, center scene, phase history, reference."""
    cfg = config_from_dict({"geometry": {"aperture_s": 2.0, "pulse_rate": 200.0}})
    truth = cfg.make_trajectory()
    grid = cfg.make_grid()
    center = cfg.scene_center()
    scene = TargetScene(np.array([center]), np.array([1.0]))
    params = cfg.make_radar_params(truth, scene.positions)
    ph = simulate_phase_history(truth, scene, params)
    reference = backproject(ph, truth, grid, params)
    return {
        "cfg": cfg,
        "truth": truth,
        "grid": grid,
        "center": center,
        "scene": scene,
        "params": params,
        "ph": ph,
        "reference": reference,
    }
