import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def hartmann_runs():
    """Quadrature C, spectrum and the raw grid for both Hartmann outputs (11 points per dimension)."""
    from piactive.models import HartmannModel
    from piactive.subspace import eigendecompose, estimate_c_quadrature

    runs = {}
    for qoi in ("u_avg", "b_ind"):
        model = HartmannModel(qoi)
        est, grid = estimate_c_quadrature(model, points_per_dim=11, return_gradients=True)
        runs[qoi] = {"model": model, "estimate": est, "grid": grid, "spectrum": eigendecompose(est)}
    return runs


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.report_lines():
        terminalreporter.write_line(line)
