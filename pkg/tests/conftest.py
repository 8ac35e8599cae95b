import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    max_examples=50,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

from ledvlc.optics import CameraModel, LinkGeometry


@pytest.fixture
def camera():
    """Reference platform camera: f=30 mm, F=1.8, P=10 um, L=90 mm."""
    return CameraModel(
        f_mm=30.0,
        f_number=1.8,
        pixel_pitch_um=10.0,
        lens_length_mm=90.0,
        image_w=1280,
        image_h=1024,
    )


@pytest.fixture
def geometry():
    return LinkGeometry(
        n_leds=16,
        pitch_m=0.03,
        focus_m=1.0,
        comm_m=6.0,
        ref_spacing_px=25.0,
        ref_distance_m=6.0,
    )


# ---------------------------------------------------------------------------
# Acceptance-summary bookkeeping: one PASS/FAIL line per acceptance criterion
# is printed in the terminal summary.
# ---------------------------------------------------------------------------

_ACCEPTANCE_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    name = item.name
    base = name.split("[")[0]
    entry = _ACCEPTANCE_RESULTS.setdefault(base, {"passed": 0, "failed": 0})
    if report.passed:
        entry["passed"] += 1
    elif report.failed:
        entry["failed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        entry = _ACCEPTANCE_RESULTS[name]
        status = "PASS" if entry["failed"] == 0 else "FAIL"
        detail = f"{entry['passed']} passed"
        if entry["failed"]:
            detail += f", {entry['failed']} failed"
        terminalreporter.write_line(f"{status}  {name} ({detail})")
