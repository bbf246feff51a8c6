import numpy as np
import pytest

from drillscan import DrillSpec, PipelineConfig, ScanMeta, measure_scan, scan_drill

_CRITERION_RESULTS = []


@pytest.fixture
def criterion():
    """Collector for acceptance-criterion outcomes, printed in the summary."""
    def record(name: str, passed: bool, detail: str):
        _CRITERION_RESULTS.append((name, passed, detail))
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_RESULTS:
        terminalreporter.section("acceptance criteria")
        for name, passed, detail in _CRITERION_RESULTS:
            terminalreporter.write_line(
                f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def standard_meta(frames=1000, points=1350):
    return ScanMeta(frame_count=frames, points_per_frame=points,
                    axis_distance=150.0, gamma=5.0)


@pytest.fixture(scope="session")
def small_meta():
    return standard_meta(frames=360, points=540)


@pytest.fixture(scope="session")
def small_bent_scan(small_meta):
    """Cheap bent-drill scan shared by unit tests (noiseless)."""
    spec = DrillSpec(bend_amplitude=0.15, bend_phi_deg=25.0)
    scan, truth = scan_drill(spec, small_meta, noise_sigma=0.0, seed=11)
    return spec, scan, truth


@pytest.fixture(scope="session")
def small_measure_result(small_bent_scan):
    spec, scan, truth = small_bent_scan
    result = measure_scan(scan, PipelineConfig())
    return spec, scan, truth, result


@pytest.fixture(scope="session")
def straight_cylinder_scan(small_meta):
    """Zero-bend drill: every nominal surface lies exactly on the reference circle."""
    spec = DrillSpec(bend_amplitude=0.0)
    scan, truth = scan_drill(spec, small_meta, noise_sigma=0.0, seed=7)
    return spec, scan, truth


def label_accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    return float(np.mean(predicted == truth))
