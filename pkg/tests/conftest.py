import time
from pathlib import Path

import pytest
from hypothesis import settings

from sectorlearn.config import load_config
from sectorlearn.harness import run_offline_training

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# criterion number -> (title, PASS | FAIL | SKIP)
_CRITERIA: dict[int, tuple[str, str]] = {}

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    # keep the worst outcome per criterion across setup/call/teardown
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    store = _CRITERIA
    number, title = marker
    prev = store.get(number, (title, "PASS"))
    outcome = prev[1]
    if report.failed:
        outcome = "FAIL"
    elif report.skipped and outcome == "PASS":
        outcome = "SKIP"
    store[number] = (title, outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    store = _CRITERIA
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        title, outcome = store[number]
        terminalreporter.write_line(f"criterion {number:2d} [{outcome}] {title}")


class TimedRun:
    def __init__(self, cfg, out):
        t0 = time.perf_counter()
        self.arts = run_offline_training(cfg, out)
        self.elapsed = time.perf_counter() - t0
        self.cfg = cfg
        self.out = Path(out)


@pytest.fixture(scope="session")
def trained_runs(tmp_path_factory):
    """Lazily trained example configs, shared by every test in the session."""
    cache = {}

    def get(name: str, tag: str = "a") -> TimedRun:
        key = (name, tag)
        if key not in cache:
            cfg = load_config(CONFIGS / f"{name}.yaml")
            cache[key] = TimedRun(cfg, tmp_path_factory.mktemp(f"{name}_{tag}"))
        return cache[key]

    return get
