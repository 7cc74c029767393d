import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: dict[str, tuple[str, str]] = {}


def pytest_addoption(parser):
    parser.addoption("--long", action="store_true", default=False,
                     help="run the long reproduction experiments (tens of minutes to hours)")


def pytest_configure(config):
    config.addinivalue_line("markers", "long: long-running reproduction; needs --long")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--long"):
        return
    skip = pytest.mark.skip(reason="long run; pass --long")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def criterion():
    """``criterion(label, ok, detail)`` records one acceptance line and asserts ``ok``."""

    def record(label: str, ok: bool, detail: str = ""):
        prev = _CRITERIA.get(label)
        if prev is None or prev[0] == "PASS":
            _CRITERIA[label] = ("PASS" if ok else "FAIL", detail)
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    skipped = [r for r in terminalreporter.stats.get("skipped", []) if "test_acceptance" in r.nodeid]
    if not (_CRITERIA or skipped):
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: (int(s.split()[0]), s)):
        status, detail = _CRITERIA[label]
        terminalreporter.write_line(f"{status} {label}: {detail}")
    for rep in skipped:
        terminalreporter.write_line(f"SKIP {rep.nodeid.split('::')[-1]}: long run, pass --long")
