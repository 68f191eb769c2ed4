import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from metriq.coherent import FiducialSpec, default_quadrature  # noqa: E402
from metriq.config import GlobalConfig  # noqa: E402

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def cfg():
    return GlobalConfig()


@pytest.fixture(scope="session")
def quad(cfg):
    return default_quadrature(cfg, FiducialSpec())


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    detail = dict(report.user_properties).get("measured", "")
    if report.when == "call" or report.outcome != "passed":
        if hasattr(report, "wasxfail"):
            status = "FAIL (expected; see ledger)"
        elif report.passed:
            status = "PASS"
        elif report.skipped:
            status = "SKIP"
        else:
            status = "FAIL"
        _ACCEPTANCE[name] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        status, detail = _ACCEPTANCE[name]
        num = name.split("_")[2]
        label = " ".join(name.split("_")[3:])
        terminalreporter.write_line(f"criterion {int(num):2d} {label:24s} {status:8s} {detail}")
