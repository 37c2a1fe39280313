import math

import pytest

from terminal_vdp import ChiParams, ManifoldParams, reference_config, validate_scenario

REF_A = ChiParams(0.5, 1.0)
REF_B = ManifoldParams(4.0, 1.5)
REF_MU = 0.1


@pytest.fixture
def ref_b():
    return REF_B


@pytest.fixture
def ref_a():
    return REF_A


@pytest.fixture
def unbounded_reference():
    cfg = reference_config(bounded=False)
    cfg["integrator"]["sample_every"] = 1
    return validate_scenario(cfg)


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion; printed in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def report(number, name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} {name}: {detail}"
        lines.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
