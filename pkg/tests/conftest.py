import dataclasses

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion id -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


@pytest.fixture(scope="session")
def desk_reports():
    """Oracle comparisons at the desk preset for eps_q > 0, < 0 and = 0 (shared, ~45 s)."""
    from dqdcavity.oracle import DESK, oracle_iq_compare

    return {
        sign: oracle_iq_compare(dataclasses.replace(DESK, eps_q=sign * DESK.eps_q))
        for sign in (1, -1, 0)
    }


@pytest.fixture(scope="session")
def desk_report_n24():
    """Desk comparison for eps_q > 0 with twice the default Fock truncation."""
    from dqdcavity.oracle import DESK, auto_config, oracle_iq_compare

    return oracle_iq_compare(DESK, auto_config(DESK, n_max=24))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        title, passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:<4} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
