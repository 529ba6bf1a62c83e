import os
import sys
from pathlib import Path

import pytest

from momlab.arith import sieve_lambda
from momlab.weights import make_weight
from momlab.zeros import cached_store


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    env = os.environ.get("MOMLAB_CACHE")
    return Path(env) if env else tmp_path_factory.mktemp("cache")


@pytest.fixture(scope="session")
def table():
    return sieve_lambda(2 * 10**6)


@pytest.fixture(scope="session")
def small_table():
    return sieve_lambda(10**5)


@pytest.fixture(scope="session")
def expk1():
    return make_weight("expK:1")


@pytest.fixture(scope="session")
def stores(cache_dir):
    """Zeros to height 400 for the small moduli, computed once per session."""
    made = {}

    def get(q, T=400.0):
        key = (q, T)
        if key not in made:
            made[key] = cached_store(q, T, cache_dir)
        return made[key]

    return get


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines after the run."""
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
