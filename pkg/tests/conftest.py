import numpy as np
import pytest

from ssikit.ingest import BlockRecord

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_record(block_id="B1", locality_id="L1", houses=100, no_water=0, dirt=0, no_san=0,
                occupants=300, rooms=100, year=2010):
    return BlockRecord(block_id, locality_id, year, houses, no_water, dirt, no_san, occupants, rooms)


@pytest.fixture
def record():
    return make_record


def equicorrelation(r, p=4):
    R = np.full((p, p), r)
    np.fill_diagonal(R, 1.0)
    return R


def one_factor_model(loadings):
    lam = np.asarray(loadings, dtype=float)
    R = np.outer(lam, lam)
    np.fill_diagonal(R, 1.0)
    return R
