import numpy as np
import pytest
from hypothesis import strategies as st

from tvinterp.core import BlockMatrix, BlockSpace


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def scalar_bm(rows, lo=0):
    """Block matrix with 1x1 blocks from a nested list of numbers."""
    a = np.array(rows, dtype=complex)
    n = a.shape[0]
    sp = BlockSpace.from_dims(lo, [1] * n)
    return BlockMatrix.from_dense(a, sp, sp)


def random_upper(rng, dims, strict=False, lo=0):
    sp = BlockSpace.from_dims(lo, dims)
    blocks = {}
    for j in sp.window:
        for k in sp.window:
            if j < k or (j == k and not strict):
                blocks[(j, k)] = rng.standard_normal((sp.dim(j), sp.dim(k))) + 1j * rng.standard_normal(
                    (sp.dim(j), sp.dim(k))
                )
    return BlockMatrix(sp, sp, blocks)


dims_st = st.lists(st.integers(0, 3), min_size=1, max_size=5)
seeds = st.integers(0, 2**32 - 1)


ACCEPTANCE_LINES = []


def report_criterion(number, ok, detail):
    """Record and print one pass/fail line for an acceptance criterion."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
