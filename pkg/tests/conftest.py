import numpy as np
import pytest
import scipy.optimize

from wcgmres.matgen import gen_jordan, gen_toh

# Acceptance lines recorded by test_acceptance.py, echoed in the summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def toh():
    return gen_toh(omega=1.0, epsilon=0.1)


@pytest.fixture
def jordan11():
    return gen_jordan(11, 1.0)


def rng_for(seed):
    return np.random.default_rng(seed)


def eigen_minmax(lams, k):
    """min over real c of max_i |1 - sum_j c_j lam_i^j| for real lams, by LP.

    Variables (c_1..c_k, t); minimize t subject to
    -t <= 1 - V c <= t with V_ij = lam_i^j.
    """
    lams = np.asarray(lams, dtype=float)
    V = np.column_stack([lams ** j for j in range(1, k + 1)])
    m = len(lams)
    A_ub = np.block([[-V, -np.ones((m, 1))], [V, -np.ones((m, 1))]])
    b_ub = np.concatenate([-np.ones(m), np.ones(m)])
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    res = scipy.optimize.linprog(cost, A_ub=A_ub, b_ub=b_ub,
                                 bounds=[(None, None)] * k + [(0, None)], method="highs")
    assert res.success
    return res.x[-1], res.x[:k]


def ls_residual_norm(A, b, k):
    """Independent oracle: least squares on the raw Krylov matrix (lstsq)."""
    K = np.column_stack([np.linalg.matrix_power(A, j) @ b for j in range(1, k + 1)])
    c = np.linalg.lstsq(K, b, rcond=None)[0]
    return np.linalg.norm(b - K @ c), c
