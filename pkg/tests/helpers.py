"""Finite-difference oracle shared by the test modules."""
import numpy as np


def central_difference(f, theta, step=1e-5):
    """Central finite-difference gradient of scalar ``f`` at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = step
        grad[k] = (f(theta + e) - f(theta - e)) / (2 * step)
    return grad


def rel_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


# one (criterion, passed, detail) entry per acceptance check, printed by conftest
ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


def report_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((number, bool(passed), detail))
    print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
    assert passed, detail
