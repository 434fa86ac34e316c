import numpy as np
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def structured_pair(rng):
    """Kalman-form pair in random coordinates with known stabilizability.

    The uncontrollable block has eigenvalues at least 0.2 away from the
    imaginary axis, so the ground truth is unambiguous numerically.
    """
    n = int(rng.integers(1, 7))
    r = int(rng.integers(0, n + 1))
    m = int(rng.integers(1, 4))
    k = n - r
    A11 = rng.standard_normal((r, r))
    B1 = rng.standard_normal((r, m))
    lam = rng.choice([-1.0, 1.0], size=k) * rng.uniform(0.2, 2.0, size=k)
    V = rng.standard_normal((k, k)) + 3 * np.eye(k)
    A22 = V @ np.diag(lam) @ np.linalg.inv(V) if k else np.zeros((0, 0))
    A = np.block([[A11, rng.standard_normal((r, k))], [np.zeros((k, r)), A22]])
    B = np.vstack([B1, np.zeros((k, m))])
    Tm = np.linalg.qr(rng.standard_normal((n, n)))[0]
    return Tm @ A @ Tm.T, Tm @ B, bool(np.all(lam < 0))


def record_acceptance(line: str) -> None:
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
