import pytest

from nnm_melnikov import builtin_model, continue_family, find_periodic_orbit, seed_from_linear_mode

NONLINEAR_DAMPING = {"alpha": 0.2481, "beta": -1.085, "gamma": 0.8314}


@pytest.fixture(scope="session")
def linear():
    return builtin_model("linear_oscillator")


@pytest.fixture(scope="session")
def duffing():
    return builtin_model("duffing")


@pytest.fixture(scope="session")
def chain6():
    return builtin_model("chain6")


@pytest.fixture(scope="session")
def chain6_nl():
    return builtin_model("chain6", NONLINEAR_DAMPING)


@pytest.fixture(scope="session")
def duffing_orbit(duffing):
    """Duffing orbit at energy 1/2 (amplitude ~0.87)."""
    return find_periodic_orbit(duffing, ([1.0, 0.0], 6.0), pin=("energy", 0.5))


@pytest.fixture(scope="session")
def linear_orbit(linear):
    return find_periodic_orbit(linear, ([1.0, 0.0], 6.0), pin=("energy", 0.5))


@pytest.fixture(scope="session")
def duffing_family(duffing):
    seed = find_periodic_orbit(duffing, seed_from_linear_mode(duffing, 1, 1e-3))
    return continue_family(duffing, seed, bounds={"energy": (0.0, 2.0)}, ds=0.05, ds_max=0.3)


@pytest.fixture(scope="session")
def linear_family(linear):
    seed = find_periodic_orbit(linear, ([0.1, 0.0], 6.0), pin=("energy", 0.005))
    return continue_family(linear, seed, bounds={"amplitude": (0.0, 2.0)}, ds=0.1, ds_max=0.2, tag="energy")


@pytest.fixture(scope="session")
def chain6_mode1_orbit(chain6):
    xi, tau = seed_from_linear_mode(chain6, 1, 0.05)
    return find_periodic_orbit(chain6, (xi, tau))


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line; ``verdict(n, ok, detail)`` prints and stores it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
