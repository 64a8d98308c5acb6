import numpy as np
import pytest

from evdrcc.config import default_config_path, load_config
from evdrcc.network import Bus, Evcs, Generator, Line, Network, bundled_path, load_network


def make_network(loads, lines, gens, stations, base_mva=1.0, v2=(0.81, 1.21)):
    """Tiny network from plain tuples.

    loads: {bus: (p, q)} for non-root buses (bus 0 is the root);
    lines: [(from, to, r, x, s_max)]; gens: [(bus, pmin, pmax, qmin, qmax, c2, c1, c0)];
    stations: [(id, bus)].
    """
    buses = [Bus(0, "root", 0.0, 0.0, *v2)]
    buses += [Bus(b, "load", p, q, *v2) for b, (p, q) in sorted(loads.items())]
    return Network(base_mva, tuple(buses), tuple(Line(*ln) for ln in lines),
                   tuple(Generator(*g) for g in gens),
                   tuple(Evcs(sid, bus, 10, 0.3, 0.3) for sid, bus in stations), "test")


@pytest.fixture
def two_bus():
    # root -- 1, 1 MW load, one station at bus 1, one root generator
    return make_network({1: (1.0, 0.0)}, [(0, 1, 0.01, 0.01, 10.0)],
                        [(0, 0.0, 10.0, -10.0, 10.0, 1.0, 10.0, 0.0)], [(1, 1)])


@pytest.fixture(scope="session")
def net33():
    return load_network(bundled_path("ieee33"))


@pytest.fixture(scope="session")
def net123():
    return load_network(bundled_path("ieee123"))


@pytest.fixture(scope="session")
def cfg33():
    return load_config(default_config_path("ieee33"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts: criterion -> list of (ok, detail)
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in range(1, 10):
        parts = ACCEPTANCE.get(c)
        if not parts:
            tr.write_line(f"criterion {c}: NOT RUN")
            continue
        ok = all(p for p, _ in parts)
        tr.write_line(f"criterion {c}: {'PASS' if ok else 'FAIL'} ({'; '.join(d for _, d in parts)})")
