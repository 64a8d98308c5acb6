import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evdrcc.network import (NetworkDataError, downstream_matrix, from_pu, load_network,
                            to_pu, total_load)

from conftest import make_network


def chain(n):
    loads = {i: (0.1, 0.05) for i in range(1, n + 1)}
    lines = [(i - 1, i, 0.01, 0.01, 5.0) for i in range(1, n + 1)]
    return make_network(loads, lines, [(0, 0, 5, -5, 5, 0, 1, 0)], [])


def test_bundled_feeders(net33, net123):
    assert (net33.n_buses, net33.n_lines) == (33, 32)
    assert (net123.n_buses, net123.n_lines) == (123, 122)
    assert net33.total_p_load == pytest.approx(29.72, abs=1e-9)
    assert net123.total_p_load == pytest.approx(27.92, abs=1e-9)
    for net in (net33, net123):
        assert net.n_generators == 4 and net.n_stations == 4
        assert len({s.bus for s in net.stations}) == 4


def test_lines_oriented_from_root(net33):
    seen = {net33.root.id}
    # walking parents from any bus reaches the root
    parent = {ln.to_bus: ln.from_bus for ln in net33.lines}
    for b in net33.nonroot_ids:
        node, hops = b, 0
        while node != net33.root.id:
            node = parent[node]
            hops += 1
            assert hops <= net33.n_lines
        seen.add(b)
    assert len(seen) == 33


def test_downstream_small_cases():
    A = downstream_matrix(chain(2)).A
    np.testing.assert_array_equal(A, [[1, 1], [0, 1]])
    np.testing.assert_array_equal(downstream_matrix(chain(1)).A, [[1]])
    star = make_network({1: (0.1, 0), 2: (0.1, 0)}, [(0, 1, .01, .01, 1), (0, 2, .01, .01, 1)],
                        [(0, 0, 1, -1, 1, 0, 1, 0)], [])
    np.testing.assert_array_equal(downstream_matrix(star).A, np.eye(2))


def test_column_sums_equal_depth(net33):
    A = downstream_matrix(net33).A
    parent = {ln.to_bus: ln.from_bus for ln in net33.lines}
    for j, b in enumerate(net33.nonroot_ids):
        depth, node = 0, b
        while node != net33.root.id:
            node, depth = parent[node], depth + 1
        assert A[:, j].sum() == depth


@st.composite
def random_tree(draw):
    n = draw(st.integers(2, 25))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    w = draw(st.lists(st.floats(-5, 5, allow_nan=False), min_size=n - 1, max_size=n - 1))
    return parents, np.array(w)


@settings(max_examples=60, deadline=None)
@given(random_tree())
def test_downstream_matches_traversal(tree):
    parents, w = tree
    n = len(parents) + 1
    lines = [(p, i, 0.01, 0.01, 1.0) for i, p in zip(range(1, n), parents)]
    net = make_network({i: (0.0, 0.0) for i in range(1, n)}, lines, [(0, 0, 1, -1, 1, 0, 1, 0)], [])
    A = downstream_matrix(net)
    col = {b: j for j, b in enumerate(A.bus_ids)}
    children = {i: [] for i in range(n)}
    for i, p in zip(range(1, n), parents):
        children[p].append(i)

    def subtree_sum(b):
        return w[col[b]] + sum(subtree_sum(c) for c in children[b])

    expect = [subtree_sum(ln.to_bus) for ln in net.lines]
    np.testing.assert_allclose(A.A @ w, expect, atol=1e-12)
    leaves = [k for k, ln in enumerate(net.lines) if not children[ln.to_bus]]
    assert all(A.A[k].sum() == 1 for k in leaves)


def test_total_load_rows(net33):
    tot, evcd, pct = total_load(net33, [1.32, 0, 0, 0])
    assert tot == pytest.approx(31.04, abs=1e-9)
    assert pct == pytest.approx(100 * 1.32 / 29.72, abs=1e-12)
    assert round(pct, 2) == 4.44
    tot, _, pct = total_load(net33, [4.63, 0, 0, 0])
    assert tot == pytest.approx(34.35, abs=1e-9)
    assert pct == pytest.approx(100 * 4.63 / 29.72, abs=1e-12)
    assert total_load(net33, np.zeros(4)) == (pytest.approx(29.72), 0.0, 0.0)


def test_per_unit_roundtrip(rng):
    x = rng.uniform(-50, 50, 100)
    np.testing.assert_allclose(from_pu(to_pu(x, 10.0), 10.0), x, rtol=1e-12)


def test_cycle_rejected():
    with pytest.raises(NetworkDataError, match="not radial"):
        make_network({1: (0, 0), 2: (0, 0)},
                     [(0, 1, .01, .01, 1), (1, 2, .01, .01, 1), (2, 0, .01, .01, 1)],
                     [(0, 0, 1, -1, 1, 0, 1, 0)], [])
    with pytest.raises(NetworkDataError, match="not radial"):
        make_network({1: (0, 0), 2: (0, 0), 3: (0, 0)},
                     [(0, 1, .01, .01, 1), (2, 3, .01, .01, 1), (3, 2, .01, .01, 1)],
                     [(0, 0, 1, -1, 1, 0, 1, 0)], [])


def test_bundle_with_cycle(tmp_path):
    from evdrcc.network import bundled_path
    dst = tmp_path / "b"
    shutil.copytree(bundled_path("ieee33"), dst)
    text = (dst / "lines.csv").read_text().splitlines()
    text.append("33,18,0.001,0.001,5")  # tie switch closes a loop
    (dst / "lines.csv").write_text("\n".join(text) + "\n")
    with pytest.raises(NetworkDataError, match="not radial"):
        load_network(dst)


def test_bad_csv_reports_line(tmp_path):
    from evdrcc.network import bundled_path
    dst = tmp_path / "b"
    shutil.copytree(bundled_path("ieee33"), dst)
    rows = (dst / "buses.csv").read_text().splitlines()
    rows[3] = rows[3].replace(rows[3].split(",")[2], "abc", 1)
    (dst / "buses.csv").write_text("\n".join(rows) + "\n")
    with pytest.raises(NetworkDataError, match=r"buses.csv:4"):
        load_network(dst)


def test_invalid_entities():
    with pytest.raises(NetworkDataError, match="root"):
        make_network({1: (0, 0)}, [(0, 1, .01, .01, 1)], [], []).__class__(
            1.0, (), (), (), ())
    with pytest.raises(NetworkDataError, match="generator"):
        make_network({1: (0, 0)}, [(0, 1, .01, .01, 1)], [(5, 0, 1, -1, 1, 0, 1, 0)], [])
    with pytest.raises(NetworkDataError, match="station"):
        make_network({1: (0, 0)}, [(0, 1, .01, .01, 1)], [(0, 0, 1, -1, 1, 0, 1, 0)], [(1, 7)])
    with pytest.raises(NetworkDataError, match="impedance"):
        make_network({1: (0, 0)}, [(0, 1, -.01, .01, 1)], [(0, 0, 1, -1, 1, 0, 1, 0)], [])
