"""Radial feeder data model, CSV bundle loader and the downstream incidence matrix.

A bundle is a directory holding ``buses.csv``, ``lines.csv``, ``generators.csv``,
``stations.csv`` and a ``bundle.meta`` file of ``key = value`` lines (at least
``base_mva``).  Physical quantities are kept in MW/MVAr/MVA on the dataclasses;
the ``*_pu`` accessors of :class:`Network` return per-unit arrays on ``base_mva``.
"""

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ._validation import check_vector

BUS_COLUMNS = ("id", "kind", "p_load_mw", "q_load_mvar", "v2_min", "v2_max")
LINE_COLUMNS = ("from", "to", "r_pu", "x_pu", "s_max_mva")
GEN_COLUMNS = ("bus", "p_min_mw", "p_max_mw", "q_min_mvar", "q_max_mvar", "c2", "c1", "c0")
STATION_COLUMNS = ("id", "bus", "chargers", "lambda_nominal", "lambda_offered")


class NetworkDataError(ValueError):
    """Raised for malformed or inconsistent network data."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    p_load: float
    q_load: float
    v2_min: float
    v2_max: float


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r: float
    x: float
    s_max: float


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    c2: float
    c1: float
    c0: float


@dataclass(frozen=True)
class Evcs:
    id: int
    bus: int
    chargers: int
    lambda_nominal: float
    lambda_offered: float


@dataclass(frozen=True)
class IncidenceMap:
    """Binary line-by-bus matrix; ``A[l, j] = 1`` iff bus ``j`` lies below line ``l``.

    Rows follow ``Network.lines``, columns follow ``Network.nonroot_ids``.
    """

    A: np.ndarray
    line_index: tuple
    bus_ids: tuple


@dataclass(frozen=True, eq=False)
class Network:
    """Validated radial network.

    Lines are stored oriented away from the root (``from_bus`` is the parent).
    """

    base_mva: float
    buses: tuple
    lines: tuple
    generators: tuple
    stations: tuple
    name: str = ""
    _parent_line: dict = field(default=None, repr=False)

    def __post_init__(self):
        _validate(self)

    # -- indexing -------------------------------------------------------
    @cached_property
    def root(self):
        return next(b for b in self.buses if b.kind == "root")

    @cached_property
    def bus_index(self):
        return {b.id: i for i, b in enumerate(self.buses)}

    @cached_property
    def nonroot_ids(self):
        return tuple(b.id for b in self.buses if b.kind != "root")

    @cached_property
    def nonroot_index(self):
        return {bid: j for j, bid in enumerate(self.nonroot_ids)}

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_lines(self):
        return len(self.lines)

    @property
    def n_generators(self):
        return len(self.generators)

    @property
    def n_stations(self):
        return len(self.stations)

    # -- per-unit arrays ------------------------------------------------
    @cached_property
    def p_load_pu(self):
        return np.array([b.p_load for b in self.buses]) / self.base_mva

    @cached_property
    def q_load_pu(self):
        return np.array([b.q_load for b in self.buses]) / self.base_mva

    @cached_property
    def v2_bounds(self):
        return (np.array([b.v2_min for b in self.buses]),
                np.array([b.v2_max for b in self.buses]))

    @cached_property
    def r(self):
        return np.array([ln.r for ln in self.lines])

    @cached_property
    def x(self):
        return np.array([ln.x for ln in self.lines])

    @cached_property
    def s_max_pu(self):
        return np.array([ln.s_max for ln in self.lines]) / self.base_mva

    @cached_property
    def gen_bounds_pu(self):
        g = self.generators
        arr = np.array([[x.p_min, x.p_max, x.q_min, x.q_max] for x in g]) / self.base_mva
        return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]

    @cached_property
    def line_from(self):
        return np.array([self.bus_index[ln.from_bus] for ln in self.lines])

    @cached_property
    def line_to(self):
        return np.array([self.bus_index[ln.to_bus] for ln in self.lines])

    @cached_property
    def gen_bus_index(self):
        return np.array([self.bus_index[g.bus] for g in self.generators])

    @cached_property
    def station_bus_index(self):
        return np.array([self.bus_index[s.bus] for s in self.stations])

    def incidence(self, kind):
        """Bus-by-item 0/1 matrix for ``kind`` in {'generator', 'station'}."""
        idx = self.gen_bus_index if kind == "generator" else self.station_bus_index
        M = np.zeros((self.n_buses, len(idx)))
        M[idx, np.arange(len(idx))] = 1.0
        return M

    @property
    def total_p_load(self):
        return math.fsum(b.p_load for b in self.buses)


def _validate(net):
    if net.base_mva <= 0:
        raise NetworkDataError("base_mva must be positive")
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        raise NetworkDataError("duplicate bus ids")
    roots = [b for b in net.buses if b.kind == "root"]
    if len(roots) != 1:
        raise NetworkDataError(f"expected exactly one root bus, found {len(roots)}")
    for b in net.buses:
        if b.kind not in ("root", "load"):
            raise NetworkDataError(f"bus {b.id}: unknown kind {b.kind!r}")
        if not b.v2_min < b.v2_max:
            raise NetworkDataError(f"bus {b.id}: v2_min must be below v2_max")
        if b.kind == "load" and (b.p_load < 0 or b.q_load < 0):
            raise NetworkDataError(f"bus {b.id}: negative load")
    idset = set(ids)
    for ln in net.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in idset:
                raise NetworkDataError(f"line {ln.from_bus}-{ln.to_bus}: unknown bus {end}")
        if ln.r < 0 or ln.x < 0 or ln.s_max <= 0:
            raise NetworkDataError(f"line {ln.from_bus}-{ln.to_bus}: invalid impedance or rating")
    if len(net.lines) != len(net.buses) - 1:
        raise NetworkDataError(
            f"not radial: {len(net.lines)} lines for {len(net.buses)} buses")
    for g in net.generators:
        if g.bus not in idset:
            raise NetworkDataError(f"generator at unknown bus {g.bus}")
        if g.p_min > g.p_max or g.q_min > g.q_max or g.c2 < 0:
            raise NetworkDataError(f"generator at bus {g.bus}: invalid limits or cost")
    sids = [s.id for s in net.stations]
    if len(set(sids)) != len(sids):
        raise NetworkDataError("duplicate station ids")
    for s in net.stations:
        if s.bus not in idset:
            raise NetworkDataError(f"station {s.id} at unknown bus {s.bus}")
        if s.chargers < 1 or s.lambda_nominal < 0 or s.lambda_offered < 0:
            raise NetworkDataError(f"station {s.id}: invalid chargers or price")

    # orient lines away from the root, rejecting cycles and islands
    adj = {i: [] for i in ids}
    for k, ln in enumerate(net.lines):
        adj[ln.from_bus].append((ln.to_bus, k))
        adj[ln.to_bus].append((ln.from_bus, k))
    parent_line = {}
    seen = {roots[0].id}
    queue = deque([roots[0].id])
    oriented = list(net.lines)
    while queue:
        u = queue.popleft()
        for v, k in adj[u]:
            if k == parent_line.get(u):
                continue
            if v in seen:
                raise NetworkDataError("not radial: line set contains a cycle")
            seen.add(v)
            parent_line[v] = k
            ln = net.lines[k]
            if ln.from_bus != u:
                oriented[k] = Line(u, v, ln.r, ln.x, ln.s_max)
            queue.append(v)
    if len(seen) != len(ids):
        raise NetworkDataError("not radial: network is disconnected")
    object.__setattr__(net, "lines", tuple(oriented))
    object.__setattr__(net, "_parent_line", parent_line)


def downstream_matrix(net):
    """Downstream incidence matrix of a radial network.

    Each line carries the net load of every bus in the subtree it feeds, so
    ``A @ w`` gives per-line downstream sums of a non-root injection vector ``w``.
    """
    nr = net.nonroot_index
    A = np.zeros((net.n_lines, len(nr)))
    by_to = {ln.to_bus: k for k, ln in enumerate(net.lines)}
    root = net.root.id
    for bid, j in nr.items():
        node = bid
        while node != root:
            k = by_to[node]
            A[k, j] = 1.0
            node = net.lines[k].from_bus
    return IncidenceMap(A=A, line_index=tuple(range(net.n_lines)), bus_ids=net.nonroot_ids)


def total_load(net, p_ev):
    """Return ``(total_mw, evcd_mw, penetration_pct)`` for station demand ``p_ev`` in MW."""
    p_ev = check_vector(p_ev, "p_ev", size=net.n_stations, nonnegative=True)
    base = net.total_p_load
    return _load_summary(base, p_ev.sum())


def _load_summary(base_mw, evcd_mw):
    evcd_mw = float(evcd_mw)
    pct = 100.0 * evcd_mw / base_mw if base_mw > 0 else 0.0
    return base_mw + evcd_mw, evcd_mw, pct


def to_pu(value, base_mva):
    return np.asarray(value, dtype=float) / base_mva


def from_pu(value, base_mva):
    return np.asarray(value, dtype=float) * base_mva


# -- CSV bundle loading ----------------------------------------------------

def _read_table(path, columns, converters):
    if not path.exists():
        raise NetworkDataError(f"missing file: {path}")
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise NetworkDataError(f"{path.name}: empty file") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise NetworkDataError(f"{path.name}: missing columns {missing}")
        pos = [header.index(c) for c in columns]
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) < len(header):
                raise NetworkDataError(f"{path.name}:{lineno}: expected {len(header)} fields, got {len(raw)}")
            values = []
            for col, p, conv in zip(columns, pos, converters):
                cell = raw[p].strip()
                try:
                    values.append(conv(cell))
                except ValueError:
                    raise NetworkDataError(
                        f"{path.name}:{lineno}: column '{col}': cannot parse {cell!r}") from None
            rows.append(values)
    return rows


def read_meta(path):
    meta = {}
    if not path.exists():
        raise NetworkDataError(f"missing file: {path}")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise NetworkDataError(f"{path.name}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        meta[k.strip()] = v.strip()
    return meta


def load_network(bundle_path):
    """Load and validate a network bundle directory."""
    root = Path(bundle_path)
    if not root.is_dir():
        raise NetworkDataError(f"missing bundle directory: {root}")
    meta = read_meta(root / "bundle.meta")
    try:
        base_mva = float(meta.get("base_mva", "nan"))
    except ValueError:
        raise NetworkDataError("bundle.meta: base_mva is not a number") from None
    if not np.isfinite(base_mva):
        raise NetworkDataError("bundle.meta: base_mva missing")

    f = float
    buses = [Bus(int(r[0]), r[1], *r[2:]) for r in
             _read_table(root / "buses.csv", BUS_COLUMNS, (int, str, f, f, f, f))]
    lines = [Line(*r) for r in
             _read_table(root / "lines.csv", LINE_COLUMNS, (int, int, f, f, f))]
    gens = [Generator(*r) for r in
            _read_table(root / "generators.csv", GEN_COLUMNS, (int, f, f, f, f, f, f, f))]
    stations = [Evcs(*r) for r in
                _read_table(root / "stations.csv", STATION_COLUMNS, (int, int, int, f, f))]
    return Network(base_mva=base_mva, buses=tuple(buses), lines=tuple(lines),
                   generators=tuple(gens), stations=tuple(stations),
                   name=meta.get("name", root.name))


def bundled_path(name):
    """Path of a network bundle shipped with the package (``'ieee33'`` or ``'ieee123'``)."""
    return Path(__file__).parent / "data" / name
