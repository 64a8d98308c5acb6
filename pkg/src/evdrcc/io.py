"""CSV artifacts exchanged between pipeline stages.

Numbers are written with 9 significant digits so that repeated runs are
byte-identical; readers re-derive anything that rounding could perturb
(participation factors are renormalized to sum to one).
"""

import csv
from pathlib import Path

import numpy as np

from .dopf import Dispatch
from .posteval import CATEGORIES, fmt

SCENARIOS = "scenarios.csv"
MOMENTS = "moments.csv"
COV = "cov.csv"
EVAL_SUMMARY = "eval_summary.csv"
VIOLATIONS = "violations.csv"
COMPARISON = "comparison.txt"


class MissingArtifact(FileNotFoundError):
    pass


def dispatch_name(mode):
    return f"dispatch_{mode}.csv"


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer))
                        and not isinstance(v, bool) else v for v in r])
    return path


def _read(path, header):
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"missing {path.name}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != tuple(header):
        raise ValueError(f"{path.name}: unexpected header {rows[0] if rows else '(empty)'}")
    return rows[1:]


# -- scenarios ----------------------------------------------------------------

SCENARIO_HEADER = ("scenario_id", "station_id", "n", "p_ev_mw")


def write_scenarios(path, station_ids, counts, p_ev):
    rows = ((k, sid, int(counts[k, j]), float(p_ev[k, j]))
            for k in range(counts.shape[0]) for j, sid in enumerate(station_ids))
    return _write(path, SCENARIO_HEADER, rows)


def read_scenarios(path, station_ids):
    rows = _read(path, SCENARIO_HEADER)
    col = {int(s): j for j, s in enumerate(station_ids)}
    K = 1 + max((int(r[0]) for r in rows), default=-1)
    if K < 1:
        raise ValueError(f"{Path(path).name}: no scenarios")
    counts = np.zeros((K, len(col)))
    p_ev = np.zeros((K, len(col)))
    seen = np.zeros((K, len(col)), dtype=bool)
    for i, r in enumerate(rows, start=2):
        k, sid = int(r[0]), int(r[1])
        if sid not in col:
            raise ValueError(f"{Path(path).name}:{i}: unknown station_id {sid}")
        counts[k, col[sid]] = float(r[2])
        p_ev[k, col[sid]] = float(r[3])
        seen[k, col[sid]] = True
    if not seen.all():
        raise ValueError(f"{Path(path).name}: incomplete scenario table")
    return counts, p_ev


# -- moments ------------------------------------------------------------------

MOMENT_HEADER = ("station_id", "mean_mw", "n_bar", "mean_pm_mw")


def write_moments(out_dir, station_ids, ms):
    out_dir = Path(out_dir)
    _write(out_dir / MOMENTS, MOMENT_HEADER,
           ((sid, float(ms.mean[j]), float(ms.n_bar[j]), float(ms.mean_pm[j]))
            for j, sid in enumerate(station_ids)))
    _write(out_dir / COV, ("station_id",) + tuple(str(s) for s in station_ids),
           ((sid,) + tuple(float(v) for v in ms.cov[j]) for j, sid in enumerate(station_ids)))
    return out_dir / MOMENTS, out_dir / COV


def read_moments(out_dir, station_ids, k_sc):
    from .pipeline import MomentSummary
    out_dir = Path(out_dir)
    rows = _read(out_dir / MOMENTS, MOMENT_HEADER)
    if [int(r[0]) for r in rows] != list(station_ids):
        raise ValueError(f"{MOMENTS}: station ids do not match the network")
    arr = np.array([[float(v) for v in r[1:]] for r in rows])
    crow = _read(out_dir / COV, ("station_id",) + tuple(str(s) for s in station_ids))
    cov = np.array([[float(v) for v in r[1:]] for r in crow])
    cov = 0.5 * (cov + cov.T)
    return MomentSummary(mean=arr[:, 0], n_bar=arr[:, 1], mean_pm=arr[:, 2], cov=cov, k_sc=k_sc)


# -- dispatch -----------------------------------------------------------------

DISPATCH_HEADER = ("section", "id", "quantity", "value_pu", "value_phys")


def write_dispatch(path, net, d):
    base = net.base_mva
    rows = [("meta", "", "mode", "", d.mode),
            ("meta", "", "objective", "", float(d.objective_value))]
    rows += [("meta", s.id, "mean_ref", float(d.mean_ref[j] / base), float(d.mean_ref[j]))
             for j, s in enumerate(net.stations)]
    for i, g in enumerate(net.generators):
        rows.append(("generator", g.bus, "p", float(d.p_g[i] / base), float(d.p_g[i])))
        rows.append(("generator", g.bus, "q", float(d.q_g[i] / base), float(d.q_g[i])))
        rows.append(("generator", g.bus, "alpha", float(d.alpha[i]), float(d.alpha[i])))
    for j, b in enumerate(net.buses):
        rows.append(("bus", b.id, "v2", float(d.v2[j]), float(d.v2[j])))
    for k, ln in enumerate(net.lines):
        lid = f"{ln.from_bus}-{ln.to_bus}"
        rows.append(("line", lid, "p", float(d.p_flow[k] / base), float(d.p_flow[k])))
        rows.append(("line", lid, "q", float(d.q_flow[k] / base), float(d.q_flow[k])))
    return _write(path, DISPATCH_HEADER, rows)


def read_dispatch(path, net):
    rows = _read(path, DISPATCH_HEADER)
    meta, vals = {}, {}
    mean_ref = {}
    for sec, ident, qty, _, phys in rows:
        if sec == "meta" and qty == "mean_ref":
            mean_ref[int(ident)] = float(phys)
        elif sec == "meta":
            meta[qty] = phys
        else:
            vals[(sec, ident, qty)] = float(phys)
    try:
        gens = [str(g.bus) for g in net.generators]
        lines = [f"{ln.from_bus}-{ln.to_bus}" for ln in net.lines]
        alpha = np.array([vals[("generator", g, "alpha")] for g in gens])
        alpha = alpha / alpha.sum()
        return Dispatch(
            p_g=np.array([vals[("generator", g, "p")] for g in gens]),
            q_g=np.array([vals[("generator", g, "q")] for g in gens]),
            v2=np.array([vals[("bus", str(b.id), "v2")] for b in net.buses]),
            p_flow=np.array([vals[("line", lid, "p")] for lid in lines]),
            q_flow=np.array([vals[("line", lid, "q")] for lid in lines]),
            alpha=alpha, objective_value=float(meta["objective"]), mode=meta["mode"],
            mean_ref=np.array([mean_ref[s.id] for s in net.stations]))
    except KeyError as exc:
        raise ValueError(f"{Path(path).name}: missing entry {exc.args[0]}") from None


# -- evaluation ---------------------------------------------------------------

VIOLATION_HEADER = ("mode", "realization", "d_bar", "d_under", "balance", "voltage", "line",
                    "penalty_cost", "total_cost", "feasible")


def write_violations(path, results_by_mode, base_mva):
    def rows():
        for mode, results in results_by_mode.items():
            for k, r in enumerate(results):
                yield (mode, k, r.d_bar * base_mva, r.d_under * base_mva,
                       float(r.balance_slacks.sum()) * base_mva, float(r.voltage_slacks.sum()),
                       float(r.line_slacks.sum()) * base_mva, float(r.penalty_cost),
                       float(r.total_cost), int(r.feasible_flag))
    return _write(path, VIOLATION_HEADER, rows())


def write_eval(out_dir, report, results_by_mode, base_mva):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / EVAL_SUMMARY).write_text(report.to_csv(), encoding="utf-8")
    (out_dir / COMPARISON).write_text(report.to_text(), encoding="utf-8")
    write_violations(out_dir / VIOLATIONS, results_by_mode, base_mva)
    return [out_dir / EVAL_SUMMARY, out_dir / COMPARISON, out_dir / VIOLATIONS]


def read_eval_summary(path):
    header = ("mode", "average_cost", "cost_increase_pct", "d_bar", "d_under", "violation_pct",
              "balance_pct", "voltage_pct", "line_pct", "generator_pct", "n_realizations", "seed")
    rows = _read(path, header)
    return {r[0]: dict(zip(header[1:], [float(v) for v in r[1:]])) for r in rows}


__all__ = ["CATEGORIES"]
