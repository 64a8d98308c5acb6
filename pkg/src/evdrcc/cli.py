"""Command-line driver: ``evdrcc <stage> --config cfg.yaml``.

Stages exchange CSV files in the output directory, and ``pipeline`` simply
runs the four stages in order, so a manual run reproduces it byte for byte.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import io, pipeline, posteval
from .config import ConfigError, default_config_path, load_config
from .network import NetworkDataError, load_network
from .solvers import InfeasibleModel, SolverFailure

log = logging.getLogger("evdrcc")

STAGES = ("simulate", "moments", "solve", "evaluate", "pipeline")


class Context:
    def __init__(self, cfg, out, threads=1):
        self.cfg = cfg
        self.out = Path(out)
        self.threads = threads
        self._net = None

    @property
    def net(self):
        if self._net is None:
            self._net = load_network(self.cfg.network_path)
        return self._net

    @property
    def station_ids(self):
        return [s.id for s in self.net.stations]

    def require(self, *names):
        for name in names:
            if not (self.out / name).exists():
                raise io.MissingArtifact(f"missing {name} in {self.out}")


def run_simulate(ctx):
    counts, p_ev = pipeline.scenario_arrays(pipeline.simulate(ctx.cfg, ctx.net))
    return [io.write_scenarios(ctx.out / io.SCENARIOS, ctx.station_ids, counts, p_ev)]


def run_moments(ctx):
    ctx.require(io.SCENARIOS)
    counts, p_ev = io.read_scenarios(ctx.out / io.SCENARIOS, ctx.station_ids)
    ms = pipeline.moments_from_arrays(ctx.cfg, ctx.net, counts, p_ev)
    return list(io.write_moments(ctx.out, ctx.station_ids, ms))


def _moments(ctx):
    ctx.require(io.SCENARIOS, io.MOMENTS, io.COV)
    return io.read_moments(ctx.out, ctx.station_ids, ctx.cfg.scenarios)


def run_solve(ctx):
    ms = _moments(ctx)
    files = []
    for mode in ctx.cfg.dopf.modes:
        d = pipeline.solve_mode(ctx.cfg, ctx.net, ms, mode)
        log.info("%s: objective %.6g", mode, d.objective_value)
        files.append(io.write_dispatch(ctx.out / io.dispatch_name(mode), ctx.net, d))
    return files


def run_evaluate(ctx):
    ms = _moments(ctx)
    modes = ctx.cfg.dopf.modes
    ctx.require(*(io.dispatch_name(m) for m in modes))
    dispatches = {m: io.read_dispatch(ctx.out / io.dispatch_name(m), ctx.net) for m in modes}
    seed = ctx.cfg.eval_seed
    P = pipeline.realizations(ctx.cfg, ctx.net, ms, seed)
    summaries, raw = pipeline.evaluate(ctx.cfg, ctx.net, dispatches, P, seed, ctx.threads)
    if len(summaries) > 1:
        report = posteval.compare(summaries, ctx.net.name)
    else:
        s = next(iter(summaries.values()))
        report = posteval.ComparisonReport((posteval.EvalSummary(**{**s.__dict__,
                                                                     "cost_increase_pct": 0.0}),),
                                           ctx.net.name)
    return io.write_eval(ctx.out, report, raw, ctx.net.base_mva)


def run_pipeline(ctx):
    files = []
    for fn in (run_simulate, run_moments, run_solve, run_evaluate):
        files += fn(ctx)
    return files


RUNNERS = {"simulate": run_simulate, "moments": run_moments, "solve": run_solve,
           "evaluate": run_evaluate, "pipeline": run_pipeline}


def build_parser():
    p = argparse.ArgumentParser(prog="evdrcc",
                                description="EV-aware chance-constrained dispatch experiments")
    p.add_argument("stage", choices=STAGES)
    p.add_argument("--config", default=None,
                   help="YAML config (default: bundled 33-bus experiment)")
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for evaluation")
    p.add_argument("--mode", default=None,
                   help="comma-separated modes, e.g. drcc,drcc_pm (overrides config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = load_config(args.config or default_config_path())
        modes = [m.strip() for m in args.mode.split(",") if m.strip()] if args.mode else None
        cfg = cfg.with_overrides(seed=args.seed, output=args.out, modes=modes)
        ctx = Context(cfg, cfg.output, args.threads)
        files = RUNNERS[args.stage](ctx)
    except ConfigError as exc:
        print(f"evdrcc: config error: {exc}", file=sys.stderr)
        return 2
    except (io.MissingArtifact, NetworkDataError, InfeasibleModel, SolverFailure,
            ValueError) as exc:
        print(f"evdrcc: {args.stage} failed: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
