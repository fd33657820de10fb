"""Command line entry point: ``gvop run | verify | gen``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (ExperimentConfig, PlantedParams, generate_planted_instance,
                      read_topology, run_experiment, run_instance, write_instance)
from .requests import load_requests


def _planted_args(p):
    p.add_argument("--requests-count", type=int, default=10)
    p.add_argument("--k", type=int, default=3, help="terminals per request")
    p.add_argument("--stride", type=int, default=2, help="walk steps between terminals")
    p.add_argument("--ingress", type=float, default=2.0)
    p.add_argument("--benefit", type=float, nargs=2, default=(0.0, 5.0), metavar=("LO", "HI"))
    p.add_argument("--traffic", default="aggregate_ingress",
                   choices=["aggregate_ingress", "hose", "customer_pipe"])
    p.add_argument("--max-duration", type=int, default=1)
    p.add_argument("--capacity-factor", type=float, default=1.0)
    p.add_argument("--min-capacity", type=float, default=1.0)


def _params(a) -> PlantedParams:
    return PlantedParams(num_requests=a.requests_count, k=a.k, stride=a.stride,
                         ingress=a.ingress, benefit_range=tuple(a.benefit), traffic=a.traffic,
                         max_duration=a.max_duration, capacity_factor=a.capacity_factor,
                         min_capacity=a.min_capacity)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gvop", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="stream a request sequence through the engine")
    run.add_argument("--substrate", required=True, help="JSON instance or edge list")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--requests")
    src.add_argument("--generate", action="store_true",
                     help="plant requests on the --substrate topology")
    run.add_argument("--mode", choices=["plain", "scaled", "fractional"], default="plain")
    run.add_argument("--beta", type=float, default=None, help="scale factor for --mode scaled")
    run.add_argument("--floor", type=float, default=1.0)
    run.add_argument("--steiner", choices=["mst", "exact"], default="mst")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default=None)
    _planted_args(run)

    ver = sub.add_parser("verify", help="run the invariant suite on an instance")
    ver.add_argument("--substrate", required=True)
    ver.add_argument("--requests", required=True)
    ver.add_argument("--steiner", choices=["mst", "exact"], default="mst")
    ver.add_argument("--floor", type=float, default=1.0)

    gen = sub.add_parser("gen", help="emit a planted instance")
    gen.add_argument("--topology", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    _planted_args(gen)

    a = parser.parse_args(argv)
    if a.cmd == "run":
        cfg = ExperimentConfig(substrate_path=a.substrate, requests_path=a.requests,
                               generate=_params(a) if a.generate else None, seed=a.seed,
                               mode=a.mode, scale_beta=a.beta, floor=a.floor,
                               steiner=a.steiner, out_dir=a.out)
        report = run_experiment(cfg)
        print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
        print(f"wall time {report.wall_time:.3f}s", file=sys.stderr)
        return 0
    if a.cmd == "verify":
        net = read_topology(a.substrate)
        reqs = load_requests(Path(a.requests).read_text())
        cfg = ExperimentConfig(floor=a.floor, steiner=a.steiner,
                               opt_request_limit=len(reqs))
        report, _ = run_instance(net, reqs, cfg)
        failed = False
        for name, bad in sorted(report.checks.items()):
            print(f"{'PASS' if not bad else 'FAIL'} {name}" + (f": {bad[0]}" if bad else ""))
            failed |= bool(bad)
        if report.opt is not None:
            print(f"OPT {report.opt:.6g} benefit {report.benefit:.6g}")
        return 1 if failed else 0
    inst = generate_planted_instance(read_topology(a.topology), a.seed, _params(a))
    write_instance(inst, a.out)
    print(f"{len(inst.requests)} requests, planted optimum {inst.planted_optimum:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
