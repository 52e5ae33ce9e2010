"""Command line entry point: twoweight {characteristics,decompose,verify,sweep,generate,baselines}."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import characteristics as ch
from . import harness, hilbert
from .dyadic import GridConfig
from .measure import Interval, load_measure


def _dump(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_characteristics(a):
    sigma, omega = load_measure(a.sigma), load_measure(a.omega)
    root = Interval(a.root[0], a.root[1])
    cfg = GridConfig(r=a.r, eps=a.eps, tau=a.tau, max_depth=a.depth, root=root)
    ladder = None
    if a.eps_trunc is not None:
        ladder = [hilbert.Truncation(a.eps_trunc, a.outer_R)]
    rep = ch.characteristic_report(sigma, omega, cfg, trunc_ladder=ladder, local_tails=a.local_tails)
    if a.text:
        d = rep.to_json()
        w = max(map(len, d))
        for k, v in d.items():
            if k != "witnesses":
                print(f"{k:<{w}}  {v:.6g}   {d['witnesses'].get(k) or ''}".rstrip())
    else:
        _dump(rep.to_json(), a.out)
    return 0


def cmd_decompose(a):
    inst = harness.Instance.from_json(json.loads(Path(a.instance).read_text()))
    rep = harness.run_instance(inst, gamma=a.gamma, theta=a.theta)
    if a.text:
        print(rep.to_text())
    else:
        _dump(rep.to_json(timings=a.timings), a.out)
    return 0


def cmd_verify(a):
    seeds = harness.parse_seeds(a.seeds)
    base = harness.load_baselines()
    res = harness.run_suite(a.suite, seeds, atoms=a.atoms, baselines=base)
    _dump(res.to_json(), a.out)
    return 0 if res.passed else 1


def cmd_sweep(a):
    seeds = harness.parse_seeds(a.seeds)
    reports = [harness.run_instance(harness.generate(s, a.profile, atoms=a.atoms)).to_json() for s in seeds]
    _dump({"profile": a.profile, "seeds": seeds, "reports": reports}, a.out)
    return 0


def cmd_generate(a):
    inst = harness.generate(a.seed, a.profile, atoms=a.atoms, depth=a.depth)
    _dump(inst.to_json(), a.out)
    return 0


def cmd_baselines(a):
    seeds = harness.parse_seeds(a.seeds) if a.seeds else harness.BASELINE_SEEDS
    values = harness.measure_suite(seeds)
    if a.write:
        harness.write_baselines(values)
    _dump(values)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twoweight", description="Two weight Hilbert transform testbed on atomic measures.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("characteristics", help="all characteristics and the operator norm of a measure pair")
    c.add_argument("sigma")
    c.add_argument("omega")
    c.add_argument("--eps", type=float, default=0.4, help="goodness exponent")
    c.add_argument("--r", type=int, default=3)
    c.add_argument("--tau", type=int, default=4)
    c.add_argument("--depth", type=int, default=10)
    c.add_argument("--root", type=float, nargs=2, default=(0.0, 1.0), metavar=("LEFT", "LENGTH"))
    c.add_argument("--eps-trunc", type=float, default=None, help="inner truncation; default is the gap ladder")
    c.add_argument("--outer-R", type=float, default=float("inf"))
    c.add_argument("--local-tails", action="store_true")
    c.add_argument("--text", action="store_true", help="aligned text instead of JSON")
    c.add_argument("--out")
    c.set_defaults(func=cmd_characteristics)

    d = sub.add_parser("decompose", help="stopping forest, form ledger and report for an instance file")
    d.add_argument("instance")
    d.add_argument("--gamma", type=float, default=None, help="default 4 E_2^2 + 1")
    d.add_argument("--theta", type=float, default=None)
    d.add_argument("--timings", action="store_true")
    d.add_argument("--text", action="store_true")
    d.add_argument("--out")
    d.set_defaults(func=cmd_decompose)

    v = sub.add_parser("verify", help="run a seeded verification suite")
    v.add_argument("--suite", required=True, choices=harness.SUITES)
    v.add_argument("--seeds", default="1..20")
    v.add_argument("--atoms", type=int, default=16)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="run reports over a seed range for one profile")
    s.add_argument("--profile", required=True, choices=harness.PROFILES)
    s.add_argument("--seeds", default="1..10")
    s.add_argument("--atoms", type=int, default=16)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("generate", help="write a seeded instance file")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--profile", default="uniform", choices=harness.PROFILES)
    g.add_argument("--atoms", type=int, default=16)
    g.add_argument("--depth", type=int, default=8)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("baselines", help="measure constants over the baseline seed suite")
    b.add_argument("--seeds", default=None)
    b.add_argument("--write", action="store_true", help="overwrite the packaged baseline file")
    b.set_defaults(func=cmd_baselines)
    return p


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return a.func(a)


if __name__ == "__main__":
    sys.exit(main())
