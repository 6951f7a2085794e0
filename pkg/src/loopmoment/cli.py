"""Command line entry point: ``loopmoment <command> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as X
from . import flow as F
from . import grassmann as G
from . import loops as L
from . import moment as M
from .liegroup import TorusVector


def _group(text: str) -> int:
    t = text.upper().replace("(", "").replace(")", "")
    if t.startswith("SU"):
        t = t[2:]
    n = int(t)
    if n < 2:
        raise argparse.ArgumentTypeError("group must be SU(N) with N >= 2")
    return n


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _config(args) -> F.FlowConfig:
    if not getattr(args, "config", None):
        return F.FlowConfig()
    data = X.parse_config(Path(args.config).read_text())
    return F.FlowConfig.from_mapping(data)


def _load_or_random(args) -> L.AlgebraicLoop:
    if getattr(args, "loop", None):
        return L.loads(Path(args.loop).read_text())
    rng = np.random.default_rng(args.seed)
    return L.random_loop(args.group, args.order, rng, scale=args.scale)


def _target(values, N) -> M.MomentValue:
    if len(values) != N:
        raise SystemExit(f"--target needs {N} numbers: p chart coordinates then E")
    return M.MomentValue(TorusVector.from_chart(values[:-1]), values[-1])


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_eval(args):
    loop = L.loads(Path(args.loop).read_text())
    print(json.dumps(M.moment(loop).to_json()))
    return 0


def cmd_flow(args):
    loop = _load_or_random(args)
    cfg = _config(args)
    if args.target:
        rho = _floats(args.target)
        f = M.TiltedEnergy(TorusVector.from_chart(rho))
    else:
        f = M.Energy()
    trace = F.flow_down(loop, f, cfg)
    _write(trace.to_csv(), args.out)
    print(f"# status={trace.status} steps={trace.steps}", file=sys.stderr)
    return 0 if trace.status == "converged" else 1


def cmd_project(args):
    loop = _load_or_random(args)
    cfg = _config(args)
    target = _target(_floats(args.target), loop.N)
    basis = F._basis_with_fallback(loop, (0.9, 0.8, 0.7, 0.6, 0.3, 1e-3))
    try:
        res = F.project_to_joint_level(loop, target, basis, cfg)
    except F.ProjectionError as exc:
        print(json.dumps({"converged": False, "error": str(exc), "history": exc.history}))
        return 1
    out = {"converged": True, "iterations": res.iterations, "history": res.history,
           "basis": basis.to_json(), "moment": M.moment(res.loop).to_json(),
           "loop": res.loop.to_json()}
    _write(json.dumps(out) + "\n", args.out)
    return 0


def cmd_connect(args):
    cfg = _config(args)
    target = _target(_floats(args.target), args.group)
    res = F.probe_connectivity(target, args.order, args.samples, cfg, N=args.group, seed=args.seed,
                               resolution=args.resolution)
    _write(json.dumps(res.witness_graph(), indent=2) + "\n", args.out)
    return 0 if res.components == 1 else 1


def cmd_grassmann(args):
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for i in range(args.samples):
        order = 1 + i % args.max_order
        g = L.random_loop(args.group, order, rng)
        worst = max(worst, G.diagram_residual(g, args.max_order))
    print(f"max residual {worst:.3e} over {args.samples} loops")
    if args.check:
        return 0 if worst < 1e-6 else 1
    return 0


def cmd_image(args):
    values, failures = X.sample_image(args.group, args.order, args.samples, args.seed, args.scale)
    _write(X.image_csv(values, args.group), args.out)
    if failures:
        print(f"# {failures} retraction failures resampled", file=sys.stderr)
    return 0


def cmd_figure1(args):
    counts = X.emit_figure1(args.radius, args.resolution, args.out, args.samples, args.order, args.seed)
    for name, rows in counts.items():
        print(f"{name}: {rows} rows")
    return 0


def cmd_suite(args):
    man = X.ExperimentManifest.load(args.config) if args.config else X.ExperimentManifest()
    if args.seed is not None:
        man.seed = args.seed
    if args.quick:
        man = man.reduced()
    report = X.run_suite(man, emit=lambda r: print(r.line(), flush=True))
    data = X.report_bytes(report)
    if args.out:
        Path(args.out).write_bytes(data)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loopmoment", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, order=2, samples=None):
        sp.add_argument("--group", type=_group, default=2, help="SU(N), e.g. SU2 or 3")
        sp.add_argument("--order", type=int, default=order)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", help="key = value file of flow settings")
        sp.add_argument("--out", help="output file (default stdout)")
        if samples is not None:
            sp.add_argument("--samples", type=int, default=samples)

    sp = sub.add_parser("eval", help="print the moment map of a loop JSON file")
    sp.add_argument("loop")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("flow", help="energy (or tilted energy) flow, trace as CSV")
    common(sp)
    sp.add_argument("--loop", help="start loop JSON (default: random)")
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--target", help="rho chart coordinates for the tilted energy")
    sp.set_defaults(func=cmd_flow)

    sp = sub.add_parser("project", help="project onto a level of the moment map")
    common(sp)
    sp.add_argument("--loop")
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--target", required=True, help="p chart coordinates and E, comma separated")
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("connect", help="connectivity probe of a level; witness graph JSON")
    common(sp, samples=50)
    sp.add_argument("--target", required=True)
    sp.add_argument("--resolution", type=int, default=64)
    sp.set_defaults(func=cmd_connect)

    sp = sub.add_parser("grassmann", help="Grassmannian diagram consistency")
    common(sp, samples=200)
    sp.add_argument("--check", action="store_true", help="exit nonzero if the residual exceeds 1e-6")
    sp.add_argument("--max-order", type=int, default=3)
    sp.set_defaults(func=cmd_grassmann)

    sp = sub.add_parser("image", help="sampled moment image as CSV")
    common(sp, samples=1000)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.set_defaults(func=cmd_image)

    sp = sub.add_parser("figure1", help="write Figure 1 data files")
    sp.add_argument("--radius", type=int, default=2)
    sp.add_argument("--resolution", type=int, default=50)
    sp.add_argument("--samples", type=int, default=2000)
    sp.add_argument("--order", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="figure1")
    sp.set_defaults(func=cmd_figure1)

    sp = sub.add_parser("suite", help="run the acceptance suite and write a JSON report")
    sp.add_argument("--config", help="manifest (.json or key = value)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--quick", action="store_true", help="reduced sizes")
    sp.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
