"""Command-line interface.

Subcommands: check (diagram validation and growth summary), analyze
(seminorm report for a kernel), bound (compactness tail bounds per level),
net (eps-net size and radius), mk (transport distances between two
measures), accept (run the acceptance suite).

Exit codes: 0 success, 1 domain error, 2 I/O or format error, 3 acceptance
failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import acceptance
from .algebra import (
    KernelFormatError,
    growth_profile,
    kernel_from_json,
    measure_from_json,
    uniform_measure,
)
from .bratteli import DiagramError, load_diagram, path_counts
from .groupoid import GroupoidError, TruncatedGroupoid
from .quantum_metric import (
    SeminormError,
    Stratification,
    build_eps_net,
    qgh_bound,
    total_seminorm,
)
from .report import RunConfig, csv_report, json_report
from .transport import (
    CylinderTree,
    TransportError,
    mk_lower_bound,
    wasserstein_lp,
    wasserstein_tree,
)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2
EXIT_ACCEPT = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from None


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None


def _load_diagram(path: str):
    try:
        return load_diagram(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    except DiagramError as exc:
        raise CliError(f"invalid diagram: {exc}", EXIT_DOMAIN) from None


def _groupoid(args) -> TruncatedGroupoid:
    d = _load_diagram(args.diagram)
    try:
        return TruncatedGroupoid(d, args.resolution, base=args.base)
    except GroupoidError as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None


def cmd_check(args) -> int:
    d = _load_diagram(args.diagram)
    table = path_counts(d)
    config = RunConfig(command="check", diagram=os.path.basename(args.diagram))
    payload = {
        "levels": d.num_levels,
        "vertex_counts": list(d.vertex_counts),
        "sources": sorted(list(s) for s in d.sources),
        "ell": [str(x) for x in table.ell],
    }
    _emit(json_report(config, payload), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    g = _groupoid(args)
    try:
        f = kernel_from_json(_read(args.kernel), g)
    except KernelFormatError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    strata = Stratification(g)
    try:
        rep = total_seminorm(f, strata, orders=(args.order,))
    except SeminormError as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None
    config = RunConfig(
        command="analyze",
        diagram=os.path.basename(args.diagram),
        resolution=args.resolution,
        order=args.order,
        base=args.base,
    )
    payload = {
        "seminorms": rep.as_dict(),
        "growth": [[str(t), str(c)] for t, c in growth_profile(g)],
    }
    _emit(json_report(config, payload), args.out)
    return EXIT_OK


def cmd_bound(args) -> int:
    g = _groupoid(args)
    rows = []
    for m in range(args.level + 1):
        try:
            qb = qgh_bound(g, m)
        except SeminormError as exc:
            raise CliError(str(exc), EXIT_DOMAIN) from None
        rows.append(
            [m, qb.k_max, qb.beta_partial, qb.tail_bound, qb.beta, qb.conclusive]
        )
    config = RunConfig(
        command="bound",
        diagram=os.path.basename(args.diagram),
        resolution=args.resolution,
        level=args.level,
        base=args.base,
    )
    text = csv_report(
        config,
        ["m", "k_max", "beta_partial", "tail_bound", "beta", "conclusive"],
        rows,
    )
    _emit(text, args.out)
    return EXIT_OK


def cmd_net(args) -> int:
    g = _groupoid(args)
    strata = Stratification(g)
    try:
        net = build_eps_net(g, strata, args.order, args.radius, args.eps)
    except (SeminormError, GroupoidError) as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None
    config = RunConfig(
        command="net",
        diagram=os.path.basename(args.diagram),
        resolution=args.resolution,
        order=args.order,
        base=args.base,
        eps=args.eps,
    )
    payload = {
        "radius": args.radius,
        "strata": [
            {"value": s.value, "centers": len(s.centers)} for s in net.strata
        ],
        "num_centers": net.num_centers,
        "grid_step": net.grid_step,
        "size": str(net.size),
        "certified_radius": net.certified_radius,
    }
    _emit(json_report(config, payload), args.out)
    return EXIT_OK


def cmd_mk(args) -> int:
    g = _groupoid(args)
    try:
        a = measure_from_json(_read(args.mu), g)
        b = measure_from_json(_read(args.nu), g)
    except KernelFormatError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    strata = Stratification(g)
    tree = CylinderTree(g)
    try:
        w_tree = wasserstein_tree(tree, a, b)
        w_lp = wasserstein_lp(g, a, b)
        lower = mk_lower_bound(g, strata, args.order, a, b, seed=args.seed)
    except TransportError as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None
    config = RunConfig(
        command="mk",
        diagram=os.path.basename(args.diagram),
        resolution=args.resolution,
        order=args.order,
        base=args.base,
        seed=args.seed,
    )
    payload = {
        "wasserstein_tree": w_tree,
        "wasserstein_lp": w_lp,
        "mk_lower_bound": lower,
    }
    _emit(json_report(config, payload), args.out)
    return EXIT_OK


def cmd_accept(args) -> int:
    results = acceptance.run_all(name_filter=args.filter)
    lines = [acceptance.format_result(r) for r in results]
    _emit("".join(line + "\n" for line in lines), args.out)
    if not results:
        raise CliError(f"no acceptance checks match {args.filter!r}", EXIT_DOMAIN)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPT


def _add_common(p, *, kernel=False, measures=False):
    p.add_argument("--diagram", required=True, help="diagram file")
    p.add_argument("--resolution", type=int, required=True, help="truncation depth D")
    p.add_argument("--base", type=float, default=0.5, help="ultrametric base (default 0.5)")
    p.add_argument("--order", type=int, default=1, help="commutator order n")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--threads", type=int, default=None, help="worker thread cap")
    if kernel:
        p.add_argument("--kernel", required=True, help="kernel JSON file")
    if measures:
        p.add_argument("--mu", required=True, help="first measure JSON file")
        p.add_argument("--nu", required=True, help="second measure JSON file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afqms",
        description="Quantum-metric data for AF groupoids at finite truncation depth",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("check", help="validate a diagram and report path counts")
    p.add_argument("--diagram", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("analyze", help="seminorm report for a kernel")
    _add_common(p, kernel=True)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("bound", help="compactness tail bounds per level (CSV)")
    _add_common(p)
    p.add_argument("--level", type=int, required=True, help="largest m to bound")
    p.set_defaults(fn=cmd_bound)

    p = sub.add_parser("net", help="eps-net size and certified radius")
    _add_common(p)
    p.add_argument("--radius", type=float, required=True, help="length-ball radius t")
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(fn=cmd_net)

    p = sub.add_parser("mk", help="transport distances between two measures")
    _add_common(p, measures=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_mk)

    p = sub.add_parser("accept", help="run the acceptance suite")
    p.add_argument("--filter", default=None, help="substring filter on check names")
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(fn=cmd_accept)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = getattr(args, "threads", None) or os.environ.get("AFQMS_THREADS")
    if threads:
        # Numerics run through BLAS; cap its pool rather than spawning our own.
        os.environ["OMP_NUM_THREADS"] = str(threads)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"afqms: {exc}", file=sys.stderr)
        return exc.code
    except (DiagramError, GroupoidError, SeminormError, TransportError) as exc:
        print(f"afqms: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
