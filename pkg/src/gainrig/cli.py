"""Command-line front end.

Exit codes: 0 positive verdict, 1 negative verdict, 2 input error,
3 when a tight graph admits no reduction (a counterexample signal).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import gain_graph as gg
from .symmetry_groups import Group
from .moves import (
    Construction,
    NoAdmissibleReduction,
    NotTight,
    Setting,
    random_construction,
    reduce_to_construction,
)
from .numerics import (
    Colour,
    Configuration,
    NotWellPositioned,
    cross_validate,
    framework_colouring,
    monochrome_verdict,
    random_configuration,
    rigidity_verdict,
)
from .sparsity import SparsityError, check_tight

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_COUNTEREXAMPLE = 0, 1, 2, 3
Q_RANGE = (1.1, 10.0)


class InputError(Exception):
    pass


def _norm(text):
    t = text.strip().lower()
    if t in ("inf", "linf", "infinity"):
        return "inf"
    raw = t[2:] if t.startswith("q=") else t
    try:
        q = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"norm must be q=<real> or inf, got {text!r}")
    if not Q_RANGE[0] <= q <= Q_RANGE[1]:
        raise argparse.ArgumentTypeError(f"q must lie in [{Q_RANGE[0]}, {Q_RANGE[1]}]")
    return f"q={q!r}"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--group", help="Z2, Cs or Z2xCs (defaults to the file's group)")
    common.add_argument("--norm", type=_norm, default="q=3", help="q=<real> or inf")
    common.add_argument("--trials", type=int, default=25)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--out", help="write the main output here instead of stdout")
    common.add_argument("--threads", type=int, default=1)

    parser = argparse.ArgumentParser(prog="gainrig", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("check", parents=[common], help="tightness for the group")
    p.add_argument("file")
    p = sub.add_parser("rigidity", parents=[common], help="numerical rigidity verdict")
    p.add_argument("file")
    p = sub.add_parser("reduce", parents=[common], help="reduce to a base graph")
    p.add_argument("file")
    p = sub.add_parser("generate", parents=[common], help="random tight graph or replay")
    p.add_argument("--moves", type=int, default=8)
    p.add_argument("--max-vertices", type=int, default=14)
    p.add_argument("--replay", help="JSON-lines construction to rebuild")
    p.add_argument("--construction", help="also write the construction here")
    p = sub.add_parser("color", parents=[common], help="framework colouring (inf norm)")
    p.add_argument("file")
    p = sub.add_parser("crossval", parents=[common], help="checker versus rank")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--max-moves", type=int, default=10)
    p.add_argument("--max-vertices", type=int, default=14)
    p.add_argument("--sabotage", action="store_true", help="flip one matrix sign")
    p = sub.add_parser("derive", parents=[common], help="finite piece of the cover")
    p.add_argument("file")
    p.add_argument("--window", type=int, default=1)
    p.add_argument("--reflect", action="store_true")
    return parser


# helpers ----------------------------------------------------------------------


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(str(exc))
    try:
        return gg.parse(text)
    except gg.GainGraphError as exc:
        raise InputError(f"{path}: {exc}")


def _setting(args, group=None):
    group = args.group or group
    if group is None:
        raise InputError("--group is required")
    try:
        return Setting.parse(args.norm, Group.parse(group) if isinstance(group, str) else group)
    except ValueError as exc:
        raise InputError(str(exc))


def _check_group(g, setting):
    if g.group is not setting.group:
        raise InputError(f"graph group {g.group} differs from --group {setting.group}")


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=str)


# verbs --------------------------------------------------------------------------


def cmd_check(args):
    g, _ = _load(args.file)
    setting = _setting(args, g.group)
    _check_group(g, setting)
    verdict = check_tight(g)
    if args.json:
        _emit(args, _dump(verdict.to_json()))
    else:
        line = f"{verdict.status.value}  {verdict.condition}"
        if verdict.witness is not None:
            line += f"\nwitness edges: {' '.join(map(str, sorted(verdict.witness)))}"
        _emit(args, line)
    return EXIT_OK if verdict.tight else EXIT_NEGATIVE


def cmd_rigidity(args):
    g, _ = _load(args.file)
    setting = _setting(args, g.group)
    _check_group(g, setting)
    v = rigidity_verdict(g, setting, trials=args.trials, seed=args.seed, tol=args.tol)
    if args.json:
        _emit(args, _dump({"setting": str(setting), **v.to_json()}))
    else:
        r = v.report
        label = "minimal rigid" if v.minimal else "rigid" if v.rigid else "not rigid"
        _emit(args, f"{label}  rank {r.rank}/{v.required_rank}  rows {r.rows}  gap {r.gap:.3g}")
    return EXIT_OK if v.rigid else EXIT_NEGATIVE


def cmd_reduce(args):
    g, _ = _load(args.file)
    setting = _setting(args, g.group)
    _check_group(g, setting)
    try:
        construction = reduce_to_construction(g, setting)
    except NotTight as exc:
        print(f"not tight: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except NoAdmissibleReduction as exc:
        print("no admissible reduction for the graph below", file=sys.stderr)
        print(gg.serialize(exc.graph), file=sys.stderr, end="")
        return EXIT_COUNTEREXAMPLE
    _emit(args, construction.to_jsonl().rstrip("\n"))
    return EXIT_OK


def cmd_generate(args):
    if args.replay:
        try:
            with open(args.replay, encoding="utf-8") as fh:
                construction = Construction.from_jsonl(fh.read())
            g = construction.replay()
        except (OSError, ValueError, KeyError) as exc:
            raise InputError(f"{args.replay}: {exc}")
    else:
        setting = _setting(args)
        construction, g = random_construction(setting, args.moves, args.seed,
                                              args.max_vertices)
    if args.construction:
        with open(args.construction, "w", encoding="utf-8") as fh:
            fh.write(construction.to_jsonl())
    if args.json:
        _emit(args, _dump({"graph": gg.to_json(g),
                           "moves": [r.kind.value for r in construction.moves]}))
    else:
        _emit(args, gg.serialize(g).rstrip("\n"))
    return EXIT_OK


def cmd_color(args):
    g, points = _load(args.file)
    if args.norm != "inf":
        args.norm = "inf"
    setting = _setting(args, g.group)
    _check_group(g, setting)
    if len(points) == g.n:
        p = np.array([points[v] for v in range(g.n)], dtype=float)
        config = Configuration(p, setting.q)
    else:
        config = random_configuration(g, seed=args.seed, q=setting.q)
    colouring = framework_colouring(g, config.points)
    try:
        mono = monochrome_verdict(g, colouring, setting)
    except NotWellPositioned:
        mono = None
    names = {Colour.ONE: 1, Colour.TWO: 2, Colour.DEGENERATE: "degenerate"}
    data = {
        "colours": [names[c] for c in colouring.colours],
        "zero_row": list(colouring.zero_row),
        "well_positioned": colouring.well_positioned,
        "monochrome": mono,
        "points": config.points.tolist(),
    }
    if args.json:
        _emit(args, _dump(data))
    else:
        lines = [f"{i}\t{e}\t{names[c]}" for i, (e, c) in enumerate(zip(g.edges, colouring.colours))]
        lines.append(f"well-positioned: {colouring.well_positioned}  monochrome: {mono}")
        _emit(args, "\n".join(lines))
    if mono is None:
        return EXIT_NEGATIVE
    return EXIT_OK if mono else EXIT_NEGATIVE


def cmd_crossval(args):
    setting = _setting(args)
    report = cross_validate(setting, args.instances, max_moves=args.max_moves,
                            trials=args.trials, seed=args.seed, tol=args.tol,
                            max_vertices=args.max_vertices, sabotage=args.sabotage,
                            workers=max(1, args.threads))
    if args.json:
        _emit(args, _dump(report))
    else:
        c = report["counts"]
        _emit(args, (
            f"{setting}  instances {report['instances']}  tight {c['tight']}  "
            f"minimal-rigid {c['minimal_rigid']}  colour pairs {c['colour_pairs']}  "
            f"mismatches {len(report['mismatches'])}  "
            f"{report['timing']['seconds']:.1f}s"
        ))
    return EXIT_OK if not report["mismatches"] else EXIT_NEGATIVE


def cmd_derive(args):
    g, _ = _load(args.file)
    if args.window < 0:
        raise InputError("--window must be non-negative")
    cover = gg.derived_graph(g, args.window, include_reflection=args.reflect)

    def label(node):
        v, h = node
        return f"{v}@{h}"

    if args.json:
        _emit(args, _dump({
            "nodes": sorted(label(x) for x in cover.nodes),
            "edges": sorted(sorted((label(a), label(b))) for a, b in cover.edges),
        }))
    else:
        lines = [f"nodes {cover.number_of_nodes()}  edges {cover.number_of_edges()}"]
        lines += [f"{label(a)} -- {label(b)}" for a, b in sorted(cover.edges, key=str)]
        _emit(args, "\n".join(lines))
    return EXIT_OK


VERBS = {
    "check": cmd_check,
    "rigidity": cmd_rigidity,
    "reduce": cmd_reduce,
    "generate": cmd_generate,
    "color": cmd_color,
    "crossval": cmd_crossval,
    "derive": cmd_derive,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which matches the input-error code
        return int(exc.code or 0)
    try:
        return VERBS[args.verb](args)
    except (InputError, SparsityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
