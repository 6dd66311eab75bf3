"""Command-line entry point.

Exit status: 0 on success, 1 when the input has diagnostics (or an oracle
mismatch), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .behavior import (
    UnknownStimulus,
    NotAnFsmModel,
    event_catalog,
    fsm_of,
    format_trace,
    load_script,
    project_to_fsm_trace,
    simulate,
)
from .core import SModel, validate_s
from .dsl import DslError, parse_model, print_model
from .fsm import FsmError, FsmSpec, compile_fsm_to_s, fsm_run, load_fsm
from .render import render_b, render_d, render_s
from .statics import RegionError, UnvalidatedModel, build_dmodel, parse_regions

log = logging.getLogger("tmkit")


def _color(stream) -> bool:
    return os.environ.get("TM_COLOR", "1") != "0" and hasattr(stream, "isatty") and stream.isatty()


def _paint(text: str, code: str, stream) -> str:
    return f"\033[{code}m{text}\033[0m" if _color(stream) else text


def _load(path: Path) -> tuple[SModel, Optional[FsmSpec]]:
    """Read a ``.tm`` model, or compile an ``.fsm.json`` definition."""
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        spec = load_fsm(path)
        return compile_fsm_to_s(spec), spec
    return parse_model(text), None


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_check(args) -> int:
    m, _ = _load(args.model)
    diags = validate_s(m)
    for d in diags:
        print(f"{args.model}: {_paint(d.rule, '31', sys.stdout)}: {d.message} [{', '.join(d.stages)}]")
    if diags:
        return 1
    print(
        f"{args.model}: ok ({len(m.thimacs())} thimacs, {len(m.stages())} stages, "
        f"{len(m.flows)} flows, {len(m.triggers)} triggers)"
    )
    return 0


def cmd_import_fsm(args) -> int:
    spec = load_fsm(args.spec)
    m = compile_fsm_to_s(spec)
    _write(print_model(m), args.output)
    return 0


def _dmodel(args):
    m, spec = _load(args.model)
    regions = None
    if getattr(args, "regions", None):
        regions = parse_regions(args.regions.read_text(encoding="utf-8"))
    return build_dmodel(m, regions), spec


def _change_line(c) -> str:
    return f'change={c.id} kind={c.kind} stages={len(c.stages)} label="{c.label}"'


def cmd_decompose(args) -> int:
    d, _ = _dmodel(args)
    _write("".join(_change_line(c) + "\n" for c in d.changes), args.output)
    return 0


def cmd_order(args) -> int:
    d, _ = _dmodel(args)
    lines = [_change_line(c) for c in d.changes]
    lines += [f"precedence {a} -> {b}" for a, b in sorted(d.precedence)]
    _write("\n".join(lines) + "\n", args.output)
    return 0


def cmd_events(args) -> int:
    d, _ = _dmodel(args)
    lines = []
    for n, e in enumerate(event_catalog(d), start=1):
        lines.append(
            f'E{n} kind={e.kind} src={e.src or "-"} dst={e.dst or "-"} change={e.change} name="{e.name}"'
        )
    _write("\n".join(lines) + "\n", args.output)
    return 0


def _run(args):
    d, spec = _dmodel(args)
    script = load_script(args.script) if args.script else []
    return d, spec, script, simulate(d, script, args.max_ticks)


def cmd_simulate(args) -> int:
    d, spec, script, b = _run(args)
    _write(format_trace(b), args.output)
    if args.oracle:
        oracle = spec or fsm_of(d)
        run = fsm_run(oracle, [s for _, s in script])
        got = project_to_fsm_trace(b, d)
        if b.truncated:
            print("oracle: run truncated, comparison skipped", file=sys.stderr)
            return 1
        if got != run.trace() or list(b.dropped_positions) != run.dropped:
            print(f"oracle mismatch: simulated {got} vs interpreter {run.trace()}", file=sys.stderr)
            return 1
        print(f"oracle: {len(got)} states agree", file=sys.stderr)
    return 0


def cmd_render(args) -> int:
    if args.stage == "s":
        m, _ = _load(args.model)
        diags = validate_s(m)
        if diags:
            raise UnvalidatedModel(diags)
        doc = render_s(m)
    elif args.stage == "d":
        d, _ = _dmodel(args)
        doc = render_d(d)
    else:
        d, _, _, b = _run(args)
        doc = render_b(b, name=d.source.name)
    _write(doc.text, args.output)
    return 0


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return p


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tmkit", description="Thinging-machine modeling pipeline.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log dropped stimuli and other details")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    c = sub.add_parser("check", help="validate a model and print diagnostics")
    c.add_argument("model", type=_existing)
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("import-fsm", help="compile an FSM definition into a .tm model")
    c.add_argument("spec", type=_existing)
    c.add_argument("-o", "--output", required=True)
    c.set_defaults(func=cmd_import_fsm)

    c = sub.add_parser("decompose", help="list the static changes of a model")
    c.add_argument("model", type=_existing)
    c.add_argument("--regions", type=_existing, help="region file replacing the default division")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_decompose)

    c = sub.add_parser("order", help="print the D model: changes and precedence")
    c.add_argument("model", type=_existing)
    c.add_argument("--regions", type=_existing)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_order)

    c = sub.add_parser("simulate", help="run a stimulus script and print the event trace")
    c.add_argument("model", type=_existing, help=".tm model or .fsm.json definition")
    c.add_argument("--script", type=_existing, required=True)
    c.add_argument("--max-ticks", type=int, default=10_000)
    c.add_argument("--oracle", action="store_true", help="cross-check against the FSM interpreter")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("render", help="emit Graphviz text for the S, D or B model")
    c.add_argument("model", type=_existing)
    c.add_argument("--stage", choices=["s", "d", "b"], required=True)
    c.add_argument("--script", type=_existing, help="stimulus script for --stage b")
    c.add_argument("--max-ticks", type=int, default=10_000)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_render)

    c = sub.add_parser("events", help="print the event catalog")
    c.add_argument("model", type=_existing)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_events)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "max_ticks", 1) <= 0:
        print(f"{parser.prog}: error: --max-ticks must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except DslError as exc:
        for d in exc.diagnostics:
            print(f"{args.model}:{d.line}:{d.column}: {_paint(d.code, '31', sys.stderr)}: {d.message}", file=sys.stderr)
        return 1
    except UnvalidatedModel as exc:
        for d in exc.diagnostics:
            print(f"{_paint(d.rule, '31', sys.stderr)}: {d.message}", file=sys.stderr)
        return 1
    except (FsmError, RegionError, NotAnFsmModel, UnknownStimulus, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


run_cli = main


if __name__ == "__main__":
    sys.exit(main())
