"""Command-line driver.

Exit status: 0 for a definitive verdict or a successful verification, 1 for
usage, parse, or verification errors, 2 when a search is inconclusive.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import report
from .board import PRESET_NAMES, make_preset
from .bounds import preset_bounds
from .engine import default_memory_cap, default_threads, parse_size
from .errors import NotationError
from .game_search import FILTERS, GameSearchConfig, search_game
from .metrics import speed, state_space_size, type_census
from .notation import load_solution, render_position, verify_solution
from .transfer_search import DEFAULT_ESTIMATE_BEAM, TransferConfig, run_transfer

EXIT_OK, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, preset_required: bool = True) -> None:
    p.add_argument("--preset", required=preset_required,
                   help=f"problem preset: {', '.join(PRESET_NAMES)}")
    p.add_argument("--rules", type=int, choices=(4, 6, 8), help="override the preset's rule set")
    p.add_argument("--format", choices=("json", "text"), default="json", help="report format")
    p.add_argument("--output", help="write the report here instead of stdout")


def _resources(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: HALMA_THREADS or 1)")
    p.add_argument("--memory-cap", default=None,
                   help="memory cap, e.g. 4G (default: HALMA_MEMORY_CAP, "
                        "else 8G or 3/4 of RAM if less)")
    p.add_argument("--checkpoint", help="append every sealed level to this gzip file")
    p.add_argument("--resume", action="store_true",
                   help="continue from matching levels in --checkpoint")
    p.add_argument("-v", "--verbose", action="store_true", help="log level progress")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="halmasearch", description="Shortest Halma-family games and transfers.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("game", help="shortest cooperative game")
    _common(g)
    mode = g.add_mutually_exclusive_group(required=True)
    mode.add_argument("--prove", action="store_true", help="prove no game of <= max-length")
    mode.add_argument("--find", action="store_true", help="find a shortest game")
    mode.add_argument("--count", action="store_true",
                      help="count winning move sequences of exactly max-length")
    g.add_argument("--max-length", type=int, required=True)
    g.add_argument("--filters", default="",
                   help="solution-property filters for finding, e.g. 1,4 (not with --prove)")
    g.add_argument("--single-pass", action="store_true",
                   help="one pass at max-length instead of increasing thresholds")
    _resources(g)

    t = sub.add_parser("transfer", help="shortest army transfer")
    _common(t)
    mode = t.add_mutually_exclusive_group(required=True)
    mode.add_argument("--prove", action="store_true",
                      help="meet-in-the-middle proof for exactly --length moves")
    mode.add_argument("--forward-prove", action="store_true",
                      help="one-directional proof for exactly --length moves")
    mode.add_argument("--find", action="store_true", help="truncated search for a solution")
    t.add_argument("--palindrome", action="store_true",
                   help="restrict --prove / --find to palindromic solutions")
    t.add_argument("--weak-middle", action="store_true",
                   help="odd palindromes: accept any middle move to the mirror image")
    t.add_argument("--length", type=int, help="target length (cap for --find)")
    t.add_argument("--jumps-only", action="store_true")
    t.add_argument("--beam", type=int, help="beam width M (find modes)")
    t.add_argument("--beta", type=int, default=0, help="symmetry weight in the beam score")
    t.add_argument("--cmax", type=int, help="initial C^max estimate")
    t.add_argument("--estimate-beam", type=int, default=DEFAULT_ESTIMATE_BEAM,
                   help="beam width for the C^max estimate")
    _resources(t)

    b = sub.add_parser("bound", help="lower bounds and metrics of a preset")
    _common(b)

    v = sub.add_parser("verify", help="replay a solution file")
    _common(v, preset_required=False)
    v.add_argument("file", help="solution file; corpus/<name>.txt falls back to the bundled corpus")
    v.add_argument("--kind", choices=("game", "transfer"), help="override the file's kind")

    r = sub.add_parser("render", help="draw a position")
    _common(r, preset_required=False)
    r.add_argument("--position", choices=("game", "transfer", "goal"), default="game")
    r.add_argument("--solution", help="draw the position after replaying this file")
    r.add_argument("--after", type=int, help="number of solution moves to replay")

    p = sub.add_parser("presets", help="list presets")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--output")
    return ap


def _emit(args, doc: dict, text: str | None = None) -> None:
    out = report.dumps(doc) if args.format == "json" or text is None else text
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
    else:
        print(out)


def _preset(args):
    try:
        return make_preset(args.preset, args.rules)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _memory(args) -> int:
    try:
        return parse_size(args.memory_cap) if args.memory_cap else default_memory_cap()
    except ValueError:
        raise UsageError(f"bad memory cap {args.memory_cap!r}") from None


def _threads(args) -> int:
    return args.threads if args.threads is not None else default_threads()


def cmd_game(args) -> int:
    preset = _preset(args)
    mode = "prove-none" if args.prove else "count-all" if args.count else "find-one"
    try:
        filters = frozenset(int(x) for x in args.filters.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad filter list {args.filters!r}") from None
    if filters - FILTERS:
        raise UsageError(f"filters must be among {sorted(FILTERS)}")
    if filters and args.prove:
        raise UsageError("--filters cannot be combined with --prove")
    cfg = GameSearchConfig(preset, args.max_length, mode, filters,
                           iterative=False if args.single_pass else None,
                           memory_cap=_memory(args), threads=_threads(args),
                           checkpoint=args.checkpoint, resume=args.resume)
    out = search_game(cfg)
    verdict = {"found": "solution", "none": "none", "inconclusive": "inconclusive"}[out.verdict]
    extra = {"shortest": out.shortest, "winner": out.winner, "passes": out.passes}
    if out.count is not None:
        extra["count"] = out.count
        extra["countSaturated"] = out.count_saturated
    if out.error:
        extra["error"] = out.error
    doc = report.make_report(preset, "game-" + mode, args.max_length, verdict,
                             solution=out.witness, levels=out.levels,
                             runtime_ms=out.runtime_ms, threads=cfg.threads or 1, extra=extra)
    text = f"{preset.name} game ({mode}, <= {args.max_length}): {verdict}"
    if out.shortest is not None:
        text += f", shortest {out.shortest}, {out.winner} wins"
        text += "\n" + ", ".join(doc["solution"])
    _emit(args, doc, text)
    return EXIT_INCONCLUSIVE if out.verdict == "inconclusive" else EXIT_OK


def cmd_transfer(args) -> int:
    preset = _preset(args)
    if args.prove:
        mode = "palindrome-prove" if args.palindrome else "prove"
    elif args.forward_prove:
        if args.palindrome:
            raise UsageError("--palindrome needs --prove or --find")
        mode = "forward-prove"
    else:
        mode = "palindrome-find" if args.palindrome else "find"
    proving = not args.find
    if proving and args.beam is not None:
        raise UsageError("--beam is not allowed with proofs")
    if proving and args.length is None:
        raise UsageError("proofs need --length")
    if args.find and args.beam is None:
        raise UsageError("--find needs --beam")
    try:
        cfg = TransferConfig(preset, args.length, mode, args.jumps_only, args.beam, args.beta,
                             args.cmax, args.estimate_beam, not args.weak_middle,
                             memory_cap=_memory(args), threads=_threads(args),
                             checkpoint=args.checkpoint, resume=args.resume)
        out = run_transfer(cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    extra = {}
    if out.palindromic_meets is not None:
        extra["palindromicMeets"] = out.palindromic_meets
    if out.error:
        extra["error"] = out.error
    doc = report.make_report(preset, mode, out.length, out.verdict, solution=out.solution,
                             levels=out.levels, cmax_trail=out.cmax_trail,
                             runtime_ms=out.runtime_ms, threads=cfg.threads or 1, extra=extra)
    text = f"{preset.name} transfer ({mode}, {out.length}): {out.verdict}"
    if out.cmax_trail:
        last = out.cmax_trail[-1]
        text += f", C^max_{last.N} = {last.value}"
    if out.solution:
        text += "\n" + ", ".join(doc["solution"])
    _emit(args, doc, text)
    return EXIT_OK if out.verdict in ("solution", "none") else EXIT_INCONCLUSIVE


def cmd_bound(args) -> int:
    preset = _preset(args)
    bounds = {r.kind: r.value for r in preset_bounds(preset)}
    doc = {
        "problem": preset.name, "rules": preset.rules.kind, "board": report.board_info(preset),
        "bounds": bounds, "details": [r.as_dict() for r in preset_bounds(preset)],
        "census": {"start": list(type_census(preset.start, preset.board)),
                   "goal": list(type_census(preset.goal, preset.board))},
        "stateSpace": {"game": str(state_space_size(preset.board, preset.size, True))
                       if 2 * preset.size <= len(preset.board.cells) else None,
                       "transfer": str(state_space_size(preset.board, preset.size, False))},
    }
    text = "\n".join(f"{k}: {v}" for k, v in bounds.items())
    _emit(args, doc, text)
    return EXIT_OK


def _load(args, path):
    preset = make_preset(args.preset, args.rules) if args.preset else None
    try:
        sol = load_solution(path, preset)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    except (NotationError, ValueError) as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from None
    if preset is None:
        from .notation import preset_for
        preset = preset_for(sol.meta)
    return preset, sol


def cmd_verify(args) -> int:
    preset, sol = _load(args, args.file)
    if args.kind:
        sol.kind = args.kind
    rep = verify_solution(preset, sol)
    doc = {"problem": preset.name, "rules": preset.rules.kind, "kind": sol.kind,
           **rep.as_dict(preset.board)}
    if sol.kind == "transfer" and rep.goal_reached and len(sol):
        doc["speed"] = str(speed(preset.start, rep.final.blue, len(sol), preset.rules))
    text = (f"{args.file}: {'legal' if rep.legal else 'ILLEGAL'}, {rep.moves} moves, "
            + (f"{rep.winner} wins" if sol.kind == "game" and rep.winner
               else "goal reached" if rep.goal_reached else "goal not reached"))
    if rep.error:
        text += f"\n{rep.error}"
    _emit(args, doc, text)
    return EXIT_OK if rep.ok else EXIT_USAGE


def cmd_render(args) -> int:
    if args.solution:
        preset, sol = _load(args, args.solution)
        k = len(sol) if args.after is None else args.after
        if not 0 <= k <= len(sol):
            raise UsageError(f"--after must be within 0..{len(sol)}")
        sol.moves = sol.moves[:k]
        rep = verify_solution(preset, sol)
        if not rep.legal:
            raise UsageError(rep.error)
        pos = rep.final
    else:
        if not args.preset:
            raise UsageError("render needs --preset or --solution")
        preset = _preset(args)
        from .board import Position
        pos = {"game": preset.game_start(), "transfer": preset.transfer_start(),
               "goal": Position(preset.goal)}[args.position]
    art = render_position(pos, preset.board)
    doc = {"problem": preset.name, "diagram": art.splitlines()}
    _emit(args, doc, art)
    return EXIT_OK


def cmd_presets(args) -> int:
    rows = []
    for name in PRESET_NAMES:
        p = make_preset(name)
        rows.append({"name": name, "rules": p.rules.kind, "men": p.size,
                     "board": f"{p.board.width}x{p.board.height}", "mirror": p.mirror,
                     "description": p.description})
    text = "\n".join(f"{r['name']:<14} {r['board']:<6} {r['men']:>3} men  {r['rules']}-move  "
                     f"{r['description']}" for r in rows)
    _emit(args, {"presets": rows}, text)
    return EXIT_OK


COMMANDS = {"game": cmd_game, "transfer": cmd_transfer, "bound": cmd_bound,
            "verify": cmd_verify, "render": cmd_render, "presets": cmd_presets}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "verbose", False):
            logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
