"""``tmc-bench``: run MC/TMC benchmark ladders and write CSV tables.

    tmc-bench ode1d-uniform --ladder N=M=s --N 64,128,256 --R 25 --out table.csv
    tmc-bench pde2d --N 256 --M 16 --s 256 --methods TMC
    tmc-bench run --config experiment.cfg --threads 4
    tmc-bench anova-verify

Settings come from an optional ``key = value`` config file (keys are the
long flag names without dashes) and are overridden by flags.  Exit status
is 0 only when every replication and every verification succeeded.
"""

from __future__ import annotations

import argparse
import sys

from .harness import BENCHMARKS, RELATIONS, ExperimentConfig, emit_csv, ladder_from_relation, run, verify_anova

CONFIG_KEYS = ("benchmark", "ladder", "N", "M", "s", "R", "seed", "methods", "out", "threads")


def read_config(path: str) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _int_list(text) -> list[int]:
    if text is None or text == "":
        return []
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _parse_ladder_value(text: str):
    """A relation name, or explicit triples ``N:M:s,N:M:s,...``."""
    if ":" in text:
        triples = []
        for part in text.replace(" ", "").split(","):
            vals = part.split(":")
            if len(vals) != 3:
                raise ValueError(f"bad triple {part!r}, expected N:M:s")
            triples.append(tuple(int(v) for v in vals))
        return None, triples
    return text, None


def build_config(settings: dict) -> ExperimentConfig:
    benchmark = settings.get("benchmark")
    if not benchmark:
        raise ValueError("no benchmark given")
    R = int(settings.get("R") or 25)
    seed = int(settings.get("seed") or 0)
    methods = tuple(m.strip() for m in str(settings.get("methods") or "MC,TMC").split(",") if m.strip())
    if benchmark == "anova-verify":
        return ExperimentConfig(benchmark, R=R, base_seed=seed, methods=methods)

    Ns, Ms, ss = (_int_list(settings.get(k)) for k in ("N", "M", "s"))
    relation, triples = None, None
    if settings.get("ladder"):
        relation, triples = _parse_ladder_value(settings["ladder"])
    if triples is None and relation is not None:
        if not Ns:
            raise ValueError(f"ladder {relation!r} needs --N values")
        triples = ladder_from_relation(relation, Ns)
        # explicit M or s must agree with the relation
        for key, given in (("M", Ms), ("s", ss)):
            if given and [t[1 if key == "M" else 2] for t in triples] != (given * len(triples) if len(given) == 1 else given):
                raise ValueError(f"--{key} {given} disagrees with ladder {relation!r}")
    elif triples is None:
        if benchmark == "mvn" and not Ms:
            Ms = [0]
        if not (Ns and Ms and ss):
            raise ValueError("give --ladder, or --N, --M and --s")
        n = max(len(Ns), len(Ms), len(ss))
        cols = []
        for name, vals in (("N", Ns), ("M", Ms), ("s", ss)):
            if len(vals) not in (1, n):
                raise ValueError(f"--{name} has {len(vals)} values, expected 1 or {n}")
            cols.append(vals * n if len(vals) == 1 else vals)
        triples = list(zip(*cols))
    return ExperimentConfig(benchmark, tuple(triples), relation, R, seed, methods)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--benchmark", choices=BENCHMARKS)
    p.add_argument("--ladder", help=f"relation ({', '.join(RELATIONS)}) or triples N:M:s,...")
    p.add_argument("--N", help="comma-separated sample counts")
    p.add_argument("--M", help="comma-separated mesh sizes")
    p.add_argument("--s", help="comma-separated dimensions")
    p.add_argument("--R", type=int, help="replications (default 25)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--methods", help="MC, TMC or MC,TMC (default)")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--threads", type=int, help="parallel replications; never changes values")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress lines on stderr")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tmc-bench", description="Toeplitz Monte Carlo benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + BENCHMARKS:
        _add_common(sub.add_parser(name, help="benchmark from --benchmark / config" if name == "run" else None))
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    log = (lambda msg: None) if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    try:
        settings = read_config(args.config) if args.config else {}
        for key in CONFIG_KEYS:
            val = getattr(args, key)
            if val is not None:
                settings[key] = val
        if args.command != "run":
            if settings.get("benchmark") not in (None, args.command) and args.benchmark is not None:
                raise ValueError(f"--benchmark {args.benchmark} conflicts with subcommand {args.command}")
            settings["benchmark"] = args.command
        config = build_config(settings)
        threads = int(settings["threads"]) if settings.get("threads") not in (None, "") else 1
        if threads < 1:
            raise ValueError("--threads must be >= 1")
    except (ValueError, OSError) as exc:
        print(f"tmc-bench: error: {exc}", file=sys.stderr)
        return 2

    if config.benchmark == "anova-verify":
        checks = verify_anova(config.base_seed)
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
        return 0 if all(c.passed for c in checks) else 1

    records = run(config, threads=threads, progress=log)
    out = settings.get("out")
    try:
        emit_csv(records, out if out else sys.stdout)
    except OSError as exc:
        print(f"tmc-bench: error: cannot write {out}: {exc}", file=sys.stderr)
        return 1
    return 1 if any(r.failed for r in records) else 0


if __name__ == "__main__":
    sys.exit(main())
