"""Command line interface: ``admissibility``, ``solve``, ``audit`` and ``sweep``.

Any configuration key can be overridden with ``--namespace.key value``
(for example ``--constitutive.gamma 23/15``). Relative output directories
are placed under ``$PNSF_OUTPUT_ROOT`` when it is set.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .admissibility import Case, a_window, estimate_chain_report
from .config import ConfigError, RunConfig, load_config
from .persistence import dumps
from .runner import (DEFAULT_SWEEP_CAP, EXIT_ADMISSIBILITY, EXIT_CONFIG, EXIT_OK, reaudit,
                     run_single, run_sweep)


def _split_overrides(argv: list[str]) -> tuple[list[str], dict[str, str]]:
    """Separate ``--namespace.key value`` pairs (dotted names) from the rest."""
    rest, out, i = [], {}, 0
    while i < len(argv):
        tok = argv[i]
        name = tok[2:].split("=", 1)[0] if tok.startswith("--") else ""
        if "." not in name:
            rest.append(tok)
            i += 1
            continue
        if "=" in tok:
            key, value = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(argv):
                raise ConfigError(f"missing value for {tok}")
            key, value = name, argv[i + 1]
            i += 2
        out[key] = value
    return rest, out


def _load(path, overrides) -> RunConfig:
    cfg = load_config(path) if path else RunConfig()
    return cfg.with_overrides(overrides) if overrides else cfg


def _parse_sweep(items: list[str]) -> list:
    sweep = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"sweep item {item!r} must look like key=v1,v2")
        key, values = item.split("=", 1)
        sweep.append((key.strip(), [v.strip() for v in values.split(",") if v.strip()]))
    return sweep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="periodic-nsf", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("admissibility", help="exponent window and estimate chain for gamma")
    a.add_argument("--gamma", required=True, help="adiabatic exponent, fractions allowed")
    a.add_argument("--case", default="RADIATION", choices=[c.value for c in Case])
    a.add_argument("--a", dest="a_bog", default=None, help="Bogovskii exponent (default: window choice)")
    a.add_argument("--json", action="store_true", help="print JSON records instead of a table")

    s = sub.add_parser("solve", help="solve and audit one configuration")
    s.add_argument("config", nargs="?", help="key=value configuration file")
    s.add_argument("--run-dir", default=None)

    au = sub.add_parser("audit", help="re-audit the checkpoint of a finished run")
    au.add_argument("run_dir")

    w = sub.add_parser("sweep", help="cartesian parameter sweep")
    w.add_argument("config", nargs="?")
    w.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2",
                   help="swept key and values; repeat for a product")
    w.add_argument("--sweep-dir", default=None)
    w.add_argument("--cap", type=int, default=DEFAULT_SWEEP_CAP)
    w.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv, overrides = _split_overrides(argv)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args = parser.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "admissibility":
            if overrides:
                raise ConfigError(f"unexpected options {sorted(overrides)}")
            return _admissibility(args)
        if args.command == "solve":
            res = run_single(_load(args.config, overrides), args.run_dir)
            print(f"exit={res.exit_code} dir={res.run_dir} {res.message}")
            return res.exit_code
        if args.command == "audit":
            res = reaudit(args.run_dir)
            print(f"exit={res.exit_code} dir={res.run_dir} {res.message}")
            return res.exit_code
        if args.command == "sweep":
            code, sd = run_sweep(_load(args.config, overrides), _parse_sweep(args.sweep),
                                 args.sweep_dir, args.cap, args.workers)
            print(f"exit={code} dir={sd}")
            return code
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


def _admissibility(args) -> int:
    try:
        win = a_window(args.gamma, args.case)
        chain = estimate_chain_report(args.gamma, args.a_bog, args.case)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        print(dumps({"record": "window", **win.to_record()}))
        for rec in chain.to_records():
            print(dumps(rec))
    else:
        if win.empty:
            print(f"window: EMPTY (gamma={win.gamma!r}, {win.case.value})")
        else:
            print(f"window: ({win.a_low!r}, {win.a_high!r}) binding={win.binding_term} "
                  f"a={win.a_chosen!r}")
        print(chain.table())
    return EXIT_ADMISSIBILITY if win.empty else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
