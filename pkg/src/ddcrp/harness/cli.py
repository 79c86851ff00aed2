"""Command-line entry point.

    ddcrp fit --preset old-faithful --out runs/of
    ddcrp fit --config my.toml --run.seed 7 --iterations 5000
    ddcrp diagnose --preset old-faithful --trace runs/of/chain0

Any config key can be set with ``--<section>.<key> VALUE`` or a unique
suffix of it. Failures print one JSON line on stderr followed by a
plain-language line, and exit with 2 (config), 3 (data) or 4 (numeric).
"""

import argparse
import json
import os
from pathlib import Path
import sys

from .config import flat_keys, load_config, resolve_key
from .errors import ConfigError, HarnessError
from . import runner

OUTPUT_ENV = "DDCRP_OUTPUT_DIR"
COMMANDS = ("simulate", "fit", "tune", "predict", "diagnose", "compare")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="ddcrp", description="ddCRP clustering with collapsed Gibbs and reversible-jump samplers.",
                epilog="Config keys: " + ", ".join(flat_keys()))
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "compare":
            sp.add_argument("trace_a")
            sp.add_argument("trace_b")
            sp.add_argument("--out", default=None)
            continue
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--preset", help="bundled preset: poisson-overlapping or old-faithful")
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./ddcrp-output)")
        if name in ("predict", "diagnose"):
            sp.add_argument("--trace", help="trace directory written by fit")
    return p


def parse_overrides(extra):
    """``['--run.seed', '3', '--iterations=10', '--hyper.infer_s']`` -> ``[(key, raw), ...]``."""
    out, i = [], 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or tok == "--":
            raise ConfigError(f"unexpected argument {tok!r}")
        flag, eq, value = tok[2:].partition("=")
        key = resolve_key(flag)
        if not eq:
            nxt = extra[i + 1] if i + 1 < len(extra) else None
            if nxt is None or (nxt.startswith("--") and not _is_number(nxt)):
                value = "true"  # bare flag: only meaningful for boolean keys
            else:
                value = nxt
                i += 1
        out.append((key, value))
        i += 1
    return out


def _is_number(tok):
    try:
        float(tok)
        return True
    except ValueError:
        return False


def default_out(command):
    base = os.environ.get(OUTPUT_ENV) or "ddcrp-output"
    return str(Path(base) / command)


def _emit_error(exc):
    line = {"error": exc.kind, "exit_code": exc.exit_code, "message": str(exc)}
    print(json.dumps(line, sort_keys=True), file=sys.stderr)
    print(f"ddcrp: {exc.kind} error: {exc}", file=sys.stderr)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, extra = build_parser().parse_known_args(argv)
        if args.command == "compare":
            if extra:
                raise ConfigError(f"compare takes no config options: {' '.join(extra)}")
            rep = runner.compare(args.trace_a, args.trace_b, args.out)
            print(json.dumps(rep, sort_keys=True))
            return 0
        cfg = load_config(args.preset, args.config, parse_overrides(extra))
        out = args.out or default_out(args.command)
        if args.command == "simulate":
            ds = runner.simulate(cfg, out)
            print(f"wrote {ds.n} observations to {Path(out) / 'data.csv'}")
        elif args.command == "fit":
            _, rep = runner.fit(cfg, out)
            print(json.dumps({"out": out, "k_mode": rep["k_mode"], "k_posterior": rep["k_posterior"]}, sort_keys=True))
        elif args.command == "tune":
            best, _ = runner.tune(cfg, out)
            print(json.dumps({"out": out, "best": best}, sort_keys=True))
        elif args.command == "predict":
            draws = runner.predict(cfg, out, args.trace)
            print(json.dumps({"out": out, **draws.summary()}, sort_keys=True))
        elif args.command == "diagnose":
            if not args.trace:
                raise ConfigError("diagnose needs --trace")
            rep = runner.diagnose(cfg, args.trace, args.out)
            print(json.dumps({k: rep[k] for k in ("k_mode", "k_posterior", "samples", "config_digest")},
                             sort_keys=True))
            if rep.get("s_weakly_identified"):
                print("warning: posterior of s barely differs from its prior (weakly identified)", file=sys.stderr)
    except HarnessError as exc:
        _emit_error(exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
