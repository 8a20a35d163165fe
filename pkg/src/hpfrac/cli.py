"""Command line driver: ``hpfrac run`` (convergence sweep) and ``hpfrac mesh`` (mesh dump)."""

import argparse
import logging
import sys

from .experiments import ExperimentConfig, run_convergence, summary_lines, write_csv
from .mesh import geometric_mesh

# flag name -> (config attribute, parser)
_KEYS = {}


def parse_layers(text):
    """``a..b`` (inclusive, empty when b < a) or a single integer."""
    text = str(text).strip()
    if ".." in text:
        a, b = text.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(text)]


def parse_sigmas(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def parse_degree(text):
    text = str(text).strip()
    return "L" if text.upper() == "L" else int(text)


def parse_bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    return None if str(text).strip().lower() in ("", "none", "default") else int(text)


_KEYS.update({
    "dim": ("dim", int),
    "s": ("s", float),
    "sigma": ("sigmas", parse_sigmas),
    "layers": ("layers", parse_layers),
    "degree": ("degree", parse_degree),
    "max-degree": ("max_degree", _opt_int),
    "rhs": ("rhs", str),
    "variant": ("variant", str),
    "quad-near": ("quad_near", _opt_int),
    "quad-far": ("quad_far", _opt_int),
    "out": ("out", str),
    "deterministic": ("deterministic", parse_bool),
    "dump-matrix": ("dump_matrix", str),
    "workers": ("workers", int),
})


def read_config_file(path):
    """Flat ``key = value`` lines; '#' starts a comment; keys as the long flags."""
    values = {}
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected 'key = value'")
            key, val = (p.strip() for p in line.split("=", 1))
            key = key.replace("_", "-")
            if key not in _KEYS:
                raise ValueError(f"{path}:{n}: unknown key {key!r}")
            attr, conv = _KEYS[key]
            values[attr] = conv(val)
    return values


def _run_parser(sub):
    p = sub.add_parser("run", help="convergence sweep over sigma and L, CSV output")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--dim", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--sigma", type=parse_sigmas, help="comma separated list")
    p.add_argument("--layers", type=parse_layers, help="range a..b or a single L")
    p.add_argument("--degree", type=parse_degree, help="'L' or an integer")
    p.add_argument("--max-degree", type=int, help="cap for the degree rule")
    p.add_argument("--rhs", help="const:<v> or a registered forcing name")
    p.add_argument("--variant", choices=["figure", "text"])
    p.add_argument("--quad-near", type=int, help="Gauss order for touching pairs")
    p.add_argument("--quad-far", type=int, help="Gauss order for separated pairs")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--deterministic", action="store_const", const=True,
                   help="serial assembly, timing columns written as 0")
    p.add_argument("--dump-matrix", help="write the upper triangle as 'i j value'")
    p.add_argument("--workers", type=int, help="processes for near-field assembly")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _mesh_parser(sub):
    p = sub.add_parser("mesh", help="write the mesh debug dump")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--variant", choices=["figure", "text"], default="figure")
    p.add_argument("--out", required=True)
    return p


def build_config(args):
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key, (attr, _) in _KEYS.items():
        v = getattr(args, key.replace("-", "_"), None)
        if v is not None:
            values[attr] = v
    return ExperimentConfig(**values)


def cmd_run(args):
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = build_config(args)
    records, summaries = run_convergence(config)
    if config.out:
        with open(config.out, "w", newline="") as fh:
            write_csv(records, fh, config.deterministic)
        report = sys.stdout
    else:
        write_csv(records, sys.stdout, config.deterministic)
        report = sys.stderr
    for line in summary_lines(config, summaries):
        print(line, file=report)
    failed = [r for r in records if r.status != "ok"]
    return 1 if failed else 0


def cmd_mesh(args):
    geometric_mesh(args.sigma, args.layers, args.dim, args.variant).dump(args.out)
    return 0


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = argparse.ArgumentParser(prog="hpfrac", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    _run_parser(sub)
    _mesh_parser(sub)
    if not argv or argv[0] not in ("run", "mesh", "-h", "--help"):
        argv.insert(0, "run")
    args = parser.parse_args(argv)
    try:
        return cmd_run(args) if args.command == "run" else cmd_mesh(args)
    except (ValueError, OSError) as exc:
        print(f"hpfrac: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
