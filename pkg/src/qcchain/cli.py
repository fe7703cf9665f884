"""Command-line front end: reproduce the tables/figures as CSV artifacts.

Exit code 0 iff every computation completed and every embedded assertion
passed; on failure the last CSV comment row carries a machine-readable
'# FAIL assertion=... detail=...' line.  Environment variables are never
consulted, so runs are reproducible from the argv alone.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .experiments import ExperimentConfig

_COMMANDS = {
    "spectrum-table": (experiments.cmd_spectrum_table, experiments.DEFAULT_N, "sqrt"),
    "cond-figures": (experiments.cmd_cond_figures, experiments.COND_DEFAULT_N, "sqrt"),
    "gmres-figures": (experiments.cmd_gmres_figures, experiments.GMRES_DEFAULT_N, "sqrt"),
    "stability-scan": (experiments.cmd_stability_scan, experiments.STABILITY_DEFAULT_N, "quarter"),
    "critical-strains": (experiments.cmd_critical_strains, (128,), "quarter"),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcchain",
        description="Assemble 1D atomistic/continuum coupling operators and "
                    "reproduce their spectral, stability, and solver experiments as CSV.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, default_n, default_rule) in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--n", action="append", type=int, default=None,
                       help=f"chain half-size, repeatable (default {list(default_n)})")
        p.add_argument("--k-rule", choices=("sqrt", "quarter", "const"), default=default_rule,
                       help="atomistic half-width rule: isqrt(n)+1, n//4, or a fixed --k")
        p.add_argument("--k", type=int, default=None, help="fixed K for --k-rule const")
        p.add_argument("--af", action="append", type=float, default=None,
                       help="elastic modulus values, repeatable")
        p.add_argument("--phif", type=float, default=1.0, help="phi''_F (default 1)")
        p.add_argument("--potential", default="lj", help="pair potential name (lj)")
        p.add_argument("--strain", type=float, default=None, help="reference strain")
        p.add_argument("--variant", action="append", default=None,
                       choices=("plain", "precond-l2", "precond-u12"),
                       help="gmres variant(s), repeatable (default: all three)")
        p.add_argument("--max-iter", type=int, default=None)
        p.add_argument("--tol", type=float, default=1e-12)
        p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    runner, default_n, _ = _COMMANDS[args.command]
    k_rule = args.k_rule
    if args.k is not None:
        k_rule = "const"
    cfg = ExperimentConfig(
        n_list=tuple(args.n) if args.n else tuple(default_n),
        k_rule=k_rule,
        k_value=args.k,
        af_list=tuple(args.af) if args.af else experiments.DEFAULT_AF,
        phi2_f=args.phif,
        potential=args.potential,
        strain=args.strain,
        variants=tuple(args.variant) if args.variant else ("plain", "precond-l2", "precond-u12"),
        max_iter=args.max_iter,
        tol=args.tol,
        out=args.out,
    )
    try:
        table = runner(cfg)
    except Exception as exc:  # compute errors propagate with nonzero exit
        sys.stderr.write(f"# FAIL assertion=compute detail={exc}\n")
        return 2
    table.write(cfg.out)
    return 0 if table.ok else 1


if __name__ == "__main__":
    sys.exit(main())
