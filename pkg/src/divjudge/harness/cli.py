"""``divjudge`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, DivJudgeError
from .config import ExperimentConfig, load_config_file
from .runners import run


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="JSON file of ExperimentConfig keys")
    p.add_argument("--seeds", type=int, help="seed-ensemble size (default 5)")
    p.add_argument("--master-seed", type=int, help="seed every job stream is derived from (default 0)")
    p.add_argument("--workers", type=int, help="parallel worker processes (default 1)")
    p.add_argument("--out", help="output directory (default $DIVJUDGE_OUT or ./divjudge-results)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="divjudge", description="Classifier-based KL and JS divergence estimation.")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    helps = {
        "exp1": "Gaussian pair with analytical KL over the M x L grid",
        "exp2": "Gaussian mixtures over the M x L grid",
        "exp3": "GMM generative model trained on N samples",
        "sweep": "JS/KL fidelity as mean separation grows",
    }
    for name, h in helps.items():
        _common(sub.add_parser(name, help=h))
    cmp = sub.add_parser("compare", help="real CSV against synthetic CSV")
    cmp.add_argument("--real", required=True)
    cmp.add_argument("--synthetic", required=True)
    cmp.add_argument("--m", type=int, help="training rows per side (default 7500)")
    cmp.add_argument("--l", type=int, help="evaluation rows per side (default 1000)")
    cmp.add_argument("--missing-token", action="append", dest="missing_tokens",
                     help="cell value read as missing; repeatable (default: empty and '?')")
    _common(cmp)
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = load_config_file(args.config) if args.config else {}
    if data.get("experiment", args.experiment) != args.experiment:
        raise ConfigError(f"config file is for {data['experiment']!r}, not {args.experiment!r}")
    data["experiment"] = args.experiment
    overrides = {
        "n_seeds": args.seeds,
        "master_seed": args.master_seed,
        "workers": args.workers,
        "out_dir": args.out,
    }
    if args.experiment == "compare":
        overrides.update(real=args.real, synthetic=args.synthetic, missing_tokens=args.missing_tokens)
        if args.m is not None:
            overrides["M_grid"] = [args.m]
        if args.l is not None:
            overrides["L_grid"] = [args.l]
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _summary(result) -> str:
    lines = []
    for c in result.cells:
        key = " ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in c.key.items())
        parts = [f"{n}={e.value:.3f}±{e.dispersion:.3f}" for n, e in sorted(c.estimates.items())]
        lines.append(f"{key}: " + " ".join(parts))
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        result = run(cfg)
        paths = result.write(cfg.resolved_out_dir())
    except DivJudgeError as exc:
        print(f"divjudge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"divjudge: data error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"divjudge: numerical failure: {exc}", file=sys.stderr)
        return 3
    print(_summary(result))
    print(f"wrote {paths['result']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
