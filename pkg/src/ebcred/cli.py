"""``ebcred`` command line: run one experiment mode and write its output directory."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import MODES, ConfigError, ExperimentSpec, NumericalFailure, run

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _n_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ebcred", description=__doc__)
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="JSON file with ExperimentSpec fields")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--reps", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--n", type=_n_list, dest="n_list", metavar="LIST",
                    help="comma-separated noise levels, e.g. 1e4,1e6")
    ap.add_argument("--truth")
    ap.add_argument("--L", type=float)
    ap.add_argument("--workers", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"mode": args.mode, "seed": args.seed, "reps": args.reps, "out": args.out,
                 "n_list": args.n_list, "truth": args.truth, "L": args.L, "workers": args.workers}
    try:
        if args.config:
            spec = ExperimentSpec.load(args.config, **overrides)
        else:
            spec = ExperimentSpec.from_dict({k: v for k, v in overrides.items() if v is not None})
        result = run(spec)
    except ConfigError as e:
        print(f"ebcred: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as e:
        print(f"ebcred: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"ebcred: {e}", file=sys.stderr)
        return 1
    if spec.out is None:
        json.dump(_jsonable(result), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def _jsonable(result):
    from dataclasses import asdict, is_dataclass
    if isinstance(result, list):
        return [asdict(r) if is_dataclass(r) else r for r in result]
    if isinstance(result, dict) and result and all(isinstance(k, float) for k in result):
        return {f"{k:g}": {"alpha_hat": v.alpha_hat, "kept": v.kept} for k, v in result.items()}
    return result


if __name__ == "__main__":
    sys.exit(main())
