"""Command line front end.

Exit codes: 0 all verdicts as expected, 1 at least one test verdict
contradicts the scenario's expectation (a rejection where a pass was
expected, or a pass on a test listed under expect_reject), 2 invalid
configuration or arguments, 3 runtime failure.

Thread count is resolved before any compiled module is imported, because
the JIT runtime reads its thread limit from the environment exactly once.
Order of precedence: --threads flag, then BMCHECK_THREADS, then the
environment as-is.
"""

import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="bmcheck",
        description="Simulate Brownian paths, push them through transforms, "
                    "and test whether the result still behaves like a "
                    "Brownian motion.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_format=True):
        p.add_argument("--config", help="path to a scenario JSON file")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--paths", type=int,
                       help="override the number of simulated paths")
        p.add_argument("--alpha", type=float,
                       help="override the per-test significance level")
        p.add_argument("--out", help="write output to this path instead of stdout")
        if needs_format:
            p.add_argument("--format", choices=("json", "csv", "summary"),
                           default="json", help="report format (default json)")
            p.add_argument("--timing", action="store_true",
                           help="fill the meta timing fields (off by default "
                            "so reports stay byte-comparable)")
        p.add_argument("--threads", type=int,
                       help="worker threads for compiled kernels "
                            "(default: BMCHECK_THREADS or the environment)")

    p = sub.add_parser("simulate", help="sample paths and write them to a file")
    common(p, needs_format=False)
    p.add_argument("--transform", help="also apply this transform to the paths")

    p = sub.add_parser("conform",
                       help="run the Brownian-conformance suite "
                            "(default scenario: bm-null)")
    common(p)

    p = sub.add_parser("pde",
                       help="run field diagnostics on the harmonic gallery "
                            "(default scenario: pde-gallery)")
    common(p)

    p = sub.add_parser("counterexample",
                       help="run the builtin counterexample scenario: a "
                            "non-affine map with Brownian marginals that "
                            "fails the process-level tests")
    common(p)

    p = sub.add_parser("run", help="run a scenario from a config file")
    common(p)
    return ap


def _resolve_threads(args):
    n = getattr(args, "threads", None)
    if n is None:
        env = os.environ.get("BMCHECK_THREADS")
        if env is not None:
            try:
                n = int(env)
            except ValueError:
                print(f"bmcheck: BMCHECK_THREADS={env!r} is not an integer",
                      file=sys.stderr)
                return EXIT_CONFIG
    if n is not None:
        if n < 1:
            print(f"bmcheck: thread count must be >= 1, got {n}",
                  file=sys.stderr)
            return EXIT_CONFIG
        os.environ["NUMBA_NUM_THREADS"] = str(n)
    return None


def _load_config_file(path):
    from .errors import ConfigInvalid
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigInvalid(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigInvalid(f"config {path} is not valid JSON: {e}") from e


def _apply_overrides(raw, args):
    raw = dict(raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.paths is not None:
        raw["paths"] = args.paths
    if args.alpha is not None:
        raw["alpha"] = args.alpha
    return raw


def _write_output(data, out_path):
    if out_path:
        with open(out_path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()


def _cmd_simulate(args):
    from .errors import ConfigInvalid
    from .process import apply_transform, sample_paths, save_ensemble
    from .scenario import validate_config
    from .transforms import parse_transform
    raw = _load_config_file(args.config) if args.config else {
        "schema_version": 1, "name": "simulate", "law": {"n": 2},
        "grid": {"T": 2.0, "K": 1000}, "paths": 10000, "seed": 0, "tests": {}}
    raw = _apply_overrides(raw, args)
    cfg = validate_config(raw)
    if not args.out:
        raise ConfigInvalid("simulate requires --out (binary .bin or .csv)")
    ens = sample_paths(cfg.law, cfg.grid, cfg.paths, origin=cfg.origin,
                       seed=cfg.seed)
    f = None
    if args.transform:
        f = parse_transform(args.transform)
    elif "transform" in raw:
        f = cfg.transform
    if f is not None:
        ens = apply_transform(ens, f)
    save_ensemble(ens, args.out)
    n, k1, d = ens.paths.shape
    print(f"wrote {n} paths ({d}-d, {k1} time points) to {args.out}",
          file=sys.stderr)
    return EXIT_OK


def _cmd_scenario(args, default_builtin):
    from .scenario import (builtin_scenario, emit_report,
                           expectation_satisfied, run_scenario,
                           validate_config)
    raw = (_load_config_file(args.config) if args.config
           else builtin_scenario(default_builtin))
    raw = _apply_overrides(raw, args)
    cfg = validate_config(raw)
    report = run_scenario(cfg, timing=args.timing)
    data = emit_report(report, format=args.format)
    _write_output(data, args.out or cfg.out)
    if expectation_satisfied(report, cfg.expect_reject):
        return EXIT_OK
    return EXIT_REJECT


def main(argv=None):
    args = _build_parser().parse_args(argv)
    rc = _resolve_threads(args)
    if rc is not None:
        return rc
    # compiled modules are imported only after the thread env is final
    from .errors import BmcheckError, ConfigInvalid, UnsupportedFormat
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "conform":
            return _cmd_scenario(args, "bm-null")
        if args.command == "pde":
            return _cmd_scenario(args, "pde-gallery")
        if args.command == "counterexample":
            return _cmd_scenario(args, "counterexample")
        if args.command == "run":
            if not args.config:
                raise ConfigInvalid("run requires --config")
            return _cmd_scenario(args, None)
    except (ConfigInvalid, UnsupportedFormat) as e:
        print(f"bmcheck: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BmcheckError as e:
        print(f"bmcheck: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        print(f"bmcheck: runtime failure: {type(e).__name__}: {e}",
              file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
