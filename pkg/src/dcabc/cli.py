"""Command-line entry point: ``dcabc {pilot,run,bootstrap,mle}``.

Exit codes: 0 success, 2 configuration or input error, 3 sampler stagnation
or too many failed bootstrap replicates, 4 optimizer failure.  The log level
comes from ``DCABC_LOG`` (error, warn, info, debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .core import ConfigError, Dataset, DcabcError, DegenerateStatisticError, DomainError, RandomSource
from .inference import BootstrapError, parametric_bootstrap
from .config import (
    ExperimentConfig,
    build_model,
    json_default,
    load_config,
    load_dataset,
    resolve_weights,
    run_experiment,
    run_pilot,
    theta_from_result,
)
from .models import OptimizationError, gbm2d_closed_form_mle, gbm2d_exact_mle
from .samplers import StagnationError

logger = logging.getLogger("dcabc")

EXIT_OK, EXIT_INPUT, EXIT_STAGNATION, EXIT_OPTIMIZER = 0, 2, 3, 4
_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, default=json_default) + "\n")


def _out_dir(args, cfg: ExperimentConfig | None, default: str) -> Path:
    out = Path(args.out) if args.out else Path("runs") / (cfg.name if cfg else default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x:.4f}" for x in np.asarray(v, dtype=float)) + "]"


# -- subcommands -------------------------------------------------------------

def cmd_pilot(args) -> int:
    cfg = load_config(args.config, args.seed)
    model = build_model(cfg)
    data = load_dataset(cfg, model)
    started = time.perf_counter()
    out = run_pilot(cfg, model, data, args.threads)
    dest = _out_dir(args, cfg, "pilot")
    _write_json(dest / "weights.json", out.weights_json())
    if out.projection is not None:
        out.projection.save(dest / "projection.json")
    _write_json(dest / "timing.json", {"seconds": round(time.perf_counter() - started, 3)})
    print(f"{cfg.name}: omega = {_fmt_vec(out.weights.scales)} "
          f"({out.method}; pilot acceptance "
          f"{[round(r['acceptance_rate'], 3) for r in out.result.acceptance_rates]})")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.seed)
    model = build_model(cfg)
    data = load_dataset(cfg, model)
    weights, projection, provenance = resolve_weights(cfg, model, data, args.threads)
    result = run_experiment(cfg, model, data, weights, projection, args.threads)
    dest = _out_dir(args, cfg, "run")
    result.trace.to_csv(dest / "trace.csv", thin=args.thin)
    doc = result.to_json()
    doc["config"] = cfg.raw
    doc["seed"] = cfg.seed
    doc["weights"] = provenance
    if weights is not None:
        doc["weights"]["omega"] = weights.scales.tolist()
    _write_json(dest / "result.json", doc)
    _write_json(dest / "timing.json", {"seconds": round(result.wall_seconds, 3)})
    rates = ", ".join(f"K={r['K']} d={r['delta']:g}: {r['acceptance_rate']:.3f}"
                      for r in result.acceptance_rates)
    print(f"{cfg.name}: theta_hat = {_fmt_vec(result.theta_hat)}; acceptance [{rates}]; "
          f"{result.wall_seconds:.1f}s")
    return EXIT_OK


def _bootstrap_estimator(cfg: ExperimentConfig, kind: str, weights, projection, threads):
    if kind == "gbm2d_exact_mle":
        return lambda data, rng: gbm2d_exact_mle(data)[0].as_array()
    if kind == "gbm2d_closed_form_mle":
        return lambda data, rng: gbm2d_closed_form_mle(data)
    if kind == "run":
        model = build_model(cfg)

        def estimate(data, rng):
            seed = int(rng.generator.integers(0, 2 ** 63))
            return run_experiment(cfg, model, data, weights, projection, 1, seed=seed).theta_hat
        return estimate
    raise ConfigError(f"{cfg.name}: unknown bootstrap estimator {kind!r}")


def cmd_bootstrap(args) -> int:
    cfg = load_config(args.config, args.seed)
    spec = cfg.section("bootstrap")
    model = build_model(cfg)
    if "theta_hat" in spec:
        theta_hat = np.asarray(spec["theta_hat"], dtype=float)
    elif "result" in spec:
        path = cfg.resolve(spec["result"])
        if not path.exists():
            raise ConfigError(f"estimate file not found: {path}")
        theta_hat = theta_from_result(path)
    else:
        raise ConfigError(f"{cfg.name}: bootstrap needs 'theta_hat' or 'result'")
    B = int(args.B if args.B is not None else spec.get("B", 100))
    kind = spec.get("estimator", "run")
    weights = projection = None
    if kind == "run":
        data = load_dataset(cfg, model)
        weights, projection, _ = resolve_weights(cfg, model, data, args.threads)
    estimator = _bootstrap_estimator(cfg, kind, weights, projection, args.threads)
    started = time.perf_counter()
    truth = spec.get("truth")
    report = parametric_bootstrap(model, estimator, theta_hat, B, RandomSource(cfg.seed, 7),
                                  truth=truth, threads=args.threads)
    dest = _out_dir(args, cfg, "bootstrap")
    report.write(dest / "bootstrap.json", dest / "bootstrap.csv")
    _write_json(dest / "timing.json", {"seconds": round(time.perf_counter() - started, 3)})
    print(f"{cfg.name}: B={B} ({report.missing} missing)")
    for row in zip(report.param_names, report.means, report.percentile_2_5, report.percentile_97_5):
        print(f"  {row[0]:>10s} {row[1]:.4f} [{row[2]:.4f}, {row[3]:.4f}]")
    return EXIT_OK


def cmd_mle(args) -> int:
    if args.data:
        path = Path(args.data)
        if not path.exists():
            raise ConfigError(f"dataset file not found: {path}")
        data, name = Dataset.from_csv(path), path.stem
    elif args.config:
        cfg = load_config(args.config, args.seed)
        data, name = load_dataset(cfg, build_model(cfg)), cfg.name
    else:
        raise ConfigError("mle needs a dataset path or --config")
    params, loglik = gbm2d_exact_mle(data)
    doc = {"param_names": ["mu1", "logSigma1", "mu2", "logSigma2", "rho"],
           "theta_hat": params.as_array().tolist(), "loglik": loglik,
           "closed_form": gbm2d_closed_form_mle(data).tolist()}
    dest = Path(args.out) if args.out else Path("runs") / f"{name}_mle"
    dest.mkdir(parents=True, exist_ok=True)
    _write_json(dest / "mle.json", doc)
    print(f"{name}: MLE = {_fmt_vec(doc['theta_hat'])}, loglik = {loglik:.6f}")
    return EXIT_OK


# -- plumbing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcabc", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON file")
    common.add_argument("--seed", type=int, help="override the config's master seed")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for clones and bootstrap replicates")
    common.add_argument("--out", help="output directory (default runs/<config name>)")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("pilot", parents=[common], help="estimate kernel weights")
    run = sub.add_parser("run", parents=[common], help="run the configured sampler")
    run.add_argument("--thin", type=int, default=1, help="write every n-th trace row")
    boot = sub.add_parser("bootstrap", parents=[common], help="parametric bootstrap")
    boot.add_argument("-B", type=int, help="number of replicates (overrides config)")
    mle = sub.add_parser("mle", parents=[common], help="exact MLE for a 2-D GBM dataset")
    mle.add_argument("data", nargs="?", help="CSV with columns t,x,y")
    return p


COMMANDS = {"pilot": cmd_pilot, "run": cmd_run, "bootstrap": cmd_bootstrap, "mle": cmd_mle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = _LEVELS.get(os.environ.get("DCABC_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("pilot", "run", "bootstrap") and not args.config:
        print(f"dcabc {args.command}: --config is required", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except StagnationError as exc:
        print(f"dcabc: sampler stagnated: {exc}", file=sys.stderr)
        return EXIT_STAGNATION
    except BootstrapError as exc:
        print(f"dcabc: bootstrap failed: {exc}", file=sys.stderr)
        return EXIT_STAGNATION
    except OptimizationError as exc:
        best = "" if exc.best is None else f" (best point {_fmt_vec(np.ravel(exc.best))})"
        print(f"dcabc: optimizer failed: {exc}{best}", file=sys.stderr)
        return EXIT_OPTIMIZER
    except (ConfigError, DomainError, DegenerateStatisticError, FileNotFoundError,
            KeyError, ValueError) as exc:
        print(f"dcabc: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DcabcError as exc:
        print(f"dcabc: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
