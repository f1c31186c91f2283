"""Command-line entry point.

Subcommands:
  train    run the constrained actor-critic per a TOML config
  oracle   solve the grid safety value function and cross-check it
           against the closed-form braking kernel
  eval     roll out a checkpointed policy under the benchmark protocol
  slice    export the learned constraint functional over a state plane

Exit codes: 0 success, 1 runtime failure (a FAILED marker is left in
the output directory), 2 invalid configuration or usage. Output
directories are never overwritten without --force. Relative out_dir
paths resolve under $REACHRL_OUT_ROOT when it is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__, minitoml
from .config import (
    RunConfig,
    apply_overrides,
    config_from_dict,
    config_hash,
    dump_config,
    estimator_kwargs,
)
from .envs import make_env
from .exceptions import ConfigError, ReachRlError
from .grids import GridSpec, ValueGrid, mask_to_grid
from .envs.quadrotor import EVAL_STARTS_XZ
from .oracle import SafetyValueIteration, analytic_kernel_mask, kernel_agreement
from .trainer import ConstrainedActorCritic, SliceSpec, evaluate_policy

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _out_dir(cfg: RunConfig) -> Path:
    root = os.environ.get("REACHRL_OUT_ROOT", "")
    path = Path(cfg.out_dir)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _prepare_out_dir(path: Path, outputs: list[str], force: bool) -> None:
    existing = [name for name in outputs if (path / name).exists()]
    if existing and not force:
        raise ConfigError(
            f"output files already exist in {path} ({existing}); "
            "pass --force to overwrite"
        )
    path.mkdir(parents=True, exist_ok=True)
    marker = path / "FAILED"
    if marker.exists():
        marker.unlink()


def _load_config(args) -> RunConfig:
    try:
        raw = minitoml.load(args.config)
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    overrides = getattr(args, "override", None) or []
    raw = apply_overrides(raw, overrides)
    return config_from_dict(raw)


def _write_manifest(path: Path, cfg: RunConfig, status: str) -> None:
    manifest = {
        "version": __version__,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "algorithm": cfg.algorithm,
        "env": cfg.env.name,
        "status": status,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _fail(path: Path, exc: BaseException) -> int:
    path.mkdir(parents=True, exist_ok=True)
    (path / "FAILED").write_text(
        "".join(traceback.format_exception(type(exc), exc, exc.__traceback__))
    )
    print(f"error: {exc}", file=sys.stderr)
    return RUNTIME_ERROR


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    _prepare_out_dir(out, ["metrics.csv", "final.ckpt", "manifest.json",
                           "config.toml"], args.force)
    est = ConstrainedActorCritic(
        **estimator_kwargs(cfg),
        metrics_path=out / "metrics.csv",
        checkpoint_path=out / "final.ckpt",
    )
    est._schedules()  # surface rate-ordering errors before any work
    env = make_env(cfg.env.name, **cfg.env.params)
    try:
        est.fit(env)
        (out / "config.toml").write_text(dump_config(cfg))
        _write_manifest(out, cfg, "ok")
    except ReachRlError:
        raise
    except Exception as exc:  # runtime failure: keep partial artifacts
        return _fail(out, exc)
    print(f"trained {cfg.algorithm} on {cfg.env.name}: artifacts in {out}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    env = make_env(cfg.env.name, **cfg.env.params)
    if env.spec.state_dim != 2:
        raise ConfigError(
            f"oracle solving needs a 2-D state space, {cfg.env.name} has "
            f"{env.spec.state_dim}"
        )
    out = _out_dir(cfg)
    outputs = ["value_grid.csv", "kernel.csv", "analytic_kernel.csv",
               "comparison.json"]
    _prepare_out_dir(out, outputs, args.force)
    o = cfg.oracle
    grid = GridSpec(lows=tuple(o.lows), highs=tuple(o.highs),
                    counts=tuple(int(c) for c in o.counts))
    try:
        svi = SafetyValueIteration(gamma=o.gamma, action_samples=o.action_samples,
                                   tol=o.tol, max_sweeps=o.max_sweeps).fit(env, grid)
        svi.value_grid().to_csv(out / "value_grid.csv")
        mask_to_grid(grid, svi.feasible_mask()).to_csv(out / "kernel.csv")
        analytic = analytic_kernel_mask(grid)
        mask_to_grid(grid, analytic).to_csv(out / "analytic_kernel.csv")
        agreement = kernel_agreement(svi.feasible_mask(), analytic)
        summary = {
            "agreement": agreement,
            "dp_feasible_fraction": float(svi.feasible_mask().mean()),
            "analytic_feasible_fraction": float(analytic.mean()),
            "sweeps": svi.n_sweeps_,
            "final_residual": svi.residuals_[-1],
        }
        (out / "comparison.json").write_text(json.dumps(summary, indent=2))
    except ReachRlError:
        raise
    except Exception as exc:
        return _fail(out, exc)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    env = make_env(cfg.env.name, **cfg.env.params)
    try:
        est = ConstrainedActorCritic.load(args.checkpoint, env)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load checkpoint {args.checkpoint}: {exc}") from exc
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    stats = evaluate_policy(env, est.bundle_, cfg.eval.episodes, rng)
    stats["episodes"] = (len(EVAL_STARTS_XZ) if cfg.env.name == "quadrotor"
                         else cfg.eval.episodes)
    payload = json.dumps(stats, indent=2, sort_keys=True)
    print(payload)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(payload)
    return 0


def _load_slice_spec(path) -> list[tuple[str, SliceSpec]]:
    raw = minitoml.load(path)
    body = raw.get("slice")
    if not isinstance(body, dict) or not body:
        raise ConfigError(f"{path}: missing or empty [slice] table")
    for key in ("axes", "lows", "highs", "counts"):
        if key not in body:
            raise ConfigError(f"{path}: [slice] needs {key}")
    axes = tuple(body["axes"])
    if len(axes) != 2:
        raise ConfigError(f"{path}: slice must have exactly two axes")
    fixed = body.get("fixed", {})
    sweep = body.get("sweep", {})
    base = dict(
        axes=axes,
        lows=tuple(float(v) for v in body["lows"]),
        highs=tuple(float(v) for v in body["highs"]),
        counts=tuple(int(v) for v in body["counts"]),
    )
    if sweep:
        if set(sweep) != {"name", "values"}:
            raise ConfigError(f"{path}: [slice.sweep] needs name and values")
        out = []
        for v in sweep["values"]:
            fx = dict(fixed)
            fx[sweep["name"]] = float(v)
            tag = f"{sweep['name']}{v:+g}"
            out.append((tag, SliceSpec(fixed=fx, **base)))
        return out
    return [("", SliceSpec(fixed=dict(fixed), **base))]


def cmd_slice(args) -> int:
    cfg = _load_config(args)
    env = make_env(cfg.env.name, **cfg.env.params)
    specs = _load_slice_spec(args.slice)
    try:
        est = ConstrainedActorCritic.load(args.checkpoint, env)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load checkpoint {args.checkpoint}: {exc}") from exc
    out = _out_dir(cfg)
    names = [f"slice{('_' + tag) if tag else ''}.csv" for tag, _ in specs]
    _prepare_out_dir(out, names, args.force)
    try:
        for name, (_, spec) in zip(names, specs):
            grid = est.export_slice(spec)
            grid.to_csv(out / name)
            print(out / name)
    except ReachRlError:
        raise
    except Exception as exc:
        return _fail(out, exc)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reachrl",
        description="Reachability-constrained RL: training, grid oracle, "
                    "evaluation and feasible-set export.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training configuration")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--override", action="append", default=[],
                         metavar="KEY=VALUE",
                         help="dotted-path config override, repeatable")
    p_train.add_argument("--force", action="store_true",
                         help="overwrite existing outputs")
    p_train.set_defaults(func=cmd_train)

    p_oracle = sub.add_parser("oracle", help="solve and cross-check the "
                                             "grid safety value function")
    p_oracle.add_argument("--config", required=True)
    p_oracle.add_argument("--override", action="append", default=[],
                          metavar="KEY=VALUE")
    p_oracle.add_argument("--force", action="store_true")
    p_oracle.set_defaults(func=cmd_oracle)

    p_eval = sub.add_parser("eval", help="evaluate a checkpointed policy")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--out", default=None, help="write the JSON here too")
    p_eval.set_defaults(func=cmd_eval)

    p_slice = sub.add_parser("slice", help="export constraint-map slices")
    p_slice.add_argument("--config", required=True)
    p_slice.add_argument("--override", action="append", default=[],
                         metavar="KEY=VALUE")
    p_slice.add_argument("--checkpoint", required=True)
    p_slice.add_argument("--slice", required=True,
                         help="TOML file with the [slice] table")
    p_slice.add_argument("--force", action="store_true")
    p_slice.set_defaults(func=cmd_slice)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
