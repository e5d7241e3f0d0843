"""Command-line entry points: train, grid, oracle, check.

Every command prints a single JSON object on success; failures print
{"error": ..., "message": ...} and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import pathlib
import sys

import numpy as np

from . import checks, harness, imd
from .imd import UnboundedImdError


def _parse_alpha(text: str):
    return None if text.lower() in ("none", "uniform") else float(text)


def _split_config(raw: dict) -> tuple[dict, dict]:
    """Partition a flat config dict into training and data kwargs."""
    train_keys = {f.name for f in dataclasses.fields(harness.TrainConfig)}
    data_keys = {f.name for f in dataclasses.fields(harness.DataConfig)}
    train_kw, data_kw = {}, {}
    for key, val in raw.items():
        if key in train_keys:
            train_kw[key] = val
        elif key in data_keys:
            data_kw[key] = val
        elif key == "target_marginal":
            data_kw[key] = val  # handled by the caller
        else:
            raise ValueError(f"unknown config key {key!r}")
    return train_kw, data_kw


def _load_config(path: str | None) -> tuple[dict, dict]:
    if path is None:
        return {}, {}
    raw = json.loads(pathlib.Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a flat JSON object")
    return _split_config(raw)


def _build(args) -> tuple[harness.TrainConfig, harness.DataConfig, np.ndarray | None, float | None]:
    train_kw, data_kw = _load_config(args.config)
    if args.method is not None:
        train_kw["method"] = args.method
    if args.seed is not None:
        train_kw["seed"] = args.seed
    pinned = data_kw.pop("target_marginal", None)
    if pinned is not None:
        pinned = np.asarray(pinned, dtype=np.float64)
    cfg = harness.TrainConfig(**train_kw)
    dc = harness.DataConfig(**data_kw)
    alpha = _parse_alpha(args.alpha)
    return cfg, dc, pinned, alpha


def _cmd_train(args) -> int:
    cfg, dc, pinned, alpha = _build(args)
    data = harness.make_data(dc, alpha, cfg.seed, target_marginal=pinned)
    _, rec = harness.train(cfg, data)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.json").write_text(rec.to_json())
    paths = harness.emit_plot_data([rec], out)
    print(json.dumps({
        "method": rec.method, "alpha": rec.alpha, "seed": rec.seed,
        "final_per_class_acc": rec.final_per_class_acc,
        "aborted": rec.aborted, "abort_step": rec.abort_step,
        "wall_time_s": rec.wall_time_s,
        "run_json": str(out / "run.json"), **paths,
    }))
    return 0


def _cmd_grid(args) -> int:
    cfg, dc, pinned, _ = _build(args)
    methods = args.methods.split(",")
    alphas = [_parse_alpha(a) for a in args.alphas.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    report = harness.run_grid(methods, alphas, seeds, cfg, dc, target_marginal=pinned)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "grid.csv").write_text(report.to_csv())
    paths = harness.emit_plot_data(report.records, out)
    runs_dir = out / "runs"
    runs_dir.mkdir(exist_ok=True)
    for rec in report.records:
        tag = "none" if rec.alpha is None else repr(float(rec.alpha))
        name = f"run_{rec.method}_{tag}_{rec.seed}.json"
        (runs_dir / name).write_text(rec.to_json())
    print(json.dumps({
        "cells": [c.summary() for c in report.cells],
        "n_runs": len(report.records),
        "n_aborted": sum(r.aborted for r in report.records),
        "grid_csv": str(out / "grid.csv"), **paths,
    }))
    return 0


def _cmd_oracle(args) -> int:
    if args.instance is not None:
        inst = imd.ImdInstance.from_json(pathlib.Path(args.instance).read_text())
    else:
        rng = np.random.default_rng(args.seed if args.seed is not None else 0)
        inst = imd.random_imd_instance(rng, m=args.m, n_classes=args.classes)
    if args.eps is not None:
        inst = imd.ImdInstance(
            metric=inst.metric, p=inst.p, q=inst.q, class_of=inst.class_of,
            epsilons=np.full(inst.n_classes, float(args.eps)), points=inst.points,
        )
    try:
        result = imd.solve_imd(inst)
    except UnboundedImdError as exc:
        print(json.dumps({
            "error": "UnboundedImdError",
            "message": str(exc),
            "certificate_ray": exc.ray.tolist(),
            "component": exc.component.tolist(),
        }))
        return 3
    bounds = imd.lemma1_bounds(inst)
    remark2 = imd.remark2_check(inst)
    payload = {
        "m": inst.n_points,
        "n_classes": inst.n_classes,
        "imd_value": result.imd_value,
        "f_star": result.f_star.tolist(),
        "bounds": {
            "conditional": bounds.rhs_conditional,
            "cssd": bounds.rhs_cssd,
            "marginal": bounds.rhs_marginal,
            "delta_k": bounds.delta_k.tolist(),
            "gamma_k": bounds.gamma_k.tolist(),
            "cssd_value": bounds.cssd_value,
            "delta_pooled": bounds.delta_pooled,
            "eps_pooled": bounds.eps_pooled,
        },
        "tradeoff": dataclasses.asdict(remark2),
        "slacks": {
            "conditional": bounds.rhs_conditional - result.imd_value,
            "cssd": bounds.rhs_cssd - result.imd_value,
            "marginal": bounds.rhs_marginal - result.imd_value,
        },
    }
    if args.grid_oracle:
        grid_val = imd.grid_imd_value(inst, step=args.grid_step)
        payload["grid_value"] = grid_val
        payload["lp_grid_gap"] = result.imd_value - grid_val
    print(json.dumps(payload))
    return 0


def _cmd_check(args) -> int:
    report = checks.run_all(seed=args.seed if args.seed is not None else 0)
    print(json.dumps(report))
    return 0 if report["ok"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="suppalign",
        description="support-alignment workbench: training, sweeps, oracles",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="flat JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out")

    p_train = sub.add_parser("train", help="single training run")
    common(p_train)
    p_train.add_argument("--method", default=None, choices=harness.METHODS)
    p_train.add_argument("--alpha", default="none",
                         help="Dirichlet concentration or 'none' for uniform")

    p_grid = sub.add_parser("grid", help="method x alpha x seed sweep")
    common(p_grid)
    p_grid.add_argument("--methods", default=",".join(harness.METHODS))
    p_grid.add_argument("--alphas", default="none,0.5")
    p_grid.add_argument("--seeds", default="0,1,2")
    p_grid.set_defaults(method=None, alpha="none")

    p_or = sub.add_parser("oracle", help="exact discrepancy bounds on an instance")
    p_or.add_argument("--instance", default=None, help="instance JSON file")
    p_or.add_argument("--m", type=int, default=8)
    p_or.add_argument("--classes", type=int, default=3)
    p_or.add_argument("--seed", type=int, default=None)
    p_or.add_argument("--eps", type=float, default=None,
                      help="override every class budget")
    p_or.add_argument("--grid-oracle", action="store_true",
                      help="also run the exhaustive grid maximizer")
    p_or.add_argument("--grid-step", type=float, default=0.01)

    p_check = sub.add_parser("check", help="gradient checks and invariants")
    p_check.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)
    handlers = {
        "train": _cmd_train, "grid": _cmd_grid,
        "oracle": _cmd_oracle, "check": _cmd_check,
    }
    try:
        return handlers[args.cmd](args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
