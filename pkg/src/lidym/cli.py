"""Command-line front end for the identification and learning pipeline.

Subcommands mirror the pipeline stages: ``identify`` fits the
rigid-body model from a simulated excitation recording, ``limopa-gen``
draws an exploration path, ``simulate`` replays a path on the synthetic
plant, ``train``/``eval`` handle a single network variant, ``ablate``
runs the full grid end to end, and ``report`` renders a stored table.

Every subcommand honors the global ``--seed``, ``--config`` and
``--out`` flags.  Exit codes: 0 on success, 1 on contract or domain
errors, 2 on file-format or other I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import robotio
from .data import attach_features, split_windows, window_starts
from .errors import (ContractError, FileFormatError, InfeasibilityError,
                     InputDomainError)
from .evaluation import mse_per_joint, run_ablation, variant_label
from .limopa import SCAF, generate_path
from .nets import VARIANTS, NetworkSpec
from .pipeline import DATA_SEED_OFFSET, desk_experiment, identify_on_plant
from .plant import default_plant, generate_dataset
from .reference import reference_chain, reference_params
from .training import TrainConfig, train


def _slug(label):
    out = []
    for ch in label.lower():
        out.append(ch if ch.isalnum() else "-")
    return "-".join(filter(None, "".join(out).split("-")))


def _load_common(args):
    cfg = robotio.read_config(args.config) if args.config \
        else robotio.default_config()
    seed = args.seed if args.seed is not None else cfg["experiment"]["seed"]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, int(seed), out


def _chain(args):
    if getattr(args, "robot", None):
        return robotio.read_robot(args.robot)
    return reference_chain()


def _true_params(args):
    if getattr(args, "params", None):
        return robotio.read_params(args.params)
    return reference_params()


def _plant(cfg, chain, params):
    p = cfg["plant"]
    return default_plant(chain, params, rate=p["rate"],
                         sigma_tau=p["sigma_tau"], sigma_q=p["sigma_q"])


def _train_config(cfg, seed):
    t = cfg["training"]
    return TrainConfig(epochs=t["epochs"], batch=t["batch"], lr=t["lr"],
                       weight_decay=t["weight_decay"],
                       plateau_patience=t["plateau_patience"],
                       plateau_factor=t["plateau_factor"], runs=t["runs"],
                       split=t["split"],
                       max_windows_per_epoch=t["max_windows_per_epoch"],
                       max_val_windows=t["max_val_windows"], seed=seed)


def _features(args, cfg):
    dataset = robotio.read_dataset(args.dataset)
    chain = _chain(args)
    rbd = robotio.read_identified_model(args.model, chain)
    return attach_features(dataset, rbd), dataset


def cmd_identify(args):
    cfg, seed, out = _load_common(args)
    chain = _chain(args)
    params = _true_params(args)
    plant = _plant(cfg, chain, params)
    budget = args.opt_budget if args.opt_budget is not None \
        else cfg["experiment"]["opt_budget"]
    model = identify_on_plant(plant, seed=seed, opt_budget=budget)
    robotio.write_robot(chain, out / "robot.txt")
    robotio.write_params(params, out / "params_true.txt")
    robotio.write_identified_model(model, out / "model.npz")
    d = model.diagnostics
    print(f"identified rank {d['rank']} base model from {d['samples']} "
          f"samples: residual rms {d['residual_rms']:.4g} Nm, "
          f"cond {d['cond']:.4g}")
    print(f"wrote {out / 'model.npz'}")
    return 0


def cmd_limopa_gen(args):
    cfg, seed, out = _load_common(args)
    chain = _chain(args)
    e = cfg["experiment"]
    count = args.scaffolds if args.scaffolds is not None \
        else e["n_scaffolds"]
    path = generate_path(chain, count, seed=seed,
                         t_rand_range=(e["t_rand_lo"], e["t_rand_hi"]))
    robotio.write_path(path, out / "path.csv")
    n_scaf = int(np.sum(path.phase == SCAF))
    print(f"generated path: {len(path.phase)} waypoints "
          f"({n_scaf} scaffold targets), wrote {out / 'path.csv'}")
    return 0


def cmd_simulate(args):
    cfg, seed, out = _load_common(args)
    chain = _chain(args)
    params = _true_params(args)
    plant = _plant(cfg, chain, params)
    path = robotio.read_path(args.path)
    ds = generate_dataset(plant, path, seed=seed + DATA_SEED_OFFSET,
                          accel_time=cfg["plant"]["accel_time"])
    robotio.write_dataset(ds, out / "dataset.csv")
    print(f"simulated {ds.t.size} samples at {ds.rate:g} Hz, "
          f"wrote {out / 'dataset.csv'}")
    return 0


def cmd_train(args):
    cfg, seed, out = _load_common(args)
    features, _ = _features(args, cfg)
    T = 1 if args.variant == "MLP-7" else (
        args.seq_t if args.seq_t is not None else cfg["experiment"]["seq_t"])
    use_tau_rbd = not args.no_tau_rbd
    spec = NetworkSpec(variant=args.variant, T=T, use_r=not args.no_r,
                       use_tau_rbd=use_tau_rbd,
                       hybrid_output_add=use_tau_rbd, seed=seed)
    label = variant_label(spec.variant, spec.use_tau_rbd, spec.use_r)
    tm = train(spec, features, config=_train_config(cfg, seed))
    dest = out / f"{_slug(label)}.npz"
    robotio.write_checkpoint(tm, dest)
    print(f"trained {label}: best validation mse {tm.best_val:.6g} Nm^2 "
          f"(run {tm.run_index}), wrote {dest}")
    return 0


def cmd_eval(args):
    cfg, seed, out = _load_common(args)
    features, _ = _features(args, cfg)
    tm = robotio.read_checkpoint(args.checkpoint)
    tcfg = _train_config(cfg, seed)
    ws = split_windows(features, tm.spec.T, seed=tcfg.seed, split=tcfg.split)
    rows = ws.val + tm.spec.T - 1
    pred = tm.predict(features, ws.val)
    per = mse_per_joint(pred, features.Y[rows])
    label = variant_label(tm.spec.variant, tm.spec.use_tau_rbd, tm.spec.use_r)
    print(f"{label} on {rows.size} held-out windows:")
    for j, v in enumerate(per):
        print(f"  joint {j + 1}: mse {v:.6g} Nm^2")
    print(f"  average: {float(np.mean(per)):.6g} Nm^2")
    if args.traces:
        _export_traces(out, features, tm, label)
        print(f"wrote {out / 'traces.csv'}")
    return 0


def _export_traces(out, features, tm, label):
    seg_id = int(features.seg.max())
    starts = window_starts(features.seg, tm.spec.T)
    starts = starts[features.seg[starts] == seg_id]
    rows = starts + tm.spec.T - 1
    preds = {label: tm.predict(features, starts),
             "RBD": features.tau_rbd[rows]}
    robotio.write_traces(out / "traces.csv", rows / features.rate,
                         features.Y[rows], preds,
                         meta={"segment": seg_id, "rate": features.rate})


def cmd_ablate(args):
    cfg, seed, out = _load_common(args)
    chain = _chain(args)
    params = _true_params(args)
    e = cfg["experiment"]
    result = desk_experiment(seed=seed, n_scaffolds=e["n_scaffolds"],
                             t_rand_range=(e["t_rand_lo"], e["t_rand_hi"]),
                             config=_train_config(cfg, seed),
                             seq_T=e["seq_t"], opt_budget=e["opt_budget"],
                             keep_models=True,
                             plant=_plant(cfg, chain, params),
                             accel_time=cfg["plant"]["accel_time"])
    robotio.write_robot(chain, out / "robot.txt")
    robotio.write_identified_model(result.rbd_model, out / "model.npz")
    robotio.write_dataset(result.dataset, out / "dataset.csv")
    for row in result.report.rows:
        if row.model is not None:
            robotio.write_checkpoint(row.model,
                                     out / f"{_slug(row.label)}.npz")
    robotio.write_report_csv(result.report, out / "report.csv")
    robotio.write_report_markdown(result.report, out / "report.md")
    print((out / "report.md").read_text(), end="")
    print(f"wrote {out / 'report.csv'} and per-variant checkpoints")
    return 0


def cmd_report(args):
    _, _, out = _load_common(args)
    report = robotio.read_report_csv(args.table)
    robotio.write_report_markdown(report, out / "report.md")
    print((out / "report.md").read_text(), end="")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lidym",
        description="Hybrid rigid-body/neural inverse dynamics pipeline "
                    "on a synthetic 7-joint manipulator.")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides the config file)")
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="INI config file (see lidym.robotio)")
    parser.add_argument("--out", default=".", metavar="DIR",
                        help="output directory (created if missing)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify",
                       help="simulate excitation and fit the base model")
    p.add_argument("--robot", help="robot geometry file (default built-in)")
    p.add_argument("--params", help="true parameter file (default built-in)")
    p.add_argument("--opt-budget", type=int, default=None,
                   help="excitation optimization budget (0 = heuristic)")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("limopa-gen", help="draw an exploration path")
    p.add_argument("--robot")
    p.add_argument("--scaffolds", type=int, default=None,
                   help="number of anchor configurations")
    p.set_defaults(func=cmd_limopa_gen)

    p = sub.add_parser("simulate", help="replay a path on the plant")
    p.add_argument("--robot")
    p.add_argument("--params")
    p.add_argument("--path", required=True, help="path CSV to replay")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train one network variant")
    p.add_argument("--robot")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True,
                   help="identified rigid-body model (.npz)")
    p.add_argument("--variant", required=True, choices=sorted(VARIANTS))
    p.add_argument("--seq-t", type=int, default=None,
                   help="window length for sequence models")
    p.add_argument("--no-r", action="store_true",
                   help="drop the rotation-history channel")
    p.add_argument("--no-tau-rbd", action="store_true",
                   help="drop the rigid-body prediction input and residual "
                        "connection")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on held-out windows")
    p.add_argument("--robot")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--traces", action="store_true",
                   help="export tidy per-joint torque traces")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="full grid: identify, simulate, train, "
                                      "score")
    p.add_argument("--robot")
    p.add_argument("--params")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="render a stored report table")
    p.add_argument("--table", required=True, help="report CSV to render")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ContractError, InputDomainError, InfeasibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
