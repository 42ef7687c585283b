"""File formats for every artifact the pipeline reads or writes.

Plain text throughout: chain descriptions and parameter matrices as
commented whitespace tables, recordings and reports as CSV with ``#``
metadata lines, trained networks and identified models as ``.npz``
archives.  Floats are printed with %.17g so a write/read round trip
reproduces every value bit for bit.  The one deliberate unit change at
the file boundary: rotation-history columns are stored in degrees.

Malformed files raise FileFormatError; writers never emit files their
readers reject.
"""

from __future__ import annotations

import csv
import io
import json
import os

import numpy as np

from .chain import RobotChain
from .data import FeatureSet
from .dynamics import PARAMS_PER_LINK, LinkParamVector
from .errors import ContractError, FileFormatError
from .evaluation import EvalReport, EvalRow
from .identification import BaseReduction, IdentifiedRBDModel, ObservationSet
from .limopa import ConfigPath
from .nets import N_JOINTS, NetworkSpec, Normalizer, build_network
from .plant import Dataset
from .training import TrainedModel

FLOAT_FMT = "%.17g"


def _f(x):
    return FLOAT_FMT % float(x)


def _meta_lines(meta):
    return [f"# {k} = {meta[k]}" for k in meta]


def _read_lines(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from exc


def _split_meta(lines):
    meta, rest = {}, []
    for ln in lines:
        if ln.startswith("#"):
            body = ln[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
        elif ln.strip():
            rest.append(ln)
    return meta, rest


def _parse_meta_value(s):
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            continue
    return s


def _typed_meta(meta):
    return {k: _parse_meta_value(v) for k, v in meta.items()}


def _floats(tokens, path, what):
    try:
        return np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as exc:
        raise FileFormatError(f"{path}: bad {what}: {exc}") from exc


# ---------------------------------------------------------------- robot

def write_robot(chain, path):
    """Chain description: rotations, offsets, axes, limits, gravity, tip."""
    out = ["# serial revolute chain description",
           f"n {chain.n}",
           "gravity " + " ".join(_f(v) for v in chain.gravity),
           "tip " + " ".join(_f(v) for v in chain.tip)]
    for i in range(chain.n):
        out.append(f"joint {i}")
        out.append("rot " + " ".join(_f(v) for v in chain.rot[i].reshape(-1)))
        out.append("trans " + " ".join(_f(v) for v in chain.trans[i]))
        out.append("axis " + " ".join(_f(v) for v in chain.axes[i]))
        out.append("pos_limits " + _f(chain.pos_lower[i]) + " "
                   + _f(chain.pos_upper[i]))
        out.append("vel_limit " + _f(chain.vel_limit[i]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def read_robot(path):
    lines = [ln for ln in _read_lines(path)
             if ln.strip() and not ln.startswith("#")]
    fields = {}
    for ln in lines:
        key, _, rest = ln.partition(" ")
        fields.setdefault(key, []).append(rest.split())
    try:
        n = int(fields["n"][0][0])
        gravity = _floats(fields["gravity"][0], path, "gravity")
        tip = _floats(fields["tip"][0], path, "tip")
        rot = np.stack([_floats(v, path, "rot").reshape(3, 3)
                        for v in fields["rot"]])
        trans = np.stack([_floats(v, path, "trans") for v in fields["trans"]])
        axes = np.stack([_floats(v, path, "axis") for v in fields["axis"]])
        lims = np.stack([_floats(v, path, "pos_limits")
                         for v in fields["pos_limits"]])
        vel = np.array([_floats(v, path, "vel_limit")[0]
                        for v in fields["vel_limit"]])
    except (KeyError, IndexError) as exc:
        raise FileFormatError(f"{path}: missing chain field {exc}") from exc
    if rot.shape[0] != n:
        raise FileFormatError(f"{path}: expected {n} joints, found "
                              f"{rot.shape[0]}")
    return RobotChain(rot=rot, trans=trans, axes=axes, pos_lower=lims[:, 0],
                      pos_upper=lims[:, 1], vel_limit=vel, gravity=gravity,
                      tip=tip)


# --------------------------------------------------------------- params

PARAM_COLUMNS = ("m", "mcx", "mcy", "mcz", "ixx", "ixy", "ixz", "iyy",
                 "iyz", "izz", "fv", "fc")


def write_params(params, path):
    """Per-link parameter matrix, one link per row."""
    out = ["# per-link parameters: " + " ".join(PARAM_COLUMNS)]
    for row in params.per_link:
        out.append(" ".join(_f(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def read_params(path):
    lines = [ln for ln in _read_lines(path)
             if ln.strip() and not ln.startswith("#")]
    rows = [_floats(ln.split(), path, "parameter row") for ln in lines]
    if not rows or any(r.shape != (PARAMS_PER_LINK,) for r in rows):
        raise FileFormatError(
            f"{path}: expected rows of {PARAMS_PER_LINK} parameters")
    return LinkParamVector(np.stack(rows))


# ----------------------------------------------------- identified model

def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_identified_model(model, path):
    red = model.reduction
    np.savez(path, phi_base=model.phi_base, selected=red.selected,
             dependent=red.dependent, combination=red.combination,
             rank_tol=np.float64(red.rank_tol), r_diag=red.r_diag,
             diagnostics=np.str_(json.dumps(model.diagnostics,
                                            sort_keys=True,
                                            default=_jsonable)))


def read_identified_model(path, chain):
    try:
        with np.load(path, allow_pickle=False) as z:
            red = BaseReduction(selected=z["selected"],
                                dependent=z["dependent"],
                                combination=z["combination"],
                                rank_tol=float(z["rank_tol"]),
                                r_diag=z["r_diag"])
            diagnostics = json.loads(str(z["diagnostics"]))
            phi_base = z["phi_base"]
    except (OSError, KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}: not an identified model file: "
                              f"{exc}") from exc
    return IdentifiedRBDModel(chain, red, phi_base, diagnostics=diagnostics)


# --------------------------------------------------------------- config

DEFAULT_CONFIG = {
    "experiment": {"seed": 0, "n_scaffolds": 12, "t_rand_lo": 400,
                   "t_rand_hi": 500, "seq_t": 50, "opt_budget": 0},
    "plant": {"rate": 100.0, "sigma_tau": 0.02, "sigma_q": 1e-5,
              "accel_time": 0.05},
    "training": {"epochs": 30, "batch": 50, "lr": 1e-3,
                 "weight_decay": 1e-4, "plateau_patience": 3,
                 "plateau_factor": 0.5, "runs": 2, "split": 0.8,
                 "max_windows_per_epoch": 2000, "max_val_windows": 2000},
}


def default_config():
    return {s: dict(v) for s, v in DEFAULT_CONFIG.items()}


def write_config(cfg, path):
    import configparser
    parser = configparser.ConfigParser()
    for section, values in cfg.items():
        parser[section] = {k: repr(v) if isinstance(v, float) else str(v)
                           for k, v in values.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def read_config(path):
    """Defaults overlaid with the file; unknown keys are rejected."""
    import configparser
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise FileFormatError(f"{path}: bad config: {exc}") from exc
    cfg = default_config()
    for section in parser.sections():
        if section not in cfg:
            raise FileFormatError(f"{path}: unknown section [{section}]")
        for key, raw in parser[section].items():
            if key not in cfg[section]:
                raise FileFormatError(
                    f"{path}: unknown key {key} in [{section}]")
            kind = type(cfg[section][key])
            try:
                cfg[section][key] = kind(raw)
            except ValueError as exc:
                raise FileFormatError(
                    f"{path}: bad value for {section}.{key}: {raw}") from exc
    return cfg


# ----------------------------------------------------------------- CSVs

def _write_csv(path, meta, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for ln in _meta_lines(meta):
            fh.write(ln + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path, expected_header=None):
    lines = _read_lines(path)
    meta, rest = _split_meta(lines)
    if not rest:
        raise FileFormatError(f"{path}: no CSV content")
    reader = csv.reader(io.StringIO("\n".join(rest)))
    header = next(reader)
    if expected_header is not None and header != list(expected_header):
        raise FileFormatError(f"{path}: unexpected header {header}")
    return _typed_meta(meta), header, list(reader)


def _joint_cols(prefix, n=N_JOINTS):
    return [f"{prefix}{j + 1}" for j in range(n)]


def write_observations(obs, path):
    header = ["t"] + _joint_cols("q") + _joint_cols("tau")
    rows = ([_f(obs.t[i])] + [_f(v) for v in obs.q[i]]
            + [_f(v) for v in obs.tau[i]] for i in range(obs.t.shape[0]))
    _write_csv(path, {"rate": _f(obs.rate)}, header, rows)


def read_observations(path):
    header = ["t"] + _joint_cols("q") + _joint_cols("tau")
    meta, _, rows = _read_csv(path, header)
    if "rate" not in meta:
        raise FileFormatError(f"{path}: missing rate metadata")
    M = np.stack([_floats(r, path, "observation row") for r in rows])
    return ObservationSet(t=M[:, 0], q=M[:, 1:8], tau=M[:, 8:15],
                          rate=float(meta["rate"]))


def write_path(cpath, path):
    header = ["idx", "phase"] + _joint_cols("q") + ["speed_factor"]
    rows = ([str(i), str(cpath.phase[i])]
            + [_f(v) for v in cpath.waypoints[i]] + [_f(cpath.speed[i])]
            for i in range(cpath.waypoints.shape[0]))
    _write_csv(path, {"seed": cpath.seed}, header, rows)


def read_path(path):
    header = ["idx", "phase"] + _joint_cols("q") + ["speed_factor"]
    meta, _, rows = _read_csv(path, header)
    ways = np.stack([_floats(r[2:9], path, "waypoint") for r in rows])
    return ConfigPath(waypoints=ways,
                      phase=np.array([r[1] for r in rows], dtype=object),
                      speed=_floats([r[9] for r in rows], path, "speed"),
                      seed=int(meta.get("seed", -1)))


def write_dataset(ds, path):
    header = ["t", "seg"] + _joint_cols("q") + _joint_cols("tau")
    meta = {k: ds.meta[k] for k in sorted(ds.meta)}
    meta["rate"] = _f(ds.rate)
    rows = ([_f(ds.t[i]), str(int(ds.seg[i]))] + [_f(v) for v in ds.q[i]]
            + [_f(v) for v in ds.tau[i]] for i in range(ds.t.shape[0]))
    _write_csv(path, meta, header, rows)


def read_dataset(path):
    header = ["t", "seg"] + _joint_cols("q") + _joint_cols("tau")
    meta, _, rows = _read_csv(path, header)
    if "rate" not in meta:
        raise FileFormatError(f"{path}: missing rate metadata")
    rate = float(meta.pop("rate"))
    t = _floats([r[0] for r in rows], path, "time")
    try:
        seg = np.array([int(r[1]) for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise FileFormatError(f"{path}: bad segment id: {exc}") from exc
    M = np.stack([_floats(r[2:16], path, "dataset row") for r in rows])
    return Dataset(t=t, seg=seg, q=M[:, 0:7], tau=M[:, 7:14], rate=rate,
                   meta=meta)


_R_SLICE = slice(21, 28)


def write_features(fs, path):
    """Feature table; the rotation-history columns are written in degrees."""
    header = (["seg"] + _joint_cols("q") + _joint_cols("qd")
              + _joint_cols("qdd") + _joint_cols("r")
              + _joint_cols("tau_rbd") + _joint_cols("tau"))
    X = fs.X.copy()
    X[:, _R_SLICE] = np.rad2deg(X[:, _R_SLICE])
    rows = ([str(int(fs.seg[i]))] + [_f(v) for v in X[i]]
            + [_f(v) for v in fs.Y[i]] for i in range(X.shape[0]))
    _write_csv(path, {"rate": _f(fs.rate), "r_unit": "deg"}, header, rows)


def read_features(path):
    header = (["seg"] + _joint_cols("q") + _joint_cols("qd")
              + _joint_cols("qdd") + _joint_cols("r")
              + _joint_cols("tau_rbd") + _joint_cols("tau"))
    meta, _, rows = _read_csv(path, header)
    if "rate" not in meta:
        raise FileFormatError(f"{path}: missing rate metadata")
    seg = np.array([int(r[0]) for r in rows], dtype=np.int64)
    M = np.stack([_floats(r[1:], path, "feature row") for r in rows])
    X = M[:, 0:35]
    X[:, _R_SLICE] = np.deg2rad(X[:, _R_SLICE])
    from .nets import feature_columns
    return FeatureSet(X=X, Y=M[:, 35:42], seg=seg,
                      tau_rbd=X[:, 28:35].copy(),
                      columns=tuple(feature_columns(True, True)),
                      rate=float(meta["rate"]))


# ------------------------------------------------------------ networks

def write_checkpoint(trained, path):
    spec = trained.spec
    spec_doc = {"variant": spec.variant, "T": spec.T, "use_r": spec.use_r,
                "use_tau_rbd": spec.use_tau_rbd,
                "hybrid_output_add": spec.hybrid_output_add,
                "widths": spec.widths, "seed": spec.seed}
    arrays = {f"param__{k}": v for k, v in trained.network.params.items()}
    arrays.update(trained.normalizer.state())
    np.savez(path, spec=np.str_(json.dumps(spec_doc, sort_keys=True)),
             history=trained.history, best_val=np.float64(trained.best_val),
             run_index=np.int64(trained.run_index), **arrays)


def read_checkpoint(path):
    try:
        with np.load(path, allow_pickle=False) as z:
            doc = json.loads(str(z["spec"]))
            spec = NetworkSpec(variant=doc["variant"], T=int(doc["T"]),
                               use_r=bool(doc["use_r"]),
                               use_tau_rbd=bool(doc["use_tau_rbd"]),
                               hybrid_output_add=bool(
                                   doc["hybrid_output_add"]),
                               widths=doc["widths"], seed=int(doc["seed"]))
            net = build_network(spec)
            saved = {k[len("param__"):]: z[k] for k in z.files
                     if k.startswith("param__")}
            if set(saved) != set(net.params):
                raise FileFormatError(
                    f"{path}: parameter keys do not match {spec.variant}")
            for k in net.params:
                if net.params[k].shape != saved[k].shape:
                    raise FileFormatError(
                        f"{path}: shape mismatch for parameter {k}")
                net.params[k][...] = saved[k]
            normalizer = Normalizer(z["x_mean"], z["x_std"], z["y_mean"],
                                    z["y_std"])
            history = z["history"]
            best_val = float(z["best_val"])
            run_index = int(z["run_index"])
    except (OSError, KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}: not a checkpoint file: "
                              f"{exc}") from exc
    return TrainedModel(spec=spec, network=net, normalizer=normalizer,
                        history=history, best_val=best_val,
                        run_index=run_index)


# -------------------------------------------------------------- reports

TRACE_HEADER = ["t", "joint", "model", "tau_meas", "tau_pred"]


def write_traces(path, t, tau_meas, predictions, meta=None):
    """Tidy long-format torque traces for external plotting.

    predictions maps a model label to an (N, n) prediction array aligned
    with t and tau_meas; one output row per (time, joint, model).
    """
    t = np.asarray(t, dtype=np.float64)
    tau_meas = np.asarray(tau_meas, dtype=np.float64)
    if tau_meas.shape[0] != t.shape[0]:
        raise ContractError("tau_meas and t lengths disagree")
    rows = []
    for label in predictions:
        pred = np.asarray(predictions[label], dtype=np.float64)
        if pred.shape != tau_meas.shape:
            raise ContractError(f"prediction shape mismatch for {label}")
        for j in range(tau_meas.shape[1]):
            for k in range(t.shape[0]):
                rows.append([_f(t[k]), j + 1, label,
                             _f(tau_meas[k, j]), _f(pred[k, j])])
    _write_csv(path, dict(sorted((meta or {}).items())), TRACE_HEADER, rows)


REPORT_HEADER = (["label", "status", "avg"] + _joint_cols("mse")
                 + ["best_val", "run_index", "n_val"])


def write_report_csv(report, path):
    meta = {k: report.meta[k] for k in sorted(report.meta)}
    rows = []
    for r in report.rows:
        status = r.fault if r.fault else "ok"
        rows.append([r.label, status, _f(r.avg)]
                    + [_f(v) for v in r.per_joint]
                    + [_f(r.best_val), str(r.run_index), str(r.n_val)])
    _write_csv(path, meta, REPORT_HEADER, rows)


def read_report_csv(path):
    meta, _, rows = _read_csv(path, REPORT_HEADER)
    out = []
    for r in rows:
        if len(r) != len(REPORT_HEADER):
            raise FileFormatError(f"{path}: short report row {r!r}")
        out.append(EvalRow(label=r[0], spec=None,
                           per_joint=_floats(r[3:10], path, "mse"),
                           avg=float(r[2]), best_val=float(r[10]),
                           run_index=int(r[11]), n_val=int(r[12]),
                           fault="" if r[1] == "ok" else r[1]))
    return EvalReport(rows=out, meta=meta)


def write_report_markdown(report, path):
    """Fixed-width markdown table of per-joint torque MSE in Nm^2."""
    header = (["model", "status", "avg"]
              + [f"joint {j + 1}" for j in range(N_JOINTS)])
    body = []
    for r in report.rows:
        cells = [r.label, r.fault if r.fault else "ok", f"{r.avg:.4g}"]
        cells += [f"{v:.4g}" for v in r.per_joint]
        body.append(cells)
    widths = [max(len(h), *(len(row[i]) for row in body))
              for i, h in enumerate(header)]
    def fmt(cells):
        padded = [c.ljust(w) if i == 0 else c.rjust(w)
                  for i, (c, w) in enumerate(zip(cells, widths))]
        return "| " + " | ".join(padded) + " |"
    rule = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    out = ["# Torque prediction ablation", "",
           "Validation mean squared torque error per joint [Nm^2].", "",
           fmt(header), rule]
    out += [fmt(row) for row in body]
    out += ["", "## Setup", ""]
    out += [f"- {k} = {report.meta[k]}" for k in sorted(report.meta)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
