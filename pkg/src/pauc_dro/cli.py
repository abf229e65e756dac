"""Command-line harness: train, eval, re-curve, sweep and selftest.

Configuration is a flat ``key=value`` file (``--config``) plus ``--set
key=value`` overrides; overrides win.  Everything is validated before any
data is generated or read.

Exit codes: 0 success, 1 validation or I/O error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from . import acceptance
from .data import SynthSpec, generate, load_csv, split
from .losses import PairwiseLossSpec
from .metrics import model_scoreset, opauc_exact, tpauc_exact
from .model import ARCHS, ScoreModel
from .optim import OPTIMIZERS, NumericalFailure, StepHyper, pauc_metrics, run_training

log = logging.getLogger("pauc_dro")

SCHEMA_VERSION = 1
COMMANDS = ("train", "eval", "re-curve", "sweep", "selftest")


class ConfigError(ValueError):
    pass


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v):
    items = [x for x in str(v).split(",") if x.strip()]
    return tuple(float(x) for x in items)


def _ints(v):
    items = [x for x in str(v).split(",") if x.strip()]
    return tuple(int(x) for x in items)


_HYPER_TYPES = {f.name: f.type for f in dataclasses.fields(StepHyper)}
_CASTS = {"float": float, "int": int, "str": str, "bool": _bool}

# non-hyperparameter keys with their parser and default
RUN_KEYS = {
    "data": (str, "synthetic"),
    "preset": (str, "hard_negatives"),
    "n": (int, 2000),
    "pos_frac": (float, 0.1),
    "d": (int, 10),
    "sigma": (float, 1.0),
    "hard_frac": (float, 0.05),
    "hard_shift": (float, 6.0),
    "data_seed": (int, -1),
    "label_column": (str, "label"),
    "positive_label": (str, "1"),
    "standardize": (_bool, True),
    "val_frac": (float, 0.0),
    "arch": (str, "linear_sigmoid"),
    "hidden": (int, 16),
    "activation": (str, "softplus"),
    "optimizer": (str, "sopa"),
    "loss": (str, "squared_hinge"),
    "loss_c": (float, 1.0),
    "epochs": (int, 40),
    "seed": (int, 0),
    "model_path": (str, ""),
    "betas": (_floats, (0.3, 0.5)),
    "lambdas": (_floats, acceptance.RE_LAMBDAS),
    "draws": (int, 100),
    "target": (str, "val_opauc_0.3"),
    "workers": (int, 1),
    "items": (_ints, tuple(sorted(acceptance.CHECKS))),
}

# sweep grids are given as grid.<key>=v1,v2,...
GRID_PREFIX = "grid."

# defaults that differ from StepHyper's own, matching the desk-scale preset
HYPER_DEFAULTS = {k: v for k, v in acceptance.TRAIN_PRESET.items() if k != "epochs"}


def parse_kv_lines(lines, source="config"):
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _cast(key, value):
    if key in RUN_KEYS:
        parser = RUN_KEYS[key][0]
    elif key in _HYPER_TYPES:
        parser = _CASTS[str(_HYPER_TYPES[key]).replace("'", "")]
    else:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return parser(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


@dataclasses.dataclass
class RunConfig:
    command: str
    values: dict
    hyper: StepHyper
    grid: dict
    out: Path

    def data_seed(self):
        return self.values["seed"] if self.values["data_seed"] < 0 else self.values["data_seed"]

    def flat(self) -> dict:
        d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.values.items()}
        d.update(dataclasses.asdict(self.hyper))
        return d


def build_config(command, raw: dict, out) -> RunConfig:
    """Cast and validate every key; raises :class:`ConfigError`."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    values = {k: v for k, (_, v) in RUN_KEYS.items()}
    hyper_kw = dict(HYPER_DEFAULTS)
    grid = {}
    for key, value in raw.items():
        if key.startswith(GRID_PREFIX):
            name = key[len(GRID_PREFIX):]
            items = [x.strip() for x in str(value).split(",") if x.strip()]
            if not items:
                raise ConfigError(f"empty grid for {name}")
            grid[name] = [_cast(name, x) for x in items]
            continue
        v = _cast(key, value) if isinstance(value, str) else value
        if key in RUN_KEYS:
            values[key] = v
        else:
            hyper_kw[key] = v
    try:
        hyper = StepHyper(**hyper_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(command, values, hyper, grid, Path(out))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    v = cfg.values
    if v["data"] != "synthetic" and not Path(v["data"]).is_file():
        raise ConfigError(f"data file not found: {v['data']}")
    if v["data"] == "synthetic":
        if v["n"] < 2 or not 0 < v["pos_frac"] < 1 or v["d"] < 2 or v["sigma"] <= 0:
            raise ConfigError("synthetic data needs n >= 2, 0 < pos_frac < 1, d >= 2, sigma > 0")
        if v["preset"] not in ("separable", "overlap", "hard_negatives"):
            raise ConfigError(f"unknown preset {v['preset']!r}")
    if not 0 <= v["val_frac"] < 1:
        raise ConfigError("val_frac must lie in [0, 1)")
    if v["arch"] not in ARCHS:
        raise ConfigError(f"unknown arch {v['arch']!r}")
    if v["arch"] == "mlp_sigmoid" and v["hidden"] < 1:
        raise ConfigError("hidden must be positive")
    if v["optimizer"] not in OPTIMIZERS:
        raise ConfigError(f"unknown optimizer {v['optimizer']!r}; choose from {', '.join(OPTIMIZERS)}")
    try:
        PairwiseLossSpec(v["loss"], v["loss_c"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if v["epochs"] < 0:
        raise ConfigError("epochs must be non-negative")
    if cfg.command == "eval" and not Path(v["model_path"]).is_file():
        raise ConfigError(f"model file not found: {v['model_path']!r}")
    if cfg.command == "re-curve":
        if not v["lambdas"]:
            raise ConfigError("empty lambda grid")
        if not v["betas"] or not all(0 < b <= 1 for b in v["betas"]):
            raise ConfigError("betas must be non-empty and lie in (0, 1]")
        if any(lam <= 0 for lam in v["lambdas"]):
            raise ConfigError("lambdas must be positive")
        if v["draws"] < 1:
            raise ConfigError("draws must be positive")
    if cfg.command == "sweep":
        if not cfg.grid:
            raise ConfigError("sweep needs at least one grid.<key>=... entry")
        if v["workers"] < 1:
            raise ConfigError("workers must be positive")
        for combo in _grid_points(cfg.grid):
            try:
                cfg.hyper.replace(**{k: x for k, x in combo.items() if k in _HYPER_TYPES})
            except ValueError as exc:
                raise ConfigError(f"grid point {combo}: {exc}") from None
    if cfg.command == "selftest" and not set(v["items"]) <= set(acceptance.CHECKS):
        raise ConfigError(f"selftest items must be among {sorted(acceptance.CHECKS)}")


def _grid_points(grid):
    keys = sorted(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


# ---------------------------------------------------------------------------
# data and model construction
# ---------------------------------------------------------------------------


def load_data(cfg: RunConfig):
    """Return ``(train, val_or_None)``."""
    v = cfg.values
    if v["data"] == "synthetic":
        data = generate(SynthSpec(n=v["n"], pos_frac=v["pos_frac"], d=v["d"], preset=v["preset"],
                                  sigma=v["sigma"], hard_frac=v["hard_frac"], hard_shift=v["hard_shift"],
                                  seed=cfg.data_seed()))
    else:
        data = load_csv(v["data"], v["label_column"], v["positive_label"], v["standardize"])
    if v["val_frac"] > 0:
        train, val, _ = split(data, 1.0 - v["val_frac"], v["val_frac"], seed=cfg.data_seed())
        return train, val
    return data, None


def _loss(cfg):
    return PairwiseLossSpec(cfg.values["loss"], cfg.values["loss_c"])


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(r[k])) if isinstance(r[k], float) else r[k]) for k in columns})


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def train_once(cfg: RunConfig, out: Path) -> dict:
    """Train, write ``trace.csv``, ``model.json`` and ``summary.json`` into ``out``."""
    v = cfg.values
    train, val = load_data(cfg)
    model = ScoreModel.init(v["arch"], train.d, hidden=v["hidden"] if v["arch"] == "mlp_sigmoid" else 0,
                            activation=v["activation"], seed=v["seed"])
    state, report = run_training(v["optimizer"], train, model, cfg.hyper, v["epochs"], seed=v["seed"],
                                 val=val, loss=_loss(cfg))
    out.mkdir(parents=True, exist_ok=True)
    trace = report.rows[1:]
    columns = list(report.rows[0].keys())
    _write_csv(out / "trace.csv", trace, columns)
    final = model.with_params(state.w)
    final.save(out / "model.json")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "train",
        "optimizer": v["optimizer"],
        "epochs": v["epochs"],
        "seed": v["seed"],
        "final": {k: val_ for k, val_ in report.final.items() if k != "epoch"},
        "initial": {k: val_ for k, val_ in report.rows[0].items() if k != "epoch"},
        "floor_hits": state.floor_hits,
        "config": cfg.flat(),
    }
    _write_json(out / "summary.json", summary)
    return summary


def cmd_train(cfg: RunConfig) -> int:
    s = train_once(cfg, cfg.out)
    f = s["final"]
    print(f"{cfg.values['optimizer']}: train OPAUC(0.3) {f['train_opauc_0.3']:.4f}, "
          f"TPAUC(0.5,0.5) {f['train_tpauc_0.5_0.5']:.4f} -> {cfg.out}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    model = ScoreModel.load(cfg.values["model_path"])
    train, val = load_data(cfg)
    if model.input_dim != train.d:
        raise ConfigError(f"model expects {model.input_dim} features, data has {train.d}")
    metrics = pauc_metrics(model, train, "train")
    if val is not None:
        metrics.update(pauc_metrics(model, val, "val"))
    ss = model_scoreset(model, train)
    metrics["train_opauc_0.3_unnormalized"] = opauc_exact(ss, 0.0, 0.3, normalized=False)
    metrics["train_tpauc_0.5_0.5_unnormalized"] = tpauc_exact(ss, 0.5, 0.5, normalized=False)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out / "summary.json", {"schema_version": SCHEMA_VERSION, "command": "eval",
                                           "metrics": metrics, "config": cfg.flat()})
    for k, x in metrics.items():
        print(f"{k} {x:.6f}")
    return 0


def cmd_re_curve(cfg: RunConfig) -> int:
    v = cfg.values
    train, _ = load_data(cfg)
    rows, skipped = acceptance.re_curve(train, betas=v["betas"], lambdas=v["lambdas"], draws=v["draws"],
                                        seed=v["seed"], arch=v["arch"],
                                        hidden=v["hidden"] if v["arch"] == "mlp_sigmoid" else 0, loss=_loss(cfg))
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_csv(cfg.out / "re_curve.csv", rows, ["beta", "lambda", "draws", "mean_re", "std_re"])
    _write_json(cfg.out / "summary.json", {"schema_version": SCHEMA_VERSION, "command": "re-curve",
                                           "skipped_draws": skipped, "rows": rows, "config": cfg.flat()})
    for r in rows:
        print(f"beta={r['beta']} lambda={r['lambda']} RE {r['mean_re']:.4f} +/- {r['std_re']:.4f}")
    if skipped:
        print(f"skipped {skipped} draws with zero CVaR objective")
    return 0


def _sweep_job(args):
    cfg, point, index, out = args
    values = dict(cfg.values)
    hyper_kw = {}
    for k, x in point.items():
        if k in _HYPER_TYPES:
            hyper_kw[k] = x
        else:
            values[k] = x
    values["seed"] = cfg.values["seed"] + index if "seed" not in point else values["seed"]
    if cfg.values["data_seed"] < 0:
        values["data_seed"] = cfg.values["seed"]
    run = RunConfig("train", values, cfg.hyper.replace(**hyper_kw), {}, out)
    try:
        summary = train_once(run, out)
    except NumericalFailure as exc:
        return {"index": index, "point": point, "status": "numerical_failure", "error": str(exc)}
    return {"index": index, "point": point, "status": "ok", "seed": values["seed"], "final": summary["final"]}


def cmd_sweep(cfg: RunConfig) -> int:
    points = _grid_points(cfg.grid)
    if cfg.values["val_frac"] <= 0 and cfg.values["target"].startswith("val_"):
        raise ConfigError(f"target {cfg.values['target']!r} needs val_frac > 0")
    jobs = [(cfg, p, i, cfg.out / f"run_{i:03d}") for i, p in enumerate(points)]
    if cfg.values["workers"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.values["workers"]) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    target = cfg.values["target"]
    for r in results:
        if r["status"] == "ok" and target not in r["final"]:
            raise ConfigError(f"unknown target metric {target!r}")
    ok = [r for r in results if r["status"] == "ok"]
    ok.sort(key=lambda r: (-r["final"][target], r["index"]))
    ranking = [{"rank": i + 1, "run": f"run_{r['index']:03d}", target: r["final"][target], **r["point"]}
               for i, r in enumerate(ok)]
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_csv(cfg.out / "sweep.csv", ranking, ["rank", "run", target] + sorted(cfg.grid))
    _write_json(cfg.out / "summary.json", {"schema_version": SCHEMA_VERSION, "command": "sweep",
                                           "target": target, "ranking": ranking,
                                           "failed": [r for r in results if r["status"] != "ok"],
                                           "config": cfg.flat()})
    for row in ranking:
        print(f"{row['rank']:>3} {row['run']} {target}={row[target]:.4f} " +
              " ".join(f"{k}={row[k]}" for k in sorted(cfg.grid)))
    return 0 if ok else 2


def cmd_selftest(cfg: RunConfig) -> int:
    results = acceptance.run_checks(cfg.values["items"], seed=cfg.values["seed"])
    for r in results:
        print(acceptance.format_result(r))
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


HANDLERS = {"train": cmd_train, "eval": cmd_eval, "re-curve": cmd_re_curve, "sweep": cmd_sweep,
            "selftest": cmd_selftest}


def make_parser():
    p = argparse.ArgumentParser(prog="pauc-dro", description="DRO-based partial AUC maximization")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = {}
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            raw.update(parse_kv_lines(text.splitlines(), args.config))
        raw.update(parse_kv_lines(args.overrides, "--set"))
        if args.seed is not None:
            raw["seed"] = str(args.seed)
        cfg = build_config(args.command, raw, args.out)
        return HANDLERS[args.command](cfg)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.dump:
            print(json.dumps(exc.dump, default=float)[:2000], file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
