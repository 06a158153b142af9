# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""``omslab`` command line.

Every option resolves as: command-line flag, then ``--from-manifest`` or
``--config`` values, then the built-in default. Each command that writes an
artifact also writes ``<artifact>.manifest.json`` holding the fully resolved
settings, so ``omslab --from-manifest <file>`` replays the run.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Final, List, Mapping, Sequence, Tuple

from tabulate import tabulate

from . import __version__
from .batch import Batch
from .config import configure, load_config_file, merge_settings, resolve_seed
from .diffusion import (
    DenoiserModel,
    OmsModule,
    ToyDatasetSpec,
    TrainConfig,
    default_toy_spec,
    generate_dataset,
    load_model,
    save_model,
    train_denoiser,
    train_oms,
)
from .error import ArtifactIOError, ConfigValidationError, OmsError, UsageError
from .geometry import radius_table, radius_table_csv, synthetic_data
from .io import atomic_write_text, file_digest, read_batch_csv, read_json, write_batch_csv, write_json
from .kinds import ModelKind, ScheduleKind
from .metrics import bias_report, mean_histogram, sample_means
from .nn import DenseNet
from .sampler import SAME_CONDITION, SamplerConfig, sample_pipeline, sampler_manifest
from .schedule import Schedule, build_schedule, schedule_summary


log = logging.getLogger(__name__)

MANIFEST_SUFFIX: Final[str] = ".manifest.json"
CLASS_NAMES: Final[Dict[str, int]] = {"null": 0, **default_toy_spec(dim=1, n_per_class=1).class_names()}
_SCHEDULE_KINDS: Final[Tuple[str, ...]] = tuple(kind.value for kind in ScheduleKind)


@dataclass(frozen=True)
class Command:
    name: str
    help: str
    defaults: Mapping[str, Any]
    add_arguments: Callable[[argparse.ArgumentParser], None]
    run: Callable[[Dict[str, Any]], int]


def _manifest_path(artifact: str | Path) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + MANIFEST_SUFFIX)


def _write_manifest(
    command: str,
    settings: Mapping[str, Any],
    outputs: Sequence[str | Path],
    inputs: Sequence[str | Path] = (),
    extra: Mapping[str, Any] | None = None,
) -> Path:
    payload: Dict[str, Any] = {
        "command": command,
        "settings": dict(settings),
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {str(p): file_digest(p) for p in outputs},
        "omslab_version": __version__,
    }
    if extra:
        payload.update(extra)
    return write_json(_manifest_path(outputs[0]), payload)


def _int_list(value: Any, what: str) -> Tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        items = value
    else:
        items = [part for part in str(value).split(",") if part.strip()]
    try:
        return tuple(int(item) for item in items)
    except ValueError as exc:
        raise UsageError(f"{what} must be a comma-separated list of integers, got {value!r}") from exc


def _class_id(value: Any, what: str) -> int:
    if isinstance(value, int):
        return value
    text = str(value).strip().lower()
    if text in CLASS_NAMES:
        return CLASS_NAMES[text]
    try:
        return int(text)
    except ValueError as exc:
        names = ", ".join(sorted(CLASS_NAMES))
        raise UsageError(f"{what} must be a class id or one of {names}, got {value!r}") from exc


def _require(settings: Mapping[str, Any], *keys: str) -> None:
    missing = [key for key in keys if settings.get(key) in (None, "")]
    if missing:
        flags = ", ".join("--" + key.replace("_", "-") for key in missing)
        raise UsageError(f"missing required option(s): {flags}")


def _schedule_from(settings: Mapping[str, Any]) -> Schedule:
    kind = str(settings["schedule"])
    if kind not in _SCHEDULE_KINDS:
        raise UsageError(f"unknown schedule kind {kind!r}; choose from {', '.join(_SCHEDULE_KINDS)}")
    params = {key: float(settings[key]) for key in ("beta_start", "beta_end", "s", "beta_clip") if settings.get(key) is not None}
    return build_schedule(kind, int(settings["T"]), rescale=bool(settings.get("rescale")), **params)


def _add_schedule_options(parser: argparse.ArgumentParser, *, positional: bool = False) -> None:
    if positional:
        parser.add_argument("schedule", nargs="?", choices=_SCHEDULE_KINDS, help="schedule kind")
    else:
        parser.add_argument("--schedule", choices=_SCHEDULE_KINDS, help="schedule kind")
    parser.add_argument("--T", type=int, dest="T", help="number of diffusion steps")
    parser.add_argument("--rescale", action="store_true", default=None, help="rescale to zero terminal SNR")
    parser.add_argument("--beta-start", type=float, help="linear schedule start beta")
    parser.add_argument("--beta-end", type=float, help="linear schedule end beta")
    parser.add_argument("--s", type=float, help="cosine schedule offset")
    parser.add_argument("--beta-clip", type=float, help="cosine schedule beta clip")


_SCHEDULE_DEFAULTS: Final[Dict[str, Any]] = {
    "schedule": "ldm",
    "T": 1000,
    "rescale": False,
    "beta_start": None,
    "beta_end": None,
    "s": None,
    "beta_clip": None,
}


# schedule

def _schedule_args(parser: argparse.ArgumentParser) -> None:
    _add_schedule_options(parser, positional=True)
    parser.add_argument("--json", help="also write the schedule JSON to this path")


def cmd_schedule(settings: Dict[str, Any]) -> int:
    sched = _schedule_from(settings)
    summary = schedule_summary(sched)
    rows = [
        ["schedule", sched.tag],
        ["T", summary["T"]],
        ["SNR(T)", f"{summary['snr_T']:.6g}"],
        ["sqrt(alpha_bar_T)", f"{summary['sqrt_alpha_bar_T']:.6f}"],
        ["sqrt(1 - alpha_bar_T)", f"{summary['sqrt_one_minus_alpha_bar_T']:.6f}"],
        ["KL_T (per dim, x0 = 1)", f"{summary['terminal_kl_unit']:.6g}"],
    ]
    print(tabulate(rows, tablefmt="simple"))
    if settings.get("json"):
        write_json(settings["json"], sched.to_dict())
        _write_manifest("schedule", settings, [settings["json"]])
    return 0


# radius

def _radius_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--schedules", help="comma-separated schedule kinds, e.g. cosine,linear,ldm")
    parser.add_argument("--T", type=int, dest="T", help="number of diffusion steps")
    parser.add_argument("--dim", type=int, help="data dimension for synthetic data")
    parser.add_argument("--n", type=int, help="number of noise samples")
    parser.add_argument("--data", help="batch CSV to draw x0 from")
    parser.add_argument("--synthetic", choices=["zero-mean"], help="use zero-mean random-sign synthetic data")
    parser.add_argument("--second-moment", type=float, help="per-dimension second moment of synthetic data")
    parser.add_argument("--synthetic-rows", type=int, help="rows of synthetic data")
    parser.add_argument("--out", help="CSV output path (stdout when omitted)")


def cmd_radius(settings: Dict[str, Any]) -> int:
    kinds = [part.strip() for part in str(settings["schedules"]).split(",") if part.strip()]
    unknown = [kind for kind in kinds if kind not in _SCHEDULE_KINDS]
    if not kinds or unknown:
        raise UsageError(f"--schedules must list kinds from {', '.join(_SCHEDULE_KINDS)}, got {settings['schedules']!r}")
    if settings.get("data") and settings.get("synthetic"):
        raise UsageError("choose either --data or --synthetic, not both")
    inputs: List[str] = []
    if settings.get("data"):
        data = read_batch_csv(settings["data"])
        inputs.append(settings["data"])
    elif settings.get("synthetic"):
        data = synthetic_data(
            int(settings["dim"]),
            float(settings["second_moment"]),
            int(settings["synthetic_rows"]),
            seed=int(settings["seed"]),
        )
    else:
        raise UsageError("radius needs --data PATH or --synthetic zero-mean")

    schedules = [build_schedule(kind, int(settings["T"])) for kind in kinds]
    reports = radius_table(
        schedules,
        data,
        n=int(settings["n"]),
        seed=int(settings["seed"]),
        data_dependent=bool(inputs),
    )
    text = radius_table_csv(reports)
    if settings.get("out"):
        atomic_write_text(settings["out"], text)
        _write_manifest(
            "radius", settings, [settings["out"]], inputs,
            extra={"data_dependent_rows": [r.schedule_name for r in reports if r.data_dependent]},
        )
    else:
        sys.stdout.write(text)
    return 0


# gen-data

def _gen_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dim", type=int, help="data dimension")
    parser.add_argument("--n-per-class", type=int, help="points per class")
    parser.add_argument("--level", type=float, help="absolute class mean of the dark and light classes")
    parser.add_argument("--scale", type=float, help="per-coordinate noise scale")
    parser.add_argument("--offset-scale", type=float, help="scale of the shared per-sample brightness offset")
    parser.add_argument("--spec", help="JSON dataset spec replacing the default three-class set")
    parser.add_argument("--out", help="batch CSV output path")


def cmd_gen_data(settings: Dict[str, Any]) -> int:
    _require(settings, "out")
    inputs: List[str] = []
    if settings.get("spec"):
        payload = dict(read_json(settings["spec"]))
        payload["seed"] = int(settings["seed"])
        spec = ToyDatasetSpec.from_dict(payload)
        inputs.append(settings["spec"])
    else:
        spec = default_toy_spec(
            int(settings["dim"]),
            n_per_class=int(settings["n_per_class"]),
            seed=int(settings["seed"]),
            level=float(settings["level"]),
            scale=float(settings["scale"]),
            offset_scale=float(settings["offset_scale"]),
        )
    batch = generate_dataset(spec)
    write_batch_csv(settings["out"], batch)
    _write_manifest("gen-data", settings, [settings["out"]], inputs, extra={"dataset": spec.to_dict()})
    log.info("wrote %d points of dimension %d to %s", len(batch), batch.dim, settings["out"])
    return 0


# train-denoiser / train-oms

def _add_net_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="training batch CSV")
    parser.add_argument("--out", help="checkpoint output path")
    parser.add_argument("--batch-size", type=int, help="minibatch size")
    parser.add_argument("--lr", type=float, help="peak AdamW learning rate")
    parser.add_argument("--final-lr-fraction", type=float, help="cosine-decay end point as a fraction of --lr")
    parser.add_argument("--weight-decay", type=float, help="AdamW decoupled weight decay")
    parser.add_argument("--iterations", type=int, help="optimizer steps")
    parser.add_argument("--cond-dropout", type=float, help="probability of replacing the class by the null class")
    parser.add_argument("--hidden", help="comma-separated hidden widths")
    parser.add_argument("--activation", choices=["silu", "relu"], help="hidden activation")
    parser.add_argument("--time-embed-dim", type=int, help="sinusoidal time embedding width")
    parser.add_argument("--class-embed-dim", type=int, help="class embedding width")
    parser.add_argument("--log-every", type=int, help="log the running loss every N iterations")


_NET_DEFAULTS: Final[Dict[str, Any]] = {
    "data": None,
    "out": None,
    "batch_size": 256,
    "lr": 1e-3,
    "final_lr_fraction": 0.1,
    "weight_decay": 0.01,
    "cond_dropout": 0.1,
    "hidden": "256,256",
    "activation": "silu",
    "time_embed_dim": 32,
    "class_embed_dim": 16,
    "log_every": 500,
}


def _build_net(settings: Mapping[str, Any], data: Batch, seed: int) -> DenseNet:
    return DenseNet.initialize(
        data.dim,
        hidden=_int_list(settings["hidden"], "--hidden"),
        activation=str(settings["activation"]),
        time_embed_dim=int(settings["time_embed_dim"]),
        class_count=int(data.class_ids.max()) + 1,
        class_embed_dim=int(settings["class_embed_dim"]),
        seed=seed,
    )


def _train_config(settings: Mapping[str, Any], schedule: Schedule, **overrides: Any) -> TrainConfig:
    offset = settings.get("offset_noise")
    return TrainConfig(
        schedule=schedule,
        batch_size=int(settings["batch_size"]),
        learning_rate=float(settings["lr"]),
        iterations=int(settings["iterations"]),
        cond_dropout_p=float(settings["cond_dropout"]),
        offset_noise=None if offset is None else float(offset),
        offset_groups=int(settings.get("offset_groups") or 1),
        weight_decay=float(settings["weight_decay"]),
        final_lr_fraction=float(settings["final_lr_fraction"]),
        seed=int(settings["seed"]),
        log_every=int(settings["log_every"]),
        **overrides,
    )


def _train_denoiser_args(parser: argparse.ArgumentParser) -> None:
    _add_net_options(parser)
    _add_schedule_options(parser)
    parser.add_argument("--pred-type", choices=["epsilon", "v", "x0"], help="network prediction target")
    parser.add_argument("--offset-noise", type=float, help="enable offset noise with this strength (e.g. 0.1)")
    parser.add_argument("--offset-groups", type=int, help="number of offset-noise groups (must divide dim)")


def cmd_train_denoiser(settings: Dict[str, Any]) -> int:
    _require(settings, "data", "out")
    data = read_batch_csv(settings["data"])
    schedule = _schedule_from(settings)
    config = _train_config(settings, schedule, pred_type=str(settings["pred_type"]))
    config.validate(ModelKind.DENOISER)
    model = train_denoiser(data, _build_net(settings, data, int(settings["seed"])), config)
    save_model(settings["out"], model)
    _write_manifest(
        "train-denoiser", settings, [settings["out"]], [settings["data"]],
        extra={"final_loss": model.loss_history[-1]},
    )
    return 0


def _train_oms_args(parser: argparse.ArgumentParser) -> None:
    _add_net_options(parser)
    _add_schedule_options(parser)
    parser.add_argument("--denoiser", help="take the schedule from this denoiser checkpoint")
    parser.add_argument("--target", choices=["v", "x0"], help="OMS regression target")


def cmd_train_oms(settings: Dict[str, Any]) -> int:
    _require(settings, "data", "out")
    data = read_batch_csv(settings["data"])
    inputs = [settings["data"]]
    if settings.get("denoiser"):
        schedule = load_model(settings["denoiser"], ModelKind.DENOISER).schedule
        inputs.append(settings["denoiser"])
    else:
        schedule = _schedule_from(settings)
    config = _train_config(settings, schedule, oms_target=str(settings["target"]))
    model = train_oms(data, _build_net(settings, data, int(settings["seed"])), config)
    save_model(settings["out"], model)
    _write_manifest(
        "train-oms", settings, [settings["out"]], inputs,
        extra={"final_loss": model.loss_history[-1]},
    )
    return 0


# sample

def _sample_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--denoiser", help="denoiser checkpoint")
    parser.add_argument("--oms", help="OMS checkpoint")
    parser.add_argument("--no-oms", action="store_true", default=None, help="start from pure noise (baseline)")
    parser.add_argument("--n", type=int, help="samples per class")
    parser.add_argument("--steps", type=int, help="DDIM steps")
    parser.add_argument("--eta", type=float, help="DDIM stochasticity")
    parser.add_argument("--omega-theta", type=float, help="denoiser CFG weight")
    parser.add_argument("--omega-psi", type=float, help="OMS CFG weight")
    parser.add_argument("--oms-sigma", type=float, help="noise level of the OMS step")
    parser.add_argument("--base-condition", help="class id or name, or 'all'")
    parser.add_argument("--oms-condition", help="class id or name, or 'same'")
    parser.add_argument("--negative-condition", help="class id or name of the negative condition")
    parser.add_argument("--method", choices=["ddim", "ddpm"], help="reverse sampler")
    parser.add_argument("--out", help="batch CSV output path")


def _sample_classes(settings: Mapping[str, Any], denoiser: DenoiserModel) -> List[int]:
    base = str(settings["base_condition"]).strip().lower()
    if base == "all":
        return list(range(1, denoiser.class_count))
    return [_class_id(base, "--base-condition")]


def cmd_sample(settings: Dict[str, Any]) -> int:
    _require(settings, "denoiser", "out")
    use_oms = not settings.get("no_oms")
    if use_oms:
        _require(settings, "oms")
    denoiser = load_model(settings["denoiser"], ModelKind.DENOISER)
    inputs = [settings["denoiser"]]
    oms: OmsModule | None = None
    if use_oms:
        oms = load_model(settings["oms"], ModelKind.OMS)
        inputs.append(settings["oms"])
    oms_condition = str(settings["oms_condition"]).strip().lower()
    if oms_condition != SAME_CONDITION:
        oms_condition = _class_id(oms_condition, "--oms-condition")

    batches: List[Batch] = []
    runs: List[Dict[str, Any]] = []
    for class_id in _sample_classes(settings, denoiser):
        config = SamplerConfig(
            steps=int(settings["steps"]),
            eta=float(settings["eta"]),
            omega_theta=float(settings["omega_theta"]),
            omega_psi=float(settings["omega_psi"]),
            oms_sigma=float(settings["oms_sigma"]),
            base_condition=class_id,
            oms_condition=oms_condition,
            negative_condition=_class_id(settings["negative_condition"], "--negative-condition"),
            seed=int(settings["seed"]),
            method=str(settings["method"]),
        )
        batches.append(sample_pipeline(denoiser, oms, int(settings["n"]), config))
        runs.append(sampler_manifest(config, denoiser, oms, int(settings["n"])))
    write_batch_csv(settings["out"], Batch.concat(batches))
    _write_manifest("sample", settings, [settings["out"]], inputs, extra={"runs": runs})
    return 0


# report

def _report_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--generated", help="generated batch CSV")
    parser.add_argument("--baseline", help="optional second generated batch CSV (e.g. without OMS)")
    parser.add_argument("--data", help="reference data batch CSV")
    parser.add_argument("--out", help="report JSON output path")
    parser.add_argument("--histogram", help="histogram CSV output path for --generated")
    parser.add_argument("--bins", type=int, help="histogram bins")
    parser.add_argument("--range", help="histogram range lo,hi")


def _parse_range(value: Any) -> Tuple[float, float]:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return float(value[0]), float(value[1])
    parts = str(value).split(",")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"--range must be 'lo,hi', got {value!r}") from exc
    return lo, hi


def bias_table(report: Dict[str, Any], baseline: Dict[str, Any] | None = None) -> str:
    headers = ["class", "data mean", "generated mean", "abs error", "W1(means)"]
    base_rows = {}
    if baseline is not None:
        headers = ["class", "data mean", "baseline mean", "baseline error", "baseline W1", "generated mean",
                   "abs error", "W1(means)"]
        base_rows = {entry["class_id"]: entry for entry in baseline["per_class"]}
    rows = []
    names = {v: k for k, v in CLASS_NAMES.items()}
    for entry in report["per_class"]:
        label = names.get(entry["class_id"], str(entry["class_id"]))
        row: List[Any] = [label, entry["data_mean"]]
        if baseline is not None:
            other = base_rows.get(entry["class_id"])
            row += [other["generated_mean"], other["abs_error"], other["wasserstein_means"]] if other else ["", "", ""]
        row += [entry["generated_mean"], entry["abs_error"], entry["wasserstein_means"]]
        rows.append(row)
    return tabulate(rows, headers=headers, floatfmt=".4f")


def cmd_report(settings: Dict[str, Any]) -> int:
    _require(settings, "generated", "data", "out")
    data = read_batch_csv(settings["data"])
    generated = read_batch_csv(settings["generated"])
    inputs = [settings["generated"], settings["data"]]
    report = bias_report(generated, data, file_digest(settings["generated"]), seed=int(settings["seed"])).to_dict()
    baseline = None
    if settings.get("baseline"):
        other = read_batch_csv(settings["baseline"])
        baseline = bias_report(other, data, file_digest(settings["baseline"]), seed=int(settings["seed"])).to_dict()
        report["baseline"] = baseline
        inputs.append(settings["baseline"])
    write_json(settings["out"], report)
    outputs = [settings["out"]]
    if settings.get("histogram"):
        hist = mean_histogram(sample_means(generated), int(settings["bins"]), _parse_range(settings["range"]))
        atomic_write_text(settings["histogram"], hist.to_csv())
        outputs.append(settings["histogram"])
    _write_manifest("report", settings, outputs, inputs)
    print(bias_table(report, baseline))
    return 0


# demo

def _demo_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--workdir", help="directory receiving every artifact")
    parser.add_argument("--dim", type=int, help="data dimension")
    parser.add_argument("--n-per-class", type=int, help="training points per class")
    parser.add_argument("--denoiser-iterations", type=int, help="denoiser optimizer steps")
    parser.add_argument("--oms-iterations", type=int, help="OMS optimizer steps")
    parser.add_argument("--n", type=int, help="generated samples per class")
    parser.add_argument("--steps", type=int, help="DDIM steps")


def cmd_demo(settings: Dict[str, Any]) -> int:
    """Run gen-data → train-denoiser → train-oms → sample (with and without OMS) → report."""

    workdir = Path(str(settings["workdir"]))
    workdir.mkdir(parents=True, exist_ok=True)
    seed = int(settings["seed"])
    paths = {name: str(workdir / name) for name in (
        "data.csv", "denoiser.json", "oms.json", "samples_oms.csv", "samples_no_oms.csv", "report.json",
        "histogram_oms.csv",
    )}

    def run(name: str, **values: Any) -> None:
        command = COMMANDS[name]
        resolved = merge_settings({**command.defaults, "seed": seed}, None, values)
        log.info("demo: %s", name)
        command.run(resolved)

    run("gen-data", dim=settings["dim"], n_per_class=settings["n_per_class"], out=paths["data.csv"])
    run("train-denoiser", data=paths["data.csv"], out=paths["denoiser.json"],
        iterations=settings["denoiser_iterations"])
    run("train-oms", data=paths["data.csv"], out=paths["oms.json"], denoiser=paths["denoiser.json"],
        iterations=settings["oms_iterations"])
    for key, no_oms in (("samples_oms.csv", False), ("samples_no_oms.csv", True)):
        run("sample", denoiser=paths["denoiser.json"], oms=paths["oms.json"], no_oms=no_oms,
            n=settings["n"], steps=settings["steps"], out=paths[key])
    run("report", generated=paths["samples_oms.csv"], baseline=paths["samples_no_oms.csv"],
        data=paths["data.csv"], out=paths["report.json"], histogram=paths["histogram_oms.csv"])
    return 0


COMMANDS: Final[Dict[str, Command]] = {
    command.name: command
    for command in (
        Command("schedule", "inspect a noise schedule", {**_SCHEDULE_DEFAULTS, "json": None}, _schedule_args,
                cmd_schedule),
        Command(
            "radius",
            "estimate train/sample terminal radii (CSV)",
            {
                "schedules": "cosine,linear,ldm",
                "T": 1000,
                "dim": 16384,
                "n": 20000,
                "data": None,
                "synthetic": None,
                "second_moment": 1.0,
                "synthetic_rows": 64,
                "out": None,
            },
            _radius_args,
            cmd_radius,
        ),
        Command(
            "gen-data",
            "generate the toy conditional dataset",
            {"dim": 64, "n_per_class": 4096, "level": 0.7, "scale": 0.2, "offset_scale": 0.8, "spec": None,
             "out": None},
            _gen_data_args,
            cmd_gen_data,
        ),
        Command(
            "train-denoiser",
            "train the base denoiser",
            {**_NET_DEFAULTS, **_SCHEDULE_DEFAULTS, "pred_type": "v", "iterations": 4000, "offset_noise": None,
             "offset_groups": 1},
            _train_denoiser_args,
            cmd_train_denoiser,
        ),
        Command(
            "train-oms",
            "train the OMS module",
            {**_NET_DEFAULTS, **_SCHEDULE_DEFAULTS, "denoiser": None, "target": "v", "iterations": 2000},
            _train_oms_args,
            cmd_train_oms,
        ),
        Command(
            "sample",
            "generate samples with or without OMS",
            {
                "denoiser": None,
                "oms": None,
                "no_oms": False,
                "n": 512,
                "steps": 50,
                "eta": 0.0,
                "omega_theta": 1.0,
                "omega_psi": 1.0,
                "oms_sigma": 0.0,
                "base_condition": "all",
                "oms_condition": SAME_CONDITION,
                "negative_condition": 0,
                "method": "ddim",
                "out": None,
            },
            _sample_args,
            cmd_sample,
        ),
        Command(
            "report",
            "compare generated samples with the data",
            {"generated": None, "baseline": None, "data": None, "out": None, "histogram": None, "bins": 60,
             "range": "-1,1"},
            _report_args,
            cmd_report,
        ),
        Command(
            "demo",
            "run the full recipe and print the before/after bias table",
            {"workdir": "omslab-demo", "dim": 64, "n_per_class": 4096, "denoiser_iterations": 4000,
             "oms_iterations": 2000, "n": 512, "steps": 50},
            _demo_args,
            cmd_demo,
        ),
    )
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omslab",
        description="Noise-schedule diagnostics and the One-More-Step correction on toy data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--workers", type=int, default=1, help="worker threads for sampling and Monte-Carlo loops")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--config", help="JSON file of option values (flags take precedence)")
    parser.add_argument("--from-manifest", help="replay the run recorded in this manifest")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    for command in COMMANDS.values():
        sub = subparsers.add_parser(command.name, help=command.help, description=command.help)
        command.add_arguments(sub)
        sub.add_argument("--seed", help="run seed (falls back to $OMS_LAB_SEED, then 0)")
    return parser


def resolve_settings(args: argparse.Namespace) -> Tuple[Command, Dict[str, Any]]:
    """Merge defaults, manifest/config values and explicit flags for the selected command."""

    layered: Dict[str, Any] = {}
    name = args.command
    if args.from_manifest:
        manifest = read_json(args.from_manifest)
        if not isinstance(manifest, dict) or "command" not in manifest:
            raise ArtifactIOError(args.from_manifest, "not an omslab manifest")
        if name is not None and name != manifest["command"]:
            raise UsageError(f"manifest records command {manifest['command']!r}, not {name!r}")
        name = manifest["command"]
        layered.update(manifest.get("settings") or {})
    if args.config:
        layered.update(load_config_file(args.config))
    if name is None:
        raise UsageError("a command is required (see --help)")
    command = COMMANDS[name]
    flags = {key: value for key, value in vars(args).items() if key in command.defaults or key == "seed"}
    unknown = sorted(set(layered) - set(command.defaults) - {"seed"})
    if unknown:
        raise UsageError(f"unknown settings for {name}: {', '.join(unknown)}")
    settings = merge_settings({**command.defaults, "seed": None}, layered, flags)
    try:
        settings["seed"] = resolve_seed(settings["seed"])
    except ConfigValidationError as exc:
        raise UsageError(str(exc)) from exc
    return command, settings


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    try:
        configure(workers=args.workers)
        command, settings = resolve_settings(args)
        return command.run(settings)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"omslab: error: {exc}", file=sys.stderr)
        return 2
    except (OmsError, OSError) as exc:
        print(f"omslab: error: {exc}", file=sys.stderr)
        return 1


__all__ = ["COMMANDS", "build_parser", "resolve_settings", "bias_table", "main"]
