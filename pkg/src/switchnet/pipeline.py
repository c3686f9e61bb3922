"""Config-driven experiment pipeline: generate, partition, train, evaluate, analyze.

All artifacts except the timing report are byte-deterministic functions of the
config document, so whole-bundle determinism can be checked by file comparison.
"""

import hashlib
import json
from dataclasses import dataclass
from importlib.resources import files as _resource_files
from pathlib import Path

from ._version import ARTIFACT_VERSION
from .analysis import attribute, export_heatmap_csv, heatmap, render_heatmap_svg, save_attribution
from .data import (GroupSpec, PartitionPlan, generate_synthetic, load_dataset, make_test_sets,
                   partition, save_dataset)
from .errors import ConfigError, StageError, SwitchNetError
from .federated import collect, make_nodes, run_local_training, with_trained_units
from .jsonio import write_json
from .network import evaluate, fit_readout, neuron_contribution, save_network
from .neuron import ACTIVATIONS, TrainConfig, init_unit, save_unit
from .switching import build_switch

AGGREGATIONS = ("router-mean", "linear-readout")
_SECTIONS = ("seed", "data", "partition", "switch", "train", "network", "output")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    specs: "tuple[GroupSpec, ...] | None"
    dataset_path: "Path | None"
    plan: PartitionPlan
    switch_entries: dict
    switch_fallback: str
    train: TrainConfig
    activation: str
    aggregation: str
    holdout_fraction: float
    heatmap_statistic: str
    workers: "int | None"
    output_dir: Path

    @property
    def n_units(self) -> int:
        return len(self.plan.assignments)


@dataclass(frozen=True)
class ReportBundle:
    out_dir: Path
    config_json: Path
    dataset_csv: Path
    partition_json: Path
    test_sets_json: Path
    unit_jsons: tuple
    network_json: Path
    metrics_overlapping_json: Path
    metrics_non_overlapping_json: Path
    heatmap_csv: Path
    heatmap_svg: Path
    attribution_json: Path
    contribution_json: Path
    fed_report_json: Path
    fed_timings_json: Path
    manifest_json: Path

    def all_paths(self) -> tuple:
        fixed = (self.config_json, self.dataset_csv, self.partition_json, self.test_sets_json,
                 self.network_json, self.metrics_overlapping_json, self.metrics_non_overlapping_json,
                 self.heatmap_csv, self.heatmap_svg, self.attribution_json, self.contribution_json,
                 self.fed_report_json, self.fed_timings_json, self.manifest_json)
        return tuple(self.unit_jsons) + fixed

    def deterministic_paths(self) -> tuple:
        """Every artifact that must be byte-identical across reruns (timings excluded)."""
        return tuple(p for p in self.all_paths() if p != self.fed_timings_json)


def default_config_path() -> Path:
    """Path of the packaged default experiment config."""
    return Path(str(_resource_files("switchnet") / "configs" / "default.json"))


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing {where}.{key}")
    return section[key]


def parse_config(doc: dict, base_dir: "Path | None" = None) -> ExperimentConfig:
    """Validate a config document; raises ConfigError before anything runs."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for name in _SECTIONS:
        if name == "seed":
            continue
        if name not in doc or not isinstance(doc[name], dict):
            raise ConfigError(f"missing or invalid config section {name!r}")
    if not isinstance(doc.get("seed"), int) or isinstance(doc.get("seed"), bool):
        raise ConfigError("seed must be an integer")
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    data_sec = doc["data"]
    specs = None
    dataset_path = None
    if ("groups" in data_sec) == ("dataset" in data_sec):
        raise ConfigError("data section needs exactly one of 'groups' or 'dataset'")
    if "groups" in data_sec:
        try:
            specs = tuple(GroupSpec.from_json(g) for g in data_sec["groups"])
        except (SwitchNetError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad data.groups: {exc}") from exc
        if not specs:
            raise ConfigError("data.groups must be non-empty")
    else:
        dataset_path = base / str(data_sec["dataset"])
    holdout = data_sec.get("holdout_fraction", 0.2)
    if not isinstance(holdout, (int, float)) or not 0.0 < holdout < 1.0:
        raise ConfigError(f"data.holdout_fraction must be in (0, 1), got {holdout}")

    part_sec = doc["partition"]
    try:
        plan = PartitionPlan.from_counts(_need(part_sec, "counts", "partition"),
                                         selection=part_sec.get("selection", "stratified"),
                                         explicit_ids=part_sec.get("explicit_ids"))
    except SwitchNetError as exc:
        raise ConfigError(f"bad partition plan: {exc}") from exc
    n_units = len(plan.assignments)

    switch_sec = doc["switch"]
    declared = switch_sec.get("n_units", n_units)
    if declared != n_units:
        raise ConfigError(f"switch.n_units is {declared} but the partition plan has {n_units} units")
    entries_raw = _need(switch_sec, "entries", "switch")
    fallback = switch_sec.get("fallback", "error")
    try:
        entries = {int(g): frozenset(int(u) for u in units) for g, units in entries_raw.items()}
        build_switch(n_units, entries, fallback)
    except (SwitchNetError, AttributeError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad switch section: {exc}") from exc

    train_sec = doc["train"]
    try:
        train = TrainConfig(learning_rate=train_sec.get("learning_rate", 0.1),
                            epochs=train_sec.get("epochs", 50),
                            loss=train_sec.get("loss", "bce"),
                            seed=doc["seed"],
                            shuffle=train_sec.get("shuffle", True))
    except SwitchNetError as exc:
        raise ConfigError(f"bad train section: {exc}") from exc

    net_sec = doc["network"]
    activation = net_sec.get("activation", "sigmoid")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"network.activation must be one of {ACTIVATIONS}, got {activation!r}")
    aggregation = net_sec.get("aggregation", "router-mean")
    if aggregation not in AGGREGATIONS:
        raise ConfigError(f"network.aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
    statistic = net_sec.get("heatmap_statistic", "mean")
    if statistic not in ("mean", "max"):
        raise ConfigError(f"network.heatmap_statistic must be 'mean' or 'max', got {statistic!r}")
    workers = net_sec.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError(f"network.workers must be a positive integer or null, got {workers!r}")

    if specs is not None and plan.selection == "stratified":
        for unit, count in plan.assignments:
            if unit >= len(specs):
                raise ConfigError(f"stratified plan unit {unit} has no matching group (only {len(specs)} groups)")
            if specs[unit].count < count:
                raise ConfigError(
                    f"stratified plan unit {unit} needs {count} observations, group generates {specs[unit].count}")

    out_sec = doc["output"]
    out_dir = Path(str(_need(out_sec, "dir", "output")))

    return ExperimentConfig(seed=doc["seed"], specs=specs, dataset_path=dataset_path, plan=plan,
                            switch_entries=entries, switch_fallback=fallback, train=train,
                            activation=activation, aggregation=aggregation,
                            holdout_fraction=float(holdout), heatmap_statistic=statistic,
                            workers=workers, output_dir=out_dir)


def load_config(path, overrides=()) -> ExperimentConfig:
    """Read a config file, apply dotted-key overrides, validate."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    doc = apply_overrides(doc, overrides)
    return parse_config(doc, base_dir=path.parent)


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply `a.b.c=value` overrides (values parsed as JSON, falling back to strings)."""
    doc = json.loads(json.dumps(doc))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = doc
        parts = key.split(".")
        try:
            for i, part in enumerate(parts[:-1]):
                if isinstance(target, list):
                    target = target[int(part)]
                else:
                    target = target.setdefault(part, {})
                if not isinstance(target, (dict, list)):
                    raise ConfigError(f"override {key!r}: {'.'.join(parts[:i + 1])} is not a section")
            leaf = parts[-1]
            if isinstance(target, list):
                target[int(leaf)] = value
            else:
                target[leaf] = value
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"override {key!r} does not fit the config structure: {exc}") from exc
    return doc


def config_to_doc(config: ExperimentConfig) -> dict:
    """Canonical config document (what the bundle's config.json and hash use)."""
    data_sec = {"holdout_fraction": config.holdout_fraction}
    if config.specs is not None:
        data_sec["groups"] = [s.to_json() for s in config.specs]
    else:
        data_sec["dataset"] = str(config.dataset_path)
    part_sec = {"selection": config.plan.selection, "counts": list(config.plan.counts)}
    if config.plan.explicit_ids is not None:
        part_sec["explicit_ids"] = [list(ids) for ids in config.plan.explicit_ids]
    return {
        "seed": config.seed,
        "data": data_sec,
        "partition": part_sec,
        "switch": {"n_units": config.n_units, "fallback": config.switch_fallback,
                   "entries": {str(g): sorted(u) for g, u in sorted(config.switch_entries.items())}},
        "train": {"learning_rate": config.train.learning_rate, "epochs": config.train.epochs,
                  "loss": config.train.loss, "shuffle": config.train.shuffle},
        "network": {"activation": config.activation, "aggregation": config.aggregation,
                    "heatmap_statistic": config.heatmap_statistic,
                    "workers": config.workers},
        "output": {"dir": str(config.output_dir)},
    }


def _config_hash(config: ExperimentConfig) -> str:
    doc = config_to_doc(config)
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _stage(name, fn):
    try:
        return fn()
    except SwitchNetError as exc:
        raise StageError(name, str(exc)) from exc


def run_pipeline(config: ExperimentConfig) -> ReportBundle:
    """Run the full experiment and write the artifact bundle.

    Compute happens first; files are written only after every stage succeeded,
    so a failing run leaves no partial bundle behind.
    """
    seed = config.seed

    def data_stage():
        if config.specs is not None:
            return generate_synthetic(config.specs, seed)
        return load_dataset(config.dataset_path)

    dataset = _stage("data", data_stage)
    parts = _stage("partition", lambda: partition(dataset, config.plan, seed))
    overlapping, non_overlapping = _stage(
        "test-sets", lambda: make_test_sets(dataset, parts, config.holdout_fraction, seed))

    switch, switch_warnings = _stage(
        "switch", lambda: build_switch(config.n_units, config.switch_entries, config.switch_fallback,
                                       expected_groups=[g for g, _ in dataset.groups]))

    def train_stage():
        units = [init_unit(dataset.dim, config.activation, k, seed) for k in range(config.n_units)]
        nodes = make_nodes(parts, dataset, units)
        workers = config.workers if config.workers is not None else config.n_units
        trained, fed_report = run_local_training(nodes, config.train, workers=workers)
        net = collect(with_trained_units(nodes, trained), switch, config.aggregation)
        return fed_report, net

    fed, net = _stage("train", train_stage)

    if config.aggregation == "linear-readout":
        calibration = tuple(sorted(parts.assigned_ids()))
        net = _stage("readout", lambda: fit_readout(net, calibration, dataset, config.train))

    metrics_over = _stage("evaluate", lambda: evaluate(net, overlapping, dataset, "overlapping"))
    metrics_non = _stage("evaluate", lambda: evaluate(net, non_overlapping, dataset, "non-overlapping"))

    def analysis_stage():
        matrix = heatmap(net, non_overlapping, dataset, config.heatmap_statistic)
        return matrix, attribute(matrix), neuron_contribution(net, non_overlapping, dataset)

    matrix, attribution, contribution = _stage("analysis", analysis_stage)

    def write_stage():
        out = config.output_dir
        out.mkdir(parents=True, exist_ok=True)
        bundle = ReportBundle(
            out_dir=out,
            config_json=out / "config.json",
            dataset_csv=out / "dataset.csv",
            partition_json=out / "partition.json",
            test_sets_json=out / "test_sets.json",
            unit_jsons=tuple(out / f"unit_{u.unit_index}.json" for u in net.units),
            network_json=out / "network.json",
            metrics_overlapping_json=out / "metrics_overlapping.json",
            metrics_non_overlapping_json=out / "metrics_non_overlapping.json",
            heatmap_csv=out / "heatmap.csv",
            heatmap_svg=out / "heatmap.svg",
            attribution_json=out / "attribution.json",
            contribution_json=out / "contribution.json",
            fed_report_json=out / "fed_report.json",
            fed_timings_json=out / "fed_timings.json",
            manifest_json=out / "manifest.json",
        )
        write_json(config_to_doc(config), bundle.config_json)
        save_dataset(dataset, bundle.dataset_csv)
        write_json(parts.to_json(), bundle.partition_json)
        write_json({"holdout_fraction": config.holdout_fraction,
                    "overlapping": list(overlapping),
                    "non_overlapping": list(non_overlapping)}, bundle.test_sets_json)
        for unit, path in zip(net.units, bundle.unit_jsons):
            save_unit(unit, path)
        save_network(net, bundle.network_json)
        write_json(metrics_over.to_json(), bundle.metrics_overlapping_json)
        write_json(metrics_non.to_json(), bundle.metrics_non_overlapping_json)
        export_heatmap_csv(matrix, bundle.heatmap_csv)
        render_heatmap_svg(matrix, bundle.heatmap_svg)
        save_attribution(attribution, bundle.attribution_json)
        write_json(contribution.to_json(), bundle.contribution_json)
        write_json({"workers": fed.workers,
                    "nodes": [{"node_id": i, "final_loss": log.final_loss,
                               "epochs": len(log.epoch_losses), "steps": log.steps,
                               "epoch_losses": list(log.epoch_losses)}
                              for i, log in enumerate(fed.logs)]}, bundle.fed_report_json)
        write_json({"workers": fed.workers,
                    "durations_ms": {str(i): d for i, d in enumerate(fed.durations_ms)},
                    "schedule": [list(s) for s in fed.schedule]}, bundle.fed_timings_json)
        write_json({"version": ARTIFACT_VERSION,
                    "config_sha256": _config_hash(config),
                    "switch_warnings": list(switch_warnings),
                    "artifacts": sorted(p.name for p in bundle.all_paths() if p != bundle.manifest_json)},
                   bundle.manifest_json)
        return bundle

    return _stage("write", write_stage)
