"""Command-line interface.

`switchnet pipeline` runs the whole experiment from one config file; the other
subcommands expose the individual stages over the same file formats, so a
manual chain of subcommands reproduces the pipeline's artifacts byte-for-byte
(timings aside).
"""

import argparse
import sys
from pathlib import Path

from ._version import ARTIFACT_VERSION
from .analysis import attribute, export_heatmap_csv, heatmap, render_heatmap_svg, save_attribution
from .data import (PartitionSet, generate_synthetic, load_dataset, load_group_specs,
                   make_test_sets, partition, save_dataset)
from .errors import ConfigError, StageError, SwitchNetError
from .federated import (collect, make_nodes, node_train_config, run_local_training,
                        with_trained_units)
from .jsonio import read_json, write_json
from .network import evaluate, fit_readout, load_network, neuron_contribution, save_network
from .neuron import init_unit, save_unit, train_unit
from .pipeline import default_config_path, load_config, run_pipeline
from .switching import build_switch


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _load_cli_config(args):
    path = args.config if args.config else default_config_path()
    return load_config(_require_file(path, "config file"), getattr(args, "set", None) or [])


def _ids_for_kind(test_sets_path, kind: str):
    doc = read_json(_require_file(test_sets_path, "test-sets file"))
    key = kind.replace("-", "_")
    if key not in doc:
        raise ConfigError(f"test-sets file has no {key!r} id list")
    return [int(i) for i in doc[key]]


def cmd_pipeline(args) -> int:
    config = _load_cli_config(args)
    bundle = run_pipeline(config)
    print(f"bundle written to {bundle.out_dir}")
    for path in bundle.all_paths():
        print(f"  {path.name}")
    return 0


def cmd_gen_data(args) -> int:
    if args.specs is not None:
        if args.seed is None:
            raise ConfigError("gen-data with --specs also needs --seed")
        specs = load_group_specs(_require_file(args.specs, "group specs file"))
        dataset = generate_synthetic(specs, args.seed)
    else:
        config = _load_cli_config(args)
        if config.specs is None:
            raise ConfigError("config points at an existing dataset; nothing to generate")
        dataset = generate_synthetic(config.specs, config.seed)
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset.observations)} observations to {args.out}")
    return 0


def cmd_partition(args) -> int:
    config = _load_cli_config(args)
    dataset = load_dataset(_require_file(args.dataset, "dataset CSV"))
    parts = partition(dataset, config.plan, config.seed)
    write_json(parts.to_json(), args.out)
    print(f"wrote partition of {len(parts.assigned_ids())} observations to {args.out}")
    if args.test_sets:
        overlapping, non_overlapping = make_test_sets(dataset, parts, config.holdout_fraction,
                                                      config.seed)
        write_json({"holdout_fraction": config.holdout_fraction,
                    "overlapping": list(overlapping),
                    "non_overlapping": list(non_overlapping)}, args.test_sets)
        print(f"wrote test sets ({len(overlapping)} overlapping, "
              f"{len(non_overlapping)} non-overlapping) to {args.test_sets}")
    return 0


def cmd_train(args) -> int:
    config = _load_cli_config(args)
    dataset = load_dataset(_require_file(args.dataset, "dataset CSV"))
    parts = PartitionSet.from_json(read_json(_require_file(args.partition, "partition JSON")))
    if args.unit not in parts.subsets:
        raise ConfigError(f"partition has no unit {args.unit}")
    subset = [dataset.observation(i) for i in parts.subsets[args.unit]]
    unit = init_unit(dataset.dim, config.activation, args.unit, config.seed)
    trained, log = train_unit(unit, subset, node_train_config(config.train, args.unit))
    save_unit(trained, args.out_unit)
    print(f"trained unit {args.unit} on {len(subset)} observations "
          f"(final loss {log.final_loss:.6f}) -> {args.out_unit}")
    if args.out_log:
        write_json({"unit_index": args.unit, "epoch_losses": list(log.epoch_losses),
                    "final_loss": log.final_loss, "steps": log.steps}, args.out_log)
    return 0


def cmd_fedsim(args) -> int:
    config = _load_cli_config(args)
    dataset = load_dataset(_require_file(args.dataset, "dataset CSV"))
    parts = PartitionSet.from_json(read_json(_require_file(args.partition, "partition JSON")))
    switch, _ = build_switch(config.n_units, config.switch_entries, config.switch_fallback)
    units = [init_unit(dataset.dim, config.activation, k, config.seed)
             for k in range(config.n_units)]
    nodes = make_nodes(parts, dataset, units)
    workers = args.workers or config.workers or config.n_units
    trained, fed = run_local_training(nodes, config.train, workers=workers)
    net = collect(with_trained_units(nodes, trained), switch, config.aggregation)
    if config.aggregation == "linear-readout":
        net = fit_readout(net, tuple(sorted(parts.assigned_ids())), dataset, config.train)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for unit in net.units:
        save_unit(unit, out / f"unit_{unit.unit_index}.json")
    save_network(net, out / "network.json")
    write_json({"workers": fed.workers,
                "nodes": [{"node_id": i, "final_loss": log.final_loss,
                           "epochs": len(log.epoch_losses), "steps": log.steps,
                           "epoch_losses": list(log.epoch_losses)}
                          for i, log in enumerate(fed.logs)]}, out / "fed_report.json")
    write_json({"workers": fed.workers,
                "durations_ms": {str(i): d for i, d in enumerate(fed.durations_ms)},
                "schedule": [list(s) for s in fed.schedule]}, out / "fed_timings.json")
    print(f"trained {len(net.units)} nodes with {workers} worker(s) -> {out}")
    return 0


def cmd_eval(args) -> int:
    net = load_network(_require_file(args.network, "network bundle"))
    dataset = load_dataset(_require_file(args.dataset, "dataset CSV"))
    ids = _ids_for_kind(args.test_sets, args.kind)
    metrics = evaluate(net, ids, dataset, args.kind)
    write_json(metrics.to_json(), args.out)
    print(f"{args.kind} accuracy {metrics.accuracy:.4f} over {metrics.n} observations -> {args.out}")
    if args.out_contribution:
        report = neuron_contribution(net, ids, dataset)
        write_json(report.to_json(), args.out_contribution)
    return 0


def cmd_heatmap(args) -> int:
    net = load_network(_require_file(args.network, "network bundle"))
    dataset = load_dataset(_require_file(args.dataset, "dataset CSV"))
    ids = _ids_for_kind(args.test_sets, args.kind)
    matrix = heatmap(net, ids, dataset, args.statistic)
    export_heatmap_csv(matrix, args.out_csv)
    render_heatmap_svg(matrix, args.out_svg)
    print(f"heatmap ({matrix.n_rows} units x {matrix.n_cols} groups) -> {args.out_csv}, {args.out_svg}")
    if args.out_attribution:
        save_attribution(attribute(matrix), args.out_attribution)
    return 0


def _add_config_arg(sub, required=False):
    sub.add_argument("--config", default=None, required=required,
                     help="experiment config JSON (defaults to the packaged default)")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="dotted-key config override, e.g. train.epochs=100")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchnet",
                                     description="Switch-gated modular network experiments")
    parser.add_argument("--version", action="version", version=f"switchnet {ARTIFACT_VERSION}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("pipeline", help="run the full experiment and write the artifact bundle")
    _add_config_arg(p)
    p.set_defaults(handler=cmd_pipeline)

    p = subs.add_parser("gen-data", help="generate the synthetic dataset CSV")
    _add_config_arg(p)
    p.add_argument("--specs", default=None, help="group specs JSON (alternative to --config)")
    p.add_argument("--seed", type=int, default=None, help="seed when using --specs")
    p.add_argument("--out", required=True, help="output dataset CSV path")
    p.set_defaults(handler=cmd_gen_data)

    p = subs.add_parser("partition", help="partition a dataset per the config's plan")
    _add_config_arg(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output partition JSON path")
    p.add_argument("--test-sets", default=None, help="also write the test-set id lists here")
    p.set_defaults(handler=cmd_partition)

    p = subs.add_parser("train", help="train a single unit on its partition subset")
    _add_config_arg(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--unit", type=int, required=True)
    p.add_argument("--out-unit", required=True)
    p.add_argument("--out-log", default=None)
    p.set_defaults(handler=cmd_train)

    p = subs.add_parser("fedsim", help="train all units on virtual nodes and collect the network")
    _add_config_arg(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_fedsim)

    p = subs.add_parser("eval", help="evaluate a network bundle on a test set")
    p.add_argument("--network", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--test-sets", required=True)
    p.add_argument("--kind", choices=["overlapping", "non-overlapping"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--out-contribution", default=None,
                   help="also write the per-unit ablation contribution report")
    p.set_defaults(handler=cmd_eval)

    p = subs.add_parser("heatmap", help="probe-activation heatmap, attribution, and exports")
    p.add_argument("--network", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--test-sets", required=True)
    p.add_argument("--kind", choices=["overlapping", "non-overlapping"], default="non-overlapping")
    p.add_argument("--statistic", choices=["mean", "max"], default="mean")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-svg", required=True)
    p.add_argument("--out-attribution", default=None)
    p.set_defaults(handler=cmd_heatmap)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 2
    except SwitchNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
