"""Command-line front end: `asp-snn <command> [options]`."""
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

from .classes import NoiseKind, NoiseSpec
from .dataio import load_idx, make_noisy_set, write_idx, write_noise_sidecar
from .defaults import Defaults
from .exceptions import AspSnnError, DimensionMismatchError, NumericalFaultError
from .modules.config_file import dump_config, load_config
from .modules.mnist_fetch import fetch_mnist
from .modules.pgm import tile_weights, write_pgm
from .modules.snapshots import read_snapshot, write_snapshot
from .selfcheck import run_selfcheck
from .trainer import (background_mask, background_variance, evaluate, label_neurons, load_run_data,
                      network_from_snapshot, report_text, take_snapshot, train)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DIMENSIONS = 3

RESOLVED_CONFIG = "resolved.cfg"
FINAL_WEIGHTS = "final_weights.bin"
REPORT = "report.txt"


def _config(args):
    config = load_config(args.config, args.set)
    if args.out:
        config.output_dir = args.out
    return config


def _output_dir(config) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    config = _config(args)
    out = _output_dir(config)
    (out / RESOLVED_CONFIG).write_text(dump_config(config), encoding="utf-8")
    data = load_run_data(config)
    result = train(config, data.train, data.schedule, output_dir=out)
    write_snapshot(out / FINAL_WEIGHTS, take_snapshot(result.network, len(data.schedule), config.seed))
    print(f"presentations={len(data.schedule)} degenerate={result.degenerate} "
          f"mean_weight={float(result.network.weights.mean())!r} output_dir={out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _config(args)
    out = _output_dir(config)
    snapshot = read_snapshot(args.snapshot or out / FINAL_WEIGHTS)
    net = network_from_snapshot(snapshot, config)
    data = load_run_data(config)
    labels = label_neurons(net, data.label_set, config)
    report = evaluate(net, data.test_set, labels, config)
    text = report_text(report, per_class=args.per_class)
    variance = None
    if data.mask_set is not None:
        variance = background_variance(net.weights, background_mask(data.mask_set, config.data.background_fraction))
        text += f"background_variance={variance!r}\n"
    (Path(args.report) if args.report else out / REPORT).write_text(text, encoding="utf-8")
    print(f"accuracy={report.accuracy!r}")
    if args.per_class:
        for cls, accuracy in sorted(report.per_class_accuracy.items()):
            print(f"class_{cls}_accuracy={accuracy!r}")
    if variance is not None:
        print(f"background_variance={variance!r}")
    return EXIT_OK


def cmd_export_weights(args) -> int:
    snapshot = read_snapshot(args.snapshot)
    n_exc = snapshot.weights.shape[0]
    grid_cols = args.grid_cols or math.ceil(math.sqrt(n_exc))
    canvas = tile_weights(snapshot.weights, grid_cols, global_norm=args.global_norm)
    output = Path(args.output) if args.output else Path(args.snapshot).with_suffix(".pgm")
    write_pgm(output, canvas)
    print(f"wrote {output} ({canvas.shape[1]}x{canvas.shape[0]})")
    return EXIT_OK


def cmd_make_noisy(args) -> int:
    spec = NoiseSpec(
        kind=NoiseKind(args.kind),
        snr_db=args.snr_db if args.snr_db is not None else (
            Defaults.COMBINED_SNR_DB if args.kind == NoiseKind.AWGN_REDUCED_CONTRAST.value else Defaults.AWGN_SNR_DB),
        contrast_factor=args.contrast if args.contrast is not None else (
            Defaults.CONTRAST_FACTOR if args.kind == NoiseKind.AWGN_REDUCED_CONTRAST.value else 1.0),
    )
    source = load_idx(args.images, args.labels)
    noisy = make_noisy_set(source, spec, args.seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    images_path = out / f"noisy-{Path(args.images).name}"
    labels_path = out / f"noisy-{Path(args.labels).name}"
    write_idx(noisy, images_path, labels_path)
    write_noise_sidecar(out / f"noisy-{Path(args.images).name}.noise.cfg", spec, args.seed)
    print(f"wrote {images_path} and {labels_path}")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    config = load_config(args.config, args.set)
    results = run_selfcheck(config.plasticity)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name}" + (f": {result.detail}" if result.detail else ""))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


def cmd_dump_config(args) -> int:
    sys.stdout.write(dump_config(_config(args)))
    return EXIT_OK


def cmd_fetch_mnist(args) -> int:
    for path in fetch_mnist(args.dest, args.base_url):
        print(path)
    return EXIT_OK


def _add_config_options(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--out", help="output directory (overrides output_dir)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asp-snn", description="Spiking network with adaptive synaptic plasticity")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("train", help="train a network and write snapshots, run log and final weights")
    _add_config_options(p)
    p.set_defaults(handler=cmd_train)

    p = commands.add_parser("eval", help="label neurons and evaluate a snapshot on the test split")
    _add_config_options(p)
    p.add_argument("--snapshot", help=f"weight snapshot (default: <out>/{FINAL_WEIGHTS})")
    p.add_argument("--report", help=f"report file (default: <out>/{REPORT})")
    p.add_argument("--per-class", action="store_true", help="add per-class accuracy rows")
    p.set_defaults(handler=cmd_eval)

    p = commands.add_parser("export-weights", help="write receptive fields as a PGM grid")
    p.add_argument("snapshot")
    p.add_argument("--grid-cols", type=int, help="tiles per row (default: square grid)")
    p.add_argument("--global-norm", action="store_true", help="normalize over all neurons instead of per neuron")
    p.add_argument("--output", help="PGM path (default: snapshot path with .pgm suffix)")
    p.set_defaults(handler=cmd_export_weights)

    p = commands.add_parser("make-noisy", help="synthesize a noisy copy of an IDX dataset")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--kind", default=NoiseKind.AWGN.value, choices=[k.value for k in NoiseKind])
    p.add_argument("--snr-db", type=float)
    p.add_argument("--contrast", type=float)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="output directory")
    p.set_defaults(handler=cmd_make_noisy)

    p = commands.add_parser("selfcheck", help="compare the engine against a scalar reimplementation")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(handler=cmd_selfcheck)

    p = commands.add_parser("dump-config", help="print every effective config value")
    _add_config_options(p)
    p.set_defaults(handler=cmd_dump_config)

    p = commands.add_parser("fetch-mnist", help="download the MNIST IDX files")
    p.add_argument("--dest", required=True)
    p.add_argument("--base-url", default=Defaults.MNIST_BASE_URL)
    p.set_defaults(handler=cmd_fetch_mnist)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except DimensionMismatchError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIMENSIONS
    except NumericalFaultError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except (AspSnnError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
