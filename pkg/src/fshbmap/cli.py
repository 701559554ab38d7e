"""Command-line front end.

Usage::

    fshbmap simulate CONFIG [--key=value ...]
    fshbmap reconstruct CONFIG MEASUREMENT_CSV [--key=value ...]
    fshbmap sweep CONFIG --iters 260,360,460 [--key=value ...]
    fshbmap compare CONFIG [--key=value ...]

Outputs go to the ``output_dir`` key, else ``$FSHBMAP_OUTPUT_DIR``, else
``./fshbmap-output``.  Every command stages its files in memory and writes
them only once all work has succeeded.

Exit codes: 0 success, 2 configuration or usage error (including a
measurement that does not match the configured geometry), 3 I/O error,
4 numerical failure, 5 malformed input file.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
from pathlib import Path
import sys

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, FormatError, InvalidInputError, NumericalError, ShapeError
from .images import pgm_bytes
from .metrics import psnr, rmse
from .operators import IdentitySensing
from .pipeline import (
    METHODS,
    compare_methods,
    reconstruct,
    simulate_for_task,
    sweep_spsa_iterations,
)
from .spsa import csv_text

log = logging.getLogger("fshbmap")

OUTPUT_ENV = "FSHBMAP_OUTPUT_DIR"
DEFAULT_OUTPUT = "fshbmap-output"
EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_FORMAT = 0, 2, 3, 4, 5

MEASUREMENT_FILE = "y.csv"
METADATA_FILE = "psi.json"
CONFIG_FILE = "config.resolved"


# -- helpers -------------------------------------------------------------------

def output_dir(cfg):
    return Path(cfg.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def commit(out_dir, files):
    """Write ``{name: str | bytes}`` into ``out_dir``, each file atomically."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        data = content.encode("utf-8") if isinstance(content, str) else content
        tmp = out_dir / f".{name}.tmp"
        tmp.write_bytes(data)
        os.replace(tmp, out_dir / name)


def geometry_metadata(task):
    spec = task.radon
    psi = np.ascontiguousarray(task.model.psi)
    meta = {
        "sensing": "identity" if isinstance(spec, IdentitySensing) else "radon",
        "image_width": spec.image_width,
        "image_height": spec.image_height,
        "n_measurements": spec.n_measurements,
        "shape": list(psi.shape),
        "sha256": hashlib.sha256(psi.tobytes()).hexdigest(),
    }
    if not isinstance(spec, IdentitySensing):
        meta.update(
            n_rays=spec.n_rays, samples_per_ray=spec.samples_per_ray,
            detector_spacing=spec.detector_spacing, angles=list(spec.angles),
        )
    return meta


def read_measurement(path):
    """Measurement vector from a one-column CSV with header ``y``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["y"]:
        raise FormatError(f"{path}: expected a header row 'y'")
    try:
        values = [float(r[0]) for r in rows[1:] if len(r) == 1]
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric measurement value") from exc
    if len(values) != len(rows) - 1 or not values:
        raise FormatError(f"{path}: expected exactly one value per row")
    y = np.array(values)
    if not np.all(np.isfinite(y)):
        raise FormatError(f"{path}: non-finite measurement value")
    return y


def check_geometry(task, y, meta_path):
    expected = task.radon.n_measurements
    if y.size != expected:
        raise ShapeError(f"measurement has {y.size} entries, geometry expects {expected}")
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{meta_path}: invalid JSON") from exc
        if meta.get("sha256") != geometry_metadata(task)["sha256"]:
            raise ShapeError(f"{meta_path}: measurement was taken with a different geometry")


# -- commands ------------------------------------------------------------------

def cmd_simulate(cfg, args):
    image = cfg.load_image()
    methods = ("omp",) if cfg.sigma_eps_sq == 0 else None
    task = cfg.task(image, methods=methods)
    meas = simulate_for_task(task, cfg.sigma_eps_sq)
    meta = geometry_metadata(task)
    meta["config"] = cfg.to_text()
    return {
        MEASUREMENT_FILE: csv_text(["y"], [(v,) for v in meas.y]),
        METADATA_FILE: json.dumps(meta, indent=2, sort_keys=True) + "\n",
        CONFIG_FILE: cfg.to_text(),
    }


def cmd_reconstruct(cfg, args):
    image = cfg.load_image()
    task = cfg.task(image)
    path = Path(args.measurement)
    y = read_measurement(path)
    check_geometry(task, y, path.parent / METADATA_FILE)
    result = reconstruct(task, y, cfg.method, cfg.sparsity_list())
    trace = result.trace
    row = (cfg.method, result.ssim, psnr(result.image, image), rmse(result.image, image),
           result.wall_time_s, trace.update_evals if trace else 0,
           trace.logged_evals if trace else 0, result.sparsity)
    files = {
        "recon.pgm": pgm_bytes(result.image),
        "metrics.csv": csv_text(
            ["method", "ssim", "psnr", "rmse", "time_s", "loss_evals", "logged_evals",
             "sparsity"], [row]),
        CONFIG_FILE: cfg.to_text(),
    }
    if trace is not None:
        files["trace.csv"] = trace.to_csv_text()
    return files


def cmd_sweep(cfg, args):
    try:
        iters = [int(s) for s in args.iters.split(",") if s.strip()]
    except ValueError:
        raise ConfigError("--iters must be a comma-separated list of integers") from None
    if not iters:
        raise ConfigError("--iters must list at least one iteration count")
    if min(iters) < 0:
        raise ConfigError("iteration counts must be nonnegative")
    image = cfg.load_image()
    rows = []
    for dictionary in cfg.dictionary_list():
        task = cfg.task(image, dictionary=dictionary, methods=("fshbmap",))
        y = simulate_for_task(task)
        log.info("sweep %s over %s", dictionary.value, iters)
        rows.extend(sweep_spsa_iterations(task, iters, cfg.trials, y))
    body = csv_text(
        ["dictionary", "n_iters", "mean_ssim", "std_ssim", "mean_time_s"],
        [(r.dictionary, r.n_iters, r.mean_ssim, r.std_ssim, r.mean_time_s) for r in rows],
    )
    return {"sweep.csv": body, CONFIG_FILE: cfg.to_text()}


def cmd_compare(cfg, args):
    image = cfg.load_image()
    task = cfg.task(image, methods=METHODS)
    y = simulate_for_task(task)
    rows, results = compare_methods(task, y, sparsities=cfg.sparsity_list())
    files = {
        "compare.csv": csv_text(
            ["method", "ssim", "time_s", "loss_evals", "sparsity"],
            [(r.method, r.ssim, r.time_s, r.loss_evals, r.sparsity) for r in rows]),
        CONFIG_FILE: cfg.to_text(),
    }
    for method, result in results.items():
        files[f"{method}.pgm"] = pgm_bytes(result.image)
    return files


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
}


# -- entry point ---------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="fshbmap",
        description="Sparse-view tomographic reconstruction experiments.",
        epilog="Any configuration key can be overridden with --key=value.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="key = value configuration file")
        if name == "reconstruct":
            p.add_argument("measurement", help=f"{MEASUREMENT_FILE} written by simulate")
        if name == "sweep":
            p.add_argument("--iters", required=True, help="comma-separated SPSA iteration counts")
    return parser


def parse_overrides(extra):
    pairs = []
    for item in extra:
        key, sep, value = item.partition("=")
        if not key.startswith("--") or not sep or len(key) < 3:
            raise ConfigError(f"unrecognized argument {item!r}; overrides take the form --key=value")
        pairs.append((key[2:], value))
    return pairs


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.from_file(args.config, parse_overrides(extra))
        files = COMMANDS[args.command](cfg, args)
        commit(output_dir(cfg), files)
    except FormatError as exc:
        return _fail(exc, EXIT_FORMAT)
    except (ConfigError, ShapeError, InvalidInputError) as exc:
        return _fail(exc, EXIT_CONFIG)
    except NumericalError as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    return EXIT_OK


def _fail(exc, code):
    print(f"fshbmap: error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
