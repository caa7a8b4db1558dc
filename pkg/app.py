"""
Command-line driver.

    python app.py run <config.json>
    python app.py verify [--level quick|full]
    python app.py resume <snapshot.jsonl> <config.json> [--t T]

Exit status: 0 on success, 1 when the solver aborts or a verification check
fails, 2 for configuration and input errors.
"""

import argparse
import logging
import sys

import numpy as np

from config import InitialData, load_config
from modules import __version__
from modules.diagnostics import summary
from modules.errors import (
    ConfigParseError,
    ConfigValidationError,
    IntegrationAbort,
    MuskatError,
    SnapshotIntegrityError,
)
from modules.geometry import BubbleState, normalize_initial_data
from modules.spectral_core import SpectralFunction
from modules.time_integrator import run
from modules.verification import LEVELS, format_table, run_suite
from utils.output_writers import prepare_output_dir, write_manifest, write_outputs
from utils.snapshot_io import load_snapshot

logger = logging.getLogger("muskat")

EXIT_OK = 0
EXIT_ABORT = 1
EXIT_CONFIG = 2


def build_initial_state(config):
    """
    Initial BubbleState of a run: a snapshot as stored, or the configured
    cosine modes normalized to unit area with the pole at the centroid.
    """
    n_max = config.integrator.n_max
    initial = config.initial
    if initial.snapshot is not None:
        state = load_snapshot(initial.snapshot)
        if state.f.n_max != n_max:
            logger.warning("snapshot has n_max=%d, resizing to %d", state.f.n_max, n_max)
            state = BubbleState.from_projection(state.f.resized(n_max), state.c, state.t)
        return state

    shape = SpectralFunction.from_cosines(n_max, initial.modes)
    if not initial.normalize:
        return BubbleState.from_projection(shape)
    f0, shift, scale = normalize_initial_data(shape)
    # pole sits at the centroid, so the initial position is the applied shift
    return BubbleState(f0, np.asarray(shift), 0.0)


def run_command(config, initial=None):
    """
    Integrate one configuration and write its outputs and manifest.

    Returns:
        int: exit status
    """
    root = prepare_output_dir(config.outputs)
    state = initial if initial is not None else build_initial_state(config)
    status, reason, exit_code = "ok", None, EXIT_OK
    try:
        trajectory = run(state, config.integrator, config.params)
    except IntegrationAbort as exc:
        logger.error("run aborted: %s", exc)
        trajectory = exc.trajectory
        status, reason, exit_code = "aborted", str(exc), EXIT_ABORT

    files = []
    if trajectory is not None and len(trajectory):
        document = summary(trajectory, config.decay_window, config.integrator.nu)
        document["converged_at"] = trajectory.converged_at
        document["status"] = status
        files = write_outputs(root, config, trajectory, document)
    manifest = write_manifest(root, config, status, reason, files)
    logger.info("manifest written to %s (status %s)", manifest, status)
    return exit_code


def verify_command(level="quick"):
    results = run_suite(level)
    print(format_table(results))
    failures = [r for r in results if not r.passed]
    if failures:
        logger.error("%d of %d checks failed", len(failures), len(results))
        return EXIT_ABORT
    logger.info("all %d checks passed", len(results))
    return EXIT_OK


def resume_command(snapshot, config, t=None):
    """Continue a run from a stored snapshot up to the configured t_end."""
    state = load_snapshot(snapshot, t)
    n_max = config.integrator.n_max
    if state.f.n_max != n_max:
        state = BubbleState.from_projection(state.f.resized(n_max), state.c, state.t)
    logger.info("resuming from t=%.6g", state.t)
    config = config.with_initial(InitialData(snapshot=snapshot, normalize=False))
    return run_command(config, state)


def build_parser():
    parser = argparse.ArgumentParser(prog="muskat", description="Muskat bubble pseudo-spectral simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="integrate a configuration")
    run_parser.add_argument("config")

    verify_parser = commands.add_parser("verify", help="run the numerical property suites")
    verify_parser.add_argument("--level", choices=LEVELS, default="quick")

    resume_parser = commands.add_parser("resume", help="continue from a snapshot file")
    resume_parser.add_argument("snapshot")
    resume_parser.add_argument("config")
    resume_parser.add_argument("--t", type=float, default=None, help="snapshot time (default: last record)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "verify":
            return verify_command(args.level)
        config = load_config(args.config)
        if args.command == "run":
            return run_command(config)
        return resume_command(args.snapshot, config, args.t)
    except (ConfigParseError, ConfigValidationError, SnapshotIntegrityError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except MuskatError as exc:
        # solver error outside the time loop (normalization, parameters)
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
