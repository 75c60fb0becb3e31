"""
Batch front-end of the cavity transport engine: single runs, parameter
sweeps, comparisons against the master equation and closed-form baselines.

Usage:
    cavity-transport run --config configs/individual.cfg --out results
    cavity-transport sweep --config configs/collective.cfg --set sweep.steps=12
"""

__version__ = "1.1.0"

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from cavity_transport.baselines import (baseline_prediction, broadening_estimate, current_g0,
                                        tavis_cummings_frequencies)
from cavity_transport.errors import (ConfigurationError, DimensionCapError, NotConvergedError,
                                     NumericalConsistencyError, TransportError)
from cavity_transport.model import BANDS
from cavity_transport.observables import TransportReport, transport_report
from cavity_transport.qme import check_caps, compare as compare_states, converge_cutoff, solve
from cavity_transport.solver import scba_solve
from cavity_transport.spectral import make_grid
from config import RunConfig, load_config

log = logging.getLogger("cavity_transport.app")

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2
EXIT_INCONSISTENT = 3

SPECTRA_COLUMNS = ("omega", "T1", "T2", "A_c", "A1_trace", "A2_trace")
SWEEP_COLUMNS = ("value", "j", "j1", "j2", "n_cav", "omega_n", "omega_s", "iterations",
                 "converged", "j0", "j_over_j0", "error")
DIFF_COLUMNS = ("value", "converged", "cutoff_converged", "j_negf", "j_qme", "delta_j",
                "delta_n_site_band1", "delta_n_site_band2", "delta_n_cav",
                "j_tolerance", "n_site_tolerance", "n_cav_tolerance",
                "j_within", "n_site_within", "n_cav_within", "within_tolerance", "qme_residual", "error")



def _number(value) -> str:
    """Full round-trip text of a float; empty for a missing value"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _json_value(value):
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, np.ndarray):
        return [_json_value(item) for item in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_json_value(item) for item in value]
    if isinstance(value, dict):
        return {str(key): _json_value(item) for key, item in value.items()}
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


def _output_path(config: RunConfig, filename: str) -> str:
    directory = config.output.directory
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as error:
        raise ConfigurationError(f"output.directory {directory!r} is not writable: {error}") from None
    return os.path.join(directory, filename)


def _header(config: RunConfig) -> Dict:
    return {"schema_version": SCHEMA_VERSION, "config": _json_value(config.as_dict())}


def write_json(config: RunConfig, filename: str, payload: Dict) -> str:
    """Write a JSON document with the resolved config and schema version embedded.

    Returns:
        (str): The path written.
    """
    path = _output_path(config, filename)
    document = _header(config)
    document.update(_json_value(payload))
    with open(path, "w") as file:
        json.dump(document, file, indent=2)
        file.write("\n")
    return path


def write_csv(config: RunConfig, filename: str, columns: Tuple[str, ...], rows: List[List[str]]) -> str:
    """Write a CSV table whose leading '#' lines carry the schema version and config.

    Returns:
        (str): The path written.
    """
    path = _output_path(config, filename)
    with open(path, "w", newline="") as file:
        file.write(f"# schema_version: {SCHEMA_VERSION}\n")
        file.write(f"# config: {json.dumps(_json_value(config.as_dict()), sort_keys=True)}\n")
        writer = csv.writer(file)
        writer.writerow(columns)
        writer.writerows(rows)
    return path


def spectra_rows(report: TransportReport) -> List[List[str]]:
    """(list<list<str>>) Returns one spectra.csv row per grid point"""
    omegas = report.a_cavity.grid.omegas
    traces = {band: np.trace(report.a_electron[band].values, axis1=1, axis2=2).real for band in BANDS}
    columns = (omegas, report.t1.total.values, report.t2.total.values,
               report.a_cavity.values, traces[1], traces[2])
    return [[_number(column[index]) for column in columns] for index in range(len(omegas))]


def summary(report: TransportReport) -> Dict:
    """(dict) Returns the summary.json payload of a report"""
    return {
        "j": report.j,
        "j1": report.j1,
        "j2": report.j2,
        "j_over_gamma1": report.j_over_gamma1,
        "j_source": report.j_source,
        "j_drain": report.j_drain,
        "n_cav": report.n_cav,
        "omega_n": report.omega_n,
        "omega_s": report.omega_s,
        "imbalance_negative": report.rabi.imbalance_negative,
        "n_site_band1": report.populations.n_site[1],
        "n_site_band2": report.populations.n_site[2],
        "iterations": report.iterations,
        "converged": report.converged,
        "truncation_metric": report.truncation_metric,
    }


def solve_point(config: RunConfig) -> Tuple[TransportReport, int]:
    """Solve one parameter point, keeping the last iterate when the loop stalls.

    Returns:
        (tuple<TransportReport, int>): The report and EXIT_OK or EXIT_NOT_CONVERGED.
    """
    grid = make_grid(config.model, config.grid)
    try:
        state = scba_solve(config.model, grid, config.solver)
    except NotConvergedError as error:
        log.warning("%s", error)
        return transport_report(error.state), EXIT_NOT_CONVERGED
    return transport_report(state), EXIT_OK


def run(config: RunConfig) -> int:
    """Solve the configured point and write spectra.csv and summary.json, plus
    diff.json against the master equation when qme.enabled is set.

    Returns:
        (int): EXIT_OK, or EXIT_NOT_CONVERGED (files are written regardless).
    """
    if config.qme.enabled:
        check_caps(config.qme.problem(config.model))

    report, status = solve_point(config)
    if "csv" in config.output.formats:
        write_csv(config, "spectra.csv", SPECTRA_COLUMNS, spectra_rows(report))
    if "json" in config.output.formats:
        write_json(config, "summary.json", summary(report))
    if config.qme.enabled:
        write_json(config, "diff.json", {"rows": [qme_row(None, config, report)]})
    log.info("J = %.6e (J / Gamma1 = %.4f), N_cav = %.4e", report.j, report.j_over_gamma1, report.n_cav)
    return status


def _sweep_points(config: RunConfig) -> List[Tuple[Optional[float], RunConfig]]:
    """(list<tuple<float, RunConfig>>) Returns (value, base config) pairs; the
    point's own config is only built when the point runs"""
    if config.sweep.parameter is None:
        return [(None, config)]
    return [(float(value), config) for value in config.sweep.values()]


def point_config(value: Optional[float], config: RunConfig) -> RunConfig:
    """(RunConfig) Returns the base config with the swept parameter set to value

    Raises:
        ConfigurationError: If value is not valid for the swept parameter.
    """
    if value is None:
        return config
    return config.with_model(**{config.sweep.parameter: value})


def _failed_row(columns: Tuple[str, ...], value: Optional[float], error: Exception) -> Dict:
    row = dict.fromkeys(columns)
    row.update(value=value, converged=False, error=str(error))
    return row


def sweep_point(point: Tuple[Optional[float], RunConfig]) -> Tuple[Dict, int]:
    """Solve one sweep point; failures, including an invalid swept value, are
    recorded in the row.

    Returns:
        (tuple<dict, int>): The row keyed by SWEEP_COLUMNS and its exit status.
    """
    value, base = point
    try:
        config = point_config(value, base)
        report, status = solve_point(config)
    except (NumericalConsistencyError, ConfigurationError) as error:
        log.warning("sweep point %s failed: %s", value, error)
        status = EXIT_CONFIG if isinstance(error, ConfigurationError) else EXIT_INCONSISTENT
        return _failed_row(SWEEP_COLUMNS, value, error), status

    params = config.model
    j0 = sum(current_g0(params.gamma(band), params.hopping(band)) for band in BANDS)
    row = dict.fromkeys(SWEEP_COLUMNS)
    row.update(value=value, j=report.j, j1=report.j1, j2=report.j2, n_cav=report.n_cav,
               omega_n=report.omega_n, omega_s=report.omega_s,
               iterations=report.iterations, converged=report.converged,
               j0=j0, j_over_j0=report.j / j0 if j0 > 0 else None,
               error="not converged" if status == EXIT_NOT_CONVERGED else "")
    return row, status


def _map_points(function: Callable, points: List, workers: int) -> List:
    """Apply function to every point in order, in a process pool when workers > 1"""
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(function, points))
    return [function(point) for point in points]


def sweep(config: RunConfig) -> int:
    """Solve every sweep point and write sweep.csv.

    Returns:
        (int): The most severe status over all points.
    """
    if config.sweep.parameter is None:
        raise ConfigurationError("sweep.parameter is required for the sweep command")

    results = _map_points(sweep_point, _sweep_points(config), config.sweep.workers)
    rows = [[_number(row[column]) if column != "error" else row[column] for column in SWEEP_COLUMNS]
            for row, _ in results]
    write_csv(config, "sweep.csv", SWEEP_COLUMNS, rows)
    return max(status for _, status in results)


def qme_row(value, config: RunConfig, report: TransportReport) -> Dict:
    """(dict) Returns the diff.json row comparing a report with the master equation"""
    problem = config.qme.problem(config.model)
    check_caps(problem)
    qme_state = converge_cutoff(problem) if problem.photon_cutoff > 1 else solve(problem)
    diff = compare_states(report, qme_state)
    return {"value": value, "converged": report.converged, "cutoff_converged": qme_state.cutoff_converged,
            "j_negf": diff.j_negf, "j_qme": diff.j_qme, "delta_j": diff.delta_j,
            "delta_n_site_band1": diff.delta_n_site[1], "delta_n_site_band2": diff.delta_n_site[2],
            "delta_n_cav": diff.delta_n_cav, "j_tolerance": diff.j_tolerance,
            "n_site_tolerance": diff.n_site_tolerance, "n_cav_tolerance": diff.n_cav_tolerance,
            "j_within": diff.j_within, "n_site_within": diff.n_site_within, "n_cav_within": diff.n_cav_within,
            "within_tolerance": diff.within_tolerance, "qme_residual": qme_state.residual, "error": ""}


def compare_point(point: Tuple[Optional[float], RunConfig]) -> Tuple[Dict, int]:
    """Compare the Green's function solution of one point with the master equation"""
    value, base = point
    try:
        config = point_config(value, base)
    except ConfigurationError as error:
        log.warning("compare point %s failed: %s", value, error)
        return _failed_row(DIFF_COLUMNS, value, error), EXIT_CONFIG

    check_caps(config.qme.problem(config.model))
    report, status = solve_point(config)
    return qme_row(value, config, report), status


def compare(config: RunConfig) -> int:
    """Write diff.json with one row per sweep point (one row without a sweep).

    Every valid point is checked against the dimension caps before any solve.
    """
    points = _sweep_points(config)
    for value, base in points:
        try:
            point = point_config(value, base)
        except ConfigurationError:
            continue
        check_caps(point.qme.problem(point.model))

    results = _map_points(compare_point, points, config.sweep.workers)
    write_json(config, "diff.json", {"rows": [row for row, _ in results]})
    return max(status for _, status in results)


def baseline(config: RunConfig) -> int:
    """Write baseline.json with every closed-form estimate of the configured point"""
    params = config.model
    prediction = baseline_prediction(params)
    write_json(config, "baseline.json", {
        "j0": prediction.j0,
        "j0_per_band": prediction.j0_per_band,
        "j0_two_band": prediction.j0_two_band,
        "enhancement_ceiling": prediction.enhancement_ceiling,
        "broadening_estimate": broadening_estimate(params.g, params.kappa, params.n_ph, 0.5),
        "chi_estimate": prediction.chi_estimate,
        "perturbative_parameter": prediction.perturbative_parameter,
        "regime": prediction.regime,
        "tavis_cummings_frequencies": tavis_cummings_frequencies(params),
    })
    return EXIT_OK


COMMANDS = {
    "run": run,
    "sweep": sweep,
    "compare": compare,
    "baseline": baseline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavity-transport",
                                     description="Cavity-assisted transport through a two-band chain")
    parser.add_argument("command", choices=tuple(COMMANDS))
    parser.add_argument("--config", help="configuration file of 'section.key = value' lines")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration entry (repeatable)")
    parser.add_argument("--out", help="output directory, overrides output.directory")
    parser.add_argument("--verbose", action="store_true", help="log every iteration")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def configure_logging(verbose: bool):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: List[str] = None) -> int:
    """Entry point of the command line; returns the process exit code"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = load_config(args.config, args.set)
        if args.out:
            config = replace(config, output=replace(config.output, directory=args.out))
        return COMMANDS[args.command](config)
    except ConfigurationError as error:
        log.error("configuration error: %s", error)
        return EXIT_CONFIG
    except (NumericalConsistencyError, DimensionCapError, TransportError) as error:
        log.error("%s", error)
        return EXIT_INCONSISTENT


if __name__ == '__main__':
    sys.exit(main())
