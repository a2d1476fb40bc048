"""Command-line entry-point for the heat-transfer toolkit.

High-level flow
---------------
```
argv + job file ──► parse_and_validate ──► JobSpec
                                             │ sweep grid (d × R × T)
                                             ▼
                                    asyncio.Queue of points
                                             │
                        ┌────────────────────┼────────────────────┐
                        ▼                    ▼                    ▼
                  worker coroutine     worker coroutine     worker coroutine
                        │ run_in_executor (thread pool, --jobs wide)
                        ▼
                  row buffer ──► rows emitted in grid order (CSV / JSON)
```

Usage errors exit with 2, missing or unreadable files with 3 and failed
computations with 4.  Rows finished before a failing grid point are still
written.
"""

import argparse
import asyncio
import contextlib
import csv
import itertools
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, TextIO

from pydantic import ValidationError

from config import __version__, get_max_jobs, settings
from errors import (EXIT_COMPUTATION, EXIT_OK, ComputationError, DomainError, InputOutputError, ToolkitError,
                    UsageError)
from job_config import load_job_file
from materials import DielectricModel, parse_complex_pair, resolve_material
from models import Command, EmissionResult, JobSpec, OutputFormat, Reflections, Solver, Spacing, SweepRange
from radiation import radiate_cylinder, radiate_plate, radiate_sphere
from transfer import plate_plate_flux, pta_transfer, sphere_plate_large_d, sphere_plate_transfer

_logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

RESULT_COLUMNS = ("power", "normalized", "pol_E", "pol_M", "channel_prop", "channel_evan", "l_max_used", "est_error")


# ---------------------------------------------------------------------------- #
# Command table                                                                #
# ---------------------------------------------------------------------------- #

_PAIR = ("material_sphere", "material_plate")

REQUIRED: Dict[Command, tuple] = {
    Command.RADIATE_PLATE: ("material", "temperature"),
    Command.RADIATE_SPHERE: ("material", "radius", "temperature"),
    Command.RADIATE_CYLINDER: ("material", "radius", "temperature"),
    Command.TRANSFER_PLATES: ("material_1", "material_2", "gap", "t1", "t2"),
    Command.TRANSFER_SPHERE_PLATE: _PAIR + ("radius", "gap", "t_plate", "t_sphere"),
    Command.PTA: _PAIR + ("radius", "gap", "t_plate", "t_sphere"),
    Command.LARGE_D: _PAIR + ("radius", "t_plate"),
}

OPTIONAL: Dict[Command, tuple] = {
    Command.RADIATE_PLATE: ("tol",),
    Command.RADIATE_SPHERE: ("mu", "tol"),
    Command.RADIATE_CYLINDER: ("tol",),
    Command.TRANSFER_PLATES: ("tol", "reflections", "divergent_only"),
    Command.TRANSFER_SPHERE_PLATE: ("mu", "tol", "reflections", "l_max", "solver", "divergent_only"),
    Command.PTA: ("tol", "reflections", "divergent_only"),
    Command.LARGE_D: ("mu", "tol"),
}

COMMON = ("output", "format", "jobs")

# the temperature a --sweep-temperature replaces
TEMPERATURE_FIELD: Dict[Command, str] = {
    Command.RADIATE_PLATE: "temperature",
    Command.RADIATE_SPHERE: "temperature",
    Command.RADIATE_CYLINDER: "temperature",
    Command.TRANSFER_PLATES: "t1",
    Command.TRANSFER_SPHERE_PLATE: "t_plate",
    Command.PTA: "t_plate",
    Command.LARGE_D: "t_plate",
}

SWEEPS = {"sweep_d": "gap", "sweep_radius": "radius"}

MATERIAL_FIELDS = ("material", "material_sphere", "material_plate", "material_1", "material_2")
LENGTH_FIELDS = ("radius", "gap")
TEMPERATURE_FIELDS = ("temperature", "t_plate", "t_sphere", "t1", "t2")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _swept_field(command: Command, sweep: str) -> str:
    return TEMPERATURE_FIELD[command] if sweep == "sweep_temperature" else SWEEPS[sweep]


# ---------------------------------------------------------------------------- #
# Argument parsing                                                             #
# ---------------------------------------------------------------------------- #

class _ArgumentParser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting so callers see a single error path."""

    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="heat-transfer",
        description="Thermal emission and near-field heat transfer between plates, spheres and cylinders.",
    )
    parser.add_argument("command", nargs="?", choices=[c.value for c in Command],
                        help="Operation to run (may also come from the job file)")
    parser.add_argument("--config", help="Job file with key=value pairs; flags override its values")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", type=str.upper, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging verbosity (default from LOG_LEVEL)")

    materials = parser.add_argument_group("materials")
    materials.add_argument("--material", help="Body material: built-in name, constant:<re>,<im> or CSV path")
    materials.add_argument("--material-sphere", help="Sphere material")
    materials.add_argument("--material-plate", help="Plate material")
    materials.add_argument("--material-1", help="Material of the first plate")
    materials.add_argument("--material-2", help="Material of the second plate")
    materials.add_argument("--mu", help="Sphere permeability as re,im (default 1,0)")

    geometry = parser.add_argument_group("geometry")
    geometry.add_argument("--radius", help="Sphere or cylinder radius in m")
    geometry.add_argument("--gap", help="Surface-to-surface separation d in m")
    geometry.add_argument("--sweep-d", help="Gap sweep start:stop:count:lin|log")
    geometry.add_argument("--sweep-radius", help="Radius sweep start:stop:count:lin|log")

    temperatures = parser.add_argument_group("temperatures")
    temperatures.add_argument("--temperature", help="Body temperature in K (radiate-*)")
    temperatures.add_argument("--t-plate", help="Plate temperature in K")
    temperatures.add_argument("--t-sphere", help="Sphere temperature in K")
    temperatures.add_argument("--t1", help="Temperature of the first plate in K")
    temperatures.add_argument("--t2", help="Temperature of the second plate in K")
    temperatures.add_argument("--sweep-temperature",
                              help="Sweep of the emitter temperature start:stop:count:lin|log")

    options = parser.add_argument_group("numerics")
    options.add_argument("--reflections", help="one | full")
    options.add_argument("--l-max", help="Multipole order N, or auto")
    options.add_argument("--tol", help="Relative tolerance")
    options.add_argument("--solver", help="lu | neumann")
    options.add_argument("--divergent-only", action="store_const", const="true",
                         help="Keep only the evanescent TM channel")

    output = parser.add_argument_group("output")
    output.add_argument("--output", help="Output path (default stdout)")
    output.add_argument("--format", help="csv | json")
    output.add_argument("--jobs", help=f"Concurrent grid points (1..{get_max_jobs()})")
    return parser


# Keys accepted in job files: every flag except the driver options
JOB_FILE_KEYS = {"command"} | {
    _flag(name)[2:] for name in MATERIAL_FIELDS + LENGTH_FIELDS + TEMPERATURE_FIELDS + COMMON + (
        "mu", "sweep_d", "sweep_radius", "sweep_temperature", "reflections", "l_max", "tol", "solver",
        "divergent_only")
}


def parse_sweep(text: str, name: str = "sweep") -> SweepRange:
    """``start:stop:count[:lin|log]`` -> SweepRange."""
    parts = [p.strip() for p in text.split(":")]
    if len(parts) not in (3, 4):
        raise UsageError(f"{_flag(name)}: expected start:stop:count:lin|log, got {text!r}")
    try:
        return SweepRange(
            start=float(parts[0]),
            stop=float(parts[1]),
            count=int(parts[2]),
            spacing=Spacing(parts[3].lower()) if len(parts) == 4 else Spacing.LIN,
        )
    except (ValueError, ValidationError) as exc:
        raise UsageError(f"{_flag(name)}: invalid sweep {text!r} ({exc})") from None


def _parse_float(name: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"{_flag(name)}: expected a number, got {text!r}") from None


def _parse_choice(name: str, text: str, enum):
    try:
        return enum(text.strip().lower())
    except ValueError:
        allowed = ", ".join(e.value for e in enum)
        raise UsageError(f"{_flag(name)}: expected one of {allowed}, got {text!r}") from None


def _parse_bool(name: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"{_flag(name)}: expected true or false, got {text!r}")


def _convert(name: str, text: str) -> Dict[str, Any]:
    """Turn one raw flag value into JobSpec fields."""
    if name in MATERIAL_FIELDS or name == "output":
        return {name: text}
    if name in LENGTH_FIELDS:
        value = _parse_float(name, text)
        if not value > 0:
            raise UsageError(f"{_flag(name)} must be positive, got {text}")
        return {name: value}
    if name in TEMPERATURE_FIELDS:
        value = _parse_float(name, text)
        if not value >= 0:
            raise UsageError(f"{_flag(name)} must be non-negative, got {text}")
        return {name: value}
    if name == "tol":
        value = _parse_float(name, text)
        if not value > 0:
            raise UsageError(f"--tol must be positive, got {text}")
        return {name: value}
    if name == "mu":
        try:
            mu = parse_complex_pair(text)
        except ValueError as exc:
            raise UsageError(f"--mu: {exc}") from None
        return {"mu_re": mu.real, "mu_im": mu.imag}
    if name.startswith("sweep_"):
        return {name: parse_sweep(text, name)}
    if name == "reflections":
        return {name: _parse_choice(name, text, Reflections)}
    if name == "solver":
        return {name: _parse_choice(name, text, Solver)}
    if name == "format":
        return {name: _parse_choice(name, text, OutputFormat)}
    if name == "divergent_only":
        return {name: _parse_bool(name, text)}
    if name == "l_max":
        if text.strip().lower() == "auto":
            return {name: None}
        try:
            l_max = int(text)
        except ValueError:
            raise UsageError(f"--l-max: expected an integer or auto, got {text!r}") from None
        if l_max < 1 or l_max > settings.L_MAX_CAP:
            raise UsageError(f"--l-max must lie in [1, {settings.L_MAX_CAP}], got {l_max}")
        return {name: l_max}
    if name == "jobs":
        try:
            jobs = int(text)
        except ValueError:
            raise UsageError(f"--jobs: expected an integer, got {text!r}") from None
        if not 1 <= jobs <= get_max_jobs():
            raise UsageError(f"--jobs must lie in [1, {get_max_jobs()}], got {jobs}")
        return {name: jobs}
    raise UsageError(f"unknown parameter {_flag(name)}")


def _check_parameters(command: Command, given: Sequence[str]) -> None:
    required = REQUIRED[command]
    allowed = set(required) | set(OPTIONAL[command]) | set(COMMON)
    for sweep in ("sweep_d", "sweep_radius", "sweep_temperature"):
        if _swept_field(command, sweep) in required:
            allowed.add(sweep)

    for name in given:
        if name not in allowed:
            raise UsageError(f"parameter {_flag(name)} is not used by {command.value}")

    swept = {_swept_field(command, s): s for s in ("sweep_d", "sweep_radius", "sweep_temperature") if s in given}
    for name in required:
        if name in swept and name in given:
            raise UsageError(f"{_flag(name)} and {_flag(swept[name])} are mutually exclusive")
        if name not in given and name not in swept:
            raise UsageError(f"missing required parameter {_flag(name)} for {command.value}")


def _resolve_materials(job: JobSpec) -> Dict[str, DielectricModel]:
    resolved = {}
    for name in MATERIAL_FIELDS:
        reference = getattr(job, name)
        if reference is None:
            continue
        try:
            resolved[name] = resolve_material(reference)
        except DomainError as exc:
            raise UsageError(f"{_flag(name)}: {exc}") from None
    return resolved


def parse_and_validate(argv: Sequence[str], config: Optional[str] = None) -> JobSpec:
    """Build a validated JobSpec from ``argv`` and an optional job file.

    Flags override job-file values, which override the defaults.  Every
    referenced material is resolved here so a bad path fails before any
    computation starts.
    """
    args = build_parser().parse_args(list(argv))
    raw: Dict[str, str] = {}

    config_path = config or args.config
    if config_path:
        for key, text in load_job_file(config_path, known_keys=JOB_FILE_KEYS).items():
            raw[key.replace("-", "_")] = text
    for name, value in vars(args).items():
        if name in ("config", "log_level") or value is None:
            continue
        raw[name] = value

    command_text = raw.pop("command", None)
    if command_text is None:
        raise UsageError("missing command")
    command = _parse_choice("command", command_text, Command)

    _check_parameters(command, list(raw))

    fields: Dict[str, Any] = {"command": command, "jobs": max(1, min(settings.DEFAULT_JOBS, get_max_jobs()))}
    for name, text in raw.items():
        fields.update(_convert(name, text))

    try:
        job = JobSpec(**fields)
    except ValidationError as exc:
        raise UsageError(f"invalid job: {exc}") from None

    _resolve_materials(job)
    _logger.debug(f"Validated job {job.command.value} with sweeps {job.sweep_variables() or 'none'}")
    return job


# ---------------------------------------------------------------------------- #
# Grid evaluation                                                              #
# ---------------------------------------------------------------------------- #

def sweep_points(job: JobSpec) -> List[Dict[str, float]]:
    """Cartesian grid over the sweeps in d, R, T order; a single empty point without sweeps."""
    axes = []
    for variable, sweep in (("d", job.sweep_d), ("R", job.sweep_radius), ("T", job.sweep_temperature)):
        if sweep is not None:
            axes.append([(variable, value) for value in sweep.values()])
    return [dict(combination) for combination in itertools.product(*axes)]


def result_row(result) -> Dict[str, Any]:
    """The per-point output columns of an emission or transfer result."""
    row: Dict[str, Any] = dict.fromkeys(RESULT_COLUMNS)
    row["power"] = result.power
    row["normalized"] = result.normalized
    if isinstance(result, EmissionResult):
        row["pol_E"] = result.by_polarization.E
        row["pol_M"] = result.by_polarization.M
        row["l_max_used"] = result.truncation.orders or None
        row["est_error"] = max(result.truncation.error, result.quadrature_error)
        return row

    if result.by_polarization is not None:
        row["pol_E"] = result.by_polarization.E
        row["pol_M"] = result.by_polarization.M
    if result.channels is not None:
        row["channel_prop"] = result.channels.propagating
        row["channel_evan"] = result.channels.evanescent
    row["l_max_used"] = result.convergence.l_max_used
    row["est_error"] = max(result.convergence.truncation_error, result.convergence.quadrature_error)
    return row


def evaluate_point(job: JobSpec, materials: Dict[str, DielectricModel], point: Dict[str, float]) -> Dict[str, Any]:
    """Run the job's operation at one grid point."""
    R = point.get("R", job.radius)
    d = point.get("d", job.gap)
    temperatures = {name: getattr(job, name) for name in TEMPERATURE_FIELDS}
    if "T" in point:
        temperatures[TEMPERATURE_FIELD[job.command]] = point["T"]
    T = temperatures["temperature"]

    command = job.command
    if command == Command.RADIATE_PLATE:
        result = radiate_plate(materials["material"], T, tol=job.tol)
    elif command == Command.RADIATE_SPHERE:
        result = radiate_sphere(materials["material"], job.mu, R, T, tol=job.tol)
    elif command == Command.RADIATE_CYLINDER:
        result = radiate_cylinder(materials["material"], R, T, tol=job.tol)
    elif command == Command.TRANSFER_PLATES:
        result = plate_plate_flux(materials["material_1"], materials["material_2"], d,
                                  temperatures["t1"], temperatures["t2"], tol=job.tol,
                                  reflections=job.reflections, divergent_only=job.divergent_only)
    elif command == Command.TRANSFER_SPHERE_PLATE:
        result = sphere_plate_transfer(materials["material_sphere"], materials["material_plate"], job.mu, R, d,
                                       temperatures["t_plate"], temperatures["t_sphere"],
                                       reflections=job.reflections, l_max=job.l_max, tol=job.tol,
                                       solver=job.solver, divergent_only=job.divergent_only)
    elif command == Command.PTA:
        result = pta_transfer(materials["material_sphere"], materials["material_plate"], R, d,
                              temperatures["t_plate"], temperatures["t_sphere"], tol=job.tol,
                              divergent_only=job.divergent_only, reflections=job.reflections)
    else:
        result = sphere_plate_large_d(materials["material_sphere"], materials["material_plate"], job.mu, R,
                                      temperatures["t_plate"], tol=job.tol)
    return result_row(result)


# ---------------------------------------------------------------------------- #
# Async sweep executor                                                         #
# ---------------------------------------------------------------------------- #

async def _sweep_worker(worker_id: int, queue: asyncio.Queue, executor: ThreadPoolExecutor,
                        evaluate: Callable[[Dict[str, float]], Dict[str, Any]],
                        finished: Dict[int, Dict[str, Any]], failures: Dict[int, BaseException],
                        flush: Callable[[], None]) -> None:
    loop = asyncio.get_running_loop()
    while True:
        try:
            index, point = queue.get_nowait()
        except asyncio.QueueEmpty:
            return
        try:
            if failures and index > min(failures):
                continue
            _logger.debug(f"Worker {worker_id} evaluating point {index}: {point}")
            try:
                finished[index] = await loop.run_in_executor(executor, evaluate, point)
            except Exception as exc:
                _logger.warning(f"Worker {worker_id} failed at point {point}: {exc}")
                failures[index] = exc
            else:
                flush()
        finally:
            queue.task_done()


async def run_sweep(points: Sequence[Dict[str, float]], evaluate: Callable[[Dict[str, float]], Dict[str, Any]],
                    emit: Callable[[Dict[str, float], Dict[str, Any]], None], jobs: int = 1) -> int:
    """Evaluate ``points`` with up to ``jobs`` in flight and emit rows in grid order.

    Returns the number of rows emitted.  On failure every row before the
    failing point is emitted, later points are abandoned and
    ComputationError names the failing point.
    """
    queue: asyncio.Queue = asyncio.Queue()
    for index, point in enumerate(points):
        queue.put_nowait((index, point))

    finished: Dict[int, Dict[str, Any]] = {}
    failures: Dict[int, BaseException] = {}
    emitted = 0

    def flush() -> None:
        nonlocal emitted
        while emitted in finished and not (failures and emitted >= min(failures)):
            emit(points[emitted], finished.pop(emitted))
            emitted += 1

    workers = max(1, min(jobs, len(points) or 1))
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="sweep") as executor:
        await asyncio.gather(*(
            _sweep_worker(i, queue, executor, evaluate, finished, failures, flush) for i in range(workers)
        ))

    flush()
    if failures:
        index = min(failures)
        raise ComputationError(dict(points[index]), failures[index])
    return emitted


# ---------------------------------------------------------------------------- #
# Output                                                                       #
# ---------------------------------------------------------------------------- #

def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvRowWriter:
    """Streams rows as CSV; the header is written up front."""

    def __init__(self, stream: TextIO, variables: Sequence[str]):
        self._stream = stream
        self._variables = list(variables)
        self._writer = csv.writer(stream, lineterminator="\n")
        self._writer.writerow(self._variables + list(RESULT_COLUMNS))

    def write(self, point: Dict[str, float], row: Dict[str, Any]) -> None:
        cells = [_cell(point[v]) for v in self._variables] + [_cell(row[c]) for c in RESULT_COLUMNS]
        self._writer.writerow(cells)
        self._stream.flush()

    def close(self) -> None:
        self._stream.flush()


class JsonRowWriter:
    """Collects rows and writes one document with the job echo and version."""

    def __init__(self, stream: TextIO, job: JobSpec):
        self._stream = stream
        self._job = job
        self._rows: List[Dict[str, Any]] = []

    def write(self, point: Dict[str, float], row: Dict[str, Any]) -> None:
        self._rows.append({**point, **row})

    def close(self) -> None:
        document = {"version": __version__, "job": self._job.model_dump(mode="json"), "rows": self._rows}
        json.dump(document, self._stream, indent=2)
        self._stream.write("\n")
        self._stream.flush()


@contextlib.contextmanager
def _open_output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    try:
        handle = open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputOutputError(f"cannot open output {path}: {exc}") from exc
    with handle:
        yield handle


def execute(job: JobSpec) -> int:
    """Run ``job`` over its sweep grid and write the rows; returns the exit code."""
    materials = _resolve_materials(job)
    points = sweep_points(job)
    evaluate = partial(evaluate_point, job, materials)
    _logger.info(f"Running {job.command.value} over {len(points)} grid point(s) with {job.jobs} job(s)")

    with _open_output(job.output) as stream:
        if job.format == OutputFormat.JSON:
            writer = JsonRowWriter(stream, job)
        else:
            writer = CsvRowWriter(stream, job.sweep_variables())
        try:
            rows = asyncio.run(run_sweep(points, evaluate, writer.write, job.jobs))
        except ComputationError as exc:
            _logger.error(f"{exc}", exc_info=exc.cause)
            return EXIT_COMPUTATION
        finally:
            writer.close()

    _logger.info(f"Wrote {rows} row(s)")
    return EXIT_OK


# ---------------------------------------------------------------------------- #
# Entry-point                                                                  #
# ---------------------------------------------------------------------------- #

def configure_logging(level: Optional[str] = None) -> None:
    name = (level or settings.LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO), format=LOG_FORMAT, stream=sys.stderr,
                        force=True)


def _peek_log_level(argv: Sequence[str]) -> Optional[str]:
    peek = argparse.ArgumentParser(add_help=False)
    peek.add_argument("--log-level")
    known, _ = peek.parse_known_args(list(argv))
    return known.log_level


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    configure_logging(_peek_log_level(argv))
    try:
        job = parse_and_validate(argv)
        return execute(job)
    except ToolkitError as exc:
        _logger.error(f"{exc}")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
