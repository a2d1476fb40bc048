"""Flat ``key=value`` job files for the command-line front end.

A job file holds the long flag names without their leading dashes, one per
line, for example::

    command=transfer-sphere-plate
    material-sphere=sio2-like
    material-plate=sio2-like
    radius=5e-6
    sweep-d=1e-7:1e-5:20:log
    t-plate=300
    t-sphere=0

Values are parsed by ``dotenv.dotenv_values`` (comments, quoting and
``export`` prefixes behave as in a ``.env`` file).  Flags given on the
command line override file values.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, TextIO

from dotenv import dotenv_values

from errors import InputOutputError, UsageError
from models import JobSpec

_logger = logging.getLogger(__name__)


def _normalise_key(key: str) -> str:
    return key.strip().lower().replace("_", "-")


def load_job_file(path: str, known_keys: Optional[Iterable[str]] = None) -> Dict[str, str]:
    """Read a job file into ``{flag-name: text}``.

    Keys are normalised to dashed lower case; with ``known_keys`` any other
    key is a usage error naming it.  Keys without a value are ignored.
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise InputOutputError(f"job file not found: {path}")
    try:
        raw = dotenv_values(file_path, encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputOutputError(f"cannot read job file {path}: {exc}") from exc

    known = set(known_keys) if known_keys is not None else None
    values: Dict[str, str] = {}
    for key, value in raw.items():
        name = _normalise_key(key)
        if known is not None and name not in known:
            raise UsageError(f"unknown key {key!r} in job file {path}")
        if value is None or value.strip() == "":
            continue
        values[name] = value.strip()

    _logger.debug(f"Loaded {len(values)} keys from job file {path}")
    return values


def job_to_pairs(job: JobSpec) -> Dict[str, str]:
    """The non-default settings of ``job`` as job-file pairs."""
    pairs: Dict[str, str] = {}
    defaults = JobSpec(command=job.command)
    if job.mu != defaults.mu:
        pairs["mu"] = f"{job.mu_re!r},{job.mu_im!r}"
    for name, value in job:
        if name in ("mu_re", "mu_im"):
            continue
        if value is None or (name != "command" and value == getattr(defaults, name)):
            continue
        if hasattr(value, "as_text"):
            text = value.as_text()
        elif hasattr(value, "value"):
            text = str(value.value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        pairs[_normalise_key(name)] = text
    return pairs


def write_job_file(job: JobSpec, stream: TextIO) -> None:
    """Write ``job`` in the format read by :func:`load_job_file`."""
    for key, text in job_to_pairs(job).items():
        stream.write(f"{key}={text}\n")
