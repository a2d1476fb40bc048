"""Dielectric function models and material-file ingestion.

Four immutable model kinds share the ``kind`` discriminator:

* ``constant``  - frequency independent eps
* ``drude``     - eps_inf - omega_p^2 / (omega^2 + i gamma omega)
* ``lorentz``   - eps_inf + sum_j s_j w_j^2 / (w_j^2 - omega^2 - i g_j omega)
* ``tabulated`` - linear interpolation of Re eps and Im eps on a strictly
  increasing omega grid, no extrapolation

Passivity (Im eps >= 0) is checked when a model is built: every row of a
tabulated model, and a 64-point log grid on [1e12, 1e16] rad/s for the
analytic kinds.  Complex numbers are stored as (re, im) float pairs so the
models stay JSON-serialisable.
"""

import logging
import math
from pathlib import Path
from typing import Annotated, BinaryIO, Iterable, List, Literal, TextIO, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from errors import (
    InputOutputError,
    MaterialFormatError,
    MonotonicityError,
    OutOfRangeError,
    PassivityError,
    DomainError,
)
from physics import C

_logger = logging.getLogger(__name__)

CSV_HEADER = "omega_rad_s,eps_re,eps_im"

# Frequencies at which analytic models are checked for passivity.
PASSIVITY_GRID = np.geomspace(1e12, 1e16, 64)

# Tolerated negative Im eps from round-off in analytic formulas.
_PASSIVITY_SLACK = 1e-12


class _Model(BaseModel):
    model_config = {"frozen": True}

    def __init__(self, **data):
        super().__init__(**data)
        self._check_passive()

    def epsilon(self, omega):
        raise NotImplementedError

    def _check_passive(self) -> None:
        eps = np.asarray(self.epsilon(PASSIVITY_GRID))
        bad = np.nonzero(eps.imag < -_PASSIVITY_SLACK * np.maximum(1.0, np.abs(eps)))[0]
        if bad.size:
            w = float(PASSIVITY_GRID[bad[0]])
            raise PassivityError(f"{self.kind} model has Im eps = {eps.imag[bad[0]]:.3g} < 0 at omega={w:g}", omega=w)


class ConstantModel(_Model):
    kind: Literal["constant"] = "constant"
    eps_re: float
    eps_im: float = 0.0

    def epsilon(self, omega):
        value = complex(self.eps_re, self.eps_im)
        if np.ndim(omega) == 0:
            return value
        return np.full(np.shape(omega), value, dtype=complex)


class DrudeModel(_Model):
    kind: Literal["drude"] = "drude"
    plasma_frequency: float = Field(..., gt=0)
    damping: float = Field(..., ge=0)
    eps_inf: float = 1.0

    def epsilon(self, omega):
        w = np.asarray(omega, dtype=float)
        eps = self.eps_inf - self.plasma_frequency**2 / (w * w + 1j * self.damping * w)
        return complex(eps) if eps.ndim == 0 else eps


class LorentzOscillator(BaseModel):
    model_config = {"frozen": True}

    strength: float = Field(..., ge=0)
    resonance: float = Field(..., gt=0)
    damping: float = Field(..., ge=0)


class LorentzModel(_Model):
    kind: Literal["lorentz"] = "lorentz"
    eps_inf: float = 1.0
    oscillators: Tuple[LorentzOscillator, ...] = ()

    def epsilon(self, omega):
        w = np.asarray(omega, dtype=float)
        eps = np.full(w.shape, self.eps_inf, dtype=complex)
        for osc in self.oscillators:
            w0sq = osc.resonance**2
            eps = eps + osc.strength * w0sq / (w0sq - w * w - 1j * osc.damping * w)
        return complex(eps) if eps.ndim == 0 else eps


class TabulatedModel(_Model):
    kind: Literal["tabulated"] = "tabulated"
    omega: Tuple[float, ...]
    eps_re: Tuple[float, ...]
    eps_im: Tuple[float, ...]

    def _check_passive(self) -> None:
        n = len(self.omega)
        if n < 2:
            raise MaterialFormatError(f"tabulated model needs at least 2 points, got {n}")
        if len(self.eps_re) != n or len(self.eps_im) != n:
            raise MaterialFormatError("tabulated columns have different lengths")
        for i in range(1, n):
            if not self.omega[i] > self.omega[i - 1]:
                raise MonotonicityError(f"omega not strictly increasing at index {i}: {self.omega[i]!r}")
        for w, im in zip(self.omega, self.eps_im):
            if im < 0:
                raise PassivityError(f"Im eps = {im!r} < 0 at omega={w!r}", omega=w)

    @property
    def bounds(self) -> Tuple[float, float]:
        return self.omega[0], self.omega[-1]

    def epsilon(self, omega):
        w = np.asarray(omega, dtype=float)
        lower, upper = self.bounds
        if w.size and (w.min() < lower or w.max() > upper):
            offending = float(w.min()) if w.min() < lower else float(w.max())
            raise OutOfRangeError(offending, lower, upper)
        re = np.interp(w, self.omega, self.eps_re)
        im = np.interp(w, self.omega, self.eps_im)
        eps = re + 1j * im
        return complex(eps) if eps.ndim == 0 else eps


DielectricModel = Annotated[
    Union[ConstantModel, DrudeModel, LorentzModel, TabulatedModel],
    Field(discriminator="kind"),
]


class MagneticPermeability(BaseModel):
    """Frequency-independent complex permeability of a sphere."""

    model_config = {"frozen": True}

    mu_re: float = 1.0
    mu_im: float = 0.0

    def __init__(self, **data):
        super().__init__(**data)
        if self.mu_im < 0:
            raise PassivityError(f"Im mu = {self.mu_im!r} < 0")

    @property
    def mu(self) -> complex:
        return complex(self.mu_re, self.mu_im)

    @classmethod
    def of(cls, mu: complex) -> "MagneticPermeability":
        mu = complex(mu)
        return cls(mu_re=mu.real, mu_im=mu.imag)


# --------------------------------------------------------------------------- #
# Operations                                                                   #
# --------------------------------------------------------------------------- #

def permittivity(model: DielectricModel, omega):
    """eps(omega) for a scalar or an array of angular frequencies."""
    if np.any(np.asarray(omega) <= 0):
        raise DomainError("angular frequency must be positive")
    return model.epsilon(omega)


def skin_depth(model: DielectricModel, omega: float) -> float:
    """Penetration depth c / (Im sqrt(eps) omega); +inf for a lossless medium."""
    eps = complex(permittivity(model, omega))
    n = np.sqrt(eps)
    if n.imag < 0:
        n = -n
    if n.imag == 0:
        return math.inf
    return C / (n.imag * omega)


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MaterialFormatError(f"cannot parse {column} value {text.strip()!r}", line) from None
    if not math.isfinite(value):
        raise MaterialFormatError(f"non-finite {column} value {text.strip()!r}", line)
    return value


def _lines(source: Union[BinaryIO, TextIO, bytes, str]) -> Iterable[str]:
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, str):
        return source.splitlines()
    else:
        data = source.read()
        if isinstance(data, str):
            return data.splitlines()
    try:
        return data.decode("utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise MaterialFormatError(f"material file is not UTF-8: {exc}") from None


def load_tabulated(source: Union[BinaryIO, TextIO, bytes, str]) -> TabulatedModel:
    """Parse the material CSV format into a validated tabulated model.

    The first non-comment line must be the header ``omega_rad_s,eps_re,eps_im``.
    Errors name the 1-based line number of the offending row.
    """
    omega: List[float] = []
    eps_re: List[float] = []
    eps_im: List[float] = []
    header_seen = False

    for number, raw in enumerate(_lines(source), start=1):
        line = raw.lstrip("\ufeff").strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line.replace(" ", "") != CSV_HEADER:
                raise MaterialFormatError(f"expected header {CSV_HEADER!r}, got {line!r}", number)
            header_seen = True
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise MaterialFormatError(f"expected 3 columns, got {len(fields)}", number)
        w = _parse_float(fields[0], number, "omega_rad_s")
        re = _parse_float(fields[1], number, "eps_re")
        im = _parse_float(fields[2], number, "eps_im")
        if w <= 0:
            raise MaterialFormatError(f"omega must be positive, got {w!r}", number)
        if im < 0:
            raise PassivityError(f"Im eps = {im!r} < 0 at omega={w!r}", omega=w, line=number)
        if omega and w <= omega[-1]:
            raise MonotonicityError(f"omega {w!r} does not increase past {omega[-1]!r}", number)
        omega.append(w)
        eps_re.append(re)
        eps_im.append(im)

    if not header_seen:
        raise MaterialFormatError(f"missing header {CSV_HEADER!r}")
    if len(omega) < 2:
        raise MaterialFormatError(f"need at least 2 data rows, got {len(omega)}")

    _logger.debug(f"Loaded tabulated material with {len(omega)} points on [{omega[0]:g}, {omega[-1]:g}] rad/s")
    return TabulatedModel(omega=tuple(omega), eps_re=tuple(eps_re), eps_im=tuple(eps_im))


def write_tabulated(model: TabulatedModel, stream: TextIO) -> None:
    """Write ``model`` in the format read by :func:`load_tabulated`."""
    stream.write(CSV_HEADER + "\n")
    for w, re, im in zip(model.omega, model.eps_re, model.eps_im):
        stream.write(f"{w!r},{re!r},{im!r}\n")


# --------------------------------------------------------------------------- #
# Built-in registry                                                            #
# --------------------------------------------------------------------------- #

# Two phonon bands near 0.86e14 and 2.03e14 rad/s; qualitative stand-in for silica.
SIO2_LIKE = LorentzModel(
    eps_inf=2.03,
    oscillators=(
        LorentzOscillator(strength=0.99, resonance=0.86e14, damping=4.0e12),
        LorentzOscillator(strength=0.67, resonance=2.03e14, damping=1.3e13),
    ),
)

GOLD_DRUDE = DrudeModel(plasma_frequency=1.37e16, damping=4.08e13)

VACUUM = ConstantModel(eps_re=1.0, eps_im=0.0)

BUILTIN_MATERIALS = {
    "vacuum": VACUUM,
    "sio2-like": SIO2_LIKE,
    "gold-drude": GOLD_DRUDE,
}


def parse_complex_pair(text: str) -> complex:
    """Parse ``"re,im"`` (or a lone ``"re"``) into a complex number."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (1, 2) or not all(parts):
        raise ValueError(f"expected 're,im', got {text!r}")
    re = float(parts[0])
    im = float(parts[1]) if len(parts) == 2 else 0.0
    return complex(re, im)


def resolve_material(reference: str) -> DielectricModel:
    """Return a built-in model by name, ``constant:<re>,<im>``, or load a CSV file path."""
    key = reference.strip()
    if key in BUILTIN_MATERIALS:
        return BUILTIN_MATERIALS[key]
    if key.startswith("constant:"):
        try:
            eps = parse_complex_pair(key[len("constant:"):])
        except ValueError as exc:
            raise DomainError(f"bad constant material {reference!r}: {exc}") from None
        return ConstantModel(eps_re=eps.real, eps_im=eps.imag)

    path = Path(key)
    if not path.is_file():
        raise InputOutputError(f"material file not found: {reference}")
    try:
        with path.open("rb") as handle:
            return load_tabulated(handle)
    except OSError as exc:
        raise InputOutputError(f"cannot read material file {reference}: {exc}") from exc
