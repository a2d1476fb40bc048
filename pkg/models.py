"""Pydantic models for the public results and the command-line job.

Results carry plain floats and lists so they serialise to JSON without
custom encoders; numpy arrays stay inside the numerical modules.
"""

from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator


class Polarization(str, Enum):
    """Field polarization.

    For plates E is transverse-electric (s) and M transverse-magnetic (p);
    for cylinders E is the wave with E_z != 0 (parallel to the axis).
    """
    E = "E"
    M = "M"


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"


class Reflections(str, Enum):
    ONE = "one"
    FULL = "full"


class Solver(str, Enum):
    LU = "lu"
    NEUMANN = "neumann"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class Spacing(str, Enum):
    LIN = "lin"
    LOG = "log"


class Command(str, Enum):
    RADIATE_PLATE = "radiate-plate"
    RADIATE_SPHERE = "radiate-sphere"
    RADIATE_CYLINDER = "radiate-cylinder"
    TRANSFER_PLATES = "transfer-plates"
    TRANSFER_SPHERE_PLATE = "transfer-sphere-plate"
    PTA = "pta"
    LARGE_D = "large-d"


# --------------------------------------------------------------------------- #
# Mode label                                                                   #
# --------------------------------------------------------------------------- #

class SphericalMode(BaseModel):
    model_config = {"frozen": True}

    l: int = Field(..., ge=1)
    m: int
    polarization: Polarization

    @model_validator(mode="after")
    def _m_within_l(self):
        if abs(self.m) > self.l:
            raise ValueError(f"|m|={abs(self.m)} exceeds l={self.l}")
        return self


# --------------------------------------------------------------------------- #
# Results                                                                      #
# --------------------------------------------------------------------------- #

class SpectralCurve(BaseModel):
    """Spectral density dP/domega sampled at the quadrature nodes of the final pass.

    ``weights`` are the omega-quadrature weights, so ``total()`` reproduces
    the integrated power.
    """

    omega: List[float] = Field(default_factory=list)
    density: List[float] = Field(default_factory=list)
    weights: List[float] = Field(default_factory=list)

    def total(self) -> float:
        return float(np.dot(self.weights, self.density)) if self.density else 0.0

    def peak_omega(self) -> Optional[float]:
        if not self.density:
            return None
        return self.omega[int(np.argmax(self.density))]


class PolarizationSplit(BaseModel):
    E: float = 0.0
    M: float = 0.0

    def total(self) -> float:
        return self.E + self.M

    def share(self, polarization: Polarization) -> float:
        total = self.total()
        if total == 0:
            return 0.0
        return (self.E if polarization == Polarization.E else self.M) / total


class ChannelSplit(BaseModel):
    propagating: float = 0.0
    evanescent: float = 0.0

    def total(self) -> float:
        return self.propagating + self.evanescent


class TruncationInfo(BaseModel):
    orders: int = Field(0, description="Multipole orders l_max (or n_max) used at the hardest frequency.")
    error: float = Field(0.0, description="Estimated relative truncation error.")


class ConvergenceInfo(BaseModel):
    l_max_used: Optional[int] = None
    reflections: Optional[Reflections] = None
    truncation_error: float = 0.0
    quadrature_error: float = 0.0
    condition: Optional[float] = Field(None, description="Largest condition estimate of the multiple-scattering solve.")


class EmissionResult(BaseModel):
    """Heat radiated by an isolated body.

    ``power`` is W/m^2 for plates, W for spheres and W/m for cylinders.
    ``normalized`` divides by sigma*T^4*A with A = 1, 4*pi*R^2 and 2*pi*R.
    """

    power: float
    normalized: float
    by_polarization: PolarizationSplit
    spectrum: SpectralCurve
    truncation: TruncationInfo = Field(default_factory=TruncationInfo)
    quadrature_error: float = 0.0


class TransferResult(BaseModel):
    """Net heat exchanged between two bodies.

    ``power`` is W/m^2 for plate-plate and W (absorbed by the sphere) otherwise.
    Splits are absent where the computation has no such decomposition.
    """

    power: float
    normalized: Optional[float] = None
    spectrum: SpectralCurve = Field(default_factory=SpectralCurve)
    channels: Optional[ChannelSplit] = None
    by_polarization: Optional[PolarizationSplit] = None
    convergence: ConvergenceInfo = Field(default_factory=ConvergenceInfo)


# --------------------------------------------------------------------------- #
# Command-line job                                                             #
# --------------------------------------------------------------------------- #

class SweepRange(BaseModel):
    model_config = {"frozen": True}

    start: float = Field(..., gt=0)
    stop: float = Field(..., gt=0)
    count: int = Field(..., ge=1)
    spacing: Spacing = Spacing.LIN

    def values(self) -> List[float]:
        if self.count == 1:
            return [self.start]
        if self.spacing == Spacing.LOG:
            grid = np.geomspace(self.start, self.stop, self.count)
        else:
            grid = np.linspace(self.start, self.stop, self.count)
        return [float(v) for v in grid]

    def as_text(self) -> str:
        return f"{self.start!r}:{self.stop!r}:{self.count}:{self.spacing.value}"


class JobSpec(BaseModel):
    """A fully validated unit of work for the command-line front end."""

    model_config = {"frozen": True}

    command: Command

    # materials (registry names or file paths)
    material: Optional[str] = None
    material_sphere: Optional[str] = None
    material_plate: Optional[str] = None
    material_1: Optional[str] = None
    material_2: Optional[str] = None
    mu_re: float = 1.0
    mu_im: float = 0.0

    # geometry
    radius: Optional[float] = None
    gap: Optional[float] = None

    # temperatures
    temperature: Optional[float] = None
    t_plate: Optional[float] = None
    t_sphere: Optional[float] = None
    t1: Optional[float] = None
    t2: Optional[float] = None

    # sweeps
    sweep_d: Optional[SweepRange] = None
    sweep_radius: Optional[SweepRange] = None
    sweep_temperature: Optional[SweepRange] = None

    # options
    reflections: Reflections = Reflections.FULL
    l_max: Optional[int] = Field(None, description="Fixed multipole order; None selects the automatic rule.")
    tol: Optional[float] = None
    solver: Solver = Solver.LU
    divergent_only: bool = False

    # output
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV
    jobs: int = 1

    @property
    def mu(self) -> complex:
        return complex(self.mu_re, self.mu_im)

    def sweep_variables(self) -> List[str]:
        names = []
        if self.sweep_d is not None:
            names.append("d")
        if self.sweep_radius is not None:
            names.append("R")
        if self.sweep_temperature is not None:
            names.append("T")
        return names
