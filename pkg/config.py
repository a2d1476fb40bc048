"""Runtime configuration.

Every numerical knob of the toolkit (tolerances, truncation limits, planar
quadrature density, worker counts) is exposed as an environment variable so
that a sweep can be re-run with different accuracy settings without touching
code.  We rely on *pydantic* for parsing and type-conversion of env vars.
Physical constants are deliberately absent: they live in ``physics.py`` and
are fixed CODATA values.

Usage
-----
```python
from config import settings
print(settings.DEFAULT_TOL)
```
"""

from pydantic_settings import BaseSettings
from pydantic import Field
from dotenv import load_dotenv

load_dotenv()

__version__ = "1.0.0"


class Settings(BaseSettings):
    """Strongly-typed runtime settings."""

    # ------------------------------------------------------------------ #
    # Quadrature                                                         #
    # ------------------------------------------------------------------ #
    DEFAULT_TOL: float = Field(
        1e-6,
        description="Relative tolerance used by every physics operation unless overridden.",
    )
    MAX_SUBINTERVALS: int = Field(
        2000,
        description="Subinterval cap of the adaptive Gauss-Kronrod integrator.",
    )
    X_MIN: float = Field(1e-4, description="Lower end of the reduced frequency x = hbar*omega/kT.")
    X_MAX: float = Field(40.0, description="Upper end of the reduced frequency x = hbar*omega/kT.")

    # ------------------------------------------------------------------ #
    # Multipole truncation                                               #
    # ------------------------------------------------------------------ #
    TRUNCATION_MARGIN: int = Field(
        12,
        description="Orders added to ceil(omega*R/c) for the first truncation guess.",
    )
    L_MAX_CAP: int = Field(400, description="Hard cap on multipole orders.")
    AUTO_L_MAX_FLOOR: int = Field(
        20,
        description="Smallest l_max used by the automatic sphere-plate truncation.",
    )
    AUTO_L_MAX_CHANGE: float = Field(
        0.01,
        description="Relative change below which the automatic l_max escalation stops.",
    )

    # ------------------------------------------------------------------ #
    # Special functions                                                  #
    # ------------------------------------------------------------------ #
    BESSEL_MAX_DOUBLINGS: int = Field(
        8,
        description="How often the Miller starting order may be doubled before giving up.",
    )

    # ------------------------------------------------------------------ #
    # Planar quadrature for sphere-plate transfer                        #
    # ------------------------------------------------------------------ #
    EVANESCENT_LAMBDA: float = Field(
        40.0,
        description="Evanescent cutoff kappa_max = omega/c + EVANESCENT_LAMBDA / d.",
    )
    PROPAGATING_PANELS: int = Field(4, description="Minimum number of propagating panels.")
    EVANESCENT_PANELS: int = Field(48, description="Number of evanescent panels.")
    NODES_PER_PANEL: int = Field(12, description="Gauss-Legendre nodes per panel.")

    # ------------------------------------------------------------------ #
    # Linear algebra                                                     #
    # ------------------------------------------------------------------ #
    MAX_CONDITION: float = Field(
        1e12,
        description="Condition number above which the multiple-scattering solve is rejected.",
    )
    NEUMANN_MAX_TERMS: int = Field(200, description="Term cap of the Neumann series solver.")

    # ------------------------------------------------------------------ #
    # Sweep execution                                                    #
    # ------------------------------------------------------------------ #
    DEFAULT_JOBS: int = Field(1, description="Concurrent grid points when --jobs is not given.")
    MAX_JOBS: int = Field(64, description="Upper bound accepted for --jobs.")

    # ------------------------------------------------------------------ #
    # Miscellaneous                                                      #
    # ------------------------------------------------------------------ #
    LOG_LEVEL: str = Field("INFO", description="Python log level.")

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"


# Singleton settings object used throughout the package
settings = Settings()

DEFAULT_TOL = settings.DEFAULT_TOL


def resolve_tol(tol: float | None) -> float:
    """Return ``tol`` or the configured default, rejecting non-positive values."""
    if tol is None:
        return settings.DEFAULT_TOL
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    return float(tol)


def get_max_jobs() -> int:
    """Upper bound on concurrently evaluated grid points."""
    return max(1, settings.MAX_JOBS)
