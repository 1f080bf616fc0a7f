"""Modal calculus for time-harmonic scattering in a PEC parallel-plate waveguide."""

__version__ = "0.1.0"

from .waveguide import (  # noqa: F401
    ConfigError,
    CutoffError,
    ModeIndex,
    OutgoingCoefficients,
    TangentialTrace,
    WaveguideConfig,
    axial_wavenumber,
)
