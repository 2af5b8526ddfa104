"""Named parameter sets for the two switching scenarios and an equilibrium check.

The bath coupling ``gamma_th`` is not reported with the figures.  The presets
use ``gamma_th = 2e-3 g``, which puts the outer-cavity linewidth below the
dispersive shift ``g**2/delta`` so that the atomic state can steer the current.
"""
from __future__ import annotations

from .errors import ConfigurationError
from .model import SwitchParams

PRESET_GAMMA_TH = 2e-3

_common = dict(g=1.0, delta=75.0, gamma0=0.5, gamma1=0.5, gamma=1.0, gamma_th=PRESET_GAMMA_TH, J=1e-3)

PRESETS: dict[str, SwitchParams] = {
    "fig2_laser_on": SwitchParams(**_common, omega0=1.0, omega1=0.005, n1=0.005, n2=1e-6),
    "fig2_laser_off": SwitchParams(**_common, omega0=0.0, omega1=0.0, n1=0.005, n2=1e-6),
    "fig3_laser_on": SwitchParams(**_common, omega0=1.0, omega1=0.0025, n1=0.1, n2=0.0),
    "fig3_laser_off": SwitchParams(**_common, omega0=0.0, omega1=0.0, n1=0.1, n2=0.0),
    "equilibrium": SwitchParams(**_common, omega0=0.0, omega1=0.0, n1=0.005, n2=0.005),
}


def preset(name: str) -> SwitchParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
