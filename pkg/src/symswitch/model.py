"""Hamiltonian and jump channels of the laser-driven atom pair in a cavity chain.

All energies and rates are in units of the atom-cavity coupling ``g``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import ConfigurationError, SpaceMismatchError
from .hilbert import (
    HilbertSpace,
    ModeSpec,
    Operator,
    annihilator,
    atomic_transition,
    build_space,
)

THERMAL_CONVENTIONS = ("standard", "verbatim_eq4")


class RegimeWarning(UserWarning):
    """Parameters outside the validity window of the adiabatic elimination."""


@dataclass(frozen=True)
class SwitchParams:
    g: float = 1.0
    omega0: float = 0.0
    omega1: float = 0.0
    delta: float = 75.0
    gamma0: float = 0.5
    gamma1: float = 0.5
    gamma_th: float = 1.0
    J: float = 1e-3
    n1: float = 0.005
    n2: float = 1e-6
    thermal_convention: str = "standard"
    gamma: float | None = None

    def __post_init__(self):
        if self.delta == 0:
            raise ConfigurationError("detuning delta must be nonzero")
        for name in ("gamma0", "gamma1", "gamma_th", "J", "n1", "n2"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.thermal_convention not in THERMAL_CONVENTIONS:
            raise ConfigurationError(
                f"thermal_convention must be one of {THERMAL_CONVENTIONS}, "
                f"got {self.thermal_convention!r}"
            )
        if self.gamma is not None and not math.isclose(
            self.gamma0 + self.gamma1, self.gamma, rel_tol=1e-12, abs_tol=1e-15
        ):
            raise ConfigurationError(
                f"gamma0 + gamma1 = {self.gamma0 + self.gamma1} != gamma = {self.gamma}"
            )

    def replace(self, **changes) -> "SwitchParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DerivedRates:
    gamma0_eff: float
    gamma1_eff: float
    g_eff: float
    delta_scalar: float
    chi: float


def derived_rates(p: SwitchParams) -> DerivedRates:
    """Effective couplings after eliminating the excited atomic level."""
    if p.delta == 0:
        raise ConfigurationError("detuning delta must be nonzero")
    lo = min(p.g, p.gamma0 + p.gamma1, p.omega0)
    hi = max(p.g, p.gamma0 + p.gamma1, p.omega0)
    if (p.omega1 > 0 and p.omega1 >= lo) or hi * 10 > abs(p.delta):
        warnings.warn(
            "parameters violate omega1 < g, Gamma, omega0 << delta; "
            "the effective four-level model may be inaccurate",
            RegimeWarning,
            stacklevel=2,
        )
    scale = p.omega0**2 / (4 * p.delta**2)
    return DerivedRates(
        gamma0_eff=p.gamma0 * scale,
        gamma1_eff=p.gamma1 * scale,
        g_eff=-p.omega0 * p.g / (math.sqrt(2) * p.delta),
        delta_scalar=-p.omega0**2 / (4 * p.delta),
        chi=-p.g**2 / p.delta,
    )


@dataclass(frozen=True)
class Channel:
    label: str
    op: Operator
    nu: int = 0


@dataclass(frozen=True)
class LindbladModel:
    space: HilbertSpace
    H: Operator
    channels: tuple[Channel, ...]
    params: SwitchParams | None = None

    def __post_init__(self):
        labels = [c.label for c in self.channels]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"duplicate channel labels in {labels}")
        for op in (self.H, *(c.op for c in self.channels)):
            if op.space_id != self.space.space_id:
                raise SpaceMismatchError("model operators must act on the model's space")
        if not self.H.is_hermitian(1e-12):
            raise ConfigurationError("Hamiltonian is not Hermitian")
        for c in self.channels:
            if c.nu not in (-1, 0, 1):
                raise ConfigurationError(f"counting weight of {c.label} must be -1, 0 or +1")

    def channel(self, label: str) -> Channel:
        for c in self.channels:
            if c.label == label:
                return c
        raise KeyError(label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.channels)

    def with_counting(self, weights: dict[str, int]) -> "LindbladModel":
        """Copy with counting weights replaced (labels absent from ``weights`` get 0)."""
        chans = tuple(Channel(c.label, c.op, int(weights.get(c.label, 0))) for c in self.channels)
        return replace(self, channels=chans)


def _check_space(space: HilbertSpace):
    if len(space.spec.cavity_cutoffs) != 3:
        raise SpaceMismatchError("model requires a space with three cavity modes")


def build_hamiltonian(space: HilbertSpace, p: SwitchParams) -> Operator:
    _check_space(space)
    r = derived_rates(p)
    a_l, a_2, a_r = (annihilator(space, m) for m in ("l", "2", "r"))
    t = lambda i, j: atomic_transition(space, i, j)  # noqa: E731

    ladder = t("00", "s") + t("s", "11")
    drive = (ladder + ladder.dag()) * (p.omega1 / math.sqrt(2))
    raman = ladder @ a_2.dag()
    raman = (raman + raman.dag()) * r.g_eff
    shift = a_2.dag() @ a_2 * r.chi + space.identity() * r.delta_scalar
    stark = shift @ (t("00", "00") - t("11", "11"))
    hop = a_l.dag() @ a_2 + a_2.dag() @ a_r
    hop = (hop + hop.dag()) * p.J
    return drive + raman + stark + hop


def build_atomic_channels(space: HilbertSpace, p: SwitchParams) -> list[Channel]:
    _check_space(space)
    r = derived_rates(p)
    t = lambda i, j: atomic_transition(space, i, j)  # noqa: E731
    c0 = math.sqrt(r.gamma0_eff)
    c1 = math.sqrt(r.gamma1_eff / 2)
    return [
        Channel("at1", (t("00", "a") - t("a", "11")) * c0),
        Channel("at2", (t("s", "a") + t("a", "s")) * c1),
        Channel("at3", (t("00", "s") + t("s", "11")) * c0),
        Channel("at4", (t("a", "a") + t("s", "s") + t("11", "11") * 2) * c1),
    ]


def build_thermal_channels(space: HilbertSpace, p: SwitchParams) -> list[Channel]:
    """Bath channels of the outer cavities; only the right bath is counted.

    In the ``standard`` convention emission into a bath (``a``) carries the
    rate ``n + 1`` and absorption (``a^dagger``) the rate ``n``.  The
    ``verbatim_eq4`` convention swaps the two rate factors.
    """
    _check_space(space)
    a_l, a_r = annihilator(space, "l"), annihilator(space, "r")
    out = []
    for side, a, n, nu in (("l", a_l, p.n1, 0), ("r", a_r, p.n2, 1)):
        down, up = n + 1, n
        if p.thermal_convention == "verbatim_eq4":
            down, up = up, down
        out.append(Channel(f"{side}_emit", a * math.sqrt(p.gamma_th * down), nu))
        out.append(Channel(f"{side}_abs", a.dag() * math.sqrt(p.gamma_th * up), -nu))
    return out


def build_model(p: SwitchParams, spec: ModeSpec | None = None, space: HilbertSpace | None = None) -> LindbladModel:
    space = space or build_space(spec or ModeSpec())
    H = build_hamiltonian(space, p)
    channels = build_atomic_channels(space, p) + build_thermal_channels(space, p)
    return LindbladModel(space=space, H=H, channels=tuple(channels), params=p)


def model_summary(m: LindbladModel) -> dict:
    """JSON-friendly dump of the model matrices (real and imaginary parts)."""

    def mat(op: Operator):
        return {"re": np.real(op.elements).tolist(), "im": np.imag(op.elements).tolist()}

    return {
        "dim": m.space.dim,
        "basis": [list(b) for b in m.space.basis],
        "atomic_levels": list(m.space.spec.atomic_levels),
        "H": mat(m.H),
        "channels": [{"label": c.label, "nu": c.nu, "L": mat(c.op)} for c in m.channels],
        "derived_rates": asdict(derived_rates(m.params)) if m.params else None,
    }
