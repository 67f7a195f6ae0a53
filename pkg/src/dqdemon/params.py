"""Physical parameters, bath rates, and the feedback level logic of the DQD demon.

Conventions: k_B = hbar = 1. All energies and rates are usually quoted in
units of the bath temperature T, but the API stores raw numbers, so any
consistent unit system works. The three charge states are |0> (empty),
|L>, |R>, indexed 0, 1, 2 throughout the package.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemParams",
    "DetectorParams",
    "RateOverride",
    "ConfigTag",
    "LevelConfiguration",
    "EigenBasisData",
    "InvalidParameterError",
    "fermi",
    "rates",
    "hamiltonian",
    "eigenbasis",
    "gamma_tilde",
    "feedback_levels",
    "local_validity_ratio",
]


class InvalidParameterError(ValueError):
    """Raised when a physical parameter is non-finite or out of range."""


def _require_finite(name, value):
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class SystemParams:
    """Static parameters of the double dot and its electron reservoirs.

    Gamma      : bare dot-reservoir tunneling rate (equal for both baths)
    g          : interdot tunnel coupling
    T          : bath temperature (k_B = 1)
    mu_L, mu_R : chemical potentials; default convention mu_R = -mu_L = eV/2
    eps_0      : reference level energy (default 0)
    eps_u      : raised level energy used in configurations 1 and 3
    eps_d      : lowered level energy of configuration 2
    Gamma_phi  : environmental dephasing rate (added on top of backaction)
    """

    Gamma: float = 0.1
    g: float = 0.1
    T: float = 1.0
    mu_L: float = -1.5
    mu_R: float = 1.5
    eps_0: float = 0.0
    eps_u: float = 5.0
    eps_d: float = -5.0
    Gamma_phi: float = 0.0

    def __post_init__(self):
        for name in ("Gamma", "g", "T", "mu_L", "mu_R", "eps_0", "eps_u",
                     "eps_d", "Gamma_phi"):
            _require_finite(name, getattr(self, name))
        if self.T <= 0:
            raise InvalidParameterError(f"T must be > 0, got {self.T}")
        if self.Gamma < 0:
            raise InvalidParameterError(f"Gamma must be >= 0, got {self.Gamma}")
        if self.Gamma_phi < 0:
            raise InvalidParameterError(
                f"Gamma_phi must be >= 0, got {self.Gamma_phi}")

    @property
    def bias(self) -> float:
        """Voltage bias eV = mu_R - mu_L."""
        return self.mu_R - self.mu_L

    def replace(self, **kwargs) -> "SystemParams":
        from dataclasses import replace
        return replace(self, **kwargs)


@dataclass(frozen=True)
class DetectorParams:
    """Bandwidth and measurement strength of detector 1.

    Detector 2 (total charge) is taken noise-free and infinitely fast when
    ``ideal_charge_detection`` is set, which is the regime all solvers in
    this package operate in.
    """

    gamma_1: float
    lambda_1: float
    ideal_charge_detection: bool = True

    def __post_init__(self):
        _require_finite("gamma_1", self.gamma_1)
        _require_finite("lambda_1", self.lambda_1)
        if self.gamma_1 <= 0:
            raise InvalidParameterError(f"gamma_1 must be > 0, got {self.gamma_1}")
        if self.lambda_1 <= 0:
            raise InvalidParameterError(f"lambda_1 must be > 0, got {self.lambda_1}")

    @property
    def sigma(self) -> float:
        """Stationary variance of the filtered outcome for a pinned state."""
        return self.gamma_1 / (8.0 * self.lambda_1)

    def replace(self, **kwargs) -> "DetectorParams":
        from dataclasses import replace
        return replace(self, **kwargs)


def gamma_tilde(p: SystemParams, d: DetectorParams) -> float:
    """Total L-R dephasing rate: measurement backaction plus environment."""
    return d.lambda_1 + p.Gamma_phi


_ADMISSIBLE_OVERRIDES = {("L", "eps_u"), ("L", "eps_d"),
                         ("R", "eps_u"), ("R", "eps_d")}


@dataclass(frozen=True)
class RateOverride:
    """Set of (bath, level-label) pairs whose in/out rates are forced to 0.

    Zeroing all four pairs realizes the energy-conserving demon, where
    electrons can only enter at eps_0 on the left and leave at eps_0 on the
    right.
    """

    zeroed: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        bad = set(self.zeroed) - _ADMISSIBLE_OVERRIDES
        if bad:
            raise InvalidParameterError(
                f"inadmissible override entries: {sorted(bad)}")

    @classmethod
    def none(cls) -> "RateOverride":
        return cls(frozenset())

    @classmethod
    def energy_conserving(cls) -> "RateOverride":
        return cls(frozenset(_ADMISSIBLE_OVERRIDES))

    @classmethod
    def of(cls, *pairs) -> "RateOverride":
        return cls(frozenset(pairs))

    def zeroes(self, bath: str, eps: float, p: SystemParams) -> bool:
        if not self.zeroed:
            return False
        if eps == p.eps_u and (bath, "eps_u") in self.zeroed:
            return True
        if eps == p.eps_d and (bath, "eps_d") in self.zeroed:
            return True
        return False


class ConfigTag(enum.Enum):
    """The three gate-controlled level configurations."""

    C1 = 1  # (eps_0, eps_u): dot assumed empty, accept on the left
    C2 = 2  # (eps_d, eps_d): electron on the left, hold and transfer
    C3 = 3  # (eps_u, eps_0): electron on the right, eject to the right


@dataclass(frozen=True)
class LevelConfiguration:
    tag: ConfigTag
    levels: tuple  # (eps_L, eps_R)

    @classmethod
    def for_tag(cls, tag: ConfigTag, p: SystemParams) -> "LevelConfiguration":
        levels = {
            ConfigTag.C1: (p.eps_0, p.eps_u),
            ConfigTag.C2: (p.eps_d, p.eps_d),
            ConfigTag.C3: (p.eps_u, p.eps_0),
        }[tag]
        return cls(tag, levels)


def feedback_levels(D1: float, D2: float) -> ConfigTag:
    """Map detector outcomes to a level configuration.

    D2 > 0 means the dot is believed empty (C1); otherwise the sign of D1
    selects which dot is believed occupied. The Heaviside convention
    theta(0) = 0 makes the map total: D1 = 0 goes to C2 and D2 = 0 to the
    occupied half-plane.
    """
    if D2 > 0:
        return ConfigTag.C1
    if D1 > 0:
        return ConfigTag.C3
    return ConfigTag.C2


def fermi(eps: float, bath: str, p: SystemParams) -> float:
    """Fermi-Dirac occupation of the given bath at energy eps.

    Evaluated through the branch that never exponentiates a large positive
    argument, so it is stable for |eps - mu| up to ~700 T.
    """
    _require_finite("eps", eps)
    mu = p.mu_L if bath == "L" else p.mu_R
    x = (eps - mu) / p.T
    if x >= 0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


def rates(eps: float, bath: str, p: SystemParams,
          ov: RateOverride = RateOverride.none()) -> tuple:
    """(gamma_in, kappa_out) for tunneling at energy eps via the given bath.

    gamma_in = Gamma f(eps), kappa_out = Gamma [1 - f(eps)]; an active
    override returns (0, 0) for the pair.
    """
    if ov.zeroes(bath, eps, p):
        return (0.0, 0.0)
    f = fermi(eps, bath, p)
    return (p.Gamma * f, p.Gamma * (1.0 - f))


def hamiltonian(eps_L: float, eps_R: float, g: float) -> np.ndarray:
    """3x3 Hamiltonian in the basis {|0>, |L>, |R>}."""
    return np.array([[0.0, 0.0, 0.0],
                     [0.0, eps_L, g],
                     [0.0, g, eps_R]], dtype=complex)


@dataclass(frozen=True)
class EigenBasisData:
    """Eigenenergies and real mixing coefficients of the 2x2 occupied block.

    |E1> = a|L> + b|R>, |E2> = c|L> + d|R>, E_{1/2} = eps_bar +/- sqrt(Delta^2 + g^2)
    with eps_bar = (eps_L + eps_R)/2 and Delta = (eps_L - eps_R)/2.
    """

    E0: float
    E1: float
    E2: float
    a: float
    b: float
    c: float
    d: float


def eigenbasis(eps_L: float, eps_R: float, g: float) -> EigenBasisData:
    delta = 0.5 * (eps_L - eps_R)
    ebar = 0.5 * (eps_L + eps_R)
    s = math.hypot(delta, g)
    if s == 0.0:
        # degenerate 2x2 block; any orthonormal pair works
        return EigenBasisData(0.0, ebar, ebar, 1.0, 0.0, 0.0, 1.0)
    na = math.hypot(g, delta + s)
    nc = math.hypot(g, delta - s)
    if na == 0.0:  # g = 0, delta < 0: |E1> = |R>
        a, b = 0.0, 1.0
    else:
        a, b = (delta + s) / na, g / na
    if nc == 0.0:  # g = 0, delta > 0: |E2> = |R>
        c, d = 0.0, 1.0
    else:
        c, d = (delta - s) / nc, g / nc
    return EigenBasisData(0.0, ebar + s, ebar - s, a, b, c, d)


def local_validity_ratio(p: SystemParams) -> float:
    """g / Delta for configurations 1 and 3; warns above 0.1.

    The site-basis dissipators in configurations 1 and 3 are justified only
    while the detuning dominates the interdot coupling.
    """
    delta = 0.5 * abs(p.eps_u - p.eps_0)
    if delta == 0.0:
        ratio = math.inf
    else:
        ratio = abs(p.g) / delta
    if ratio > 0.1:
        warnings.warn(
            f"g/Delta = {ratio:.3g} > 0.1: site-basis description of "
            "configurations 1 and 3 may be inaccurate", stacklevel=2)
    return ratio
