"""Steady-state energy bookkeeping: electrical power, heat current, and the
demon/measurement/gate decomposition of the energy supplied by the control
loop. The gate contribution is inferred from the closure identities rather
than from its defining integral; the coherence-weighted flux is reported as
a diagnostic but excluded from the closure, since it is negligible whenever
the site-basis description is valid.
"""

from __future__ import annotations

from dataclasses import dataclass

from .params import DetectorParams, RateOverride, SystemParams, \
    gamma_tilde, rates
from .spectral import SpectralCoefficients, halfline_split, particle_currents

__all__ = [
    "ParticleCurrents",
    "EnergyFlows",
    "config_energies",
    "power_from_currents",
    "heat_from_currents",
    "measurement_power",
    "coherence_flux",
    "energy_flows",
]


@dataclass(frozen=True)
class ParticleCurrents:
    """n_dot[bath][config], particle flow into the dots (1/time)."""

    n_dot: dict

    @property
    def total(self) -> float:
        return sum(sum(cfg.values()) for cfg in self.n_dot.values())

    def bath_total(self, bath: str) -> float:
        return sum(self.n_dot[bath].values())


@dataclass(frozen=True)
class EnergyFlows:
    P: float
    Qdot: float
    EdotD: float
    EdotM: float
    EdotB: float
    EdotG: float


def config_energies(j: int, p: SystemParams) -> tuple:
    """(eps_L, eps_R) of configuration j in {1, 2, 3}."""
    return {
        1: (p.eps_0, p.eps_u),
        2: (p.eps_d, p.eps_d),
        3: (p.eps_u, p.eps_0),
    }[j]


def power_from_currents(n: ParticleCurrents, p: SystemParams) -> float:
    """Bias-weighted particle flow; negative when work is extracted."""
    return p.mu_L * n.bath_total("L") + p.mu_R * n.bath_total("R")


def heat_from_currents(n: ParticleCurrents, p: SystemParams) -> float:
    """Heat drawn from the reservoirs, weighted by (eps - mu) per channel."""
    total = 0.0
    for bath, mu in (("L", p.mu_L), ("R", p.mu_R)):
        for j, cur in n.n_dot[bath].items():
            eps_L, eps_R = config_energies(j, p)
            eps = eps_L if bath == "L" else eps_R
            total += (eps - mu) * cur
    return total


def measurement_power(c: SpectralCoefficients, p: SystemParams,
                      d: DetectorParams) -> float:
    """Energy injected by backaction dephasing: -4 g Gamma_tilde Re rho_LR."""
    if c.cLR is None:
        return 0.0
    return -4.0 * p.g * gamma_tilde(p, d) * c.cLR[0].real


def coherence_flux(c: SpectralCoefficients, p: SystemParams,
                   ov: RateOverride = RateOverride.none()) -> float:
    """Coherence-weighted ejection flux (diagnostic, small in valid regimes).

    Only configurations 2 and 3 contribute: the empty-state region carries
    no L-R coherence under ideal charge detection.
    """
    if c.cLR is None:
        return 0.0
    _, kLd = rates(p.eps_d, "L", p, ov)
    _, kRd = rates(p.eps_d, "R", p, ov)
    _, kLu = rates(p.eps_u, "L", p, ov)
    _, kR0 = rates(p.eps_0, "R", p, ov)
    LRm, LRp = halfline_split(c, c.cLR)
    return -p.g * ((kLd + kRd) * LRm.real + (kLu + kR0) * LRp.real)


def energy_flows(c: SpectralCoefficients, p: SystemParams, d: DetectorParams,
                 ov: RateOverride = RateOverride.none(),
                 currents: ParticleCurrents | None = None) -> EnergyFlows:
    """Full stationary energy record; closure identities hold by construction."""
    if currents is None:
        currents = ParticleCurrents(particle_currents(c, p, ov))
    P = power_from_currents(currents, p)
    Qdot = heat_from_currents(currents, p)
    EdotD = -(P + Qdot)
    EdotM = measurement_power(c, p, d)
    EdotB = coherence_flux(c, p, ov)
    EdotG = EdotD - EdotM
    return EnergyFlows(P, Qdot, EdotD, EdotM, EdotB, EdotG)
