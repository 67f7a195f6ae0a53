"""Closed-form and small-matrix reduced models of the feedback-controlled
double dot: fast-detector Markovian generator, analytic power/heat, demon
inequality, classical rate equations, and the eigenbasis (global)
counting-statistics power used to validate the site-basis description.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import liouville
from .params import (
    ConfigTag,
    DetectorParams,
    LevelConfiguration,
    RateOverride,
    SystemParams,
    gamma_tilde,
    rates,
)

__all__ = [
    "FastDetectorModel",
    "ClassicalRateModel",
    "error_probability",
    "xi_effective",
    "power_analytic",
    "heat_analytic",
    "demon_condition",
    "fast_detector_generator",
    "fast_detector_steady",
    "fast_detector_currents",
    "fast_detector_power",
    "classical_rates",
    "classical_ideal_steady",
    "global_power_fcs",
    "validity_flags",
]


def error_probability(lambda_1: float, gamma_1: float) -> float:
    """Probability that the filtered outcome misidentifies the occupied dot."""
    if lambda_1 <= 0 or gamma_1 <= 0:
        raise ValueError("lambda_1 and gamma_1 must be > 0")
    return 0.5 * (1.0 - math.erf(2.0 * math.sqrt(lambda_1 / gamma_1)))


def _fast_rates(p: SystemParams, ov: RateOverride):
    gL0, _ = rates(p.eps_0, "L", p, ov)
    _, kLu = rates(p.eps_u, "L", p, ov)
    _, kR0 = rates(p.eps_0, "R", p, ov)
    return gL0, kLu, kR0


def xi_effective(p: SystemParams, d: DetectorParams,
                 ov: RateOverride = RateOverride.none()) -> float:
    """Effective interdot transfer rate in the fast-detector limit."""
    _, kLu = rates(p.eps_u, "L", p, ov)
    _, kR0 = rates(p.eps_0, "R", p, ov)
    gt = gamma_tilde(p, d)
    s = kLu + kR0 + 8.0 * gt
    det = p.eps_u - p.eps_0
    return 8.0 * p.g**2 * s / (s * s + 4.0 * det * det)


def validity_flags(p: SystemParams) -> tuple:
    """Structured warnings for the closed-form power/heat expressions."""
    flags = []
    margin = min(abs(p.eps_u - p.mu_L), abs(p.eps_u - p.mu_R),
                 abs(p.eps_d - p.mu_L), abs(p.eps_d - p.mu_R))
    if margin < 5.0 * p.T:
        flags.append("levels-near-bias-window")
    return tuple(flags)


def power_analytic(p: SystemParams, d: DetectorParams,
                   ov: RateOverride = RateOverride.none(),
                   eta: float | None = None) -> float:
    """Closed-form stationary power of the fast-detector model.

    Negative values mean electrical work is extracted against the bias.
    ``eta`` overrides the feedback error probability (used for limit
    checks); by default it follows from the detector parameters.
    """
    if eta is None:
        eta = error_probability(d.lambda_1, d.gamma_1)
    gL, kL, kR = _fast_rates(p, ov)
    xi = xi_effective(p, d, ov)
    num = (p.mu_L - p.mu_R) * (1.0 - eta) * gL * xi * kR
    den = ((gL + eta * kL) * (xi + (1.0 - eta) * kR)
           + xi * (gL + (1.0 - eta) * kR))
    if den == 0.0:
        return 0.0
    return num / den


def heat_analytic(p: SystemParams, d: DetectorParams,
                  ov: RateOverride = RateOverride.none(),
                  eta: float | None = None) -> float:
    """Closed-form stationary heat current out of the reservoirs.

    The first term is the heating caused by feedback mistakes: electrons
    that entered at eps_0 on the left get ejected at eps_u. It vanishes
    when eta -> 0 or when kappa_L(eps_u) is switched off, leaving
    Qdot = -P (perfect heat-to-work conversion).
    """
    if eta is None:
        eta = error_probability(d.lambda_1, d.gamma_1)
    gL, kL, kR = _fast_rates(p, ov)
    xi = xi_effective(p, d, ov)
    P = power_analytic(p, d, ov, eta)
    if kL == 0.0 or eta == 0.0:
        return -P
    den = gL + eta * kL
    tail = xi + (1.0 - eta) * kR
    if tail != 0.0:
        den = den + xi * (gL + (1.0 - eta) * kR) / tail
    if den == 0.0:
        return -P
    return -(p.eps_u - p.eps_0) * eta * kL * gL / den - P


def demon_condition(p: SystemParams, d: DetectorParams,
                    ov: RateOverride = RateOverride.none()) -> tuple:
    """Check the Maxwell-demon inequality; returns (holds, lhs/rhs ratio).

    A diverging right-hand side (blocked interdot transfer or a fully
    biased right lead) yields (False, 0.0).
    """
    eta = error_probability(d.lambda_1, d.gamma_1)
    _, kL, kR = _fast_rates(p, ov)
    xi = xi_effective(p, d, ov)
    det = p.eps_u - p.eps_0
    if det == 0.0:
        raise ValueError("demon condition undefined at zero detuning")
    lhs = (p.mu_R - p.mu_L) / det
    if xi == 0.0 or kR == 0.0:
        return False, 0.0
    rhs = eta / (1.0 - eta) * kL * (xi + (1.0 - eta) * kR) / (xi * kR)
    if rhs == 0.0:
        return lhs > 0.0, math.inf
    return lhs > rhs, lhs / rhs


# sector weights of the feedback-averaged generator, per configuration
def _sector_weights(eta: float) -> dict:
    return {
        ConfigTag.C1: np.array([1.0, 0.0, 0.0, 0.0, 0.0]),
        ConfigTag.C2: np.array([0.0, 1.0 - eta, eta, 0.5, 0.5]),
        ConfigTag.C3: np.array([0.0, eta, 1.0 - eta, 0.5, 0.5]),
    }


@dataclass(frozen=True)
class FastDetectorModel:
    generator: np.ndarray
    eta: float
    gamma_L: float
    gamma_R: float
    kappa_L: float
    kappa_R: float
    alpha: complex


def fast_detector_generator(p: SystemParams, d: DetectorParams,
                            ov: RateOverride = RateOverride.none(),
                            use_global: bool = False) -> FastDetectorModel:
    """Detector-averaged 5x5 generator (feedback part plus dephasing).

    With ``use_global`` the configuration 1/3 dissipators are built in the
    instantaneous eigenbasis instead of the site basis.
    """
    eta = error_probability(d.lambda_1, d.gamma_1)
    weights = _sector_weights(eta)
    gen = liouville.dephasing_superop(gamma_tilde(p, d))
    for tag, w in weights.items():
        cfg = LevelConfiguration.for_tag(tag, p)
        if use_global and tag is not ConfigTag.C2:
            l5 = liouville.global_liouvillian_fcs(tag, p, None, ov)
        else:
            l5 = liouville.local_liouvillian(cfg, p, ov)
        gen = gen + liouville.sector_restrict(l5, w)

    gL0, _ = rates(p.eps_0, "L", p, ov)
    gRu, _ = rates(p.eps_u, "R", p, ov)
    _, kLu = rates(p.eps_u, "L", p, ov)
    _, kLd = rates(p.eps_d, "L", p, ov)
    _, kR0 = rates(p.eps_0, "R", p, ov)
    _, kRd = rates(p.eps_d, "R", p, ov)
    kappa_L = (1.0 - eta) * kLd + eta * kLu
    kappa_R = (1.0 - eta) * kR0 + eta * kRd
    alpha = (-1j * (p.eps_u - p.eps_0) / 2.0
             - (kLu + kR0 + kLd + kRd) / 4.0)
    return FastDetectorModel(gen, eta, gL0, gRu, kappa_L, kappa_R, alpha)


def fast_detector_steady(model: FastDetectorModel) -> np.ndarray:
    """Stationary 5-vector of the detector-averaged generator."""
    _, s, vh = scipy.linalg.svd(model.generator)
    gap = s[-2] / max(s[-1], np.finfo(float).tiny)
    if gap < 1e3:
        raise RuntimeError(f"degenerate fast-detector steady state (gap {gap:.3g})")
    rho = vh[-1].conj()
    rho = rho / rho[:3].sum()
    return rho


def _channel_currents(p: SystemParams, ov: RateOverride, eta: float,
                      rho: np.ndarray, use_global: bool) -> list:
    """Per-(bath, energy) currents of the detector-averaged generator.

    Each dissipator contributes sign * rate * w_s * tr{c B_s c^dag} * rho_s
    summed over the tracked sectors s; B_s are the basis matrices of the
    vectorization.
    """
    basis = []
    for (a, b) in liouville.PAIRS:
        m = np.zeros((3, 3), dtype=complex)
        m[a, b] = 1.0
        basis.append(m)
    weights = _sector_weights(eta)
    entries = []
    for tag, w in weights.items():
        cfg = LevelConfiguration.for_tag(tag, p)
        if use_global and tag is not ConfigTag.C2:
            channels = liouville.global_dissipator_channels(cfg, p, ov)
        else:
            channels = liouville.local_dissipator_channels(cfg, p, ov)
        for bath, _chi, energy, sign, op, rate in channels:
            if rate == 0.0:
                continue
            cur = 0.0 + 0.0j
            for s in range(5):
                if w[s] == 0.0:
                    continue
                cur += w[s] * np.trace(op @ basis[s] @ op.conj().T) * rho[s]
            entries.append((tag, bath, energy, sign * rate * cur.real))
    return entries


def fast_detector_currents(p: SystemParams, d: DetectorParams,
                           ov: RateOverride = RateOverride.none(),
                           use_global: bool = False) -> dict:
    """n_dot[bath][config] from the detector-averaged steady state."""
    model = fast_detector_generator(p, d, ov, use_global)
    rho = fast_detector_steady(model)
    out = {"L": {1: 0.0, 2: 0.0, 3: 0.0}, "R": {1: 0.0, 2: 0.0, 3: 0.0}}
    for tag, bath, _energy, cur in _channel_currents(p, ov, model.eta, rho,
                                                    use_global):
        out[bath][tag.value] += cur
    return out


def fast_detector_power(p: SystemParams, d: DetectorParams,
                        ov: RateOverride = RateOverride.none(),
                        use_global: bool = False) -> float:
    cur = fast_detector_currents(p, d, ov, use_global)
    return (p.mu_L * sum(cur["L"].values()) + p.mu_R * sum(cur["R"].values()))


def global_power_fcs(p: SystemParams, d: DetectorParams,
                     ov: RateOverride = RateOverride.none()) -> float:
    """Fast-detector power with eigenbasis dissipators in configs 1 and 3.

    The counting-field first derivatives reduce to rate-weighted
    population sums, which is what the channel enumeration evaluates.
    """
    return fast_detector_power(p, d, ov, use_global=True)


@dataclass(frozen=True)
class ClassicalRateModel:
    matrix: np.ndarray
    xi2: float
    xi3: float


def classical_rates(p: SystemParams, d: DetectorParams,
                    ov: RateOverride = RateOverride.none()) -> tuple:
    """Classical interdot jump rates for configurations 2 and 3."""
    _, kLd = rates(p.eps_d, "L", p, ov)
    _, kRd = rates(p.eps_d, "R", p, ov)
    _, kLu = rates(p.eps_u, "L", p, ov)
    _, kR0 = rates(p.eps_0, "R", p, ov)
    gt = gamma_tilde(p, d)
    xi2 = 4.0 * p.g**2 / (kLd + kRd + 4.0 * gt)
    s3 = kLu + kR0 + 4.0 * gt
    det = p.eps_u - p.eps_0
    xi3 = 4.0 * p.g**2 * s3 / (s3 * s3 + 4.0 * det * det)
    return xi2, xi3


def classical_ideal_steady(p: SystemParams, d: DetectorParams,
                           ov: RateOverride = RateOverride.none()) -> tuple:
    """Stationary populations and current of the three-step classical cycle.

    Returns ((rho_0, rho_L, rho_R), current) for the cycle
    enter-left at eps_0 -> interdot xi_2 -> exit-right at eps_0.
    """
    gL0, _ = rates(p.eps_0, "L", p, ov)
    _, kR0 = rates(p.eps_0, "R", p, ov)
    xi2, _ = classical_rates(p, d, ov)
    raw = np.array([xi2 * kR0, gL0 * kR0, gL0 * xi2])
    total = raw.sum()
    if total == 0.0:
        raise RuntimeError("all cycle rates vanish: degenerate steady state")
    pops = raw / total
    return tuple(pops), gL0 * pops[0]
