"""Vectorized Liouvillian generators for the three-state double dot.

The density matrix is represented by the 5-vector
[rho_00, rho_LL, rho_RR, rho_LR, rho_RL]; coherences between |0> and the
occupied states are never generated by the dynamics and are dropped. All
builders construct their 5x5 matrices by applying the density-matrix-level
generator to the five basis matrices and projecting back, which keeps the
matrix elements tied to one implementation of the physics.
"""

from __future__ import annotations

import numpy as np

from .params import (
    ConfigTag,
    LevelConfiguration,
    RateOverride,
    SystemParams,
    eigenbasis,
    hamiltonian,
    rates,
)

__all__ = [
    "PAIRS",
    "superop5",
    "local_liouvillian",
    "dephasing_superop",
    "sector_restrict",
    "sector_generators",
    "global_liouvillian_fcs",
    "SpanLeakageError",
]

# state indices: 0 = |0>, 1 = |L>, 2 = |R>
PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (2, 1))
_OFF_SPAN = ((0, 1), (0, 2), (1, 0), (2, 0))

IDX_00, IDX_LL, IDX_RR, IDX_LR, IDX_RL = range(5)


class SpanLeakageError(RuntimeError):
    """The generator produced coherences outside the tracked 5-dim span."""


def superop5(action) -> np.ndarray:
    """Project a generator acting on 3x3 matrices onto the tracked span.

    ``action`` maps a 3x3 complex matrix to a 3x3 complex matrix. The
    result is the 5x5 matrix of the generator in the basis given by PAIRS.
    Leakage into the untracked |0><L/R| coherences raises, since silently
    truncating it would corrupt the dynamics.
    """
    m = np.zeros((5, 5), dtype=complex)
    for col, (a, b) in enumerate(PAIRS):
        basis = np.zeros((3, 3), dtype=complex)
        basis[a, b] = 1.0
        out = np.asarray(action(basis), dtype=complex)
        for idx in _OFF_SPAN:
            if abs(out[idx]) > 1e-12:
                raise SpanLeakageError(
                    f"generator leaks into element {idx}: {out[idx]!r}")
        for row, (i, j) in enumerate(PAIRS):
            m[row, col] = out[i, j]
    return m


def _dissipator(c: np.ndarray, rho: np.ndarray, phase: complex = 1.0) -> np.ndarray:
    cdc = c.conj().T @ c
    return phase * (c @ rho @ c.conj().T) - 0.5 * (cdc @ rho + rho @ cdc)


_SIGMA_L = np.zeros((3, 3), dtype=complex)
_SIGMA_L[0, 1] = 1.0  # |0><L|
_SIGMA_R = np.zeros((3, 3), dtype=complex)
_SIGMA_R[0, 2] = 1.0  # |0><R|


def local_liouvillian(cfg: LevelConfiguration, p: SystemParams,
                      ov: RateOverride = RateOverride.none()) -> np.ndarray:
    """Site-basis Lindblad generator of one level configuration (5x5)."""
    eps_L, eps_R = cfg.levels
    h = hamiltonian(eps_L, eps_R, p.g)
    gL, kL = rates(eps_L, "L", p, ov)
    gR, kR = rates(eps_R, "R", p, ov)
    jumps = [(gL, _SIGMA_L.conj().T), (kL, _SIGMA_L),
             (gR, _SIGMA_R.conj().T), (kR, _SIGMA_R)]

    def action(rho):
        out = -1j * (h @ rho - rho @ h)
        for rate, op in jumps:
            if rate != 0.0:
                out = out + rate * _dissipator(op, rho)
        return out

    return superop5(action)


def dephasing_superop(gamma_tilde: float) -> np.ndarray:
    """Damping of the L-R coherences at rate 2*Gamma_tilde."""
    if gamma_tilde < 0:
        raise ValueError(f"gamma_tilde must be >= 0, got {gamma_tilde}")
    return np.diag([0.0, 0.0, 0.0, -2.0 * gamma_tilde, -2.0 * gamma_tilde]
                   ).astype(complex)


def sector_restrict(superop: np.ndarray, weights) -> np.ndarray:
    """Compose a 5x5 generator with a weighted sector projection.

    ``weights`` are the factors applied to the [00, LL, RR, LR, RL] sectors
    of the input state before the generator acts, i.e. L o (sum_s w_s V_s).
    """
    return superop @ np.diag(np.asarray(weights, dtype=complex))


def sector_generators(p: SystemParams, ov: RateOverride = RateOverride.none()):
    """The three sector-projected generators entering the feedback dynamics.

    Returns (L1 V00, L2 (1-V00), L3 (1-V00)) where configuration 1 acts
    only on the empty sector and configurations 2/3 only on the occupied
    sectors, as enforced by an ideal total-charge measurement.
    """
    l1 = local_liouvillian(LevelConfiguration.for_tag(ConfigTag.C1, p), p, ov)
    l2 = local_liouvillian(LevelConfiguration.for_tag(ConfigTag.C2, p), p, ov)
    l3 = local_liouvillian(LevelConfiguration.for_tag(ConfigTag.C3, p), p, ov)
    s1 = sector_restrict(l1, [1, 0, 0, 0, 0])
    s2 = sector_restrict(l2, [0, 1, 1, 1, 1])
    s3 = sector_restrict(l3, [0, 1, 1, 1, 1])
    return s1, s2, s3


# counting-field vector layout: indices into chi
CHI_LD, CHI_RD, CHI_L1, CHI_R1, CHI_L2, CHI_R2 = range(6)


def global_dissipator_channels(cfg: LevelConfiguration, p: SystemParams,
                               ov: RateOverride = RateOverride.none()):
    """Eigenbasis jump channels of the global generator for config 1 or 3.

    Each channel is (bath, chi_index, energy, sign, op, rate) where sign is
    +1 for electrons entering the dots and -1 for electrons leaving.
    """
    if cfg.tag is ConfigTag.C2:
        raise ValueError("configuration 2 uses the local generator")
    eps_L, eps_R = cfg.levels
    eb = eigenbasis(eps_L, eps_R, p.g)
    up = np.zeros((3, 3), dtype=complex)  # |E1><E0|
    up[1, 0], up[2, 0] = eb.a, eb.b
    dn = np.zeros((3, 3), dtype=complex)  # |E2><E0|
    dn[1, 0], dn[2, 0] = eb.c, eb.d
    channels = []
    for chi_idx, energy, op, la, lb in ((CHI_L1, eb.E1, up, eb.a, eb.b),
                                        (CHI_L2, eb.E2, dn, eb.c, eb.d)):
        chi_r = CHI_R1 if chi_idx == CHI_L1 else CHI_R2
        gL, kL = rates(energy, "L", p, ov)
        gR, kR = rates(energy, "R", p, ov)
        channels.append(("L", chi_idx, energy, +1, op, la**2 * gL))
        channels.append(("R", chi_r, energy, +1, op, lb**2 * gR))
        channels.append(("L", chi_idx, energy, -1, op.conj().T, la**2 * kL))
        channels.append(("R", chi_r, energy, -1, op.conj().T, lb**2 * kR))
    return channels


def local_dissipator_channels(cfg: LevelConfiguration, p: SystemParams,
                              ov: RateOverride = RateOverride.none()):
    """Site-basis jump channels of one configuration, same layout as above.

    The chi index is meaningful only for configuration 2 (both baths couple
    at eps_d); configurations 1 and 3 reuse the E1/E2 counting slots for
    the levels eps_u and eps_0 they physically address.
    """
    eps_L, eps_R = cfg.levels
    gL, kL = rates(eps_L, "L", p, ov)
    gR, kR = rates(eps_R, "R", p, ov)
    if cfg.tag is ConfigTag.C2:
        chi_L_in = chi_L_out = CHI_LD
        chi_R_in = chi_R_out = CHI_RD
    elif cfg.tag is ConfigTag.C1:
        chi_L_in = chi_L_out = CHI_L2   # left level at eps_0 ~ E2
        chi_R_in = chi_R_out = CHI_R1   # right level at eps_u ~ E1
    else:
        chi_L_in = chi_L_out = CHI_L1
        chi_R_in = chi_R_out = CHI_R2
    return [("L", chi_L_in, eps_L, +1, _SIGMA_L.conj().T, gL),
            ("L", chi_L_out, eps_L, -1, _SIGMA_L, kL),
            ("R", chi_R_in, eps_R, +1, _SIGMA_R.conj().T, gR),
            ("R", chi_R_out, eps_R, -1, _SIGMA_R, kR)]


def liouvillian_from_channels(cfg: LevelConfiguration, p: SystemParams,
                              channels, chi=None) -> np.ndarray:
    """Assemble a counting-field-dressed generator from jump channels."""
    eps_L, eps_R = cfg.levels
    h = hamiltonian(eps_L, eps_R, p.g)
    if chi is None:
        chi = np.zeros(6)
    chi = np.asarray(chi, dtype=float)

    def action(rho):
        out = -1j * (h @ rho - rho @ h)
        for _bath, chi_idx, _en, sign, op, rate in channels:
            if rate != 0.0:
                phase = np.exp(1j * sign * chi[chi_idx])
                out = out + rate * _dissipator(op, rho, phase)
        return out

    return superop5(action)


def global_liouvillian_fcs(tag: ConfigTag, p: SystemParams, chi=None,
                           ov: RateOverride = RateOverride.none()) -> np.ndarray:
    """Eigenbasis (global) generator of config 1 or 3 with counting fields.

    chi is a 6-vector ordered [L@eps_d, R@eps_d, L@E1, R@E1, L@E2, R@E2];
    at chi = 0 the generator is trace preserving. Configuration 2 is
    rejected: its local generator is already thermodynamically consistent.
    """
    cfg = LevelConfiguration.for_tag(tag, p)
    channels = global_dissipator_channels(cfg, p, ov)
    return liouvillian_from_channels(cfg, p, channels, chi)
