"""Spectral (generalized-Hermite) steady-state solver for the filtered
detector-outcome master equation and its classical limit.

The joint state rho_aa'(D) is expanded in the orthonormal basis

    phi_n(D) = He_n^[sigma](D) / sqrt(n! sigma^n) * exp(-D^2/2 sigma) / sqrt(2 pi sigma),

with sigma = gamma_1/(8 lambda_1). In coefficient space the drift/diffusion
part becomes a lower-triangular ladder, and the Heaviside functions that
select the feedback region become the half-line overlap matrix of the basis.
The stationary state is the null vector of the resulting dense matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import liouville
from .params import DetectorParams, RateOverride, SystemParams, gamma_tilde, rates
from .reduced import classical_rates

__all__ = [
    "HalfLineTable",
    "SpectralCoefficients",
    "SteadyStateReport",
    "SolveResult",
    "DegenerateSteadyStateError",
    "NumericalRangeError",
    "hermite_halfline_table",
    "assemble_M",
    "assemble_M_classical",
    "steady_state",
    "populations_halfline",
    "halfline_split",
    "particle_currents",
    "marginal_distribution",
    "solve_steady",
    "MAX_ORDER",
]

MAX_ORDER = 512


class DegenerateSteadyStateError(RuntimeError):
    """The generator has a (numerically) degenerate null space."""


class NumericalRangeError(OverflowError):
    """Table entries left the representable floating-point range."""


def _log_double_factorials(n_max: int) -> np.ndarray:
    """log(k!!) for k = 0..n_max, with 0!! = (-1)!! = 1."""
    out = np.zeros(n_max + 1)
    for k in range(2, n_max + 1):
        out[k] = out[k - 2] + math.log(k)
    return out


@dataclass(frozen=True)
class HalfLineTable:
    """Overlap integrals of basis-function pairs over D > 0.

    entries[m, n] = 1/2 on the diagonal, 0 for n+m even off the diagonal,
    and the closed-form alternating coefficient for n+m odd. The table is
    symmetric and independent of sigma (the half-line is scale invariant).
    """

    N: int
    entries: np.ndarray

    @property
    def odd_coupling(self) -> np.ndarray:
        """The table with the diagonal removed (the theta-coupling part)."""
        return self.entries - 0.5 * np.eye(self.N)


def hermite_halfline_table(N: int, sigma: float = 1.0) -> HalfLineTable:
    """Half-line overlap table for truncation order N (sigma-independent)."""
    if N > MAX_ORDER:
        raise ValueError(f"N = {N} exceeds the supported maximum {MAX_ORDER}")
    ldf = _log_double_factorials(N)
    log2pi = math.log(2.0 * math.pi)
    entries = 0.5 * np.eye(N)
    for even in range(0, N, 2):
        for odd in range(1, N, 2):
            # (-1)!! = 1 handled by ldf index -1 -> treat even-1 < 0 as 0
            ld_em1 = ldf[even - 1] if even >= 1 else 0.0
            logmag = (ldf[odd] + ld_em1
                      - 0.5 * (log2pi + math.lgamma(even + 1) + math.lgamma(odd + 1))
                      - math.log(abs(odd - even)))
            val = math.copysign(math.exp(logmag), odd - even)
            if (even + odd - 1) // 2 % 2 == 1:
                val = -val
            if not math.isfinite(val):
                raise NumericalRangeError(
                    f"half-line entry ({even},{odd}) is not finite")
            entries[even, odd] = val
            entries[odd, even] = val
    return HalfLineTable(N, entries)


@dataclass(frozen=True)
class SpectralCoefficients:
    """Truncated expansion coefficients of the stationary joint state.

    For the quantum branch all five blocks are present; the classical
    branch carries only the three population blocks (cLR = cRL = None).
    """

    N: int
    sigma: float
    c00: np.ndarray
    cLL: np.ndarray
    cRR: np.ndarray
    cLR: np.ndarray | None = None
    cRL: np.ndarray | None = None

    @property
    def total_population(self) -> complex:
        return self.c00[0] + self.cLL[0] + self.cRR[0]

    def population_blocks(self):
        return {"00": self.c00, "LL": self.cLL, "RR": self.cRR}


@dataclass(frozen=True)
class SteadyStateReport:
    coefficients: SpectralCoefficients
    residual_norm: float
    singular_gap: float
    N_used: int


def _drift_block(N: int, gamma_1: float, sigma: float, center: float) -> np.ndarray:
    """Coefficient-space drift/diffusion ladder for a drift centre at -k.

    The Fokker-Planck operator gamma*[d/dD (D+k) + sigma d^2/dD^2] maps
    c_m -> -gamma*(m c_m + k sqrt(m/sigma) c_{m-1}); ``center`` is the
    attractor of the drift (0, -1 or +1), i.e. k = -center.
    """
    m = np.arange(N, dtype=float)
    block = np.diag(-gamma_1 * m).astype(complex)
    if center != 0.0:
        sub = -gamma_1 * (-center) * np.sqrt(m[1:] / sigma)
        block[np.arange(1, N), np.arange(N - 1)] = sub
    return block


def assemble_M(p: SystemParams, d: DetectorParams,
               ov: RateOverride = RateOverride.none(), N: int = 100) -> np.ndarray:
    """Dense 5N x 5N generator of the ideal-charge-detection dynamics."""
    if N < 8:
        raise ValueError(f"N must be >= 8, got {N}")
    sigma = d.sigma
    table = hermite_halfline_table(N, sigma)
    theta = table.entries             # theta(D) in coefficient space
    one = np.eye(N)
    one_minus_theta = one - theta

    s1, s2, s3 = liouville.sector_generators(p, ov)
    deph = liouville.dephasing_superop(gamma_tilde(p, d))
    # drift attractors per sector: empty at 0, |L> at -1, |R> at +1,
    # coherences at the mean (0)
    drift = [
        _drift_block(N, d.gamma_1, sigma, 0.0),
        _drift_block(N, d.gamma_1, sigma, -1.0),
        _drift_block(N, d.gamma_1, sigma, +1.0),
        _drift_block(N, d.gamma_1, sigma, 0.0),
        _drift_block(N, d.gamma_1, sigma, 0.0),
    ]

    M = np.zeros((5 * N, 5 * N), dtype=complex)
    for a in range(5):
        for b in range(5):
            block = ((s1[a, b] + deph[a, b]) * one
                     + s2[a, b] * one_minus_theta + s3[a, b] * theta)
            if a == b:
                block = block + drift[a]
            M[a * N:(a + 1) * N, b * N:(b + 1) * N] = block
    return M


def assemble_M_classical(p: SystemParams, d: DetectorParams,
                         ov: RateOverride = RateOverride.none(),
                         N: int = 100) -> np.ndarray:
    """Dense 3N x 3N generator of the classical (population-only) limit.

    Interdot tunneling is replaced by the D-dependent classical rate
    xi(D) = xi_2 for D < 0 and xi_3 for D > 0.
    """
    if N < 8:
        raise ValueError(f"N must be >= 8, got {N}")
    sigma = d.sigma
    table = hermite_halfline_table(N, sigma)
    theta = table.entries
    one = np.eye(N)
    one_minus_theta = one - theta

    gL0, _ = rates(p.eps_0, "L", p, ov)
    gRu, _ = rates(p.eps_u, "R", p, ov)
    _, kLd = rates(p.eps_d, "L", p, ov)
    _, kLu = rates(p.eps_u, "L", p, ov)
    _, kRd = rates(p.eps_d, "R", p, ov)
    _, kR0 = rates(p.eps_0, "R", p, ov)
    xi2, xi3 = classical_rates(p, d, ov)

    kapL = kLd * one_minus_theta + kLu * theta
    kapR = kRd * one_minus_theta + kR0 * theta
    xi = xi2 * one_minus_theta + xi3 * theta

    rows = [
        [-(gL0 + gRu) * one, kapL, kapR],
        [gL0 * one, -kapL - xi, xi],
        [gRu * one, xi, -kapR - xi],
    ]
    drift_centers = (0.0, -1.0, +1.0)
    M = np.zeros((3 * N, 3 * N))
    for a in range(3):
        for b in range(3):
            block = rows[a][b]
            if a == b:
                block = block + _drift_block(N, d.gamma_1, sigma,
                                             drift_centers[a]).real
            M[a * N:(a + 1) * N, b * N:(b + 1) * N] = block
    return M


def steady_state(M: np.ndarray, sigma: float, nblocks: int = 5,
                 gap_floor: float = 1e3) -> SteadyStateReport:
    """Extract the stationary coefficients from the null space of M.

    Uses a full singular-value decomposition; the ratio of the two
    smallest singular values is reported so callers can judge uniqueness.
    """
    if M.shape[0] != M.shape[1]:
        raise ValueError("M must be square")
    n_tot = M.shape[0]
    if n_tot % nblocks:
        raise ValueError(f"matrix size {n_tot} not divisible by {nblocks}")
    N = n_tot // nblocks
    _, s, vh = scipy.linalg.svd(M, lapack_driver="gesdd")
    tiny = np.finfo(float).tiny
    gap = s[-2] / max(s[-1], tiny)
    if gap < gap_floor:
        raise DegenerateSteadyStateError(
            f"singular gap {gap:.3g} below {gap_floor:.0e}: "
            "stationary state is not unique")
    c = vh[-1].conj()
    total = sum(c[b * N] for b in range(3))
    if abs(total) < 1e-12:
        raise DegenerateSteadyStateError("null vector carries no population")
    c = c / total
    residual = np.linalg.norm(M @ c) / np.linalg.norm(c)
    blocks = [c[b * N:(b + 1) * N] for b in range(nblocks)]
    if nblocks == 5:
        coeffs = SpectralCoefficients(N, sigma, blocks[0], blocks[1],
                                      blocks[2], blocks[3], blocks[4])
    else:
        coeffs = SpectralCoefficients(N, sigma, blocks[0], blocks[1], blocks[2])
    return SteadyStateReport(coeffs, residual, gap, N)


def halfline_split(c: SpectralCoefficients, block: np.ndarray):
    """(mass on D < 0, mass on D > 0) of one coefficient block."""
    table = hermite_halfline_table(c.N)
    odd = np.arange(1, c.N, 2)
    corr = table.entries[0, odd] @ block[odd]
    half = 0.5 * block[0]
    return half - corr, half + corr


def populations_halfline(c: SpectralCoefficients, side: str):
    """Per-state occupation mass on one half-line; side is '<' or '>'."""
    if side not in ("<", ">"):
        raise ValueError("side must be '<' (D < 0) or '>' (D > 0)")
    pick = 0 if side == "<" else 1
    return tuple(halfline_split(c, blk)[pick].real
                 for blk in (c.c00, c.cLL, c.cRR))


def particle_currents(c: SpectralCoefficients, p: SystemParams,
                      ov: RateOverride = RateOverride.none()) -> dict:
    """Stationary particle currents n_dot[bath][config].

    With ideal charge detection the empty state lives entirely in the
    configuration-1 region, so injection uses the total weight c0^00,
    while ejection in configurations 2/3 uses the half-line splits of the
    occupied populations.
    """
    gL0, _ = rates(p.eps_0, "L", p, ov)
    gRu, _ = rates(p.eps_u, "R", p, ov)
    _, kLd = rates(p.eps_d, "L", p, ov)
    _, kLu = rates(p.eps_u, "L", p, ov)
    _, kRd = rates(p.eps_d, "R", p, ov)
    _, kR0 = rates(p.eps_0, "R", p, ov)
    LLm, LLp = halfline_split(c, c.cLL)
    RRm, RRp = halfline_split(c, c.cRR)
    rho00 = c.c00[0].real
    return {
        "L": {1: gL0 * rho00, 2: -kLd * LLm.real, 3: -kLu * LLp.real},
        "R": {1: gRu * rho00, 2: -kRd * RRm.real, 3: -kR0 * RRp.real},
    }


def marginal_distribution(c: SpectralCoefficients, grid) -> dict:
    """Reconstruct rho_aa'(D) on a grid of D values.

    Basis functions are evaluated with the normalized three-term
    recurrence, which stays bounded for all orders used here.
    """
    grid = np.asarray(grid, dtype=float)
    sigma = c.sigma
    weight = np.exp(-grid**2 / (2.0 * sigma)) / math.sqrt(2.0 * math.pi * sigma)
    phi_prev = np.zeros_like(grid)
    phi = np.ones_like(grid)
    blocks = {"00": c.c00, "LL": c.cLL, "RR": c.cRR}
    if c.cLR is not None:
        blocks["LR"] = c.cLR
        blocks["RL"] = c.cRL
    out = {k: np.zeros_like(grid, dtype=complex) for k in blocks}
    for n in range(c.N):
        for k, blk in blocks.items():
            out[k] += blk[n] * phi
        # phi_{n+1} = D/sqrt(sigma (n+1)) phi_n - sqrt(n/(n+1)) phi_{n-1}
        nxt = grid / math.sqrt(sigma * (n + 1)) * phi \
            - math.sqrt(n / (n + 1)) * phi_prev
        phi_prev, phi = phi, nxt
    for k in out:
        out[k] = out[k] * weight
        if k in ("00", "LL", "RR"):
            out[k] = out[k].real
    return out


@dataclass(frozen=True)
class SolveResult:
    report: SteadyStateReport
    currents: dict
    power: float
    converged: bool
    flags: tuple


def _power(currents: dict, p: SystemParams) -> float:
    return sum(mu * sum(cur.values())
               for mu, cur in ((p.mu_L, currents["L"]), (p.mu_R, currents["R"])))


def solve_steady(p: SystemParams, d: DetectorParams,
                 ov: RateOverride = RateOverride.none(), N: int = 100,
                 classical: bool = False, check_convergence: bool = True,
                 max_N: int = 400, rtol: float = 1e-6) -> SolveResult:
    """Solve for the stationary state, doubling N until the power settles.

    The truncation is accepted once the reconstructed power changes by
    less than ``rtol`` (relative) under doubling; otherwise N keeps
    doubling up to ``max_N`` (capped at MAX_ORDER) and the result is
    flagged as unconverged.
    """
    max_N = min(max_N, MAX_ORDER)
    assemble = assemble_M_classical if classical else assemble_M
    nblocks = 3 if classical else 5

    def one(n):
        rep = steady_state(assemble(p, d, ov, n), d.sigma, nblocks)
        cur = particle_currents(rep.coefficients, p, ov)
        return rep, cur, _power(cur, p)

    rep, cur, power = one(N)
    flags = []
    converged = not check_convergence
    while check_convergence:
        n_next = min(2 * N, max_N)
        if n_next <= N:
            flags.append("unconverged")
            break
        rep2, cur2, power2 = one(n_next)
        drift = abs(power2 - power) / max(abs(power2), 1e-30)
        rep, cur, power, N = rep2, cur2, power2, n_next
        if drift < rtol:
            converged = True
            break
    neg_floor = min(
        float(np.min(marginal_distribution(
            rep.coefficients,
            np.linspace(-1.5, 1.5, 61))[k])) for k in ("00", "LL", "RR"))
    if neg_floor < -1e-8:
        flags.append("negative-density")
    return SolveResult(rep, cur, power, converged, tuple(flags))
