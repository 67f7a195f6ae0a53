"""Stochastic pure-state trajectories under continuous Gaussian monitoring,
exponential filtering, projective charge readout, feedback level switching,
and quantum jumps.

The per-step order is fixed: weak measurement of the dot imbalance, filter
update, projective total-charge measurement, feedback configuration choice,
then jump / no-jump evolution. Each step consumes exactly five random
draws (in this order: imbalance label, Gaussian outcome, charge outcome,
jump gate, jump channel), so the pure-Python reference step and the
compiled ensemble kernel stay draw-for-draw aligned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .params import (
    ConfigTag,
    DetectorParams,
    LevelConfiguration,
    RateOverride,
    SystemParams,
    feedback_levels,
    rates,
)

__all__ = [
    "ConditionalState",
    "StepConfig",
    "TrajectoryRecord",
    "sample_detector1",
    "sample_detector2_ideal",
    "update_filter",
    "step",
    "run_trajectory",
    "run_ensemble",
    "estimate_currents",
    "StepSizeError",
]

DRAWS_PER_STEP = 5

# jump channels, indexed as in the rate tables below
CH_IN_L, CH_OUT_L, CH_IN_R, CH_OUT_R = range(4)


class StepSizeError(RuntimeError):
    """Total jump probability exceeded the per-step cap; reduce dt."""


@dataclass
class ConditionalState:
    """Normalized three-amplitude wavefunction plus filtered outcomes."""

    c0: complex
    cL: complex
    cR: complex
    D1: float = 0.0
    D2: float = 1.0
    t: float = 0.0

    @classmethod
    def empty(cls) -> "ConditionalState":
        return cls(1.0 + 0.0j, 0.0j, 0.0j)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([self.c0, self.cL, self.cR], dtype=complex)

    @property
    def norm2(self) -> float:
        return abs(self.c0)**2 + abs(self.cL)**2 + abs(self.cR)**2

    @property
    def imbalance(self) -> float:
        """Conditional expectation of the L/R imbalance observable."""
        return abs(self.cR)**2 - abs(self.cL)**2

    def require_normalized(self, tol: float = 1e-8):
        if abs(self.norm2 - 1.0) > tol:
            raise ValueError(f"state not normalized: |psi|^2 = {self.norm2}")


@dataclass(frozen=True)
class StepConfig:
    dt: float
    seed: int = 0
    record_stride: int = 100
    jump_cap: float = 0.1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")


@dataclass
class TrajectoryRecord:
    """Sampled series and jump events of one trajectory."""

    times: np.ndarray
    D1: np.ndarray
    imbalance: np.ndarray
    config: np.ndarray          # 1, 2, 3
    amplitudes: np.ndarray      # (n_samples, 3) complex
    jump_times: np.ndarray
    jump_channel: np.ndarray    # CH_* codes
    jump_config: np.ndarray     # active configuration at the jump
    seed: int
    t_end: float
    dt: float

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)


def sample_detector1(state: ConditionalState, lambda_1: float, dt: float,
                     rng) -> tuple:
    """Weak Gaussian measurement of the dot imbalance.

    Samples the charge label from the Born probabilities, then the noisy
    outcome z1 ~ N(label, 1/(4 lambda_1 dt)), and applies the Gaussian
    Kraus operator followed by renormalization.
    """
    state.require_normalized()
    probs = (abs(state.cL)**2, abs(state.c0)**2, abs(state.cR)**2)
    u = rng.random()
    if u < probs[0]:
        label = -1.0
    elif u < probs[0] + probs[1]:
        label = 0.0
    else:
        label = 1.0
    z1 = label + rng.standard_normal() / (2.0 * math.sqrt(lambda_1 * dt))
    w = np.exp(-lambda_1 * dt * (z1 - np.array([0.0, -1.0, 1.0]))**2)
    amps = state.amplitudes * w
    amps = amps / np.linalg.norm(amps)
    post = ConditionalState(amps[0], amps[1], amps[2], state.D1, state.D2,
                            state.t)
    return z1, post


def sample_detector2_ideal(state: ConditionalState, rng) -> tuple:
    """Projective total-charge readout: +1 collapses to |0>, -1 keeps the
    occupied subspace (unchanged when the structural invariant holds)."""
    p_empty = abs(state.c0)**2
    if rng.random() < p_empty:
        return 1, ConditionalState(1.0 + 0.0j, 0.0j, 0.0j, state.D1,
                                   state.D2, state.t)
    norm = math.sqrt(abs(state.cL)**2 + abs(state.cR)**2)
    return -1, ConditionalState(0.0j, state.cL / norm, state.cR / norm,
                                state.D1, state.D2, state.t)


def update_filter(D1_prev: float, z1: float, gamma_1: float, dt: float) -> float:
    """Discrete exponential moving average of the raw signal."""
    if gamma_1 * dt > 1.0:
        raise ValueError(f"gamma_1*dt = {gamma_1 * dt} > 1 destabilizes the filter")
    return dt * gamma_1 * z1 + (1.0 - dt * gamma_1) * D1_prev


def _config_tables(p: SystemParams, ov: RateOverride):
    """Per-configuration level energies and bath rates as flat arrays."""
    eps = np.zeros((3, 2))
    rt = np.zeros((3, 4))  # gamma_L, kappa_L, gamma_R, kappa_R
    for i, tag in enumerate((ConfigTag.C1, ConfigTag.C2, ConfigTag.C3)):
        eps_L, eps_R = LevelConfiguration.for_tag(tag, p).levels
        gL, kL = rates(eps_L, "L", p, ov)
        gR, kR = rates(eps_R, "R", p, ov)
        eps[i] = (eps_L, eps_R)
        rt[i] = (gL, kL, gR, kR)
    return eps, rt


def _no_jump_propagate(amps: np.ndarray, eps_L: float, eps_R: float, g: float,
                       gL: float, kL: float, gR: float, kR: float,
                       dt: float) -> np.ndarray:
    """exp(-i H_eff dt) |psi>, normalized, via the closed 2x2 form."""
    c0 = amps[0] * np.exp(-0.5 * (gL + gR) * dt)
    m00 = eps_L - 0.5j * kL
    m11 = eps_R - 0.5j * kR
    half_tr = 0.5 * (m00 + m11)
    dm = 0.5 * (m00 - m11)
    q = np.sqrt(dm * dm + g * g + 0j)
    if abs(q) * dt < 1e-12:
        sinc = dt
        cosq = 1.0 + 0.0j
    else:
        sinc = np.sin(q * dt) / q
        cosq = np.cos(q * dt)
    phase = np.exp(-1j * half_tr * dt)
    cL = phase * ((cosq - 1j * sinc * dm) * amps[1] - 1j * sinc * g * amps[2])
    cR = phase * (-1j * sinc * g * amps[1] + (cosq + 1j * sinc * dm) * amps[2])
    out = np.array([c0, cL, cR])
    return out / np.linalg.norm(out)


def step(state: ConditionalState, p: SystemParams, d: DetectorParams,
         ov: RateOverride, cfgstep: StepConfig, rng) -> tuple:
    """One full update; returns (next_state, jump_event_or_None).

    A jump event is (t, channel, config_value). The five random draws are
    always consumed, whether or not a jump occurs.
    """
    dt = cfgstep.dt
    z1, st = sample_detector1(state, d.lambda_1, dt, rng)
    D1 = update_filter(state.D1, z1, d.gamma_1, dt)
    st.D1 = D1
    z2, st = sample_detector2_ideal(st, rng)
    st.D2 = float(z2)
    tag = feedback_levels(D1, st.D2)
    eps, rt = _config_tables(p, ov)
    i = tag.value - 1
    gL, kL, gR, kR = rt[i]
    p0 = abs(st.c0)**2
    pj = dt * np.array([gL * p0, kL * abs(st.cL)**2,
                        gR * p0, kR * abs(st.cR)**2])
    ptot = pj.sum()
    if ptot > cfgstep.jump_cap:
        raise StepSizeError(
            f"jump probability {ptot:.3g} exceeds cap {cfgstep.jump_cap}")
    u_gate = rng.random()
    u_sel = rng.random()
    jump = None
    if u_gate < ptot:
        k = int(np.searchsorted(np.cumsum(pj) / ptot, u_sel, side="right"))
        k = min(k, 3)
        if k == CH_IN_L:
            amps = np.array([0.0j, 1.0 + 0.0j, 0.0j])
        elif k == CH_OUT_L or k == CH_OUT_R:
            amps = np.array([1.0 + 0.0j, 0.0j, 0.0j])
        else:
            amps = np.array([0.0j, 0.0j, 1.0 + 0.0j])
        jump = (state.t + dt, k, tag.value)
    else:
        amps = _no_jump_propagate(st.amplitudes, eps[i, 0], eps[i, 1], p.g,
                                  gL, kL, gR, kR, dt)
    return (ConditionalState(amps[0], amps[1], amps[2], D1, st.D2,
                             state.t + dt), jump)


@njit(cache=True, nogil=True)
def _run_kernel(amps, D1_init, dt, nsteps, gamma_1, lambda_1, g,
                eps, rt, jump_cap, draws, normals, stride,
                rec_t, rec_D1, rec_imb, rec_cfg, rec_amp,
                jump_t, jump_ch, jump_cfg):  # pragma: no cover - jit
    c0, cL, cR = amps[0], amps[1], amps[2]
    D1 = D1_init
    sig_z = 1.0 / (2.0 * math.sqrt(lambda_1 * dt))
    n_jumps = 0
    n_rec = 0
    for k in range(nsteps):
        u_xi = draws[k, 0]
        u_z2 = draws[k, 1]
        u_gate = draws[k, 2]
        u_sel = draws[k, 3]
        zn = normals[k]
        pL = cL.real * cL.real + cL.imag * cL.imag
        p0 = c0.real * c0.real + c0.imag * c0.imag
        # detector 1: label then Gaussian outcome, then Kraus update
        if u_xi < pL:
            label = -1.0
        elif u_xi < pL + p0:
            label = 0.0
        else:
            label = 1.0
        z1 = label + zn * sig_z
        w0 = math.exp(-lambda_1 * dt * z1 * z1)
        wL = math.exp(-lambda_1 * dt * (z1 + 1.0) * (z1 + 1.0))
        wR = math.exp(-lambda_1 * dt * (z1 - 1.0) * (z1 - 1.0))
        c0 = c0 * w0
        cL = cL * wL
        cR = cR * wR
        nrm = math.sqrt(c0.real**2 + c0.imag**2 + cL.real**2 + cL.imag**2
                        + cR.real**2 + cR.imag**2)
        c0 /= nrm
        cL /= nrm
        cR /= nrm
        D1 = dt * gamma_1 * z1 + (1.0 - dt * gamma_1) * D1
        # detector 2: projective charge readout
        p0 = c0.real * c0.real + c0.imag * c0.imag
        if u_z2 < p0:
            z2 = 1.0
            c0 = 1.0 + 0.0j
            cL = 0.0j
            cR = 0.0j
        else:
            z2 = -1.0
            occ = math.sqrt(cL.real**2 + cL.imag**2 + cR.real**2 + cR.imag**2)
            c0 = 0.0j
            cL /= occ
            cR /= occ
        # feedback
        if z2 > 0.0:
            cfg = 0
        elif D1 > 0.0:
            cfg = 2
        else:
            cfg = 1
        gL = rt[cfg, 0]
        kL = rt[cfg, 1]
        gR = rt[cfg, 2]
        kR = rt[cfg, 3]
        p0 = c0.real * c0.real + c0.imag * c0.imag
        pLL = cL.real * cL.real + cL.imag * cL.imag
        pRR = cR.real * cR.real + cR.imag * cR.imag
        p1 = dt * gL * p0
        p2 = dt * kL * pLL
        p3 = dt * gR * p0
        p4 = dt * kR * pRR
        ptot = p1 + p2 + p3 + p4
        if ptot > jump_cap:
            return n_rec, n_jumps, 1, c0, cL, cR, D1
        if u_gate < ptot:
            r = u_sel * ptot
            if r < p1:
                ch = 0
                c0, cL, cR = 0.0j, 1.0 + 0.0j, 0.0j
            elif r < p1 + p2:
                ch = 1
                c0, cL, cR = 1.0 + 0.0j, 0.0j, 0.0j
            elif r < p1 + p2 + p3:
                ch = 2
                c0, cL, cR = 0.0j, 0.0j, 1.0 + 0.0j
            else:
                ch = 3
                c0, cL, cR = 1.0 + 0.0j, 0.0j, 0.0j
            jump_t[n_jumps] = (k + 1) * dt
            jump_ch[n_jumps] = ch
            jump_cfg[n_jumps] = cfg + 1
            n_jumps += 1
        else:
            # no-jump: closed-form exp(-i H_eff dt)
            c0 = c0 * math.exp(-0.5 * (gL + gR) * dt)
            m00 = complex(eps[cfg, 0], -0.5 * kL)
            m11 = complex(eps[cfg, 1], -0.5 * kR)
            half_tr = 0.5 * (m00 + m11)
            dm = 0.5 * (m00 - m11)
            q = np.sqrt(dm * dm + g * g + 0j)
            if abs(q) * dt < 1e-12:
                sinc = complex(dt, 0.0)
                cosq = complex(1.0, 0.0)
            else:
                sinc = np.sin(q * dt) / q
                cosq = np.cos(q * dt)
            ph = np.exp(-1j * half_tr * dt)
            nL = ph * ((cosq - 1j * sinc * dm) * cL - 1j * sinc * g * cR)
            nR = ph * (-1j * sinc * g * cL + (cosq + 1j * sinc * dm) * cR)
            cL, cR = nL, nR
            nrm = math.sqrt(c0.real**2 + c0.imag**2 + cL.real**2 + cL.imag**2
                            + cR.real**2 + cR.imag**2)
            c0 /= nrm
            cL /= nrm
            cR /= nrm
        if (k + 1) % stride == 0:
            rec_t[n_rec] = (k + 1) * dt
            rec_D1[n_rec] = D1
            rec_imb[n_rec] = (cR.real**2 + cR.imag**2
                              - cL.real**2 - cL.imag**2)
            rec_cfg[n_rec] = cfg + 1
            rec_amp[n_rec, 0] = c0
            rec_amp[n_rec, 1] = cL
            rec_amp[n_rec, 2] = cR
            n_rec += 1
    return n_rec, n_jumps, 0, c0, cL, cR, D1


def run_trajectory(p: SystemParams, d: DetectorParams, ov: RateOverride,
                   cfgstep: StepConfig, t_end: float,
                   init: ConditionalState | None = None,
                   seed_seq: np.random.SeedSequence | None = None
                   ) -> TrajectoryRecord:
    """Simulate one trajectory; bit-reproducible for a given seed."""
    if init is None:
        init = ConditionalState.empty()
    init.require_normalized()
    nsteps = int(round(t_end / cfgstep.dt))
    if seed_seq is None:
        seed_seq = np.random.SeedSequence(cfgstep.seed)
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    draws = rng.random((nsteps, 4)) if nsteps else np.zeros((0, 4))
    normals = rng.standard_normal(nsteps) if nsteps else np.zeros(0)
    eps, rt = _config_tables(p, ov)
    n_rec_max = nsteps // cfgstep.record_stride + 1
    rec_t = np.zeros(n_rec_max)
    rec_D1 = np.zeros(n_rec_max)
    rec_imb = np.zeros(n_rec_max)
    rec_cfg = np.zeros(n_rec_max, dtype=np.int64)
    rec_amp = np.zeros((n_rec_max, 3), dtype=complex)
    jump_t = np.zeros(nsteps + 1)
    jump_ch = np.zeros(nsteps + 1, dtype=np.int64)
    jump_cfg = np.zeros(nsteps + 1, dtype=np.int64)
    n_rec, n_jumps, err, *_ = _run_kernel(
        init.amplitudes, init.D1, cfgstep.dt, nsteps, d.gamma_1, d.lambda_1,
        p.g, eps, rt, cfgstep.jump_cap, draws, normals, cfgstep.record_stride,
        rec_t, rec_D1, rec_imb, rec_cfg, rec_amp, jump_t, jump_ch, jump_cfg)
    if err:
        raise StepSizeError("jump probability exceeded cap; reduce dt")
    return TrajectoryRecord(rec_t[:n_rec], rec_D1[:n_rec], rec_imb[:n_rec],
                            rec_cfg[:n_rec], rec_amp[:n_rec],
                            jump_t[:n_jumps], jump_ch[:n_jumps],
                            jump_cfg[:n_jumps], cfgstep.seed, t_end,
                            cfgstep.dt)


def run_ensemble(p: SystemParams, d: DetectorParams, ov: RateOverride,
                 cfgstep: StepConfig, t_end: float, n_traj: int,
                 n_workers: int | None = None) -> list:
    """Independent trajectories with per-trajectory child seeds.

    Results are ordered by trajectory index regardless of scheduling, so
    ensembles are reproducible and order independent.
    """
    from concurrent.futures import ThreadPoolExecutor

    children = np.random.SeedSequence(cfgstep.seed).spawn(n_traj)

    def one(i):
        return run_trajectory(p, d, ov, cfgstep, t_end, None, children[i])

    if n_workers is None:
        import os
        n_workers = min(8, os.cpu_count() or 1)
    if n_workers <= 1 or n_traj == 1:
        return [one(i) for i in range(n_traj)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(one, range(n_traj)))


def _counts_one(rec: TrajectoryRecord, t_start: float) -> np.ndarray:
    """Net particle transfer counts per (bath, config) after burn-in."""
    counts = np.zeros((2, 3))
    for t, ch, cfg in zip(rec.jump_times, rec.jump_channel, rec.jump_config):
        if t < t_start:
            continue
        bath = 0 if ch in (CH_IN_L, CH_OUT_L) else 1
        sign = 1.0 if ch in (CH_IN_L, CH_IN_R) else -1.0
        counts[bath, cfg - 1] += sign
    return counts


def estimate_currents(records: list, p: SystemParams,
                      burn_in: float = 0.2) -> dict:
    """Jump-counting estimators with jackknife standard errors.

    Returns n_dot[bath][config], P and Qdot, each as (estimate, stderr).
    The first ``burn_in`` fraction of every trajectory is discarded.
    """
    if len(records) < 2:
        raise ValueError("need at least two trajectories for error estimates")
    if not 0.0 <= burn_in < 1.0:
        raise ValueError("burn_in must be in [0, 1)")
    t_end = records[0].t_end
    t_start = burn_in * t_end
    window = t_end - t_start
    per_traj = np.array([_counts_one(r, t_start) / window for r in records])
    m = len(records)

    def jack(stat):
        """stat maps a (2,3) mean-rate array to a scalar."""
        full = stat(per_traj.mean(axis=0))
        loo = np.array([
            stat((per_traj.sum(axis=0) - per_traj[i]) / (m - 1))
            for i in range(m)])
        se = math.sqrt((m - 1) / m * np.sum((loo - loo.mean())**2))
        return full, se

    from .energetics import config_energies

    def power(rates_):
        return p.mu_L * rates_[0].sum() + p.mu_R * rates_[1].sum()

    def heat(rates_):
        total = 0.0
        for b, mu in ((0, p.mu_L), (1, p.mu_R)):
            for j in range(3):
                eps = config_energies(j + 1, p)[b]
                total += (eps - mu) * rates_[b, j]
        return total

    out = {"P": jack(power), "Qdot": jack(heat), "n_dot": {}}
    for b, bath in ((0, "L"), (1, "R")):
        out["n_dot"][bath] = {}
        for j in range(3):
            out["n_dot"][bath][j + 1] = jack(lambda r, b=b, j=j: r[b, j])
    return out
