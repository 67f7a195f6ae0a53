"""Versioned parameter presets for the reference sweeps.

Every preset pins the base operating point Gamma/T = 0.1, bias eV/T = 3
(mu_L = -1.5, mu_R = +1.5), eps_0 = 0, eps_d = -eps_u, Gamma_phi = 0 in
units of T, and declares which model curves belong to the named data set.
All sweep axes and model names match the CLI vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import DetectorParams, RateOverride, SystemParams

__all__ = ["FigurePreset", "FIGURE_PRESETS", "base_system", "base_detector"]


def base_system(eps_u: float = 5.0, g: float = 0.1,
                Gamma_phi: float = 0.0) -> SystemParams:
    """The shared operating point; eps_d mirrors -eps_u."""
    return SystemParams(Gamma=0.1, g=g, T=1.0, mu_L=-1.5, mu_R=1.5,
                       eps_0=0.0, eps_u=eps_u, eps_d=-eps_u,
                       Gamma_phi=Gamma_phi)


def base_detector(gamma_1: float = 10.0, lambda_1: float = 1.0) -> DetectorParams:
    return DetectorParams(gamma_1=gamma_1, lambda_1=lambda_1)


@dataclass(frozen=True)
class FigurePreset:
    """One reference data set: fixed parameters, a sweep axis, model lines.

    ``variants`` maps a line label to (system, detector, model, override)
    quadruples; the sweep axis is applied to each variant independently.
    """

    tag: str
    sweep_field: str
    sweep_values: tuple
    variants: tuple  # of (label, SystemParams, DetectorParams, model, RateOverride)
    note: str = ""


def _lam_over_g1(gamma_1: float, lo=-2.0, hi=3.0, n=25) -> tuple:
    """lambda_1 values spanning lambda_1/gamma_1 in [10^lo, 10^hi]."""
    return tuple(gamma_1 * np.logspace(lo, hi, n))


_NONE = RateOverride.none()
_EC = RateOverride.energy_conserving()


def _build_presets() -> dict:
    presets = {}

    # the three model lines of the simplifying-assumption comparison:
    # full solve, fast-detector generator, and energy-conserving solve
    def _comparison_lines(p, d):
        return (
            ("ideal", p, d, "spectral-quantum", _NONE),
            ("fast-detector", p, d, "fast-generator", _NONE),
            ("energy-conserving", p, d, "spectral-quantum", _EC),
        )

    # interdot-coupling sweep at slow filtering
    presets["fig3a"] = FigurePreset(
        tag="fig3a", sweep_field="g",
        sweep_values=tuple(np.logspace(-2, 0, 25)),
        variants=_comparison_lines(base_system(5.0), base_detector(10.0, 1.0)),
        note="power vs interdot coupling, eps_u/T = 5, gamma_1/T = 10, lambda_1/T = 1")

    # measurement-strength sweep showing the interior power maximum
    presets["fig3b"] = FigurePreset(
        tag="fig3b", sweep_field="lambda_1",
        sweep_values=_lam_over_g1(10.0, -2.0, 3.0, 31),
        variants=_comparison_lines(base_system(5.0), base_detector(10.0, 1.0)),
        note="power vs lambda_1, eps_u/T = 5, gamma_1/T = 10")

    # detuning sweep with eps_d = -eps_u mirrored along the axis
    presets["fig3c"] = FigurePreset(
        tag="fig3c", sweep_field="eps_u_sym",
        sweep_values=tuple(np.linspace(2.0, 20.0, 19)),
        variants=_comparison_lines(base_system(5.0), base_detector(10.0, 1.0)),
        note="power vs detuning, lambda_1/T = 1, gamma_1/T = 10, g/T = 0.1")

    # fast-detector validity: filter bandwidths and detunings x three models
    variants = []
    for g1, eps_u in ((0.1, 5.0), (1.0, 5.0), (10.0, 5.0), (10.0, 15.0)):
        suffix = f"g1={g1:g}-eu={eps_u:g}"
        p = base_system(eps_u)
        d = base_detector(g1, 1.0)
        variants.append((f"spectral-{suffix}", p, d, "spectral-quantum", _NONE))
        variants.append((f"generator-{suffix}", p, d, "fast-generator", _NONE))
        variants.append((f"analytic-{suffix}", p, d, "fast-analytic", _NONE))
    presets["fig4a"] = FigurePreset(
        tag="fig4a", sweep_field="lambda_1_ratio",
        sweep_values=tuple(np.logspace(-2, 2, 21)),
        variants=tuple(variants),
        note="fast-detector validity: power vs lambda_1/gamma_1")

    # full solve with and without the energy-conserving rate suppression
    variants = []
    for eps_u in (5.0, 15.0):
        p = base_system(eps_u)
        d = base_detector(10.0, 1.0)
        variants.append((f"ideal-eu={eps_u:g}", p, d, "spectral-quantum", _NONE))
        variants.append((f"energy-conserving-eu={eps_u:g}", p, d,
                         "spectral-quantum", _EC))
    presets["fig4b"] = FigurePreset(
        tag="fig4b", sweep_field="lambda_1_ratio",
        sweep_values=tuple(np.logspace(-2, 2, 21)),
        variants=tuple(variants),
        note="energy-conserving comparison, gamma_1/T = 10")

    # quantum vs classical spectral branches
    fig5_panels = (("fig5a", 0.1, 5.0), ("fig5b", 1.0, 5.0), ("fig5c", 10.0, 15.0))
    for tag, g1, eps_u in fig5_panels:
        presets[tag] = FigurePreset(
            tag=tag, sweep_field="lambda_1_ratio",
            sweep_values=tuple(np.logspace(-2, 2, 21)),
            variants=(
                ("quantum", base_system(eps_u), base_detector(g1, 1.0),
                 "spectral-quantum", _NONE),
                ("classical", base_system(eps_u), base_detector(g1, 1.0),
                 "spectral-classical", _NONE),
            ),
            note=f"quantum vs classical, gamma_1/T = {g1:g}, eps_u/T = {eps_u:g}")

    # extra-dephasing sweep merging the quantum and classical branches
    presets["fig7"] = FigurePreset(
        tag="fig7", sweep_field="Gamma_phi",
        sweep_values=tuple(np.logspace(-2, 2, 17)),
        variants=(
            ("quantum", base_system(5.0), base_detector(1.0, 1.0),
             "spectral-quantum", _NONE),
            ("classical", base_system(5.0), base_detector(1.0, 1.0),
             "spectral-classical", _NONE),
        ),
        note="power vs pure dephasing, lambda_1/T = 1, gamma_1/T = 1, eps_u/T = 5")

    # local vs eigenbasis dissipators at three interdot couplings
    variants = []
    for g in (0.05, 0.1, 0.5):
        variants.append((f"local-g={g:g}", base_system(5.0, g=g),
                         base_detector(10.0, 1.0), "fast-generator", _NONE))
        variants.append((f"global-g={g:g}", base_system(5.0, g=g),
                         base_detector(10.0, 1.0), "global-fcs", _NONE))
    presets["fig8"] = FigurePreset(
        tag="fig8", sweep_field="lambda_1_ratio",
        sweep_values=tuple(np.logspace(-2, 2, 21)),
        variants=tuple(variants),
        note="local vs eigenbasis fast-detector power, eps_u/T = 5, gamma_1/T = 10")

    return presets


FIGURE_PRESETS = _build_presets()
