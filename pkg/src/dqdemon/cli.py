"""Command-line harness: config loading, sweeps, reference data sets,
trajectory runs, and the detector-coupling post-processing utility.

Output is CSV with a commented ``# key = value`` header echoing the full
configuration; identical config and seed give byte-identical files. All
quantities are in units of T (the config must still state T explicitly).
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import energetics, reduced, spectral, trajectory
from .params import (
    DetectorParams,
    InvalidParameterError,
    RateOverride,
    SystemParams,
)
from .presets import FIGURE_PRESETS

__all__ = [
    "RunConfig",
    "PostProcessCoefficients",
    "ConfigError",
    "load_config",
    "evaluate_point",
    "run_sweep",
    "write_table",
    "postprocess_coefficients",
    "main",
]

MODELS = ("spectral-quantum", "spectral-classical", "fast-analytic",
          "fast-generator", "classical-ideal", "global-fcs", "trajectory")

# direct sweepable scalars, plus the derived axes handled in _apply_axis
_SYSTEM_FIELDS = ("Gamma", "g", "mu_L", "mu_R", "eps_0", "eps_u", "eps_d",
                  "Gamma_phi")
_DETECTOR_FIELDS = ("gamma_1", "lambda_1")
SWEEP_AXES = _SYSTEM_FIELDS + _DETECTOR_FIELDS + ("eps_u_sym", "lambda_1_ratio")

COLUMNS = ("sweep_value", "P", "Qdot", "EdotD", "EdotM", "EdotB", "EdotG",
           "n_dot_L1", "n_dot_L2", "n_dot_L3",
           "n_dot_R1", "n_dot_R2", "n_dot_R3",
           "eta", "xi", "residual", "gap", "N_used", "flags")


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


@dataclass(frozen=True)
class RunConfig:
    model: str
    params: SystemParams
    detector: DetectorParams
    overrides: RateOverride = RateOverride.none()
    sweep_field: str | None = None
    sweep_values: tuple = ()
    N: int = 100
    t_end: float = 100.0
    dt: float = 1e-3
    record_stride: int = 100

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; "
                              f"choose one of {', '.join(MODELS)}")
        if self.sweep_field is not None:
            if self.sweep_field not in SWEEP_AXES:
                raise ConfigError(f"unknown sweep axis {self.sweep_field!r}; "
                                  f"choose one of {', '.join(SWEEP_AXES)}")
            if not self.sweep_values:
                raise ConfigError("sweep value list is empty")
            if not all(math.isfinite(v) for v in self.sweep_values):
                raise ConfigError("sweep values must be finite")


_CONFIG_KEYS = {
    "model", "T", "Gamma", "g", "mu_L", "mu_R", "eps_0", "eps_u", "eps_d",
    "Gamma_phi", "gamma_1", "lambda_1", "N", "t_end", "dt", "record_stride",
    "zeroed",
}
_REQUIRED_KEYS = {"T", "gamma_1", "lambda_1"}


def load_config(path, sweep_field: str | None = None,
                sweep_values: tuple = ()) -> RunConfig:
    """Parse a flat ``key = value`` config file into a RunConfig.

    Unknown keys are rejected with the offending line number; ``#`` starts
    a comment. ``zeroed`` lists rate switches to turn off, as
    comma-separated ``bath:level`` pairs (e.g. ``L:eps_u``).
    """
    raw = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = (value, lineno)

    missing = _REQUIRED_KEYS - raw.keys()
    if missing:
        raise ConfigError(f"{path}: missing required keys: "
                          + ", ".join(sorted(missing)))

    def num(key, default=None, cast=float):
        if key not in raw:
            return default
        value, lineno = raw[key]
        try:
            return cast(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: "
                              f"{value!r}") from exc

    model = raw.get("model", ("spectral-quantum", 0))[0]
    eps_u = num("eps_u", 5.0)
    system_kwargs = dict(
        Gamma=num("Gamma", 0.1), g=num("g", 0.1), T=num("T"),
        mu_L=num("mu_L", -1.5), mu_R=num("mu_R", 1.5),
        eps_0=num("eps_0", 0.0), eps_u=eps_u,
        eps_d=num("eps_d", -eps_u), Gamma_phi=num("Gamma_phi", 0.0))
    try:
        params = SystemParams(**system_kwargs)
        detector = DetectorParams(gamma_1=num("gamma_1"),
                                  lambda_1=num("lambda_1"))
    except InvalidParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    overrides = RateOverride.none()
    if "zeroed" in raw:
        value, lineno = raw["zeroed"]
        pairs = []
        for item in value.split(","):
            item = item.strip()
            if not item:
                continue
            bath, _, label = item.partition(":")
            pairs.append((bath.strip(), label.strip()))
        try:
            overrides = RateOverride.of(*pairs)
        except InvalidParameterError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc

    return RunConfig(model=model, params=params, detector=detector,
                     overrides=overrides, sweep_field=sweep_field,
                     sweep_values=tuple(sweep_values),
                     N=num("N", 100, int), t_end=num("t_end", 100.0),
                     dt=num("dt", 1e-3),
                     record_stride=num("record_stride", 100, int))


def parse_sweep(spec: str) -> tuple:
    """``field=start:stop:points`` (linspace) or ``field=v1,v2,...``."""
    if "=" not in spec:
        raise ConfigError(f"bad sweep spec {spec!r}: expected field=values")
    field_name, _, values = spec.partition("=")
    field_name = field_name.strip()
    values = values.strip()
    try:
        if "," in values:
            vals = tuple(float(v) for v in values.split(",") if v.strip())
        elif ":" in values:
            start, stop, npts = values.split(":")
            vals = tuple(np.linspace(float(start), float(stop), int(npts)))
        else:
            vals = (float(values),)
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {values!r}") from exc
    return field_name, vals


def _apply_axis(p: SystemParams, d: DetectorParams, axis: str, value: float):
    """Return (params, detector) with the sweep axis set to ``value``."""
    if axis in _SYSTEM_FIELDS:
        return p.replace(**{axis: value}), d
    if axis in _DETECTOR_FIELDS:
        return p, d.replace(**{axis: value})
    if axis == "eps_u_sym":
        return p.replace(eps_u=value, eps_d=-value), d
    if axis == "lambda_1_ratio":
        return p, d.replace(lambda_1=value * d.gamma_1)
    raise ConfigError(f"unknown sweep axis {axis!r}")


def _blank_row(value: float) -> dict:
    row = {k: math.nan for k in COLUMNS}
    row["sweep_value"] = value
    row["N_used"] = 0
    row["flags"] = ""
    return row


def _fill_currents(row: dict, n_dot: dict):
    for bath in ("L", "R"):
        for j in (1, 2, 3):
            row[f"n_dot_{bath}{j}"] = n_dot.get(bath, {}).get(j, math.nan)


def evaluate_point(model: str, p: SystemParams, d: DetectorParams,
                   ov: RateOverride, N: int = 100,
                   value: float = math.nan) -> dict:
    """One table row for one model at one parameter point."""
    row = _blank_row(value)
    row["eta"] = reduced.error_probability(d.lambda_1, d.gamma_1)
    row["xi"] = reduced.xi_effective(p, d, ov)
    flags = list(reduced.validity_flags(p))

    if model in ("spectral-quantum", "spectral-classical"):
        classical = model == "spectral-classical"
        # fixed truncation order for deterministic sweep tables; the
        # residual/gap/N_used diagnostics let readers judge each row
        res = spectral.solve_steady(p, d, ov, N=N, classical=classical,
                                    check_convergence=False)
        cur = energetics.ParticleCurrents(res.currents)
        flows = energetics.energy_flows(res.report.coefficients, p, d, ov, cur)
        row.update(P=flows.P, Qdot=flows.Qdot, EdotD=flows.EdotD,
                   EdotM=flows.EdotM, EdotB=flows.EdotB, EdotG=flows.EdotG,
                   residual=res.report.residual_norm,
                   gap=res.report.singular_gap, N_used=res.report.N_used)
        _fill_currents(row, res.currents)
        flags.extend(res.flags)
    elif model == "fast-analytic":
        P = reduced.power_analytic(p, d, ov)
        Q = reduced.heat_analytic(p, d, ov)
        row.update(P=P, Qdot=Q, EdotD=-(P + Q))
    elif model in ("fast-generator", "global-fcs"):
        use_global = model == "global-fcs"
        n_dot = reduced.fast_detector_currents(p, d, ov, use_global)
        cur = energetics.ParticleCurrents(n_dot)
        P = energetics.power_from_currents(cur, p)
        Q = energetics.heat_from_currents(cur, p)
        row.update(P=P, Qdot=Q, EdotD=-(P + Q))
        _fill_currents(row, n_dot)
    elif model == "classical-ideal":
        _pops, current = reduced.classical_ideal_steady(p, d, ov)
        n_dot = {"L": {1: current, 2: 0.0, 3: 0.0},
                 "R": {1: 0.0, 2: -current, 3: 0.0}}
        cur = energetics.ParticleCurrents(n_dot)
        P = energetics.power_from_currents(cur, p)
        Q = energetics.heat_from_currents(cur, p)
        row.update(P=P, Qdot=Q, EdotD=-(P + Q))
        _fill_currents(row, n_dot)
    else:
        raise ConfigError(f"model {model!r} is not a sweepable point model")
    row["flags"] = ";".join(flags)
    return row


def run_sweep(cfg: RunConfig, n_workers: int | None = None) -> list:
    """Evaluate every sweep point independently; failures stay in-row.

    Rows come back sorted by sweep value. A point that raises records the
    exception type in its flags column and leaves the numbers as NaN.
    """
    if cfg.sweep_field is None:
        values = (math.nan,)
        axis = None
    else:
        values = tuple(sorted(cfg.sweep_values))
        axis = cfg.sweep_field

    def one(value):
        p, d = (cfg.params, cfg.detector) if axis is None \
            else _apply_axis(cfg.params, cfg.detector, axis, value)
        try:
            return evaluate_point(cfg.model, p, d, cfg.overrides, cfg.N, value)
        except Exception as exc:  # per-point isolation is the contract
            row = _blank_row(value)
            row["flags"] = f"error:{type(exc).__name__}"
            return row

    if n_workers is None:
        import os
        n_workers = min(len(values), os.cpu_count() or 1)
    if n_workers <= 1 or len(values) == 1:
        return [one(v) for v in values]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(one, values))


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v == 0.0:
        v = 0.0  # normalize -0.0
    return f"{v:.12g}"


def write_table(rows: list, out, header: dict):
    """Write rows as CSV with a commented key=value configuration echo."""
    lines = [f"# {k} = {v}" for k, v in header.items()]
    lines.append(",".join(COLUMNS))
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in COLUMNS))
    text = "\n".join(lines) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _config_echo(cfg: RunConfig) -> dict:
    echo = {"model": cfg.model}
    for f in fields(SystemParams):
        echo[f.name] = _fmt(getattr(cfg.params, f.name))
    echo["gamma_1"] = _fmt(cfg.detector.gamma_1)
    echo["lambda_1"] = _fmt(cfg.detector.lambda_1)
    if cfg.overrides.zeroed:
        echo["zeroed"] = ",".join(f"{b}:{l}" for b, l
                                  in sorted(cfg.overrides.zeroed))
    echo["N"] = cfg.N
    if cfg.sweep_field:
        echo["sweep"] = cfg.sweep_field
    return echo


@dataclass(frozen=True)
class PostProcessCoefficients:
    """Affine remap of detector couplings onto the canonical target points.

    The map (A, B) -> (x*A + y*B + D0, z*A + w*B + D0p) sends the coupling
    pairs of the empty/left/right states to (0, 1), (-1, -1), (1, -1).
    """

    x: float
    y: float
    z: float
    w: float
    D0: float
    D0p: float
    normalizer: float

    def apply(self, A: float, B: float) -> tuple:
        return (self.x * A + self.y * B + self.D0,
                self.z * A + self.w * B + self.D0p)


def postprocess_coefficients(a0: float, aL: float, aR: float,
                             b0: float, bL: float, bR: float
                             ) -> PostProcessCoefficients:
    """Closed-form coefficients of the canonicalizing affine map.

    Raises on collinear couplings (degenerate geometry, normalizer 0).
    """
    norm = a0 * (bR - bL) + aL * (b0 - bR) + aR * (bL - b0)
    if norm == 0.0:
        raise ValueError("detector couplings are collinear: "
                         "the canonicalizing map is degenerate")
    x = (bL + bR - 2.0 * b0) / norm
    y = (2.0 * a0 - aL - aR) / norm
    z = 2.0 * (bR - bL) / norm
    w = 2.0 * (aL - aR) / norm
    D0 = (b0 * (aL + aR) - a0 * (bL + bR)) / norm
    D0p = (a0 * (bL - bR) - aL * (b0 + bR) + aR * (b0 + bL)) / norm
    return PostProcessCoefficients(x, y, z, w, D0, D0p, norm)


def _cmd_solve(args) -> int:
    sweep_field, sweep_values = (None, ())
    if args.sweep:
        sweep_field, sweep_values = parse_sweep(args.sweep)
    cfg = load_config(args.config, sweep_field, sweep_values)
    rows = run_sweep(cfg, args.workers)
    write_table(rows, args.out, _config_echo(cfg))
    return 0


def _cmd_figure(args) -> int:
    if args.tag not in FIGURE_PRESETS:
        print(f"unknown figure tag {args.tag!r}; available: "
              + ", ".join(sorted(FIGURE_PRESETS)), file=sys.stderr)
        return 2
    preset = FIGURE_PRESETS[args.tag]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for label, p, d, model, ov in preset.variants:
        cfg = RunConfig(model=model, params=p, detector=d, overrides=ov,
                        sweep_field=preset.sweep_field,
                        sweep_values=preset.sweep_values)
        rows = run_sweep(cfg, args.workers)
        header = _config_echo(cfg)
        header["figure"] = preset.tag
        header["line"] = label
        header["note"] = preset.note
        write_table(rows, outdir / f"{preset.tag}_{label}.csv", header)
    return 0


def _cmd_traj(args) -> int:
    cfg = load_config(args.config)
    if cfg.model != "trajectory":
        raise ConfigError(f"traj requires model = trajectory, got {cfg.model!r}")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    step_cfg = trajectory.StepConfig(dt=cfg.dt, seed=args.seed,
                                     record_stride=cfg.record_stride)
    records = trajectory.run_ensemble(cfg.params, cfg.detector, cfg.overrides,
                                      step_cfg, cfg.t_end, args.n)
    for i, rec in enumerate(records):
        lines = [f"# seed = {args.seed}", f"# trajectory = {i}",
                 f"# dt = {_fmt(cfg.dt)}", f"# t_end = {_fmt(cfg.t_end)}",
                 "t,D1,imbalance,config"]
        for t, D1, imb, c in zip(rec.times, rec.D1, rec.imbalance, rec.config):
            lines.append(f"{_fmt(t)},{_fmt(D1)},{_fmt(imb)},{int(c)}")
        (outdir / f"traj_{i:04d}.csv").write_text("\n".join(lines) + "\n")
    if len(records) >= 2:
        est = trajectory.estimate_currents(records, cfg.params)
        lines = [f"# seed = {args.seed}", f"# n_traj = {args.n}",
                 "quantity,estimate,stderr"]
        for name in ("P", "Qdot"):
            val, se = est[name]
            lines.append(f"{name},{_fmt(val)},{_fmt(se)}")
        for bath in ("L", "R"):
            for j in (1, 2, 3):
                val, se = est["n_dot"][bath][j]
                lines.append(f"n_dot_{bath}{j},{_fmt(val)},{_fmt(se)}")
        (outdir / "ensemble_summary.csv").write_text("\n".join(lines) + "\n")
    return 0


def _cmd_postprocess(args) -> int:
    parts = [s.strip() for s in args.couplings.split(",")]
    if len(parts) != 6:
        print("--couplings expects six values: a0,aL,aR,b0,bL,bR",
              file=sys.stderr)
        return 2
    try:
        vals = [float(v) for v in parts]
    except ValueError:
        print(f"bad couplings {args.couplings!r}", file=sys.stderr)
        return 2
    coeffs = postprocess_coefficients(*vals)
    for name in ("x", "y", "z", "w", "D0", "D0p", "normalizer"):
        print(f"{name} = {_fmt(getattr(coeffs, name))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demon",
        description="Feedback-controlled double-dot steady states, sweeps, "
                    "and stochastic trajectories (units of T).")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one config, optionally sweeping")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--sweep", default=None,
                         metavar="FIELD=START:STOP:POINTS|FIELD=V1,V2,...")
    p_solve.add_argument("--out", default="-")
    p_solve.add_argument("--workers", type=int, default=None)
    p_solve.set_defaults(func=_cmd_solve)

    p_fig = sub.add_parser("figure", help="emit a reference data set")
    p_fig.add_argument("tag", choices=sorted(FIGURE_PRESETS))
    p_fig.add_argument("--out", required=True)
    p_fig.add_argument("--workers", type=int, default=None)
    p_fig.set_defaults(func=_cmd_figure)

    p_traj = sub.add_parser("traj", help="run stochastic trajectories")
    p_traj.add_argument("--config", required=True)
    p_traj.add_argument("--n", type=int, required=True)
    p_traj.add_argument("--seed", type=int, required=True)
    p_traj.add_argument("--out", required=True)
    p_traj.set_defaults(func=_cmd_traj)

    p_pp = sub.add_parser("postprocess",
                          help="canonicalizing map for detector couplings")
    p_pp.add_argument("--couplings", required=True, metavar="a0,aL,aR,b0,bL,bR")
    p_pp.set_defaults(func=_cmd_postprocess)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidParameterError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
