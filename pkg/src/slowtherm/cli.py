"""Command-line front end.

Reads one JSON configuration document, runs the requested computation and
writes CSV (or JSON for ``carnot``) whose header echoes the resolved
configuration. Exit status: 0 success, 1 invalid configuration, 2 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import carnot, exactprop, slowdrive, thermo
from .exceptions import NumericalError
from .protocol import SHAPES, cosine_ramp_protocol, driven_qubit_protocol, shaped_isotherm
from .superop import SIGMA_X, SIGMA_Y, SIGMA_Z, BathSpec

log = logging.getLogger("slowtherm")

UNITS = """\
units: hbar = k_B = 1; energies and frequencies in units of omega0 (the
frequency scale of the protocol), rates in units of gamma0, times in units
of 1/gamma0, temperatures as energies (beta = 1/T).

commands: steady, evolve, perturb, isotherm, carnot, sweep.
The configuration is a JSON object; unknown keys are rejected."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BathConfig(_Strict):
    beta: float = Field(gt=0)
    gamma0: float = Field(1.0, gt=0)
    alpha: float = 0.0


class DriveConfig(_Strict):
    name: Literal["appendixA-drive"]
    omega: float = Field(1.0, gt=0)
    delta0: float = 1.0


class RampConfig(_Strict):
    name: Literal["cosine-ramp"]
    omega_start: float = Field(gt=0)
    omega_end: float = Field(gt=0)


class IsothermConfig(_Strict):
    name: Literal["appendixC-isotherm"]
    shape: str = "cosine"
    omega0: float = Field(1.0, gt=0)
    scale: float = Field(1.0, gt=0)
    reversed: bool = False
    omega_min: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def _known_shape(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; choose from {sorted(SHAPES)}")
        return self


ProtocolConfig = Annotated[Union[DriveConfig, RampConfig, IsothermConfig],
                           Field(discriminator="name")]


class Tolerances(_Strict):
    integrator: float = Field(exactprop.DEFAULT_TOL, gt=0, lt=1)
    engine: float = Field(carnot.ENGINE_TOL, gt=0, lt=1)


class CarnotConfig(_Strict):
    T_H: float = Field(0.5, gt=0)
    T_C: float = Field(0.25, gt=0)
    alpha: float = 0.0
    gamma0: float = Field(1.0, gt=0)
    omega0: float = Field(1.0, gt=0)
    shape: str = "cosine"
    omega_min: Optional[float] = Field(None, ge=0)
    exact: bool = True


class SweepConfig(_Strict):
    ratios: list[float] = Field(min_length=1)
    alphas: list[float] = Field(min_length=1)
    beta_h_omega0: float = Field(2.0, gt=0)
    gamma0: float = Field(1.0, gt=0)
    omega0: float = Field(1.0, gt=0)
    shape: str = "cosine"
    exact: bool = True


_NEEDS = {
    "steady": ("protocol", "bath"),
    "evolve": ("protocol", "bath", "tau"),
    "perturb": ("protocol", "bath", "tau"),
    "isotherm": ("protocol", "bath"),
    "carnot": ("carnot",),
    "sweep": ("sweep",),
}


class RunConfig(_Strict):
    command: Literal["steady", "evolve", "perturb", "isotherm", "carnot", "sweep"]
    protocol: Optional[ProtocolConfig] = None
    bath: Optional[BathConfig] = None
    tau: Optional[float] = Field(None, gt=0)
    tau_H: Optional[float] = Field(None, gt=0)
    tau_C: Optional[float] = Field(None, gt=0)
    order: int = Field(slowdrive.DEFAULT_ORDER, ge=0, le=6)
    points: int = Field(201, ge=2, le=100001)
    initial_state: Literal["maximally-mixed", "steady"] = "maximally-mixed"
    tolerances: Tolerances = Field(default_factory=Tolerances)
    carnot: Optional[CarnotConfig] = None
    sweep: Optional[SweepConfig] = None
    output: Optional[str] = None
    seed: int = 0

    @model_validator(mode="after")
    def _required_sections(self):
        missing = [k for k in _NEEDS[self.command] if getattr(self, k) is None]
        if missing:
            raise ValueError(f"command {self.command!r} needs: {', '.join(missing)}")
        if (self.tau_H is None) != (self.tau_C is None):
            raise ValueError("tau_H and tau_C must be given together")
        return self


class ConfigError(ValueError):
    pass


# -- setup -----------------------------------------------------------------------------

def _build_protocol(cfg: RunConfig):
    bath = BathSpec(beta=cfg.bath.beta, gamma0=cfg.bath.gamma0, alpha=cfg.bath.alpha)
    pc = cfg.protocol
    if isinstance(pc, DriveConfig):
        p = driven_qubit_protocol(pc.omega, pc.delta0, bath, cfg.tau)
    elif isinstance(pc, RampConfig):
        p = cosine_ramp_protocol(pc.omega_start, pc.omega_end, bath, cfg.tau)
    else:
        p = shaped_isotherm(pc.shape, pc.omega0, bath, cfg.tau, scale=pc.scale,
                            reversed_=pc.reversed, omega_min=pc.omega_min)
    p.check_relaxing()
    return p


def _carnot_spec(cc: CarnotConfig) -> carnot.CarnotSpec:
    spec = carnot.CarnotSpec(T_H=cc.T_H, T_C=cc.T_C, alpha=cc.alpha, gamma0=cc.gamma0,
                             omega0=cc.omega0, hot_isotherm_shape=cc.shape,
                             omega_min=cc.omega_min)
    carnot.build_cycle(spec)  # validates the shape
    return spec


def prepare(cfg: RunConfig):
    """Turn a validated config into domain objects; raises ConfigError."""
    try:
        if cfg.command in ("steady", "evolve", "perturb", "isotherm"):
            return _build_protocol(cfg)
        if cfg.command == "carnot":
            return _carnot_spec(cfg.carnot)
        sc = cfg.sweep
        if any(not 0.0 < r <= 1.0 for r in sc.ratios):
            raise ValueError("sweep ratios must lie in (0, 1]")
        if sc.shape not in SHAPES:
            raise ValueError(f"unknown shape {sc.shape!r}")
        t_h = sc.omega0 / sc.beta_h_omega0
        return carnot.CarnotSpec(T_H=t_h, T_C=0.5 * t_h, gamma0=sc.gamma0, omega0=sc.omega0,
                                 hot_isotherm_shape=sc.shape)
    except NumericalError as exc:
        raise ConfigError(f"protocol is not admissible: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- commands --------------------------------------------------------------------------

def _bloch(rho):
    return [np.einsum("...ij,ji->...", rho, s).real for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)]


def _initial_state(cfg, p):
    if cfg.initial_state == "steady":
        return p.steady_state(0.0)
    return np.eye(p.dim, dtype=complex) / p.dim


def cmd_steady(cfg, p):
    ts = np.linspace(0.0, 1.0, cfg.points)
    rho = p.steady_state(ts)
    d = p.dim
    cols = ["t_prime"] + [f"{part}_rho_{i}{j}" for i in range(d) for j in range(d)
                          for part in ("re", "im")]
    rows = []
    for t, r in zip(ts, rho):
        vals = [t]
        for z in r.ravel():
            vals += [z.real, z.imag]
        rows.append(vals)
    return cols, rows


def cmd_evolve(cfg, p):
    traj = exactprop.integrate(p, _initial_state(cfg, p), tol=cfg.tolerances.integrator)
    ts = np.linspace(0.0, 1.0, cfg.points)
    sx, sy, sz = _bloch(traj.rescaled(ts))
    cols = ["t", "t_prime", "sx", "sy", "sz"]
    return cols, [list(r) for r in zip(ts * p.tau, ts, sx, sy, sz)]


def cmd_perturb(cfg, p):
    ts = np.linspace(0.0, 1.0, cfg.points)
    traj = exactprop.integrate(p, _initial_state(cfg, p), tol=cfg.tolerances.integrator)
    _, sy_ex, sz_ex = _bloch(traj.rescaled(ts))
    series = slowdrive.perturbation_series(p, ts, cfg.order)
    partial = np.cumsum(series / p.tau ** np.arange(cfg.order + 1)[:, None, None, None], axis=0)
    _, sy_j, sz_j = _bloch(partial)
    orders = range(cfg.order + 1)
    cols = (["t_prime", "sz_exact"] + [f"sz_ord{j}" for j in orders]
            + ["sy_exact"] + [f"sy_ord{j}" for j in orders])
    data = np.column_stack([ts, sz_ex, *sz_j, sy_ex, *sy_j])
    return cols, data.tolist()


def cmd_isotherm(cfg, p):
    exp = thermo.expand(p, cfg.order)
    cols = ["j", "Q", "W", "dU", "first_law_residual"]
    rows = [[j, exp.Q_coeffs[j], exp.W_coeffs[j], exp.delta_u(j), exp.first_law_residual(j)]
            for j in range(exp.order + 1)]
    return cols, rows


def cmd_carnot(cfg, spec):
    if cfg.tau_H is not None:
        q = carnot.first_order_heats(spec)
        out = dict(zip(("Q0H", "Q0C", "Q1H", "Q1C"), q))
        out.update(tau_H=cfg.tau_H, tau_C=cfg.tau_C,
                   eta_first_order=carnot.first_order_efficiency(*q, cfg.tau_H, cfg.tau_C),
                   P_first_order=carnot.first_order_power(*q, cfg.tau_H, cfg.tau_C))
        tau_h, tau_c = cfg.tau_H, cfg.tau_C
    else:
        res = carnot.analyze(spec)
        out = res.as_dict()
        tau_h, tau_c = res.tau_H_opt, res.tau_C_opt
    out["eta_carnot"] = spec.eta_carnot
    if cfg.carnot.exact:
        eng = carnot.simulate_exact_engine(spec, tau_h, tau_c, tol=cfg.tolerances.engine)
        out.update(QH_exact=eng.QH, QC_exact=eng.QC, W_exact=eng.W, eta_exact=eng.eta,
                   engine_flag=eng.flag, cycles=eng.cycles)
    return out


def cmd_sweep(cfg, template, jobs):
    sc = cfg.sweep
    rows = carnot.sweep(template, sc.ratios, sc.alphas, jobs=jobs, exact=sc.exact)
    cols = list(carnot.SWEEP_COLUMNS)
    return cols, [[r[c] for c in cols] for r in rows]


# -- output ----------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, str)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise NumericalError(f"non-finite value {x!r} in output")
    return f"{x:.17g}"


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        raise NumericalError(f"non-finite value {x!r} in output")
    return x


def _header(cfg: RunConfig) -> str:
    text = json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)
    return "".join(f"# {line}\r\n" for line in text.splitlines())


def render_csv(cfg, cols, rows) -> str:
    buf = io.StringIO()
    buf.write(_header(cfg))
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def render_json(cfg, result: dict) -> str:
    doc = {"config": cfg.model_dump(mode="json"),
           "result": {k: _json_value(v) for k, v in result.items()}}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run(cfg: RunConfig, jobs: int | None = None) -> str:
    """Execute a validated configuration and return the rendered output."""
    obj = prepare(cfg)
    if cfg.command == "carnot":
        return render_json(cfg, cmd_carnot(cfg, obj))
    if cfg.command == "sweep":
        cols, rows = cmd_sweep(cfg, obj, jobs)
    else:
        handler = {"steady": cmd_steady, "evolve": cmd_evolve,
                   "perturb": cmd_perturb, "isotherm": cmd_isotherm}[cfg.command]
        cols, rows = handler(cfg, obj)
    return render_csv(cfg, cols, rows)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _write(path: str, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="slowtherm",
        description="Slow-driving expansion of thermal master equations and "
                    "finite-time Carnot engines.",
        epilog=UNITS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--output", help="output file (overrides 'output' in the config; "
                                     "default: standard output)")
    ap.add_argument("--jobs", type=int, default=None,
                    help="worker processes for sweeps (default: logical CPUs)")
    ap.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.jobs is not None and args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
        if args.output:
            cfg = cfg.model_copy(update={"output": args.output})
        text = run(cfg, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    if cfg.output:
        _write(cfg.output, text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
