"""Command-line front end.

Subcommands::

    certify-one FIELD          integrate one field and evaluate its certificate
    verify-ball {h2,v} RADIUS  run a ball campaign (checkpointed, resumable)
    lattice-info S             lattice parameters and size, no integration
    emit-series FIELD          CSV of norm time series

Settings come from a TOML file (``--config`` or ``$ENSTROPHY_CERT_CONFIG``)
whose keys are the field names of :class:`RunConfig`; command-line flags
override the file.

Exit codes: 0 certified, 2 inconclusive / not certified, 3 diverged or
resolution failure, 4 infeasible robustness radius, 5 lattice above the
count cap, 64 bad input or configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace

from .campaign import CampaignConfig, CheckpointError, run_campaign
from .certify import CertificationError, certification_horizon, evaluate_certificate, t_star
from .constants import K_CONST_DEFAULT, K1_DEFAULT, ConstantsLedger
from .covering import (
    DEFAULT_COUNT_CAP,
    RULES,
    CountCapError,
    InfeasibleDeltaError,
    LatticeSpec,
    choose_M,
    choose_N,
    lattice_count,
)
from .galerkin import SCHEMES, DivergenceError, IntegratorConfig, integrate, series_csv
from .spectral import FieldError, GevreyOverflowError, load_field, resize

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK = 0
EXIT_INCONCLUSIVE = 2
EXIT_DIVERGED = 3
EXIT_INFEASIBLE_DELTA = 4
EXIT_COUNT_CAP = 5
EXIT_USAGE = 64
CONFIG_ENV = "ENSTROPHY_CERT_CONFIG"
LATTICE_INFO_SCHEMA = "enstrophy-cert-lattice-info"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    resolution: int = 8
    n_modes: int | None = None
    dt: float = 1e-3
    scheme: str = "integrating_factor_rk4"
    t_star: float | None = None
    const_c: float | None = None
    const_k: float = K_CONST_DEFAULT
    const_k1: float = K1_DEFAULT
    workers: int = os.cpu_count() or 1
    checkpoint: str | None = None
    count_cap: int = DEFAULT_COUNT_CAP
    safety_factor: float = 2.0
    pilot_samples: int = 16
    seed: int = 0
    delta: float | None = None
    lattice_rule: str = "safe"
    small_data_shortcut: bool = True

    def __post_init__(self):
        for name in ("resolution", "workers", "count_cap", "pilot_samples"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.n_modes is not None and (not isinstance(self.n_modes, int) or self.n_modes < 1):
            raise ConfigError("n_modes must be a positive integer")
        for name in ("dt", "const_k", "const_k1"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        for name in ("t_star", "const_c", "delta"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if self.safety_factor < 1:
            raise ConfigError("safety_factor must be at least 1")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.lattice_rule not in RULES:
            raise ConfigError(f"lattice_rule must be one of {RULES}")

    def ledger(self) -> ConstantsLedger:
        return ConstantsLedger(k_const=self.const_k, c_const=self.const_c, K1=self.const_k1)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.dt, self.scheme, self.n_modes)

    def campaign(self) -> CampaignConfig:
        return CampaignConfig(
            K=self.resolution,
            dt=self.dt,
            n_modes=self.n_modes,
            scheme=self.scheme,
            t_star_override=self.t_star,
            ledger=self.ledger(),
            workers=self.workers,
            checkpoint_path=self.checkpoint,
            count_cap=self.count_cap,
            safety_factor=self.safety_factor,
            pilot_samples=self.pilot_samples,
            seed=self.seed,
            delta_override=self.delta,
            lattice_rule=self.lattice_rule,
            small_data_shortcut=self.small_data_shortcut,
        )


_FLOAT_KEYS = {"dt", "t_star", "const_c", "const_k", "const_k1", "safety_factor", "delta"}


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for k in _FLOAT_KEYS & set(data):
        if isinstance(data[k], int) and not isinstance(data[k], bool):
            data[k] = float(data[k])
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# flag -> RunConfig field
_FLAGS = {
    "resolution": "resolution",
    "modes": "n_modes",
    "dt": "dt",
    "scheme": "scheme",
    "tstar": "t_star",
    "const_c": "const_c",
    "const_k": "const_k",
    "const_k1": "const_k1",
    "workers": "workers",
    "checkpoint": "checkpoint",
    "count_cap": "count_cap",
    "safety_factor": "safety_factor",
    "pilot_samples": "pilot_samples",
    "seed": "seed",
    "delta": "delta",
    "lattice_rule": "lattice_rule",
    "shortcut": "small_data_shortcut",
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config or os.environ.get(CONFIG_ENV) or None)
    over = {}
    for flag, name in _FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            over[name] = v
    return replace(cfg, **over)


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help=f"TOML config file (default: ${CONFIG_ENV})")
    g.add_argument("--resolution", type=int, help="coefficient cube radius K (default 8)")
    g.add_argument("--modes", type=int, help="Galerkin dimension n (default: all modes with |k| <= K)")
    g.add_argument("--dt", type=float, help="time step (default 1e-3)")
    g.add_argument("--scheme", choices=SCHEMES)
    g.add_argument("--tstar", type=float, help="override the verification horizon T*")
    g.add_argument("--const-c", type=float, help="override the constant c")
    g.add_argument("--const-k", type=float, help="override the Sobolev constant k (sets c = 27 k^4 / 16)")
    g.add_argument("--const-k1", type=float, help="override the Gevrey constant K1")
    g.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    g.add_argument("--checkpoint", help="campaign checkpoint file (created or resumed)")
    g.add_argument("--count-cap", type=int, help="largest lattice to enumerate (default 1e7)")
    g.add_argument("--safety-factor", type=float, help="inflation of empirical bounds (default 2)")
    g.add_argument("--pilot-samples", type=int, help="pilot trajectories for the bounds (default 16)")
    g.add_argument("--seed", type=int, help="seed of the pilot sample")
    g.add_argument("--delta", type=float, help="override the robustness radius delta")
    g.add_argument("--lattice-rule", choices=RULES, help="lattice parameter rule (default safe)")
    g.add_argument(
        "--no-shortcut",
        dest="shortcut",
        action="store_const",
        const=False,
        help="integrate small-data points instead of accepting them outright",
    )
    p.add_argument("--output", "-o", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="enstrophy-cert",
        description="Galerkin integration and regularity certificates for 3D Navier-Stokes on the torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify-one", help="certify a single initial condition")
    p.add_argument("field", help="field file")
    _common(p)

    p = sub.add_parser("verify-ball", help="certify every point of a covering lattice of a ball")
    p.add_argument("space", choices=("h2", "v"))
    p.add_argument("radius", type=float)
    _common(p)

    p = sub.add_parser("lattice-info", help="lattice parameters and size for an H2 ball")
    p.add_argument("S", type=float, help="H2 radius")
    p.add_argument("--N", type=int, help="use this N instead of the rule")
    p.add_argument("--M", type=int, help="use this M instead of the rule")
    _common(p)

    p = sub.add_parser("emit-series", help="CSV time series of energy, enstrophy, |Au|^2, Gevrey norm")
    p.add_argument("field", help="field file")
    p.add_argument("--T", type=float, required=True, help="final time")
    p.add_argument("--no-gevrey", action="store_true", help="omit the Gevrey column")
    _common(p)
    return parser


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _fail(code: int, msg: str) -> int:
    print(f"enstrophy-cert: {msg}", file=sys.stderr)
    return code


def cmd_certify_one(args, cfg: RunConfig) -> int:
    u0 = load_field(args.field)
    ledger = cfg.ledger()
    tstar = cfg.t_star if cfg.t_star is not None else t_star(u0, ledger)
    horizon = certification_horizon(tstar, cfg.dt)
    integ = cfg.integrator()
    try:
        traj = integrate(resize(u0, cfg.resolution), horizon, integ)
        rep = evaluate_certificate(u0, traj, horizon, ledger)
    except (DivergenceError, CertificationError) as exc:
        return _fail(EXIT_DIVERGED, f"resolution failure: {exc}")
    rep.metadata["t_star_bound"] = tstar
    _emit(rep.to_json() + "\n", args.output)
    return EXIT_OK if rep.certified else EXIT_INCONCLUSIVE


def cmd_verify_ball(args, cfg: RunConfig) -> int:
    if not args.radius > 0:
        raise ConfigError("radius must be positive")
    try:
        state = run_campaign(args.space, args.radius, cfg.campaign())
    except InfeasibleDeltaError as exc:
        return _fail(EXIT_INFEASIBLE_DELTA, str(exc))
    except CountCapError as exc:
        return _fail(EXIT_COUNT_CAP, str(exc))
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, f"pilot run diverged: {exc}")
    _emit(state.to_json(), args.output)
    return EXIT_OK if state.verdict == "ball certified" else EXIT_INCONCLUSIVE


def lattice_info(S: float, cfg: RunConfig, N: int | None = None, M: int | None = None) -> dict:
    """Both rules' parameters and lattice sizes, without integrating anything."""
    if not S > 0:
        raise ConfigError("S must be positive")
    ledger = cfg.ledger()
    if cfg.delta is not None:
        delta, source = cfg.delta, "override"
    else:
        # zero uniform bounds give the largest possible delta, so the smallest lattice
        tstar = cfg.t_star or math.sqrt(ledger.c) * S * S
        delta, source = ledger.c * tstar**-0.25, "upper bound (zero uniform bounds)"
    out = {
        "schema": LATTICE_INFO_SCHEMA,
        "version": 1,
        "S": S,
        "delta": delta,
        "delta_source": source,
        "selected_rule": cfg.lattice_rule,
        "count_cap": cfg.count_cap,
    }
    for rule in RULES:
        n = choose_N(S, delta, rule) if N is None else N
        m = choose_M(n, delta, rule) if M is None else M
        count, exact = lattice_count(LatticeSpec(n, m, S, delta, rule), cfg.count_cap)
        out[rule] = {"N": n, "M": m, "count": count, "count_exact": exact, "exceeds_cap": count > cfg.count_cap}
    return out


def cmd_lattice_info(args, cfg: RunConfig) -> int:
    info = lattice_info(args.S, cfg, args.N, args.M)
    _emit(json.dumps(info, sort_keys=True, indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_emit_series(args, cfg: RunConfig) -> int:
    if not args.T > 0:
        raise ConfigError("--T must be positive")
    u0 = load_field(args.field)
    try:
        traj = integrate(resize(u0, cfg.resolution), args.T, cfg.integrator())
        text = series_csv(traj, gevrey=not args.no_gevrey)
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, f"resolution failure: {exc}")
    except GevreyOverflowError as exc:
        return _fail(EXIT_DIVERGED, f"Gevrey weight out of range: {exc}")
    _emit(text, args.output)
    return EXIT_OK


COMMANDS = {
    "certify-one": cmd_certify_one,
    "verify-ball": cmd_verify_ball,
    "lattice-info": cmd_lattice_info,
    "emit-series": cmd_emit_series,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, FieldError, CheckpointError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    except OSError as exc:
        return _fail(EXIT_USAGE, str(exc))
    except ValueError as exc:
        # integrator and campaign settings rejected during validation
        return _fail(EXIT_USAGE, str(exc))


if __name__ == "__main__":
    sys.exit(main())
