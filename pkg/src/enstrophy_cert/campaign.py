"""Ball verification campaigns: pilot bounds, lattice sweep, checkpointing.

A campaign certifies every point of a covering lattice of an H^2 ball.
Points are independent, so they run in a process pool; the parent process
is the only writer of the checkpoint, and the report is assembled in
lattice order once all points are known.

Checkpoint layout (JSON lines, one object per line, append-only)::

    {"kind": "header", "format": "enstrophy-cert-checkpoint", "version": 1, "run": {...}}
    {"kind": "setup", "bounds": {...}, "delta": ..., "lattice": {...}, ...}
    {"kind": "point", "index": 0, "record": {"status": "certified", ...}}
    ...

A torn final line (from a kill during a write) is discarded on resume.
"""

from __future__ import annotations

import json
import math
import os
from collections.abc import Iterable
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import required_radius
from .certify import CertificationError, certification_horizon, evaluate_certificate, small_data_check
from .constants import DEFAULT_LEDGER, ConstantsLedger
from .covering import (
    DEFAULT_COUNT_CAP,
    RULES,
    CountCapError,
    InfeasibleDeltaError,
    LatticeSpec,
    UniformBounds,
    choose_M,
    choose_N,
    delta_of_S,
    empirical_bounds,
    gevrey_reduction,
    lattice_count,
    lattice_field,
    lattice_points,
)
from .galerkin import DivergenceError, IntegratorConfig, integrate
from .spectral import enstrophy, h2, random_field

CHECKPOINT_FORMAT = "enstrophy-cert-checkpoint"
CHECKPOINT_VERSION = 1
REPORT_SCHEMA = "enstrophy-cert-campaign"
REPORT_VERSION = 1
STATUSES = ("pending", "certified", "inconclusive", "diverged")
ASSUMPTION_NOTE = (
    "conditional: the V ball is reduced to an H2 ball by Gevrey smoothing, which assumes "
    "every solution from the V ball stays regular on [0, 2 tau]; a certified H2 ball "
    "verifies the V-ball statement only under that assumption"
)


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class CampaignConfig:
    K: int = 8
    dt: float = 1e-3
    n_modes: int | None = None
    scheme: str = "integrating_factor_rk4"
    t_star_override: float | None = None
    ledger: ConstantsLedger = DEFAULT_LEDGER
    workers: int = 1
    checkpoint_path: str | None = None
    count_cap: int = DEFAULT_COUNT_CAP
    safety_factor: float = 2.0
    pilot_samples: int = 16
    seed: int = 0
    delta_override: float | None = None
    lattice_rule: str = "safe"
    small_data_shortcut: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("resolution K must be positive")
        if self.workers < 1 or self.count_cap < 1 or self.pilot_samples < 1:
            raise ValueError("workers, count_cap and pilot_samples must be positive")
        if self.safety_factor < 1:
            raise ValueError("safety_factor must be at least 1")
        if self.t_star_override is not None and not self.t_star_override > 0:
            raise ValueError("t_star_override must be positive")
        if self.delta_override is not None and not self.delta_override > 0:
            raise ValueError("delta_override must be positive")
        if self.lattice_rule not in RULES:
            raise ValueError(f"lattice_rule must be one of {RULES}")
        IntegratorConfig(self.dt, self.scheme, self.n_modes)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.dt, self.scheme, self.n_modes)

    def run_key(self) -> dict:
        """Settings that change results (not workers, paths or the count cap)."""
        d = asdict(self)
        for k in ("workers", "checkpoint_path", "count_cap", "ledger"):
            d.pop(k)
        d["constants"] = self.ledger.to_dict()
        return d


@dataclass
class CampaignState:
    space: str
    radius: float
    S: float
    t_star: float
    horizon: float
    lattice: LatticeSpec
    bounds: UniformBounds
    delta: float
    delta_source: str
    count: int
    rules: dict
    constants: dict
    run: dict
    statuses: dict[int, dict] = field(default_factory=dict)
    reduction: dict | None = None

    def status_of(self, index: int) -> str:
        rec = self.statuses.get(index)
        return "pending" if rec is None else rec["status"]

    def summary(self) -> dict:
        out = {s: 0 for s in STATUSES}
        for i in range(self.count):
            out[self.status_of(i)] += 1
        return out

    @property
    def verdict(self) -> str:
        done = len(self.statuses) == self.count
        ok = done and all(r["status"] == "certified" for r in self.statuses.values())
        return "ball certified" if ok else "not certified"

    def report(self) -> dict:
        points = [
            self.statuses.get(i, {"index": i, "status": "pending"}) for i in range(self.count)
        ]
        rep = {
            "schema": REPORT_SCHEMA,
            "version": REPORT_VERSION,
            "space": self.space,
            "radius": self.radius,
            "S": self.S,
            "t_star": self.t_star,
            "horizon": self.horizon,
            "constants": self.constants,
            "bounds": self.bounds.to_dict(),
            "delta": self.delta,
            "delta_source": self.delta_source,
            "lattice": self.lattice.to_dict(),
            "lattice_count": self.count,
            "rules": self.rules,
            "run": self.run,
            "summary": self.summary(),
            "verdict": self.verdict,
            "points": points,
        }
        if self.reduction is not None:
            rep["reduction"] = self.reduction
            rep["regularity_assumption"] = True
        return rep

    def to_json(self) -> str:
        return json.dumps(self.report(), sort_keys=True, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# checkpoint file


def read_checkpoint(path: str) -> tuple[dict | None, dict | None, dict[int, dict]]:
    """Header, setup record and point records of a checkpoint (tolerates a torn tail)."""
    if not os.path.exists(path):
        return None, None, {}
    with open(path, "rb") as f:
        data = f.read()
    lines = data.split(b"\n")
    # the final element is empty for a cleanly terminated file, partial otherwise
    complete = lines[:-1]
    header, setup, points = None, None, {}
    for n, raw in enumerate(complete):
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}:{n + 1}: corrupt checkpoint line") from exc
        kind = rec.get("kind")
        if n == 0:
            if kind != "header" or rec.get("format") != CHECKPOINT_FORMAT:
                raise CheckpointError(f"{path} is not a campaign checkpoint")
            if rec.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(f"unsupported checkpoint version {rec.get('version')}")
            header = rec
        elif kind == "setup":
            setup = rec
        elif kind == "point":
            points[int(rec["index"])] = rec["record"]
        else:
            raise CheckpointError(f"{path}:{n + 1}: unknown record kind {kind!r}")
    return header, setup, points


class CheckpointWriter:
    """Append-only line writer; every record is flushed and synced."""

    def __init__(self, path: str):
        self.path = path
        if os.path.exists(path):
            with open(path, "rb") as f:
                data = f.read()
            keep = data.rfind(b"\n") + 1
            if keep != len(data):
                with open(path, "r+b") as f:
                    f.truncate(keep)
        self._f = open(path, "a", encoding="utf-8")

    def write(self, rec: dict) -> None:
        self._f.write(json.dumps(rec, sort_keys=True, allow_nan=False) + "\n")
        self._f.flush()
        os.fsync(self._f.fileno())

    def close(self) -> None:
        self._f.close()


# ---------------------------------------------------------------------------
# per-point work


def certify_point(
    index: int,
    a: Iterable[int],
    lattice: LatticeSpec,
    K: int,
    integrator: IntegratorConfig,
    horizon: float,
    ledger: ConstantsLedger,
    shortcut: bool,
) -> dict:
    """Certify one lattice point; the returned record is JSON-serializable."""
    a = [int(x) for x in a]
    u0 = lattice_field(lattice, a, K)
    rec = {"index": index, "a": a, "enstrophy": enstrophy(u0), "h2": h2(u0)}
    if shortcut and small_data_check(u0, ledger):
        rec.update(status="certified", reason="small-data")
        return rec
    try:
        traj = integrate(u0, horizon, integrator)
        cert = evaluate_certificate(u0, traj, horizon, ledger)
    except (DivergenceError, CertificationError) as exc:
        rec.update(status="diverged", reason=str(exc))
        return rec
    rec.update(
        status=cert.verdict,
        reason="certificate",
        lhs=cert.lhs,
        rhs=cert.rhs,
        integral_I=cert.integral_I,
    )
    return rec


def _certify_task(task: tuple) -> dict:
    index, a, lattice_d, K, integ_d, horizon, ledger_d, shortcut = task
    return certify_point(
        index,
        a,
        LatticeSpec.from_dict(lattice_d),
        K,
        IntegratorConfig(**integ_d),
        horizon,
        ConstantsLedger.from_dict(ledger_d),
        shortcut,
    )


def _run_points(tasks: list[tuple], workers: int, sink) -> None:
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            sink(_certify_task(t))
        return
    window = 4 * workers
    pending = set()
    it = iter(tasks)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        try:
            for t in it:
                pending.add(pool.submit(_certify_task, t))
                if len(pending) >= window:
                    done, pending = wait(pending, return_when=FIRST_COMPLETED)
                    for f in done:
                        sink(f.result())
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for f in done:
                    sink(f.result())
        except BaseException:
            pool.shutdown(wait=False, cancel_futures=True)
            raise


# ---------------------------------------------------------------------------
# pipeline


def pilot_fields(S: float, config: CampaignConfig) -> list:
    """Seeded random fields on the sphere ``|Au| = S``."""
    rng = np.random.default_rng(config.seed)
    out = []
    for _ in range(config.pilot_samples):
        u = random_field(config.K, rng)
        out.append(u * (S / math.sqrt(h2(u))))
    return out


def _setup(S: float, t_star: float, horizon: float, config: CampaignConfig) -> dict:
    ledger = config.ledger
    pilots = pilot_fields(S, config)
    if config.delta_override is None:
        # D_S is at least the initial enstrophy, so a hopeless delta is caught before integrating
        d0 = config.safety_factor * max(math.sqrt(enstrophy(u)) for u in pilots)
        delta_of_S(UniformBounds(d0, 0.0, "empirical", config.safety_factor), t_star, ledger)
    trajs = [integrate(u, horizon, config.integrator()) for u in pilots]
    bounds = empirical_bounds(None, trajs, config.safety_factor)
    if config.delta_override is None:
        delta, source = delta_of_S(bounds, t_star, ledger), "computed"
    else:
        delta, source = float(config.delta_override), "override"
    lattice = LatticeSpec.for_ball(S, delta, config.lattice_rule)
    rules = {}
    for rule in RULES:
        N = choose_N(S, delta, rule)
        rules[rule] = {"N": N, "M": choose_M(N, delta, rule)}
    return {
        "kind": "setup",
        "bounds": bounds.to_dict(),
        "delta": delta,
        "delta_source": source,
        "lattice": lattice.to_dict(),
        "rules": rules,
    }


def _ball_radius(space: str, radius: float, ledger: ConstantsLedger) -> tuple[float, dict | None]:
    if space == "h2":
        return float(radius), None
    if space == "v":
        tau, S = gevrey_reduction(radius, ledger)
        return S, {"R": float(radius), "tau": tau, "S": S, "assumption": ASSUMPTION_NOTE}
    raise ValueError(f"space must be 'h2' or 'v', got {space!r}")


def run_campaign(space: str, radius: float, config: CampaignConfig = CampaignConfig()) -> CampaignState:
    """Full pipeline for a ball of the given ``space`` (``"h2"`` or ``"v"``).

    Raises :class:`InfeasibleDeltaError`, :class:`CountCapError`,
    :class:`DivergenceError` (pilot runs) or :class:`CheckpointError`.
    Per-point divergence is recorded as a status, not raised.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    ledger = config.ledger
    S, reduction = _ball_radius(space, radius, ledger)
    t_star = config.t_star_override or math.sqrt(ledger.c) * S * S
    horizon = certification_horizon(t_star, config.dt)
    run = config.run_key()
    header = {
        "kind": "header",
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "space": space,
        "radius": float(radius),
        "run": run,
    }
    writer = None
    setup, done = None, {}
    if config.checkpoint_path:
        old_header, setup, done = read_checkpoint(config.checkpoint_path)
        if old_header is not None and json.dumps(old_header, sort_keys=True) != json.dumps(header, sort_keys=True):
            raise CheckpointError("checkpoint belongs to a different campaign or configuration")
        writer = CheckpointWriter(config.checkpoint_path)
        if old_header is None:
            writer.write(header)
    try:
        if setup is None:
            setup = _setup(S, t_star, horizon, config)
            if writer is not None:
                writer.write(setup)
        lattice = LatticeSpec.from_dict(setup["lattice"])
        if lattice.N and required_radius(lattice.N) > config.K:
            raise ValueError(
                f"lattice uses {lattice.N} basis elements, which need resolution K >= {required_radius(lattice.N)}"
            )
        count, _ = lattice_count(lattice, config.count_cap)
        if count > config.count_cap:
            raise CountCapError(count, config.count_cap)
        state = CampaignState(
            space=space,
            radius=float(radius),
            S=S,
            t_star=t_star,
            horizon=horizon,
            lattice=lattice,
            bounds=UniformBounds.from_dict(setup["bounds"]),
            delta=setup["delta"],
            delta_source=setup["delta_source"],
            count=int(count),
            rules=setup["rules"],
            constants=ledger.to_dict(),
            run=run,
            statuses=dict(done),
            reduction=reduction,
        )
        integ = asdict(config.integrator())
        tasks = [
            (i, a, lattice.to_dict(), config.K, integ, horizon, ledger.to_dict(), config.small_data_shortcut)
            for i, a in enumerate(lattice_points(lattice))
            if i not in done
        ]

        def sink(rec: dict) -> None:
            if writer is not None:
                writer.write({"kind": "point", "index": rec["index"], "record": rec})
            state.statuses[rec["index"]] = rec

        _run_points(tasks, config.workers, sink)
        return state
    finally:
        if writer is not None:
            writer.close()


def verify_ball_h2(S: float, config: CampaignConfig = CampaignConfig()) -> CampaignState:
    """Certify every point of a covering lattice of ``{|Au0| <= S}``."""
    return run_campaign("h2", S, config)


def verify_ball_v(R: float, config: CampaignConfig = CampaignConfig()) -> CampaignState:
    """Reduce ``{|Du0| <= R}`` to an H^2 ball by Gevrey smoothing, then certify it.

    The report carries the reduction (``tau``, ``S``) and the assumption it rests on.
    """
    return run_campaign("v", R, config)


__all__ = [
    "CampaignConfig",
    "CampaignState",
    "CheckpointError",
    "CountCapError",
    "InfeasibleDeltaError",
    "certify_point",
    "read_checkpoint",
    "run_campaign",
    "verify_ball_h2",
    "verify_ball_v",
]
