"""Single runs and parallel parameter sweeps."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import engine, observables as obs
from .config import RunSpec, SweepSpec

log = logging.getLogger(__name__)

RECORD_COLUMNS = (
    "n", "g2", "G", "K", "gamma", "sz1", "sz2", "abs_a", "n_b",
    "n_max", "tail", "residual",
)


class SweepFailed(RuntimeError):
    pass


@dataclass
class RunRecord:
    index: int
    inputs: dict
    n: float = math.nan
    g2: float = math.nan
    G: float = math.nan
    K: float = math.nan
    gamma: float = math.nan
    sz1: float = math.nan
    sz2: float = math.nan
    abs_a: float = math.nan
    n_b: float = math.nan
    n_max: int = 0
    tail: float = math.nan
    residual: float = math.nan
    wall_time: float = 0.0
    error: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def ratio(self) -> float:
        return self.G / self.K if self.K else math.nan

    def as_dict(self) -> dict:
        return asdict(self)


def solve_spec(spec: RunSpec):
    """Steady state of a run spec; returns ``(SteadyState, tail)``."""
    return engine.solve_adaptive(spec.model(), spec.target_tail, cap=spec.cap, n_max=spec.cutoff)


def record_from_state(ss, tail: float, spec: RunSpec, index: int = 0, inputs=None) -> RunRecord:
    model = spec.model()
    rho, space = ss.rho, ss.space
    p, gamma = model.params, model.decay
    sz1, sz2 = obs.spin_z(rho, space)
    G, K = obs.gain_loss_from_spins(sz1, sz2, p, gamma)
    rec = RunRecord(index=index, inputs=dict(inputs or {}))
    rec.n = obs.mean_phonon(rho, space)
    try:
        rec.g2 = obs.g2_zero(rho, space)
    except obs.UndefinedObservable:
        rec.notes.append("g2 undefined for vacuum")
    rec.G, rec.K, rec.gamma = G, K, K - G
    rec.sz1, rec.sz2 = sz1, sz2
    rec.abs_a = abs(obs.mode_amplitude(rho, space))
    rec.n_b = obs.squeezed_frame_moments(rho, space, p.r, p.theta)[0] if tail < 1e-3 else math.nan
    rec.n_max, rec.tail, rec.residual = space.n_max, tail, ss.residual
    return rec


def run_single(spec: RunSpec, index: int = 0, inputs=None) -> RunRecord:
    """Solve one configuration; errors are captured in the record, not raised."""
    t0 = time.perf_counter()
    try:
        ss, tail = solve_spec(spec)
        rec = record_from_state(ss, tail, spec, index, inputs)
    except (engine.EngineError, ValueError) as exc:
        log.warning("point %d failed: %s", index, exc)
        rec = RunRecord(index=index, inputs=dict(inputs or {}), error=f"{type(exc).__name__}: {exc}")
    rec.wall_time = time.perf_counter() - t0
    return rec


def _run_point(args):
    spec, index, inputs = args
    return run_single(spec, index, inputs)


def run_sweep(spec: SweepSpec, jobs: int | None = None) -> list[RunRecord]:
    """One record per grid point, ordered by index whatever the worker count."""
    jobs = spec.jobs if jobs is None else jobs
    tasks = [(s, k, pt) for k, (s, pt) in enumerate(zip(spec.specs(), spec.points()))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            records = list(pool.map(_run_point, tasks))
    else:
        records = [_run_point(t) for t in tasks]
    records.sort(key=lambda r: r.index)
    if not any(r.ok for r in records):
        raise SweepFailed(f"all {len(records)} sweep points failed; first error: {records[0].error}")
    return records


def record_rows(records, axis_names):
    columns = ["index", *axis_names, *RECORD_COLUMNS, "error"]
    rows = []
    for r in records:
        rows.append([r.index, *[r.inputs.get(a, np.nan) for a in axis_names],
                     *[getattr(r, c) for c in RECORD_COLUMNS], r.error or ""])
    return columns, rows
