"""TOML run and sweep configurations.

A configuration has the tables ``model``, ``dissipation``, ``drive``,
``solver``, ``output`` and, for sweeps, ``sweep``::

    [model]            # effective form ...
    g1 = 0.2
    g2 = 0.15
    r = 0.7
    # ... or sideband form: [model.sidebands] g1b = ..., g1r = ..., phi1b = ...

    [dissipation]
    gamma2 = 2.5

    [solver]
    cutoff = "adaptive"     # or an integer n_max
    target_tail = 1e-6

    [sweep]
    parameter = "g1"
    values = [0.05, 0.1]    # or start / stop / num
    jobs = 4
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import (
    DecayRates,
    DriveParams,
    EffectiveParams,
    LaserModel,
    ModelError,
    SidebandCouplings,
    effective_params,
)

DEFAULT_R = 0.7
DEFAULT_TAIL = 1e-6
DEFAULT_CAP = 256

OBSERVABLES = ("n", "g2", "G", "K", "gamma", "sz1", "sz2", "abs_a", "n_b")
EFFECTIVE_KEYS = ("g1", "g2", "r", "theta")
SIDEBAND_KEYS = ("g1b", "g1r", "g2b", "g2r", "phi1b", "phi1r", "phi2b", "phi2r")
DECAY_KEYS = ("gamma1", "gamma2")
DRIVE_KEYS = ("gd1", "gd2", "phi1", "phi2")
SWEEPABLE = EFFECTIVE_KEYS + SIDEBAND_KEYS + DECAY_KEYS + DRIVE_KEYS


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


@dataclass(frozen=True)
class RunSpec:
    params: EffectiveParams | None = None
    sidebands: SidebandCouplings | None = None
    decay: DecayRates = field(default_factory=DecayRates)
    drive: DriveParams | None = None
    cutoff: int | None = None
    target_tail: float = DEFAULT_TAIL
    cap: int = DEFAULT_CAP
    basis: str = "squeezed"
    observables: tuple[str, ...] = OBSERVABLES
    output: dict = field(default_factory=dict)
    assumptions: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.params is None) == (self.sidebands is None):
            raise ConfigError("exactly one of effective parameters or sideband couplings is required", "model")
        unknown = [o for o in self.observables if o not in OBSERVABLES]
        if unknown:
            raise ConfigError(f"unknown observables {unknown}; choose from {list(OBSERVABLES)}", "observables")
        if not 0 < self.target_tail < 1:
            raise ConfigError("must lie in (0, 1)", "solver.target_tail")

    def effective(self) -> EffectiveParams:
        return self.params if self.params is not None else effective_params(self.sidebands)

    def model(self) -> LaserModel:
        return LaserModel(self.effective(), self.decay, self.drive, basis=self.basis)

    def with_value(self, name: str, value: float) -> "RunSpec":
        """Copy with one physical parameter replaced."""
        if name in EFFECTIVE_KEYS:
            if self.params is None:
                raise ConfigError(f"cannot sweep {name!r} in sideband form", "sweep.parameter")
            return replace(self, params=replace(self.params, **{name: value}))
        if name in SIDEBAND_KEYS:
            if self.sidebands is None:
                raise ConfigError(f"cannot sweep {name!r} in effective form", "sweep.parameter")
            return replace(self, sidebands=replace(self.sidebands, **{name: value}))
        if name in DECAY_KEYS:
            return replace(self, decay=replace(self.decay, **{name: value}))
        if name in DRIVE_KEYS:
            return replace(self, drive=replace(self.drive or DriveParams(), **{name: value}))
        raise ConfigError(f"unknown parameter {name!r}", "sweep.parameter")

    def echo(self) -> dict:
        """Flat parameter dictionary written into output headers."""
        out = {}
        if self.params is not None:
            out.update(asdict(self.params))
        else:
            out.update(asdict(self.sidebands))
        out.update(asdict(self.decay))
        if self.drive is not None:
            out.update(asdict(self.drive))
        out["cutoff"] = "adaptive" if self.cutoff is None else self.cutoff
        out["target_tail"] = self.target_tail
        out["cap"] = self.cap
        out["basis"] = self.basis
        return out


@dataclass(frozen=True)
class SweepAxis:
    parameter: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class SweepSpec:
    template: RunSpec
    axes: tuple[SweepAxis, ...]
    jobs: int = 1

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ConfigError("one or two swept axes are supported", "sweep")
        for ax in self.axes:
            if ax.parameter not in SWEEPABLE:
                raise ConfigError(f"unknown parameter {ax.parameter!r}", "sweep.parameter")
            self.template.with_value(ax.parameter, ax.values[0])  # form check
            vals = np.asarray(ax.values, dtype=float)
            if vals.size == 0 or not np.all(np.isfinite(vals)):
                raise ConfigError("values must be finite and non-empty", f"sweep.{ax.parameter}")
            d = np.diff(vals)
            if vals.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
                raise ConfigError("values must be strictly ordered", f"sweep.{ax.parameter}")
        if self.jobs < 1:
            raise ConfigError("must be >= 1", "sweep.jobs")

    def points(self) -> list[dict[str, float]]:
        """Grid points in sweep order (last axis fastest)."""
        grids = np.meshgrid(*[ax.values for ax in self.axes], indexing="ij")
        names = [ax.parameter for ax in self.axes]
        flat = [g.ravel() for g in grids]
        return [{n: float(f[k]) for n, f in zip(names, flat)} for k in range(flat[0].size)]

    def specs(self) -> list[RunSpec]:
        out = []
        for pt in self.points():
            spec = self.template
            for name, value in pt.items():
                spec = spec.with_value(name, value)
            out.append(spec)
        return out


# -- parsing --------------------------------------------------------------


def _number(table: dict, key: str, where: str, default=None, minimum=None):
    if key not in table:
        if default is None:
            raise ConfigError("required value missing", f"{where}.{key}")
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", f"{where}.{key}")
    val = float(val)
    if not math.isfinite(val):
        raise ConfigError("must be finite", f"{where}.{key}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"must be >= {minimum:g}", f"{where}.{key}")
    return val


def _check_keys(table: dict, allowed, where: str):
    extra = sorted(set(table) - set(allowed))
    if extra:
        raise ConfigError(f"unknown keys {extra}", where)


def _axis_values(table: dict, where: str) -> tuple[float, ...]:
    if "values" in table:
        vals = table["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("must be a non-empty list", f"{where}.values")
        out = []
        for k, v in enumerate(vals):
            try:
                out.append(_number({"v": v}, "v", where))
            except ConfigError as exc:
                raise ConfigError(str(exc).split(": ", 1)[1], f"{where}.values[{k}]") from None
        return tuple(out)
    try:
        start, stop = table["start"], table["stop"]
        num = int(table["num"])
    except KeyError as exc:
        raise ConfigError("give either values or start/stop/num", where) from exc
    if num < 1:
        raise ConfigError("must be >= 1", f"{where}.num")
    return tuple(float(v) for v in np.linspace(float(start), float(stop), num))


def spec_from_dict(doc: dict):
    """Validate a parsed TOML document into a :class:`RunSpec` or :class:`SweepSpec`."""
    _check_keys(doc, ("model", "dissipation", "drive", "solver", "output", "observables", "sweep"), "config")
    model = dict(doc.get("model", {}))
    assumptions = []
    sidebands_tab = model.pop("sidebands", None)
    if sidebands_tab is not None and any(k in model for k in EFFECTIVE_KEYS):
        raise ConfigError("give either g1/g2/r/theta or a [model.sidebands] table, not both", "model")
    params = sidebands = None
    try:
        if sidebands_tab is not None:
            _check_keys(model, (), "model")
            _check_keys(sidebands_tab, SIDEBAND_KEYS, "model.sidebands")
            sidebands = SidebandCouplings(
                **{k: _number(sidebands_tab, k, "model.sidebands", 0.0, None) for k in SIDEBAND_KEYS}
            )
            effective_params(sidebands)  # ratio / phase consistency
        else:
            _check_keys(model, EFFECTIVE_KEYS, "model")
            if "r" not in model:
                assumptions.append(f"squeezing amplitude r not given; default r = {DEFAULT_R} assumed")
            params = EffectiveParams(
                g1=_number(model, "g1", "model", minimum=0),
                g2=_number(model, "g2", "model", minimum=0),
                r=_number(model, "r", "model", DEFAULT_R, 0),
                theta=float(np.mod(_number(model, "theta", "model", 0.0), 2 * np.pi)),
            )
    except ModelError as exc:
        raise ConfigError(str(exc), "model") from exc

    diss = doc.get("dissipation", {})
    _check_keys(diss, DECAY_KEYS, "dissipation")
    try:
        decay = DecayRates(_number(diss, "gamma1", "dissipation", 1.0), _number(diss, "gamma2", "dissipation", 1.0))
    except ModelError as exc:
        raise ConfigError(str(exc), "dissipation") from exc
    if "gamma2" not in diss:
        assumptions.append("gamma2 not given; default gamma2 = 1 assumed")

    drive = None
    if "drive" in doc:
        dtab = doc["drive"]
        _check_keys(dtab, DRIVE_KEYS, "drive")
        try:
            drive = DriveParams(**{k: _number(dtab, k, "drive", 0.0) for k in DRIVE_KEYS})
        except ModelError as exc:
            raise ConfigError(str(exc), "drive") from exc

    solver = doc.get("solver", {})
    _check_keys(solver, ("cutoff", "target_tail", "cap", "basis"), "solver")
    cutoff = solver.get("cutoff", "adaptive")
    if cutoff == "adaptive":
        cutoff = None
    elif isinstance(cutoff, bool) or not isinstance(cutoff, int) or cutoff < 4:
        raise ConfigError("must be 'adaptive' or an integer >= 4", "solver.cutoff")
    basis = solver.get("basis", "squeezed")
    if basis not in ("bare", "squeezed"):
        raise ConfigError("must be 'bare' or 'squeezed'", "solver.basis")
    observables = doc.get("observables", {}).get("list", list(OBSERVABLES))

    spec = RunSpec(
        params=params,
        sidebands=sidebands,
        decay=decay,
        drive=drive,
        cutoff=cutoff,
        target_tail=_number(solver, "target_tail", "solver", DEFAULT_TAIL),
        cap=int(solver.get("cap", DEFAULT_CAP)),
        basis=basis,
        observables=tuple(observables),
        output=dict(doc.get("output", {})),
        assumptions=tuple(assumptions),
    )
    if "sweep" not in doc:
        return spec
    sw = dict(doc["sweep"])
    jobs = int(sw.pop("jobs", 1))
    if "axes" in sw:
        axes_tabs = sw.pop("axes")
        _check_keys(sw, (), "sweep")
    else:
        axes_tabs = [sw]
    axes = []
    for k, tab in enumerate(axes_tabs):
        where = f"sweep.axes[{k}]" if len(axes_tabs) > 1 else "sweep"
        _check_keys(tab, ("parameter", "values", "start", "stop", "num"), where)
        if "parameter" not in tab:
            raise ConfigError("required value missing", f"{where}.parameter")
        axes.append(SweepAxis(str(tab["parameter"]), _axis_values(tab, where)))
    return SweepSpec(spec, tuple(axes), jobs)


def parse_config(path) -> RunSpec | SweepSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return spec_from_dict(doc)
