"""Seeded Monte-Carlo sweeps, convergence traces and result emission."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .baselines import run_ee_max, run_throughput_max
from .channel import Geometry, sample_channels
from .dynamic import run_dynamic
from .model import EhParams, NetworkInstance, dbm_to_watts
from .static import run_static

SCHEMES = {
    "dynamic": run_dynamic,
    "static": run_static,
    "throughput_max": run_throughput_max,
    "ee_max": run_ee_max,
}
SWEEP_AXES = ("r_min", "pb_if_distance", "p_max", "none")
CSV_COLUMNS = ("sweep_param", "sweep_value", "scheme", "mean_energy_j", "std_energy_j",
               "feasible_frac", "mean_iters", "trials")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario defaults follow the simulation table of the reference setup.

    Units: ``r_min`` in bit/s (multiplied by ``T`` per block), ``p_max`` in
    dBm, ``N0`` in dBm/Hz, distances in metres.
    """

    K: int = 5
    T: float = 10.0
    W: float = 400e3
    N0_dbm_hz: float = -110.0
    p_max_dbm: float = 23.0
    p_c: float = 200e-6
    r_min: float = 2400.0
    xi: float = 0.5
    a: float = 2.463
    d: float = 1.635
    v: float = 0.826
    r: float = 25.0
    alpha: float = 3.0
    fading: bool = True
    seed: int = 0
    trials: int = 100
    workers: int = 1
    schemes: tuple[str, ...] = ("dynamic", "static", "throughput_max", "ee_max")
    sweep: str = "none"
    sweep_start: float = 0.0
    sweep_stop: float = 0.0
    sweep_step: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        checks = [
            (self.K >= 1, "network.K", "must be >= 1"),
            (self.T > 0, "network.T", "must be positive"),
            (self.W > 0, "network.W", "must be positive"),
            (self.p_c >= 0, "network.p_c", "must be >= 0"),
            (self.r_min >= 0, "network.r_min", "must be >= 0"),
            (0 < self.xi < 1, "network.xi", "must lie in (0, 1)"),
            (self.r > 0, "geometry.r", "must be positive"),
            (self.alpha > 0, "geometry.alpha", "must be positive"),
            (self.trials >= 1, "run.trials", "must be >= 1"),
            (self.workers >= 1, "run.workers", "must be >= 1"),
            (len(self.schemes) > 0, "run.schemes", "must name at least one scheme"),
            (self.sweep in SWEEP_AXES, "sweep.param", f"must be one of {', '.join(SWEEP_AXES)}"),
        ]
        for ok, key, msg in checks:
            if not ok:
                raise ConfigError(f"{key}: {msg}")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"run.schemes: unknown scheme {s!r} (choose from {', '.join(SCHEMES)})")
        if self.a * self.v - self.d <= 0:
            raise ConfigError("eh: a*v - d must be positive")
        if self.sweep != "none":
            if self.sweep_step <= 0:
                raise ConfigError("sweep.step: must be positive")
            if self.sweep_stop < self.sweep_start:
                raise ConfigError("sweep: empty range (stop < start)")

    def sweep_values(self) -> list[float]:
        if self.sweep == "none":
            return [math.nan]
        n = int(math.floor((self.sweep_stop - self.sweep_start) / self.sweep_step + 1e-9)) + 1
        return [self.sweep_start + i * self.sweep_step for i in range(n)]

    def at(self, value: float) -> "ScenarioConfig":
        """The scenario with the sweep axis set to ``value``."""
        if self.sweep == "r_min":
            return replace(self, r_min=value)
        if self.sweep == "pb_if_distance":
            return replace(self, r=value)
        if self.sweep == "p_max":
            return replace(self, p_max_dbm=value)
        return self


# TOML section -> {key: field name}
_SECTIONS = {
    "network": {k: k for k in ("K", "T", "W", "N0_dbm_hz", "p_max_dbm", "p_c", "r_min", "xi")},
    "eh": {"a": "a", "d": "d", "v": "v"},
    "geometry": {"r": "r", "alpha": "alpha", "fading": "fading"},
    "run": {"seed": "seed", "trials": "trials", "workers": "workers", "schemes": "schemes"},
    "sweep": {"param": "sweep", "start": "sweep_start", "stop": "sweep_stop", "step": "sweep_step"},
}
_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _coerce(name, key, value):
    kind = _TYPES[name]
    try:
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if not isinstance(value, (list, tuple)) or not all(isinstance(s, str) for s in value):
            raise TypeError
        return tuple(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind}, got {value!r}") from None


def config_from_dict(data: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    changes = {}
    for section, body in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in body.items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            name = _SECTIONS[section][key]
            changes[name] = _coerce(name, f"{section}.{key}", value)
    return replace(base or ScenarioConfig(), **changes)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def parse_sweep(spec: str) -> dict:
    """``"none"`` or ``"axis:start:stop:step"`` as ScenarioConfig overrides."""
    if spec == "none":
        return {"sweep": "none"}
    parts = spec.split(":")
    if len(parts) != 4:
        raise ConfigError(f"--sweep: expected axis:start:stop:step or none, got {spec!r}")
    try:
        start, stop, step = (float(p) for p in parts[1:])
    except ValueError:
        raise ConfigError(f"--sweep: non-numeric range in {spec!r}") from None
    return {"sweep": parts[0], "sweep_start": start, "sweep_stop": stop, "sweep_step": step}


def build_instance(cfg: ScenarioConfig, trial: int = 0) -> NetworkInstance:
    """Network for one trial; fading is seeded with ``seed XOR trial``."""
    geo = Geometry.midpoint(cfg.r, cfg.K, cfg.alpha)
    ch = sample_channels(geo, cfg.seed ^ trial, fading=cfg.fading)
    return NetworkInstance.build(
        ch.h, ch.g, cfg.r_min * cfg.T, cfg.p_c,
        eh=EhParams(cfg.a, cfg.d, cfg.v), T=cfg.T, W=cfg.W,
        N0=float(dbm_to_watts(cfg.N0_dbm_hz)), p_max=float(dbm_to_watts(cfg.p_max_dbm)), xi=cfg.xi,
    )


@dataclass
class ResultRow:
    sweep_param: str
    sweep_value: float
    scheme: str
    mean_energy_j: float
    std_energy_j: float
    feasible_frac: float
    mean_iters: float
    trials: int
    energies: list[float] = field(default_factory=list, repr=False)

    def csv_record(self) -> list:
        value = "" if math.isnan(self.sweep_value) else repr(float(self.sweep_value))
        return [self.sweep_param, value, self.scheme, repr(self.mean_energy_j), repr(self.std_energy_j),
                repr(self.feasible_frac), repr(self.mean_iters), self.trials]


def _trial(args):
    cfg, trial = args
    inst = build_instance(cfg, trial)
    out = []
    for name in cfg.schemes:
        rep = SCHEMES[name](inst)
        out.append((name, float(rep.energy), bool(rep.feasible), int(rep.iterations)))
    return out


def run_sweep(cfg: ScenarioConfig):
    """Yield one ResultRow per sweep value and scheme, in a fixed order.

    Infeasible trials enter the mean with the zero sentinel energy.
    """
    jobs = [(cfg.at(v), t) for v in cfg.sweep_values() for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        results = [_trial(j) for j in jobs]
    for i, value in enumerate(cfg.sweep_values()):
        chunk = results[i * cfg.trials:(i + 1) * cfg.trials]
        for j, name in enumerate(cfg.schemes):
            e = np.array([c[j][1] for c in chunk])
            feas = np.array([c[j][2] for c in chunk])
            iters = np.array([c[j][3] for c in chunk])
            yield ResultRow(cfg.sweep, value, name, float(e.mean()), float(e.std()), float(feas.mean()),
                            float(iters.mean()), cfg.trials, e.tolist())


def run_convergence_trace(cfg: ScenarioConfig, schemes=("dynamic", "static")) -> list[dict]:
    """Per-iteration PB energy of each scheme on the channel draw ``trial = 0``."""
    if cfg.sweep != "none":
        raise ConfigError("trace: sweep.param must be none")
    inst = build_instance(cfg, 0)
    rows = []
    for name in schemes:
        rep = SCHEMES[name](inst)
        for r in rep.trace:
            rows.append({"scheme": name, "iteration": int(r["iteration"]), "energy_j": float(r["energy"]),
                         "final_j": float(rep.energy), "feasible": bool(rep.feasible)})
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow(row.csv_record())
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_json(obj) -> str:
    return json.dumps(obj, default=_jsonable, indent=2, sort_keys=True)


def config_dict(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d["schemes"] = list(cfg.schemes)
    return d
