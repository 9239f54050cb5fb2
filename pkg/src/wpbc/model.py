"""Physical model of a wireless-powered backscatter network.

Everything here works in linear SI units: watts, seconds, hertz, joules and
bits. Decibel quantities are converted at the configuration boundary with
:func:`dbm_to_watts`.

Slot indexing follows the TDMA frame: slot 0 is the pure energy-harvesting
phase, slot ``k`` (1..K) belongs to node ``k``. Arrays that span all slots
(durations, PB powers) therefore have length ``K + 1`` while per-node arrays
have length ``K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

LN2 = float(np.log(2.0))


def dbm_to_watts(p_dbm):
    """Convert dBm to watts."""
    out = 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)
    return out if out.ndim else float(out)


def watts_to_dbm(p_w):
    return 10.0 * np.log10(p_w) + 30.0


@dataclass(frozen=True)
class EhParams:
    """Constants of the saturating non-linear energy harvester.

    Harvested power for input power ``x`` is ``(a x + d) / (x + v) - d / v``.
    """

    a: float
    d: float
    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"harvester parameter v must be positive, got {self.v}")
        if not self.a * self.v - self.d > 0:
            raise ValueError(
                f"harvester needs a*v - d > 0 for a positive slope, got {self.a * self.v - self.d}"
            )

    @property
    def gain(self) -> float:
        """``a v - d``, the numerator shared by the slope and the saturation level."""
        return self.a * self.v - self.d

    @property
    def saturation(self) -> float:
        return self.gain / self.v


TABLE1_EH = EhParams(a=2.463, d=1.635, v=0.826)


@dataclass(frozen=True)
class NodeParams:
    r_min: float  # bits per block
    p_c: float  # circuit power, W

    def __post_init__(self):
        if self.r_min < 0 or self.p_c < 0:
            raise ValueError("r_min and p_c must be non-negative")


@dataclass(frozen=True)
class ChannelState:
    """Power gains PB -> node (``h``) and node -> IF (``g``)."""

    h: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).reshape(-1)
        g = np.asarray(self.g, dtype=float).reshape(-1)
        if h.shape != g.shape:
            raise ValueError("h and g must have the same length")
        if np.any(h <= 0) or np.any(g <= 0):
            raise ValueError("channel gains must be strictly positive")
        h.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    def __eq__(self, other):
        if not isinstance(other, ChannelState):
            return NotImplemented
        return np.array_equal(self.h, other.h) and np.array_equal(self.g, other.g)

    def __len__(self):
        return self.h.size


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """A complete problem instance for one transmission block."""

    nodes: tuple[NodeParams, ...]
    channels: ChannelState
    eh: EhParams
    T: float
    W: float
    N0: float
    p_max: float
    xi: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(self.nodes) < 1:
            raise ValueError("need at least one node")
        if len(self.channels) != len(self.nodes):
            raise ValueError("one channel pair per node is required")
        for name in ("T", "W", "N0", "p_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.xi < 1:
            raise ValueError("xi must lie in (0, 1)")

    @classmethod
    def build(
        cls,
        h: Sequence[float],
        g: Sequence[float],
        r_min: float | Sequence[float],
        p_c: float | Sequence[float],
        *,
        eh: EhParams = TABLE1_EH,
        T: float = 10.0,
        W: float = 400e3,
        N0: float = 1e-14,
        p_max: float = 0.19952623149688797,
        xi: float = 0.5,
    ) -> "NetworkInstance":
        """Convenience constructor from flat arrays (scalars broadcast)."""
        h = np.asarray(h, dtype=float).reshape(-1)
        r = np.broadcast_to(np.asarray(r_min, dtype=float), h.shape)
        pc = np.broadcast_to(np.asarray(p_c, dtype=float), h.shape)
        nodes = tuple(NodeParams(float(a), float(b)) for a, b in zip(r, pc))
        return cls(nodes, ChannelState(h, g), eh, T, W, N0, p_max, xi)

    def replace(self, **changes) -> "NetworkInstance":
        return replace(self, **changes)

    @property
    def K(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> np.ndarray:
        return self.channels.h

    @property
    def g(self) -> np.ndarray:
        return self.channels.g

    @property
    def r_min(self) -> np.ndarray:
        return np.array([n.r_min for n in self.nodes])

    @property
    def p_c(self) -> np.ndarray:
        return np.array([n.p_c for n in self.nodes])

    @property
    def snr_coeff(self) -> np.ndarray:
        """``xi h g / (W N0)``: backscatter SNR per watt of reflected PB power."""
        return self.xi * self.h * self.g / (self.W * self.N0)


@dataclass
class Allocation:
    """Time, reflection and PB power decisions for one block.

    For the static scheme ``p0`` and every entry of ``p`` hold the shared power.
    """

    tau0: float
    tau: np.ndarray
    beta: np.ndarray
    p0: float
    p: np.ndarray

    def __post_init__(self):
        self.tau0 = float(self.tau0)
        self.p0 = float(self.p0)
        self.tau = np.asarray(self.tau, dtype=float).reshape(-1).copy()
        self.beta = np.asarray(self.beta, dtype=float).reshape(-1).copy()
        self.p = np.asarray(self.p, dtype=float).reshape(-1).copy()
        if not (self.tau.size == self.beta.size == self.p.size):
            raise ValueError("tau, beta and p must all have length K")

    @classmethod
    def zeros(cls, K: int) -> "Allocation":
        """The all-zero sentinel returned when no feasible PB power exists."""
        z = np.zeros(K)
        return cls(0.0, z, z, 0.0, z)

    @classmethod
    def static(cls, tau0, tau, beta, p) -> "Allocation":
        tau = np.asarray(tau, dtype=float)
        return cls(tau0, tau, beta, p, np.full(tau.shape, float(p)))

    @property
    def K(self) -> int:
        return self.tau.size

    @property
    def durations(self) -> np.ndarray:
        return np.concatenate(([self.tau0], self.tau))

    @property
    def powers(self) -> np.ndarray:
        return np.concatenate(([self.p0], self.p))

    def is_zero(self) -> bool:
        return not np.any(self.durations) and not np.any(self.powers)

    def to_dict(self) -> dict:
        return {
            "tau0": self.tau0,
            "tau": self.tau.tolist(),
            "beta": self.beta.tolist(),
            "p0": self.p0,
            "p": self.p.tolist(),
        }


def harvested_power(x, eh: EhParams):
    """Output of the non-linear harvester for input RF power ``x`` (W).

    Evaluated as ``(a v - d) x / (v (x + v))``, which equals
    ``(a x + d)/(x + v) - d/v`` without the cancellation at small ``x``.
    """
    x = np.asarray(x, dtype=float)
    out = eh.gain * x / (eh.v * (x + eh.v))
    return out if out.ndim else float(out)


def harvested_power_slope(x, eh: EhParams):
    x = np.asarray(x, dtype=float)
    out = eh.gain / (x + eh.v) ** 2
    return out if out.ndim else float(out)


def harvested_power_inverse(y, eh: EhParams):
    """Input power that makes the harvester output ``y``; ``inf`` at or past saturation."""
    y = np.asarray(y, dtype=float)
    denom = eh.gain - y * eh.v
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, y * eh.v**2 / np.where(denom > 0, denom, 1.0), np.inf)
    out = np.where(y <= 0, 0.0, out)
    return out if out.ndim else float(out)


def backscatter_throughput(tau, beta, p, h, g, inst: NetworkInstance):
    """Bits delivered by one backscatter slot of length ``tau``."""
    snr = inst.xi * np.asarray(beta) * np.asarray(p) * np.asarray(h) * np.asarray(g) / (inst.W * inst.N0)
    out = inst.W * np.asarray(tau, dtype=float) * np.log2(1.0 + snr)
    return out if np.ndim(out) else float(out)


def node_throughput(alloc: Allocation, inst: NetworkInstance) -> np.ndarray:
    return backscatter_throughput(alloc.tau, alloc.beta, alloc.p, inst.h, inst.g, inst)


def harvested_energy_all(alloc: Allocation, inst: NetworkInstance) -> np.ndarray:
    """Total energy harvested by every node over the block (length-K array)."""
    h = inst.h
    powers = alloc.powers
    durations = alloc.durations
    # per (node k, slot i): harvest of node k while the PB radiates P_i
    per_slot = harvested_power(np.outer(h, powers), inst.eh) * durations[None, :]
    idx = np.arange(alloc.K)
    own = harvested_power((1.0 - alloc.beta) * alloc.p * h, inst.eh) * alloc.tau
    per_slot[idx, idx + 1] = own
    return per_slot.sum(axis=1)


def total_harvested_energy(alloc: Allocation, k: int, inst: NetworkInstance) -> float:
    """Energy node ``k`` (0-based) harvests over the whole block."""
    return float(harvested_energy_all(alloc, inst)[k])


def pb_energy(alloc: Allocation) -> float:
    return float(np.dot(alloc.powers, alloc.durations))


@dataclass(frozen=True)
class Tolerances:
    energy: float = 1e-9  # J, absolute
    rate_rel: float = 1e-6  # relative to r_min
    time_rel: float = 1e-9  # relative to T
    power: float = 1e-12  # W


@dataclass
class FeasibilityReport:
    throughput_slack: np.ndarray  # bits
    energy_slack: np.ndarray  # J
    time_slack: float  # s
    power_violation: np.ndarray  # W, per slot 0..K
    beta_violation: np.ndarray
    feasible: bool
    tol: Tolerances = field(default_factory=Tolerances)

    def to_dict(self) -> dict:
        return {
            "throughput_slack_bits": self.throughput_slack.tolist(),
            "energy_slack_j": self.energy_slack.tolist(),
            "time_slack_s": self.time_slack,
            "power_violation_w": self.power_violation.tolist(),
            "beta_violation": self.beta_violation.tolist(),
            "feasible": self.feasible,
        }


def check_feasibility(alloc: Allocation, inst: NetworkInstance, tol: Tolerances | None = None) -> FeasibilityReport:
    tol = tol or Tolerances()
    thr = node_throughput(alloc, inst) - inst.r_min
    energy = harvested_energy_all(alloc, inst) - inst.p_c * alloc.tau
    durations = alloc.durations
    time_slack = inst.T - float(durations.sum())
    neg_time = np.maximum(0.0, -durations)
    powers = alloc.powers
    pviol = np.maximum(0.0, powers - inst.p_max) + np.maximum(0.0, -powers)
    bviol = np.maximum(0.0, alloc.beta - 1.0) + np.maximum(0.0, -alloc.beta)
    feasible = bool(
        np.all(thr >= -tol.rate_rel * np.maximum(inst.r_min, 1.0))
        and np.all(energy >= -tol.energy)
        and time_slack >= -tol.time_rel * inst.T
        and np.all(neg_time <= tol.time_rel * inst.T)
        and np.all(pviol <= tol.power)
        and np.all(bviol <= 1e-12)
    )
    return FeasibilityReport(thr, energy, time_slack, pviol, bviol, feasible, tol)


@dataclass
class SolveReport:
    """Outcome of one scheme on one instance.

    ``trace`` holds one row per outer iteration; each row has at least
    ``iteration`` and ``energy``.
    """

    scheme: str
    allocation: Allocation
    energy: float
    feasible: bool
    converged: bool
    iterations: int
    trace: list[dict] = field(default_factory=list)
    slacks: FeasibilityReport | None = None
    kkt: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "energy_j": self.energy,
            "feasible": self.feasible,
            "converged": self.converged,
            "iterations": self.iterations,
            "allocation": self.allocation.to_dict(),
            "slacks": self.slacks.to_dict() if self.slacks is not None else None,
            "kkt": dict(self.kkt),
            "flags": list(self.flags),
            "trace": [_jsonable(row) for row in self.trace],
        }


def _jsonable(row):
    out = {}
    for key, val in row.items():
        if isinstance(val, np.ndarray):
            out[key] = val.tolist()
        elif isinstance(val, (np.floating, np.integer)):
            out[key] = val.item()
        else:
            out[key] = val
    return out


def sentinel_report(scheme: str, inst: NetworkInstance, iterations: int = 0, trace=None, flags=None) -> SolveReport:
    alloc = Allocation.zeros(inst.K)
    return SolveReport(
        scheme=scheme,
        allocation=alloc,
        energy=0.0,
        feasible=False,
        converged=True,
        iterations=iterations,
        trace=list(trace or []),
        slacks=check_feasibility(alloc, inst),
        flags=list(flags or []) + ["infeasible"],
    )
