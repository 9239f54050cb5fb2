"""Large-scale path loss plus Rayleigh small-scale fading.

Fading powers are unit-mean exponential draws from numpy's Philox
counter-based generator. Draw order is fixed: ``h_1..h_K`` first, then
``g_1..g_K``, so a given ``(geometry, seed, K)`` always yields the same gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelState


@dataclass(frozen=True, eq=False)
class Geometry:
    r: float  # PB-IF distance, m
    pb_node: np.ndarray  # m, per node
    node_if: np.ndarray  # m, per node
    alpha: float = 3.0

    def __post_init__(self):
        pb = np.asarray(self.pb_node, dtype=float).reshape(-1)
        nf = np.asarray(self.node_if, dtype=float).reshape(-1)
        if pb.shape != nf.shape:
            raise ValueError("per-node distance arrays differ in length")
        if self.r <= 0 or np.any(pb <= 0) or np.any(nf <= 0):
            raise ValueError("all distances must be positive")
        if self.alpha <= 0:
            raise ValueError("path loss exponent must be positive")
        object.__setattr__(self, "pb_node", pb)
        object.__setattr__(self, "node_if", nf)

    @classmethod
    def midpoint(cls, r: float, K: int, alpha: float = 3.0) -> "Geometry":
        """Every node halfway between the PB and the IF."""
        half = np.full(K, r / 2.0)
        return cls(r, half, half.copy(), alpha)

    @property
    def K(self) -> int:
        return self.pb_node.size


def link_gain(distance, exponent: float, fade=1.0):
    out = np.asarray(fade, dtype=float) * np.asarray(distance, dtype=float) ** (-float(exponent))
    return out if out.ndim else float(out)


def fading_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def sample_channels(geometry: Geometry, seed: int, K: int | None = None, fading: bool = True) -> ChannelState:
    """Draw one block's channel gains.

    With ``fading=False`` the gains reduce to pure path loss.
    """
    K = geometry.K if K is None else K
    if K < 1:
        raise ValueError("K must be at least 1")
    if K != geometry.K:
        raise ValueError(f"geometry describes {geometry.K} nodes, asked for {K}")
    if fading:
        rng = fading_rng(seed)
        fade_h = rng.standard_exponential(K)
        fade_g = rng.standard_exponential(K)
        # exp(1) draws can underflow to exactly 0 with vanishing probability
        tiny = np.finfo(float).tiny
        fade_h = np.maximum(fade_h, tiny)
        fade_g = np.maximum(fade_g, tiny)
    else:
        fade_h = fade_g = np.ones(K)
    h = link_gain(geometry.pb_node, geometry.alpha, fade_h)
    g = link_gain(geometry.node_if, geometry.alpha, fade_g)
    return ChannelState(h, g)
