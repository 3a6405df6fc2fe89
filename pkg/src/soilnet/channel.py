"""Lossy single-hop radio link with per-packet loss, corruption, and LQI.

LQI uses a fixed unitless [50, 110] scale. Link quality is a two-state
mixture: a fraction of packets see the good-state LQI distribution, the
rest the bad-state one. An optional state-persistence probability adds
burstiness; the default draws states independently per packet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

LQI_MIN = 50.0
LQI_MAX = 110.0

DELIVERED = "delivered"
LOST = "lost"
CORRUPTED = "corrupted"


@dataclass(frozen=True)
class LinkModel:
    loss_prob: float = 0.0
    corrupt_prob: float = 0.0
    lqi_mean_good: float = 102.0
    lqi_mean_bad: float = 68.0
    lqi_sigma: float = 4.0
    quality_mixture: float = 1.0  # fraction of time in the good state
    state_persistence: float = 0.0  # burstiness hook; 0 = independent draws

    def __post_init__(self):
        for name in ("loss_prob", "corrupt_prob", "quality_mixture", "state_persistence"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("lqi_mean_good", "lqi_mean_bad"):
            v = getattr(self, name)
            if not LQI_MIN <= v <= LQI_MAX:
                raise ValueError(f"{name}={v} outside LQI scale [{LQI_MIN}, {LQI_MAX}]")


@dataclass
class Delivery:
    outcome: str
    lqi: float | None  # absent when the packet was lost

    __slots__ = ("outcome", "lqi")


def transmit(link: LinkModel, rng, frame=None) -> Delivery:
    """One packet through the link; deterministic under a fixed seeded rng."""
    if link.state_persistence > 0.0:
        # bursty variant: carry the good/bad state on the generator itself
        good = getattr(rng, "_link_state_good", None)
        if good is None or rng.random() >= link.state_persistence:
            good = rng.random() < link.quality_mixture
        rng._link_state_good = good
    else:
        good = rng.random() < link.quality_mixture
    if rng.random() < link.loss_prob:
        return Delivery(LOST, None)
    mean = link.lqi_mean_good if good else link.lqi_mean_bad
    lqi = min(LQI_MAX, max(LQI_MIN, rng.gauss(mean, link.lqi_sigma)))
    if rng.random() < link.corrupt_prob:
        return Delivery(CORRUPTED, lqi)
    return Delivery(DELIVERED, lqi)


# Logistic LQI -> delivery-probability map, calibrated against simulated
# links so that a pegged-high window predicts >= 0.99 and a pegged-low
# window <= 0.05.
_PRR_MIDPOINT = 80.0
_PRR_SCALE = 6.0


def prr_from_lqi(lqi_window) -> float:
    """Estimate delivery probability from recent LQI values."""
    window = list(lqi_window)
    if not window:
        raise ValueError("empty LQI window")
    mean = sum(window) / len(window)
    return 1.0 / (1.0 + math.exp(-(mean - _PRR_MIDPOINT) / _PRR_SCALE))
