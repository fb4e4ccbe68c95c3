"""Slow set-point dispatch (leader-follower integral + consensus averaging)
and the set-point masking attack that sits on its output."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SecondaryConfig:
    enabled: bool = False
    period: float = 2.0  # s
    k_i: float = 1.0  # pu per Hz per tick
    rounds: int = 3
    mixing: float = 0.5  # fraction moved toward the weighted mean per round
    omega0: float = 60.0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("secondary period must be > 0")
        if not self.k_i > 0:
            raise ValueError("k_i must be > 0")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 0.0 < self.mixing <= 1.0:
            raise ValueError("mixing must lie in (0, 1]")


@dataclass(frozen=True)
class AttackSpec:
    targets: frozenset
    t_on: float
    t_off: float
    mode: str = "freeze"

    def __post_init__(self):
        if not self.t_on < self.t_off:
            raise ValueError("attack window needs t_on < t_off")
        if not self.targets:
            raise ValueError("attack needs at least one target")
        if self.mode != "freeze":
            raise ValueError(f"unsupported attack mode {self.mode!r}")

    def active(self, t: float) -> bool:
        return self.t_on <= t < self.t_off


def leader_increment(f_island: float, cfg: SecondaryConfig) -> float:
    return cfg.k_i * (cfg.omega0 - f_island)


def consensus_rounds(p: np.ndarray, ratings: np.ndarray, rounds: int, mixing: float) -> np.ndarray:
    """Move per-unit set-points toward their rating-weighted mean.

    Each round preserves ``sum(ratings * p)``, so only the distribution of the
    dispatched power changes, never its total.
    """
    p = np.array(p, dtype=float)
    w = ratings / ratings.sum()
    for _ in range(rounds):
        p = p + mixing * (w @ p - p)
    return p


def secondary_update(f_island: float, ratings, p_set_star, cfg: SecondaryConfig) -> np.ndarray:
    """One secondary tick for the controllable devices of one island."""
    p = np.asarray(p_set_star, dtype=float)
    if p.size == 0:
        return p.copy()
    ratings = np.asarray(ratings, dtype=float)
    delta = leader_increment(f_island, cfg)
    p = p + delta * ratings / ratings.sum()
    p = consensus_rounds(p, ratings, cfg.rounds, cfg.mixing)
    return np.clip(p, 0.0, 1.0)


def attack_filter(p_set_star: dict, attack: AttackSpec | None, t: float, snapshot: dict) -> dict:
    """Replace targeted set-points by their pre-attack snapshot inside the window."""
    if attack is None or not attack.active(t):
        return dict(p_set_star)
    return {dev: (snapshot[dev] if dev in attack.targets else p) for dev, p in p_set_star.items()}


@dataclass
class AttackFilter:
    """Stateful wrapper that captures the snapshot at ``t_on``."""

    attack: AttackSpec | None
    snapshot: dict = field(default_factory=dict)

    def capture(self, p_set_star: dict) -> None:
        if self.attack is not None:
            self.snapshot = {d: p_set_star[d] for d in self.attack.targets}

    def __call__(self, p_set_star: dict, t: float) -> dict:
        if self.attack is not None and self.attack.active(t) and not self.snapshot:
            self.capture(p_set_star)
        return attack_filter(p_set_star, self.attack, t, self.snapshot)
