"""Training-time budget arithmetic and greedy pilot-allocation heuristics.

Every heuristic starts from one orthogonal block per hop (rep = 1) and
greedily spends the excess budget: at each step the highest-weight hop that
still fits gets one more repetition of its minimum-length block. Ties break
toward the earliest hop; zero-weight hops are never selected.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import HopStatistics
from .estimation import PilotPlan
from .topology import Topology


class Heuristic(str, Enum):
    """Pilot-allocation strategies, keyed by their CLI names."""

    UNIFORM = "uniform"
    PROPORTIONAL_TO_MIN = "prop_min"
    FRONT_LOADED = "front_loaded"
    ALL_TO_FIRST_HOP = "all_first"
    CHANNEL_AWARE = "channel_aware"


@dataclass
class AllocationState:
    """Mutable greedy-loop state: current repetitions and what is left to spend."""

    rep: np.ndarray
    tau_min: np.ndarray
    budget_remaining: int

    def __post_init__(self):
        self.rep = np.asarray(self.rep, dtype=int)
        self.tau_min = np.asarray(self.tau_min, dtype=int)
        if np.any(self.rep < 1):
            raise ValueError("repetition factors must be >= 1")
        if self.budget_remaining < 0:
            raise ValueError("remaining budget cannot be negative")


def tau_minimums(topology: Topology) -> np.ndarray:
    """Minimum per-phase pilot lengths (N_t, K_1, ..., K_L)."""
    return np.array([topology.n_tx, *topology.group_sizes], dtype=int)


def tau_min_total(topology: Topology) -> int:
    """Minimum total training time: N_t + sum of the group sizes."""
    return int(tau_minimums(topology).sum())


def pilot_dictionary_size(topology: Topology) -> int:
    """Distinct orthogonal sequences needed across all TDMA phases."""
    return int(tau_minimums(topology).max())


def heuristic_weights(heuristic: Heuristic, state: AllocationState,
                      stats: HopStatistics = None) -> np.ndarray:
    """Selection weight of each hop at the current greedy step."""
    heuristic = Heuristic(heuristic)
    m = state.rep.astype(float)
    tau_min = state.tau_min.astype(float)
    if heuristic is Heuristic.UNIFORM:
        return 1.0 / m
    if heuristic is Heuristic.PROPORTIONAL_TO_MIN:
        return tau_min / m
    if heuristic is Heuristic.FRONT_LOADED:
        hop = np.arange(m.size, dtype=float)
        return 1.0 / ((hop + 1.0) * m * tau_min)
    if heuristic is Heuristic.CHANNEL_AWARE:
        if stats is None:
            raise ValueError("channel_aware weights need hop statistics")
        beta = np.asarray(stats.beta, dtype=float)
        if beta.size != m.size:
            raise ValueError(f"expected {m.size} hop gains, got {beta.size}")
        return 1.0 / (beta * m * tau_min)
    w = np.zeros(m.size)
    w[0] = 1.0
    return w


def allocate(heuristic: Heuristic, topology: Topology, excess_budget: int,
             stats: HopStatistics = None, pilot_power: float = 1.0) -> PilotPlan:
    """Spend the excess training budget greedily and return the pilot plan.

    Each increment costs a whole tau_min[l] block (partial repetitions would
    break pilot orthogonality); budget too small for any eligible hop is
    discarded.
    """
    heuristic = Heuristic(heuristic)
    if excess_budget < 0:
        raise ValueError("excess budget cannot be negative")
    tau_min = tau_minimums(topology)
    state = AllocationState(rep=np.ones(tau_min.size, dtype=int),
                            tau_min=tau_min, budget_remaining=int(excess_budget))
    while True:
        w = heuristic_weights(heuristic, state, stats)
        order = np.lexsort((np.arange(w.size), -w))
        chosen = -1
        for idx in order:
            if w[idx] > 0 and tau_min[idx] <= state.budget_remaining:
                chosen = idx
                break
        if chosen < 0:
            break
        state.rep[chosen] += 1
        state.budget_remaining -= int(tau_min[chosen])
    return PilotPlan.from_reps(tau_min, tuple(state.rep), pilot_power)
