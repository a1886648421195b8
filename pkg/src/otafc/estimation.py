"""Pilot-based least-squares channel estimation over the TDMA hop schedule.

Training phase l is the slot in which hop l's transmitters send pilots:
phase 0 is the BS (received by group 1), phase l (1 <= l < L) is group l
(received by group l+1), and phase L is group L (received by the Rx). Each
phase uses an orthogonal pilot matrix of length tau[l] = rep[l] * tau_min[l]
channel uses; repetition is realized as a longer orthogonal block.
"""

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, EstimatedChannelSet, NoiseModel
from .utils import as_rng, complex_normal


@dataclass(frozen=True)
class PilotPlan:
    """Per-phase pilot lengths and the common pilot transmit power.

    tau[l] must equal rep[l] * tau_min[l] with integer rep[l] >= 1; tau_min
    holds the orthogonality minima (N_t, K_1, ..., K_L).
    """

    pilot_power: float
    tau: tuple
    rep: tuple
    tau_min: tuple

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(int(t) for t in self.tau))
        object.__setattr__(self, "rep", tuple(int(m) for m in self.rep))
        object.__setattr__(self, "tau_min", tuple(int(t) for t in self.tau_min))
        if self.pilot_power <= 0:
            raise ValueError("pilot power must be positive")
        if not len(self.tau) == len(self.rep) == len(self.tau_min):
            raise ValueError("tau, rep, tau_min must have equal length")
        if any(t < 1 for t in self.tau_min):
            raise ValueError("minimum pilot lengths must be >= 1")
        if any(m < 1 for m in self.rep):
            raise ValueError("repetition factors must be >= 1")
        if any(t != m * tm for t, m, tm in zip(self.tau, self.rep, self.tau_min)):
            raise ValueError("tau[l] must equal rep[l] * tau_min[l]")

    @property
    def num_phases(self) -> int:
        return len(self.tau)

    @property
    def tau_total(self) -> int:
        return sum(self.tau)

    @classmethod
    def from_reps(cls, tau_min, rep, pilot_power: float) -> "PilotPlan":
        tau = tuple(int(m) * int(t) for m, t in zip(rep, tau_min))
        return cls(pilot_power=pilot_power, tau=tau, rep=tuple(rep), tau_min=tuple(tau_min))

    @classmethod
    def minimal(cls, tau_min, pilot_power: float) -> "PilotPlan":
        return cls.from_reps(tau_min, (1,) * len(tuple(tau_min)), pilot_power)


def make_pilots(tau: int, m: int) -> np.ndarray:
    """Orthogonal tau x m pilot matrix with Phi^H Phi = tau * I.

    Truncated DFT columns; every entry has unit modulus so each column
    carries energy tau.
    """
    if tau < m:
        raise ValueError(f"pilot length {tau} cannot support {m} orthogonal sequences")
    t = np.arange(tau)[:, None]
    k = np.arange(m)[None, :]
    return np.exp(-2j * np.pi * t * k / tau)


def _phase_noise_vars(noise: NoiseModel) -> list:
    # receiving-side convention: phase l is heard by the next stage
    return list(noise.relay_noise_var) + [noise.rx_noise_var]


def estimate_hop(h_true: np.ndarray, plan: PilotPlan, hop: int,
                 noise_var: float, rng_seed) -> np.ndarray:
    """LS estimate of one hop matrix from a simulated pilot exchange.

    Transmitters are the columns of h_true. The received block is
    Y = sqrt(p_p) H Phi^T + N with i.i.d. CN(0, noise_var) noise, and the
    estimate is Y Phi^* / (sqrt(p_p) tau), which equals H plus an i.i.d.
    CN(0, noise_var / (p_p tau)) error.
    """
    if not 0 <= hop < plan.num_phases:
        raise ValueError(f"phase index {hop} out of range")
    tau = plan.tau[hop]
    n_rx, n_tx = h_true.shape
    if tau < n_tx:
        raise ValueError(
            f"phase {hop}: pilot length {tau} shorter than {n_tx} transmitters"
        )
    rng = as_rng(rng_seed)
    phi = make_pilots(tau, n_tx)
    y = np.sqrt(plan.pilot_power) * (h_true @ phi.T)
    if noise_var > 0:
        y = y + complex_normal(rng, (n_rx, tau), noise_var)
    return (y @ phi.conj()) / (np.sqrt(plan.pilot_power) * tau)


def estimate_all(ch: ChannelSet, plan: PilotPlan, noise: NoiseModel,
                 rng_seed) -> EstimatedChannelSet:
    """Run every training phase and assemble the estimated channel set.

    The direct link, when present, is estimated during the BS phase (the Rx
    correlates with the BS pilots like a group-1 device, at its own noise
    floor); otherwise it stays exactly zero.
    """
    L = ch.num_groups
    if plan.num_phases != L + 1:
        raise ValueError(f"plan has {plan.num_phases} phases, channel needs {L + 1}")
    rng = as_rng(rng_seed)
    recv_var = _phase_noise_vars(noise)

    hops = [estimate_hop(ch.h_hop[0], plan, 0, recv_var[0], rng)]
    if np.any(ch.h_direct):
        h_direct = estimate_hop(ch.h_direct, plan, 0, noise.rx_noise_var, rng)
    else:
        h_direct = np.zeros_like(ch.h_direct)
    for l in range(1, L):
        hops.append(estimate_hop(ch.h_hop[l], plan, l, recv_var[l], rng))
    h_last = estimate_hop(ch.h_last, plan, L, recv_var[L], rng)
    return EstimatedChannelSet(h_direct=h_direct, h_hop=tuple(hops), h_last=h_last)


def inject_error(ch: ChannelSet, plan: PilotPlan, noise: NoiseModel,
                 rng_seed) -> EstimatedChannelSet:
    """Closed-form shortcut: add CN(0, sigma^2 / (p_p tau_l)) errors directly.

    Distributionally identical to estimate_all because orthogonal-pilot LS
    errors are exactly i.i.d. complex Gaussian at that variance.
    """
    L = ch.num_groups
    if plan.num_phases != L + 1:
        raise ValueError(f"plan has {plan.num_phases} phases, channel needs {L + 1}")
    rng = as_rng(rng_seed)
    recv_var = _phase_noise_vars(noise)

    def perturbed(h, phase, var):
        err_var = var / (plan.pilot_power * plan.tau[phase])
        if err_var == 0:
            return h.copy()
        return h + complex_normal(rng, h.shape, err_var)

    hops = [perturbed(ch.h_hop[0], 0, recv_var[0])]
    if np.any(ch.h_direct):
        h_direct = perturbed(ch.h_direct, 0, noise.rx_noise_var)
    else:
        h_direct = np.zeros_like(ch.h_direct)
    for l in range(1, L):
        hops.append(perturbed(ch.h_hop[l], l, recv_var[l]))
    h_last = perturbed(ch.h_last, L, recv_var[L])
    return EstimatedChannelSet(h_direct=h_direct, h_hop=tuple(hops), h_last=h_last)
