"""Channel generation and the cascaded-relay linear algebra.

Large-scale attenuation follows the TR 38.901 UMi Street Canyon curves
(NLoS by default); small-scale fading is i.i.d. unit-variance circular
complex Gaussian on all relay-involved links and Ricean on the optional
direct transmitter-receiver link.

Arguments named ``gains`` are sequences of per-group complex amplification
vectors (a_1 ... a_L); group l applies diag(a_l) to the signal it forwards.
"""

from dataclasses import dataclass

import numpy as np

from .topology import Placement
from .utils import as_rng, complex_normal, hermitize

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class PathlossParams:
    """Large-scale model configuration.

    model is one of "nlos" (default, the operative configuration), "los",
    or "mixed" (deterministic LoS-probability blend of the two curves in
    the linear-gain domain).
    """

    carrier_ghz: float = 28.0
    model: str = "nlos"
    bs_height: float = 5.0
    relay_height: float = 1.5
    ricean_kappa_db: float = 0.0

    def __post_init__(self):
        if self.carrier_ghz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.model not in ("nlos", "los", "mixed"):
            raise ValueError(f"unknown pathloss model {self.model!r}")


@dataclass(frozen=True)
class NoiseModel:
    """Per-group relay noise variances and the receiver noise variance, watts."""

    relay_noise_var: tuple
    rx_noise_var: float

    def __post_init__(self):
        object.__setattr__(
            self, "relay_noise_var", tuple(float(v) for v in self.relay_noise_var)
        )
        if self.rx_noise_var <= 0 or any(v <= 0 for v in self.relay_noise_var):
            raise ValueError("noise variances must be positive")


def noise_power_watts(psd_dbm_per_hz: float = -174.0, bandwidth_hz: float = 300e6) -> float:
    """Thermal noise power N_o * B in watts (default -174 dBm/Hz over 300 MHz)."""
    dbm = psd_dbm_per_hz + 10.0 * np.log10(bandwidth_hz)
    return float(10.0 ** ((dbm - 30.0) / 10.0))


def default_noise_model(num_groups: int, psd_dbm_per_hz: float = -174.0,
                        bandwidth_hz: float = 300e6) -> NoiseModel:
    """All relay groups and the receiver at the common thermal floor N_o*B."""
    p = noise_power_watts(psd_dbm_per_hz, bandwidth_hz)
    return NoiseModel(relay_noise_var=(p,) * num_groups, rx_noise_var=p)


def _pl_nlos_db(d, f_ghz):
    return 35.3 * np.log10(d) + 22.4 + 21.3 * np.log10(f_ghz)


def _pl_los_db(d, f_ghz, h_bs, h_ut):
    d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * f_ghz * 1e9 / SPEED_OF_LIGHT
    pl_near = 32.4 + 21.0 * np.log10(d) + 20.0 * np.log10(f_ghz)
    if d_bp <= 0:
        return pl_near
    pl_far = (32.4 + 40.0 * np.log10(d) + 20.0 * np.log10(f_ghz)
              - 9.5 * np.log10(d_bp ** 2 + (h_bs - h_ut) ** 2))
    return np.where(d < d_bp, pl_near, pl_far)


def _los_probability(d):
    # TR 38.901 UMi outdoor LoS probability vs distance
    p = np.minimum(18.0 / d, 1.0)
    return p + np.exp(-d / 36.0) * (1.0 - p)


def pathloss_db(distance_m, params: PathlossParams):
    """Pathloss in dB at the given distance(s); distances clamp at 1 m.

    "nlos": 35.3 log10(d) + 22.4 + 21.3 log10(f_GHz).
    "los": dual-slope UMi LoS curve with the breakpoint distance from the
    configured antenna heights.
    "mixed": -10 log10 of the LoS-probability-weighted linear gain.
    """
    d = np.maximum(np.asarray(distance_m, dtype=float), 1.0)
    f = params.carrier_ghz
    if params.model == "nlos":
        pl = _pl_nlos_db(d, f)
    elif params.model == "los":
        pl = _pl_los_db(d, f, params.bs_height, params.relay_height)
    else:
        p = _los_probability(d)
        g = (p * 10.0 ** (-_pl_los_db(d, f, params.bs_height, params.relay_height) / 10.0)
             + (1.0 - p) * 10.0 ** (-_pl_nlos_db(d, f) / 10.0))
        pl = -10.0 * np.log10(g)
    return pl if np.ndim(distance_m) else float(pl)


def linear_gain(distance_m, params: PathlossParams):
    """Linear power gain 10^(-PL/10)."""
    return 10.0 ** (-np.asarray(pathloss_db(distance_m, params)) / 10.0)


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every channel matrix in the cascade.

    h_hop[0] is the BS-to-group-1 matrix (K_1 x N_t); h_hop[l] maps group l
    to group l+1 (K_{l+1} x K_l); h_last maps group L to the receiver
    (N_r x K_L); h_direct is the N_r x N_t direct link (all zeros when the
    link is blocked).
    """

    h_direct: np.ndarray
    h_hop: tuple
    h_last: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h_hop", tuple(self.h_hop))
        self.validate()

    def validate(self):
        if not self.h_hop:
            raise ValueError("need at least one hop matrix")
        for l in range(len(self.h_hop) - 1):
            if self.h_hop[l + 1].shape[1] != self.h_hop[l].shape[0]:
                raise ValueError(
                    f"hop {l + 1} expects {self.h_hop[l].shape[0]} columns, "
                    f"got {self.h_hop[l + 1].shape[1]}"
                )
        if self.h_last.shape[1] != self.h_hop[-1].shape[0]:
            raise ValueError("last-hop column count must match final group size")
        if self.h_direct.shape != (self.h_last.shape[0], self.h_hop[0].shape[1]):
            raise ValueError("direct-link matrix must be N_r x N_t")

    @property
    def num_groups(self) -> int:
        return len(self.h_hop)

    @property
    def group_sizes(self) -> tuple:
        return tuple(h.shape[0] for h in self.h_hop)

    @property
    def n_tx(self) -> int:
        return self.h_hop[0].shape[1]

    @property
    def n_rx(self) -> int:
        return self.h_last.shape[0]


# LS estimates share the container; only the provenance differs.
EstimatedChannelSet = ChannelSet


@dataclass(frozen=True)
class HopStatistics:
    """Average large-scale linear gain per hop; index 0 is the BS hop."""

    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if np.any(self.beta <= 0):
            raise ValueError("average hop gains must be positive")


def _pairwise_distances(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2)


def draw_channels(placement: Placement, params: PathlossParams, rng_seed) -> ChannelSet:
    """Draw one channel realization: pathloss amplitude times small-scale fading.

    Relay-involved links are rich scattering (i.i.d. CN(0,1) small scale);
    the direct link, when present, is Ricean with the configured kappa and a
    random-phase rank-one unit-modulus LoS part. Deterministic given the seed.
    """
    rng = as_rng(rng_seed)
    top = placement.topology
    groups = placement.relay_positions
    L = len(groups)
    bs = placement.bs_position[None, :]
    rx = placement.rx_position[None, :]

    hops = []
    d_bs = _pairwise_distances(groups[0], bs)[:, 0]
    amp = np.sqrt(linear_gain(d_bs, params))[:, None]
    hops.append(amp * complex_normal(rng, (top.group_sizes[0], top.n_tx)))
    for l in range(L - 1):
        d = _pairwise_distances(groups[l + 1], groups[l])
        hops.append(np.sqrt(linear_gain(d, params)) * complex_normal(rng, d.shape))
    d_rx = _pairwise_distances(rx, groups[-1])[0, :]
    amp = np.sqrt(linear_gain(d_rx, params))[None, :]
    h_last = amp * complex_normal(rng, (top.n_rx, top.group_sizes[-1]))

    if top.direct_link_present:
        kappa = 10.0 ** (params.ricean_kappa_db / 10.0)
        d0 = float(np.linalg.norm(placement.rx_position - placement.bs_position))
        los = np.outer(np.exp(2j * np.pi * rng.random(top.n_rx)),
                       np.exp(-2j * np.pi * rng.random(top.n_tx)))
        scatter = complex_normal(rng, (top.n_rx, top.n_tx))
        small = (np.sqrt(kappa / (1.0 + kappa)) * los
                 + np.sqrt(1.0 / (1.0 + kappa)) * scatter)
        h_direct = np.sqrt(linear_gain(d0, params)) * small
    else:
        h_direct = np.zeros((top.n_rx, top.n_tx), dtype=complex)

    return ChannelSet(h_direct=h_direct, h_hop=tuple(hops), h_last=h_last)


def _check_gains(ch: ChannelSet, gains):
    if len(gains) != ch.num_groups:
        raise ValueError(f"expected {ch.num_groups} gain vectors, got {len(gains)}")
    for l, (a, k) in enumerate(zip(gains, ch.group_sizes)):
        if np.shape(a) != (k,):
            raise ValueError(f"gain vector {l} must have shape ({k},)")


def effective_channel(ch: ChannelSet, gains) -> np.ndarray:
    """End-to-end matrix H_direct + H_last A_L H_L ... A_2 H_2 A_1 H_1."""
    _check_gains(ch, gains)
    m = ch.h_hop[0]
    for l, a in enumerate(gains):
        m = np.asarray(a)[:, None] * m
        nxt = ch.h_hop[l + 1] if l + 1 < ch.num_groups else ch.h_last
        m = nxt @ m
    return ch.h_direct + m


def transfer_matrix(ch: ChannelSet, gains, j: int) -> np.ndarray:
    """Map from group j's input noise to the receiver front end (1-based j).

    T_j = H_last A_L H_L ... H_{j+1} A_j, shape N_r x K_j.
    """
    _check_gains(ch, gains)
    if not 1 <= j <= ch.num_groups:
        raise ValueError(f"hop index {j} out of range 1..{ch.num_groups}")
    m = np.diag(np.asarray(gains[j - 1], dtype=complex))
    for l in range(j, ch.num_groups):
        m = ch.h_hop[l] @ m
        m = np.asarray(gains[l])[:, None] * m
    return ch.h_last @ m


def noise_covariance(ch: ChannelSet, gains, noise: NoiseModel) -> np.ndarray:
    """Aggregate noise covariance at the receiver input.

    R = sigma_c^2 I + sum_j sigma_{u,j}^2 T_j T_j^H; Hermitian PSD.
    """
    if len(noise.relay_noise_var) != ch.num_groups:
        raise ValueError("noise model group count must match the channel set")
    r = noise.rx_noise_var * np.eye(ch.n_rx, dtype=complex)
    for j in range(1, ch.num_groups + 1):
        t = transfer_matrix(ch, gains, j)
        r = r + noise.relay_noise_var[j - 1] * (t @ t.conj().T)
    return hermitize(r)


def relay_input_powers(ch: ChannelSet, gains, f1: np.ndarray,
                       noise: NoiseModel, l: int) -> np.ndarray:
    """Incident-signal power surrogate for every relay of group l (1-based).

    Row powers of H_l A_{l-1} ... A_1 H_1 F_1 for a unit-variance input,
    plus the group's own noise floor; upstream relay noise is excluded by
    construction of the surrogate.
    """
    if not 1 <= l <= ch.num_groups:
        raise ValueError(f"hop index {l} out of range 1..{ch.num_groups}")
    m = ch.h_hop[0] @ f1
    for j in range(1, l):
        m = ch.h_hop[j] @ (np.asarray(gains[j - 1])[:, None] * m)
    return np.sum(np.abs(m) ** 2, axis=1) + noise.relay_noise_var[l - 1]


def relay_input_power(ch: ChannelSet, gains, f1: np.ndarray,
                      noise: NoiseModel, l: int, k: int) -> float:
    """Incident power surrogate for relay k of group l (both indices 1-based)."""
    powers = relay_input_powers(ch, gains, f1, noise, l)
    if not 1 <= k <= powers.size:
        raise ValueError(f"relay index {k} out of range 1..{powers.size}")
    return float(powers[k - 1])


def hop_statistics(placement: Placement, params: PathlossParams) -> HopStatistics:
    """Average linear large-scale gain per hop, from the placement geometry."""
    groups = placement.relay_positions
    L = len(groups)
    beta = np.empty(L + 1)
    d_bs = _pairwise_distances(groups[0], placement.bs_position[None, :])
    beta[0] = np.mean(linear_gain(d_bs, params))
    for l in range(L - 1):
        d = _pairwise_distances(groups[l], groups[l + 1])
        beta[l + 1] = np.mean(linear_gain(d, params))
    d_rx = _pairwise_distances(groups[-1], placement.rx_position[None, :])
    beta[L] = np.mean(linear_gain(d_rx, params))
    return HopStatistics(beta=beta)
