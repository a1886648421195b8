"""Alternating optimization of the precoder, relay gains, and combiner.

Minimizes  ||F2 Heff F1 - W||_F^2 + tr(F2 R F2^H)  over the estimated
channels, subject to the transmit-power cap on F1 and per-relay power caps
on the gains (via the incident-power surrogate). Block order per outer
iteration: F1, then the gain vectors a_1..a_L, then F2.

F2 is stored as the (out_dim x N_r) map applied to the received vector, so
the emulated layer is F2 @ Heff @ F1.
"""

from dataclasses import dataclass

import numpy as np

from .channel import (ChannelSet, NoiseModel, effective_channel,
                      noise_covariance, relay_input_powers)
from .utils import as_rng, complex_normal, hermitize


class SolverDivergenceError(RuntimeError):
    """Raised when an update produces non-finite values."""


@dataclass(frozen=True)
class TargetLayer:
    """Target linear layer y = W x + b; the bias is applied digitally."""

    w: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=complex))
        object.__setattr__(self, "bias", np.asarray(self.bias, dtype=complex))
        if self.w.ndim != 2:
            raise ValueError("weight matrix must be 2-D")
        if self.bias.shape != (self.w.shape[0],):
            raise ValueError("bias length must match the output dimension")
        if not (np.isfinite(self.w).all() and np.isfinite(self.bias).all()):
            raise ValueError("target layer entries must be finite")

    @property
    def out_dim(self) -> int:
        return self.w.shape[0]

    @property
    def in_dim(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True)
class OtaParams:
    """One design point: precoder f1, combiner f2, per-group gain vectors a."""

    f1: np.ndarray
    f2: np.ndarray
    a: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(np.asarray(v, dtype=complex) for v in self.a))


@dataclass(frozen=True)
class PowerBudget:
    """Transmit-power cap (watts) and per-relay caps p_relay[l][k]."""

    p_max_bs: float
    p_relay: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "p_relay", tuple(np.asarray(p, dtype=float) for p in self.p_relay)
        )
        if self.p_max_bs <= 0 or any(np.any(p <= 0) for p in self.p_relay):
            raise ValueError("power budgets must be positive")

    @classmethod
    def uniform(cls, group_sizes, p_max_bs: float, relay_w: float) -> "PowerBudget":
        return cls(p_max_bs=p_max_bs,
                   p_relay=tuple(np.full(k, relay_w) for k in group_sizes))


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 100
    objective_tolerance: float = 1e-6
    bisection_tolerance: float = 1e-9
    init_mode: str = "power"  # "power" (deterministic, feasible) | "random"

    def __post_init__(self):
        if self.objective_tolerance <= 0 or self.bisection_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("need at least one outer iteration")
        if self.init_mode not in ("power", "random"):
            raise ValueError(f"unknown init mode {self.init_mode!r}")


@dataclass
class SolveResult:
    params: OtaParams
    objective_trace: np.ndarray
    iterations: int
    status: str  # converged | max_iters

    @property
    def terminal_objective(self) -> float:
        return float(self.objective_trace[-1])


def objective(params: OtaParams, est: ChannelSet, target: TargetLayer,
              noise: NoiseModel) -> float:
    """Imitation error plus propagated-noise penalty on the given channels."""
    heff = effective_channel(est, params.a)
    resid = params.f2 @ heff @ params.f1 - target.w
    r = noise_covariance(est, params.a, noise)
    noise_term = np.sum((params.f2 @ r) * params.f2.conj()).real
    return float(np.sum(np.abs(resid) ** 2) + noise_term)


def _solve_hermitian(g: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve g x = rhs for Hermitian g, with a trace-scaled ridge fallback."""
    try:
        x = np.linalg.solve(g, rhs)
        if np.isfinite(x).all():
            return x
    except np.linalg.LinAlgError:
        pass
    eps = 1e-12 * np.trace(g).real
    if eps <= 0:
        eps = 1e-30
    return np.linalg.solve(g + eps * np.eye(g.shape[0]), rhs)


def update_f2(est: ChannelSet, target: TargetLayer, noise: NoiseModel,
              params: OtaParams) -> np.ndarray:
    """Unconstrained minimizer of the objective in F2 (closed form).

    With B = Heff F1: F2 = W B^H (B B^H + R)^{-1}.
    """
    heff = effective_channel(est, params.a)
    b = heff @ params.f1
    g = hermitize(b @ b.conj().T + noise_covariance(est, params.a, noise))
    rhs = target.w @ b.conj().T
    return _solve_hermitian(g, rhs.conj().T).conj().T


def update_f1(est: ChannelSet, target: TargetLayer, noise: NoiseModel,
              params: OtaParams, budget: PowerBudget,
              tol: float = 1e-9) -> np.ndarray:
    """Transmit-power-constrained minimizer of the objective in F1.

    With C = F2 Heff: F1(mu) = (C^H C + mu I)^{-1} C^H W. mu = 0 when the
    unconstrained (minimum-norm) solution already fits the power budget,
    otherwise mu is found by bisection so ||F1||_F^2 hits the budget within
    tol. The noise penalty does not involve F1.
    """
    heff = effective_channel(est, params.a)
    c = params.f2 @ heff
    cc = hermitize(c.conj().T @ c)
    lam, u = np.linalg.eigh(cc)
    lam = np.maximum(lam, 0.0)
    gt = u.conj().T @ (c.conj().T @ target.w)
    row_energy = np.sum(np.abs(gt) ** 2, axis=1)
    p_max = budget.p_max_bs

    def f1_of(coef):
        return u @ (coef[:, None] * gt)

    # minimum-norm least-squares solution (mu = 0)
    lam_floor = lam.max() * 1e-12 if lam.size else 0.0
    coef0 = np.where(lam > lam_floor, 1.0 / np.where(lam > lam_floor, lam, 1.0), 0.0)
    if np.sum(row_energy * coef0 ** 2) <= p_max * (1.0 + 1e-12):
        f1 = f1_of(coef0)
        _check_finite(f1)
        return f1

    def power(mu):
        return float(np.sum(row_energy / (lam + mu) ** 2))

    total = float(np.sum(row_energy))
    lo, hi = 0.0, np.sqrt(total / p_max)  # power(hi) <= p_max by construction
    while power(hi) > p_max:  # defensive: expand on rounding pathologies
        hi *= 2.0
        if not np.isfinite(hi):
            raise SolverDivergenceError("precoder bisection bracket diverged")
    # one-sided window: land inside [p_max - tol, p_max] so the returned
    # precoder never exceeds the budget
    mu = hi
    p = power(mu)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        p_mid = power(mid)
        if p_mid > p_max:
            lo = mid
        else:
            hi = mid
            mu, p = mid, p_mid
            if p >= p_max - tol:
                break
        if hi - lo <= 1e-16 * max(hi, 1.0):
            break
    f1 = f1_of(1.0 / (lam + mu))
    _check_finite(f1)
    return f1


def _check_finite(arr):
    if not np.isfinite(arr).all():
        raise SolverDivergenceError("update produced non-finite values")


def _project_gains(a: np.ndarray, p_in: np.ndarray, cap: np.ndarray) -> np.ndarray:
    """Entrywise projection onto |a_k|^2 p_in_k <= cap_k."""
    mag = np.abs(a)
    limit = np.sqrt(cap / p_in)
    scale = np.where(mag > limit, limit / np.where(mag > 0, mag, 1.0), 1.0)
    return a * scale


def _gain_quadratic(est: ChannelSet, target: TargetLayer, noise: NoiseModel,
                    params: OtaParams, l: int):
    """Gram matrix and linear term of the objective as a quadratic in a_l.

    Factoring the cascade around diag(a_l): the signal term is
    Lft diag(a_l) Rgt + D with Lft the combined downstream map (including
    F2) and Rgt the upstream map (including F1); every noise transfer T_j
    with j <= l factors the same way through a partial chain M_j. Hadamard
    identities turn all of it into a K_l x K_l normal system.
    """
    L = est.num_groups
    gains = params.a

    lft = params.f2 @ est.h_last
    for j in range(L, l, -1):
        lft = (lft * gains[j - 1][None, :]) @ est.h_hop[j - 1]

    k_l = est.group_sizes[l - 1]
    m_chain = np.eye(k_l, dtype=complex)
    quad = np.zeros((k_l, k_l), dtype=complex)
    quad += noise.relay_noise_var[l - 1] * np.eye(k_l)  # M_l = I
    for j in range(l - 1, 0, -1):
        m_chain = (m_chain @ est.h_hop[j]) * gains[j - 1][None, :]
        quad += noise.relay_noise_var[j - 1] * (m_chain @ m_chain.conj().T)
    rgt = m_chain @ (est.h_hop[0] @ params.f1)
    quad += rgt @ rgt.conj().T

    g = hermitize((lft.conj().T @ lft) * quad.T)
    resid_const = target.w - params.f2 @ est.h_direct @ params.f1
    b = np.einsum("ik,ij,kj->k", lft.conj(), resid_const, rgt.conj())
    return g, b


def _quad_value(g, b, a):
    return float((a.conj() @ g @ a).real - 2.0 * (b.conj() @ a).real)


def update_a(est: ChannelSet, target: TargetLayer, noise: NoiseModel,
             params: OtaParams, budget: PowerBudget, l: int) -> np.ndarray:
    """One gain-vector block update (1-based hop l).

    Solves the normal equations of the quadratic subproblem, projects each
    entry onto its relay power cap, and falls back to the (re-projected)
    current gains if the projected candidate would worsen the subproblem.
    """
    if not 1 <= l <= est.num_groups:
        raise ValueError(f"hop index {l} out of range 1..{est.num_groups}")
    g, b = _gain_quadratic(est, target, noise, params, l)
    cand = _solve_hermitian(g, b)
    _check_finite(cand)

    p_in = relay_input_powers(est, params.a, params.f1, noise, l)
    cap = budget.p_relay[l - 1]
    cand = _project_gains(cand, p_in, cap)
    incumbent = _project_gains(params.a[l - 1], p_in, cap)
    if _quad_value(g, b, cand) <= _quad_value(g, b, incumbent):
        return cand
    return incumbent


def _initial_params(est: ChannelSet, target: TargetLayer, noise: NoiseModel,
                    budget: PowerBudget, cfg: SolverConfig, rng) -> OtaParams:
    n_tx, n_in = est.n_tx, target.in_dim
    if cfg.init_mode == "random":
        f1 = complex_normal(rng, (n_tx, n_in))
        f1 *= np.sqrt(budget.p_max_bs) / np.linalg.norm(f1)
    else:
        f1 = np.sqrt(budget.p_max_bs / n_tx) * np.eye(n_tx, n_in, dtype=complex)

    gains = []
    for l in range(1, est.num_groups + 1):
        # only upstream entries of the gain list are touched for hop l
        p_in = relay_input_powers(est, gains, f1, noise, l)
        gains.append(np.sqrt(budget.p_relay[l - 1] / p_in).astype(complex))

    params = OtaParams(f1=f1, f2=np.zeros((target.out_dim, est.n_rx), dtype=complex),
                       a=tuple(gains))
    f2 = update_f2(est, target, noise, params)
    return OtaParams(f1=f1, f2=f2, a=tuple(gains))


def _clip_gains_from(est: ChannelSet, params: OtaParams, noise: NoiseModel,
                     budget: PowerBudget, start: int) -> tuple:
    """Re-project gains of hops >= start onto their caps, sequentially.

    Upstream changes move the incident powers, so feasibility is restored
    hop by hop with the already-clipped upstream gains in effect.
    """
    a = list(params.a)
    for l in range(start, est.num_groups + 1):
        p_in = relay_input_powers(est, a, params.f1, noise, l)
        a[l - 1] = _project_gains(a[l - 1], p_in, budget.p_relay[l - 1])
    return tuple(a)


def solve(est: ChannelSet, target: TargetLayer, noise: NoiseModel,
          budget: PowerBudget, cfg: SolverConfig = SolverConfig(),
          rng_seed=None) -> SolveResult:
    """Run the alternating optimization from a feasible starting point.

    Cycles F1 -> a_1..a_L -> F2. A precoder or gain block move shifts the
    incident powers of downstream relays, so each candidate move is bundled
    with the downstream re-projection it forces and accepted only when the
    full objective does not increase; rejected moves leave the iterate
    untouched. Every iterate therefore satisfies all power constraints and
    the recorded per-iteration trace is non-increasing by construction.
    """
    if len(budget.p_relay) != est.num_groups:
        raise ValueError("budget group count must match the channel set")
    for p, k in zip(budget.p_relay, est.group_sizes):
        if p.shape != (k,):
            raise ValueError("per-relay budget lengths must match group sizes")
    rng = as_rng(rng_seed)
    params = _initial_params(est, target, noise, budget, cfg, rng)
    obj = objective(params, est, target, noise)
    if not np.isfinite(obj):
        raise SolverDivergenceError("non-finite objective at initialization")
    trace = [obj]
    status = "max_iters"

    def try_accept(cand, current_obj):
        cand_obj = objective(cand, est, target, noise)
        if not np.isfinite(cand_obj):
            raise SolverDivergenceError("non-finite objective during iteration")
        if cand_obj <= current_obj:
            return cand, cand_obj
        return None, current_obj

    for _ in range(cfg.max_outer_iters):
        it_obj = obj

        f1 = update_f1(est, target, noise, params, budget, cfg.bisection_tolerance)
        cand = OtaParams(f1=f1, f2=params.f2, a=params.a)
        cand = OtaParams(f1=f1, f2=params.f2,
                         a=_clip_gains_from(est, cand, noise, budget, start=1))
        accepted, it_obj = try_accept(cand, it_obj)
        if accepted is not None:
            params = accepted

        for l in range(1, est.num_groups + 1):
            a_l = update_a(est, target, noise, params, budget, l)
            a = list(params.a)
            a[l - 1] = a_l
            cand = OtaParams(f1=params.f1, f2=params.f2, a=tuple(a))
            if l < est.num_groups:
                cand = OtaParams(f1=cand.f1, f2=cand.f2,
                                 a=_clip_gains_from(est, cand, noise, budget, l + 1))
            accepted, it_obj = try_accept(cand, it_obj)
            if accepted is not None:
                params = accepted

        f2 = update_f2(est, target, noise, params)
        cand = OtaParams(f1=params.f1, f2=f2, a=params.a)
        accepted, it_obj = try_accept(cand, it_obj)
        if accepted is not None:
            params = accepted

        trace.append(it_obj)
        if obj - it_obj <= cfg.objective_tolerance * max(obj, 1e-300):
            obj = it_obj
            status = "converged"
            break
        obj = it_obj

    return SolveResult(params=params, objective_trace=np.asarray(trace),
                       iterations=len(trace) - 1, status=status)


@dataclass(frozen=True)
class TrueEvaluation:
    """Deployment-side metrics: design built on estimates, run on the truth."""

    nmse: float
    objective_true: float
    relay_power_overrun: float  # max relative cap violation, 0 when compliant


def evaluate_true(params: OtaParams, true_ch: ChannelSet, target: TargetLayer,
                  noise: NoiseModel, budget: PowerBudget = None) -> TrueEvaluation:
    """Re-evaluate a design on the true channels.

    nmse is ||F2 Heff F1 - W||_F^2 / ||W||_F^2; objective_true re-runs the
    design objective on the true channels. When a budget is given,
    relay_power_overrun reports how far the true incident powers push any
    relay past its cap (diagnostic only, never enforced).
    """
    heff = effective_channel(true_ch, params.a)
    resid = params.f2 @ heff @ params.f1 - target.w
    nmse = float(np.sum(np.abs(resid) ** 2) / np.sum(np.abs(target.w) ** 2))
    obj = objective(params, true_ch, target, noise)

    overrun = 0.0
    if budget is not None:
        for l in range(1, true_ch.num_groups + 1):
            p_in = relay_input_powers(true_ch, params.a, params.f1, noise, l)
            used = np.abs(params.a[l - 1]) ** 2 * p_in
            ratio = float(np.max(used / budget.p_relay[l - 1]))
            overrun = max(overrun, ratio - 1.0)
        overrun = max(overrun, 0.0)
    return TrueEvaluation(nmse=nmse, objective_true=obj, relay_power_overrun=overrun)
