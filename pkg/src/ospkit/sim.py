"""Cycle-by-cycle closed-loop simulation.

Each decision cycle: build the candidate table, draw airtimes, compute the
harvesting budget, run the selected policy, advance the true state with
sampled process noise, synthesize observation values for the chosen
sequence only, update the executive's estimate, and log predicted versus
realized error at the cycle boundary.

Separate RNG streams are used for process noise, observation noise, and
the channel, so two policies run on the same seed experience the same
true-state trajectory and the same airtimes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kalman, scheduler
from .errors import ConfigError, DomainError, NumericError
from .model import SystemModel

__all__ = [
    "ChannelConfig",
    "CycleLog",
    "sample_airtimes",
    "step_true_state",
    "run_simulation",
    "selection_stats",
    "POLICIES",
]

POLICIES = ("bnb", "greedy", "all", "none")

# Stream tags: keep the three noise roles on independent substreams.
_CHANNEL_TAG = 101
_PROCESS_TAG = 102
_OBS_NOISE_TAG = 103


@dataclass(frozen=True)
class ChannelConfig:
    """Per-cycle block-fading airtimes: one uniform draw per observer and
    per agent per cycle, or an explicit trace bypassing randomness.

    ``obs_airtime`` / ``action_airtime`` hold (lo, hi) bounds per observer
    and per agent.  ``trace`` is an optional tuple of per-cycle rows, each
    the per-observer airtimes followed by the per-agent airtimes.
    """

    obs_airtime: tuple[tuple[float, float], ...]
    action_airtime: tuple[tuple[float, float], ...]
    seed: int = 0
    trace: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        for role, dists in (("obs", self.obs_airtime), ("action", self.action_airtime)):
            for lo, hi in dists:
                if not (0.0 < lo <= hi):
                    raise ConfigError(
                        f"{role} airtime bounds must satisfy 0 < lo <= hi, got ({lo}, {hi})"
                    )
        if self.trace is not None:
            want = len(self.obs_airtime) + len(self.action_airtime)
            for i, row in enumerate(self.trace):
                if len(row) != want:
                    raise ConfigError(
                        f"trace line {i + 1}: expected {want} airtimes, got {len(row)}"
                    )


def sample_airtimes(cfg: ChannelConfig, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Airtimes for cycle k: (per-observer, per-agent).

    Deterministic under (seed, k).  With a trace configured, row k-1 is
    used instead of random draws (the trace must cover the cycle).
    """
    n_obs = len(cfg.obs_airtime)
    if cfg.trace is not None:
        if k > len(cfg.trace):
            raise ConfigError(f"airtime trace has no row for cycle {k}")
        row = cfg.trace[k - 1]
        return np.asarray(row[:n_obs]), np.asarray(row[n_obs:])
    rng = np.random.default_rng([cfg.seed, k, _CHANNEL_TAG])
    obs = np.array([rng.uniform(lo, hi) for lo, hi in cfg.obs_airtime])
    act = np.array([rng.uniform(lo, hi) for lo, hi in cfg.action_airtime])
    return obs, act


def _noise_factor(Q: np.ndarray) -> np.ndarray:
    """Symmetric factor F with F F^T = Q, with diagonal jitter fallback."""
    try:
        return np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * max(float(np.trace(Q)) / Q.shape[0], 1.0)
    try:
        return np.linalg.cholesky(Q + jitter * np.eye(Q.shape[0]))
    except np.linalg.LinAlgError:
        # Fall back to an eigendecomposition factor for PSD-but-singular Q.
        w, V = np.linalg.eigh((Q + Q.T) / 2.0)
        if w.min() < -jitter:
            raise NumericError("process-noise covariance is not PSD")
        return V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def step_true_state(
    model: SystemModel,
    x: np.ndarray,
    inputs,
    s: float,
    t: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exact-discretization step of the true state over [s, t]: mean part
    via the ZOH propagation, noise part drawn with covariance Q(s, t)."""
    mean = kalman.propagate_estimate(model, x, inputs, s, t)
    if s == t:
        return mean
    _, Qd = model.discretize(s, t)
    if not Qd.any():
        return mean
    return mean + _noise_factor(Qd) @ rng.standard_normal(model.n_states)


@dataclass(frozen=True)
class CycleLog:
    """Per-cycle simulation record."""

    cycle: int
    policy: str
    candidates: tuple[scheduler.Candidate, ...]
    seq: tuple[int, ...]
    end_of_harvest: float
    budget: float
    mse_pred: float
    sq_err: float
    true_state: np.ndarray
    est_state: np.ndarray
    nodes_visited: int
    forced_empty: bool
    t0: float = 0.0
    prior_cov: np.ndarray = field(default=None, repr=False)


def _select(policy: str, ctx: scheduler.CycleContext, model: SystemModel):
    if policy == "bnb":
        return scheduler.bnb_search(ctx, model)
    if policy == "greedy":
        return scheduler.greedy_search(ctx, model)
    if policy == "all":
        seq = tuple(range(ctx.L))
        mse, cov = kalman.sequence_mse(
            model, ctx.prior_cov, ctx.t0, ctx.observations(seq), ctx.cycle_end
        )
        return scheduler.ScheduleEvaluation(
            seq=seq,
            end_of_harvest=scheduler.end_of_harvest(seq, ctx),
            mse=mse,
            running_cov=cov,
        )
    if policy == "none":
        return scheduler._empty_evaluation(ctx, model)
    raise ConfigError(f"unknown policy {policy!r}; expected one of {POLICIES}")


def run_simulation(
    model: SystemModel,
    cfg: ChannelConfig,
    policy: str,
    K: int,
    initial_state: np.ndarray | None = None,
    initial_cov: np.ndarray | None = None,
    inputs=None,
) -> list[CycleLog]:
    """Run K decision cycles under the given policy and return the logs.

    The estimate anchor starts at (t0 = 0, P = initial_cov, default I).
    Policy ``all`` harvests every candidate ignoring the budget; ``none``
    harvests nothing.  The true state is advanced through every candidate
    timestamp regardless of selection so that all policies on one seed see
    the same trajectory; observation values are synthesized only for the
    chosen sequence.
    """
    if K < 1:
        raise DomainError(f"cycle count must be >= 1, got {K}")
    if len(cfg.obs_airtime) != model.n_observers:
        raise ConfigError(
            f"channel config has {len(cfg.obs_airtime)} observer airtime "
            f"distributions, model has {model.n_observers} observers"
        )
    S = model.n_states
    P_anchor = np.eye(S) if initial_cov is None else np.asarray(initial_cov, dtype=float)
    x_anchor = np.zeros(S)
    t_anchor = 0.0
    t_true = 0.0

    rng_proc = np.random.default_rng([cfg.seed, _PROCESS_TAG])
    rng_obs = np.random.default_rng([cfg.seed, _OBS_NOISE_TAG])

    # Default initial world: draw the true state from the executive's prior
    # N(0, P_anchor) so predicted and realized errors are consistent from
    # cycle 1 on.  An explicit initial_state overrides the draw.
    if initial_state is None and P_anchor.any():
        x_true = _noise_factor(P_anchor) @ rng_proc.standard_normal(S)
    elif initial_state is None:
        x_true = np.zeros(S)
    else:
        x_true = np.asarray(initial_state, dtype=float)

    logs: list[CycleLog] = []
    for k in range(1, K + 1):
        cand_meta = kalman.cycle_candidates(model, k)
        obs_air, act_air = sample_airtimes(cfg, k)
        candidates = scheduler.order_observations(
            scheduler.Candidate(c.timestamp, float(obs_air[c.observer]), c.observer)
            for c in cand_meta
        )
        ctx = scheduler.CycleContext(
            candidates=candidates,
            action_airtimes=tuple(act_air),
            T=model.T,
            cycle_index=k,
            t0=t_anchor,
            prior_cov=P_anchor,
        )
        ev = _select(policy, ctx, model)

        # Advance the true state through all candidate timestamps, then to kT.
        true_at: dict[int, np.ndarray] = {}
        for i, c in enumerate(candidates):
            x_true = step_true_state(model, x_true, inputs, t_true, c.timestamp, rng_proc)
            t_true = c.timestamp
            true_at[i] = x_true
        x_true = step_true_state(model, x_true, inputs, t_true, ctx.cycle_end, rng_proc)
        t_true = ctx.cycle_end

        # Executive's estimate: fuse the chosen observations in order.
        xh, P, t_est = x_anchor, P_anchor, t_anchor
        for i in ev.seq:
            c = candidates[i]
            y = float(model.obs_row(c.observer) @ true_at[i]) + np.sqrt(
                model.obs_var(c.observer)
            ) * rng_obs.standard_normal()
            xh = kalman.propagate_estimate(model, xh, inputs, t_est, c.timestamp)
            P = kalman.predict_cov(model, P, t_est, c.timestamp)
            xh, P, _ = kalman.update_estimate(
                xh, P, y, model.obs_row(c.observer), model.obs_var(c.observer)
            )
            t_est = c.timestamp

        xh_boundary = kalman.propagate_estimate(model, xh, inputs, t_est, ctx.cycle_end)
        sq_err = float(np.sum((x_true - xh_boundary) ** 2))

        logs.append(
            CycleLog(
                cycle=k,
                policy=policy,
                candidates=candidates,
                seq=ev.seq,
                end_of_harvest=ev.end_of_harvest,
                budget=ctx.budget,
                mse_pred=ev.mse,
                sq_err=sq_err,
                true_state=x_true.copy(),
                est_state=xh_boundary,
                nodes_visited=ev.nodes_visited,
                forced_empty=ev.forced_empty,
                t0=t_anchor,
                prior_cov=P_anchor,
            )
        )

        # Carry the anchor forward: last fused observation, or unchanged if
        # nothing was harvested (prediction happens lazily next cycle).
        if ev.seq:
            x_anchor, P_anchor, t_anchor = xh, P, t_est

    return logs


def selection_stats(logs: list[CycleLog]) -> dict[int, float]:
    """Per-observer fraction of cycles in which it was harvested."""
    if not logs:
        raise DomainError("selection_stats requires at least one cycle log")
    observers: set[int] = set()
    counts: dict[int, int] = {}
    for log in logs:
        observers.update(c.observer for c in log.candidates)
        for i in log.seq:
            obs = log.candidates[i].observer
            counts[obs] = counts.get(obs, 0) + 1
    return {n: counts.get(n, 0) / len(logs) for n in sorted(observers)}
