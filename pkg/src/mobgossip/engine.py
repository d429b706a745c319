"""The randomized gossip algorithm: move, select, average, and its measurements.

A tick is one timeslot of the asynchronous clock: every agent resamples its
position, one agent is chosen uniformly, it picks a uniform neighbor, and the
pair replaces both values with their mean.  Ticks with an empty neighborhood
are consumed without averaging.

Trials are independent: trial t uses rng stream t+1 derived from the master
seed, so results are identical no matter how trials are scheduled.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as kern
from .mobility import KernelRNG, MobilityAssignment, sample_positions, start_positions
from .topology import Topology, neighbors

PROFILES = ("linear", "spike")


@dataclass(frozen=True)
class GossipConfig:
    topology: Topology
    assignment: MobilityAssignment
    profile: str | np.ndarray = "linear"
    epsilon: float = 0.01
    max_ticks: int = 10_000
    trials: int = 100
    seed: int = 1
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.profile, str) and self.profile not in PROFILES:
            raise ValueError(f"unknown value profile {self.profile!r}")
        if not (0 < self.epsilon < 1):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.max_ticks < 1:
            raise ValueError("max_ticks must be >= 1")


@dataclass
class GossipState:
    tick: int
    positions: np.ndarray
    values: np.ndarray
    mean: float  # the invariant true average of x(0)


def initial_values(
    config: GossipConfig, positions: np.ndarray
) -> np.ndarray:
    """x(0) for the configured profile, evaluated at the initial positions.

    The linear field assigns row + col (u + v on the unit torus); the spike
    gives agent 0 the value 1 and everyone else 0.
    """
    if isinstance(config.profile, np.ndarray):
        x = np.array(config.profile, dtype=float)
        if x.shape != (len(config.assignment),):
            raise ValueError("custom profile length does not match the agent count")
        return x
    if config.profile == "linear":
        return positions[:, 0].astype(float) + positions[:, 1].astype(float)
    x = np.zeros(len(config.assignment))
    x[0] = 1.0
    return x


def make_state(config: GossipConfig, trial: int = 0) -> tuple[GossipState, KernelRNG]:
    """Initial state plus the rng stream that continues the trial."""
    rng = KernelRNG(config.seed, stream=trial + 1)
    pos = start_positions(config.topology, config.assignment, rng)
    x = initial_values(config, pos)
    return GossipState(0, pos, x, float(x.mean())), rng


def step(state: GossipState, assignment: MobilityAssignment, rng: KernelRNG,
         topology: Topology) -> GossipState:
    """One tick, written as the readable reference for the fused kernels."""
    pos = sample_positions(assignment, state.positions, rng, topology)
    x = state.values.copy()
    i = rng.randint(len(assignment))
    nbrs = neighbors(topology, pos, i)
    if len(nbrs) > 0:
        j = nbrs[rng.randint(len(nbrs))]
        avg = 0.5 * (x[i] + x[j])
        x[i] = avg
        x[j] = avg
    return GossipState(state.tick + 1, pos, x, state.mean)


def relative_error(state: GossipState, norm0: float) -> float:
    return float(np.linalg.norm(state.values - state.mean) / norm0)


def _trial_arrays(config: GossipConfig, trial: int):
    """Positions, values and kernel inputs for one trial, freshly allocated."""
    state, rng = make_state(config, trial)
    kinds, home_r, home_c, param = config.assignment.kernel_arrays(config.topology)
    x = state.values.copy()
    norm0 = float(np.linalg.norm(x))
    if norm0 == 0.0:
        raise ValueError("x(0) is identically zero; the normalized error is undefined")
    pos0 = state.positions[:, 0].copy()
    pos1 = state.positions[:, 1].copy()
    return state, rng, kinds, home_r, home_c, param, pos0, pos1, x, norm0


def run_trace(config: GossipConfig, trial: int = 0) -> np.ndarray:
    """Per-tick normalized error e(t) = ||x(t) - mean 1|| / ||x(0)||.

    Length max_ticks + 1; deterministic given (seed, trial).
    """
    (state, rng, kinds, home_r, home_c, param,
     pos0, pos1, x, norm0) = _trial_arrays(config, trial)
    err = np.empty(config.max_ticks + 1)
    with kern.errstate_if_interpreted():
        if config.topology.discrete:
            side_r, side_c = config.topology.shape
            kern.gossip_trace_discrete(
                pos0, pos1, kinds, home_r, home_c, param, side_r, side_c,
                x, state.mean, norm0, err, rng.state,
            )
        else:
            rsq = config.topology.radius ** 2
            kern.gossip_trace_continuous(
                pos0, pos1, kinds, rsq, x, state.mean, norm0, err, rng.state,
            )
    return err


def run_trace_with_final(config: GossipConfig, trial: int = 0):
    """Like run_trace but also returns the final value vector (for invariants)."""
    (state, rng, kinds, home_r, home_c, param,
     pos0, pos1, x, norm0) = _trial_arrays(config, trial)
    err = np.empty(config.max_ticks + 1)
    with kern.errstate_if_interpreted():
        if config.topology.discrete:
            side_r, side_c = config.topology.shape
            kern.gossip_trace_discrete(
                pos0, pos1, kinds, home_r, home_c, param, side_r, side_c,
                x, state.mean, norm0, err, rng.state,
            )
        else:
            rsq = config.topology.radius ** 2
            kern.gossip_trace_continuous(
                pos0, pos1, kinds, rsq, x, state.mean, norm0, err, rng.state,
            )
    return err, x


def _crossing(config: GossipConfig, trial: int) -> int:
    """First tick with e(t) < epsilon, or max_ticks + 1 when never reached."""
    (state, rng, kinds, home_r, home_c, param,
     pos0, pos1, x, norm0) = _trial_arrays(config, trial)
    with kern.errstate_if_interpreted():
        if config.topology.discrete:
            side_r, side_c = config.topology.shape
            _, t = kern.gossip_crossing_discrete(
                pos0, pos1, kinds, home_r, home_c, param, side_r, side_c,
                x, state.mean, norm0, config.epsilon, config.max_ticks, rng.state,
            )
        else:
            rsq = config.topology.radius ** 2
            _, t = kern.gossip_crossing_continuous(
                pos0, pos1, kinds, rsq, x, state.mean, norm0,
                config.epsilon, config.max_ticks, rng.state,
            )
    return int(t) if t >= 0 else config.max_ticks + 1


def _map_trials(config: GossipConfig, fn, trials: int):
    """Run fn(config, trial) for each trial, optionally on a thread pool.

    Results land in trial order, so the worker count never changes output.
    """
    if config.workers > 1 and kern.NUMBA_ENABLED:
        out = [None] * trials
        with concurrent.futures.ThreadPoolExecutor(config.workers) as pool:
            futs = {pool.submit(fn, config, t): t for t in range(trials)}
            for f in concurrent.futures.as_completed(futs):
                out[futs[f]] = f.result()
        return out
    return [fn(config, t) for t in range(trials)]


def crossing_times(config: GossipConfig) -> np.ndarray:
    """Per-trial first tick below epsilon (max_ticks + 1 marks saturation)."""
    return np.array(_map_trials(config, _crossing, config.trials), dtype=np.int64)


@dataclass(frozen=True)
class AveTimeEstimate:
    ticks: int
    saturated: bool
    ci_low: int
    ci_high: int
    epsilon: float
    trials: int
    profile: str
    crossings: np.ndarray = field(repr=False, default=None)


def _quantile_tick(crossings: np.ndarray, eps: float, trials: int) -> int:
    """Smallest t such that the fraction of trials with e(t) >= eps is <= eps.

    Because e(t) never increases, trial k still exceeds eps at t exactly when
    t < crossings[k], so the answer is an order statistic of the crossings.
    """
    allowed = int(np.floor(eps * trials))
    return int(np.sort(crossings)[trials - allowed - 1])


def estimate_ave_time(config: GossipConfig, bootstrap: int = 200) -> AveTimeEstimate:
    """Empirical averaging time for the configured x(0) profile.

    The supremum over initial vectors is not measurable; the report always
    names the profile actually used.
    """
    if config.trials < 30:
        raise ValueError("need at least 30 trials for a meaningful quantile estimate")
    cross = crossing_times(config)
    t_est = _quantile_tick(cross, config.epsilon, config.trials)
    saturated = t_est > config.max_ticks
    if saturated:
        t_est = config.max_ticks
    boot_rng = np.random.default_rng(config.seed ^ 0xB00)
    stats = []
    for _ in range(bootstrap):
        resampled = boot_rng.choice(cross, size=config.trials, replace=True)
        stats.append(_quantile_tick(resampled, config.epsilon, config.trials))
    lo, hi = np.percentile(stats, [2.5, 97.5])
    profile = config.profile if isinstance(config.profile, str) else "custom"
    return AveTimeEstimate(
        t_est, saturated, int(lo), int(min(hi, config.max_ticks + 1)),
        config.epsilon, config.trials, profile, cross,
    )


def median_crossing(config: GossipConfig) -> float:
    """Median over trials of the first tick below epsilon (robust timing)."""
    return float(np.median(crossing_times(config)))


def error_curves(config: GossipConfig, record_every: int = 1) -> dict:
    """Per-tick quantiles of e(t) across trials, downsampled by record_every.

    Returns arrays: ticks, q10, q50, q90, mean, mean_sq (of e^2).
    """
    ticks = np.arange(0, config.max_ticks + 1, record_every)
    rows = _map_trials(
        config, lambda cfg, t: run_trace(cfg, t)[::record_every], config.trials
    )
    errs = np.stack(rows)
    return {
        "ticks": ticks,
        "q10": np.quantile(errs, 0.10, axis=0),
        "q50": np.quantile(errs, 0.50, axis=0),
        "q90": np.quantile(errs, 0.90, axis=0),
        "mean": errs.mean(axis=0),
        "mean_sq": (errs ** 2).mean(axis=0),
    }


def second_moment_curve(config: GossipConfig) -> np.ndarray:
    """Mean over trials of e(t)^2 at every tick, accumulated streaming."""
    acc = np.zeros(config.max_ticks + 1)
    for chunk in _map_trials(config, run_trace, config.trials):
        acc += chunk ** 2
    return acc / config.trials


def with_trials(config: GossipConfig, **overrides) -> GossipConfig:
    return replace(config, **overrides)
