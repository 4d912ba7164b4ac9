"""Measurement-history MDP: states, transitions, and path sampling.

A state is the sequence of (action index, right tile, left tile) triples
observed so far; the empty history is the initial state.  The state space is
never enumerated: histories materialize only when sampled.  Below the horizon
every commanded action is enabled; at the horizon only a dummy self-loop
action remains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bltl import SequentialSpec, TraceStep, check_sequential
from .dynamics import (MeasuredInterval, NoiseModel, VehicleParams,
                       measure, sample_noise_interval)
from .env import Environment
from .tracegen import UncertaintyTube, trace_from_tube, DEFAULT_DETECTION_DIVISOR
from .uncertainty import build_tube

# Reserved action index for the horizon self-loop; never a policy choice.
DUMMY_ACTION = -1

# Stream purposes for deterministic seeding.
STREAM_POLICY_EVAL = 0
STREAM_BIE = 1
STREAM_VALIDATE = 2

HistoryKey = tuple[tuple[int, int, int], ...]

EMPTY_HISTORY: HistoryKey = ()


def episode_rng(master_seed: int, purpose: int, round_index: int,
                episode_index: int) -> np.random.Generator:
    """Independent generator for one episode, reproducible from the master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(purpose, round_index, episode_index))
    return np.random.default_rng(ss)


def history_key_string(history: HistoryKey) -> str:
    """Canonical string form of a history, used in policy files."""
    return ";".join(f"{a},{jr},{jl}" for a, jr, jl in history)


def parse_history_key(text: str) -> HistoryKey:
    if not text:
        return ()
    out = []
    for part in text.split(";"):
        a, jr, jl = part.split(",")
        out.append((int(a), int(jr), int(jl)))
    return tuple(out)


def enabled_actions(state: HistoryKey, params: VehicleParams, horizon: int) -> list[int]:
    """Action indices available at a state; the dummy one at the horizon."""
    if len(state) > horizon:
        raise ValueError("history longer than the horizon")
    if len(state) == horizon:
        return [DUMMY_ACTION]
    return list(range(len(params.actions)))


def transition_prob(state: HistoryKey, action: int, nxt: HistoryKey,
                    nm: NoiseModel, horizon: int) -> float:
    """Probability of moving from state to nxt under the given action."""
    if len(state) == horizon:
        return 1.0 if action == DUMMY_ACTION and nxt == state else 0.0
    if action == DUMMY_ACTION:
        return 0.0
    if len(nxt) != len(state) + 1 or nxt[:len(state)] != state:
        return 0.0
    a, j_r, j_l = nxt[-1]
    if a != action:
        return 0.0
    if not (1 <= j_r <= nm.right.n and 1 <= j_l <= nm.left.n):
        return 0.0
    return nm.right.probs[j_r - 1] * nm.left.probs[j_l - 1]


def successors(state: HistoryKey, action: int, nm: NoiseModel, params: VehicleParams,
               horizon: int) -> list[tuple[HistoryKey, float]]:
    """All one-step extensions with their probabilities (they sum to 1)."""
    enabled = enabled_actions(state, params, horizon)
    if action not in enabled:
        raise ValueError(f"action {action} not enabled at a length-{len(state)} state")
    if action == DUMMY_ACTION:
        return [(state, 1.0)]
    out = []
    for j_r in range(1, nm.right.n + 1):
        for j_l in range(1, nm.left.n + 1):
            p = nm.right.probs[j_r - 1] * nm.left.probs[j_l - 1]
            out.append((state + ((action, j_r, j_l),), p))
    return out


@dataclass(frozen=True)
class PathSample:
    """One full-horizon rollout with its tube, trace, and verdict."""

    state: HistoryKey
    actions: tuple[int, ...]
    tube: UncertaintyTube
    trace: tuple[TraceStep, ...]
    satisfied: bool


class PathSampler:
    """Samples MDP paths and scores them against the mission spec.

    Immutable context (environment, spec, vehicle, noise, horizon) is fixed at
    construction; randomness comes from per-call generators, so instances are
    safe to share across workers.
    """

    def __init__(self, env: Environment, spec: SequentialSpec, params: VehicleParams,
                 nm: NoiseModel, horizon: int,
                 detection_divisor: int = DEFAULT_DETECTION_DIVISOR):
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        self.env = env
        self.spec = spec
        self.params = params
        self.nm = nm
        self.horizon = horizon
        self.detection_divisor = detection_divisor

    def sample_history(self, policy, rng: np.random.Generator) -> HistoryKey:
        """Roll the chain to the horizon under the policy; returns the history."""
        history: HistoryKey = EMPTY_HISTORY
        for _ in range(self.horizon):
            action = policy.sample_action(history, rng)
            j_r = sample_noise_interval(self.nm, "r", rng.random())
            j_l = sample_noise_interval(self.nm, "l", rng.random())
            history = history + ((action, j_r, j_l),)
        return history

    def measured_history(self, history: HistoryKey) -> list[tuple[int, MeasuredInterval]]:
        return [(a, measure(self.nm, self.params, a, j_r, j_l))
                for a, j_r, j_l in history]

    def finish(self, history: HistoryKey) -> PathSample:
        """Build the tube and trace for a complete history and check the mission."""
        tube = build_tube(self.measured_history(history), self.env.initial_pose,
                          self.params, self.nm)
        trace = trace_from_tube(tube, self.env, self.detection_divisor)
        sat = check_sequential(trace, self.spec)
        return PathSample(history, tuple(t[0] for t in history), tube, tuple(trace), sat)

    def sample_path(self, policy, rng: np.random.Generator) -> PathSample:
        """One rollout: sample a history, then tube, trace, and verdict."""
        return self.finish(self.sample_history(policy, rng))
