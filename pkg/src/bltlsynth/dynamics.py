"""Differential-drive kinematics, actuator noise, and the encoder interval model.

The vehicle has two driven wheels of radius ``wheel_radius`` separated by
``wheel_separation``.  Commands are pairs of wheel angular velocities that stay
constant over one stage of ``dt`` seconds; each wheel's actual speed is the
command plus a bounded random offset.  An incremental encoder on each wheel
reports which width-``delta`` sub-interval of the noise range the offset fell
into, so the controller observes intervals, never exact speeds.

Noise-interval indices ``j`` are 1-based (1..n); action indices are 0-based
positions into ``VehicleParams.actions``.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Below this body angular rate the exact arc formula degenerates; treat as straight.
OMEGA_STRAIGHT_EPS = 1e-12


@dataclass(frozen=True)
class Pose:
    """Planar pose (x, y, theta); theta is stored wrapped to [0, 2*pi)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    return theta % (2.0 * math.pi)


def angle_diff(a: float, b: float) -> float:
    """Absolute angular difference on the circle, in [0, pi]."""
    d = abs(a - b) % (2.0 * math.pi)
    return min(d, 2.0 * math.pi - d)


@dataclass(frozen=True)
class VehicleParams:
    """Wheel geometry, stage duration, and the finite command set.

    ``actions`` lists (right, left) wheel angular velocities in rad/s.
    """

    wheel_radius: float
    wheel_separation: float
    dt: float
    actions: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.wheel_radius <= 0:
            raise ValueError("wheel_radius must be positive")
        if self.wheel_separation <= 0:
            raise ValueError("wheel_separation must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        acts = tuple((float(r), float(l)) for r, l in self.actions)
        if not acts:
            raise ValueError("actions must be non-empty")
        if len(set(acts)) != len(acts):
            raise ValueError("actions must be duplicate-free")
        object.__setattr__(self, "actions", acts)


@dataclass(frozen=True)
class WheelNoise:
    """Bounded noise for one wheel, partitioned into n tiles of width delta.

    The support is [eps_min, eps_min + n*delta]; tile j (1-based) is
    [eps_min + (j-1)*delta, eps_min + j*delta] and carries mass probs[j-1].
    Constructing from (eps_min, delta, n) makes the tiling exact by design.
    """

    eps_min: float
    delta: float
    n: int
    probs: tuple[float, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("interval count n must be a positive integer")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        probs = tuple(float(p) for p in self.probs)
        if len(probs) != self.n:
            raise ValueError(f"expected {self.n} probabilities, got {len(probs)}")
        if any(p < 0 for p in probs):
            raise ValueError("interval probabilities must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"interval probabilities must sum to 1, got {sum(probs)!r}")
        object.__setattr__(self, "probs", probs)

    @property
    def eps_max(self) -> float:
        return self.eps_min + self.n * self.delta

    def interval(self, j: int) -> tuple[float, float]:
        """Endpoints of noise interval j (1-based)."""
        if not 1 <= j <= self.n:
            raise IndexError(f"noise interval index {j} out of range 1..{self.n}")
        return (self.eps_min + (j - 1) * self.delta, self.eps_min + j * self.delta)

    def midpoint(self, j: int) -> float:
        lo, hi = self.interval(j)
        return (lo + hi) / 2.0


@dataclass(frozen=True)
class NoiseModel:
    """Per-wheel actuator noise; 'r' is the right wheel, 'l' the left."""

    right: WheelNoise
    left: WheelNoise

    def wheel(self, which: str) -> WheelNoise:
        if which == "r":
            return self.right
        if which == "l":
            return self.left
        raise ValueError(f"wheel must be 'r' or 'l', got {which!r}")

    @classmethod
    def symmetric(cls, eps_min: float, delta: float, n: int,
                  probs: Sequence[float]) -> "NoiseModel":
        """Identical noise on both wheels."""
        w = WheelNoise(eps_min, delta, n, tuple(probs))
        return cls(right=w, left=w)


@dataclass(frozen=True)
class MeasuredInterval:
    """One stage's encoder output: a wheel-speed interval per wheel.

    Fully determined by the commanded action and the noise-interval index hit
    on each wheel; the numeric endpoints are command + tile endpoints.
    """

    action_index: int
    j_r: int
    j_l: int
    r_lo: float
    r_hi: float
    l_lo: float
    l_hi: float


def wheel_to_body(params: VehicleParams, w_r: float, w_l: float) -> tuple[float, float]:
    """Map wheel angular speeds to body (forward speed, turn rate)."""
    r = params.wheel_radius
    v = r * (w_r + w_l) / 2.0
    omega = r * (w_r - w_l) / params.wheel_separation
    return v, omega


def integrate_segment(params: VehicleParams, q0: Pose, w_r: float, w_l: float,
                      tau: float) -> Pose:
    """Propagate the pose for tau seconds under constant wheel speeds.

    Constant inputs give a straight line (zero turn rate) or a circular arc,
    both in closed form.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    v, omega = wheel_to_body(params, w_r, w_l)
    if abs(omega) < OMEGA_STRAIGHT_EPS:
        return Pose(q0.x + v * tau * math.cos(q0.theta),
                    q0.y + v * tau * math.sin(q0.theta),
                    q0.theta)
    th1 = q0.theta + omega * tau
    x1 = q0.x + (v / omega) * (math.sin(th1) - math.sin(q0.theta))
    y1 = q0.y - (v / omega) * (math.cos(th1) - math.cos(q0.theta))
    return Pose(x1, y1, th1)


def segment_positions(params: VehicleParams, q0: Pose, w_r: float, w_l: float,
                      taus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions along one constant-input segment at each local time in taus."""
    v, omega = wheel_to_body(params, w_r, w_l)
    taus = np.asarray(taus, dtype=float)
    if abs(omega) < OMEGA_STRAIGHT_EPS:
        xs = q0.x + v * taus * math.cos(q0.theta)
        ys = q0.y + v * taus * math.sin(q0.theta)
        return xs, ys
    th = q0.theta + omega * taus
    xs = q0.x + (v / omega) * (np.sin(th) - math.sin(q0.theta))
    ys = q0.y - (v / omega) * (np.cos(th) - math.cos(q0.theta))
    return xs, ys


def sample_noise_interval(nm: NoiseModel, wheel: str, u: float) -> int:
    """Draw a noise-interval index (1-based) by inverse CDF from u in [0, 1)."""
    wn = nm.wheel(wheel)
    cum = np.cumsum(wn.probs)
    j = bisect_right(cum, u) + 1
    return min(j, wn.n)


def measure(nm: NoiseModel, params: VehicleParams, action_index: int,
            j_r: int, j_l: int) -> MeasuredInterval:
    """Encoder output for one stage: command action, noise tiles (j_r, j_l)."""
    if not 0 <= action_index < len(params.actions):
        raise IndexError(f"action index {action_index} out of range")
    u_r, u_l = params.actions[action_index]
    r_lo, r_hi = nm.right.interval(j_r)
    l_lo, l_hi = nm.left.interval(j_l)
    return MeasuredInterval(action_index, j_r, j_l,
                            u_r + r_lo, u_r + r_hi, u_l + l_lo, u_l + l_hi)


def sample_noise_in_interval(nm: NoiseModel, wheel: str, j: int, u: float) -> float:
    """Draw a noise value uniformly inside interval j (u in [0, 1))."""
    lo, hi = nm.wheel(wheel).interval(j)
    return lo + u * (hi - lo)
