"""Seeing-double task signals.

The benchmark drives the reservoir with trajectories on two overlapping
circles that rotate in opposite directions:

    u(t) = (s_x cos(t) + x_cen, s_y sin(t) + y_cen)

Orbit A uses s_x = s_y = s (counter-clockwise), orbit B uses s_x = -s,
s_y = s (clockwise). Unit angular frequency makes the rotation period
PERIOD = 2*pi in simulation time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# One full rotation of either circle, in simulation-time units.
PERIOD = 2.0 * np.pi


@dataclass(frozen=True)
class OrbitSpec:
    """Signed radii and center of one circular orbit."""

    s_x: float
    s_y: float
    x_cen: float = 0.0
    y_cen: float = 0.0
    label: str = "A"

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x_cen, self.y_cen])

    @property
    def radius(self) -> float:
        return abs(self.s_x)

    @property
    def orientation(self) -> int:
        """+1 for counter-clockwise rotation, -1 for clockwise."""
        return 1 if self.s_x * self.s_y > 0 else -1


def make_orbit(label: str, s: float, x_cen: float = 0.0, y_cen: float = 0.0) -> OrbitSpec:
    """Build the canonical orbit for a label: A -> (s, s), B -> (-s, s)."""
    if s <= 0:
        raise ValueError(f"orbit radius must be positive, got {s}")
    if label == "A":
        return OrbitSpec(s_x=s, s_y=s, x_cen=x_cen, y_cen=y_cen, label=label)
    if label == "B":
        return OrbitSpec(s_x=-s, s_y=s, x_cen=x_cen, y_cen=y_cen, label=label)
    raise ValueError(f"orbit label must be 'A' or 'B', got {label!r}")


def evaluate_orbit(spec: OrbitSpec, t) -> np.ndarray:
    """Evaluate the orbit signal at time(s) t; returns shape (..., 2)."""
    t = np.asarray(t, dtype=float)
    x = spec.s_x * np.cos(t) + spec.x_cen
    y = spec.s_y * np.sin(t) + spec.y_cen
    return np.stack([x, y], axis=-1)


@dataclass
class DriveSignal:
    """An orbit sampled on a uniform time grid, plus its continuous evaluator.

    samples[k] equals evaluate(t0 + k*tau) exactly; the evaluator is kept so
    integrators can query the signal at Runge-Kutta half steps without
    interpolation error.
    """

    spec: OrbitSpec
    samples: np.ndarray  # (steps + 1, 2)
    t0: float
    tau: float
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)

    def __post_init__(self):
        if self.evaluate is None:
            spec = self.spec
            self.evaluate = lambda t: evaluate_orbit(spec, t)

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.shape[0]) * self.tau


def sample_signal(spec: OrbitSpec, t0: float, t_end: float, tau: float) -> DriveSignal:
    """Sample the orbit on the inclusive grid t0, t0+tau, ..., t_end."""
    if t_end <= t0:
        raise ValueError(f"t_end must exceed t0, got [{t0}, {t_end}]")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    n_steps = int(round((t_end - t0) / tau))
    times = t0 + np.arange(n_steps + 1) * tau
    samples = evaluate_orbit(spec, times)
    return DriveSignal(spec=spec, samples=samples, t0=t0, tau=tau)
