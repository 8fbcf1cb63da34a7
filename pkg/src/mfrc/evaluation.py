"""Classification of closed-loop predictions.

Reconstruction of a circular orbit is accepted when the prediction's
"roundness" (max minus min radial distance from the orbit center, after a
transient skip) stays below 0.25 and the net rotation direction matches the
orbit. Coarser attractor labels (fixed point / limit cycle / torus /
chaotic) are assigned from the trajectory diameter and the crossings of the
Poincare section {x = x_cen, dx/dt > 0}.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dynamics import PredictionTrajectory, ReservoirTrajectory, predict_multi
from .errors import WindowError
from .tasks import PERIOD, OrbitSpec


class Direction(enum.Enum):
    CCW = "CCW"
    CW = "CW"
    UNDEFINED = "Undefined"


class FailureMode(enum.Enum):
    NONE = "None"
    ONLY_A = "OnlyA"
    ONLY_B = "OnlyB"
    NEITHER = "Neither"
    DIVERGED = "Diverged"


class AttractorKind(enum.Enum):
    FIXED_POINT = "FixedPoint"
    LIMIT_CYCLE = "LimitCycle"
    TORUS = "Torus"
    CHAOTIC = "Chaotic"
    RECONSTRUCTED_CIRCLE = "ReconstructedCircle"


@dataclass
class EvaluationConfig:
    """Thresholds of the classification heuristics.

    The roundness bound and direction rule define the benchmark pass
    criterion; the rest control the coarse attractor labels used by the
    continuation experiment.
    """

    roundness_threshold: float = 0.25
    direction_angle_min: float = np.pi   # net |angle| needed to call a direction
    transient_skip: float = 2 * PERIOD
    fixed_point_diameter: float = 1e-3
    cluster_tol: float = 1e-2            # Poincare crossing cluster width
    max_cycle_clusters: int = 12
    box_dim_chaotic_min: float = 1.2     # return-map box dimension above => chaotic
    maxima_value_tol: float = 1e-3


DEFAULT_CONFIG = EvaluationConfig()


@dataclass
class OrbitCheck:
    roundness: float
    direction: Direction
    passed: bool


@dataclass
class MfVerdict:
    check_a: OrbitCheck
    check_b: OrbitCheck
    multifunctional: bool
    failure_mode: FailureMode


@dataclass
class AttractorLabel:
    """Coarse attractor class plus the summary used to match branches."""

    kind: AttractorKind
    mean: np.ndarray              # time-average point in prediction space
    roundness: float
    direction: Direction
    crossings: int                # Poincare crossing clusters (0 if unused)
    box_dim: float = 0.0          # return-map box-counting slope (diagnostics)


def _post_skip(traj: PredictionTrajectory, transient_skip: float,
               min_periods: float = 1.0) -> np.ndarray:
    skip = int(round(transient_skip / traj.tau))
    window = traj.values[skip:]
    needed = int(round(min_periods * PERIOD / traj.tau)) + 1
    if window.shape[0] == 0:
        raise WindowError("no samples remain after the transient skip")
    if window.shape[0] < needed:
        raise WindowError(
            f"{window.shape[0]} samples after skip, need at least {needed} "
            f"({min_periods:g} period(s))")
    return window


def roundness(traj: PredictionTrajectory, center, transient_skip: float) -> float:
    """Max minus min distance from `center` over the post-transient window."""
    window = _post_skip(traj, transient_skip)
    dist = np.hypot(window[:, 0] - center[0], window[:, 1] - center[1])
    return float(dist.max() - dist.min())


def rotation_direction(traj: PredictionTrajectory, center,
                       transient_skip: float,
                       angle_min: float = DEFAULT_CONFIG.direction_angle_min) -> Direction:
    """Net signed rotation about `center`: CCW, CW, or Undefined.

    Sums the signed angle increments between successive centered points.
    Points closer to the center than 1e-9 carry no directional information
    and contribute nothing, so trajectories collapsed onto the center stay
    Undefined instead of amplifying rounding noise.
    """
    window = _post_skip(traj, transient_skip)
    p = window - np.asarray(center, dtype=float)
    a, b = p[:-1], p[1:]
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    norms = np.hypot(p[:, 0], p[:, 1])
    informative = (norms[:-1] > 1e-9) & (norms[1:] > 1e-9)
    total = float(np.arctan2(cross[informative], dot[informative]).sum())
    if total > angle_min:
        return Direction.CCW
    if total < -angle_min:
        return Direction.CW
    return Direction.UNDEFINED


def classify_orbit(traj: PredictionTrajectory, expected: OrbitSpec,
                   transient_skip: float,
                   config: EvaluationConfig = DEFAULT_CONFIG) -> OrbitCheck:
    """Check a prediction against one expected circular orbit."""
    center = (expected.x_cen, expected.y_cen)
    r = roundness(traj, center, transient_skip)
    direction = rotation_direction(traj, center, transient_skip,
                                   angle_min=config.direction_angle_min)
    wanted = Direction.CCW if expected.orientation > 0 else Direction.CW
    passed = (r < config.roundness_threshold) and (direction is wanted)
    return OrbitCheck(roundness=r, direction=direction, passed=passed)


def evaluate_multifunctionality(trained, orbits: tuple[OrbitSpec, OrbitSpec],
                                t_end: float | None = None,
                                config: EvaluationConfig = DEFAULT_CONFIG) -> MfVerdict:
    """Run the predicting reservoir from both seed states and combine checks."""
    orbit_a, orbit_b = orbits
    seed_a = trained.seed_state(orbit_a.label)
    seed_b = trained.seed_state(orbit_b.label)
    preds, _, _ = predict_multi(trained, np.column_stack((seed_a, seed_b)), t_end=t_end)
    pred_a, pred_b = preds
    if pred_a.diverged or pred_b.diverged:
        failed = OrbitCheck(roundness=float("inf"), direction=Direction.UNDEFINED, passed=False)
        return MfVerdict(check_a=failed, check_b=failed, multifunctional=False,
                         failure_mode=FailureMode.DIVERGED)
    check_a = classify_orbit(pred_a, orbit_a, config.transient_skip, config)
    check_b = classify_orbit(pred_b, orbit_b, config.transient_skip, config)
    if check_a.passed and check_b.passed:
        mode = FailureMode.NONE
    elif check_a.passed:
        mode = FailureMode.ONLY_A
    elif check_b.passed:
        mode = FailureMode.ONLY_B
    else:
        mode = FailureMode.NEITHER
    return MfVerdict(check_a=check_a, check_b=check_b,
                     multifunctional=check_a.passed and check_b.passed,
                     failure_mode=mode)


def unique_local_maxima_counts(traj: ReservoirTrajectory,
                               value_tolerance: float = DEFAULT_CONFIG.maxima_value_tol
                               ) -> np.ndarray:
    """Number of distinct local-maximum values per neuron.

    A maximum is a strict rise followed by a strict fall; a flat plateau
    between them counts once at the plateau value. Maxima values are
    quantized to the tolerance grid before the distinct count, so counts are
    invariant under adding a constant to a neuron's trace.
    """
    states = traj.states
    n_neurons = states.shape[1]
    counts = np.zeros(n_neurons, dtype=int)
    for i in range(n_neurons):
        x = states[:, i]
        signs = np.sign(np.diff(x))
        nz = np.flatnonzero(signs)
        if nz.size < 2:
            continue
        compressed = signs[nz]
        peak = (compressed[:-1] > 0) & (compressed[1:] < 0)
        if not peak.any():
            continue
        values = x[nz[:-1][peak] + 1]
        counts[i] = np.unique(np.round(values / value_tolerance).astype(np.int64)).size
    return counts


def _poincare_crossings(window: np.ndarray, x_cen: float) -> np.ndarray:
    """Y-values where the trajectory crosses x = x_cen with increasing x."""
    x = window[:, 0] - x_cen
    y = window[:, 1]
    upward = (x[:-1] < 0) & (x[1:] >= 0)
    idx = np.flatnonzero(upward)
    if idx.size == 0:
        return np.empty(0)
    frac = -x[idx] / (x[idx + 1] - x[idx])
    return y[idx] + frac * (y[idx + 1] - y[idx])


def _cluster_count(values: np.ndarray, tol: float) -> int:
    if values.size == 0:
        return 0
    ordered = np.sort(values)
    return int(1 + np.count_nonzero(np.diff(ordered) > tol))


def _return_map_box_dim(crossings: np.ndarray) -> float:
    """Box-counting slope of the successive-crossing return map.

    The section itself is one-dimensional, so torus/chaos separation happens
    in the (y_k, y_{k+1}) plane: a torus traces a curve (slope near 1), a
    chaotic attractor spreads into the plane (slope well above it). Scales
    extent/4 and extent/16 are compared; with fewer than ~100 crossings the
    fine-scale count saturates at the sample size and the slope is not
    meaningful, so callers should supply long runs before trusting it.
    """
    if crossings.size < 8:
        return 0.0
    pts = np.column_stack((crossings[:-1], crossings[1:]))
    lo = pts.min(axis=0)
    extent = float((pts.max(axis=0) - lo).max())
    if extent <= 0:
        return 0.0

    def occupied(cell: float) -> int:
        keys = np.floor((pts - lo) / cell).astype(np.int64)
        return np.unique(keys, axis=0).shape[0]

    n_coarse = occupied(extent / 4.0)
    n_fine = occupied(extent / 16.0)
    if n_coarse == 0 or n_fine <= n_coarse:
        return 0.0
    return float(np.log(n_fine / n_coarse) / np.log(4.0))


def classify_attractor(pred: PredictionTrajectory, expected_orbits,
                       transient_skip: float = DEFAULT_CONFIG.transient_skip,
                       config: EvaluationConfig = DEFAULT_CONFIG) -> AttractorLabel:
    """Coarse attractor label for a closed-loop prediction.

    Order of tests: small diameter -> FixedPoint; either orbit check passes
    -> ReconstructedCircle; few Poincare crossing clusters -> LimitCycle;
    otherwise torus vs chaotic by the return-map box dimension.
    """
    window = _post_skip(pred, transient_skip, min_periods=10.0)
    mean = window.mean(axis=0)
    spans = window.max(axis=0) - window.min(axis=0)
    diameter = float(np.hypot(spans[0], spans[1]))

    center = expected_orbits[0].center if expected_orbits else np.zeros(2)
    r = roundness(pred, center, transient_skip)
    direction = rotation_direction(pred, center, transient_skip,
                                   angle_min=config.direction_angle_min)

    if diameter < config.fixed_point_diameter:
        return AttractorLabel(kind=AttractorKind.FIXED_POINT, mean=mean,
                              roundness=r, direction=direction, crossings=0)
    for orbit in expected_orbits:
        if classify_orbit(pred, orbit, transient_skip, config).passed:
            return AttractorLabel(kind=AttractorKind.RECONSTRUCTED_CIRCLE, mean=mean,
                                  roundness=r, direction=direction, crossings=1)
    x_cen = float(center[0])
    crossings = _poincare_crossings(window, x_cen)
    clusters = _cluster_count(crossings, config.cluster_tol)
    if clusters <= config.max_cycle_clusters:
        return AttractorLabel(kind=AttractorKind.LIMIT_CYCLE, mean=mean,
                              roundness=r, direction=direction, crossings=clusters)
    dim = _return_map_box_dim(crossings)
    kind = AttractorKind.CHAOTIC if dim > config.box_dim_chaotic_min else AttractorKind.TORUS
    return AttractorLabel(kind=kind, mean=mean, roundness=r, direction=direction,
                          crossings=clusters, box_dim=dim)
