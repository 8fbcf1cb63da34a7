"""Continuous-time reservoir integration.

Listening (driven) reservoir:

    dr/dt = gamma * [-r + tanh(M r + sigma W_in u(t))]

Predicting (autonomous) reservoir, after training a readout W_out:

    dr/dt = gamma * [-r + tanh(M r + sigma W_in W_out q(r))],   u_hat = W_out q(r)

Both are integrated with classical fixed-step RK4. Drive values at the RK4
half steps come from the signal's closed-form evaluator, not interpolation.
Several independent runs that share (M, W_in) are integrated side by side as
columns of one state matrix; columns never interact, so results are bitwise
identical to separate runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceError, SignalAlignmentError
from .tasks import PERIOD, DriveSignal

DEFAULT_TAU = 0.01


def _snap(t: float, tau: float) -> tuple[int, float]:
    k = int(round(t / tau))
    return k, k * tau


@dataclass
class ReservoirParams:
    """Scalar hyperparameters of one reservoir configuration.

    Time fields are snapped to integer multiples of tau at construction so
    the step grids of signals, trajectories, and harvest windows line up
    exactly.
    """

    n: int
    gamma: float
    sigma: float
    rho: float
    beta: float
    d: int = 2
    tau: float = DEFAULT_TAU
    t_listen: float = 6 * PERIOD
    t_train: float = 15 * PERIOD
    t_predict_end: float = 27 * PERIOD

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.sigma < 0 or self.rho < 0:
            raise ValueError("sigma and rho must be nonnegative")
        self.listen_steps, self.t_listen = _snap(self.t_listen, self.tau)
        self.train_steps, self.t_train = _snap(self.t_train, self.tau)
        self.predict_end_steps, self.t_predict_end = _snap(self.t_predict_end, self.tau)
        if not 0 <= self.listen_steps < self.train_steps < self.predict_end_steps:
            raise ValueError(
                "time windows must satisfy 0 <= t_listen < t_train < t_predict_end, got "
                f"({self.t_listen}, {self.t_train}, {self.t_predict_end})")


@dataclass
class ReservoirTrajectory:
    """Reservoir states on a uniform grid; row k is r(t0 + k*tau)."""

    states: np.ndarray  # (steps + 1, n)
    t0: float
    tau: float

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.states.shape[0]) * self.tau

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class PredictionTrajectory:
    """Readout values on a uniform grid; truncated at the last finite step
    when the closed loop diverges."""

    values: np.ndarray  # (steps + 1, d)
    t0: float
    tau: float
    diverged: bool = False

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.shape[0]) * self.tau


def rk4_step(f: Callable, state: np.ndarray, tau: float, t: float = 0.0) -> np.ndarray:
    """One classical RK4 step of dy/dt = f(t, y).

    Each stage is checked for finiteness; a non-finite stage raises
    DivergenceError naming the stage (1-4).
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    y = np.asarray(state, dtype=float)
    half = 0.5 * tau
    k1 = np.asarray(f(t, y), dtype=float)
    if not np.all(np.isfinite(k1)):
        raise DivergenceError("non-finite value in RK4 stage 1", stage=1)
    k2 = np.asarray(f(t + half, y + half * k1), dtype=float)
    if not np.all(np.isfinite(k2)):
        raise DivergenceError("non-finite value in RK4 stage 2", stage=2)
    k3 = np.asarray(f(t + half, y + half * k2), dtype=float)
    if not np.all(np.isfinite(k3)):
        raise DivergenceError("non-finite value in RK4 stage 3", stage=3)
    k4 = np.asarray(f(t + tau, y + tau * k3), dtype=float)
    if not np.all(np.isfinite(k4)):
        raise DivergenceError("non-finite value in RK4 stage 4", stage=4)
    return y + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_alignment(u: DriveSignal, params: ReservoirParams) -> None:
    if u.tau != params.tau:
        raise SignalAlignmentError(
            f"signal step {u.tau} does not match integration step {params.tau}")
    if u.t0 != 0.0:
        raise SignalAlignmentError(f"listening signal must start at t=0, got t0={u.t0}")
    if u.n_steps < params.train_steps:
        raise SignalAlignmentError(
            f"signal covers {u.n_steps} steps but training needs {params.train_steps}")


def drive_listening(m, w_in: np.ndarray, params: ReservoirParams, u: DriveSignal,
                    record_from: float = 0.0) -> ReservoirTrajectory:
    """Integrate the driven reservoir from r(0) = 0 to t_train.

    `record_from` turns on streaming: states before that time are computed
    but not stored, which keeps sweep memory at harvest-window size.
    """
    return drive_listening_multi(m, w_in, params, [u], record_from=record_from)[0]


def drive_listening_multi(m, w_in: np.ndarray, params: ReservoirParams,
                          signals: Sequence[DriveSignal],
                          record_from: float = 0.0) -> list[ReservoirTrajectory]:
    """Integrate one listening run per signal, batched over shared (M, W_in)."""
    for u in signals:
        _check_alignment(u, params)
    a = m.entries if hasattr(m, "entries") else m
    n = a.shape[0]
    n_signals = len(signals)
    k_total = params.train_steps
    rec0 = int(round(record_from / params.tau))
    if not 0 <= rec0 <= k_total:
        raise SignalAlignmentError(
            f"record_from={record_from} outside the listening window [0, {params.t_train}]")

    tau = params.tau
    gamma = params.gamma
    w = params.sigma * w_in  # (n, d)

    # Signal values on the half-step grid, shaped (2K+1, d, S) so one small
    # matmul per stage produces the drive for every column at once.
    t_half = np.arange(2 * k_total + 1) * (tau / 2.0)
    u_half = np.stack([u.evaluate(t_half) for u in signals], axis=2)

    r = np.zeros((n, n_signals))
    rec = np.empty((k_total - rec0 + 1, n, n_signals))
    if rec0 == 0:
        rec[0] = r
    sixth = tau / 6.0
    half = tau / 2.0
    for k in range(k_total):
        h = 2 * k
        b1 = w @ u_half[h]
        b2 = w @ u_half[h + 1]
        b4 = w @ u_half[h + 2]
        k1 = gamma * (np.tanh(a @ r + b1) - r)
        y = r + half * k1
        k2 = gamma * (np.tanh(a @ y + b2) - y)
        y = r + half * k2
        k3 = gamma * (np.tanh(a @ y + b2) - y)
        y = r + tau * k3
        k4 = gamma * (np.tanh(a @ y + b4) - y)
        r = r + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if k + 1 >= rec0:
            rec[k + 1 - rec0] = r
    if not np.all(np.isfinite(r)):
        raise DivergenceError("listening run produced non-finite states")
    t0 = rec0 * tau
    return [ReservoirTrajectory(states=rec[:, :, s], t0=t0, tau=tau)
            for s in range(n_signals)]


def run_prediction(trained, r0: np.ndarray, t_end: float | None = None,
                   record_states: bool = True):
    """Run the closed-loop predicting reservoir from one seed state.

    Starts at t_train (the seed state is a listening end state) and runs to
    `t_end` (default t_predict_end). Returns the prediction trajectory and
    the reservoir trajectory (None when record_states is False).
    """
    preds, _, states = predict_multi(trained, np.asarray(r0, dtype=float)[:, None],
                                     t_end=t_end, record_states=record_states)
    return preds[0], (states[0] if states is not None else None)


def predict_multi(trained, r0_columns: np.ndarray, t_end: float | None = None,
                  record_states: bool = False):
    """Closed-loop integration of several seed states as columns.

    Returns (predictions, final_states, reservoir_trajectories or None).
    Every step is checked for non-finite values; a diverging column is
    truncated at its last finite step and flagged, without disturbing the
    other columns or aborting the batch.
    """
    params = trained.params
    if t_end is None:
        t_end = params.t_predict_end
    t0 = params.t_train
    n_steps = int(round((t_end - t0) / params.tau))
    if n_steps < 1:
        raise ValueError(f"prediction window [{t0}, {t_end}] is empty")

    a = trained.m.entries
    n = a.shape[0]
    r = np.array(r0_columns, dtype=float)
    if r.ndim != 2 or r.shape[0] != n:
        raise ValueError(f"seed states must be shaped (n, batch) with n={n}, got {r.shape}")
    n_cols = r.shape[1]

    tau = params.tau
    gamma = params.gamma
    sixth = tau / 6.0
    half = tau / 2.0
    w = params.sigma * trained.w_in
    w_out = trained.w_out
    d = w_out.shape[0]

    def field_of(state):
        q = np.vstack((state, state * state))
        return gamma * (np.tanh(a @ state + w @ (w_out @ q)) - state)

    preds = np.empty((n_steps + 1, d, n_cols))
    rec = np.empty((n_steps + 1, n, n_cols)) if record_states else None
    preds[0] = w_out @ np.vstack((r, r * r))
    if record_states:
        rec[0] = r
    cut = np.full(n_cols, n_steps, dtype=int)
    alive = np.ones(n_cols, dtype=bool)
    for k in range(n_steps):
        k1 = field_of(r)
        k2 = field_of(r + half * k1)
        k3 = field_of(r + half * k2)
        k4 = field_of(r + tau * k3)
        r = r + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        finite = np.isfinite(r).all(axis=0)
        newly_dead = alive & ~finite
        if newly_dead.any():
            cut[newly_dead] = k  # last finite row index
            alive &= finite
        preds[k + 1] = w_out @ np.vstack((r, r * r))
        if record_states:
            rec[k + 1] = r
    prediction_list = []
    state_list = [] if record_states else None
    for c in range(n_cols):
        end = cut[c] + 1
        prediction_list.append(PredictionTrajectory(
            values=preds[:end, :, c], t0=t0, tau=tau, diverged=not alive[c]))
        if record_states:
            state_list.append(ReservoirTrajectory(states=rec[:end, :, c], t0=t0, tau=tau))
    return prediction_list, r, state_list


def dump_prediction(path, traj: PredictionTrajectory) -> None:
    """Write a prediction trajectory as `t,x,y` rows (17 significant digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,y\n")
        for t, row in zip(traj.times, traj.values):
            fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def dump_reservoir(path, traj: ReservoirTrajectory) -> None:
    """Write reservoir states as `t,r_0..r_{n-1}` rows. Large: callers gate this."""
    n = traj.states.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(f"r_{i}" for i in range(n)) + "\n")
        for t, row in zip(traj.times, traj.states):
            fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
