"""Readout training: harvest, squaring, blending, ridge regression.

The readout solves

    W_out = Y X^T (X X^T + beta I)^{-1}

where the columns of X are q(r(t)) = (r(t), r(t)^2) over the harvest window
[t_listen, t_train] (both endpoints included) and Y holds the corresponding
drive values. For multifunctional training the (X, Y) pairs from two
listening runs are blended by column concatenation before the solve.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import ReservoirParams, ReservoirTrajectory, drive_listening_multi
from .errors import NumericalError, ShapeMismatchError, SingularSystemError, WindowError
from .tasks import DriveSignal
from .topology import AdjacencyMatrix, load_matrix, export_matrix

RESIDUAL_TOL = 1e-8


def apply_q(r: np.ndarray) -> np.ndarray:
    """Squaring nonlinearity q(r) = (r, r^2); axis 0 is the feature axis."""
    r = np.asarray(r, dtype=float)
    if r.ndim == 1:
        return np.concatenate((r, r * r))
    return np.vstack((r, r * r))


def harvest(traj: ReservoirTrajectory, signal: DriveSignal,
            params: ReservoirParams) -> tuple[np.ndarray, np.ndarray]:
    """Extract (X, Y) over [t_listen, t_train] from a listening trajectory.

    X is (2n, m) with rows 0..n-1 holding r and rows n..2n-1 holding r^2;
    Y is (d, m) holding the drive on the same inclusive grid.
    """
    tau = params.tau
    i0 = int(round((params.t_listen - traj.t0) / tau))
    i1 = int(round((params.t_train - traj.t0) / tau))
    if i0 < 0 or i1 >= traj.states.shape[0] or i0 > i1:
        raise WindowError(
            f"trajectory [{traj.t0}, {traj.t0 + traj.n_steps * tau}] does not cover "
            f"the harvest window [{params.t_listen}, {params.t_train}]")
    j0 = int(round((params.t_listen - signal.t0) / tau))
    j1 = j0 + (i1 - i0)
    if j0 < 0 or j1 >= signal.samples.shape[0]:
        raise WindowError("signal does not cover the harvest window")
    x = apply_q(traj.states[i0:i1 + 1].T)
    y = signal.samples[j0:j1 + 1].T.copy()
    return x, y


def blend(x1: np.ndarray, x2: np.ndarray, y1: np.ndarray,
          y2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-concatenate two harvested (X, Y) pairs, preserving order."""
    if x1.shape[1] != y1.shape[1] or x2.shape[1] != y2.shape[1]:
        raise ShapeMismatchError(
            f"feature/target column counts differ: {x1.shape[1]}/{y1.shape[1]} and "
            f"{x2.shape[1]}/{y2.shape[1]}")
    if x1.shape[0] != x2.shape[0] or y1.shape[0] != y2.shape[0]:
        raise ShapeMismatchError(
            f"row counts differ across runs: X {x1.shape[0]} vs {x2.shape[0]}, "
            f"Y {y1.shape[0]} vs {y2.shape[0]}")
    if x1.shape[1] == 0 or x2.shape[1] == 0:
        raise ShapeMismatchError("cannot blend an empty harvest")
    return np.hstack((x1, x2)), np.hstack((y1, y2))


def ridge_regression(x: np.ndarray, y: np.ndarray, beta: float) -> np.ndarray:
    """Solve W_out = Y X^T (X X^T + beta I)^{-1} via Cholesky.

    The normal matrix is symmetric positive definite for beta > 0; the
    residual of every solve is checked against RESIDUAL_TOL (relative), with
    one refinement pass before giving up.
    """
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if x.shape[1] != y.shape[1]:
        raise ShapeMismatchError(
            f"X has {x.shape[1]} columns but Y has {y.shape[1]}")
    p = x.shape[0]
    gram = x @ x.T
    a = gram + beta * np.eye(p)
    rhs = x @ y.T  # (p, d)
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
        wt = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        if beta == 0.0:
            raise SingularSystemError(
                "X X^T is singular at beta = 0; use beta > 0") from exc
        wt = scipy.linalg.lstsq(a, rhs, check_finite=False)[0]
        factor = None
    denom = np.linalg.norm(rhs)
    resid = np.linalg.norm(a @ wt - rhs)
    rel = resid / denom if denom > 0 else resid
    if rel > RESIDUAL_TOL and factor is not None:
        wt = wt + scipy.linalg.cho_solve(factor, rhs - a @ wt, check_finite=False)
        resid = np.linalg.norm(a @ wt - rhs)
        rel = resid / denom if denom > 0 else resid
    if rel > RESIDUAL_TOL:
        raise NumericalError(
            f"ridge solve residual {rel:.3e} exceeds tolerance {RESIDUAL_TOL:.0e}")
    return wt.T


@dataclass
class TrainedReservoir:
    """Frozen (M, W_in, W_out) plus the per-attractor prediction seed states."""

    m: AdjacencyMatrix
    w_in: np.ndarray
    w_out: np.ndarray
    params: ReservoirParams
    seed_states: list[tuple[str, np.ndarray]]

    def __post_init__(self):
        if not self.seed_states:
            raise ValueError("a trained reservoir needs at least one seed state")

    def seed_state(self, label: str) -> np.ndarray:
        for name, state in self.seed_states:
            if name == label:
                return state
        raise KeyError(f"no seed state labelled {label!r}")


def train_multifunctional(m: AdjacencyMatrix, w_in: np.ndarray, params: ReservoirParams,
                          u1: DriveSignal, u2: DriveSignal) -> TrainedReservoir:
    """Train one readout on two drive signals.

    Runs a listening phase per signal from r(0) = 0, harvests both windows,
    blends them, solves the ridge regression, and records each run's final
    state r(t_train) as that attractor's prediction seed.
    """
    traj1, traj2 = drive_listening_multi(m, w_in, params, [u1, u2],
                                         record_from=params.t_listen)
    x1, y1 = harvest(traj1, u1, params)
    x2, y2 = harvest(traj2, u2, params)
    x, y = blend(x1, x2, y1, y2)
    w_out = ridge_regression(x, y, params.beta)
    seeds = [(u1.spec.label, traj1.final_state.copy()),
             (u2.spec.label, traj2.final_state.copy())]
    return TrainedReservoir(m=m, w_in=w_in, w_out=w_out, params=params, seed_states=seeds)


# ---------------------------------------------------------------------------
# Serialization: delimited text with 17 significant digits (exact round trip).
# ---------------------------------------------------------------------------

def _write_array(path, array: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(array):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _read_array(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    return np.array(rows)


def save_trained(trained: TrainedReservoir, directory) -> None:
    """Write a trained reservoir to a directory of delimited text files."""
    os.makedirs(directory, exist_ok=True)
    p = trained.params
    with open(os.path.join(directory, "meta.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"n = {p.n}\nd = {p.d}\n")
        for name in ("gamma", "sigma", "rho", "beta", "tau",
                     "t_listen", "t_train", "t_predict_end"):
            fh.write(f"{name} = {getattr(p, name):.17g}\n")
        fh.write("seed_labels = " + ",".join(label for label, _ in trained.seed_states) + "\n")
    export_matrix(trained.m, os.path.join(directory, "m.csv"))
    _write_array(os.path.join(directory, "w_in.csv"), trained.w_in)
    _write_array(os.path.join(directory, "w_out.csv"), trained.w_out)
    seed_matrix = np.vstack([state for _, state in trained.seed_states])
    _write_array(os.path.join(directory, "seed_states.csv"), seed_matrix)


def load_trained(directory) -> TrainedReservoir:
    meta: dict[str, str] = {}
    with open(os.path.join(directory, "meta.txt"), encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                key, value = line.split("=", 1)
                meta[key.strip()] = value.strip()
    params = ReservoirParams(
        n=int(meta["n"]), d=int(meta["d"]), gamma=float(meta["gamma"]),
        sigma=float(meta["sigma"]), rho=float(meta["rho"]), beta=float(meta["beta"]),
        tau=float(meta["tau"]), t_listen=float(meta["t_listen"]),
        t_train=float(meta["t_train"]), t_predict_end=float(meta["t_predict_end"]))
    m = load_matrix(os.path.join(directory, "m.csv"))
    w_in = _read_array(os.path.join(directory, "w_in.csv"))
    w_out = _read_array(os.path.join(directory, "w_out.csv"))
    seed_matrix = _read_array(os.path.join(directory, "seed_states.csv"))
    labels = meta["seed_labels"].split(",")
    seeds = [(label, seed_matrix[i]) for i, label in enumerate(labels)]
    return TrainedReservoir(m=m, w_in=w_in, w_out=w_out, params=params, seed_states=seeds)
