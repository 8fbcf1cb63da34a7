"""Experiment harness: seeded trials, parameter sweeps, continuation, stats.

All randomness flows from a base seed through labelled SHA-256 hashing, so
any trial, sweep cell, or continuation run can be reproduced in isolation
and trials can execute in any order or degree of parallelism without
changing results.
"""

from __future__ import annotations

import hashlib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from multiprocessing import get_context

import numpy as np

from . import evaluation
from .dynamics import ReservoirParams, predict_multi
from .errors import MfrcError
from .evaluation import (
    AttractorKind,
    AttractorLabel,
    Direction,
    EvaluationConfig,
    FailureMode,
    MfVerdict,
    OrbitCheck,
    evaluate_multifunctionality,
    classify_attractor,
    unique_local_maxima_counts,
)
from .tasks import PERIOD, make_orbit, sample_signal
from .topology import (
    AdjacencyMatrix,
    generate_erdos_renyi,
    generate_input_matrix,
    scale_to_spectral_radius,
)
from .training import TrainedReservoir, train_multifunctional

ERRC = "errc"
FFRC = "ffrc"

DEFAULT_RADIUS = 5.0


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from labelled parts (floats via repr)."""
    text = "|".join(repr(p) if isinstance(p, float) else str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def trial_seed(base_seed: int, model: str, gamma: float, rho: float, trial_index: int) -> int:
    return derive_seed(base_seed, model, float(gamma), float(rho), trial_index)


@dataclass(frozen=True)
class ErdosRenyiSource:
    """Per-trial random topology: M is regenerated from the trial's M stream."""

    n: int = 500
    sparsity: float = 0.05

    model = ERRC


@dataclass(frozen=True)
class ConnectomeSource:
    """Fixed topology: the same unscaled matrix is reused across trials."""

    matrix: AdjacencyMatrix

    model = FFRC

    @property
    def n(self) -> int:
        return self.matrix.n


@dataclass
class TrialRecord:
    model: str
    seed: int
    rho: float
    gamma: float
    verdict: MfVerdict
    wall_time: float


@dataclass
class SweepCell:
    gamma: float
    rho: float
    mf_count: int
    trials: int


@dataclass
class RankSumResult:
    u_statistic: float
    z_score: float
    p_value: float


def _build_matrix(source, rho: float, seed_m: int) -> AdjacencyMatrix:
    if isinstance(source, ConnectomeSource):
        unscaled = source.matrix
    else:
        unscaled = generate_erdos_renyi(source.n, source.sparsity, seed_m)
    return scale_to_spectral_radius(unscaled, rho)


def _benchmark_signals(params: ReservoirParams, radius: float):
    orbit_a = make_orbit("A", radius)
    orbit_b = make_orbit("B", radius)
    u1 = sample_signal(orbit_a, 0.0, params.t_train, params.tau)
    u2 = sample_signal(orbit_b, 0.0, params.t_train, params.tau)
    return (orbit_a, orbit_b), (u1, u2)


def _trial_input_matrix(n: int, d: int, sigma: float, seed_win: int) -> np.ndarray:
    # Input rows live on [-sigma, sigma] (the construction of LuHuntOtt18),
    # so with the extra sigma in the reservoir equation the drive entering
    # tanh has amplitude sigma^2 * u. The benchmark's reported counts and
    # multifunctionality windows are only reproduced under this scaling.
    return sigma * generate_input_matrix(n, d, seed_win)


def train_for_trial(model: str, params: ReservoirParams, source, seed: int,
                    radius: float = DEFAULT_RADIUS) -> tuple[TrainedReservoir, tuple]:
    """Build matrices from the trial's derived streams and train the readout."""
    params = replace(params, n=source.n)
    m = _build_matrix(source, params.rho, derive_seed(seed, "M"))
    w_in = _trial_input_matrix(source.n, params.d, params.sigma, derive_seed(seed, "Win"))
    orbits, signals = _benchmark_signals(params, radius)
    trained = train_multifunctional(m, w_in, params, signals[0], signals[1])
    return trained, orbits


def run_trial(model: str, params: ReservoirParams, source, seed: int,
              radius: float = DEFAULT_RADIUS,
              config: EvaluationConfig = evaluation.DEFAULT_CONFIG) -> TrialRecord:
    """One seeded multifunctionality trial.

    Numerical failures become Diverged verdicts so batches always complete.
    """
    start = time.perf_counter()
    try:
        trained, orbits = train_for_trial(model, params, source, seed, radius)
        verdict = evaluate_multifunctionality(trained, orbits, config=config)
    except MfrcError:
        failed = OrbitCheck(roundness=float("inf"), direction=Direction.UNDEFINED,
                            passed=False)
        verdict = MfVerdict(check_a=failed, check_b=failed, multifunctional=False,
                            failure_mode=FailureMode.DIVERGED)
    return TrialRecord(model=model, seed=seed, rho=params.rho, gamma=params.gamma,
                       verdict=verdict, wall_time=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# Parallel trial execution
# ---------------------------------------------------------------------------

def _run_chunk(args) -> list[TrialRecord]:
    model, params, source, seeds, radius = args
    return [run_trial(model, params, source, s, radius) for s in seeds]


def _execute_seeded_trials(model: str, params: ReservoirParams, source,
                           seeds: list[int], workers: int,
                           radius: float = DEFAULT_RADIUS,
                           progress=None) -> list[TrialRecord]:
    """Run trials for a seed list, preserving seed order in the result."""
    if workers <= 1 or len(seeds) <= 1:
        records = []
        for i, s in enumerate(seeds):
            records.append(run_trial(model, params, source, s, radius))
            if progress:
                progress(i + 1, len(seeds))
        return records
    # One BLAS thread per worker; the pool provides the parallelism. Spawned
    # workers inherit the environment, so this must be set before the pool.
    os.environ["OMP_NUM_THREADS"] = "1"
    os.environ["OPENBLAS_NUM_THREADS"] = "1"
    chunk_size = max(1, math.ceil(len(seeds) / (workers * 8)))
    chunks = [seeds[i:i + chunk_size] for i in range(0, len(seeds), chunk_size)]
    records: list[TrialRecord] = []
    with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn")) as pool:
        futures = [pool.submit(_run_chunk, (model, params, source, chunk, radius))
                   for chunk in chunks]
        done = 0
        for future in futures:
            chunk_records = future.result()
            records.extend(chunk_records)
            done += len(chunk_records)
            if progress:
                progress(done, len(seeds))
    return records


# ---------------------------------------------------------------------------
# Experiment 1: repeated multifunctionality trials
# ---------------------------------------------------------------------------

@dataclass
class Experiment1Result:
    set_counts: dict[str, list[int]]
    records: dict[str, list[TrialRecord]]

    def mean(self, model: str) -> float:
        counts = self.set_counts[model]
        return sum(counts) / len(counts) if counts else 0.0

    def aggregate_rate(self, model: str) -> float:
        records = self.records[model]
        if not records:
            return 0.0
        return sum(r.verdict.multifunctional for r in records) / len(records)


def run_experiment1(sources: dict[str, object], params: ReservoirParams,
                    n_sets: int = 50, trials_per_set: int = 100,
                    base_seed: int = 0, workers: int = 1,
                    radius: float = DEFAULT_RADIUS,
                    progress=None) -> Experiment1Result:
    """Sets of seeded trials per model at fixed (rho, gamma)."""
    set_counts: dict[str, list[int]] = {}
    all_records: dict[str, list[TrialRecord]] = {}
    for model, source in sources.items():
        total = n_sets * trials_per_set
        seeds = [trial_seed(base_seed, model, params.gamma, params.rho, i)
                 for i in range(total)]
        cb = (lambda done, n, _m=model: progress(_m, done, n)) if progress else None
        records = _execute_seeded_trials(model, params, source, seeds, workers,
                                         radius, progress=cb)
        counts = []
        for s in range(n_sets):
            chunk = records[s * trials_per_set:(s + 1) * trials_per_set]
            counts.append(sum(r.verdict.multifunctional for r in chunk))
        set_counts[model] = counts
        all_records[model] = records
    return Experiment1Result(set_counts=set_counts, records=all_records)


# ---------------------------------------------------------------------------
# Experiment 2: (gamma, rho) sweep
# ---------------------------------------------------------------------------

def _manifest_read(path) -> dict[tuple, SweepCell]:
    cells: dict[tuple, SweepCell] = {}
    if path is None or not os.path.exists(path):
        return cells
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            model, gamma, rho, count, trials = line.split(",")
            cell = SweepCell(gamma=float(gamma), rho=float(rho),
                             mf_count=int(count), trials=int(trials))
            cells[(model, cell.gamma, cell.rho, cell.trials)] = cell
    return cells


def run_sweep(model: str, source, params: ReservoirParams,
              gamma_grid, rho_grid, trials: int = 100,
              base_seed: int = 0, workers: int = 1,
              radius: float = DEFAULT_RADIUS,
              manifest_path=None, progress=None) -> list[SweepCell]:
    """Full factorial (gamma, rho) sweep of multifunctionality counts.

    Completed cells are appended to the manifest as they finish; a rerun
    with the same manifest skips them, making long sweeps resumable.
    """
    done = _manifest_read(manifest_path)
    cells: list[SweepCell] = []
    grid = [(float(g), float(r)) for g in gamma_grid for r in rho_grid]
    for i, (gamma, rho) in enumerate(grid):
        key = (model, gamma, rho, trials)
        if key in done:
            cells.append(done[key])
            continue
        cell_params = replace(params, gamma=gamma, rho=rho)
        seeds = [trial_seed(base_seed, model, gamma, rho, t) for t in range(trials)]
        records = _execute_seeded_trials(model, cell_params, source, seeds, workers, radius)
        cell = SweepCell(gamma=gamma, rho=rho,
                         mf_count=sum(r.verdict.multifunctional for r in records),
                         trials=trials)
        cells.append(cell)
        if manifest_path is not None:
            with open(manifest_path, "a", encoding="utf-8") as fh:
                fh.write(f"{model},{gamma:.17g},{rho:.17g},{cell.mf_count},{trials}\n")
                fh.flush()
        if progress:
            progress(i + 1, len(grid), cell)
    return cells


# ---------------------------------------------------------------------------
# Experiment 3: unique local maxima per neuron vs rho
# ---------------------------------------------------------------------------

def _activation_column(args) -> tuple[str, int, np.ndarray]:
    model, params, source, seed, radius, case, col, value_tol = args
    trained, _ = train_for_trial(model, params, source, seed, radius)
    seed_state = trained.seed_state("A")
    _, _, states = predict_multi(trained, seed_state[:, None], record_states=True)
    counts = unique_local_maxima_counts(states[0], value_tolerance=value_tol)
    return case, col, counts


def run_activation_experiment(model: str, source, params: ReservoirParams,
                              rho_grid, seed_mf: int, seed_nonmf: int,
                              workers: int = 1, radius: float = DEFAULT_RADIUS,
                              value_tolerance: float = 1e-3,
                              progress=None) -> dict[str, np.ndarray]:
    """Heatmap data: unique-local-maxima count per neuron per rho.

    Retrains at every rho for a known-multifunctional seed and a
    non-multifunctional seed; counts are taken on the predicting reservoir's
    neurons over the prediction window, seeded from attractor A's state.
    """
    rhos = [float(r) for r in rho_grid]
    tasks = []
    for case, seed in (("mf", seed_mf), ("non_mf", seed_nonmf)):
        for col, rho in enumerate(rhos):
            tasks.append((model, replace(params, rho=rho), source, seed, radius,
                          case, col, value_tolerance))
    results: dict[str, np.ndarray] = {
        "mf": np.zeros((source.n, len(rhos)), dtype=int),
        "non_mf": np.zeros((source.n, len(rhos)), dtype=int),
    }
    if workers <= 1:
        outputs = map(_activation_column, tasks)
        for i, (case, col, counts) in enumerate(outputs):
            results[case][:, col] = counts
            if progress:
                progress(i + 1, len(tasks))
    else:
        os.environ["OMP_NUM_THREADS"] = "1"
        os.environ["OPENBLAS_NUM_THREADS"] = "1"
        with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn")) as pool:
            for i, (case, col, counts) in enumerate(pool.map(_activation_column, tasks)):
                results[case][:, col] = counts
                if progress:
                    progress(i + 1, len(tasks))
    return results


# ---------------------------------------------------------------------------
# Experiment 4: attractor continuation over rho
# ---------------------------------------------------------------------------

@dataclass
class Branch:
    """One attractor tracked across rho values by warm-started prediction."""

    branch_id: int
    rho_samples: list[tuple[float, AttractorLabel]] = field(default_factory=list)
    state: np.ndarray | None = None     # warm-start reservoir state
    born_rho: float = 0.0
    dead: bool = False


@dataclass
class ContinuationConfig:
    predict_periods: float = 24.0        # closed-loop run length per rho, in T
    transient_periods: float = 4.0       # skipped before classification
    extend_periods: float = 220.0        # longer rerun for ambiguous torus/chaos labels
    merge_mean_tol: float = 0.3          # attractor summaries closer than this merge
    merge_roundness_tol: float = 0.5


def _same_attractor(a: AttractorLabel, b: AttractorLabel, cfg: ContinuationConfig) -> bool:
    if a.kind is not b.kind:
        return False
    if a.kind is AttractorKind.RECONSTRUCTED_CIRCLE:
        return a.direction is b.direction
    if a.kind is AttractorKind.CHAOTIC:
        return True
    mean_close = float(np.hypot(*(a.mean - b.mean))) < cfg.merge_mean_tol
    if a.kind is AttractorKind.FIXED_POINT:
        return mean_close
    return mean_close and abs(a.roundness - b.roundness) < cfg.merge_roundness_tol


def run_continuation(model: str, source, params: ReservoirParams,
                     rho_values, seed: int,
                     radius: float = DEFAULT_RADIUS,
                     cont: ContinuationConfig | None = None,
                     config: EvaluationConfig = evaluation.DEFAULT_CONFIG,
                     progress=None) -> list[Branch]:
    """Track attractors of the predicting reservoir across rho.

    At each rho the readout is retrained (fixed M/W_in streams from `seed`),
    every live branch is continued from its previous final reservoir state,
    and the two training seed states are injected to catch newly born
    attractors. Coinciding results are merged; unmatched ones become new
    branches and unmatched continuations die.
    """
    cont = cont or ContinuationConfig()
    branches: list[Branch] = []
    next_id = 0
    params = replace(params, n=source.n)
    seed_m = derive_seed(seed, "M")
    seed_win = derive_seed(seed, "Win")
    if isinstance(source, ConnectomeSource):
        unscaled = source.matrix
    else:
        unscaled = generate_erdos_renyi(source.n, source.sparsity, seed_m)
    w_in = _trial_input_matrix(source.n, params.d, params.sigma, seed_win)
    t_end = params.t_train + cont.predict_periods * PERIOD
    skip = cont.transient_periods * PERIOD

    rhos = [float(r) for r in rho_values]
    for step, rho in enumerate(rhos):
        rho_params = replace(params, rho=rho)
        m = scale_to_spectral_radius(unscaled, rho)
        orbits, signals = _benchmark_signals(rho_params, radius)
        trained = train_multifunctional(m, w_in, rho_params, signals[0], signals[1])

        live = [b for b in branches if not b.dead]
        columns = [b.state for b in live]
        columns.append(trained.seed_state("A"))
        columns.append(trained.seed_state("B"))
        preds, finals, _ = predict_multi(trained, np.column_stack(columns), t_end=t_end)

        labels = []
        for pred in preds:
            try:
                labels.append(classify_attractor(pred, orbits, transient_skip=skip,
                                                 config=config))
            except MfrcError:
                labels.append(None)

        # Torus/chaos separation needs a few hundred section crossings, far
        # more than the short run provides; rerun just those columns longer.
        ambiguous = [i for i, lab in enumerate(labels)
                     if lab is not None and lab.kind in (AttractorKind.TORUS,
                                                         AttractorKind.CHAOTIC)]
        if ambiguous and cont.extend_periods > cont.predict_periods:
            long_end = params.t_train + cont.extend_periods * PERIOD
            long_preds, long_finals, _ = predict_multi(
                trained, finals[:, ambiguous], t_end=long_end)
            for j, i in enumerate(ambiguous):
                try:
                    labels[i] = classify_attractor(long_preds[j], orbits,
                                                   transient_skip=2 * PERIOD,
                                                   config=config)
                    finals[:, i] = long_finals[:, j]
                except MfrcError:
                    labels[i] = None

        accepted: list[AttractorLabel] = []
        for idx, branch in enumerate(live):
            label = labels[idx]
            if label is None or any(_same_attractor(label, seen, cont) for seen in accepted):
                branch.dead = True
                branch.state = None
                continue
            accepted.append(label)
            branch.rho_samples.append((rho, label))
            branch.state = finals[:, idx].copy()
        for offset in (len(live), len(live) + 1):
            label = labels[offset]
            if label is None or any(_same_attractor(label, seen, cont) for seen in accepted):
                continue
            accepted.append(label)
            branch = Branch(branch_id=next_id, born_rho=rho, state=finals[:, offset].copy())
            branch.rho_samples.append((rho, label))
            branches.append(branch)
            next_id += 1
        if progress:
            progress(step + 1, len(rhos), rho, len([b for b in branches if not b.dead]))
    return branches


# ---------------------------------------------------------------------------
# Wilcoxon rank-sum (Mann-Whitney U) test
# ---------------------------------------------------------------------------

def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def rank_sum_test(sample_a, sample_b) -> RankSumResult:
    """Two-sided Mann-Whitney U test via the normal approximation.

    Ties get midranks and the variance is tie-corrected. When every value in
    both samples is identical the variance vanishes; by convention z = 0 and
    p = 1.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    n1, n2 = a.size, b.size
    combined = np.concatenate((a, b))
    ranks = _midranks(combined)
    r1 = ranks[:n1].sum()
    u1 = r1 - n1 * (n1 + 1) / 2.0
    mean_u = n1 * n2 / 2.0
    n = n1 + n2
    _, tie_counts = np.unique(combined, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum())
    variance = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0:
        return RankSumResult(u_statistic=float(u1), z_score=0.0, p_value=1.0)
    z = (u1 - mean_u) / math.sqrt(variance)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return RankSumResult(u_statistic=float(u1), z_score=float(z), p_value=float(p))
