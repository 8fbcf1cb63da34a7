"""Command-line interface: config loading, dispatch, and result files.

The config file is flat `key = value` text ('#' starts a comment). Every
output file starts with a comment line carrying the config hash and base
seed, so results can always be traced back to their configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import experiments
from .dynamics import ReservoirParams
from .errors import ConfigError, MfrcError, NumericalError
from .evaluation import FailureMode
from .experiments import (
    ConnectomeSource,
    ErdosRenyiSource,
    ContinuationConfig,
    rank_sum_test,
    run_activation_experiment,
    run_continuation,
    run_experiment1,
    run_sweep,
    run_trial,
)
from .tasks import PERIOD, make_orbit, sample_signal
from .topology import export_matrix, generate_erdos_renyi, ingest_connectome, read_edge_list

OUTPUT_DIR_ENV = "MFRC_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SUBCOMMANDS = ("gen-topology", "trial", "exp1", "sweep", "activations",
               "continuation", "stats", "dump-signal")


@dataclass
class RunConfig:
    """Validated run configuration with the paper's defaults."""

    model: str = "errc"
    n: int = 500
    sparsity: float = 0.05
    connectome_path: str = ""
    synapse_threshold: int = 50
    gamma: float = 5.0
    sigma: float = 0.2
    rho: float = 1.4
    beta: float = 0.01
    tau: float = 0.01
    radius: float = 5.0
    listen_periods: float = 6.0
    train_periods: float = 15.0
    predict_periods: float = 27.0
    transient_periods: float = 2.0
    base_seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    trials: int = 100
    sets: int = 50
    gamma_grid: tuple = (5.0, 15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 75.0, 85.0, 95.0)
    rho_grid: tuple = tuple(np.round(np.arange(0.0, 2.0001, 0.05), 10))
    rho_start: float = 0.05
    rho_end: float = 2.2
    delta_rho: float = 0.01
    continuation_periods: float = 60.0
    activation_rho_max: float = 1.8
    activation_rho_step: float = 0.1
    seed_mf: int = 0
    seed_nonmf: int = 1

    def reservoir_params(self) -> ReservoirParams:
        return ReservoirParams(
            n=self.n, gamma=self.gamma, sigma=self.sigma, rho=self.rho,
            beta=self.beta, tau=self.tau,
            t_listen=self.listen_periods * PERIOD,
            t_train=self.train_periods * PERIOD,
            t_predict_end=self.predict_periods * PERIOD)


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_grid(text: str) -> tuple:
    """Grid values: either 'a,b,c' or 'start:stop:step' (stop inclusive)."""
    if ":" in text:
        start_s, stop_s, step_s = text.split(":")
        start, stop, step = float(start_s), float(stop_s), float(step_s)
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = math.floor((stop - start) / step + 1e-9) + 1
        return tuple(float(v) for v in np.round(start + np.arange(count) * step, 12))
    return tuple(float(v) for v in text.split(","))


_PARSERS = {int: int, float: float, str: str, bool: _parse_bool, tuple: _parse_grid}


def load_config(path: str | None) -> RunConfig:
    """Load and validate a flat key=value config file.

    A missing or empty file yields all defaults. Unknown keys, bad values,
    and violated invariants raise ConfigError naming the field (and line).
    """
    values: dict[str, object] = {}
    field_types = {f.name: _field_type(f) for f in fields(RunConfig)}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError("expected 'key = value'", line=lineno)
                key, text = (part.strip() for part in line.split("=", 1))
                if key not in field_types:
                    raise ConfigError("unknown key", field=key, line=lineno)
                parser = _PARSERS[field_types[key]]
                try:
                    values[key] = parser(text)
                except ValueError as exc:
                    raise ConfigError(str(exc), field=key, line=lineno) from exc
    config = RunConfig(**values)
    _validate(config)
    return config


def _field_type(f) -> type:
    default = getattr(RunConfig, f.name)
    return type(default)


def _validate(config: RunConfig) -> None:
    if config.model not in (experiments.ERRC, experiments.FFRC):
        raise ConfigError(f"must be 'errc' or 'ffrc', got {config.model!r}", field="model")
    try:
        config.reservoir_params()
    except ValueError as exc:
        raise ConfigError(str(exc), field="reservoir") from exc
    if config.workers < 1:
        raise ConfigError("must be >= 1", field="workers")
    if config.trials < 0 or config.sets < 0:
        raise ConfigError("trials and sets must be nonnegative", field="trials")
    if config.model == experiments.FFRC and not config.connectome_path:
        raise ConfigError("ffrc model needs connectome_path", field="connectome_path")
    if config.delta_rho <= 0:
        raise ConfigError("must be positive", field="delta_rho")


def config_hash(config: RunConfig) -> str:
    text = "\n".join(f"{f.name}={getattr(config, f.name)!r}" for f in fields(RunConfig))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _output_dir(config: RunConfig) -> str:
    directory = os.environ.get(OUTPUT_DIR_ENV, config.output_dir)
    os.makedirs(directory, exist_ok=True)
    return directory


def _open_output(config: RunConfig, directory: str, name: str, header: str):
    fh = open(os.path.join(directory, name), "w", encoding="utf-8")
    fh.write(f"# config_hash={config_hash(config)} base_seed={config.base_seed}\n")
    fh.write(header + "\n")
    return fh


def _progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _build_source(config: RunConfig):
    if config.model == experiments.FFRC:
        edges = read_edge_list(config.connectome_path)
        matrix = ingest_connectome(edges, config.synapse_threshold,
                                   source_id=os.path.basename(config.connectome_path))
        return ConnectomeSource(matrix=matrix)
    return ErdosRenyiSource(n=config.n, sparsity=config.sparsity)


def _verdict_row(trial_id: int, record) -> str:
    v = record.verdict
    return (f"{trial_id},{record.seed},{record.model},{record.rho:.6g},{record.gamma:.6g},"
            f"{v.check_a.roundness:.6g},{v.check_a.direction.value},"
            f"{v.check_b.roundness:.6g},{v.check_b.direction.value},"
            f"{int(v.multifunctional)},{v.failure_mode.value}")


VERDICT_HEADER = ("trial_id,seed,model,rho,gamma,roundness_a,dir_a,"
                  "roundness_b,dir_b,mf,failure_mode")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_topology(config: RunConfig, options) -> int:
    directory = _output_dir(config)
    if config.model == experiments.FFRC:
        source = _build_source(config)
        matrix = source.matrix
    else:
        matrix = generate_erdos_renyi(config.n, config.sparsity,
                                      experiments.derive_seed(config.base_seed, "M"))
    path = os.path.join(directory, f"topology_{config.model}.csv")
    export_matrix(matrix, path)
    _progress(f"wrote {path} (n={matrix.n}, spectral_radius={matrix.spectral_radius:.6g})")
    return EXIT_OK


def cmd_trial(config: RunConfig, options) -> int:
    source = _build_source(config)
    seed = options.seed if options.seed is not None else experiments.trial_seed(
        config.base_seed, config.model, config.gamma, config.rho, 0)
    directory = _output_dir(config)
    dump_pred = bool(getattr(options, "dump_prediction", False))
    dump_states = bool(getattr(options, "dump_states", False))
    if dump_pred or dump_states:
        from .dynamics import dump_prediction, dump_reservoir, predict_multi
        from .evaluation import evaluate_multifunctionality
        trained, orbits = experiments.train_for_trial(
            config.model, config.reservoir_params(), source, seed, radius=config.radius)
        verdict = evaluate_multifunctionality(trained, orbits)
        record = experiments.TrialRecord(model=config.model, seed=seed, rho=config.rho,
                                         gamma=config.gamma, verdict=verdict, wall_time=0.0)
        for label, state in trained.seed_states:
            preds, _, states = predict_multi(trained, state[:, None],
                                             record_states=dump_states)
            if dump_pred:
                dump_prediction(os.path.join(directory, f"prediction_{label}.csv"), preds[0])
            if dump_states:
                dump_reservoir(os.path.join(directory, f"reservoir_{label}.csv"), states[0])
    else:
        record = run_trial(config.model, config.reservoir_params(), source, seed,
                           radius=config.radius)
    row = _verdict_row(0, record)
    print(row)
    path = os.path.join(directory, "trials.csv")
    new_file = not os.path.exists(path)
    with open(path, "a", encoding="utf-8") as fh:
        if new_file:
            fh.write(f"# config_hash={config_hash(config)} base_seed={config.base_seed}\n")
            fh.write(VERDICT_HEADER + "\n")
        fh.write(row + "\n")
    return EXIT_OK


def cmd_exp1(config: RunConfig, options) -> int:
    directory = _output_dir(config)
    sources = {}
    for model in (experiments.ERRC, experiments.FFRC):
        model_config = replace(config, model=model)
        if model == experiments.FFRC and not config.connectome_path:
            _progress("no connectome_path configured; running ERRC only")
            continue
        sources[model] = _build_source(model_config)
    result = run_experiment1(
        sources, config.reservoir_params(), n_sets=config.sets,
        trials_per_set=config.trials, base_seed=config.base_seed,
        workers=config.workers, radius=config.radius,
        progress=lambda model, done, total: _progress(f"exp1 {model}: {done}/{total} trials"))
    with _open_output(config, directory, "exp1_counts.csv", "model,set_id,mf_count") as fh:
        for model, counts in result.set_counts.items():
            for set_id, count in enumerate(counts):
                fh.write(f"{model},{set_id},{count}\n")
    with _open_output(config, directory, "exp1_trials.csv", VERDICT_HEADER) as fh:
        for model, records in result.records.items():
            for i, record in enumerate(records):
                fh.write(_verdict_row(i, record) + "\n")
    if len(result.set_counts) == 2:
        stats = rank_sum_test(result.set_counts[experiments.FFRC],
                              result.set_counts[experiments.ERRC])
        _write_stats(config, directory, stats,
                     extra={"mean_ffrc": result.mean(experiments.FFRC),
                            "mean_errc": result.mean(experiments.ERRC)})
    for model in result.set_counts:
        _progress(f"exp1 {model}: mean mf count {result.mean(model):.3f}")
    return EXIT_OK


def _write_stats(config: RunConfig, directory: str, stats, extra=None) -> None:
    payload = {"u_statistic": _round6(stats.u_statistic),
               "z_score": _round6(stats.z_score),
               "p_value": _round6(stats.p_value)}
    for key, value in (extra or {}).items():
        payload[key] = _round6(value)
    with open(os.path.join(directory, "stats.json"), "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash(config)} base_seed={config.base_seed}\n")
        fh.write(json.dumps(payload, indent=2) + "\n")


def _round6(v: float) -> float:
    return float(f"{v:.6g}")


def cmd_sweep(config: RunConfig, options) -> int:
    directory = _output_dir(config)
    source = _build_source(config)
    manifest = os.path.join(directory, "sweep_manifest.csv")
    cells = run_sweep(
        config.model, source, config.reservoir_params(),
        config.gamma_grid, config.rho_grid, trials=config.trials,
        base_seed=config.base_seed, workers=config.workers, radius=config.radius,
        manifest_path=manifest,
        progress=lambda i, total, cell: _progress(
            f"sweep {config.model}: cell {i}/{total} gamma={cell.gamma:g} "
            f"rho={cell.rho:g} mf={cell.mf_count}/{cell.trials}"))
    with _open_output(config, directory, "sweep.csv",
                      "model,gamma,rho,mf_count,trials") as fh:
        for cell in cells:
            fh.write(f"{config.model},{cell.gamma:.6g},{cell.rho:.6g},"
                     f"{cell.mf_count},{cell.trials}\n")
    return EXIT_OK


def cmd_activations(config: RunConfig, options) -> int:
    directory = _output_dir(config)
    source = _build_source(config)
    steps = int(round(config.activation_rho_max / config.activation_rho_step))
    rho_grid = [round(i * config.activation_rho_step, 10) for i in range(steps + 1)]
    heatmaps = run_activation_experiment(
        config.model, source, config.reservoir_params(), rho_grid,
        seed_mf=config.seed_mf, seed_nonmf=config.seed_nonmf,
        workers=config.workers, radius=config.radius,
        progress=lambda done, total: _progress(f"activations: {done}/{total} columns"))
    with _open_output(config, directory, "activations.csv",
                      "model,case,neuron,rho,count") as fh:
        for case, matrix in heatmaps.items():
            for col, rho in enumerate(rho_grid):
                for neuron in range(matrix.shape[0]):
                    fh.write(f"{config.model},{case},{neuron},{rho:.6g},"
                             f"{matrix[neuron, col]}\n")
    return EXIT_OK


def cmd_continuation(config: RunConfig, options) -> int:
    directory = _output_dir(config)
    source = _build_source(config)
    count = int(round((config.rho_end - config.rho_start) / config.delta_rho))
    rho_values = [round(config.rho_start + i * config.delta_rho, 12) for i in range(count + 1)]
    cont = ContinuationConfig(predict_periods=config.continuation_periods,
                              transient_periods=config.transient_periods + 2.0)
    branches = run_continuation(
        config.model, source, config.reservoir_params(), rho_values,
        seed=config.base_seed, radius=config.radius, cont=cont,
        progress=lambda i, total, rho, live: _progress(
            f"continuation: {i}/{total} rho={rho:g} live branches={live}"))
    with _open_output(config, directory, "continuation.csv",
                      "model,branch_id,rho,label,roundness,direction,crossings") as fh:
        for branch in branches:
            for rho, label in branch.rho_samples:
                fh.write(f"{config.model},{branch.branch_id},{rho:.6g},{label.kind.value},"
                         f"{label.roundness:.6g},{label.direction.value},{label.crossings}\n")
    return EXIT_OK


def _read_counts_csv(path: str) -> list[float]:
    values = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.endswith("mf_count"):
                continue
            values.append(float(line.split(",")[-1]))
    if not values:
        raise ConfigError(f"no counts found in {path}")
    return values


def cmd_stats(config: RunConfig, options) -> int:
    if not options.sample_a or not options.sample_b:
        raise ConfigError("stats needs --a and --b count files")
    a = _read_counts_csv(options.sample_a)
    b = _read_counts_csv(options.sample_b)
    stats = rank_sum_test(a, b)
    directory = _output_dir(config)
    _write_stats(config, directory, stats)
    print(f"U={stats.u_statistic:.6g} z={stats.z_score:.6g} p={stats.p_value:.6g}")
    return EXIT_OK


def cmd_dump_signal(config: RunConfig, options) -> int:
    directory = _output_dir(config)
    label = options.orbit or "A"
    orbit = make_orbit(label, config.radius)
    signal = sample_signal(orbit, 0.0, config.train_periods * PERIOD, config.tau)
    with _open_output(config, directory, f"signal_{label}.csv", "t,x,y") as fh:
        for t, (x, y) in zip(signal.times, signal.samples):
            fh.write(f"{t:.17g},{x:.17g},{y:.17g}\n")
    return EXIT_OK


_HANDLERS = {
    "gen-topology": cmd_gen_topology,
    "trial": cmd_trial,
    "exp1": cmd_exp1,
    "sweep": cmd_sweep,
    "activations": cmd_activations,
    "continuation": cmd_continuation,
    "stats": cmd_stats,
    "dump-signal": cmd_dump_signal,
}


def dispatch(subcommand: str, config: RunConfig, options=None) -> int:
    """Run one subcommand; returns the process exit status."""
    if subcommand not in _HANDLERS:
        print(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}",
              file=sys.stderr)
        return EXIT_CONFIG
    if options is None:
        options = argparse.Namespace(seed=None, orbit=None, sample_a=None, sample_b=None)
    try:
        return _HANDLERS[subcommand](config, options)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MfrcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _apply_overrides(config: RunConfig, options) -> RunConfig:
    overrides = {}
    for name in ("model", "workers", "base_seed", "trials", "sets", "rho", "gamma",
                 "connectome_path", "output_dir"):
        value = getattr(options, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        config = replace(config, **overrides)
        _validate(config)
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfrc",
                                     description="Multifunctional reservoir computing lab")
    parser.add_argument("--config", default=None, help="path to key=value config file")
    sub = parser.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--model", choices=("errc", "ffrc"), default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--base-seed", dest="base_seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--sets", type=int, default=None)
        p.add_argument("--rho", type=float, default=None)
        p.add_argument("--gamma", type=float, default=None)
        p.add_argument("--connectome-path", dest="connectome_path", default=None)
        p.add_argument("--output-dir", dest="output_dir", default=None)
        if name == "trial":
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--dump-prediction", dest="dump_prediction",
                           action="store_true")
            p.add_argument("--dump-states", dest="dump_states", action="store_true")
        if name == "dump-signal":
            p.add_argument("--orbit", choices=("A", "B"), default="A")
        if name == "stats":
            p.add_argument("--a", dest="sample_a", default=None)
            p.add_argument("--b", dest="sample_b", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    options = parser.parse_args(argv)
    if options.subcommand is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(options.config)
        config = _apply_overrides(config, options)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(options.subcommand, config, options)


if __name__ == "__main__":
    sys.exit(main())
