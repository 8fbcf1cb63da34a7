import numpy as np
import pytest

from mfrc.dynamics import (
    ReservoirParams,
    drive_listening,
    drive_listening_multi,
    rk4_step,
    run_prediction,
)
from mfrc.errors import DivergenceError, SignalAlignmentError
from mfrc.tasks import PERIOD, make_orbit, sample_signal
from mfrc.topology import AdjacencyMatrix, generate_erdos_renyi, generate_input_matrix
from mfrc.training import TrainedReservoir


def small_params(**overrides):
    defaults = dict(n=30, gamma=5.0, sigma=0.2, rho=1.0, beta=0.01,
                    t_listen=1 * PERIOD, t_train=3 * PERIOD, t_predict_end=5 * PERIOD)
    defaults.update(overrides)
    return ReservoirParams(**defaults)


# ---------------------------------------------------------------------------
# RK4 step
# ---------------------------------------------------------------------------

def test_rk4_zero_field_is_identity():
    out = rk4_step(lambda t, y: np.zeros_like(y), np.array([1.0, 2.0]), 0.01)
    assert np.array_equal(out, [1.0, 2.0])


def test_rk4_matches_exponential_decay():
    out = rk4_step(lambda t, y: -y, np.array([1.0]), 0.01)
    assert abs(out[0] - np.exp(-0.01)) < 1e-10


def test_rk4_fourth_order_convergence():
    # Halving tau shrinks the global error on dy/dt = -y by about 2^4.
    def integrate(tau):
        y = np.array([1.0])
        for _ in range(int(round(1.0 / tau))):
            y = rk4_step(lambda t, v: -v, y, tau)
        return abs(y[0] - np.exp(-1.0))

    err_coarse = integrate(0.02)
    err_fine = integrate(0.01)
    assert err_coarse / err_fine == pytest.approx(16.0, rel=0.2)


def test_rk4_divergence_names_stage():
    def exploding(t, y):
        return np.array([np.inf])

    with pytest.raises(DivergenceError) as err:
        rk4_step(exploding, np.array([1.0]), 0.01)
    assert err.value.stage == 1


# ---------------------------------------------------------------------------
# Listening reservoir
# ---------------------------------------------------------------------------

def test_listening_zero_input_strength_stays_at_origin():
    params = small_params(sigma=0.0, rho=0.0)
    m = AdjacencyMatrix.from_array(np.zeros((30, 30)))
    w_in = generate_input_matrix(30, 2, 1)
    u = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    traj = drive_listening(m, w_in, params, u)
    assert np.all(traj.states == 0.0)


def test_listening_zero_w_in_stays_at_origin():
    params = small_params(rho=0.0)
    m = AdjacencyMatrix.from_array(np.zeros((30, 30)))
    w_in = np.zeros((30, 2))
    u = sample_signal(make_orbit("B", 5.0), 0.0, params.t_train, params.tau)
    traj = drive_listening(m, w_in, params, u)
    assert np.all(traj.states == 0.0)


def test_listening_row_count_and_grid():
    params = small_params()
    m = generate_erdos_renyi(30, 0.2, 4)
    w_in = generate_input_matrix(30, 2, 5)
    u = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    traj = drive_listening(m, w_in, params, u)
    assert traj.states.shape == (params.train_steps + 1, 30)
    assert traj.t0 == 0.0


def test_listening_streaming_matches_full_record():
    params = small_params()
    m = generate_erdos_renyi(30, 0.2, 4)
    w_in = generate_input_matrix(30, 2, 5)
    u = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    full = drive_listening(m, w_in, params, u)
    windowed = drive_listening(m, w_in, params, u, record_from=params.t_listen)
    assert windowed.states.shape[0] == params.train_steps - params.listen_steps + 1
    assert np.array_equal(windowed.states, full.states[params.listen_steps:])
    assert windowed.t0 == pytest.approx(params.t_listen)


def test_listening_bounded_and_deterministic():
    params = small_params(rho=1.4)
    m = generate_erdos_renyi(30, 0.2, 8)
    w_in = generate_input_matrix(30, 2, 9)
    u = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    one = drive_listening(m, w_in, params, u)
    two = drive_listening(m, w_in, params, u)
    assert np.array_equal(one.states, two.states)
    assert np.all(np.abs(one.states) < 1.0 + 1e-9)


def test_listening_batched_matches_single_bitwise():
    params = small_params(rho=1.2)
    m = generate_erdos_renyi(30, 0.2, 8)
    w_in = generate_input_matrix(30, 2, 9)
    u1 = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    u2 = sample_signal(make_orbit("B", 5.0), 0.0, params.t_train, params.tau)
    batched = drive_listening_multi(m, w_in, params, [u1, u2])
    assert np.array_equal(batched[0].states, drive_listening(m, w_in, params, u1).states)
    assert np.array_equal(batched[1].states, drive_listening(m, w_in, params, u2).states)


def test_listening_rejects_misaligned_signal():
    params = small_params()
    m = generate_erdos_renyi(30, 0.2, 4)
    w_in = generate_input_matrix(30, 2, 5)
    wrong_tau = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, 0.02)
    with pytest.raises(SignalAlignmentError):
        drive_listening(m, w_in, params, wrong_tau)
    too_short = sample_signal(make_orbit("A", 5.0), 0.0, params.t_listen, params.tau)
    with pytest.raises(SignalAlignmentError):
        drive_listening(m, w_in, params, too_short)


# ---------------------------------------------------------------------------
# Predicting reservoir
# ---------------------------------------------------------------------------

def test_prediction_zero_readout_outputs_zero():
    params = small_params(rho=0.9)
    m = generate_erdos_renyi(30, 0.2, 3)
    w_in = generate_input_matrix(30, 2, 7)
    trained = TrainedReservoir(
        m=m, w_in=w_in, w_out=np.zeros((2, 60)), params=params,
        seed_states=[("A", np.full(30, 0.4))])
    pred, states = run_prediction(trained, trained.seed_state("A"))
    assert np.all(pred.values == 0.0)
    assert not pred.diverged
    assert states is not None
    expected_rows = params.predict_end_steps - params.train_steps + 1
    assert pred.values.shape == (expected_rows, 2)
    assert states.states.shape == (expected_rows, 30)
    assert pred.t0 == pytest.approx(params.t_train)
