import numpy as np
import pytest

from mfrc.dynamics import ReservoirParams, ReservoirTrajectory
from mfrc.errors import ShapeMismatchError, SingularSystemError, WindowError
from mfrc.tasks import PERIOD, make_orbit, sample_signal
from mfrc.topology import generate_erdos_renyi, generate_input_matrix
from mfrc.training import (
    apply_q,
    blend,
    harvest,
    load_trained,
    ridge_regression,
    save_trained,
    train_multifunctional,
)


def small_params(**overrides):
    defaults = dict(n=24, gamma=5.0, sigma=0.2, rho=1.0, beta=0.01,
                    t_listen=1 * PERIOD, t_train=3 * PERIOD, t_predict_end=5 * PERIOD)
    defaults.update(overrides)
    return ReservoirParams(**defaults)


# ---------------------------------------------------------------------------
# apply_q
# ---------------------------------------------------------------------------

def test_apply_q_zero():
    assert np.array_equal(apply_q(np.array([0.0, 0.0])), [0.0, 0.0, 0.0, 0.0])


def test_apply_q_squares_kill_sign():
    assert np.array_equal(apply_q(np.array([1.0, -1.0])), [1.0, -1.0, 1.0, 1.0])


def test_apply_q_single():
    assert np.array_equal(apply_q(np.array([0.5])), [0.5, 0.25])


def test_apply_q_matrix_rows():
    r = np.array([[0.5, -0.5], [2.0, 3.0]])
    q = apply_q(r)
    assert q.shape == (4, 2)
    assert np.array_equal(q[2:], r * r)


# ---------------------------------------------------------------------------
# harvest
# ---------------------------------------------------------------------------

def make_params_and_signal(params):
    signal = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    return signal


def test_harvest_column_count_formula():
    # 6T -> 15T at tau = 0.01 gives 1 + round(9 * 2pi / 0.01) columns.
    params = ReservoirParams(n=4, gamma=5.0, sigma=0.2, rho=1.0, beta=0.01)
    steps = params.train_steps
    states = np.zeros((steps + 1, 4))
    traj = ReservoirTrajectory(states=states, t0=0.0, tau=params.tau)
    signal = make_params_and_signal(params)
    x, y = harvest(traj, signal, params)
    expected_cols = 1 + round(9 * 2 * np.pi / 0.01)
    assert x.shape == (8, expected_cols)
    assert y.shape == (2, expected_cols)


def test_harvest_includes_both_endpoints():
    # Minimal window [0, tau]: both boundary columns are harvested.
    params = small_params(t_listen=0.0, t_train=0.01, t_predict_end=0.02, tau=0.01)
    states = np.arange(2 * 24, dtype=float).reshape(2, 24) / 100.0
    traj = ReservoirTrajectory(states=states, t0=0.0, tau=0.01)
    signal = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    x, y = harvest(traj, signal, params)
    assert x.shape[1] == 2
    assert np.array_equal(x[:24, 0], states[0])
    assert np.array_equal(x[:24, 1], states[1])
    # rows n..2n-1 are the squares of rows 0..n-1
    assert np.array_equal(x[24:], x[:24] ** 2)
    assert np.array_equal(y[:, 0], signal.samples[0])


def test_harvest_zero_trajectory_gives_zero_features():
    params = small_params()
    states = np.zeros((params.train_steps + 1, 24))
    traj = ReservoirTrajectory(states=states, t0=0.0, tau=params.tau)
    signal = make_params_and_signal(params)
    x, _ = harvest(traj, signal, params)
    assert np.all(x == 0.0)


def test_harvest_requires_window_coverage():
    params = small_params()
    short = ReservoirTrajectory(states=np.zeros((10, 24)), t0=0.0, tau=params.tau)
    signal = make_params_and_signal(params)
    with pytest.raises(WindowError):
        harvest(short, signal, params)


# ---------------------------------------------------------------------------
# blend
# ---------------------------------------------------------------------------

def test_blend_concatenates_in_order():
    x1 = np.ones((4, 3))
    x2 = np.full((4, 2), 2.0)
    y1 = np.ones((2, 3))
    y2 = np.full((2, 2), 2.0)
    x, y = blend(x1, x2, y1, y2)
    assert x.shape == (4, 5)
    assert np.array_equal(x[:, :3], x1)
    assert np.array_equal(y[:, 3:], y2)


def test_blend_duplication_preserves_readout():
    # Training on (X, Y) twice duplicates both Gram terms, so beta = 0
    # regression is unchanged.
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 40))
    y = rng.standard_normal((2, 40))
    w_single = ridge_regression(x, y, 0.0)
    xx, yy = blend(x, x, y, y)
    w_double = ridge_regression(xx, yy, 0.0)
    assert np.allclose(w_single, w_double, atol=1e-10)


def test_blend_rejects_empty():
    with pytest.raises(ShapeMismatchError):
        blend(np.ones((4, 0)), np.ones((4, 2)), np.ones((2, 0)), np.ones((2, 2)))


def test_blend_rejects_mismatched_rows():
    with pytest.raises(ShapeMismatchError):
        blend(np.ones((4, 2)), np.ones((6, 2)), np.ones((2, 2)), np.ones((2, 2)))


# ---------------------------------------------------------------------------
# ridge regression
# ---------------------------------------------------------------------------

def test_ridge_identity_beta_zero():
    x = np.eye(2)
    y = np.eye(2)
    assert np.allclose(ridge_regression(x, y, 0.0), np.eye(2))


def test_ridge_identity_beta_one_halves():
    x = np.eye(2)
    y = np.eye(2)
    assert np.allclose(ridge_regression(x, y, 1.0), 0.5 * np.eye(2))


def test_ridge_matches_explicit_inverse_oracle():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((10, 40))
    y = rng.standard_normal((2, 40))
    beta = 0.01
    oracle = y @ x.T @ np.linalg.inv(x @ x.T + beta * np.eye(10))
    w = ridge_regression(x, y, beta)
    assert np.allclose(w, oracle, rtol=1e-8, atol=1e-12)


def test_ridge_singular_at_beta_zero_raises():
    x = np.zeros((4, 10))
    y = np.ones((2, 10))
    with pytest.raises(SingularSystemError):
        ridge_regression(x, y, 0.0)


def test_ridge_never_fails_with_positive_beta():
    x = np.zeros((4, 10))
    y = np.ones((2, 10))
    w = ridge_regression(x, y, 0.5)
    assert np.all(np.isfinite(w))
    assert np.allclose(w, 0.0)


# ---------------------------------------------------------------------------
# train_multifunctional
# ---------------------------------------------------------------------------

def test_training_same_signal_equals_duplication():
    # Duplicating the training run doubles both Gram terms, so u1 = u2 with
    # regularization 2*beta solves the same system as one run with beta.
    # (Reservoir features driven by a clean circle are near rank-deficient,
    # so the bare beta = 0 comparison is numerically indeterminate.)
    params = small_params(beta=0.02)
    m = generate_erdos_renyi(24, 0.2, 6)
    w_in = generate_input_matrix(24, 2, 7)
    u = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    trained = train_multifunctional(m, w_in, params, u, u)
    from mfrc.dynamics import drive_listening
    from mfrc.training import harvest as harvest_fn, ridge_regression as ridge_fn
    traj = drive_listening(m, w_in, params, u, record_from=params.t_listen)
    x, y = harvest_fn(traj, u, params)
    w_single = ridge_fn(x, y, 0.01)
    assert np.allclose(trained.w_out, w_single, atol=1e-10)


def test_training_swap_invariance():
    # Swapping the two signals permutes blended columns, which leaves the
    # Gram matrices and therefore the readout unchanged.
    params = small_params()
    m = generate_erdos_renyi(24, 0.2, 16)
    w_in = generate_input_matrix(24, 2, 17)
    u1 = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    u2 = sample_signal(make_orbit("B", 5.0), 0.0, params.t_train, params.tau)
    forward = train_multifunctional(m, w_in, params, u1, u2)
    swapped = train_multifunctional(m, w_in, params, u2, u1)
    assert np.allclose(forward.w_out, swapped.w_out, atol=1e-10)
    assert np.array_equal(forward.seed_state("A"), swapped.seed_state("A"))
    assert np.array_equal(forward.seed_state("B"), swapped.seed_state("B"))


def test_training_records_seed_states():
    params = small_params()
    m = generate_erdos_renyi(24, 0.2, 26)
    w_in = generate_input_matrix(24, 2, 27)
    u1 = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    u2 = sample_signal(make_orbit("B", 5.0), 0.0, params.t_train, params.tau)
    trained = train_multifunctional(m, w_in, params, u1, u2)
    assert {label for label, _ in trained.seed_states} == {"A", "B"}
    assert trained.seed_state("A").shape == (24,)
    assert trained.w_out.shape == (2, 48)


def test_trained_round_trip_is_exact(tmp_path):
    params = small_params()
    m = generate_erdos_renyi(24, 0.2, 36)
    w_in = generate_input_matrix(24, 2, 37)
    u1 = sample_signal(make_orbit("A", 5.0), 0.0, params.t_train, params.tau)
    u2 = sample_signal(make_orbit("B", 5.0), 0.0, params.t_train, params.tau)
    trained = train_multifunctional(m, w_in, params, u1, u2)
    save_trained(trained, tmp_path / "trained")
    loaded = load_trained(tmp_path / "trained")
    assert np.array_equal(loaded.w_out, trained.w_out)
    assert np.array_equal(loaded.w_in, trained.w_in)
    assert np.array_equal(loaded.m.toarray(), trained.m.toarray())
    assert np.array_equal(loaded.seed_state("A"), trained.seed_state("A"))
    assert np.array_equal(loaded.seed_state("B"), trained.seed_state("B"))
    assert loaded.params == trained.params
