import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advgrad.losses import quadratic_aggregate
from advgrad.optimizer import (
    NonFiniteReplyError,
    OptimizerConfig,
    Termination,
    agp_opt,
    gd_gap_bound,
    k_schedule,
    finite_budget_gap_bound,
    plain_gd,
    suboptimality_gap,
)
from advgrad.oracle import OracleStrategy, Strategy, make_oracle


@pytest.mark.parametrize(
    "L, R, tau, eps, expected",
    [
        (2.0, 1.0, 0.5, 0.1, 5),
        (1.0, 1.0, 1.25, 0.0, 1),
        (4.0, 2.0, 0.1, 0.5, 4),
        (1.0, 1.0, 0.001, 0.0, 1250),
        (1.0, 3.0, 1.0, 0.01, 12),  # ceil(11.25) from the first branch
    ],
)
def test_k_schedule(L, R, tau, eps, expected):
    assert k_schedule(OptimizerConfig(L=L, epsilon=eps, R=R, tau=tau)) == expected


@pytest.mark.parametrize("tau", [0.0, -1.0])
def test_k_schedule_rejects_nonpositive_tau(tau):
    with pytest.raises(ValueError):
        k_schedule(OptimizerConfig(L=1, epsilon=0, R=1, tau=tau))


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(L=0, epsilon=0, R=1, tau=1)
    with pytest.raises(ValueError):
        OptimizerConfig(L=1, epsilon=-1, R=1, tau=1)
    cfg = OptimizerConfig(L=4, epsilon=0.1, R=1, tau=0.4)
    assert cfg.step == 0.125
    assert cfg.outside_guarantee
    assert not OptimizerConfig(L=4, epsilon=0.1, R=1, tau=0.5).outside_guarantee


def exact(f):
    return make_oracle(f.grad, OracleStrategy(Strategy.EXACT, 0.0))


def test_exact_descent_matches_closed_form():
    # one quadratic with scale = L: each step halves the distance to the center
    c = np.array([0.5, -0.25])
    f = quadratic_aggregate([c])
    run = plain_gd(f, exact(f), OptimizerConfig(L=1, epsilon=0, R=1, tau=1, K_override=30))
    for k, w in enumerate(run.iterates):
        np.testing.assert_allclose(w, c * (1 - 0.5**k), rtol=0, atol=1e-15)


def test_finite_budget_gap_at_zero_epsilon():
    f = quadratic_aggregate([[0.5, 0.0]])
    run = agp_opt(f, exact(f), OptimizerConfig(L=1, epsilon=0, R=0.5, tau=1, K_override=50))
    gap = suboptimality_gap(run, f, f.minimizer())
    assert gap <= 5 * 1 * 0.25 / (4 * 50)
    assert gap <= finite_budget_gap_bound(1.0, 0.0, 0.5, 50)


def test_zero_reply_stops_at_start():
    f = quadratic_aggregate([[0.1, 0.0]])
    oracle = lambda w: np.zeros(2)  # noqa: E731
    run = agp_opt(f, oracle, OptimizerConfig(L=1, epsilon=0.2, R=1, tau=1))
    assert run.terminated_by is Termination.EARLY_STOP
    assert run.K_prime == 0
    assert len(run.iterates) == 1 and len(run.replies) == 1
    np.testing.assert_array_equal(run.w_out, [0.0, 0.0])


def test_early_stop_uses_strict_inequality():
    f = quadratic_aggregate([[1.0]])
    # the reply always has norm exactly 4 eps, so the run must not stop
    run = agp_opt(f, lambda w: np.array([0.4]), OptimizerConfig(L=1, epsilon=0.1, R=1, tau=1, K_override=3))
    assert run.terminated_by is Termination.BUDGET_EXHAUSTED
    assert len(run.replies) == len(run.iterates) - 1 == 3


def test_plain_gd_equals_agp_at_zero_epsilon():
    rng = np.random.default_rng(0)
    f = quadratic_aggregate(rng.normal(size=(5, 3)), rng.uniform(0.5, 2, 5))
    cfg = OptimizerConfig(L=f.smoothness, epsilon=0.0, R=1, tau=0.01)
    a, b = agp_opt(f, exact(f), cfg), plain_gd(f, exact(f), cfg)
    assert a.iterates.tobytes() == b.iterates.tobytes()
    assert a.losses.tobytes() == b.losses.tobytes()


def test_zero_reply_freezes_iterates_inside_ball():
    f = quadratic_aggregate([[1.0, 0.0]])
    eps = 0.3
    oracle = make_oracle(f.grad, OracleStrategy(Strategy.ZERO_REPLY, eps))
    run = plain_gd(f, oracle, OptimizerConfig(L=1, epsilon=eps, R=1, tau=1, K_override=10, w0=np.array([0.75, 0.0])))
    assert np.all(run.iterates == [0.75, 0.0])


def test_zero_reply_outside_ball_approaches_its_boundary():
    # outside the ball the reply opposes, so the true gradient norm decreases towards eps
    f = quadratic_aggregate([[1.0, 0.0]])
    eps = 0.3
    run = plain_gd(f, make_oracle(f.grad, OracleStrategy(Strategy.ZERO_REPLY, eps)),
                   OptimizerConfig(L=1, epsilon=eps, R=1, tau=1, K_override=40))
    gn = np.linalg.norm([f.grad(w) for w in run.iterates], axis=1)
    assert np.all(np.diff(gn) < 0) and np.all(gn > eps)
    assert gn[-1] == pytest.approx(eps, abs=1e-9)


def test_non_finite_reply_reports_iteration():
    f = quadratic_aggregate([[1.0]])
    calls = []

    def oracle(w):
        calls.append(1)
        return np.array([np.nan]) if len(calls) == 3 else f.grad(w)

    with pytest.raises(NonFiniteReplyError) as info:
        plain_gd(f, oracle, OptimizerConfig(L=1, epsilon=0, R=1, tau=1, K_override=10))
    assert info.value.iteration == 2


def test_illegal_reply_is_caught_when_truth_is_known():
    f = quadratic_aggregate([[1.0]])
    with pytest.raises(AssertionError):
        agp_opt(f, lambda w: f.grad(w) + 1.0, OptimizerConfig(L=1, epsilon=0.5, R=1, tau=5, K_override=2),
                true_grad=f.grad)


def test_stream_recording_keeps_losses():
    rng = np.random.default_rng(2)
    f = quadratic_aggregate(rng.normal(size=(4, 2)))
    cfg = OptimizerConfig(L=1, epsilon=0.0, R=1, tau=1, K_override=25)
    full = plain_gd(f, exact(f), cfg)
    stream = plain_gd(f, exact(f), cfg, record="stream")
    assert stream.losses.tobytes() == full.losses.tobytes()
    assert stream.iterates.shape == (1, 2)
    np.testing.assert_array_equal(stream.w_out, full.w_out)


def test_run_without_objective_needs_start():
    with pytest.raises(ValueError):
        agp_opt(None, lambda w: w, OptimizerConfig(L=1, epsilon=0, R=1, tau=1))
    run = agp_opt(None, lambda w: np.ones(1), OptimizerConfig(L=1, epsilon=0, R=1, tau=1, K_override=2,
                                                               w0=np.array([3.0])))
    assert len(run.losses) == 0
    np.testing.assert_array_equal(run.w_out, [2.0])


def test_gap_requires_minimizer():
    f = quadratic_aggregate([[1.0]])
    run = plain_gd(f, exact(f), OptimizerConfig(L=1, epsilon=0, R=1, tau=1, K_override=60))
    assert suboptimality_gap(run, f, np.array([1.0])) == pytest.approx(0.0, abs=1e-30)
    with pytest.raises(ValueError):
        suboptimality_gap(run, f, None)
    with pytest.raises(ValueError):
        suboptimality_gap(run, f, np.array([5.0]))


def test_bound_helpers():
    assert finite_budget_gap_bound(1.0, 0.1, 2.0, 10) == pytest.approx(0.2 + max(0.8, 0.4))
    assert gd_gap_bound(0.1, 2.0, 3.0) == pytest.approx(1.0 + 0.75)


STRATS = [Strategy.EXACT, Strategy.OPPOSING, Strategy.AMPLIFYING, Strategy.FIXED_DIRECTION, Strategy.RANDOM_MIX]


@settings(max_examples=80, deadline=None)
@given(
    n=st.integers(1, 12),
    d=st.integers(1, 5),
    seed=st.integers(0, 2**31),
    eps=st.floats(0.0, 0.2),
    kind=st.sampled_from(STRATS),
    K=st.integers(1, 200),
)
def test_finite_budget_bounds_hold_for_any_budget(n, d, seed, eps, kind, K):
    """Gap, descent and drift bounds on quadratic aggregates for any budget K."""
    rng = np.random.default_rng(seed)
    f = quadratic_aggregate(rng.normal(size=(n, d)) + rng.normal(size=d), rng.uniform(0.5, 2.0, n))
    w_star = f.minimizer()
    wn = float(np.linalg.norm(w_star))
    cfg = OptimizerConfig(L=f.smoothness, epsilon=eps, R=max(wn, 1e-3), tau=1.0, K_override=K)
    run = agp_opt(f, make_oracle(f.grad, OracleStrategy(kind, eps), seed), cfg, true_grad=f.grad)

    gap = suboptimality_gap(run, f, w_star)
    assert gap <= finite_budget_gap_bound(cfg.L, eps, wn, K) + 1e-9

    # strict descent is only observable while the step is above rounding level
    steps = len(run.iterates) - 1
    big = run.reply_norms[:steps] >= max(4 * eps, 1e-6)
    assert np.all(run.losses[1:][big] < run.losses[:-1][big])

    dist = np.linalg.norm(run.iterates - w_star, axis=1)
    assert np.all(np.diff(dist) <= eps / (2 * cfg.L) + 1e-12)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 10), d=st.integers(1, 4), seed=st.integers(0, 2**31),
       eps=st.floats(1e-4, 0.2), kind=st.sampled_from(STRATS))
def test_scheduled_runs_meet_target_and_norm_bound(n, d, seed, eps, kind):
    rng = np.random.default_rng(seed)
    f = quadratic_aggregate(rng.normal(size=(n, d)) + 2 * rng.normal(size=d), rng.uniform(0.5, 2.0, n))
    w_star = f.minimizer()
    R = float(np.linalg.norm(w_star))
    cfg = OptimizerConfig(L=f.smoothness, epsilon=eps, R=R, tau=5 * eps * R)
    run = agp_opt(f, make_oracle(f.grad, OracleStrategy(kind, eps), seed), cfg)
    assert suboptimality_gap(run, f, w_star) <= cfg.tau + 1e-9
    assert np.linalg.norm(run.iterates, axis=1).max() <= 17 / 8 * R + 1e-9
    gd = plain_gd(f, make_oracle(f.grad, OracleStrategy(kind, eps), seed), cfg)
    assert suboptimality_gap(gd, f, w_star) <= gd_gap_bound(eps, R, R) + 1e-9


def test_same_seed_same_run():
    rng = np.random.default_rng(9)
    f = quadratic_aggregate(rng.normal(size=(6, 3)))
    cfg = OptimizerConfig(L=1, epsilon=0.05, R=1, tau=0.01, K_override=100)
    runs = [plain_gd(f, make_oracle(f.grad, OracleStrategy(Strategy.RANDOM_MIX, 0.05), 4), cfg) for _ in range(2)]
    assert runs[0].iterates.tobytes() == runs[1].iterates.tobytes()
    assert runs[0].replies.tobytes() == runs[1].replies.tobytes()


def test_k_prime_counts_completed_steps():
    f = quadratic_aggregate([[1.0]])
    run = agp_opt(f, exact(f), OptimizerConfig(L=1, epsilon=0.01, R=1, tau=0.05))
    assert run.terminated_by is Termination.EARLY_STOP
    assert run.K_prime == len(run.iterates) - 1
    # the final reply is the one that triggered the stop
    assert run.reply_norms[-1] < 0.04 <= run.reply_norms[:-1].min()
    assert run.K_prime <= math.ceil(min(5 / (4 * 0.05), 1 / (4 * 0.01)))
