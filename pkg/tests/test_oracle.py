import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advgrad.oracle import (
    MIX_CHOICES,
    HardInstance1D,
    HardKind,
    OracleStrategy,
    Strategy,
    hard_eval,
    hard_grad,
    make_oracle,
    perturb_rows,
    reply,
    thm31_adversary_finalize,
)


@pytest.mark.parametrize(
    "kind, g, eps, expected",
    [
        (Strategy.EXACT, [3.0, 4.0], 1.0, [3.0, 4.0]),
        (Strategy.OPPOSING, [3.0, 4.0], 1.0, [2.4, 3.2]),
        (Strategy.AMPLIFYING, [3.0, 4.0], 1.0, [3.6, 4.8]),
        (Strategy.FIXED_DIRECTION, [0.0, 0.0], 0.5, [-0.5, 0.0]),
        (Strategy.ZERO_REPLY, [0.3, 0.4], 0.5, [0.0, 0.0]),
        # outside the epsilon ball the zero reply would be illegal, so it opposes instead
        (Strategy.ZERO_REPLY, [3.0, 4.0], 1.0, [2.4, 3.2]),
        (Strategy.OPPOSING, [0.0, 0.0], 1.0, [0.0, 0.0]),
        (Strategy.AMPLIFYING, [0.0, 0.0], 1.0, [0.0, 0.0]),
    ],
)
def test_reply_examples(kind, g, eps, expected):
    np.testing.assert_allclose(reply(OracleStrategy(kind, eps), np.array(g)), expected, atol=1e-15)


def test_fixed_direction_custom_axis():
    s = OracleStrategy(Strategy.FIXED_DIRECTION, 0.2, direction=[0.0, 1.0])
    np.testing.assert_allclose(reply(s, np.array([1.0, 1.0])), [1.0, 1.2])


def test_direction_must_be_unit():
    with pytest.raises(ValueError):
        OracleStrategy(Strategy.FIXED_DIRECTION, 0.1, direction=[1.0, 1.0])


def test_negative_epsilon_rejected():
    with pytest.raises(ValueError):
        OracleStrategy(Strategy.EXACT, -0.1)


def test_random_mix_needs_generator():
    with pytest.raises(ValueError):
        reply(OracleStrategy(Strategy.RANDOM_MIX, 0.1), np.ones(2))


def test_random_mix_covers_all_three_choices_uniformly():
    G = np.tile([3.0, 4.0], (30000, 1))
    out = perturb_rows(G, [Strategy.RANDOM_MIX] * len(G), 1.0, np.random.default_rng(0))
    targets = [reply(OracleStrategy(k, 1.0), G[0]) for k in MIX_CHOICES]
    counts = [int(np.all(np.isclose(out, t), axis=1).sum()) for t in targets]
    assert sum(counts) == len(G)
    for c in counts:
        assert abs(c - 10000) < 5 * np.sqrt(30000 * (1 / 3) * (2 / 3))


def test_make_oracle_is_seeded():
    grad = lambda w: 2 * w  # noqa: E731
    a = make_oracle(grad, OracleStrategy(Strategy.RANDOM_MIX, 0.3), seed=5)
    b = make_oracle(grad, OracleStrategy(Strategy.RANDOM_MIX, 0.3), seed=5)
    w = np.array([1.0, -2.0])
    assert [a(w).tobytes() for _ in range(20)] == [b(w).tobytes() for _ in range(20)]


@settings(max_examples=1000, deadline=None)
@given(
    kind=st.sampled_from(list(Strategy)),
    g=arrays(np.float64, st.integers(1, 6), elements=st.floats(-1e6, 1e6, allow_nan=False)),
    eps=st.floats(0, 1e3, allow_nan=False),
    seed=st.integers(0, 2**32 - 1),
)
def test_every_reply_is_legal(kind, g, eps, seed):
    v = reply(OracleStrategy(kind, eps), g, np.random.default_rng(seed))
    assert np.linalg.norm(v - g) <= eps + 1e-12 * max(1.0, np.linalg.norm(g))


@settings(max_examples=200, deadline=None)
@given(
    g=arrays(np.float64, 3, elements=st.floats(-100, 100, allow_nan=False)).filter(lambda g: np.linalg.norm(g) > 1e-6),
    eps=st.floats(1e-6, 10),
)
def test_opposing_and_amplifying_move_exactly_epsilon_along_gradient(g, eps):
    for kind, sign in ((Strategy.OPPOSING, -1), (Strategy.AMPLIFYING, 1)):
        v = reply(OracleStrategy(kind, eps), g)
        assert np.linalg.norm(v - g) == pytest.approx(eps, rel=1e-9)
        assert np.linalg.norm(v) == pytest.approx(abs(np.linalg.norm(g) + sign * eps), rel=1e-9, abs=1e-9)


# --- hard instances --------------------------------------------------------

F1 = HardInstance1D(1.0, 1.0, 1.0, HardKind.F1)
F2 = HardInstance1D(1.0, 1.0, 1.0, HardKind.F2)


@pytest.mark.parametrize(
    "inst, w, expected",
    [(F1, -1.0, 0.0), (F1, 0.0, 0.5), (F2, 1.0, 0.0), (F2, 0.0, 0.5), (F1, -3.0, 0.0), (F1, 2.0, 2.5)],
)
def test_hard_eval(inst, w, expected):
    assert hard_eval(inst, w) == expected


@pytest.mark.parametrize("w, expected", [(-2.0, 0.0), (-0.5, 0.5), (5.0, 1.0), (-1.0, 0.0), (0.0, 1.0)])
def test_hard_grad_f1(w, expected):
    assert hard_grad(F1, w) == expected


def test_f2_derivative_mirrors_f1():
    for w in np.linspace(-4, 4, 81):
        assert hard_grad(F2, w) == -hard_grad(F1, -w)


def test_hard_instance_hypotheses():
    for bad in [(0.5, 1.0, 0.5), (1.0, 0.5, 0.5), (1.0, 1.0, 0.0), (1.0, 1.0, 1.5)]:
        with pytest.raises(ValueError):
            HardInstance1D(*bad)
    with pytest.raises(ValueError):
        HardInstance1D(1.0, 1.0, which=HardKind.THM31)


PARAMS = [(R, L, e) for R in (1.0, 2.0, 3.5) for L in (1.0, 4.0) for e in (0.05, 0.5, 1.0)]


@pytest.mark.parametrize("R, L, eps", PARAMS)
def test_hard_instance_grid_properties(R, L, eps):
    grid = np.linspace(-3 * R - 2, 3 * R + 2, 4001)
    f1 = HardInstance1D(R, L, eps, HardKind.F1)
    f2 = HardInstance1D(R, L, eps, HardKind.F2)
    g1 = np.array([hard_grad(f1, w) for w in grid])
    g2 = np.array([hard_grad(f2, w) for w in grid])
    v1 = np.array([hard_eval(f1, w) for w in grid])
    v2 = np.array([hard_eval(f2, w) for w in grid])
    assert np.abs(g1).max() <= eps + 1e-12 and np.abs(g2).max() <= eps + 1e-12
    assert np.all(np.diff(v1) >= 0) and np.all(np.diff(v2) <= 0)
    # the zero reply is legal for both instances at every point
    assert np.all(np.abs(g1) <= eps) and np.all(np.abs(g2) <= eps)
    assert v1.min() == 0.0 and hard_eval(f1, -R) == 0.0 and hard_eval(f2, R) == 0.0


@settings(max_examples=300, deadline=None)
@given(
    R=st.floats(1, 10),
    L=st.floats(1, 10),
    eps=st.floats(1e-3, 1),
    x=st.floats(-30, 30),
    y=st.floats(-30, 30),
    which=st.sampled_from([HardKind.F1, HardKind.F2]),
)
def test_hard_instance_is_L_smooth(R, L, eps, x, y, which):
    inst = HardInstance1D(R, L, eps, which)
    assert abs(hard_grad(inst, x) - hard_grad(inst, y)) <= L * abs(x - y) * (1 + 1e-12) + 1e-15


@settings(max_examples=200, deadline=None)
@given(R=st.floats(1, 10), L=st.floats(1, 10), eps=st.floats(1e-3, 1), w=st.floats(-30, 30))
def test_hard_eval_is_continuous_and_matches_derivative(R, L, eps, w):
    inst = HardInstance1D(R, L, eps)
    h = 1e-6
    fd = (hard_eval(inst, w + h) - hard_eval(inst, w - h)) / (2 * h)
    # the derivative jumps nowhere, so the central difference is accurate everywhere
    assert fd == pytest.approx(hard_grad(inst, w), abs=L * h + 1e-7)


def test_hard_instance_as_objective():
    f = HardInstance1D(2.0, 1.0, 0.5, HardKind.F2)
    assert f.eval(np.array([0.0])) == hard_eval(f, 0.0)
    np.testing.assert_array_equal(f.grad(np.array([-1.0])), [hard_grad(f, -1.0)])
    assert f.minimizer == 2.0 and f.smoothness == 1.0 and f.d == 1


# --- the unbounded-minimizer adversary -------------------------------------


def test_finalize_example_two_queries():
    inst = thm31_adversary_finalize([0.0, 1.0], 0.0, 1.0, 1.0)
    assert inst.R == 4.0
    assert hard_eval(inst, 0.0) == 7.5


def test_finalize_clamps_R_at_zero():
    inst = thm31_adversary_finalize([10.0], 10.0, 1.0, 1.0)
    assert inst.R == 0.0
    assert hard_grad(inst, 10.0) == 3.0


def test_finalize_without_queries():
    inst = thm31_adversary_finalize([], -100.0, 0.5, 1.0)
    assert inst.R == 102.5


@settings(max_examples=200, deadline=None)
@given(
    queries=st.lists(st.floats(-1e3, 1e3), max_size=30),
    w_out=st.floats(-1e3, 1e3),
    tau=st.floats(1e-3, 10),
    L=st.floats(0.1, 10),
)
def test_finalize_certifies_gap(queries, w_out, tau, L):
    inst = thm31_adversary_finalize(queries, w_out, tau, L)
    for q in queries:
        assert hard_grad(inst, q) == 3 * tau
    assert hard_eval(inst, w_out) >= 3 * tau
    assert hard_eval(inst, -inst.R) == 0.0
