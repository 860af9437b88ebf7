import math

import numpy as np
import pytest

from oscfie import (
    GradeSpec,
    GradeStack,
    QuadratureSpec,
    SystemParams,
    TrainConfig,
    TrainingDivergedError,
    apply_discrete_operator,
    batch_loss_and_grad,
    build_M,
    complexify,
    compose_solution,
    eval_polyexp,
    forward,
    grade_components,
    init_he,
    inv_norm,
    seminorm,
    sup_quad_error,
    train_grade,
    train_multi_grade,
    train_single_grade,
    validation_loss,
)
from oscfie.harness.problem import (
    benchmark_oscillatory_sum,
    benchmark_terms,
    gen_training_grid,
    gen_validation_grid,
    relative_L2_error,
)
from oscfie.single_grade import full_loss, net_evaluator


@pytest.fixture(scope="module")
def small():
    kappa = 5.0
    params = SystemParams(0.2, kappa)
    M = build_M(params)
    terms = benchmark_terms(kappa)
    _, f = gen_training_grid(params, terms)
    val = gen_validation_grid(terms, 0.2, kappa)
    return params, M, terms, f, val


# objective ----------------------------------------------------------------

def test_full_batch_loss_equals_discrete_operator_residual(small):
    params, M, _, f, _ = small
    net = init_he([1, 8, 8, 2], 0)
    loss, _ = batch_loss_and_grad(net, M, f, np.arange(params.N), 0.0)
    v = complexify(forward(net, params.nodes)[0])
    direct = seminorm(f - apply_discrete_operator(v, params)) ** 2
    assert loss == pytest.approx(direct, rel=1e-12)


def test_synthetic_rhs_gives_zero_loss_and_gradient(small):
    params, M, _, _, _ = small
    net = init_he([1, 8, 2], 1)
    v_f = M @ complexify(forward(net, params.nodes)[0])
    loss, g = batch_loss_and_grad(net, M, v_f, np.arange(0, params.N, 3), 0.0)
    assert loss < 1e-28
    assert max(np.max(np.abs(d)) for d in g.dW) < 1e-13


def test_regulariser_only_when_residual_vanishes(small):
    params, M, _, _, _ = small
    net = init_he([1, 8, 2], 1)
    v_f = M @ complexify(forward(net, params.nodes)[0])
    loss, _ = batch_loss_and_grad(net, M, v_f, np.arange(params.N), 1e-3)
    assert loss == pytest.approx(1e-3 * sum(np.sum(W**2) for W in net.weights), rel=1e-10)


def test_batch_gradient_matches_finite_differences(small):
    params, M, _, f, _ = small
    net = init_he([1, 6, 6, 2], 2)
    rows = np.array([0, 4, 9, 17, 30])
    mu = 1e-3
    _, g = batch_loss_and_grad(net, M, f, rows, mu)
    rng = np.random.default_rng(0)
    for _ in range(15):
        j = int(rng.integers(0, net.n_layers))
        idx = tuple(int(rng.integers(0, n)) for n in net.weights[j].shape)
        old = net.weights[j][idx]
        net.weights[j][idx] = old + 1e-6
        up = batch_loss_and_grad(net, M, f, rows, mu)[0]
        net.weights[j][idx] = old - 1e-6
        dn = batch_loss_and_grad(net, M, f, rows, mu)[0]
        net.weights[j][idx] = old
        fd = (up - dn) / 2e-6
        assert abs(fd - g.dW[j][idx]) <= 1e-5 * max(1.0, abs(fd))


def test_batch_loss_errors(small):
    params, M, _, f, _ = small
    net = init_he([1, 4, 2], 0)
    with pytest.raises(ValueError):
        batch_loss_and_grad(net, M, f, np.array([], dtype=int))
    with pytest.raises(IndexError):
        batch_loss_and_grad(net, M, f, np.array([params.N]))
    with pytest.raises(ValueError):
        batch_loss_and_grad(net, M, f[:-1], np.array([0]))


# config ----------------------------------------------------------------------

@pytest.mark.parametrize("kw", [{"epochs": 0}, {"epochs": 5, "batch_size": 0}, {"epochs": 5, "mu": -1},
                                {"epochs": 5, "lr0": 1e-7, "lrF": 1e-2}, {"epochs": 5, "lrF": 0}])
def test_train_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_zero_width_hidden_layer_rejected():
    with pytest.raises(ValueError):
        init_he([1, 0, 2], 0)


# validation loss ---------------------------------------------------------------

def test_validation_loss_exact_solution_bounded(small):
    params, _, terms, _, (pts, fv) = small
    Y = lambda t: eval_polyexp(terms, t)  # noqa: E731
    chi = benchmark_oscillatory_sum(params.kappa)
    qerr = sup_quad_error(chi, params.spec, np.union1d(pts, np.linspace(-1, 1, 201)))
    assert validation_loss(Y, params, pts, fv) <= (abs(params.lam) * qerr) ** 2


def test_validation_loss_trivial_cases(small):
    params, _, _, _, (pts, fv) = small
    zero = lambda t: np.zeros(np.shape(t), dtype=complex)  # noqa: E731
    assert validation_loss(zero, params, pts, fv) == pytest.approx(np.mean(np.abs(fv) ** 2))
    assert validation_loss(zero, params, pts, np.zeros_like(fv)) == 0


# single-grade training ------------------------------------------------------------

def test_training_is_deterministic(small):
    params, M, _, f, val = small
    runs = []
    for _ in range(2):
        net = init_he([1, 8, 8, 2], 3)
        net, hist = train_single_grade(net, M, f, TrainConfig(20, 8, 1e-5, seed=4), val)
        runs.append((net, hist))
    assert runs[0][1].train_loss == runs[1][1].train_loss
    for a, b in zip(runs[0][0].weights, runs[1][0].weights):
        assert np.array_equal(a, b)


def test_history_records(small, tmp_path):
    params, M, _, f, val = small
    net = init_he([1, 8, 2], 0)
    _, hist = train_single_grade(net, M, f, TrainConfig(7, 16, seed=0), val)
    assert len(hist) == 7 and hist.epoch == list(range(7))
    assert all(math.isfinite(v) and v >= 0 for v in hist.train_loss + hist.val_loss)
    assert hist.lr[0] == 1e-2 and hist.lr[-1] == pytest.approx(1e-7)
    assert hist.best_val_epoch in range(7)
    hist.to_csv(tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "epoch,train_loss,val_loss,lr,seconds"


def test_divergence_guard(small):
    params, M, _, f, _ = small
    net = init_he([1, 4, 2], 0)
    net.weights[0][0, 0] = np.nan
    with pytest.raises(TrainingDivergedError, match="non-finite"):
        train_single_grade(net, M, f, TrainConfig(2, 8))


def test_rejects_multi_input_net(small):
    _, M, _, f, _ = small
    with pytest.raises(ValueError):
        train_single_grade(init_he([2, 4, 2], 0), M, f, TrainConfig(1))


@pytest.fixture(scope="module")
def trained_k20():
    kappa = 20.0
    params = SystemParams(0.2, kappa)
    M = build_M(params)
    terms = benchmark_terms(kappa)
    _, f = gen_training_grid(params, terms)
    net = init_he([1, 64, 64, 2], 0)
    net, hist = train_single_grade(net, M, f, TrainConfig(2000, 64, 0.0, seed=0))
    return params, M, terms, f, net, hist


def test_desk_training_kappa20_accuracy(trained_k20):
    _, _, terms, _, net, _ = trained_k20
    assert relative_L2_error(net_evaluator(net), terms) < 5e-2


def test_training_loss_trend(trained_k20):
    hist = trained_k20[5]
    loss = np.array(hist.train_loss)
    assert loss[-100:].mean() < loss[100]


def test_error_decomposition_after_training(trained_k20):
    params, M, terms, f, net, _ = trained_k20
    v = net_evaluator(net)(params.nodes)
    lhs = seminorm(eval_polyexp(terms, params.nodes) - v)
    chi = benchmark_oscillatory_sum(params.kappa)
    qerr = sup_quad_error(chi, params.spec, np.union1d(np.linspace(-1, 1, 201), params.nodes))
    rhs = inv_norm(M) * (seminorm(f - M @ v) + abs(params.lam) * qerr)
    assert lhs <= rhs + 1e-9


# multi-grade ---------------------------------------------------------------------

def test_one_grade_stack_matches_single_grade_bitwise(small):
    params, M, _, f, val = small
    cfg = TrainConfig(15, 8, 1e-6, seed=9)
    net_a, hist_a = train_single_grade(init_he([1, 8, 8, 2], 9), M, f, cfg, val)
    stack, hists = train_multi_grade(GradeSpec(((8, 8),), (15,)), M, f,
                                     TrainConfig(1, 8, 1e-6, seed=9), val)
    assert hist_a.train_loss == hists[0].train_loss
    assert hist_a.val_loss == hists[0].val_loss
    for a, b in zip(net_a.weights + net_a.biases, stack.grades[0].weights + stack.grades[0].biases):
        assert np.array_equal(a, b)


def test_zero_target_does_not_increase_loss(small):
    params, M, _, f, _ = small
    stack = GradeStack.start(M, np.zeros(params.N, dtype=complex))
    net = init_he([1, 6, 2], 0)
    initial = full_loss(net, M, np.zeros(params.N))
    stack, hist = train_grade(stack, net, M, TrainConfig(30, 8, seed=0))
    assert hist.train_loss[-1] <= initial


@pytest.fixture(scope="module")
def three_grades(small):
    params, M, terms, f, val = small
    spec = GradeSpec(((16, 16), (8, 8), (8, 8)), (60, 60, 60))
    snapshots = []
    stack, hists = train_multi_grade(spec, M, f, TrainConfig(1, 8, 0.0, seed=0), val,
                                     callback=lambda g, s, h: snapshots.append(
                                         [(W.copy(), b.copy()) for net in s.grades for W, b in
                                          zip(net.weights, net.biases)]))
    return params, M, terms, f, stack, hists, snapshots


def test_frozen_parameters_untouched(three_grades):
    *_, stack, _, snapshots = three_grades
    # parameters of grade 1 after grade 1 finished equal those after grade 3
    n1 = stack.grades[0].n_layers
    for (W0, b0), (W1, b1) in zip(snapshots[0][:n1], snapshots[-1][:n1]):
        assert np.array_equal(W0, W1) and np.array_equal(b0, b1)
    assert all(not any(net.trainable) for net in stack.grades)


def test_residual_telescoping(three_grades):
    params, M, _, f, stack, _, _ = three_grades
    composed = compose_solution(stack, params.nodes)
    assert np.max(np.abs((f - M @ composed) - stack.target)) <= 1e-10
    assert np.max(np.abs(composed - stack.node_solution)) <= 1e-13


def test_composition_additivity(three_grades):
    *_, stack, _, _ = three_grades
    grid = np.linspace(-1, 1, 257)
    comps = grade_components(stack, grid)
    assert len(comps) == 3
    np.testing.assert_allclose(sum(comps), compose_solution(stack, grid), atol=1e-13)
    assert all(c.size == 0 for c in grade_components(stack, []))


def test_single_grade_composition(three_grades):
    params, *_ , stack, _, _ = three_grades
    one = GradeStack(stack.nodes, stack.residuals[:2], stack.grades[:1])
    t = np.linspace(-1, 1, 9)
    np.testing.assert_array_equal(compose_solution(one, t), complexify(forward(stack.grades[0], t)[0]))


def test_zero_head_adds_nothing(three_grades):
    *_, stack, _, _ = three_grades
    two = GradeStack(stack.nodes, stack.residuals[:3], [stack.grades[0], stack.grades[1].copy()])
    two.grades[1].weights[-1][:] = 0
    two.grades[1].biases[-1][:] = 0
    one = GradeStack(stack.nodes, stack.residuals[:2], stack.grades[:1])
    t = np.linspace(-1, 1, 33)
    np.testing.assert_allclose(compose_solution(two, t), compose_solution(one, t), atol=0)


def test_grade_input_width_checked(small):
    params, M, _, f, _ = small
    stack = GradeStack.start(M, f)
    with pytest.raises(ValueError):
        train_grade(stack, init_he([4, 4, 2], 0), M, TrainConfig(1))
    with pytest.raises(ValueError):
        GradeStack.start(M, f[:-1])


def test_grade_spec_validation():
    with pytest.raises(ValueError):
        GradeSpec(((8,), (4,)), (10,))
    with pytest.raises(ValueError):
        GradeSpec((), ())
    spec = GradeSpec(((8, 8), (4,)), (10, 20), ({"mu": 1e-6}, {"batch_size": 32}))
    assert spec.dims(1) == [8, 4, 2]
    assert spec.config(1, TrainConfig(1)).batch_size == 32
    assert spec.config(0, TrainConfig(1)).epochs == 10
    assert compose_solution is not None
    with pytest.raises(ValueError):
        compose_solution(GradeStack(np.zeros(3), [np.zeros(3)]), 0.0)
