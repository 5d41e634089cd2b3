"""Network engine: gradients against finite differences, layout, checkpoints."""

from __future__ import annotations

import numpy as np
import pytest

from orthograd.net import (
    Batch, NetworkSpec, ParamVector, apply_update, evaluate_accuracy, forward,
    init_params, load_checkpoint, mean_loss_and_grad, per_sample_grads,
    pretrain, save_checkpoint,
)


def finite_difference_grad(params: ParamVector, batch: Batch, eps: float = 1e-5) -> np.ndarray:
    """Independent oracle: central differences on the mean loss, coordinate-wise."""
    grad = np.empty(params.dim)
    base = params.flat
    for i in range(params.dim):
        bumped = base.copy()
        bumped[i] += eps
        lp, _ = mean_loss_and_grad(ParamVector(bumped, params.spec), batch)
        bumped[i] = base[i] - eps
        lm, _ = mean_loss_and_grad(ParamVector(bumped, params.spec), batch)
        grad[i] = (lp - lm) / (2.0 * eps)
    return grad


def random_batch(spec: NetworkSpec, k: int, seed: int) -> Batch:
    rng = np.random.default_rng(seed)
    return Batch(rng.normal(size=(k, spec.in_dim)),
                 rng.integers(0, spec.n_classes, size=k))


def test_param_dim_arithmetic():
    assert NetworkSpec((3, 4, 2)).param_dim == 3 * 4 + 4 + 4 * 2 + 2
    assert NetworkSpec((20, 64, 10)).param_dim == 20 * 64 + 64 + 64 * 10 + 10
    spec = NetworkSpec((5, 7, 6, 3))
    offsets = [slot[0] for slot in spec.layout()]
    assert offsets == sorted(offsets)
    total = sum(w[0] * w[1] + b[0] for _, w, _, b in spec.layout())
    assert total == spec.param_dim


def test_spec_validation():
    with pytest.raises(ValueError):
        NetworkSpec((4,))
    with pytest.raises(ValueError):
        NetworkSpec((4, 0, 2))
    with pytest.raises(ValueError):
        NetworkSpec((4, 3), activation="sigmoid")


def test_init_params_statistics_and_determinism():
    spec = NetworkSpec((1000, 1000), activation="relu")
    p = init_params(spec, seed=0)
    w = p.weights(0)
    assert abs(float(w.var()) - 0.002) <= 0.1 * 0.002  # 2 / fan_in
    assert np.all(p.biases(0) == 0.0)
    q = init_params(spec, seed=0)
    assert np.array_equal(p.flat, q.flat)
    r = init_params(spec, seed=1)
    assert not np.array_equal(p.flat, r.flat)

    tanh_spec = NetworkSpec((500, 200), activation="tanh")
    tw = init_params(tanh_spec, seed=2).weights(0)
    assert abs(float(tw.var()) - 1.0 / 500) <= 0.1 / 500


@pytest.mark.parametrize("sizes,activation,seed", [
    ((3, 4, 2), "tanh", 0),
    ((3, 4, 2), "relu", 1),
    ((5, 7, 6, 3), "tanh", 2),
])
def test_mean_grad_matches_finite_differences(sizes, activation, seed):
    spec = NetworkSpec(sizes, activation)
    params = init_params(spec, seed)
    batch = random_batch(spec, 6, seed + 100)
    _, analytic = mean_loss_and_grad(params, batch)
    fd = finite_difference_grad(params, batch)
    rel = np.abs(analytic - fd) / np.maximum(1.0, np.abs(analytic))
    assert rel.max() <= 1e-5


def test_per_sample_columns_average_to_mean_grad():
    spec = NetworkSpec((6, 12, 4), "relu")
    params = init_params(spec, 3)
    for k in (1, 2, 17, 64):
        batch = random_batch(spec, k, 50 + k)
        _, mean_grad = mean_loss_and_grad(params, batch)
        cols = per_sample_grads(params, batch)
        assert cols.shape == (spec.param_dim, k)
        gap = np.abs(cols.mean(axis=1) - mean_grad)
        assert gap.max() <= 1e-12 * max(1.0, float(np.abs(mean_grad).max()))


def test_per_sample_column_is_single_sample_gradient():
    spec = NetworkSpec((4, 5, 3), "tanh")
    params = init_params(spec, 9)
    batch = random_batch(spec, 5, 77)
    cols = per_sample_grads(params, batch)
    for i in range(batch.size):
        single = Batch(batch.inputs[i:i + 1], batch.labels[i:i + 1])
        _, g = mean_loss_and_grad(params, single)
        assert np.abs(cols[:, i] - g).max() <= 1e-12


def test_zero_params_loss_is_ln_c_exactly():
    spec = NetworkSpec((5, 3), "relu")
    zero = ParamVector(np.zeros(spec.param_dim), spec)
    for k in (1, 2, 4, 8):
        batch = random_batch(spec, k, k)
        loss, _ = mean_loss_and_grad(zero, batch)
        assert loss == float(np.log(3.0))


def test_loss_invariant_under_batch_duplication():
    spec = NetworkSpec((4, 6, 3), "tanh")
    params = init_params(spec, 21)
    batch = random_batch(spec, 9, 22)
    doubled = Batch(np.vstack([batch.inputs, batch.inputs]),
                    np.concatenate([batch.labels, batch.labels]))
    l1, g1 = mean_loss_and_grad(params, batch)
    l2, g2 = mean_loss_and_grad(params, doubled)
    assert abs(l1 - l2) <= 1e-12 * max(1.0, abs(l1))
    assert np.abs(g1 - g2).max() <= 1e-12


def test_softmax_stability_extreme_logits():
    spec = NetworkSpec((2, 2), "relu")
    flat = np.array([1000.0, -1000.0, 0.0, 0.0, 0.0, 0.0])
    params = ParamVector(flat, spec)
    batch = Batch(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([0, 1]))
    loss, grad = mean_loss_and_grad(params, batch)
    assert np.isfinite(loss)
    assert np.all(np.isfinite(grad))


def test_evaluate_accuracy_hand_built_separator():
    # single affine layer whose weight columns point at each class cluster
    spec = NetworkSpec((2, 3), "relu")
    flat = np.zeros(spec.param_dim)
    params = ParamVector(flat, spec)
    params.weights(0)[:] = np.array([[1.0, 0.0, -1.0],
                                     [0.0, 1.0, -1.0]])

    class Points:
        inputs = np.array([[2.0, 0.0], [3.0, 1.0], [0.0, 2.0],
                           [1.0, 3.0], [-2.0, -2.0], [-3.0, -1.0]])
        labels = np.array([0, 0, 1, 1, 2, 2])

    assert evaluate_accuracy(params, Points) == 100.0


def test_evaluate_accuracy_ties_choose_lowest_class():
    spec = NetworkSpec((3, 4), "relu")
    zero = ParamVector(np.zeros(spec.param_dim), spec)

    class Points:
        inputs = np.zeros((4, 3))
        labels = np.array([0, 0, 1, 2])

    assert evaluate_accuracy(zero, Points) == 50.0


def test_apply_update_is_descent_step():
    spec = NetworkSpec((3, 2), "relu")
    params = init_params(spec, 5)
    g = np.arange(spec.param_dim, dtype=float)
    out = apply_update(params, g, 0.5)
    assert np.array_equal(out.flat, params.flat - 0.5 * g)
    with pytest.raises(ValueError):
        apply_update(params, np.zeros(3), 0.1)


def test_batch_validation_errors():
    spec = NetworkSpec((3, 4, 2), "relu")
    params = init_params(spec, 0)
    with pytest.raises(ValueError):
        mean_loss_and_grad(params, Batch(np.zeros((0, 3)), np.zeros(0, dtype=int)))
    with pytest.raises(ValueError):
        mean_loss_and_grad(params, Batch(np.zeros((2, 5)), np.array([0, 1])))
    with pytest.raises(ValueError):
        mean_loss_and_grad(params, Batch(np.zeros((2, 3)), np.array([0, 2])))
    with pytest.raises(ValueError):
        mean_loss_and_grad(params, Batch(np.full((2, 3), np.nan), np.array([0, 1])))


class _ArrayData:
    def __init__(self, inputs, labels):
        self.inputs = inputs
        self.labels = labels


def test_pretrain_zero_epochs_returns_init():
    spec = NetworkSpec((4, 6, 3), "relu")
    rng = np.random.default_rng(8)
    ds = _ArrayData(rng.normal(size=(30, 4)), rng.integers(0, 3, size=30))
    out = pretrain(spec, ds, epochs=0, batch_size=8, eta=0.1, seed=4)
    assert np.array_equal(out.flat, init_params(spec, 4).flat)


def test_pretrain_deterministic_and_learns():
    spec = NetworkSpec((2, 8, 2), "relu")
    rng = np.random.default_rng(12)
    x = np.vstack([rng.normal(size=(40, 2)) + [3, 0], rng.normal(size=(40, 2)) - [3, 0]])
    y = np.array([0] * 40 + [1] * 40)
    ds = _ArrayData(x, y)
    a = pretrain(spec, ds, epochs=40, batch_size=16, eta=0.1, seed=0)
    b = pretrain(spec, ds, epochs=40, batch_size=16, eta=0.1, seed=0)
    assert np.array_equal(a.flat, b.flat)
    assert evaluate_accuracy(a, ds) >= 95.0


def test_checkpoint_round_trip_bit_exact(tmp_path):
    spec = NetworkSpec((5, 9, 4), "tanh")
    params = init_params(spec, 31)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params, seed=31)
    loaded, meta = load_checkpoint(path)
    assert loaded.spec == spec
    assert meta["seed"] == 31
    assert meta["d"] == spec.param_dim
    assert np.array_equal(loaded.flat, params.flat)
    # byte-identical re-save
    first = path.read_bytes()
    save_checkpoint(path, loaded, seed=31)
    assert path.read_bytes() == first


def test_checkpoint_rejects_corruption(tmp_path):
    spec = NetworkSpec((3, 2), "relu")
    params = init_params(spec, 1)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params, seed=1)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])  # truncate one value
    with pytest.raises(ValueError):
        load_checkpoint(path)
    path.write_bytes(b"NOT-A-CKPT v9\n" + blob.split(b"\n", 1)[1])
    with pytest.raises(ValueError):
        load_checkpoint(path)
