"""Test the layers, reverse-mode gradients, AdamW and checkpoint files."""

# pylint: disable=protected-access,redefined-outer-name
from dataclasses import replace
import json
import logging
from pathlib import Path
import struct

import numpy as np
import pytest

from pairplan.exceptions import PairPlanIOError
from pairplan.nn import (
    Checkpoint,
    CheckpointFormatError,
    ContractViolation,
    GradientSet,
    Manifest,
    OptimizerState,
    ParameterSet,
    Sequential,
    ShapeError,
    adamw_step,
    attention,
    dense,
    embedding,
    finite_diff_check,
    layer_norm,
    load_checkpoint,
    save_checkpoint,
)
from pairplan.settings import OptimConfig

logger = logging.getLogger(__name__)


def _mlp() -> tuple[Sequential, ParameterSet]:
    manifest = Manifest.of([dense("hidden", 3, 4, "gelu"), dense("out", 4, 2)])
    return Sequential(manifest), ParameterSet.initialize(manifest, np.random.default_rng(0))


def _weighted_loss(network: Sequential, inputs: np.ndarray, weights: np.ndarray, context=None):
    """Loss sum(w * net(x)) as a finite_diff_check callback."""

    def loss_fn(params: ParameterSet) -> tuple[float, GradientSet]:
        out, cache = network.forward(params, inputs, context)
        return float(np.sum(out * weights)), network.backward(params, cache, weights)

    return loss_fn


def test_zero_parameters_give_zero_output() -> None:
    """Test that an all-zero dense stack maps any input to zero."""
    network, params = _mlp()
    out, _ = network.forward(ParameterSet.zeros(params.manifest), np.ones((5, 3)))
    np.testing.assert_array_equal(out, np.zeros((5, 2)))


def test_identity_layer() -> None:
    """Test that an identity weight matrix without activation is the identity."""
    manifest = Manifest.of([dense("eye", 3, 3)])
    values = np.concatenate([np.eye(3).ravel(), np.zeros(3)])
    network = Sequential(manifest)
    params = ParameterSet(manifest, values)
    x = np.array([[1.0, -2.0, 0.5]])
    out, cache = network.forward(params, x)
    np.testing.assert_array_equal(out, x)
    grads = network.backward(params, cache, np.ones_like(out))
    np.testing.assert_array_equal(grads.input_grad, np.ones_like(x))


def test_single_token_attention() -> None:
    """Test that attention over one token returns its value projection."""
    manifest = Manifest.of([attention("attn", 4, 2)])
    params = ParameterSet.initialize(manifest, np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(1, 4))
    out, _ = Sequential(manifest).forward(params, x)
    expected = x @ params.view("attn", "wv") @ params.view("attn", "wo")
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_forward_shape_errors() -> None:
    """Test that mismatched inputs and foreign parameters are rejected."""
    network, params = _mlp()
    with pytest.raises(ShapeError):
        network.forward(params, np.ones((2, 5)))
    other = ParameterSet.zeros(Manifest.of([dense("x", 3, 2)]))
    with pytest.raises(ShapeError):
        network.forward(other, np.ones((2, 3)))
    with pytest.raises(ShapeError):
        ParameterSet(params.manifest, np.zeros(3))
    with pytest.raises(ShapeError):
        Sequential(Manifest.of([embedding("table", 3, 2)]))


def test_cross_attention_needs_context() -> None:
    """Test that a cross-attention layer without context is a shape error."""
    manifest = Manifest.of([attention("cross", 4, 2, cross=True)])
    params = ParameterSet.initialize(manifest, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        Sequential(manifest).forward(params, np.ones((2, 4)))


def test_stale_cache() -> None:
    """Test that backward against other parameters is a contract violation."""
    network, params = _mlp()
    out, cache = network.forward(params, np.ones((1, 3)))
    with pytest.raises(ContractViolation):
        network.backward(params.replace(params.values * 2.0), cache, np.ones_like(out))


def test_quadratic_gradient() -> None:
    """Test that f(theta) = theta^2 at 3 has gradient 6 matching central differences."""
    manifest = Manifest.of([embedding("theta", 1, 1)])
    params = ParameterSet(manifest, np.array([3.0]))

    def loss_fn(p: ParameterSet) -> tuple[float, GradientSet]:
        theta = float(p.values[0])
        return theta**2, GradientSet(manifest, np.array([2.0 * theta]))

    _, grads = loss_fn(params)
    assert grads.values[0] == 6.0
    assert finite_diff_check(params, loss_fn).max_rel_err < 1e-8


def test_linear_loss_gradcheck() -> None:
    """Test that a linear loss has a numerically exact gradient."""
    manifest = Manifest.of([embedding("theta", 2, 3)])
    coefficients = np.array([0.5, -1.0, 2.0, 0.25, 1.5, -0.75])
    params = ParameterSet(manifest, np.random.default_rng(3).normal(size=6))

    def loss_fn(p: ParameterSet) -> tuple[float, GradientSet]:
        return float(coefficients @ p.values), GradientSet(manifest, coefficients.copy())

    report = finite_diff_check(params, loss_fn)
    assert report.passed
    assert report.checked == 6
    assert report.max_rel_err < 1e-8


def test_mlp_gradcheck() -> None:
    """Test that dense backward matches central differences coordinate-wise."""
    network, params = _mlp()
    rng = np.random.default_rng(4)
    loss_fn = _weighted_loss(network, rng.normal(size=(5, 3)), rng.normal(size=(5, 2)))
    report = finite_diff_check(params, loss_fn, tolerance=1e-4)
    assert report.checked == len(params)
    assert report.passed, report


def test_attention_block_gradcheck() -> None:
    """Test gradients of a pre-norm self- and cross-attention stack."""
    manifest = Manifest.of(
        [
            layer_norm("ln", 4),
            attention("self", 4, 2),
            attention("cross", 4, 2, cross=True),
            dense("head", 4, 3, "gelu"),
        ]
    )
    rng = np.random.default_rng(5)
    params = ParameterSet.initialize(manifest, rng)
    network = Sequential(manifest)
    loss_fn = _weighted_loss(
        network, rng.normal(size=(3, 4)), rng.normal(size=(3, 3)), context=rng.normal(size=(2, 4))
    )
    report = finite_diff_check(params, loss_fn, tolerance=1e-4, projections=24)
    assert report.checked == 24
    assert report.passed, report


def test_corrupted_gradient_fails() -> None:
    """Test that a gradient scaled by 1.1 fails the check."""
    network, params = _mlp()
    rng = np.random.default_rng(6)
    honest = _weighted_loss(network, rng.normal(size=(4, 3)), rng.normal(size=(4, 2)))

    def corrupted(p: ParameterSet) -> tuple[float, GradientSet]:
        loss, grads = honest(p)
        return loss, grads.scaled(1.1)

    assert not finite_diff_check(params, corrupted).passed


def test_adamw_decoupled_decay() -> None:
    """Test that zero gradients only apply the decoupled weight decay."""
    _, params = _mlp()
    state = OptimizerState.create(params, OptimConfig(lr=0.01, weight_decay=0.1))
    updated, state = adamw_step(params, GradientSet.like(params), state)
    np.testing.assert_allclose(updated.values, params.values * (1.0 - 0.001), rtol=1e-12)
    assert state.step == 1


def test_adamw_zero_learning_rate() -> None:
    """Test that a zero learning rate leaves the parameters unchanged."""
    _, params = _mlp()
    state = OptimizerState.create(params, OptimConfig(lr=0.0, weight_decay=0.1))
    grads = GradientSet(params.manifest, np.ones(len(params)))
    updated, _ = adamw_step(params, grads, state)
    np.testing.assert_array_equal(updated.values, params.values)


def test_adamw_is_deterministic() -> None:
    """Test that identical inputs give bit-identical updates."""
    _, params = _mlp()
    grads = GradientSet(params.manifest, np.random.default_rng(7).normal(size=len(params)))
    config = OptimConfig(lr=1e-2, weight_decay=0.01)
    a, _ = adamw_step(params, grads, OptimizerState.create(params, config))
    b, _ = adamw_step(params, grads, OptimizerState.create(params, config))
    np.testing.assert_array_equal(a.values, b.values)


def test_adamw_skips_non_finite(caplog: pytest.LogCaptureFixture) -> None:
    """Test that a non-finite gradient skips the update and is logged."""
    _, params = _mlp()
    values = np.zeros(len(params))
    values[0] = np.nan
    state = OptimizerState.create(params, OptimConfig())
    with caplog.at_level(logging.WARNING):
        updated, state = adamw_step(params, GradientSet(params.manifest, values), state)
    assert updated is params
    assert state.skipped == 1
    assert state.step == 0
    assert "non-finite gradient" in caplog.text


def test_cosine_schedule() -> None:
    """Test that the cosine schedule decays from lr to min_lr."""
    _, params = _mlp()
    config = OptimConfig(lr=1e-2, schedule="cosine", min_lr=1e-4)
    state = OptimizerState.create(params, config, total_steps=10)
    assert state.learning_rate() == pytest.approx(1e-2)
    halfway = replace(state, step=5)
    assert halfway.learning_rate() == pytest.approx((1e-2 + 1e-4) / 2)
    done = replace(state, step=10)
    assert done.learning_rate() == pytest.approx(1e-4)


def test_checkpoint_round_trip(tmp_path: Path) -> None:
    """Test that parameters, optimizer moments and metadata survive bit-exactly."""
    _, params = _mlp()
    grads = GradientSet(params.manifest, np.random.default_rng(8).normal(size=len(params)))
    updated, state = adamw_step(params, grads, OptimizerState.create(params, OptimConfig()))
    path = save_checkpoint(
        tmp_path / "ckpt" / "model.ckpt",
        Checkpoint("il", updated, rng_seed=11, step=1, metadata={"note": "x"}, optimizer=state),
    )
    loaded = load_checkpoint(path, role="il")
    assert loaded.params.values.tobytes() == updated.values.tobytes()
    assert loaded.params.manifest == updated.manifest
    assert loaded.rng_seed == 11
    assert loaded.step == 1
    assert loaded.metadata == {"note": "x"}
    assert loaded.optimizer is not None
    np.testing.assert_array_equal(loaded.optimizer.m, state.m)
    np.testing.assert_array_equal(loaded.optimizer.v, state.v)
    assert loaded.optimizer.step == state.step


def test_checkpoint_truncated(tmp_path: Path) -> None:
    """Test that a truncated checkpoint is a format error."""
    _, params = _mlp()
    path = save_checkpoint(tmp_path / "model.ckpt", Checkpoint("rl", params))
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)
    path.write_bytes(raw[:4])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_checkpoint_version_gate(tmp_path: Path) -> None:
    """Test that another format version is rejected naming both versions."""
    header = json.dumps({"format": "pairplan_ckpt_v0", "role": "il"}).encode("utf-8")
    path = tmp_path / "old.ckpt"
    path.write_bytes(struct.pack("<Q", len(header)) + header)
    with pytest.raises(CheckpointFormatError) as err:
        load_checkpoint(path)
    assert err.value.expected == "pairplan_ckpt_v1"
    assert err.value.found == "pairplan_ckpt_v0"
    assert "pairplan_ckpt_v0" in str(err.value)


def test_checkpoint_role_and_io(tmp_path: Path) -> None:
    """Test that a wrong role and a missing file are reported."""
    _, params = _mlp()
    path = save_checkpoint(tmp_path / "model.ckpt", Checkpoint("rwm", params))
    with pytest.raises(CheckpointFormatError) as err:
        load_checkpoint(path, role="il")
    assert err.value.found == "rwm"
    with pytest.raises(PairPlanIOError):
        load_checkpoint(tmp_path / "missing.ckpt")
