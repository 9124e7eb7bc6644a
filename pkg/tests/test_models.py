import numpy as np
import pytest

from vertfed import models
from vertfed.models import (
    LINEAR,
    LOGISTIC,
    LOGISTIC_TAYLOR,
    SVM,
    centralized_train,
    compute_u,
    oracle_gradient,
    oracle_loss,
)


def test_compute_u_examples():
    assert compute_u(LOGISTIC, [0.0], [0.0])[0] == pytest.approx(0.5)
    assert compute_u(LOGISTIC_TAYLOR, [0.0], [1.0])[0] == pytest.approx(-0.5)
    assert compute_u(SVM, [2.0], [1.0])[0] == pytest.approx(0.0)
    assert compute_u(SVM, [0.0], [1.0])[0] == pytest.approx(-2.0)
    assert compute_u(LINEAR, [1.5], [1.0])[0] == pytest.approx(0.5)


def test_compute_u_label_validation():
    with pytest.raises(ValueError):
        compute_u(LOGISTIC, [0.0], [-1.0])
    with pytest.raises(ValueError):
        compute_u(SVM, [0.0], [0.5])


def test_label_mapping():
    y = [0.0, 1.0, 1.0]
    assert list(models.map_labels(SVM, y)) == [-1.0, 1.0, 1.0]
    assert list(models.map_labels(LOGISTIC, y)) == y
    with pytest.raises(ValueError):
        models.map_labels(LOGISTIC, [0.0, 2.0])


def test_protocol_modes():
    assert models.protocol_mode(LINEAR) == "linear"
    assert models.protocol_mode(LOGISTIC_TAYLOR) == "linear"
    assert models.protocol_mode(LOGISTIC) == "nonlinear"
    assert models.protocol_mode(SVM) == "nonlinear"
    assert models.residual_transform(LOGISTIC_TAYLOR) == (0.25, 0.5)
    with pytest.raises(ValueError):
        models.check_kind("decision_tree")


def test_oracle_gradient_examples():
    g = oracle_gradient(LINEAR, [[2.0, 0.0]], [1.0], [0.0, 0.0], 0.0)
    assert np.allclose(g, [-2.0, 0.0])
    g = oracle_gradient(LOGISTIC_TAYLOR, [[2.0, 0.0]], [1.0], [0.0, 0.0], 0.0)
    assert np.allclose(g, [-1.0, 0.0])


def test_oracle_loss_examples():
    assert oracle_loss(LOGISTIC, [[0.0]], [1.0], [0.0]) == pytest.approx(np.log(2))
    # exact fit: zero residual
    assert oracle_loss(LINEAR, [[1.0, 2.0]], [1.0], [1.0, 0.0]) == pytest.approx(0.0)
    # all margins satisfied
    assert oracle_loss(SVM, [[3.0]], [1.0], [1.0]) == pytest.approx(0.0)


def _finite_difference(kind, X, y, w, lam, h=1e-6):
    grad = np.zeros_like(w)
    for j in range(len(w)):
        up = w.copy()
        up[j] += h
        dn = w.copy()
        dn[j] -= h
        grad[j] = (oracle_loss(kind, X, y, up, lam) - oracle_loss(kind, X, y, dn, lam)) / (2 * h)
    return grad


@pytest.mark.parametrize("kind", models.KINDS)
def test_gradient_matches_finite_differences(kind):
    rng = np.random.default_rng(hash(kind) % 2**32)
    for _ in range(20):
        s, d = rng.integers(2, 7), rng.integers(1, 5)
        X = rng.uniform(-1, 1, (s, d))
        y01 = rng.integers(0, 2, s).astype(float)
        y = models.map_labels(kind, y01)
        w = rng.normal(0, 0.5, d)
        lam = float(rng.uniform(0, 0.1))
        if kind == SVM:  # stay away from the hinge kink
            while np.any(np.abs(1.0 - y * (X @ w)) < 1e-3):
                w = rng.normal(0, 0.5, d)
        analytic = oracle_gradient(kind, X, y, w, lam)
        numeric = _finite_difference(kind, X, y, w, lam)
        scale = max(1.0, float(np.abs(numeric).max()))
        assert np.abs(analytic - numeric).max() / scale < 1e-5


@pytest.mark.parametrize("kind", models.KINDS)
def test_compute_u_composes_to_gradient(kind):
    rng = np.random.default_rng(11)
    X = rng.uniform(0, 1, (6, 4))
    y = models.map_labels(kind, rng.integers(0, 2, 6).astype(float))
    w = rng.normal(0, 0.5, 4)
    u = compute_u(kind, X @ w, y)
    manual = X.T @ u / 6 + 0.05 * w
    assert np.allclose(manual, oracle_gradient(kind, X, y, w, 0.05))


def test_taylor_reduces_to_linear_path_on_transformed_residual():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, (8, 3))
    y = rng.integers(0, 2, 8).astype(float)
    w = rng.normal(0, 0.5, 3)
    z = X @ w
    c1, c0 = models.residual_transform(LOGISTIC_TAYLOR)
    folded = c1 * z - y + c0  # what the linear-path parties submit in sum
    assert np.allclose(folded, compute_u(LOGISTIC_TAYLOR, z, y))
    grad_via_linear_pipeline = X.T @ folded / 8
    assert np.allclose(grad_via_linear_pipeline, oracle_gradient(LOGISTIC_TAYLOR, X, y, w))


def test_folded_loss_identities():
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 1, (10, 3))
    y = rng.integers(0, 2, 10).astype(float)
    w = rng.normal(0, 0.5, 3)
    z = X @ w
    u_lin = compute_u(LINEAR, z, y)
    assert models.folded_loss(LINEAR, u_lin, w, 0.02) == pytest.approx(
        oracle_loss(LINEAR, X, y, w, 0.02)
    )
    u_tay = compute_u(LOGISTIC_TAYLOR, z, y)
    assert models.folded_loss(LOGISTIC_TAYLOR, u_tay, w, 0.02) == pytest.approx(
        oracle_loss(LOGISTIC_TAYLOR, X, y, w, 0.02)
    )
    assert models.scored_loss(LOGISTIC, z, y, w, 0.02) == pytest.approx(
        oracle_loss(LOGISTIC, X, y, w, 0.02)
    )
    ysvm = models.map_labels(SVM, y)
    assert models.scored_loss(SVM, z, ysvm, w, 0.02) == pytest.approx(
        oracle_loss(SVM, X, ysvm, w, 0.02)
    )


def test_centralized_train_separable_reaches_full_accuracy():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.uniform(0.6, 1.0, (30, 2)), rng.uniform(0.0, 0.4, (30, 2))])
    y = np.array([1.0] * 30 + [0.0] * 30)
    Xb = np.hstack([np.ones((60, 1)), X])
    w, _ = centralized_train(
        LOGISTIC, Xb, y, alpha=1.0, epochs=200, batch_size=16, seed=1
    )
    acc = np.mean(models.predict(LOGISTIC, Xb @ w) == y)
    assert acc == 1.0


def test_centralized_train_zero_epochs_keeps_weights():
    X = np.ones((4, 2))
    y = np.array([0.0, 1.0, 0.0, 1.0])
    w0 = np.array([0.3, -0.7])
    w, hist = centralized_train(LINEAR, X, y, alpha=0.5, epochs=0, w0=w0)
    assert np.array_equal(w, w0) and hist == []


def test_centralized_train_deterministic():
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 1, (40, 3))
    y = rng.integers(0, 2, 40).astype(float)
    runs = [
        centralized_train(LOGISTIC, X, y, alpha=0.4, epochs=5, batch_size=8, seed=42)[0]
        for _ in range(2)
    ]
    assert np.array_equal(runs[0], runs[1])


def test_centralized_train_divergence_detected():
    X = np.full((4, 1), 10.0)
    y = np.array([0.0, 1.0, 0.0, 1.0])
    with np.errstate(over="ignore"), pytest.raises(models.TrainingDivergedError):
        centralized_train(LINEAR, X, y, alpha=1e6, epochs=50, batch_size=4)
